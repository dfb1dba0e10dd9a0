#include "rspde/ensemble.hpp"

#include <atomic>
#include <cmath>
#include <cstdint>
#include <thread>

namespace rspde {

DecayFit geometric_decay_fit(const std::vector<double>& sups) {
    DecayFit fit;
    std::vector<double> logs;
    logs.reserve(sups.size());
    for (double s : sups) {
        if (!(s > 0.0)) {
            fit.truncated = true;
            break;
        }
        logs.push_back(std::log(s));
    }
    fit.points_used = static_cast<int>(logs.size());
    if (logs.size() < 2) return fit;

    const double n = static_cast<double>(logs.size());
    double t_mean = 0.0, y_mean = 0.0;
    for (std::size_t t = 0; t < logs.size(); ++t) {
        t_mean += static_cast<double>(t);
        y_mean += logs[t];
    }
    t_mean /= n;
    y_mean /= n;
    double num = 0.0, den = 0.0;
    for (std::size_t t = 0; t < logs.size(); ++t) {
        const double dt = static_cast<double>(t) - t_mean;
        num += dt * (logs[t] - y_mean);
        den += dt * dt;
    }
    const double slope = num / den;
    fit.rate = std::exp(slope);
    fit.log_intercept = y_mean - slope * t_mean;
    fit.valid = true;
    return fit;
}

std::pair<double, double> estimate_sup_moment(const std::vector<double>& values,
                                              double p) {
    if (values.empty())
        throw ValidationError("estimate_sup_moment: empty sample");
    if (!(p > 0.0)) throw ValidationError("estimate_sup_moment: p must be positive");
    double mean = 0.0;
    for (double x : values) mean += std::pow(std::abs(x), p);
    mean /= static_cast<double>(values.size());
    if (values.size() == 1) return {mean, 0.0};
    double var = 0.0;
    for (double x : values) {
        const double d = std::pow(std::abs(x), p) - mean;
        var += d * d;
    }
    var /= static_cast<double>(values.size() - 1);
    const double se = std::sqrt(var / static_cast<double>(values.size()));
    return {mean, se};
}

EnsembleSummary run_ensemble(const GreenKernel& kernel,
                             const CoefficientPair& coeffs, const WallPair& walls,
                             const ContractionInputs& condition,
                             const PicardOptions& picard_opts,
                             std::uint64_t base_seed, int replicates, int workers,
                             double moment_p) {
    if (replicates < 1)
        throw ValidationError("run_ensemble: need at least one replicate");
    if (workers < 1) workers = 1;
    workers = std::min(workers, replicates);

    EnsembleSummary summary;
    summary.p = moment_p;
    summary.replicates.assign(static_cast<std::size_t>(replicates), {});

    PicardOptions opts = picard_opts;
    opts.throw_on_nonconvergence = false;

    std::atomic<int> next{0};

    auto worker = [&]() {
        for (;;) {
            const int r = next.fetch_add(1);
            if (r >= replicates) return;
            const std::uint64_t seed =
                derive_seed(base_seed, static_cast<std::uint64_t>(r));
            ReplicateRecord rec;
            rec.replicate = r;
            rec.seed = seed;
            try {
                const NoiseSample noise = sample_white_noise(kernel.grid(), seed);
                const PicardResult res =
                    picard_solve(kernel, coeffs, walls, noise, condition, opts);
                rec.sup_u = sup_norm(res.triplet.u);
                rec.iterations = res.iterations;
                rec.converged = res.converged;
                rec.sup_diffs = res.sup_diffs;
            } catch (const std::exception& e) {
                // Failure isolation: a bad path is recorded and counted, the
                // rest of the ensemble continues.
                rec.error = e.what();
            }
            summary.replicates[static_cast<std::size_t>(r)] = std::move(rec);
        }
    };

    if (workers == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(static_cast<std::size_t>(workers));
        for (int w = 0; w < workers; ++w) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }

    std::vector<double> sups;
    sups.reserve(summary.replicates.size());
    std::size_t min_stages = SIZE_MAX;
    for (const auto& rec : summary.replicates) {
        if (!rec.error.empty()) {
            ++summary.failed_count;
            continue;
        }
        if (rec.converged) ++summary.converged_count;
        sups.push_back(rec.sup_u);
        min_stages = std::min(min_stages, rec.sup_diffs.size());
    }
    if (sups.empty())
        throw ConvergenceError("run_ensemble: all replicates failed; first error: " +
                               summary.replicates.front().error);
    const auto [moment, se] = estimate_sup_moment(sups, moment_p);
    summary.moment = moment;
    summary.std_error = se;

    // Stage-averaged decay of the fixed-point changes.  The first change is
    // dominated by the initial guess and is dropped from the fit.
    if (min_stages != SIZE_MAX && min_stages >= 3) {
        std::vector<double> staged(min_stages, 0.0);
        for (const auto& rec : summary.replicates) {
            if (!rec.error.empty()) continue;
            for (std::size_t t = 0; t < min_stages; ++t)
                staged[t] += rec.sup_diffs[t];
        }
        for (double& s : staged)
            s /= static_cast<double>(sups.size());
        staged.erase(staged.begin());
        summary.decay = geometric_decay_fit(staged);
    }

    {
        ContractionInputs cin = condition;
        cin.dim = kernel.grid().dim();
        cin.r_d = kernel.grid().diameter();
        if (cin.c_d <= 0.0) cin.c_d = green_sup_l2(kernel);
        if (cin.c_sigma <= 0.0) cin.c_sigma = coeffs.sigma.lipschitz();
        summary.condition = contraction_condition(cin);
    }
    return summary;
}

}  // namespace rspde
