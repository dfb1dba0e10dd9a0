#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "rspde/picard.hpp"

namespace rspde {

/// Least-squares fit of log(s_t) = intercept + t * log(rate).  The series
/// is truncated at the first nonpositive entry (flagged); a fit needs at
/// least two surviving points.
struct DecayFit {
    double rate = 0.0;
    double log_intercept = 0.0;
    int points_used = 0;
    bool truncated = false;
    bool valid = false;
};

DecayFit geometric_decay_fit(const std::vector<double>& sups);

/// Sample mean and standard error of x^p over the given values
/// (standard error uses the n-1 variance).
std::pair<double, double> estimate_sup_moment(const std::vector<double>& values,
                                              double p);

struct ReplicateRecord {
    int replicate = 0;
    std::uint64_t seed = 0;
    double sup_u = 0.0;
    int iterations = 0;
    bool converged = false;
    std::vector<double> sup_diffs;
    std::string error;  // nonempty when the replicate threw
};

struct EnsembleSummary {
    std::vector<ReplicateRecord> replicates;
    int converged_count = 0;
    int failed_count = 0;
    double p = 2.0;
    double moment = 0.0;
    double std_error = 0.0;
    DecayFit decay;  // fit of stage-averaged sup changes, first stage dropped
    ContractionReport condition;
};

/// Monte Carlo over independent noise realizations.  Replicate r draws its
/// seed with derive_seed(base_seed, r), so the ensemble is reproducible and
/// independent of the worker count; results are stored by replicate index.
/// A replicate that throws is recorded as a failure and excluded from the
/// moment and decay estimates; only a fully failed ensemble is an error.
EnsembleSummary run_ensemble(const GreenKernel& kernel,
                             const CoefficientPair& coeffs, const WallPair& walls,
                             const ContractionInputs& condition,
                             const PicardOptions& picard_opts,
                             std::uint64_t base_seed, int replicates, int workers,
                             double moment_p = 2.0);

}  // namespace rspde
