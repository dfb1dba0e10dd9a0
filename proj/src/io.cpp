#include "rspde/io.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

namespace rspde {
namespace {

void append_stamps(std::string& out, const std::vector<std::string>& stamps) {
    for (const auto& s : stamps) {
        out += "# ";
        out += s;
        out += '\n';
    }
}

}  // namespace

std::string format_double(double x) {
    if (!std::isfinite(x))
        throw ValidationError("output: refusing to serialize a non-finite value");
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", x);
    return buf;
}

std::vector<double> identity_residual(const Drift& f, const ScalarField& v,
                                      const ScalarField& z,
                                      const ReflectionMeasures& measures) {
    require_same_grid(v.grid, z.grid, "identity residual");
    require_same_grid(z.grid, measures.eta.grid, "identity residual");
    const Grid& grid = z.grid;
    const double vol = grid.cell_volume();
    ScalarField lap = laplacian_apply(z);
    std::vector<double> residual(grid.node_count(), 0.0);
    for (std::size_t i = 0; i < residual.size(); ++i) {
        const double r = lap[i] + f(grid.node(i), z[i] + v[i]);
        residual[i] = r * vol - measures.eta[i] + measures.xi[i];
    }
    return residual;
}

std::string solution_csv(const ScalarField& u, const ReflectionMeasures& measures,
                         const std::vector<double>& residual,
                         const std::vector<std::string>& stamps) {
    require_same_grid(u.grid, measures.eta.grid, "solution export");
    if (residual.size() != u.size())
        throw ValidationError("solution export: residual column length mismatch");
    const Grid& grid = u.grid;
    std::string out;
    append_stamps(out, stamps);
    out += grid.dim() == 1 ? "i,x_i,u,eta,xi,residual\n"
                           : "i,x_i,y_i,u,eta,xi,residual\n";
    for (std::size_t i = 0; i < u.size(); ++i) {
        const Point p = grid.node(i);
        out += std::to_string(i);
        out += ',';
        out += format_double(p.x);
        if (grid.dim() == 2) {
            out += ',';
            out += format_double(p.y);
        }
        out += ',';
        out += format_double(u[i]);
        out += ',';
        out += format_double(measures.eta[i]);
        out += ',';
        out += format_double(measures.xi[i]);
        out += ',';
        out += format_double(residual[i]);
        out += '\n';
    }
    return out;
}

std::string kernel_csv(const GreenKernel& kernel,
                       const std::vector<std::string>& stamps) {
    const Grid& grid = kernel.grid();
    std::string out;
    append_stamps(out, stamps);
    out += grid.dim() == 1 ? "i,j,x_i,y_j,g\n" : "i,j,x_i,y_i,x_j,y_j,g\n";
    for (std::size_t i = 0; i < kernel.size(); ++i) {
        const Point pi = grid.node(i);
        for (std::size_t j = 0; j < kernel.size(); ++j) {
            const Point pj = grid.node(j);
            out += std::to_string(i);
            out += ',';
            out += std::to_string(j);
            out += ',';
            out += format_double(pi.x);
            if (grid.dim() == 2) {
                out += ',';
                out += format_double(pi.y);
            }
            out += ',';
            out += format_double(pj.x);
            if (grid.dim() == 2) {
                out += ',';
                out += format_double(pj.y);
            }
            out += ',';
            out += format_double(kernel(i, j));
            out += '\n';
        }
    }
    return out;
}

std::string noise_csv(const NoiseSample& noise,
                      const std::vector<std::string>& stamps) {
    const Grid& grid = noise.grid;
    if (noise.increments.size() != grid.node_count())
        throw ValidationError("noise export: increment count mismatch");
    std::string out;
    append_stamps(out, stamps);
    out += grid.dim() == 1 ? "j,x_j,dW\n" : "j,x_j,y_j,dW\n";
    for (std::size_t j = 0; j < noise.increments.size(); ++j) {
        const Point p = grid.node(j);
        out += std::to_string(j);
        out += ',';
        out += format_double(p.x);
        if (grid.dim() == 2) {
            out += ',';
            out += format_double(p.y);
        }
        out += ',';
        out += format_double(noise.increments[j]);
        out += '\n';
    }
    return out;
}

std::string ensemble_csv(const EnsembleSummary& summary,
                         const std::vector<std::string>& stamps) {
    std::string out;
    append_stamps(out, stamps);
    out += "r,seed,sup_u,iterations,converged\n";
    for (const auto& rec : summary.replicates) {
        out += std::to_string(rec.replicate);
        out += ',';
        out += std::to_string(rec.seed);
        out += ',';
        out += format_double(rec.sup_u);
        out += ',';
        out += std::to_string(rec.iterations);
        out += ',';
        out += rec.converged ? '1' : '0';
        out += '\n';
    }
    return out;
}

nlohmann::json clause_json(const ClauseCheck& clause) {
    return {{"value", clause.value},
            {"tolerance", clause.tolerance},
            {"pass", clause.pass},
            {"worst_node", clause.worst_node}};
}

nlohmann::json residual_report_json(const ResidualReport& report) {
    return {{"wall", clause_json(report.wall)},
            {"measure_sign", clause_json(report.measure_sign)},
            {"disjoint_support", clause_json(report.disjoint_support)},
            {"identity", clause_json(report.identity)},
            {"complementarity_lower", clause_json(report.complementarity_lower)},
            {"complementarity_upper", clause_json(report.complementarity_upper)},
            {"pass", report.pass()}};
}

nlohmann::json condition_json(const ContractionReport& report) {
    return {{"lhs", report.lhs},
            {"satisfied", report.satisfied},
            {"inputs",
             {{"p", report.inputs.p},
              {"lambda", report.inputs.lambda},
              {"dim", report.inputs.dim},
              {"a", report.inputs.a},
              {"B", report.inputs.b_holder},
              {"cp", report.c_p_used},
              {"rd", report.inputs.r_d},
              {"cd", report.inputs.c_d},
              {"csigma", report.inputs.c_sigma}}},
            {"exponent", report.exponent}};
}

void write_text_file(const std::string& path, const std::string& content) {
    const std::filesystem::path p(path);
    if (p.has_parent_path()) {
        std::error_code ec;
        std::filesystem::create_directories(p.parent_path(), ec);
        if (ec)
            throw ValidationError("output: cannot create directory " +
                                  p.parent_path().string());
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ValidationError("output: cannot open " + path);
    out << content;
    if (!out) throw ValidationError("output: short write to " + path);
}

}  // namespace rspde
