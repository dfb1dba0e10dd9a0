#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "rspde/ensemble.hpp"
#include "rspde/green.hpp"
#include "rspde/grid.hpp"
#include "rspde/noise.hpp"
#include "rspde/obstacle.hpp"
#include "rspde/picard.hpp"

namespace rspde {

/// Round-trip decimal form (%.17g).  Non-finite values are refused: nothing
/// containing a NaN may reach an output artifact.
std::string format_double(double x);

/// Per-node mass defect of the discrete identity,
///   (-Lap z + f(., z+v)) * cell_volume - eta + xi,
/// the residual column of the solution export.
std::vector<double> identity_residual(const Drift& f, const ScalarField& v,
                                      const ScalarField& z,
                                      const ReflectionMeasures& measures);

/// CSV builders.  Each stamp string s becomes a leading comment line "# s".
/// Headers: solution "i,x_i,u,eta,xi,residual", kernel "i,j,x_i,y_j,g",
/// noise "j,x_j,dW", ensemble "r,seed,sup_u,iterations,converged".  On 2D
/// grids the coordinate columns widen (x_i,y_i and x_j,y_j); the 1D forms
/// are byte-stable.
std::string solution_csv(const ScalarField& u, const ReflectionMeasures& measures,
                         const std::vector<double>& residual,
                         const std::vector<std::string>& stamps = {});
std::string kernel_csv(const GreenKernel& kernel,
                       const std::vector<std::string>& stamps = {});
std::string noise_csv(const NoiseSample& noise,
                      const std::vector<std::string>& stamps = {});
std::string ensemble_csv(const EnsembleSummary& summary,
                         const std::vector<std::string>& stamps = {});

nlohmann::json clause_json(const ClauseCheck& clause);
nlohmann::json residual_report_json(const ResidualReport& report);
nlohmann::json condition_json(const ContractionReport& report);

void write_text_file(const std::string& path, const std::string& content);

}  // namespace rspde
