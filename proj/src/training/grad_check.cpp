#include "compsearch/training/grad_check.hpp"

#include "compsearch/error.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

namespace compsearch::training {

GradCheckReport grad_check(const DifferentiableFn& fn, const Eigen::VectorXd& params,
                           const GradCheckOptions& options, std::mt19937_64& rng) {
  if (!(options.h > 0.0)) throw Error(Errc::NonFinite, "finite-difference step must be positive");
  const auto analytic = fn(params);
  if (!std::isfinite(analytic.loss) || !analytic.gradient.allFinite()) {
    throw Error(Errc::NonFinite, "loss or gradient is not finite at the check point");
  }
  if (analytic.gradient.size() != params.size()) {
    throw Error(Errc::ShapeMismatch, "gradient length differs from parameter length");
  }

  std::vector<std::size_t> coords(static_cast<std::size_t>(params.size()));
  std::iota(coords.begin(), coords.end(), std::size_t{0});
  if (options.max_coordinates != 0 && options.max_coordinates < coords.size()) {
    std::shuffle(coords.begin(), coords.end(), rng);
    coords.resize(options.max_coordinates);
    std::sort(coords.begin(), coords.end());
  }

  GradCheckReport report;
  Eigen::VectorXd probe = params;
  for (const std::size_t c : coords) {
    const auto i = static_cast<Eigen::Index>(c);
    probe[i] = params[i] + options.h;
    const double up = fn(probe).loss;
    probe[i] = params[i] - options.h;
    const double down = fn(probe).loss;
    probe[i] = params[i];
    if (!std::isfinite(up) || !std::isfinite(down)) {
      throw Error(Errc::NonFinite, "loss is not finite near coordinate " + std::to_string(c));
    }
    const double numeric = (up - down) / (2.0 * options.h);
    const double a = analytic.gradient[i];
    const double denom = std::max({std::abs(a), std::abs(numeric), options.floor});
    const double rel = std::abs(a - numeric) / denom;
    if (rel > report.max_rel_error) {
      report.max_rel_error = rel;
      report.worst_coordinate = c;
    }
  }
  report.coordinates_checked = coords.size();
  report.passed = report.max_rel_error < options.tolerance;
  return report;
}

}  // namespace compsearch::training
