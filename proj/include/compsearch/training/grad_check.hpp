#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <functional>
#include <random>

namespace compsearch::training {

struct LossAndGradient {
  double loss = 0.0;
  Eigen::VectorXd gradient;
};

using DifferentiableFn = std::function<LossAndGradient(const Eigen::VectorXd&)>;

struct GradCheckReport {
  double max_rel_error = 0.0;
  std::size_t worst_coordinate = 0;
  std::size_t coordinates_checked = 0;
  bool passed = false;
};

struct GradCheckOptions {
  double h = 1e-5;
  double tolerance = 1e-4;
  // Coordinates sampled without replacement; 0 checks every coordinate.
  std::size_t max_coordinates = 0;
  // Denominator floor of the relative error |a - n| / max(|a|, |n|, floor).
  double floor = 1e-6;
};

/// Compares the analytic gradient of `fn` at `params` against central
/// differences (f(x + h e_i) - f(x - h e_i)) / 2h. Throws NonFinite when any
/// evaluation is not finite.
GradCheckReport grad_check(const DifferentiableFn& fn, const Eigen::VectorXd& params,
                           const GradCheckOptions& options, std::mt19937_64& rng);

}  // namespace compsearch::training
