#pragma once

#include <functional>
#include <vector>

#include "cliff/autodiff.hpp"

namespace cliff::ad {

struct GradCheckResult {
    double max_rel_error = 0.0;
    std::size_t worst_index = 0;
    double analytic_at_worst = 0.0;
    double numeric_at_worst = 0.0;
};

/// Compares the analytic gradient of a scalar-valued graph against central
/// finite differences, coordinate by coordinate.
///
/// `build` must construct a scalar root from a (rows x cols) param tensor;
/// it is re-invoked for every perturbed evaluation, so any stochastic
/// choices inside it must be frozen by the caller. The returned error is
///   max_i |analytic_i - fd_i| / (|analytic_i| + |fd_i| + 1e-12).
/// Non-finite values anywhere are reported with the offending coordinate.
///
/// Coordinates where both |analytic| and |fd| fall below `zero_floor` count
/// as exact matches: a structurally zero gradient (a symmetry of the loss)
/// leaves the finite difference measuring pure rounding noise, which the
/// relative formula would misread as total disagreement.
GradCheckResult grad_check(const std::function<Tensor(const Tensor&)>& build, std::size_t rows,
                           std::size_t cols, const std::vector<double>& point, double fd_step,
                           double zero_floor = 0.0);

}  // namespace cliff::ad
