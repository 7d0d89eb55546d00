#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cliff/autodiff.hpp"

namespace cliff::density {

/// Raised when a factor column is (numerically) constant and cannot be
/// standardized or density-estimated.
struct DegenerateFactorError : Error {
    using Error::Error;
};

/// Raised when a conditioning value lands where the conditioning marginal
/// vanishes (only possible when zeta was not drawn from the batch).
struct ConditioningError : Error {
    using Error::Error;
};

/// Gaussian Parzen-window bandwidth plus the evaluation grid for the 1-D
/// integrals along a standardized factor.
struct KernelConfig {
    double sigma = 0.1;
    double grid_a = -5.0;
    double grid_b = 5.0;
    int grid_k = 100;

    void validate() const;
};

/// K equally spaced values a + (b-a)*g/K, g = 0..K-1 (left-endpoint rule).
std::vector<double> make_grid(double a, double b, int k);

struct StandardizedBatch {
    ad::Tensor values;                // n x d, zero mean / unit variance per column
    std::vector<ad::Tensor> columns;  // the d standardized columns, n x 1
    std::vector<double> means;        // pre-standardization, per column
    std::vector<double> stds;         // pre-standardization (population convention)

    std::size_t n() const { return values.rows(); }
    std::size_t d() const { return values.cols(); }
};

/// Per-batch affine normalization of each factor to zero mean and unit
/// variance (population 1/n convention). Differentiable: gradients flow
/// through the mean and the standard deviation.
StandardizedBatch standardize(const ad::Tensor& batch);

enum class GridKind {
    marginal,
    marginal_derivative,
    joint,
    joint_partial,
    conditional_derivative,
    conditional_derivative_magnitude,
};

/// Density (or density-derivative) values tabulated on an evaluation grid.
/// `values` is K x 1 for marginal kinds and K x M for conditional families.
struct DensityGrid {
    std::vector<double> points;
    double spacing = 0.0;
    ad::Tensor values;
    GridKind kind = GridKind::marginal;
};

/// Running tally of kernel evaluations, counted as (evaluation point,
/// sample) pairs per estimator family. Thread-local; independent graphs on
/// separate threads keep independent tallies.
struct KernelEvalCounts {
    std::uint64_t marginal_1d = 0;
    std::uint64_t marginal_derivative_1d = 0;
    std::uint64_t joint_partial_2d = 0;
};

KernelEvalCounts& kernel_eval_counts();
void reset_kernel_eval_counts();

/// p(z_i) on the given points: (1/n) sum_k N(p; z_i^(k), sigma^2).
DensityGrid marginal_pdf(const StandardizedBatch& batch, std::size_t i,
                         const std::vector<double>& at, const KernelConfig& cfg);

/// d p(z_i) / d z_i on the given points (analytic kernel derivative).
DensityGrid marginal_pdf_derivative(const StandardizedBatch& batch, std::size_t i,
                                    const std::vector<double>& at, const KernelConfig& cfg);

/// d p(z_i, z_j) / d z_i on the (at_i x zeta) product grid, using the
/// product Gaussian kernel with diagonal covariance sigma^2 I. K x M.
DensityGrid joint_pdf_partial(const StandardizedBatch& batch, std::size_t i, std::size_t j,
                              const std::vector<double>& at_i, const std::vector<double>& zeta,
                              const KernelConfig& cfg);

/// d p(z_i | z_j) / d z_i: the joint partial at each zeta_m divided by the
/// marginal of z_j there. K x M. zeta values must come from the batch.
DensityGrid conditional_derivative(const StandardizedBatch& batch, std::size_t i, std::size_t j,
                                   const std::vector<double>& at_i,
                                   const std::vector<double>& zeta, const KernelConfig& cfg);

/// spacing * sum(values), as a differentiable scalar.
ad::Tensor integrate(const DensityGrid& grid);

/// CSV dump (columns: grid_point,value[,conditioning_index]) for plotting.
std::string to_csv(const DensityGrid& grid);

}  // namespace cliff::density
