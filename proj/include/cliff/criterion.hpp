#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "cliff/autodiff.hpp"
#include "cliff/density.hpp"

namespace cliff::criterion {

enum class Divergence { jsd, squared_hellinger };

/// How the M conditioning values zeta are picked from the batch.
enum class ZetaPolicy { random_from_batch, first_m };

struct CliffWeights {
    double lambda_uni = 0.0;
    double lambda_biv = 1.0;
    double lambda_kl_uni = 1.0;
    int m_conditioning = 20;
    density::KernelConfig kernel;
    Divergence divergence = Divergence::jsd;
    ZetaPolicy zeta_policy = ZetaPolicy::random_from_batch;
    /// When true, the anti-collapse expectation uses random uniform draws
    /// instead of the deterministic equally spaced points.
    bool kl_random_sampling = false;

    void validate() const;
};

/// Kernel evaluations attributed to each loss term of one batch.
struct TermEvalCounts {
    std::uint64_t uni_1d = 0;        // marginal-derivative evals inside l_uni
    std::uint64_t biv_joint_2d = 0;  // product-kernel evals inside l_biv
    std::uint64_t biv_cond_1d = 0;   // conditioning-marginal evals inside l_biv
    std::uint64_t kl_1d = 0;         // marginal evals inside l_KL-uni
};

struct CliffLossReport {
    double l_uni = 0.0;
    double l_biv = 0.0;
    double l_kl_uni = 0.0;
    double total = 0.0;
    std::vector<double> per_factor_entropy;          // length d
    std::vector<std::vector<double>> per_pair_jsd;   // d x d, diagonal unused
    TermEvalCounts counts;
};

/// Frozen conditioning values per ordered pair (i, j), j != i, indexed as
/// pair_index = i * d + j. Values are detached evaluation points.
struct ZetaSelection {
    std::size_t d = 0;
    std::vector<std::vector<double>> values;  // d*d entries; empty on diagonal

    const std::vector<double>& at(std::size_t i, std::size_t j) const {
        return values[i * d + j];
    }
};

/// Picks M sample indices per ordered pair. The same index set is resolved
/// against the standardized batch when the loss is evaluated.
struct ZetaIndices {
    std::size_t d = 0;
    std::vector<std::vector<std::size_t>> indices;  // d*d entries

    const std::vector<std::size_t>& at(std::size_t i, std::size_t j) const {
        return indices[i * d + j];
    }
};

ZetaIndices draw_zeta_indices(std::size_t n, std::size_t d, int m, ZetaPolicy policy,
                              std::mt19937_64& rng);

/// Resolves index draws to concrete (detached) conditioning values.
ZetaSelection resolve_zetas(const density::StandardizedBatch& batch, const ZetaIndices& idx);

/// s_i = |d p(z_i)/d z_i| / c with c the integral of the magnitude; the
/// spacing-weighted sum of the result is 1.
density::DensityGrid normalized_derivative_magnitude(const density::StandardizedBatch& batch,
                                                     std::size_t i,
                                                     const density::KernelConfig& cfg);

/// -integral of v log v over the grid (epsilon-guarded log).
ad::Tensor differential_entropy(const density::DensityGrid& normalized);

struct UniResult {
    ad::Tensor loss;
    std::vector<double> per_factor_entropy;
};
UniResult loss_uni(const density::StandardizedBatch& batch, const density::KernelConfig& cfg);

/// Generalized JSD (or squared Hellinger) across the M normalized
/// conditional derivative-magnitude profiles of factor i given factor j.
ad::Tensor jsd_pairwise(const density::StandardizedBatch& batch, std::size_t i, std::size_t j,
                        const std::vector<double>& zeta, const density::KernelConfig& cfg,
                        Divergence divergence = Divergence::jsd);

struct BivResult {
    ad::Tensor loss;
    std::vector<std::vector<double>> per_pair;  // d x d
};
BivResult loss_biv(const density::StandardizedBatch& batch, const CliffWeights& weights,
                   const ZetaSelection& zetas);

/// Sum over factors of KL(U(-sqrt3, sqrt3) || p(z_i)), the anti-collapse
/// term. The uniform expectation runs over cfg.grid_k points in
/// [-sqrt3, sqrt3].
ad::Tensor loss_kl_uni(const density::StandardizedBatch& batch, const density::KernelConfig& cfg,
                       bool random_sampling = false, std::mt19937_64* rng = nullptr);

struct TotalLoss {
    ad::Tensor total;
    CliffLossReport report;
};

/// Standardizes the raw batch internally, evaluates the active terms with
/// the given conditioning values, and combines them with the weights.
TotalLoss total_loss(const ad::Tensor& raw_batch, const CliffWeights& weights,
                     const ZetaSelection& zetas);

/// Convenience overload: draws zeta indices from rng, resolves them against
/// the standardized batch.
TotalLoss total_loss(const ad::Tensor& raw_batch, const CliffWeights& weights,
                     std::mt19937_64& rng);

}  // namespace cliff::criterion
