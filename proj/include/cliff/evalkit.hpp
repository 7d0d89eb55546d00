#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cliff/criterion.hpp"
#include "cliff/density.hpp"
#include "cliff/synthdata.hpp"

namespace cliff::evalkit {

/// Spearman rank correlation with average ranks on ties. Throws on n < 3 or
/// zero rank variance.
double spearman(const std::vector<double>& x, const std::vector<double>& y);

struct MccReport {
    std::vector<std::vector<double>> corr;   // d x d, |rho(true_i, rec_j)|
    std::vector<std::size_t> assignment;     // true factor i -> recovered factor
    std::vector<int> signs;                  // sign of the matched raw correlation
    double mcc = 0.0;                        // 0-100 scale
    std::vector<std::string> warnings;
};

/// Mean correlation coefficient under the best factor assignment, found by
/// exhaustive permutation (d <= 8). Constant columns correlate as 0 with a
/// warning instead of failing the whole report.
MccReport mcc(const synth::LatentBatch& true_z, const synth::LatentBatch& recovered_z);

struct DetectorConfig {
    /// Peaks must rise at least this fraction of the interior maximum.
    double min_prominence = 0.3;
    /// Peaks this close (standardized units) to the empirical sample
    /// min/max are support-edge artifacts, not quantization thresholds.
    double boundary_margin = 0.25;
};

struct FactorThresholds {
    std::vector<double> locations;  // standardized coordinates, sorted
    std::vector<double> heights;    // derivative magnitude at the peak
};

/// Local maxima of |d p(z_i)/d z_i| on the evaluation grid, filtered by
/// topographic prominence, per factor. Factors are standardized internally.
std::vector<FactorThresholds> detect_thresholds(const synth::LatentBatch& batch,
                                                const density::KernelConfig& cfg,
                                                const DetectorConfig& det = {});

struct ThresholdReport {
    std::vector<FactorThresholds> detected;
    double agreement_rate = 0.0;          // fraction of exactly matching quantized vectors
    std::vector<std::size_t> permutation; // true factor i -> recovered factor
    std::vector<int> reversals;           // +1 / -1 per true factor
    bool structural_mismatch = false;     // detected threshold counts differ from true
};

/// Best exact-match rate of quantized vectors over all factor permutations
/// and per-factor order reversals (d <= 8).
ThresholdReport quantized_agreement(const synth::LatentBatch& true_z,
                                    const synth::GridDensitySpec& true_spec,
                                    const synth::LatentBatch& recovered_z,
                                    const std::vector<FactorThresholds>& detected);

struct SweepRow {
    double theta1_deg = 0.0;
    double theta2_deg = 0.0;
    double l_uni = 0.0;
    double l_biv = 0.0;
    double l_kl_uni = 0.0;
    double total = 0.0;
    bool singular = false;  // theta1 == theta2 (mod 180): W is not invertible
};

/// Projects a 2-factor batch through W(theta1, theta2) on a full angle grid
/// over [0, 180)^2 and evaluates every loss term per cell with a fixed zeta
/// seed. Rows ordered by (theta1, theta2).
std::vector<SweepRow> landscape_sweep(const synth::LatentBatch& latents, double step_degrees,
                                      const criterion::CliffWeights& weights,
                                      std::uint64_t zeta_seed, int workers = 1);

struct UniSweepPoint {
    double theta_deg = 0.0;
    double entropy = 0.0;
};

/// 1-D sweep: entropy of the normalized derivative magnitude of the single
/// factor obtained by projecting onto w(theta).
std::vector<UniSweepPoint> sweep_univariate(const synth::LatentBatch& latents,
                                            double step_degrees,
                                            const density::KernelConfig& cfg);

std::string sweep_to_csv(const std::vector<SweepRow>& rows);

}  // namespace cliff::evalkit
