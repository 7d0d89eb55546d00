#pragma once

#include <cstdint>
#include <vector>

#include "cliff/autodiff.hpp"

namespace cliff::synth {

/// An n x d matrix of factor values with provenance.
struct LatentBatch {
    enum class Provenance { true_z, observed_x, recovered_z };

    std::size_t n = 0;
    std::size_t d = 0;
    std::vector<double> values;  // row-major
    Provenance provenance = Provenance::true_z;

    double at(std::size_t row, std::size_t col) const { return values[row * d + col]; }
    double& at(std::size_t row, std::size_t col) { return values[row * d + col]; }
    std::vector<double> column(std::size_t col) const;
};

/// Piecewise-uniform latent density on [0,1]^d whose discontinuities form an
/// axis-aligned grid: per-factor thresholds cut the box into cells, each
/// carrying its own mass. Every threshold is a genuine jump: the density
/// ratio across any adjacent cell pair is at least min_jump.
struct GridDensitySpec {
    int d = 0;
    std::vector<std::vector<double>> thresholds;  // per factor, sorted, strictly inside (0,1)
    std::vector<double> cell_masses;              // row-major over bins, positive, sums to 1
    double min_jump = 2.0;

    std::size_t bins(std::size_t factor) const { return thresholds[factor].size() + 1; }
    std::size_t cell_count() const;
    std::size_t cell_index(const std::vector<int>& multi) const;
    /// Cell bounds along one factor for a given bin.
    std::pair<double, double> bin_bounds(std::size_t factor, int bin) const;
    double cell_volume(const std::vector<int>& multi) const;

    void validate() const;
};

/// Draws thresholds and jump-constrained cell masses from a seed.
GridDensitySpec make_random_spec(const std::vector<int>& thresholds_per_factor,
                                 std::uint64_t seed, double min_jump = 2.0);

/// Keeps the given cut locations and draws only the cell masses.
GridDensitySpec make_spec_with_thresholds(std::vector<std::vector<double>> thresholds,
                                          std::uint64_t seed, double min_jump = 2.0);

/// Ground-truth mixing x = B tanh(A (scale z)), a diffeomorphism on the
/// sampled range when A and B are well-conditioned.
struct MixingSpec {
    int d = 0;
    std::vector<double> a;  // d x d row-major
    std::vector<double> b;  // d x d row-major
    double scale = 0.5;

    void validate(double max_condition = 20.0) const;
};

MixingSpec make_random_mixing(int d, std::uint64_t seed, double max_condition = 20.0);

/// i.i.d. draws: cell by mass, uniform within the cell. Bit-reproducible
/// from the seed.
LatentBatch sample_latents(const GridDensitySpec& spec, std::size_t n, std::uint64_t seed);

LatentBatch mix(const LatentBatch& latents, const MixingSpec& mixing);

/// Entry (k, i) = number of thresholds of factor i strictly below z_i^(k).
/// Samples must lie inside the support.
std::vector<int> true_quantize(const LatentBatch& latents, const GridDensitySpec& spec);

}  // namespace cliff::synth
