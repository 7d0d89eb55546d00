#include "cliff/synthdata.hpp"

#include <Eigen/Dense>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <string>

#include "cliff/rng.hpp"

namespace cliff::synth {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

double condition_number(const std::vector<double>& m, int d) {
    Eigen::Map<const RowMat> mat(m.data(), d, d);
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(mat);
    const auto& sv = svd.singularValues();
    if (sv(d - 1) <= 0.0) return std::numeric_limits<double>::infinity();
    return sv(0) / sv(d - 1);
}

// Iterates all (cell, axis-neighbor) pairs, calling visit(flat_a, flat_b).
template <class Visit>
void for_each_adjacent_pair(const GridDensitySpec& spec, Visit visit) {
    const std::size_t d = static_cast<std::size_t>(spec.d);
    std::vector<int> multi(d, 0);
    const std::size_t total = spec.cell_count();
    for (std::size_t flat = 0; flat < total; ++flat) {
        for (std::size_t i = 0; i < d; ++i) {
            if (multi[i] + 1 < static_cast<int>(spec.bins(i))) {
                auto up = multi;
                ++up[i];
                visit(flat, spec.cell_index(up));
            }
        }
        // advance row-major multi-index
        for (std::size_t i = d; i-- > 0;) {
            if (++multi[i] < static_cast<int>(spec.bins(i))) break;
            multi[i] = 0;
        }
    }
}

}  // namespace

std::vector<double> LatentBatch::column(std::size_t col) const {
    std::vector<double> out(n);
    for (std::size_t r = 0; r < n; ++r) out[r] = values[r * d + col];
    return out;
}

std::size_t GridDensitySpec::cell_count() const {
    std::size_t total = 1;
    for (std::size_t i = 0; i < thresholds.size(); ++i) total *= bins(i);
    return total;
}

std::size_t GridDensitySpec::cell_index(const std::vector<int>& multi) const {
    std::size_t idx = 0;
    for (std::size_t i = 0; i < multi.size(); ++i)
        idx = idx * bins(i) + static_cast<std::size_t>(multi[i]);
    return idx;
}

std::pair<double, double> GridDensitySpec::bin_bounds(std::size_t factor, int bin) const {
    const auto& cuts = thresholds[factor];
    const double lo = bin == 0 ? 0.0 : cuts[static_cast<std::size_t>(bin - 1)];
    const double hi =
        bin == static_cast<int>(cuts.size()) ? 1.0 : cuts[static_cast<std::size_t>(bin)];
    return {lo, hi};
}

double GridDensitySpec::cell_volume(const std::vector<int>& multi) const {
    double v = 1.0;
    for (std::size_t i = 0; i < multi.size(); ++i) {
        auto [lo, hi] = bin_bounds(i, multi[i]);
        v *= hi - lo;
    }
    return v;
}

void GridDensitySpec::validate() const {
    if (d < 1) throw DomainError("GridDensitySpec: d must be >= 1");
    if (thresholds.size() != static_cast<std::size_t>(d))
        throw DomainError("GridDensitySpec: thresholds list must have d entries");
    for (std::size_t i = 0; i < thresholds.size(); ++i) {
        double prev = 0.0;
        for (double t : thresholds[i]) {
            if (!(t > prev && t < 1.0))
                throw DomainError("GridDensitySpec: thresholds of factor " + std::to_string(i) +
                                  " must be strictly increasing inside (0,1)");
            prev = t;
        }
    }
    if (cell_masses.size() != cell_count())
        throw DomainError("GridDensitySpec: expected " + std::to_string(cell_count()) +
                          " cell masses, got " + std::to_string(cell_masses.size()));
    double sum = 0.0;
    for (double m : cell_masses) {
        if (!(m > 0.0)) throw DomainError("GridDensitySpec: cell masses must be positive");
        sum += m;
    }
    if (std::fabs(sum - 1.0) > 1e-9)
        throw DomainError("GridDensitySpec: cell masses must sum to 1");

    // Every threshold hyperplane must carry a visible jump.
    std::vector<double> densities(cell_masses.size());
    std::vector<int> multi(static_cast<std::size_t>(d), 0);
    for (std::size_t flat = 0; flat < densities.size(); ++flat) {
        densities[flat] = cell_masses[flat] / cell_volume(multi);
        for (std::size_t i = static_cast<std::size_t>(d); i-- > 0;) {
            if (++multi[i] < static_cast<int>(bins(i))) break;
            multi[i] = 0;
        }
    }
    for_each_adjacent_pair(*this, [&](std::size_t a, std::size_t b) {
        const double lo = std::min(densities[a], densities[b]);
        const double hi = std::max(densities[a], densities[b]);
        if (hi < min_jump * lo - 1e-12)
            throw DomainError("GridDensitySpec: adjacent cells " + std::to_string(a) + "," +
                              std::to_string(b) + " have density ratio below min_jump");
    });
}

namespace {

void draw_cell_masses(GridDensitySpec& spec, std::mt19937_64& g, double min_jump);

}  // namespace

GridDensitySpec make_random_spec(const std::vector<int>& thresholds_per_factor,
                                 std::uint64_t seed, double min_jump) {
    GridDensitySpec spec;
    spec.d = static_cast<int>(thresholds_per_factor.size());
    spec.min_jump = min_jump;
    std::mt19937_64 g(seed);

    // Thresholds keep clear of the support boundary and of each other so
    // cliffs stay resolvable on the default grid after standardization.
    for (int count : thresholds_per_factor) {
        if (count < 0) throw DomainError("make_random_spec: negative threshold count");
        std::vector<double> cuts(static_cast<std::size_t>(count));
        const double min_sep = count > 1 ? 0.5 / count : 0.0;
        for (int attempt = 0;; ++attempt) {
            for (auto& c : cuts) c = rng::uniform(g, 0.2, 0.8);
            std::sort(cuts.begin(), cuts.end());
            bool ok = true;
            for (std::size_t k = 1; k < cuts.size(); ++k)
                ok = ok && (cuts[k] - cuts[k - 1] >= min_sep);
            if (ok || attempt > 1000) break;
        }
        spec.thresholds.push_back(std::move(cuts));
    }

    draw_cell_masses(spec, g, min_jump);
    spec.validate();
    return spec;
}

GridDensitySpec make_spec_with_thresholds(std::vector<std::vector<double>> thresholds,
                                          std::uint64_t seed, double min_jump) {
    GridDensitySpec spec;
    spec.d = static_cast<int>(thresholds.size());
    spec.min_jump = min_jump;
    spec.thresholds = std::move(thresholds);
    std::mt19937_64 g(seed);
    draw_cell_masses(spec, g, min_jump);
    spec.validate();
    return spec;
}

namespace {

void draw_cell_masses(GridDensitySpec& spec, std::mt19937_64& g, double min_jump) {
    // Product ladder: each factor alternates its density contribution by a
    // factor j between consecutive bins, with random direction per factor
    // and small per-cell log jitter. Every adjacent cell pair then has
    // density ratio in [j e^-a, j e^a] >= min_jump, and (unlike a plain
    // checkerboard) the jumps along a threshold hyperplane all share a
    // sign, so every cliff stays visible in the marginal density of its
    // factor at a height commensurate with the global scale.
    const std::size_t total = spec.cell_count();
    const double jitter_amp = 0.1 * std::log(min_jump);
    const double log_j = std::log(min_jump) + jitter_amp + 0.02;

    std::vector<int> ladder_start(static_cast<std::size_t>(spec.d));
    for (auto& s : ladder_start) s = static_cast<int>(rng::index(g, 2));

    spec.cell_masses.resize(total);
    std::vector<int> multi(static_cast<std::size_t>(spec.d), 0);
    double mass_sum = 0.0;
    for (std::size_t flat = 0; flat < total; ++flat) {
        double log_density = rng::uniform(g, 0.0, jitter_amp);
        for (std::size_t i = 0; i < static_cast<std::size_t>(spec.d); ++i)
            log_density += ((multi[i] + ladder_start[i]) % 2) * log_j;
        spec.cell_masses[flat] = std::exp(log_density) * spec.cell_volume(multi);
        mass_sum += spec.cell_masses[flat];
        for (std::size_t i = static_cast<std::size_t>(spec.d); i-- > 0;) {
            if (++multi[i] < static_cast<int>(spec.bins(i))) break;
            multi[i] = 0;
        }
    }
    for (auto& m : spec.cell_masses) m /= mass_sum;
}

}  // namespace

void MixingSpec::validate(double max_condition) const {
    if (d < 1) throw DomainError("MixingSpec: d must be >= 1");
    if (a.size() != static_cast<std::size_t>(d * d) || b.size() != static_cast<std::size_t>(d * d))
        throw DomainError("MixingSpec: A and B must be d x d");
    if (!(scale > 0.0)) throw DomainError("MixingSpec: scale must be positive");
    if (condition_number(a, d) > max_condition || condition_number(b, d) > max_condition)
        throw DomainError("MixingSpec: mixing matrices must have condition number <= " +
                          std::to_string(max_condition));
}

MixingSpec make_random_mixing(int d, std::uint64_t seed, double max_condition) {
    if (d < 1) throw DomainError("make_random_mixing: d must be >= 1");
    MixingSpec spec;
    spec.d = d;
    std::mt19937_64 g(seed);
    auto draw = [&](std::vector<double>& m) {
        m.resize(static_cast<std::size_t>(d * d));
        do {
            for (auto& v : m) v = rng::normal(g);
        } while (condition_number(m, d) > max_condition);
    };
    draw(spec.a);
    draw(spec.b);
    return spec;
}

LatentBatch sample_latents(const GridDensitySpec& spec, std::size_t n, std::uint64_t seed) {
    spec.validate();
    if (n < 1) throw DomainError("sample_latents: n must be >= 1");

    std::vector<double> cumulative(spec.cell_masses.size());
    double acc = 0.0;
    for (std::size_t c = 0; c < spec.cell_masses.size(); ++c) {
        acc += spec.cell_masses[c];
        cumulative[c] = acc;
    }
    cumulative.back() = 1.0;

    const std::size_t d = static_cast<std::size_t>(spec.d);
    LatentBatch batch;
    batch.n = n;
    batch.d = d;
    batch.values.resize(n * d);
    batch.provenance = LatentBatch::Provenance::true_z;

    std::mt19937_64 g(seed);
    std::vector<int> multi(d);
    for (std::size_t k = 0; k < n; ++k) {
        const double u = rng::uniform_unit(g);
        const std::size_t cell = static_cast<std::size_t>(
            std::lower_bound(cumulative.begin(), cumulative.end(), u) - cumulative.begin());
        std::size_t rem = cell;
        for (std::size_t i = d; i-- > 0;) {
            multi[i] = static_cast<int>(rem % spec.bins(i));
            rem /= spec.bins(i);
        }
        for (std::size_t i = 0; i < d; ++i) {
            auto [lo, hi] = spec.bin_bounds(i, multi[i]);
            batch.values[k * d + i] = rng::uniform(g, lo, hi);
        }
    }
    return batch;
}

LatentBatch mix(const LatentBatch& latents, const MixingSpec& mixing) {
    mixing.validate();
    if (latents.d != static_cast<std::size_t>(mixing.d))
        throw ShapeError("mix: latent dimension does not match mixing matrices");

    Eigen::Map<const RowMat> z(latents.values.data(), latents.n, latents.d);
    Eigen::Map<const RowMat> a(mixing.a.data(), mixing.d, mixing.d);
    Eigen::Map<const RowMat> b(mixing.b.data(), mixing.d, mixing.d);

    LatentBatch out;
    out.n = latents.n;
    out.d = latents.d;
    out.values.resize(latents.values.size());
    out.provenance = LatentBatch::Provenance::observed_x;
    Eigen::Map<RowMat> x(out.values.data(), out.n, out.d);
    x = (((z * mixing.scale) * a.transpose()).array().tanh().matrix()) * b.transpose();
    return out;
}

std::vector<int> true_quantize(const LatentBatch& latents, const GridDensitySpec& spec) {
    if (latents.d != static_cast<std::size_t>(spec.d))
        throw ShapeError("true_quantize: dimension mismatch");
    std::vector<int> bins(latents.n * latents.d);
    for (std::size_t k = 0; k < latents.n; ++k) {
        for (std::size_t i = 0; i < latents.d; ++i) {
            const double v = latents.at(k, i);
            if (v < 0.0 || v > 1.0)
                throw DomainError("true_quantize: sample " + std::to_string(k) +
                                  " lies outside the support");
            const auto& cuts = spec.thresholds[i];
            bins[k * latents.d + i] =
                static_cast<int>(std::lower_bound(cuts.begin(), cuts.end(), v) - cuts.begin());
        }
    }
    return bins;
}

}  // namespace cliff::synth
