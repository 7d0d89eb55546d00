#include "cliff/evalkit.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <numeric>
#include <sstream>
#include <thread>

namespace cliff::evalkit {

namespace {

std::vector<double> average_ranks(const std::vector<double>& x) {
    const std::size_t n = x.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });
    std::vector<double> ranks(n);
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j + 1 < n && x[order[j + 1]] == x[order[i]]) ++j;
        const double avg = 0.5 * static_cast<double>(i + j) + 1.0;  // 1-based average rank
        for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = avg;
        i = j + 1;
    }
    return ranks;
}

double pearson(const std::vector<double>& x, const std::vector<double>& y) {
    const double n = static_cast<double>(x.size());
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= n;
    my /= n;
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
        syy += (y[i] - my) * (y[i] - my);
    }
    if (sxx <= 0.0 || syy <= 0.0)
        throw DomainError("spearman: zero rank variance, correlation undefined");
    return sxy / std::sqrt(sxx * syy);
}

std::vector<double> standardize_plain(std::vector<double> col) {
    const double n = static_cast<double>(col.size());
    double m = 0.0;
    for (double v : col) m += v;
    m /= n;
    double var = 0.0;
    for (double v : col) var += (v - m) * (v - m);
    var /= n;
    const double sd = std::sqrt(var);
    if (sd < 1e-8) throw density::DegenerateFactorError("standardize: degenerate factor column");
    for (auto& v : col) v = (v - m) / sd;
    return col;
}

}  // namespace

double spearman(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size()) throw ShapeError("spearman: length mismatch");
    if (x.size() < 3) throw DomainError("spearman: need at least 3 observations");
    return pearson(average_ranks(x), average_ranks(y));
}

MccReport mcc(const synth::LatentBatch& true_z, const synth::LatentBatch& recovered_z) {
    if (true_z.n != recovered_z.n) throw ShapeError("mcc: sample counts differ");
    if (true_z.d != recovered_z.d) throw ShapeError("mcc: factor counts differ");
    const std::size_t d = true_z.d;
    if (d > 8) throw DomainError("mcc: exhaustive assignment supports at most d = 8");

    MccReport report;
    std::vector<std::vector<double>> raw(d, std::vector<double>(d, 0.0));
    report.corr.assign(d, std::vector<double>(d, 0.0));
    for (std::size_t i = 0; i < d; ++i) {
        const auto ti = true_z.column(i);
        for (std::size_t j = 0; j < d; ++j) {
            try {
                raw[i][j] = spearman(ti, recovered_z.column(j));
            } catch (const DomainError&) {
                raw[i][j] = 0.0;
                report.warnings.push_back("constant column in pair (" + std::to_string(i) + "," +
                                          std::to_string(j) + "); correlation set to 0");
            }
            report.corr[i][j] = std::fabs(raw[i][j]);
        }
    }

    std::vector<std::size_t> perm(d), best(d);
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    best = perm;
    double best_mean = -1.0;
    do {
        double mean = 0.0;
        for (std::size_t i = 0; i < d; ++i) mean += report.corr[i][perm[i]];
        mean /= static_cast<double>(d);
        if (mean > best_mean) {
            best_mean = mean;
            best = perm;
        }
    } while (std::next_permutation(perm.begin(), perm.end()));

    report.assignment = best;
    report.signs.resize(d);
    for (std::size_t i = 0; i < d; ++i)
        report.signs[i] = raw[i][best[i]] < 0.0 ? -1 : 1;
    report.mcc = 100.0 * best_mean;
    return report;
}

std::vector<FactorThresholds> detect_thresholds(const synth::LatentBatch& batch,
                                                const density::KernelConfig& cfg,
                                                const DetectorConfig& det) {
    cfg.validate();
    const auto grid_points = density::make_grid(cfg.grid_a, cfg.grid_b, cfg.grid_k);
    std::vector<FactorThresholds> out(batch.d);

    for (std::size_t i = 0; i < batch.d; ++i) {
        std::vector<double> col;
        try {
            col = standardize_plain(batch.column(i));
        } catch (const density::DegenerateFactorError&) {
            continue;  // a collapsed factor has no detectable thresholds
        }
        ad::Tensor one_col = ad::Tensor::constant(col.size(), 1, col);
        density::StandardizedBatch std_batch;
        std_batch.columns = {one_col};
        std_batch.values = one_col;
        std_batch.means = {0.0};
        std_batch.stds = {1.0};
        const auto dp = density::marginal_pdf_derivative(std_batch, 0, grid_points, cfg);
        std::vector<double> signal(grid_points.size());
        for (std::size_t g = 0; g < signal.size(); ++g)
            signal[g] = std::fabs(dp.values.value()[g]);

        // The prominence scale is the global maximum of the signal; the
        // support-edge cliffs usually set it, which is what keeps pure
        // sampling noise from ever qualifying.
        const double global_max = *std::max_element(signal.begin(), signal.end());
        if (global_max <= 0.0) continue;

        // Peaks inside the boundary margin are the support edges themselves,
        // not quantization thresholds.
        const auto [mn_it, mx_it] = std::minmax_element(col.begin(), col.end());
        const double lo = *mn_it + det.boundary_margin;
        const double hi = *mx_it - det.boundary_margin;

        for (std::size_t g = 1; g + 1 < signal.size(); ++g) {
            if (grid_points[g] < lo || grid_points[g] > hi) continue;
            if (!(signal[g] > signal[g - 1] && signal[g] >= signal[g + 1])) continue;
            // Topographic prominence over the whole signal.
            double left_min = signal[g];
            for (std::size_t k = g; k-- > 0;) {
                if (signal[k] > signal[g]) break;
                left_min = std::min(left_min, signal[k]);
            }
            double right_min = signal[g];
            for (std::size_t k = g + 1; k < signal.size(); ++k) {
                if (signal[k] > signal[g]) break;
                right_min = std::min(right_min, signal[k]);
            }
            const double prominence = signal[g] - std::max(left_min, right_min);
            if (prominence >= det.min_prominence * global_max) {
                out[i].locations.push_back(grid_points[g]);
                out[i].heights.push_back(signal[g]);
            }
        }
    }
    return out;
}

namespace {

// One bit per sample; AND-accumulated across factors during the
// permutation/reversal search.
struct MatchBits {
    std::vector<std::uint64_t> words;

    explicit MatchBits(std::size_t n) : words((n + 63) / 64, 0) {}
    void set(std::size_t k) { words[k >> 6] |= (std::uint64_t{1} << (k & 63)); }
};

}  // namespace

ThresholdReport quantized_agreement(const synth::LatentBatch& true_z,
                                    const synth::GridDensitySpec& true_spec,
                                    const synth::LatentBatch& recovered_z,
                                    const std::vector<FactorThresholds>& detected) {
    const std::size_t d = true_z.d;
    const std::size_t n = true_z.n;
    if (recovered_z.n != n || recovered_z.d != d)
        throw ShapeError("quantized_agreement: shape mismatch");
    if (d > 8) throw DomainError("quantized_agreement: exhaustive search supports at most d = 8");
    if (detected.size() != d) throw ShapeError("quantized_agreement: detected thresholds per factor");

    ThresholdReport report;
    report.detected = detected;

    const std::vector<int> q_true = synth::true_quantize(true_z, true_spec);
    std::vector<std::vector<int>> q_rec(d);
    std::vector<int> levels_rec(d);
    for (std::size_t j = 0; j < d; ++j) {
        const std::vector<double> col = standardize_plain(recovered_z.column(j));
        const auto& cuts = detected[j].locations;
        levels_rec[j] = static_cast<int>(cuts.size()) + 1;
        q_rec[j].resize(n);
        for (std::size_t k = 0; k < n; ++k)
            q_rec[j][k] = static_cast<int>(
                std::lower_bound(cuts.begin(), cuts.end(), col[k]) - cuts.begin());
    }

    {
        std::vector<std::size_t> tc(d), rc(d);
        for (std::size_t i = 0; i < d; ++i) tc[i] = true_spec.thresholds[i].size();
        for (std::size_t j = 0; j < d; ++j) rc[j] = detected[j].locations.size();
        std::sort(tc.begin(), tc.end());
        std::sort(rc.begin(), rc.end());
        report.structural_mismatch = tc != rc;
    }

    // match[(i * d + j) * 2 + s]: samples where true factor i agrees with
    // recovered factor j under reversal s.
    std::vector<MatchBits> match;
    match.reserve(d * d * 2);
    for (std::size_t i = 0; i < d; ++i) {
        for (std::size_t j = 0; j < d; ++j) {
            for (int s = 0; s < 2; ++s) {
                MatchBits bits(n);
                for (std::size_t k = 0; k < n; ++k) {
                    const int qr = q_rec[j][k];
                    const int relabeled = s == 0 ? qr : levels_rec[j] - 1 - qr;
                    if (q_true[k * d + i] == relabeled) bits.set(k);
                }
                match.push_back(std::move(bits));
            }
        }
    }

    std::vector<std::size_t> perm(d);
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    double best_rate = -1.0;
    std::vector<std::size_t> best_perm = perm;
    std::vector<int> best_signs(d, 1);
    const std::size_t words = (n + 63) / 64;
    std::vector<std::uint64_t> acc(words);
    do {
        for (std::uint32_t mask = 0; mask < (1u << d); ++mask) {
            std::fill(acc.begin(), acc.end(), ~std::uint64_t{0});
            for (std::size_t i = 0; i < d; ++i) {
                const int s = (mask >> i) & 1u;
                const auto& bits = match[(i * d + perm[i]) * 2 + s];
                for (std::size_t w = 0; w < words; ++w) acc[w] &= bits.words[w];
            }
            // d >= 1 ANDs always run, so the padding bits beyond n are zero.
            std::size_t count = 0;
            for (std::size_t w = 0; w < words; ++w) count += std::popcount(acc[w]);
            const double rate = static_cast<double>(count) / static_cast<double>(n);
            if (rate > best_rate) {
                best_rate = rate;
                best_perm = perm;
                for (std::size_t i = 0; i < d; ++i)
                    best_signs[i] = ((mask >> i) & 1u) ? -1 : 1;
            }
        }
    } while (std::next_permutation(perm.begin(), perm.end()));

    report.agreement_rate = best_rate;
    report.permutation = best_perm;
    report.reversals = best_signs;
    return report;
}

namespace {

synth::LatentBatch project(const synth::LatentBatch& z, double theta1_rad, double theta2_rad) {
    synth::LatentBatch out;
    out.n = z.n;
    out.d = 2;
    out.values.resize(z.n * 2);
    out.provenance = synth::LatentBatch::Provenance::recovered_z;
    const double c1 = std::cos(theta1_rad), s1 = std::sin(theta1_rad);
    const double c2 = std::cos(theta2_rad), s2 = std::sin(theta2_rad);
    for (std::size_t k = 0; k < z.n; ++k) {
        out.values[k * 2] = c1 * z.at(k, 0) + s1 * z.at(k, 1);
        out.values[k * 2 + 1] = c2 * z.at(k, 0) + s2 * z.at(k, 1);
    }
    return out;
}

constexpr double kDegToRad = 0.017453292519943295;

}  // namespace

std::vector<SweepRow> landscape_sweep(const synth::LatentBatch& latents, double step_degrees,
                                      const criterion::CliffWeights& weights,
                                      std::uint64_t zeta_seed, int workers) {
    if (latents.d != 2) throw DomainError("landscape_sweep: needs a 2-factor batch");
    if (!(step_degrees > 0.0 && step_degrees <= 90.0))
        throw DomainError("landscape_sweep: step must be in (0, 90] degrees");
    weights.validate();

    // One index draw shared by every cell keeps the sweep comparable across
    // angles; values are resolved against each cell's standardized batch.
    std::mt19937_64 zrng(zeta_seed);
    const criterion::ZetaIndices zeta_idx = criterion::draw_zeta_indices(
        latents.n, 2, weights.m_conditioning, weights.zeta_policy, zrng);

    std::vector<double> angles;
    for (double a = 0.0; a < 180.0 - 1e-9; a += step_degrees) angles.push_back(a);
    const std::size_t cells = angles.size() * angles.size();
    std::vector<SweepRow> rows(cells);

    auto run_cell = [&](std::size_t idx) {
        const double t1 = angles[idx / angles.size()];
        const double t2 = angles[idx % angles.size()];
        SweepRow row;
        row.theta1_deg = t1;
        row.theta2_deg = t2;
        row.singular = std::fabs(std::sin((t1 - t2) * kDegToRad)) < 1e-12;

        synth::LatentBatch proj = project(latents, t1 * kDegToRad, t2 * kDegToRad);
        ad::Tensor raw = ad::Tensor::constant(proj.n, 2, proj.values);
        density::StandardizedBatch std_batch = density::standardize(raw);
        const criterion::ZetaSelection zetas = criterion::resolve_zetas(std_batch, zeta_idx);

        criterion::UniResult uni = criterion::loss_uni(std_batch, weights.kernel);
        criterion::BivResult biv = criterion::loss_biv(std_batch, weights, zetas);
        ad::Tensor kl = criterion::loss_kl_uni(std_batch, weights.kernel);
        row.l_uni = uni.loss.item();
        row.l_biv = biv.loss.item();
        row.l_kl_uni = kl.item();
        row.total = weights.lambda_uni * row.l_uni + weights.lambda_biv * row.l_biv +
                    weights.lambda_kl_uni * row.l_kl_uni;
        rows[idx] = row;
    };

    const int nworkers = std::max(1, workers);
    if (nworkers == 1) {
        for (std::size_t idx = 0; idx < cells; ++idx) run_cell(idx);
    } else {
        std::vector<std::thread> pool;
        for (int w = 0; w < nworkers; ++w) {
            pool.emplace_back([&, w]() {
                for (std::size_t idx = static_cast<std::size_t>(w); idx < cells;
                     idx += static_cast<std::size_t>(nworkers))
                    run_cell(idx);
            });
        }
        for (auto& t : pool) t.join();
    }
    return rows;
}

std::vector<UniSweepPoint> sweep_univariate(const synth::LatentBatch& latents,
                                            double step_degrees,
                                            const density::KernelConfig& cfg) {
    if (latents.d != 2) throw DomainError("sweep_univariate: needs a 2-factor batch");
    if (!(step_degrees > 0.0 && step_degrees <= 45.0))
        throw DomainError("sweep_univariate: step must be in (0, 45] degrees");
    std::vector<UniSweepPoint> out;
    for (double a = 0.0; a < 180.0 - 1e-9; a += step_degrees) {
        const double rad = a * kDegToRad;
        const double c = std::cos(rad), s = std::sin(rad);
        std::vector<double> proj(latents.n);
        for (std::size_t k = 0; k < latents.n; ++k)
            proj[k] = c * latents.at(k, 0) + s * latents.at(k, 1);
        ad::Tensor raw = ad::Tensor::constant(latents.n, 1, proj);
        density::StandardizedBatch std_batch = density::standardize(raw);
        auto grid = criterion::normalized_derivative_magnitude(std_batch, 0, cfg);
        out.push_back({a, criterion::differential_entropy(grid).item()});
    }
    return out;
}

std::string sweep_to_csv(const std::vector<SweepRow>& rows) {
    std::ostringstream os;
    os << "theta1_deg,theta2_deg,l_uni,l_biv,l_kl_uni,total,singular\n";
    char buf[160];
    for (const auto& r : rows) {
        std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%d\n", r.theta1_deg,
                      r.theta2_deg, r.l_uni, r.l_biv, r.l_kl_uni, r.total, r.singular ? 1 : 0);
        os << buf;
    }
    return os.str();
}

}  // namespace cliff::evalkit
