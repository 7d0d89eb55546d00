#include "cliff/selftest.hpp"

#include <cmath>
#include <random>

#include "cliff/criterion.hpp"
#include "cliff/gradcheck.hpp"
#include "cliff/rng.hpp"
#include "cliff/trainer.hpp"

namespace cliff::selftest {

namespace {

// The raw batches are spread wide on purpose: the loss standardizes
// internally, so the effective step of the central-difference oracle in
// standardized coordinates is fd_step / std(batch). A wide batch keeps the
// oracle's truncation error and its chance of straddling an |.| kink well
// below the tolerance; the gradient code path is identical either way.
constexpr double kBatchSpread = 100.0;

// Parameter-space checks run at a finer step: parameter perturbations act
// on standardized outputs at full strength, so 1e-5 would leave the oracle
// short of the tolerance near subgradient kinks.
constexpr double kParamStep = 1e-7;

// Coordinates whose analytic and numeric derivatives both vanish carry no
// signal (e.g. the output bias: standardization makes the loss exactly
// shift-invariant); below this floor they count as matching.
constexpr double kZeroFloor = 1e-7;

criterion::CliffWeights weights_for(double lu, double lb, double lk) {
    criterion::CliffWeights w;
    w.lambda_uni = lu;
    w.lambda_biv = lb;
    w.lambda_kl_uni = lk;
    w.m_conditioning = 5;
    return w;
}

void record(GradCheckSummary& summary, const std::string& name, double err, double tol) {
    TermCheck check{name, err, err <= tol};
    summary.all_pass = summary.all_pass && check.pass;
    summary.worst_error = std::max(summary.worst_error, err);
    summary.checks.push_back(std::move(check));
}

}  // namespace

GradCheckSummary run_gradcheck(std::uint64_t seed, double tolerance, double fd_step) {
    GradCheckSummary summary;
    std::mt19937_64 g(seed);

    for (std::size_t n : {std::size_t{16}, std::size_t{64}}) {
        for (std::size_t d : {std::size_t{2}, std::size_t{3}}) {
            std::vector<double> point(n * d);
            for (auto& v : point) v = rng::uniform(g, 0.0, kBatchSpread);

            // Freeze the conditioning values once per configuration; finite
            // differences must not see the zeta draw move.
            criterion::ZetaSelection zetas;
            {
                ad::Tensor raw = ad::Tensor::constant(n, d, point);
                auto std_batch = density::standardize(raw);
                std::mt19937_64 zrng(seed ^ (n * 1315423911ull) ^ d);
                auto idx = criterion::draw_zeta_indices(
                    n, d, 5, criterion::ZetaPolicy::random_from_batch, zrng);
                zetas = criterion::resolve_zetas(std_batch, idx);
            }

            const std::string suffix = " n=" + std::to_string(n) + " d=" + std::to_string(d);
            struct TermSpec {
                const char* name;
                criterion::CliffWeights weights;
            };
            const TermSpec terms[] = {
                {"l_uni", weights_for(1, 0, 0)},
                {"l_biv", weights_for(0, 1, 0)},
                {"l_kl_uni", weights_for(0, 0, 1)},
                {"L_Cliff", weights_for(1, 1, 1)},
            };
            for (const auto& term : terms) {
                auto build = [&term, &zetas](const ad::Tensor& x) {
                    return criterion::total_loss(x, term.weights, zetas).total;
                };
                const auto res = ad::grad_check(build, n, d, point, fd_step, kZeroFloor);
                record(summary, std::string(term.name) + suffix + " (batch)", res.max_rel_error,
                       tolerance);
            }

            // Parameter-space check on a small tanh MLP feeding the total
            // loss; every weight matrix and bias vector is perturbed. The
            // output layer is rescaled to unit per-factor spread so that no
            // near-collapsed factor puts the oracle outside its resolution.
            trainer::EncoderSpec enc;
            enc.layer_dims = {static_cast<int>(d), 8, static_cast<int>(d)};
            trainer::EncoderParams params = trainer::init_encoder(enc, seed + n + d);
            std::vector<double> xdata(n * d);
            for (auto& v : xdata) v = rng::uniform(g, -1.0, 1.0);
            {
                auto out0 = trainer::encode_plain(params, xdata, n);
                for (std::size_t i = 0; i < d; ++i) {
                    double m = 0, var = 0;
                    for (std::size_t k = 0; k < n; ++k) m += out0[k * d + i];
                    m /= static_cast<double>(n);
                    for (std::size_t k = 0; k < n; ++k)
                        var += (out0[k * d + i] - m) * (out0[k * d + i] - m);
                    const double s = std::sqrt(var / static_cast<double>(n));
                    const std::size_t last = params.layer_count() - 1;
                    for (std::size_t r = 0; r < params.weights[last].size() / d; ++r)
                        params.weights[last][r * d + i] /= s;
                    params.biases[last][i] /= s;
                }
            }
            ad::Tensor x = ad::Tensor::constant(n, d, xdata);

            criterion::ZetaSelection enc_zetas;
            {
                auto out_vals = trainer::encode_plain(params, xdata, n);
                ad::Tensor raw = ad::Tensor::constant(n, d, out_vals);
                auto std_batch = density::standardize(raw);
                std::mt19937_64 zrng(seed ^ 0x5bd1e995u ^ (n + d));
                auto idx = criterion::draw_zeta_indices(
                    n, d, 5, criterion::ZetaPolicy::random_from_batch, zrng);
                enc_zetas = criterion::resolve_zetas(std_batch, idx);
            }
            const criterion::CliffWeights full = weights_for(1, 1, 1);
            for (std::size_t layer = 0; layer < params.layer_count(); ++layer) {
                for (int which = 0; which < 2; ++which) {
                    auto build = [&, layer, which](const ad::Tensor& p) {
                        ad::Tensor h = x;
                        for (std::size_t l = 0; l < params.layer_count(); ++l) {
                            const auto fi = static_cast<std::size_t>(enc.layer_dims[l]);
                            const auto fo = static_cast<std::size_t>(enc.layer_dims[l + 1]);
                            ad::Tensor w = (l == layer && which == 0)
                                               ? p
                                               : ad::Tensor::constant(fi, fo, params.weights[l]);
                            ad::Tensor b = (l == layer && which == 1)
                                               ? p
                                               : ad::Tensor::constant(1, fo, params.biases[l]);
                            h = ad::add(ad::matmul(h, w), b);
                            if (l + 2 < enc.layer_dims.size()) h = ad::tanh(h);
                        }
                        return criterion::total_loss(h, full, enc_zetas).total;
                    };
                    const auto fi = static_cast<std::size_t>(enc.layer_dims[layer]);
                    const auto fo = static_cast<std::size_t>(enc.layer_dims[layer + 1]);
                    const auto res =
                        which == 0 ? ad::grad_check(build, fi, fo, params.weights[layer],
                                                    kParamStep, kZeroFloor)
                                   : ad::grad_check(build, 1, fo, params.biases[layer],
                                                    kParamStep, kZeroFloor);
                    record(summary,
                           std::string("L_Cliff") + suffix + " (encoder " +
                               (which == 0 ? "W" : "b") + std::to_string(layer) + ")",
                           res.max_rel_error, tolerance);
                }
            }
        }
    }
    return summary;
}

}  // namespace cliff::selftest
