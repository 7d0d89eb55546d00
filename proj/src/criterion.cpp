#include "cliff/criterion.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace cliff::criterion {

namespace {

constexpr double kSqrt3 = 1.7320508075688772;

ad::Tensor entropy_of(const ad::Tensor& values, double spacing) {
    ad::Tensor guarded = ad::scale(values, 1.0, ad::kEps);
    return ad::scale(ad::sum(ad::mul(values, ad::log(guarded))), -spacing);
}

// Column-wise entropies of a K x M table of normalized profiles, as 1 x M.
ad::Tensor column_entropies(const ad::Tensor& values, double spacing) {
    ad::Tensor guarded = ad::scale(values, 1.0, ad::kEps);
    return ad::scale(ad::colsum(ad::mul(values, ad::log(guarded))), -spacing);
}

}  // namespace

void CliffWeights::validate() const {
    if (lambda_uni < 0.0 || lambda_biv < 0.0 || lambda_kl_uni < 0.0)
        throw DomainError("CliffWeights: lambdas must be nonnegative");
    if (lambda_uni == 0.0 && lambda_biv == 0.0 && lambda_kl_uni == 0.0)
        throw DomainError("CliffWeights: at least one lambda must be positive");
    if (m_conditioning < 1) throw DomainError("CliffWeights: m_conditioning must be >= 1");
    kernel.validate();
}

ZetaIndices draw_zeta_indices(std::size_t n, std::size_t d, int m, ZetaPolicy policy,
                              std::mt19937_64& rng) {
    if (m < 1) throw DomainError("draw_zeta_indices: m must be >= 1");
    if (static_cast<std::size_t>(m) > n)
        throw DomainError("draw_zeta_indices: batch too small (n=" + std::to_string(n) +
                          " < M=" + std::to_string(m) + ")");
    ZetaIndices out;
    out.d = d;
    out.indices.assign(d * d, {});
    for (std::size_t i = 0; i < d; ++i) {
        for (std::size_t j = 0; j < d; ++j) {
            if (i == j) continue;
            auto& idx = out.indices[i * d + j];
            idx.resize(static_cast<std::size_t>(m));
            if (policy == ZetaPolicy::first_m) {
                std::iota(idx.begin(), idx.end(), std::size_t{0});
            } else {
                // Partial Fisher-Yates: M distinct indices, deterministic
                // for a given rng state.
                std::vector<std::size_t> pool(n);
                std::iota(pool.begin(), pool.end(), std::size_t{0});
                for (int k = 0; k < m; ++k) {
                    const std::size_t pick = k + static_cast<std::size_t>(rng() % (n - k));
                    std::swap(pool[k], pool[pick]);
                    idx[static_cast<std::size_t>(k)] = pool[k];
                }
            }
        }
    }
    return out;
}

ZetaSelection resolve_zetas(const density::StandardizedBatch& batch, const ZetaIndices& idx) {
    ZetaSelection out;
    out.d = idx.d;
    out.values.assign(idx.d * idx.d, {});
    for (std::size_t i = 0; i < idx.d; ++i) {
        for (std::size_t j = 0; j < idx.d; ++j) {
            if (i == j) continue;
            const auto& col = batch.columns[j].value();
            auto& vals = out.values[i * idx.d + j];
            vals.reserve(idx.at(i, j).size());
            for (std::size_t s : idx.at(i, j)) vals.push_back(col[s]);
        }
    }
    return out;
}

density::DensityGrid normalized_derivative_magnitude(const density::StandardizedBatch& batch,
                                                     std::size_t i,
                                                     const density::KernelConfig& cfg) {
    auto grid = density::make_grid(cfg.grid_a, cfg.grid_b, cfg.grid_k);
    density::DensityGrid dp = density::marginal_pdf_derivative(batch, i, grid, cfg);
    ad::Tensor magnitude = ad::abs(dp.values);
    ad::Tensor c = ad::scale(ad::sum(magnitude), dp.spacing);
    if (c.item() < ad::kEps)
        throw density::DegenerateFactorError(
            "normalized_derivative_magnitude: flat density for factor " + std::to_string(i));
    density::DensityGrid out;
    out.points = dp.points;
    out.spacing = dp.spacing;
    out.values = ad::div(magnitude, ad::scale(c, 1.0, ad::kEps));
    out.kind = density::GridKind::marginal_derivative;
    return out;
}

ad::Tensor differential_entropy(const density::DensityGrid& normalized) {
    return entropy_of(normalized.values, normalized.spacing);
}

UniResult loss_uni(const density::StandardizedBatch& batch, const density::KernelConfig& cfg) {
    UniResult res;
    for (std::size_t i = 0; i < batch.d(); ++i) {
        ad::Tensor h = differential_entropy(normalized_derivative_magnitude(batch, i, cfg));
        res.per_factor_entropy.push_back(h.item());
        res.loss = res.loss.defined() ? ad::add(res.loss, h) : h;
    }
    return res;
}

ad::Tensor jsd_pairwise(const density::StandardizedBatch& batch, std::size_t i, std::size_t j,
                        const std::vector<double>& zeta, const density::KernelConfig& cfg,
                        Divergence divergence) {
    auto grid = density::make_grid(cfg.grid_a, cfg.grid_b, cfg.grid_k);
    density::DensityGrid cond = density::conditional_derivative(batch, i, j, grid, zeta, cfg);
    const double spacing = cond.spacing;

    ad::Tensor u = ad::abs(cond.values);
    ad::Tensor norms = ad::scale(ad::colsum(u), spacing);  // 1 x M
    for (std::size_t m = 0; m < zeta.size(); ++m) {
        if (norms.value()[m] < ad::kEps)
            throw density::DegenerateFactorError(
                "jsd_pairwise: flat conditional profile at (i=" + std::to_string(i) +
                ", j=" + std::to_string(j) + ", m=" + std::to_string(m) + ")");
    }
    ad::Tensor profiles = ad::div(u, ad::scale(norms, 1.0, ad::kEps));  // K x M, columns sum to 1
    const double m_count = static_cast<double>(zeta.size());
    ad::Tensor mixture = ad::scale(ad::rowsum(profiles), 1.0 / m_count);  // K x 1

    if (divergence == Divergence::jsd) {
        ad::Tensor mean_entropy = ad::mean(column_entropies(profiles, spacing));
        return ad::sub(entropy_of(mixture, spacing), mean_entropy);
    }
    // Squared Hellinger, generalized the same way: mean over profiles of
    // 1 - integral sqrt(p_m * mixture). sqrt goes through exp(0.5 log).
    ad::Tensor prod = ad::mul(profiles, mixture);
    ad::Tensor root = ad::exp(ad::scale(ad::log(ad::scale(prod, 1.0, ad::kEps)), 0.5));
    ad::Tensor bc = ad::scale(ad::colsum(root), spacing);  // 1 x M
    return ad::mean(ad::scale(bc, -1.0, 1.0));
}

BivResult loss_biv(const density::StandardizedBatch& batch, const CliffWeights& weights,
                   const ZetaSelection& zetas) {
    const std::size_t d = batch.d();
    if (d < 2) throw DomainError("loss_biv: needs at least 2 factors");
    if (zetas.d != d) throw ShapeError("loss_biv: zeta selection has wrong factor count");
    BivResult res;
    res.per_pair.assign(d, std::vector<double>(d, 0.0));
    for (std::size_t i = 0; i < d; ++i) {
        for (std::size_t j = 0; j < d; ++j) {
            if (i == j) continue;
            ad::Tensor term =
                jsd_pairwise(batch, i, j, zetas.at(i, j), weights.kernel, weights.divergence);
            res.per_pair[i][j] = term.item();
            res.loss = res.loss.defined() ? ad::add(res.loss, term) : term;
        }
    }
    return res;
}

ad::Tensor loss_kl_uni(const density::StandardizedBatch& batch, const density::KernelConfig& cfg,
                       bool random_sampling, std::mt19937_64* rng) {
    std::vector<double> points;
    if (random_sampling) {
        if (!rng) throw DomainError("loss_kl_uni: random sampling requires an rng");
        points.resize(static_cast<std::size_t>(cfg.grid_k));
        for (auto& p : points) {
            const double u = (rng->operator()() >> 11) * 0x1.0p-53;
            p = -kSqrt3 + 2.0 * kSqrt3 * u;
        }
    } else {
        points = density::make_grid(-kSqrt3, kSqrt3, cfg.grid_k);
    }
    const double log_width = std::log(2.0 * kSqrt3);

    ad::Tensor loss;
    for (std::size_t i = 0; i < batch.d(); ++i) {
        density::DensityGrid p = density::marginal_pdf(batch, i, points, cfg);
        ad::Tensor mean_log = ad::mean(ad::log(ad::scale(p.values, 1.0, ad::kEps)));
        ad::Tensor term = ad::scale(mean_log, -1.0, -log_width);  // -log(2 sqrt3) - E[log p]
        loss = loss.defined() ? ad::add(loss, term) : term;
    }
    return loss;
}

namespace {

TotalLoss total_loss_standardized(const density::StandardizedBatch& batch,
                                  const CliffWeights& weights, const ZetaSelection& zetas,
                                  std::mt19937_64* kl_rng) {
    const std::size_t d = batch.d();
    TotalLoss out;
    out.report.per_factor_entropy.assign(d, 0.0);
    out.report.per_pair_jsd.assign(d, std::vector<double>(d, 0.0));

    auto& counts = density::kernel_eval_counts();
    ad::Tensor total;
    auto accumulate = [&total](const ad::Tensor& term, double lambda) {
        ad::Tensor weighted = lambda == 1.0 ? term : ad::scale(term, lambda);
        total = total.defined() ? ad::add(total, weighted) : weighted;
    };

    if (weights.lambda_uni > 0.0) {
        const auto before = counts.marginal_derivative_1d;
        UniResult uni = loss_uni(batch, weights.kernel);
        out.report.counts.uni_1d = counts.marginal_derivative_1d - before;
        out.report.l_uni = uni.loss.item();
        out.report.per_factor_entropy = uni.per_factor_entropy;
        accumulate(uni.loss, weights.lambda_uni);
    }
    if (weights.lambda_biv > 0.0 && d >= 2) {
        const auto before_joint = counts.joint_partial_2d;
        const auto before_marg = counts.marginal_1d;
        BivResult biv = loss_biv(batch, weights, zetas);
        out.report.counts.biv_joint_2d = counts.joint_partial_2d - before_joint;
        out.report.counts.biv_cond_1d = counts.marginal_1d - before_marg;
        out.report.l_biv = biv.loss.item();
        out.report.per_pair_jsd = biv.per_pair;
        accumulate(biv.loss, weights.lambda_biv);
    }
    if (weights.lambda_kl_uni > 0.0) {
        const auto before = counts.marginal_1d;
        ad::Tensor kl =
            loss_kl_uni(batch, weights.kernel, weights.kl_random_sampling, kl_rng);
        out.report.counts.kl_1d = counts.marginal_1d - before;
        out.report.l_kl_uni = kl.item();
        accumulate(kl, weights.lambda_kl_uni);
    }

    out.total = total;
    out.report.total = weights.lambda_uni * out.report.l_uni +
                       weights.lambda_biv * out.report.l_biv +
                       weights.lambda_kl_uni * out.report.l_kl_uni;
    return out;
}

}  // namespace

TotalLoss total_loss(const ad::Tensor& raw_batch, const CliffWeights& weights,
                     const ZetaSelection& zetas) {
    weights.validate();
    density::StandardizedBatch batch = density::standardize(raw_batch);
    return total_loss_standardized(batch, weights, zetas, nullptr);
}

TotalLoss total_loss(const ad::Tensor& raw_batch, const CliffWeights& weights,
                     std::mt19937_64& rng) {
    weights.validate();
    density::StandardizedBatch batch = density::standardize(raw_batch);
    ZetaSelection zetas;
    if (weights.lambda_biv > 0.0 && batch.d() >= 2) {
        ZetaIndices idx = draw_zeta_indices(batch.n(), batch.d(), weights.m_conditioning,
                                            weights.zeta_policy, rng);
        zetas = resolve_zetas(batch, idx);
    } else {
        zetas.d = batch.d();
        zetas.values.assign(batch.d() * batch.d(), {});
    }
    return total_loss_standardized(batch, weights, zetas, weights.kl_random_sampling ? &rng : nullptr);
}

}  // namespace cliff::criterion
