#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "cliff/criterion.hpp"
#include "cliff/density.hpp"
#include "cliff/rng.hpp"
#include "cliff/synthdata.hpp"

using namespace cliff;
using ad::Tensor;

namespace {

density::StandardizedBatch batch_from_columns(const std::vector<std::vector<double>>& cols) {
    density::StandardizedBatch b;
    for (const auto& c : cols) b.columns.push_back(Tensor::constant(c.size(), 1, c));
    b.values = ad::concat_cols(b.columns);
    b.means.assign(cols.size(), 0.0);
    b.stds.assign(cols.size(), 1.0);
    return b;
}

criterion::ZetaSelection zetas_for(const density::StandardizedBatch& b, int m,
                                   std::uint64_t seed) {
    std::mt19937_64 g(seed);
    auto idx = criterion::draw_zeta_indices(b.n(), b.d(), m,
                                            criterion::ZetaPolicy::random_from_batch, g);
    return criterion::resolve_zetas(b, idx);
}

// Deterministic sample whose KDE-smoothed marginal matches U(-sqrt3, sqrt3)
// on the evaluation points: Richardson-Lucy deconvolution of the uniform
// target against the Gaussian kernel, then inverse-CDF sampling.
std::vector<double> uniform_matching_sample(double sigma, std::size_t n) {
    const double s3 = std::sqrt(3.0);
    const int grid_n = 2000;
    const double lo = -s3 - 6 * sigma, hi = s3 + 6 * sigma;
    const double h = (hi - lo) / grid_n;
    std::vector<double> x(grid_n), target(grid_n), q(grid_n, 1.0);
    for (int i = 0; i < grid_n; ++i) {
        x[i] = lo + (i + 0.5) * h;
        target[i] = (x[i] >= -s3 && x[i] <= s3) ? 1.0 / (2 * s3) : 0.0;
    }
    auto smooth = [&](const std::vector<double>& f) {
        std::vector<double> out(grid_n, 0.0);
        const int w = static_cast<int>(5 * sigma / h);
        for (int i = 0; i < grid_n; ++i) {
            double acc = 0;
            for (int j = std::max(0, i - w); j < std::min(grid_n, i + w + 1); ++j) {
                const double t = (x[i] - x[j]) / sigma;
                acc += f[j] * std::exp(-0.5 * t * t);
            }
            out[i] = acc * h * 0.3989422804014327 / sigma;
        }
        return out;
    };
    double mass = 0;
    for (double v : q) mass += v * h;
    for (auto& v : q) v /= mass;
    for (int it = 0; it < 400; ++it) {
        const auto kq = smooth(q);
        std::vector<double> ratio(grid_n);
        for (int i = 0; i < grid_n; ++i) ratio[i] = target[i] / std::max(kq[i], 1e-300);
        const auto back = smooth(ratio);
        for (int i = 0; i < grid_n; ++i) q[i] *= back[i];
        double m2 = 0;
        for (double v : q) m2 += v * h;
        for (auto& v : q) v /= m2;
    }
    std::vector<double> cdf(grid_n);
    double acc = 0;
    for (int i = 0; i < grid_n; ++i) {
        acc += q[i] * h;
        cdf[i] = acc;
    }
    std::vector<double> sample(n);
    int gi = 0;
    for (std::size_t k = 0; k < n; ++k) {
        const double p = (static_cast<double>(k) + 0.5) / static_cast<double>(n) * cdf.back();
        while (gi < grid_n - 1 && cdf[gi] < p) ++gi;
        sample[k] = x[gi];
    }
    return sample;
}

}  // namespace

TEST_CASE("normalized derivative magnitude integrates to one") {
    std::mt19937_64 g(3);
    std::vector<double> col(300);
    for (auto& v : col) v = rng::uniform(g, 0.0, 1.0);
    auto sb = density::standardize(Tensor::constant(col.size(), 1, col));
    density::KernelConfig cfg;
    auto s = criterion::normalized_derivative_magnitude(sb, 0, cfg);
    CHECK(density::integrate(s).item() == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("single tight cluster gives a symmetric two-peak magnitude") {
    // all samples identical: bypass standardization, kernel sits at 0
    auto b = batch_from_columns({std::vector<double>(50, 0.0)});
    density::KernelConfig cfg;  // sigma 0.1, grid I(-5,5,100)
    auto s = criterion::normalized_derivative_magnitude(b, 0, cfg);
    const auto& v = s.values.value();
    // grid point 50 is exactly 0; reflection pairs are (50-k, 50+k)
    for (int k = 1; k <= 40; ++k)
        CHECK(v[static_cast<std::size_t>(50 - k)] ==
              doctest::Approx(v[static_cast<std::size_t>(50 + k)]).epsilon(1e-9));
    // |z| phi(z/sigma) peaks at +-sigma, one grid step from the center
    const auto peak = std::max_element(v.begin(), v.end());
    const auto pidx = static_cast<int>(peak - v.begin());
    CHECK((pidx == 49 || pidx == 51));
}

TEST_CASE("reflecting the batch reflects s and keeps c") {
    std::mt19937_64 g(17);
    std::vector<double> col(120), neg(120);
    for (std::size_t i = 0; i < col.size(); ++i) {
        col[i] = rng::normal(g);
        neg[i] = -col[i];
    }
    // left-endpoint rule: [a, b) with spacing 0.1; this choice makes the
    // realized point set {-5.05, ..., +5.05} closed under reflection
    density::KernelConfig cfg;
    cfg.grid_k = 102;
    cfg.grid_a = -5.05;
    cfg.grid_b = 5.15;
    auto s1 = criterion::normalized_derivative_magnitude(batch_from_columns({col}), 0, cfg);
    auto s2 = criterion::normalized_derivative_magnitude(batch_from_columns({neg}), 0, cfg);
    const auto& v1 = s1.values.value();
    const auto& v2 = s2.values.value();
    for (std::size_t k = 0; k < v1.size(); ++k)
        CHECK(v1[k] == doctest::Approx(v2[v2.size() - 1 - k]).epsilon(1e-9));
}

TEST_CASE("differential entropy closed forms") {
    const double s3 = std::sqrt(3.0);
    SUBCASE("uniform on its exact support") {
        density::DensityGrid grid;
        const int k = 200;
        grid.spacing = 2 * s3 / k;
        grid.points = density::make_grid(-s3, s3, k);
        grid.values = Tensor::constant(k, 1, 1.0 / (2 * s3));
        CHECK(criterion::differential_entropy(grid).item() ==
              doctest::Approx(std::log(2 * s3)).epsilon(1e-2));
    }
    SUBCASE("single occupied cell on the default grid") {
        density::DensityGrid grid;
        grid.spacing = 0.1;
        grid.points = density::make_grid(-5, 5, 100);
        std::vector<double> v(100, 0.0);
        v[42] = 10.0;  // 1/spacing
        grid.values = Tensor::constant(100, 1, v);
        CHECK(criterion::differential_entropy(grid).item() ==
              doctest::Approx(std::log(0.1)).epsilon(1e-6));
    }
    SUBCASE("entropy never exceeds log of the support width") {
        std::mt19937_64 g(5);
        for (int trial = 0; trial < 20; ++trial) {
            std::vector<double> v(100);
            double sum = 0;
            for (auto& w : v) {
                w = rng::uniform(g, 0.0, 1.0);
                sum += w;
            }
            for (auto& w : v) w /= sum * 0.1;  // normalize on spacing 0.1
            density::DensityGrid grid;
            grid.spacing = 0.1;
            grid.points = density::make_grid(-5, 5, 100);
            grid.values = Tensor::constant(100, 1, v);
            CHECK(criterion::differential_entropy(grid).item() <= std::log(10.0) + 1e-9);
        }
    }
}

TEST_CASE("loss_uni: identical columns double the entropy") {
    std::mt19937_64 g(23);
    std::vector<double> col(150);
    for (auto& v : col) v = rng::normal(g);
    auto b = batch_from_columns({col, col});
    density::KernelConfig cfg;
    auto uni = criterion::loss_uni(b, cfg);
    CHECK(uni.per_factor_entropy[0] == doctest::Approx(uni.per_factor_entropy[1]));
    CHECK(uni.loss.item() == doctest::Approx(2.0 * uni.per_factor_entropy[0]).epsilon(1e-12));
}

TEST_CASE("axis-aligned cliffs beat their 45-degree rotation") {
    auto spec = synth::make_random_spec({2, 1}, 77);
    auto z = synth::sample_latents(spec, 3000, 78);

    std::vector<double> rotated(z.values.size());
    const double c = std::cos(0.25 * 3.141592653589793), s = std::sin(0.25 * 3.141592653589793);
    for (std::size_t k = 0; k < z.n; ++k) {
        rotated[k * 2] = c * z.at(k, 0) - s * z.at(k, 1);
        rotated[k * 2 + 1] = s * z.at(k, 0) + c * z.at(k, 1);
    }

    auto aligned = density::standardize(Tensor::constant(z.n, 2, z.values));
    auto rot = density::standardize(Tensor::constant(z.n, 2, rotated));
    density::KernelConfig cfg;
    const double uni_aligned = criterion::loss_uni(aligned, cfg).loss.item();
    const double uni_rot = criterion::loss_uni(rot, cfg).loss.item();
    CHECK(uni_aligned < uni_rot);

    criterion::CliffWeights w;
    w.m_conditioning = 20;
    const double biv_aligned =
        criterion::loss_biv(aligned, w, zetas_for(aligned, 20, 5)).loss.item();
    const double biv_rot = criterion::loss_biv(rot, w, zetas_for(rot, 20, 5)).loss.item();
    CHECK(biv_aligned < biv_rot);
}

TEST_CASE("jsd: independent columns stay near zero") {
    // shuffled pairing of identical marginals -> independent columns; the
    // conditional-KDE noise floor scales with sigma and n, so the tight
    // tolerance is checked where the estimator variance is small enough
    auto make_independent = [](std::size_t n) {
        auto spec = synth::make_random_spec({1}, 31);
        auto z = synth::sample_latents(spec, n, 32);
        std::vector<double> zi = z.column(0);
        std::vector<double> zj = zi;
        std::mt19937_64 g(33);
        for (std::size_t k = zj.size() - 1; k > 0; --k)
            std::swap(zj[k], zj[rng::index(g, k + 1)]);
        std::vector<double> both(n * 2);
        for (std::size_t k = 0; k < n; ++k) {
            both[k * 2] = zi[k];
            both[k * 2 + 1] = zj[k];
        }
        return density::standardize(Tensor::constant(n, 2, both));
    };

    SUBCASE("low-variance regime") {
        auto sb = make_independent(20000);
        density::KernelConfig cfg;
        cfg.sigma = 0.5;
        auto zetas = zetas_for(sb, 20, 34);
        const double jsd = criterion::jsd_pairwise(sb, 0, 1, zetas.at(0, 1), cfg).item();
        CHECK(jsd >= -1e-9);
        CHECK(jsd <= 1e-3);
    }
    SUBCASE("paper bandwidth: independence scores well below dependence") {
        auto sb = make_independent(5000);
        density::KernelConfig cfg;  // sigma 0.1
        auto zetas = zetas_for(sb, 20, 34);
        const double jsd_indep = criterion::jsd_pairwise(sb, 0, 1, zetas.at(0, 1), cfg).item();

        // strongly dependent comparison: the same factor rotated into both
        auto spec = synth::make_random_spec({1}, 31);
        auto z = synth::sample_latents(spec, 5000, 32);
        std::vector<double> both(z.n * 2);
        for (std::size_t k = 0; k < z.n; ++k) {
            const double a = z.at(k, 0);
            both[k * 2] = 0.70710678118654752 * a;
            both[k * 2 + 1] = 0.70710678118654752 * a + 1e-3 * std::sin(static_cast<double>(k));
        }
        auto dep = density::standardize(Tensor::constant(z.n, 2, both));
        auto zdep = zetas_for(dep, 20, 35);
        const double jsd_dep = criterion::jsd_pairwise(dep, 0, 1, zdep.at(0, 1), cfg).item();
        CHECK(jsd_indep >= -1e-9);
        CHECK(jsd_indep * 5.0 < jsd_dep);
    }
}

TEST_CASE("jsd with a single conditioning value is exactly zero") {
    std::mt19937_64 g(41);
    std::vector<double> zi(100), zj(100);
    for (auto& v : zi) v = rng::normal(g);
    for (auto& v : zj) v = rng::normal(g);
    auto b = batch_from_columns({zi, zj});
    density::KernelConfig cfg;
    CHECK(criterion::jsd_pairwise(b, 0, 1, {zj[7]}, cfg).item() == 0.0);
}

TEST_CASE("disjoint-support profiles give JSD = log 2") {
    // hand-built normalized profiles on the default grid
    const double spacing = 0.1;
    std::vector<double> p1(100, 0.0), p2(100, 0.0);
    for (int i = 0; i < 50; ++i) p1[static_cast<std::size_t>(i)] = 0.2;
    for (int i = 50; i < 100; ++i) p2[static_cast<std::size_t>(i)] = 0.2;
    std::vector<double> mix(100);
    for (int i = 0; i < 100; ++i)
        mix[static_cast<std::size_t>(i)] =
            0.5 * (p1[static_cast<std::size_t>(i)] + p2[static_cast<std::size_t>(i)]);

    auto entropy_of = [&](const std::vector<double>& v) {
        density::DensityGrid grid;
        grid.spacing = spacing;
        grid.points = density::make_grid(-5, 5, 100);
        grid.values = Tensor::constant(100, 1, v);
        return criterion::differential_entropy(grid).item();
    };
    const double jsd = entropy_of(mix) - 0.5 * (entropy_of(p1) + entropy_of(p2));
    CHECK(jsd == doctest::Approx(std::log(2.0)).epsilon(1e-2));
}

TEST_CASE("loss_kl_uni: smoothed-uniform factor scores near zero") {
    auto sample = uniform_matching_sample(0.1, 2500);
    auto b = batch_from_columns({sample});
    density::KernelConfig cfg;
    const double term = criterion::loss_kl_uni(b, cfg).item();
    CHECK(std::fabs(term) <= 2e-2);
}

TEST_CASE("loss_kl_uni: near point mass diverges") {
    // unit variance but nearly all mass in one spike
    std::vector<double> col(1000, 0.0);
    col[0] = std::sqrt(500.0);
    col[1] = -std::sqrt(500.0);
    for (std::size_t i = 2; i < col.size(); ++i)
        col[i] = 1e-4 * static_cast<double>(i % 7);  // tiny jitter, keeps KDE finite
    auto b = batch_from_columns({col});
    density::KernelConfig cfg;
    CHECK(criterion::loss_kl_uni(b, cfg).item() > 5.0);
}

TEST_CASE("loss_kl_uni is invariant to permuting samples") {
    std::mt19937_64 g(51);
    std::vector<double> col(400);
    for (auto& v : col) v = rng::normal(g);
    std::vector<double> shuffled = col;
    for (std::size_t k = shuffled.size() - 1; k > 0; --k)
        std::swap(shuffled[k], shuffled[rng::index(g, k + 1)]);
    density::KernelConfig cfg;
    const double a = criterion::loss_kl_uni(batch_from_columns({col}), cfg).item();
    const double b = criterion::loss_kl_uni(batch_from_columns({shuffled}), cfg).item();
    CHECK(a == doctest::Approx(b).epsilon(1e-12));
}

TEST_CASE("total_loss weighting identities") {
    std::mt19937_64 g(61);
    std::vector<double> raw(200 * 2);
    for (auto& v : raw) v = rng::uniform(g, 0.0, 1.0);
    Tensor x = Tensor::constant(200, 2, raw);

    criterion::CliffWeights uni_only;
    uni_only.lambda_uni = 1.0;
    uni_only.lambda_biv = 0.0;
    uni_only.lambda_kl_uni = 0.0;
    std::mt19937_64 zr(1);
    auto res = criterion::total_loss(x, uni_only, zr);
    CHECK(res.total.item() == res.report.l_uni);
    CHECK(res.report.l_biv == 0.0);

    criterion::CliffWeights paper;  // (0, 1, 1), the synthetic configuration
    std::mt19937_64 zr2(1);
    auto res2 = criterion::total_loss(x, paper, zr2);
    CHECK(res2.report.total ==
          doctest::Approx(res2.report.l_biv + res2.report.l_kl_uni).epsilon(1e-9));
    CHECK(res2.total.item() == doctest::Approx(res2.report.total).epsilon(1e-9));
}

TEST_CASE("kernel evaluation counts per term") {
    const std::size_t n = 50, d = 3;
    const int m = 7, k = 100;
    std::mt19937_64 g(71);
    std::vector<double> raw(n * d);
    for (auto& v : raw) v = rng::uniform(g, 0.0, 1.0);
    criterion::CliffWeights w;
    w.lambda_uni = 1.0;
    w.lambda_biv = 1.0;
    w.lambda_kl_uni = 1.0;
    w.m_conditioning = m;
    std::mt19937_64 zr(2);
    auto res = criterion::total_loss(Tensor::constant(n, d, raw), w, zr);
    CHECK(res.report.counts.uni_1d == d * k * n);
    CHECK(res.report.counts.biv_joint_2d == d * (d - 1) * m * k * n);
    CHECK(res.report.counts.kl_1d == d * k * n);
    CHECK(res.report.counts.biv_cond_1d == d * (d - 1) * m * n);
}

TEST_CASE("scale invariance through standardization") {
    std::mt19937_64 g(81);
    const std::size_t n = 300;
    std::vector<double> raw(n * 2), scaled(n * 2);
    for (std::size_t i = 0; i < raw.size(); ++i) {
        raw[i] = rng::uniform(g, 0.0, 1.0);
        scaled[i] = (i % 2 == 0) ? raw[i] * 37.5 : raw[i];
    }
    criterion::CliffWeights w;
    w.lambda_uni = 1.0;
    auto sb = density::standardize(Tensor::constant(n, 2, raw));
    auto zetas = zetas_for(sb, w.m_conditioning, 9);
    auto r1 = criterion::total_loss(Tensor::constant(n, 2, raw), w, zetas);
    auto r2 = criterion::total_loss(Tensor::constant(n, 2, scaled), w, zetas);
    CHECK(std::fabs(r1.report.l_uni - r2.report.l_uni) < 1e-9);
    CHECK(std::fabs(r1.report.l_biv - r2.report.l_biv) < 1e-9);
    CHECK(std::fabs(r1.report.l_kl_uni - r2.report.l_kl_uni) < 1e-9);
    CHECK(std::fabs(r1.report.total - r2.report.total) < 1e-9);
}

TEST_CASE("permutation equivariance of the report") {
    std::mt19937_64 g(91);
    const std::size_t n = 250;
    std::vector<double> raw(n * 3), permuted(n * 3);
    for (auto& v : raw) v = rng::uniform(g, 0.0, 1.0);
    // permutation (0,1,2) -> (2,0,1): column j of permuted = column p[j] of raw
    const std::size_t p[3] = {2, 0, 1};
    for (std::size_t k = 0; k < n; ++k)
        for (std::size_t j = 0; j < 3; ++j) permuted[k * 3 + j] = raw[k * 3 + p[j]];

    criterion::CliffWeights w;
    w.lambda_uni = 1.0;
    w.m_conditioning = 10;
    auto sb = density::standardize(Tensor::constant(n, 3, raw));
    auto zetas = zetas_for(sb, 10, 4);
    // permuted zeta selection: entry (i, j) of the permuted batch pairs
    // factors p[i], p[j] of the original
    criterion::ZetaSelection zperm;
    zperm.d = 3;
    zperm.values.assign(9, {});
    for (std::size_t i = 0; i < 3; ++i)
        for (std::size_t j = 0; j < 3; ++j)
            if (i != j) zperm.values[i * 3 + j] = zetas.at(p[i], p[j]);

    auto r1 = criterion::total_loss(Tensor::constant(n, 3, raw), w, zetas);
    auto r2 = criterion::total_loss(Tensor::constant(n, 3, permuted), w, zperm);
    CHECK(r2.report.total == doctest::Approx(r1.report.total).epsilon(1e-9));
    for (std::size_t i = 0; i < 3; ++i) {
        CHECK(r2.report.per_factor_entropy[i] ==
              doctest::Approx(r1.report.per_factor_entropy[p[i]]).epsilon(1e-9));
        for (std::size_t j = 0; j < 3; ++j)
            if (i != j)
                CHECK(r2.report.per_pair_jsd[i][j] ==
                      doctest::Approx(r1.report.per_pair_jsd[p[i]][p[j]]).epsilon(1e-9));
    }
}

TEST_CASE("per-pair JSD nonnegativity on random batches") {
    std::mt19937_64 g(101);
    for (int trial = 0; trial < 5; ++trial) {
        const std::size_t n = 100;
        std::vector<double> raw(n * 2);
        for (auto& v : raw) v = rng::uniform(g, 0.0, 1.0);
        criterion::CliffWeights w;
        w.m_conditioning = 8;
        std::mt19937_64 zr(static_cast<std::uint64_t>(trial));
        auto res = criterion::total_loss(Tensor::constant(n, 2, raw), w, zr);
        for (std::size_t i = 0; i < 2; ++i)
            for (std::size_t j = 0; j < 2; ++j)
                if (i != j) CHECK(res.report.per_pair_jsd[i][j] >= -1e-9);
    }
}

TEST_CASE("squared Hellinger divergence option") {
    std::mt19937_64 g(111);
    std::vector<double> zi(150), zj(150);
    for (auto& v : zi) v = rng::normal(g);
    for (auto& v : zj) v = rng::normal(g);
    auto b = batch_from_columns({zi, zj});
    density::KernelConfig cfg;
    const double h1 = criterion::jsd_pairwise(b, 0, 1, {zj[0]}, cfg,
                                              criterion::Divergence::squared_hellinger)
                          .item();
    CHECK(std::fabs(h1) <= 2e-5);  // single profile: distance to itself
    const double h2 = criterion::jsd_pairwise(b, 0, 1, {zj[0], zj[1], zj[2]}, cfg,
                                              criterion::Divergence::squared_hellinger)
                          .item();
    CHECK(h2 >= -1e-9);
}

TEST_CASE("flat conditional profile raises an error naming the pair") {
    // factor i far outside the grid: the kernel never touches [-5, 5]
    std::vector<double> zi(40, 1e6), zj(40);
    for (std::size_t k = 0; k < zj.size(); ++k) zj[k] = 0.01 * static_cast<double>(k);
    auto b = batch_from_columns({zi, zj});
    density::KernelConfig cfg;
    CHECK_THROWS_WITH_AS(criterion::jsd_pairwise(b, 0, 1, {zj[3]}, cfg),
                         doctest::Contains("i=0, j=1, m=0"), density::DegenerateFactorError);
}

TEST_CASE("zeta draws: policies and bounds") {
    std::mt19937_64 g(121);
    auto idx = criterion::draw_zeta_indices(50, 2, 10, criterion::ZetaPolicy::first_m, g);
    for (std::size_t k = 0; k < 10; ++k) CHECK(idx.at(0, 1)[k] == k);

    auto rnd = criterion::draw_zeta_indices(50, 2, 10,
                                            criterion::ZetaPolicy::random_from_batch, g);
    auto sorted = rnd.at(0, 1);
    std::sort(sorted.begin(), sorted.end());
    CHECK(std::adjacent_find(sorted.begin(), sorted.end()) == sorted.end());  // distinct
    CHECK(sorted.back() < 50);

    CHECK_THROWS_AS(
        criterion::draw_zeta_indices(5, 2, 10, criterion::ZetaPolicy::first_m, g),
        DomainError);
}

TEST_CASE("weights validation") {
    criterion::CliffWeights w;
    w.lambda_uni = w.lambda_biv = w.lambda_kl_uni = 0.0;
    CHECK_THROWS_AS(w.validate(), DomainError);
    w.lambda_uni = -1.0;
    CHECK_THROWS_AS(w.validate(), DomainError);
}
