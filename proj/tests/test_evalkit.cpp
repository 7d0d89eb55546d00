#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "cliff/evalkit.hpp"
#include "cliff/rng.hpp"
#include "cliff/synthdata.hpp"

using namespace cliff;

namespace {

synth::LatentBatch batch_of(std::size_t n, std::size_t d, std::vector<double> vals,
                            synth::LatentBatch::Provenance prov) {
    synth::LatentBatch b;
    b.n = n;
    b.d = d;
    b.values = std::move(vals);
    b.provenance = prov;
    return b;
}

std::vector<double> standardized_cuts(const std::vector<double>& col,
                                      const std::vector<double>& cuts) {
    double m = 0;
    for (double v : col) m += v;
    m /= static_cast<double>(col.size());
    double var = 0;
    for (double v : col) var += (v - m) * (v - m);
    var /= static_cast<double>(col.size());
    const double sd = std::sqrt(var);
    std::vector<double> out;
    for (double t : cuts) out.push_back((t - m) / sd);
    return out;
}

double circular_dist(double a, double b, double period) {
    double d = std::fmod(std::fabs(a - b), period);
    return std::min(d, period - d);
}

}  // namespace

TEST_CASE("spearman basics") {
    CHECK(evalkit::spearman({1, 2, 3, 4}, {1, 2, 3, 4}) == doctest::Approx(1.0));
    CHECK(evalkit::spearman({1, 2, 3}, {3, 1, 2}) == doctest::Approx(-0.5));
    // monotone invariance
    std::mt19937_64 g(3);
    std::vector<double> x(50), ex(50);
    for (std::size_t i = 0; i < x.size(); ++i) {
        x[i] = rng::normal(g);
        ex[i] = std::exp(x[i]);
    }
    CHECK(evalkit::spearman(x, ex) == doctest::Approx(1.0));
}

TEST_CASE("spearman error paths") {
    CHECK_THROWS_AS(evalkit::spearman({1, 2}, {2, 1}), DomainError);
    CHECK_THROWS_AS(evalkit::spearman({1, 1, 1}, {1, 2, 3}), DomainError);
    CHECK_THROWS_AS(evalkit::spearman({1, 2, 3}, {1, 2}), ShapeError);
}

TEST_CASE("spearman handles ties with average ranks") {
    // x has a tie; hand-computed rank vectors: x -> (1.5, 1.5, 3), y -> (1,2,3)
    const double rho = evalkit::spearman({5, 5, 9}, {1, 2, 3});
    // pearson((1.5,1.5,3),(1,2,3)) = (1.5*... ) = 0.866025
    CHECK(rho == doctest::Approx(0.8660254).epsilon(1e-6));
}

TEST_CASE("mcc: exact recovery scores 100") {
    std::mt19937_64 g(7);
    std::vector<double> vals(100 * 2);
    for (auto& v : vals) v = rng::normal(g);
    auto t = batch_of(100, 2, vals, synth::LatentBatch::Provenance::true_z);
    auto r = batch_of(100, 2, vals, synth::LatentBatch::Provenance::recovered_z);
    auto rep = evalkit::mcc(t, r);
    CHECK(rep.mcc == doctest::Approx(100.0));
    CHECK(rep.assignment == std::vector<std::size_t>{0, 1});
}

TEST_CASE("mcc absorbs permutation and negation") {
    std::mt19937_64 g(9);
    const std::size_t n = 200;
    std::vector<double> vals(n * 3), perm(n * 3);
    for (auto& v : vals) v = rng::normal(g);
    // recovered = (-z2, z0, -z1)
    for (std::size_t k = 0; k < n; ++k) {
        perm[k * 3 + 0] = -vals[k * 3 + 2];
        perm[k * 3 + 1] = vals[k * 3 + 0];
        perm[k * 3 + 2] = -vals[k * 3 + 1];
    }
    auto t = batch_of(n, 3, vals, synth::LatentBatch::Provenance::true_z);
    auto r = batch_of(n, 3, perm, synth::LatentBatch::Provenance::recovered_z);
    auto rep = evalkit::mcc(t, r);
    CHECK(rep.mcc == doctest::Approx(100.0));
    CHECK(rep.assignment == std::vector<std::size_t>{1, 2, 0});
    CHECK(rep.signs == std::vector<int>{1, -1, -1});
}

TEST_CASE("mcc: independent factors score low at n=5000") {
    std::mt19937_64 g(11);
    const std::size_t n = 5000;
    std::vector<double> a(n * 2), b(n * 2);
    for (auto& v : a) v = rng::normal(g);
    for (auto& v : b) v = rng::normal(g);
    auto rep = evalkit::mcc(batch_of(n, 2, a, synth::LatentBatch::Provenance::true_z),
                            batch_of(n, 2, b, synth::LatentBatch::Provenance::recovered_z));
    CHECK(rep.mcc < 10.0);
}

TEST_CASE("mcc invariances: monotone transform, permutation, sign flips") {
    std::mt19937_64 g(13);
    const std::size_t n = 300;
    std::vector<double> tv(n * 2), rv(n * 2);
    for (auto& v : tv) v = rng::normal(g);
    for (std::size_t k = 0; k < n; ++k) {
        rv[k * 2] = 0.8 * tv[k * 2] + 0.2 * rng::normal(g);
        rv[k * 2 + 1] = 0.7 * tv[k * 2 + 1] + 0.3 * rng::normal(g);
    }
    auto t = batch_of(n, 2, tv, synth::LatentBatch::Provenance::true_z);
    auto base = evalkit::mcc(t, batch_of(n, 2, rv, synth::LatentBatch::Provenance::recovered_z));

    std::vector<double> warped(n * 2), flipped(n * 2), permuted(n * 2);
    for (std::size_t k = 0; k < n; ++k) {
        // strictly monotone componentwise transform
        warped[k * 2] = std::atan(rv[k * 2]) * 3 + rv[k * 2];
        warped[k * 2 + 1] = std::exp(rv[k * 2 + 1]);
        flipped[k * 2] = -rv[k * 2];
        flipped[k * 2 + 1] = rv[k * 2 + 1];
        permuted[k * 2] = rv[k * 2 + 1];
        permuted[k * 2 + 1] = rv[k * 2];
    }
    const double m1 =
        evalkit::mcc(t, batch_of(n, 2, warped, synth::LatentBatch::Provenance::recovered_z)).mcc;
    const double m2 =
        evalkit::mcc(t, batch_of(n, 2, flipped, synth::LatentBatch::Provenance::recovered_z)).mcc;
    const double m3 =
        evalkit::mcc(t, batch_of(n, 2, permuted, synth::LatentBatch::Provenance::recovered_z)).mcc;
    CHECK(m1 == doctest::Approx(base.mcc).epsilon(1e-9));
    CHECK(m2 == doctest::Approx(base.mcc).epsilon(1e-9));
    CHECK(m3 == doctest::Approx(base.mcc).epsilon(1e-9));
}

TEST_CASE("mcc assignment equals a brute-force search for d=4") {
    std::mt19937_64 g(17);
    const std::size_t n = 80, d = 4;
    std::vector<double> tv(n * d), rv(n * d);
    for (auto& v : tv) v = rng::normal(g);
    for (auto& v : rv) v = rng::normal(g);
    auto t = batch_of(n, d, tv, synth::LatentBatch::Provenance::true_z);
    auto r = batch_of(n, d, rv, synth::LatentBatch::Provenance::recovered_z);
    auto rep = evalkit::mcc(t, r);

    // independent recursive enumeration over assignments
    std::vector<std::size_t> idx(d);
    std::vector<bool> used(d, false);
    double best = -1.0;
    auto recurse = [&](auto&& self, std::size_t i, double acc) -> void {
        if (i == d) {
            best = std::max(best, acc / static_cast<double>(d));
            return;
        }
        for (std::size_t j = 0; j < d; ++j) {
            if (used[j]) continue;
            used[j] = true;
            self(self, i + 1, acc + rep.corr[i][j]);
            used[j] = false;
        }
    };
    recurse(recurse, 0, 0.0);
    CHECK(rep.mcc == doctest::Approx(100.0 * best).epsilon(1e-12));
}

TEST_CASE("mcc: constant recovered column warns instead of failing") {
    std::mt19937_64 g(19);
    const std::size_t n = 50;
    std::vector<double> tv(n * 2), rv(n * 2);
    for (auto& v : tv) v = rng::normal(g);
    for (std::size_t k = 0; k < n; ++k) {
        rv[k * 2] = tv[k * 2];
        rv[k * 2 + 1] = 3.14;  // collapsed
    }
    auto rep = evalkit::mcc(batch_of(n, 2, tv, synth::LatentBatch::Provenance::true_z),
                            batch_of(n, 2, rv, synth::LatentBatch::Provenance::recovered_z));
    CHECK_FALSE(rep.warnings.empty());
    CHECK(rep.corr[1][1] == 0.0);
}

TEST_CASE("threshold detection on a single known jump") {
    // piecewise-uniform with one density jump at 0.45 (ratio 4)
    auto spec = synth::make_spec_with_thresholds({{0.45}}, 7);
    spec.cell_masses = {0.75, 0.25};  // densities 1.667 vs 0.4545 -> ratio 3.7
    spec.validate();
    auto z = synth::sample_latents(spec, 6000, 8);
    density::KernelConfig cfg;
    auto detected = evalkit::detect_thresholds(z, cfg);
    REQUIRE(detected.size() == 1);
    REQUIRE(detected[0].locations.size() == 1);
    const auto cuts = standardized_cuts(z.column(0), {0.45});
    CHECK(std::fabs(detected[0].locations[0] - cuts[0]) <= 2 * 0.1 + 1e-9);
}

TEST_CASE("threshold detection stays quiet on uniform data") {
    synth::GridDensitySpec spec;
    spec.d = 1;
    spec.thresholds = {{}};
    spec.cell_masses = {1.0};
    auto z = synth::sample_latents(spec, 6000, 9);
    density::KernelConfig cfg;
    evalkit::DetectorConfig det;
    det.min_prominence = 0.5;
    auto detected = evalkit::detect_thresholds(z, cfg, det);
    CHECK(detected[0].locations.empty());
}

TEST_CASE("threshold detection recovers the true counts on 2-factor data") {
    auto spec = synth::make_random_spec({2, 1}, 23);
    auto z = synth::sample_latents(spec, 6000, 24);
    density::KernelConfig cfg;
    auto detected = evalkit::detect_thresholds(z, cfg);
    CHECK(detected[0].locations.size() == 2);
    CHECK(detected[1].locations.size() == 1);
    // every true threshold found within 2 grid steps
    for (std::size_t i = 0; i < 2; ++i) {
        const auto cuts = standardized_cuts(z.column(i), spec.thresholds[i]);
        for (double t : cuts) {
            double best = 1e9;
            for (double loc : detected[i].locations) best = std::min(best, std::fabs(loc - t));
            CHECK(best <= 2 * 0.1 + 1e-9);
        }
    }
}

TEST_CASE("quantized agreement: identity, reversal, and warp") {
    auto spec = synth::make_random_spec({2, 1}, 33);
    auto z = synth::sample_latents(spec, 2000, 34);

    std::vector<evalkit::FactorThresholds> detected(2);
    detected[0].locations = standardized_cuts(z.column(0), spec.thresholds[0]);
    detected[1].locations = standardized_cuts(z.column(1), spec.thresholds[1]);

    SUBCASE("recovered equals true") {
        auto rep = evalkit::quantized_agreement(z, spec, z, detected);
        CHECK(rep.agreement_rate == doctest::Approx(1.0));
        CHECK(rep.permutation == std::vector<std::size_t>{0, 1});
        CHECK(rep.reversals == std::vector<int>{1, 1});
        CHECK_FALSE(rep.structural_mismatch);
    }

    SUBCASE("factor negation is absorbed by the reversal vector") {
        auto rec = z;
        std::vector<evalkit::FactorThresholds> det2(2);
        for (std::size_t k = 0; k < rec.n; ++k) rec.at(k, 0) = -rec.at(k, 0);
        det2[0].locations = standardized_cuts(rec.column(0), [&] {
            std::vector<double> neg;
            for (double t : spec.thresholds[0]) neg.push_back(-t);
            std::sort(neg.begin(), neg.end());
            return neg;
        }());
        det2[1] = detected[1];
        auto rep = evalkit::quantized_agreement(z, spec, rec, det2);
        CHECK(rep.agreement_rate == doctest::Approx(1.0));
        CHECK(rep.reversals[0] == -1);
    }

    SUBCASE("monotone warp of permuted factors keeps the bins") {
        synth::LatentBatch rec;
        rec.n = z.n;
        rec.d = 2;
        rec.values.resize(z.n * 2);
        rec.provenance = synth::LatentBatch::Provenance::recovered_z;
        auto warp0 = [](double v) { return v * v * v + 0.5 * v; };
        auto warp1 = [](double v) { return std::exp(1.7 * v); };
        for (std::size_t k = 0; k < z.n; ++k) {
            rec.at(k, 0) = warp0(z.at(k, 1));  // recovered factor 0 <- true factor 1
            rec.at(k, 1) = warp1(z.at(k, 0));
        }
        std::vector<evalkit::FactorThresholds> det2(2);
        det2[0].locations = standardized_cuts(rec.column(0), [&] {
            std::vector<double> w;
            for (double t : spec.thresholds[1]) w.push_back(warp0(t));
            return w;
        }());
        det2[1].locations = standardized_cuts(rec.column(1), [&] {
            std::vector<double> w;
            for (double t : spec.thresholds[0]) w.push_back(warp1(t));
            return w;
        }());
        auto rep = evalkit::quantized_agreement(z, spec, rec, det2);
        CHECK(rep.agreement_rate == doctest::Approx(1.0));
        CHECK(rep.permutation == std::vector<std::size_t>{1, 0});
    }
}

TEST_CASE("quantized agreement flags structural mismatch") {
    auto spec = synth::make_random_spec({2, 1}, 43);
    auto z = synth::sample_latents(spec, 500, 44);
    std::vector<evalkit::FactorThresholds> detected(2);
    detected[0].locations = {0.0};  // wrong count (true has 2)
    detected[1].locations = {0.0};
    auto rep = evalkit::quantized_agreement(z, spec, z, detected);
    CHECK(rep.structural_mismatch);
    CHECK(rep.agreement_rate < 1.0);
}

TEST_CASE("landscape sweep row layout") {
    auto spec = synth::make_random_spec({1, 1}, 53);
    auto z = synth::sample_latents(spec, 400, 54);
    criterion::CliffWeights w;
    w.lambda_uni = 1.0;
    w.m_conditioning = 10;
    auto rows = evalkit::landscape_sweep(z, 90.0, w, 1);
    REQUIRE(rows.size() == 4);
    CHECK(rows[0].theta1_deg == 0.0);
    CHECK(rows[0].singular);   // (0, 0)
    CHECK_FALSE(rows[1].singular);  // (0, 90)
    CHECK(rows[3].singular);   // (90, 90)
    const auto csv = evalkit::sweep_to_csv(rows);
    CHECK(csv.find("theta1_deg,theta2_deg,l_uni,l_biv,l_kl_uni,total,singular\n") == 0);
}

TEST_CASE("landscape argmins sit at the axes for axis-aligned data") {
    auto spec = synth::make_random_spec({2, 1}, 63);
    auto z = synth::sample_latents(spec, 4000, 64);
    density::KernelConfig cfg;

    SUBCASE("univariate 1-D sweep") {
        auto pts = evalkit::sweep_univariate(z, 5.0, cfg);
        auto best = std::min_element(pts.begin(), pts.end(),
                                     [](const auto& a, const auto& b) {
                                         return a.entropy < b.entropy;
                                     });
        const double d0 = circular_dist(best->theta_deg, 0.0, 180.0);
        const double d90 = circular_dist(best->theta_deg, 90.0, 180.0);
        CHECK(std::min(d0, d90) <= 5.0 + 1e-9);
    }

    SUBCASE("bivariate 2-D sweep avoids the diagonal") {
        criterion::CliffWeights w;  // (0, 1, 1)
        auto rows = evalkit::landscape_sweep(z, 15.0, w, 7, 2);
        const evalkit::SweepRow* best = nullptr;
        for (const auto& r : rows)
            if (!best || r.l_biv < best->l_biv) best = &r;
        REQUIRE(best != nullptr);
        // congruent to (0, 90) mod 180, in either order, within one step
        const double a = best->theta1_deg, b = best->theta2_deg;
        const bool ok =
            (circular_dist(a, 0, 180) <= 15 + 1e-9 && circular_dist(b, 90, 180) <= 15 + 1e-9) ||
            (circular_dist(a, 90, 180) <= 15 + 1e-9 && circular_dist(b, 0, 180) <= 15 + 1e-9);
        CHECK(ok);
        CHECK(circular_dist(a, b, 180.0) > 15.0);  // strictly off the diagonal

        // the diagonal is not a minimizer: loss at (0,0) exceeds loss at (0,90)
        const evalkit::SweepRow *r00 = nullptr, *r090 = nullptr;
        for (const auto& r : rows) {
            if (r.theta1_deg == 0 && r.theta2_deg == 0) r00 = &r;
            if (r.theta1_deg == 0 && r.theta2_deg == 90) r090 = &r;
        }
        REQUIRE(r00 != nullptr);
        REQUIRE(r090 != nullptr);
        CHECK(r00->l_biv > r090->l_biv);
    }
}

TEST_CASE("rotating the data rotates the univariate sweep") {
    auto spec = synth::make_random_spec({2, 1}, 73);
    auto z = synth::sample_latents(spec, 4000, 74);
    synth::LatentBatch rotated = z;
    const double c = std::cos(0.25 * 3.141592653589793), s = std::sin(0.25 * 3.141592653589793);
    for (std::size_t k = 0; k < z.n; ++k) {
        rotated.at(k, 0) = c * z.at(k, 0) - s * z.at(k, 1);
        rotated.at(k, 1) = s * z.at(k, 0) + c * z.at(k, 1);
    }
    density::KernelConfig cfg;
    auto base = evalkit::sweep_univariate(z, 5.0, cfg);
    auto rot = evalkit::sweep_univariate(rotated, 5.0, cfg);
    auto argmin = [](const std::vector<evalkit::UniSweepPoint>& pts) {
        return std::min_element(pts.begin(), pts.end(),
                                [](const auto& a, const auto& b) {
                                    return a.entropy < b.entropy;
                                })
            ->theta_deg;
    };
    // rotating the data by 45 degrees shifts the extrema set by 45; the
    // set repeats every 90 degrees (both axes minimize), so compare mod 90
    const double shift = circular_dist(argmin(rot), argmin(base) + 45.0, 90.0);
    CHECK(shift <= 5.0 + 1e-9);
}

TEST_CASE("landscape sweep validates inputs") {
    auto spec = synth::make_random_spec({1}, 83);
    auto z = synth::sample_latents(spec, 100, 84);
    criterion::CliffWeights w;
    CHECK_THROWS_AS(evalkit::landscape_sweep(z, 5.0, w, 1), DomainError);  // d != 2
    auto spec2 = synth::make_random_spec({1, 1}, 85);
    auto z2 = synth::sample_latents(spec2, 100, 86);
    CHECK_THROWS_AS(evalkit::landscape_sweep(z2, 120.0, w, 1), DomainError);  // step > 90
}
