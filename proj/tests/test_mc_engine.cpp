#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>

#include "permclt/error.hpp"
#include "permclt/functionals.hpp"
#include "permclt/mc_engine.hpp"
#include "permclt/tableaux.hpp"

using namespace permclt;

namespace {

Errc code_of(const std::function<void()>& fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.code();
    }
    FAIL("expected an error");
    return Errc::invalid_input;
}

RowMatrix mat2(double a, double b, double c, double d) {
    RowMatrix m(2, 2);
    m << a, b, c, d;
    return m;
}

}  // namespace

TEST_CASE("run config validation") {
    RunConfig cfg;
    cfg.samples = 0;
    CHECK(code_of([&] { cfg.validate(); }) == Errc::config_error);
    cfg.samples = 10;
    cfg.workers = 0;
    CHECK(code_of([&] { cfg.validate(); }) == Errc::config_error);
    cfg.workers = 2;
    cfg.grid = {0.5, 0.25};
    CHECK(code_of([&] { cfg.validate(); }) == Errc::config_error);
    cfg.grid = {0.25, 1.5};
    CHECK(code_of([&] { cfg.validate(); }) == Errc::config_error);
    cfg.grid = {0.25, 0.5};
    cfg.functionals = {"integral"};
    cfg.n = 7;
    cfg.seed = 99;
    const RunConfig back = RunConfig::from_json(cfg.to_json());
    CHECK(back.to_json() == cfg.to_json());
}

TEST_CASE("random permutations") {
    Rng r(1, 0);
    CHECK(random_permutation(1, r) == Permutation{0});
    CHECK(code_of([&] { random_permutation(0, r); }) == Errc::invalid_input);

    std::map<Permutation, std::size_t> counts;
    const std::size_t M = 60000;
    for (std::size_t k = 0; k < M; ++k) {
        Rng rng(2, k);
        ++counts[random_permutation(3, rng)];
    }
    CHECK(counts.size() == 6);
    double chi2 = 0.0;
    for (const auto& [p, c] : counts) chi2 += (c - M / 6.0) * (c - M / 6.0) / (M / 6.0);
    // 5 degrees of freedom; 0.1% point is 20.5.
    CHECK(chi2 < 20.5);
}

TEST_CASE("permutation enumeration") {
    std::size_t count = 0;
    Permutation last;
    for_each_permutation(4, [&](std::span<const std::size_t> p) {
        Permutation cur(p.begin(), p.end());
        if (!last.empty()) CHECK(last < cur);
        last = cur;
        ++count;
    });
    CHECK(count == 24);
    CHECK(code_of([] { for_each_permutation(9, [](std::span<const std::size_t>) {}); }) == Errc::too_large);
}

TEST_CASE("ensemble stats merge") {
    Rng rng(3, 0);
    std::vector<std::vector<double>> rows(500, std::vector<double>(3));
    for (auto& r : rows)
        for (double& v : r) v = 5.0 + rng.normal();
    EnsembleStats whole(3, 1), a(3, 1), b(3, 1);
    for (std::size_t k = 0; k < rows.size(); ++k) {
        const double f = rows[k][0] * rows[k][1];
        whole.add(rows[k], std::span<const double>(&f, 1));
        (k < 137 ? a : b).add(rows[k], std::span<const double>(&f, 1));
    }
    a.merge(b);
    CHECK(a.count() == whole.count());
    for (std::size_t i = 0; i < 3; ++i) {
        CHECK(std::abs(a.mean(i) - whole.mean(i)) < 1e-9);
        for (std::size_t j = 0; j < 3; ++j) CHECK(std::abs(*a.covariance(i, j) - *whole.covariance(i, j)) < 1e-9);
    }
    CHECK(std::abs(a.functional_mean(0) - whole.functional_mean(0)) < 1e-9);
    CHECK(std::abs(*a.functional_variance(0) - *whole.functional_variance(0)) < 1e-9);

    // Direct two-pass covariance.
    double m0 = 0, m1 = 0;
    for (const auto& r : rows) m0 += r[0], m1 += r[1];
    m0 /= 500, m1 /= 500;
    double c = 0;
    for (const auto& r : rows) c += (r[0] - m0) * (r[1] - m1);
    CHECK(*whole.covariance(0, 1) == doctest::Approx(c / 499));
    const double se = std::sqrt((*whole.variance(0) * *whole.variance(1) + c / 499 * c / 499) / 499);
    CHECK(*whole.se_covariance(0, 1) == doctest::Approx(se));

    EnsembleStats one(2, 1);
    const double v[2] = {1, 2};
    const double f = 3;
    one.add(v, std::span<const double>(&f, 1));
    CHECK_FALSE(one.covariance(0, 1).has_value());
    CHECK_FALSE(one.functional_se(0).has_value());
    CHECK(one.to_json().dump().find("insufficient data") != std::string::npos);

    EnsembleStats other(3, 0);
    other.add(std::vector<double>{1, 2, 3});
    CHECK(code_of([&] { one.merge(other); }) == Errc::invalid_input);
}

TEST_CASE("parallel chunks cover every sample once") {
    std::vector<int> hits(5000, 0);
    parallel_chunks(5000, 3, [&](std::size_t, std::size_t b, std::size_t e) {
        for (std::size_t i = b; i < e; ++i) ++hits[i];
    });
    CHECK(std::all_of(hits.begin(), hits.end(), [](int h) { return h == 1; }));
    CHECK_THROWS_AS(parallel_chunks(3000, 2,
                                    [](std::size_t c, std::size_t, std::size_t) {
                                        if (c == 1) fail(Errc::invalid_input, "boom");
                                    }),
                    Error);
}

TEST_CASE("ensembles are deterministic across worker counts") {
    const ScoreMatrix m = exceedance_matrix(20);
    const PermutationPathSource src(m, normalization(m, NormMode::canonical));
    RunConfig cfg;
    cfg.n = 20;
    cfg.samples = 5000;
    cfg.seed = 77;
    cfg.grid = {0.25, 0.5, 1.0};
    cfg.functionals = {"integral", "ball:eps=0.25:p=4:rho=0.45:eta=0.35"};
    cfg.workers = 1;
    nlohmann::json a = run_ensemble(cfg, src).to_json();
    cfg.workers = 4;
    nlohmann::json b = run_ensemble(cfg, src).to_json();
    CHECK(a["means"] == b["means"]);
    CHECK(a["covariances"] == b["covariances"]);
    CHECK(a["functionals"] == b["functionals"]);
    cfg.workers = 1;
    CHECK(run_ensemble(cfg, src).to_json().dump() == a.dump());
    cfg.seed = 78;
    CHECK(run_ensemble(cfg, src).to_json()["means"] != a["means"]);
}

TEST_CASE("tableau source equals the centered exceedance path") {
    const std::size_t n = 12;
    const ScoreMatrix m = exceedance_matrix(n);
    const TableauPathSource t(n);
    for (std::uint64_t k = 0; k < 20; ++k) {
        Rng r1(5, k), r2(5, k);
        const StepPath y = t.draw(r1);
        const Permutation p = random_permutation(n, r2);
        const ExceedanceRecord rec = exceedance_record(p);
        CHECK(y.values[n] == doctest::Approx((double(rec.rows) - n * 0.5) / std::sqrt(double(n))));
    }
}

TEST_CASE("kolmogorov distribution") {
    CHECK(kolmogorov_q(0.0) == 1.0);
    CHECK(kolmogorov_q(1.3580986) == doctest::Approx(0.05).epsilon(1e-4));
    CHECK(kolmogorov_q(1.6276236) == doctest::Approx(0.01).epsilon(1e-4));
    CHECK(ks_critical_value(20000, 0.01) == doctest::Approx(0.011509).epsilon(1e-4));
    CHECK(code_of([] { ks_critical_value(100, 1.5); }) == Errc::range_error);
}

TEST_CASE("ks test calibration") {
    int rejections = 0;
    const int trials = 200;
    for (int t = 0; t < trials; ++t) {
        Rng rng(6, t);
        std::vector<double> x(1000);
        for (double& v : x) v = 2.0 + 3.0 * rng.normal();
        if (ks_normal(x, 2.0, 3.0).p_value < 0.05) ++rejections;
    }
    // Binomial(200, 0.05): mean 10, sd 3.1.
    CHECK(rejections <= 22);

    Rng rng(7, 0);
    std::vector<double> shifted(2000);
    for (double& v : shifted) v = 0.3 + rng.normal();
    CHECK(ks_normal(shifted, 0.0, 1.0).p_value < 1e-6);

    const std::vector<double> constant(500, 1.0);
    CHECK(code_of([&] { ks_normal(constant, 0.0, 1.0); }) == Errc::degenerate_sample);
    CHECK(code_of([&] { ks_normal(shifted, 0.0, 0.0); }) == Errc::non_positive);
    CHECK(code_of([&] { ks_normal(std::vector<double>(50, 0.0), 0.0, 1.0); }) == Errc::invalid_input);
}

TEST_CASE("distance of a source to itself is zero") {
    const ScoreMatrix m = exceedance_matrix(10);
    const PermutationPathSource src(m, normalization(m, NormMode::canonical));
    RunConfig cfg;
    cfg.n = 10;
    cfg.samples = 3000;
    cfg.seed = 8;
    const DistanceEstimate d = distance_estimate(cfg, parse_functional("integral"), src, src);
    CHECK(d.delta == 0.0);
    CHECK(d.ci_low <= 0.0);
    CHECK(d.ci_high >= 0.0);
}

TEST_CASE("distance oracle at n = 2") {
    // a = [[1/2, -1/2], [-1, 1]], s^2 = 5/2, sigma = [[0.1, 0.2], [0.2, 0.4]].
    const ScoreMatrix m = center_rows(mat2(1, 0, 0, 2));
    const Normalization s = normalization(m, NormMode::canonical);
    const SigmaMatrix sig = sigma_matrix(m, s);
    CHECK(sig.sigma(0, 0) == doctest::Approx(0.1));
    CHECK(sig.sigma(0, 1) == doctest::Approx(0.2));
    CHECK(sig.sigma(1, 1) == doctest::Approx(0.4));

    const BallFunctional g{0.1, 2.0, 0.25, 0.5, {}};
    double ey = 0.0;
    for_each_permutation(2, [&](std::span<const std::size_t> p) { ey += ball(g, build_path(m, s, p)) / 2.0; });

    // Z(1/2) = W1 ~ N(0, 0.1); h^2 = eps^2 + W1^2 / 2 on a two-cell grid.
    const double sd = std::sqrt(0.1);
    const int cells = 200000;
    const double lo = -12 * sd, hi = 12 * sd, dx = (hi - lo) / cells;
    double ez = 0.0;
    for (int k = 0; k <= cells; ++k) {
        const double x = lo + k * dx;
        const double w = (k == 0 || k == cells) ? 1 : (k % 2 ? 4 : 2);
        const double h = std::sqrt(g.eps * g.eps + 0.5 * x * x);
        ez += w * phi_rho_eta(h, g.rho, g.eta) * std::exp(-0.5 * x * x / 0.1) / (sd * std::sqrt(2 * M_PI));
    }
    ez *= dx / 3.0;
    const double exact = std::abs(ey - ez);
    CHECK(exact > 0.01);

    RunConfig cfg;
    cfg.n = 2;
    cfg.samples = 100000;
    cfg.seed = 9;
    const PermutationPathSource y(m, s);
    const PreLimitPathSource z(m, s, false);
    const DistanceEstimate d = distance_estimate(cfg, g, y, z);
    CHECK(std::abs(d.mean_a - ey) < 1e-12);
    CHECK(std::abs(d.delta - exact) <= 4 * d.se);
}
