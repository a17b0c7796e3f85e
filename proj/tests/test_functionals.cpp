#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <functional>

#include "permclt/error.hpp"
#include "permclt/functionals.hpp"
#include "permclt/rng.hpp"

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

StepPath random_path(std::size_t n, Rng& rng, double scale = 1.0) {
    StepPath p(n);
    for (double& v : p.values) v = scale * rng.normal();
    return p;
}

double lp_norm(const StepPath& y, double p) {
    double acc = 0.0;
    for (std::size_t k = 0; k < y.n; ++k) acc += std::pow(std::abs(y.values[k]), p) / double(y.n);
    return std::pow(acc, 1.0 / p);
}

}  // namespace

TEST_CASE("h on constant paths") {
    const StepPath zero(10);
    CHECK(h_eps_p(zero, 0.3, 2.0) == doctest::Approx(0.3));
    CHECK(h_eps_p(zero, 0.3, 7.5) == doctest::Approx(0.3));
    const StepPath c(5, std::vector<double>(6, 2.0));
    CHECK(h_eps_p(c, 1.5, 3.0) == doctest::Approx(2.5));
    CHECK(h_eps_p(c, 1.5, 1.0) == doctest::Approx(2.5));
    CHECK(code_of([&] { h_eps_p(c, 0.0, 2.0); }) == Errc::non_positive);
    CHECK(code_of([&] { h_eps_p(c, 1.0, 0.5); }) == Errc::range_error);
}

TEST_CASE("h integrates exactly over constancy intervals") {
    // Value at t = 1 carries no mass.
    const StepPath y(2, {0.0, 1.0, 100.0});
    CHECK(h_eps_p(y, 1.0, 2.0) == doctest::Approx(std::sqrt(0.5 * 1.0 + 0.5 * 2.0)));
}

TEST_CASE("h bounds and Minkowski") {
    Rng rng(12, 0);
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t n = 1 + rng.below(30);
        const double eps = 0.05 + rng.uniform();
        const double p = 1.0 + 6.0 * rng.uniform();
        const StepPath y = random_path(n, rng);
        const StepPath z = random_path(n, rng, 0.5);
        StepPath yz(n);
        for (std::size_t k = 0; k <= n; ++k) yz.values[k] = y.values[k] + z.values[k];
        const double hy = h_eps_p(y, eps, p);
        CHECK(hy >= eps * (1 - 1e-12));
        CHECK(hy >= lp_norm(y, p) * (1 - 1e-12));
        CHECK(h_eps_p(yz, eps, p) <= hy + lp_norm(z, p) + 1e-12);
        CHECK(h_eps_p(y, eps * 1.1, p) >= hy);
        StepPath big = y;
        for (double& v : big.values) v *= 1.5;
        CHECK(h_eps_p(big, eps, p) >= hy);
    }
}

TEST_CASE("h tends to the sup as p grows") {
    Rng rng(13, 0);
    for (int trial = 0; trial < 20; ++trial) {
        const std::size_t n = 2 + rng.below(49);
        const double eps = 0.1 + rng.uniform();
        const StepPath y = random_path(n, rng);
        double sup = 0.0;
        for (std::size_t k = 0; k < n; ++k) sup = std::max(sup, std::sqrt(eps * eps + y.values[k] * y.values[k]));
        const double h64 = h_eps_p(y, eps, 64.0);
        CHECK(h64 <= sup * (1 + 1e-12));
        CHECK(h64 >= sup * std::pow(double(n), -1.0 / 64) * (1 - 1e-12));
        CHECK(std::abs(h_eps_p(y, eps, 4096.0) - sup) <= 1e-2 * sup);
    }
}

TEST_CASE("phi cutoff") {
    CHECK(phi_cutoff(-1.0) == 1.0);
    CHECK(phi_cutoff(2.0) == 0.0);
    CHECK(phi_cutoff(0.0) == 1.0);
    CHECK(phi_cutoff(1.0) == doctest::Approx(0.0));
    CHECK(phi_cutoff(0.5) == doctest::Approx(0.5));
    CHECK(phi_rho_eta(0.7, 0.7, 0.2) == 1.0);
    CHECK(phi_rho_eta(0.9, 0.7, 0.2) == doctest::Approx(0.0));
    CHECK(code_of([] { phi_rho_eta(0.0, 0.0, 0.0); }) == Errc::non_positive);
    for (int k = 0; k <= 100; ++k) CHECK(phi_cutoff(k / 100.0) >= phi_cutoff((k + 1) / 100.0));

    // Central differences of orders one to three vanish at the junctions.
    for (double x0 : {0.0, 1.0}) {
        double prev = 1e9;
        for (double h : {1e-2, 1e-3}) {
            const double d1 = (phi_cutoff(x0 + h) - phi_cutoff(x0 - h)) / (2 * h);
            const double d2 = (phi_cutoff(x0 + h) - 2 * phi_cutoff(x0) + phi_cutoff(x0 - h)) / (h * h);
            const double d3 = (phi_cutoff(x0 + 2 * h) - 2 * phi_cutoff(x0 + h) + 2 * phi_cutoff(x0 - h) -
                               phi_cutoff(x0 - 2 * h)) /
                              (2 * h * h * h);
            const double worst = std::max({std::abs(d1), std::abs(d2), std::abs(d3)});
            CHECK(worst < prev);
            prev = worst;
        }
        CHECK(prev < 0.5);
    }
}

TEST_CASE("ball functional") {
    BallFunctional g{0.2, 3.0, 0.5, 0.25, {}};
    const StepPath s(8);
    CHECK(ball(g, s) == 1.0);
    StepPath far(8, std::vector<double>(9, 1e6));
    CHECK(ball(g, far) == 0.0);

    g.center = StepPath(8, std::vector<double>(9, 0.3));
    CHECK(ball(g, g.center) == 1.0);
    CHECK(code_of([&] { ball(g, StepPath(5)); }) == Errc::grid_mismatch);

    Rng rng(14, 0);
    for (int trial = 0; trial < 300; ++trial) {
        const StepPath w = random_path(8, rng, 0.6);
        const double v = ball(g, w);
        CHECK(v >= 0.0);
        CHECK(v <= 1.0);
        StepPath d(8);
        for (std::size_t k = 0; k <= 8; ++k) d.values[k] = w.values[k] - 0.3;
        const double h = h_eps_p(d, g.eps, g.p);
        if (h <= g.rho) CHECK(v == 1.0);
        if (h >= g.rho + g.eta) CHECK(v == 0.0);
    }

    BallFunctional bad = g;
    bad.eta = 0.0;
    CHECK(code_of([&] { validate(bad); }) == Errc::non_positive);
    bad = g;
    bad.p = 0.5;
    CHECK(code_of([&] { validate(bad); }) == Errc::range_error);
}

TEST_CASE("indicator sandwich") {
    Rng rng(15, 0);
    for (int trial = 0; trial < 200; ++trial) {
        const double gamma = 0.1 + rng.uniform();
        const double eps = 0.05 + 0.5 * rng.uniform();
        const std::size_t n = 1 + rng.below(20);
        StepPath w(n);
        for (double& v : w.values) v = gamma * (2 * rng.uniform() - 1) * 0.999;
        const BallFunctional g{eps * gamma, 2.0 + 10 * rng.uniform(), gamma * std::sqrt(1 + eps * eps), 0.3, {}};
        CHECK(ball(g, w) == 1.0);
    }
}

TEST_CASE("ball Lipschitz probe") {
    const BallFunctional g{0.25, 4.0, 0.45, 0.35, {}};
    Rng rng(16, 0);
    double worst = 0.0;
    for (int trial = 0; trial < 200; ++trial) {
        const StepPath w = random_path(10, rng, 0.5);
        StepPath w2 = w;
        for (double& v : w2.values) v += 1e-6 * rng.normal();
        double diff = 0.0;
        for (std::size_t k = 0; k <= 10; ++k) diff = std::max(diff, std::abs(w2.values[k] - w.values[k]));
        worst = std::max(worst, std::abs(ball(g, w2) - ball(g, w)) / diff);
    }
    CHECK(std::isfinite(worst));
    CHECK(worst < 100.0);
}

TEST_CASE("norm scale") {
    CHECK(norm_scale(BallFunctional{1, 1, 0, 1, {}}) == doctest::Approx(1.0));
    const BallFunctional g{0.3, 3.0, 0.5, 0.4, {}};
    BallFunctional g2 = g;
    g2.eta *= 2;
    CHECK(norm_scale(g2) == doctest::Approx(norm_scale(g) / 8));
    g2 = g;
    g2.p *= 2;
    CHECK(norm_scale(g2) == doctest::Approx(norm_scale(g) * 4));
}

TEST_CASE("functional specs") {
    const Functional f = parse_functional("ball:eps=0.25:p=4:rho=0.45:eta=0.35");
    REQUIRE(std::holds_alternative<BallFunctional>(f));
    CHECK(std::get<BallFunctional>(f).p == 4.0);
    CHECK(evaluate(f, StepPath(3)) == 1.0);
    const StepPath y(2, {0.0, 2.0, 4.0});
    CHECK(evaluate(parse_functional("eval:t=0.5"), y) == 2.0);
    CHECK(evaluate(parse_functional("integral"), y) == doctest::Approx(1.0));
    CHECK(!describe(f).empty());
    CHECK(code_of([] { parse_functional("ball:eps=1:p=2"); }) == Errc::parse_error);
    CHECK(code_of([] { parse_functional("ball:eps=1:p=2:rho=1:eta=1:zz=3"); }) == Errc::parse_error);
    CHECK(code_of([] { parse_functional("eval:t=1.5"); }) == Errc::range_error);
    CHECK(code_of([] { parse_functional("wat"); }) == Errc::parse_error);
    CHECK(code_of([] { parse_functional("ball:eps=x:p=2:rho=1:eta=1"); }) == Errc::parse_error);
}
