#include "doctest.h"

#include <cmath>
#include <functional>
#include <limits>
#include <numeric>

#include <Eigen/Eigenvalues>

#include "permclt/error.hpp"
#include "permclt/matrix_core.hpp"
#include "permclt/matrix_io.hpp"
#include "permclt/mc_engine.hpp"
#include "permclt/rng.hpp"
#include "permclt/tableaux.hpp"

using namespace permclt;

namespace {

RowMatrix mat(std::initializer_list<std::initializer_list<double>> rows) {
    RowMatrix m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.begin()->size()));
    Eigen::Index i = 0;
    for (const auto& r : rows) {
        Eigen::Index j = 0;
        for (double v : r) m(i, j++) = v;
        ++i;
    }
    return m;
}

RowMatrix random_matrix(std::size_t n, std::uint64_t seed) {
    Rng rng(seed, 0);
    RowMatrix a(n, n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) a(i, j) = rng.normal();
    return a;
}

Errc code_of(const std::function<void()>& fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.code();
    }
    FAIL("expected an error");
    return Errc::invalid_input;
}

}  // namespace

TEST_CASE("center_rows examples") {
    const ScoreMatrix m = center_rows(mat({{1, 1}, {0, 1}}));
    CHECK(m.a()(0, 0) == doctest::Approx(0.0));
    CHECK(m.a()(0, 1) == doctest::Approx(0.0));
    CHECK(m.a()(1, 0) == doctest::Approx(-0.5));
    CHECK(m.a()(1, 1) == doctest::Approx(0.5));
    CHECK(m.row_means()[0] == doctest::Approx(1.0));
    CHECK(m.grand_mean() == doctest::Approx(0.75));

    const ScoreMatrix c = center_rows(mat({{2, 2, 2}, {-1, -1, -1}, {5, 5, 5}}));
    CHECK(c.a().cwiseAbs().maxCoeff() == 0.0);

    const ScoreMatrix e = exceedance_matrix(3);
    CHECK(e(1, 0) == doctest::Approx(-2.0 / 3));
    CHECK(e(1, 1) == doctest::Approx(1.0 / 3));
    CHECK(e(1, 2) == doctest::Approx(1.0 / 3));
}

TEST_CASE("center_rows invariants and errors") {
    const RowMatrix a0 = random_matrix(9, 1) * 100.0;
    const ScoreMatrix m = center_rows(a0);
    const double tol = 1e-12 * 9 * a0.cwiseAbs().maxCoeff();
    for (Eigen::Index i = 0; i < 9; ++i) {
        CHECK(std::abs(m.a().row(i).sum()) <= tol);
        for (Eigen::Index j = 0; j < 9; ++j) CHECK(m.a()(i, j) == doctest::Approx(a0(i, j) - m.row_means()[i]));
    }
    // Scale equivariance.
    const ScoreMatrix m3 = center_rows(3.0 * a0);
    CHECK((m3.a() - 3.0 * m.a()).cwiseAbs().maxCoeff() <= 1e-12 * 3 * a0.cwiseAbs().maxCoeff());

    CHECK(code_of([] { center_rows(mat({{1}})); }) == Errc::invalid_input);
    CHECK(code_of([] { center_rows(RowMatrix(2, 3)); }) == Errc::invalid_input);
    CHECK(code_of([] { center_rows(mat({{1, std::numeric_limits<double>::quiet_NaN()}, {0, 1}})); }) == Errc::invalid_input);
}

TEST_CASE("tilde_standardize") {
    RowMatrix add(5, 5);
    for (int i = 0; i < 5; ++i)
        for (int j = 0; j < 5; ++j) add(i, j) = 0.3 * i * i + std::sin(j);
    CHECK(tilde_standardize(add).cwiseAbs().maxCoeff() < 1e-12);

    const RowMatrix t = tilde_standardize(mat({{1, 0}, {0, 0}}));
    CHECK(t(0, 0) == doctest::Approx(0.25));
    CHECK(t(0, 1) == doctest::Approx(-0.25));
    CHECK(t(1, 0) == doctest::Approx(-0.25));
    CHECK(t(1, 1) == doctest::Approx(0.25));

    const RowMatrix a = tilde_standardize(random_matrix(6, 2));
    CHECK((tilde_standardize(a) - a).cwiseAbs().maxCoeff() < 1e-12);
    CHECK(a.rowwise().sum().cwiseAbs().maxCoeff() < 1e-12);
    CHECK(a.colwise().sum().cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("normalization modes") {
    const ScoreMatrix m = center_rows(mat({{1, 1}, {0, 1}}));
    CHECK(normalization(m, NormMode::canonical).s * normalization(m, NormMode::canonical).s == doctest::Approx(0.5));
    CHECK(normalization(m, NormMode::custom, 1.0).s == 1.0);
    CHECK(code_of([&] { normalization(m, NormMode::custom, 0.0); }) == Errc::non_positive);
    CHECK(code_of([&] { normalization(m, NormMode::custom, -2.0); }) == Errc::non_positive);

    const MatrixFamily add = parse_family("additive:6:3");
    const ScoreMatrix am = center_rows(add.dense());
    CHECK(code_of([&] { normalization(am, NormMode::tilde); }) == Errc::zero_matrix);
    CHECK(normalization(am, NormMode::canonical).s > 0.0);

    const ScoreMatrix z = center_rows(mat({{1, 1}, {2, 2}}));
    CHECK(code_of([&] { normalization(z, NormMode::canonical); }) == Errc::zero_matrix);
    CHECK(code_of([&] { normalization(z, NormMode::tilde); }) == Errc::zero_matrix);

    const RowMatrix a0 = random_matrix(7, 5);
    const ScoreMatrix r = center_rows(a0);
    const RowMatrix at = tilde_standardize(a0);
    CHECK(normalization(r, NormMode::tilde).s == doctest::Approx(std::sqrt(at.squaredNorm() / 6.0)));
    CHECK(normalization(r, NormMode::canonical).s == doctest::Approx(std::sqrt(r.a().squaredNorm() / 6.0)));
}

TEST_CASE("lyapounov ratio") {
    const ScoreMatrix m = center_rows(mat({{1, 1}, {0, 1}}));
    const Normalization s = normalization(m, NormMode::canonical);
    CHECK(lyapounov_ratio(m, s) == doctest::Approx(0.353553).epsilon(1e-5));

    const RowMatrix a0 = random_matrix(8, 9);
    const ScoreMatrix r = center_rows(a0);
    const ScoreMatrix r5 = center_rows(5.0 * a0);
    CHECK(lyapounov_ratio(r5, normalization(r5, NormMode::canonical)) ==
          doctest::Approx(lyapounov_ratio(r, normalization(r, NormMode::canonical))));

    // Lambda-tilde against a direct evaluation.
    const RowMatrix at = tilde_standardize(a0);
    const double st = std::sqrt(at.squaredNorm() / 7.0);
    const double direct = at.cwiseAbs().array().cube().sum() / (8.0 * st * st * st);
    const LyapounovRatios lr = lyapounov_ratios(r, normalization(r, NormMode::canonical));
    CHECK(lr.has_lambda_tilde);
    CHECK(lr.lambda_tilde == doctest::Approx(direct).epsilon(1e-12));

    const LyapounovRatios la = lyapounov_ratios(center_rows(parse_family("additive:6:1").dense()),
                                                Normalization{NormMode::custom, 1.0});
    CHECK_FALSE(la.has_lambda_tilde);
}

TEST_CASE("lyapounov scaling on the exceedance family") {
    for (std::size_t n : {100, 400}) {
        const ScoreMatrix m = exceedance_matrix(n);
        const double scaled = lyapounov_ratio(m, normalization(m, NormMode::canonical)) * std::sqrt(double(n));
        CHECK(scaled > 1.3);
        CHECK(scaled < 1.6);
        const StreamedSummary ss = streamed_summary(n, parse_family("exceedance:" + std::to_string(n)).rows);
        CHECK(ss.lambda_canonical * std::sqrt(double(n)) == doctest::Approx(scaled).epsilon(1e-12));
        CHECK(ss.s_canonical == doctest::Approx(normalization(m, NormMode::canonical).s).epsilon(1e-12));
    }
}

TEST_CASE("sigma matrix") {
    const ScoreMatrix m = center_rows(mat({{1, 1}, {0, 1}}));
    const SigmaMatrix s = sigma_matrix(m, normalization(m, NormMode::canonical));
    CHECK(s.sigma(0, 0) == doctest::Approx(0.0));
    CHECK(s.sigma(0, 1) == doctest::Approx(0.0));
    CHECK(s.sigma(1, 1) == doctest::Approx(0.5));

    // Orthogonal rows give a zero covariance.
    const ScoreMatrix o = center_rows(mat({{1, -1, 0, 0}, {1, 1, -1, -1}, {0, 0, 1, -1}, {2, 0, 0, 1}}));
    const SigmaMatrix so = sigma_matrix(o, normalization(o, NormMode::canonical));
    CHECK(std::abs(so.sigma(0, 1)) < 1e-15);
    CHECK(std::abs(so.sigma(0, 2)) < 1e-15);

    const RowMatrix a0 = random_matrix(12, 4);
    const ScoreMatrix r = center_rows(a0);
    const SigmaMatrix sr = sigma_matrix(r, normalization(r, NormMode::canonical));
    CHECK((sr.sigma - sr.sigma.transpose()).cwiseAbs().maxCoeff() == 0.0);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(Eigen::MatrixXd(sr.sigma));
    CHECK(es.eigenvalues().minCoeff() >= -1e-10 * es.eigenvalues().maxCoeff());

    const ScoreMatrix r2 = center_rows(-2.5 * a0);
    const SigmaMatrix sr2 = sigma_matrix(r2, normalization(r2, NormMode::canonical));
    CHECK((sr2.sigma - sr.sigma).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("sigma partial sums equal the scaled f_n - g_n") {
    for (std::uint64_t seed : {1, 2, 3}) {
        const std::size_t n = 10;
        const ScoreMatrix m = center_rows(random_matrix(n, seed));
        const Normalization s = normalization(m, NormMode::canonical);
        const SigmaMatrix sig = sigma_matrix(m, s);
        const EmpiricalFunctions fg = empirical_fn_gn(m, s);
        double scale = 0.0;
        for (std::size_t k = 0; k <= n; ++k) scale = std::max(scale, std::abs(fg.f[k]));
        for (std::size_t k = 0; k <= n; ++k) {
            for (std::size_t l = 0; l <= n; ++l) {
                const double partial = sig.sigma.topLeftCorner(k, l).sum();
                const double model = double(n) / double(n - 1) * (fg.f[std::min(k, l)] - fg.g(k, l));
                CHECK(std::abs(partial - model) <= 1e-10 * scale);
            }
        }
    }
}

TEST_CASE("empirical f_n and g_n") {
    const ScoreMatrix m = center_rows(random_matrix(15, 8));
    const Normalization s = normalization(m, NormMode::canonical);
    const EmpiricalFunctions fg = empirical_fn_gn(m, s);
    CHECK(fg.f[15] == doctest::Approx(14.0 / 15.0));
    CHECK(fg.f[0] == 0.0);
    for (std::size_t k = 0; k <= 15; ++k) CHECK(fg.g(0, k) == 0.0);
    for (std::size_t k = 1; k <= 15; ++k) CHECK(fg.f[k] >= fg.f[k - 1]);

    const ScoreMatrix e = exceedance_matrix(1000);
    const std::vector<double> t = {0.5};
    const EmpiricalFunctions fe = empirical_fn_gn(e, normalization(e, NormMode::canonical), t);
    CHECK(std::abs(fe.f[0] - 0.5) <= 5.0 / 1000);
}

TEST_CASE("build_path") {
    const ScoreMatrix m = center_rows(mat({{1, 1}, {0, 1}}));
    const Normalization s = normalization(m, NormMode::canonical);
    const std::vector<std::size_t> id = {0, 1};
    const StepPath y = build_path(m, s, id);
    CHECK(y.at(0.0) == 0.0);
    CHECK(y.at(0.7) == doctest::Approx(0.0));
    CHECK(y.at(1.0) == doctest::Approx(1.0 / std::sqrt(2.0)));

    const ScoreMatrix z = center_rows(mat({{1, 1}, {2, 2}}));
    const StepPath yz = build_path(z, Normalization{NormMode::custom, 1.0}, id);
    for (double v : yz.values) CHECK(v == 0.0);

    const std::vector<std::size_t> bad = {0, 0};
    CHECK(code_of([&] { build_path(m, s, bad); }) == Errc::invalid_permutation);
    const std::vector<std::size_t> short_perm = {0};
    CHECK(code_of([&] { build_path(m, s, short_perm); }) == Errc::invalid_permutation);
}

TEST_CASE("tilde variance of Y(1) is one by enumeration") {
    for (std::size_t n : {3, 5, 6}) {
        const RowMatrix a0 = random_matrix(n, 40 + n);
        const ScoreMatrix m = center_rows(a0);
        const Normalization st = normalization(m, NormMode::tilde);
        double s1 = 0, s2 = 0, count = 0;
        for_each_permutation(n, [&](std::span<const std::size_t> p) {
            const double y1 = build_path(m, st, p).at(1.0);
            s1 += y1;
            s2 += y1 * y1;
            ++count;
        });
        CHECK(std::abs(s1 / count) < 1e-12);
        CHECK(s2 / count == doctest::Approx(1.0).epsilon(1e-10));
    }
}

TEST_CASE("step path evaluation") {
    StepPath p(4, {0, 1, 2, 3, 4});
    CHECK(p.at(0.0) == 0);
    CHECK(p.at(0.25) == 1);
    CHECK(p.at(0.2499) == 0);
    CHECK(p.at(0.75) == 3);
    CHECK(p.at(0.3 * 0.25 / 0.3) == 1);  // rounding at a grid point
    CHECK(p.at(1.0) == 4);
    CHECK(code_of([&] { p.at(1.5); }) == Errc::range_error);
    CHECK(code_of([&] { p.at(-0.1); }) == Errc::range_error);
    CHECK(code_of([] { StepPath(3, {0, 1}); }) == Errc::invalid_input);
}

TEST_CASE("matrix parsing") {
    const RowMatrix a = parse_matrix_csv("1,2\n3,4\n");
    CHECK(a(1, 0) == 3.0);
    try {
        parse_matrix_csv("1,2\n3,x\n", "m.csv");
        FAIL("expected parse error");
    } catch (const Error& e) {
        CHECK(e.code() == Errc::parse_error);
        CHECK(std::string(e.what()).find("row 2") != std::string::npos);
        CHECK(std::string(e.what()).find("m.csv") != std::string::npos);
    }
    CHECK(code_of([] { parse_matrix_csv("1,2,3\n4,5,6\n"); }) == Errc::parse_error);
    const RowMatrix j = parse_matrix_json(R"({"n": 2, "a0": [[1, 0], [0, 2]]})");
    CHECK(j(1, 1) == 2.0);
    CHECK(code_of([] { parse_matrix_json(R"({"n": 3, "a0": [[1, 0], [0, 2]]})"); }) == Errc::parse_error);
    CHECK(code_of([] { parse_family("nope:3"); }) == Errc::parse_error);
    CHECK(code_of([] { parse_family("uniform:3"); }) == Errc::parse_error);

    const MatrixFamily b = parse_family("bernoulli:20:0.3:4");
    const RowMatrix bd = b.dense();
    for (Eigen::Index i = 0; i < bd.size(); ++i) CHECK((bd.data()[i] == 0.0 || bd.data()[i] == 1.0));
    CHECK((parse_family("uniform:10:3").dense() - parse_family("uniform:10:3").dense()).cwiseAbs().maxCoeff() == 0.0);
    const RowMatrix ex = parse_family("exceedance:4").dense();
    CHECK(ex(0, 3) == 1.0);
    CHECK(ex(3, 0) == 0.0);
}
