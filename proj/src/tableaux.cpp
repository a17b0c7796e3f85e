#include "permclt/tableaux.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "permclt/error.hpp"

namespace permclt {

namespace {

Fraction reduce(std::int64_t num, std::int64_t den) {
    const std::int64_t g = std::gcd(num, den);
    if (g > 1) {
        num /= g;
        den /= g;
    }
    return {num, den};
}

void check_index(std::size_t n, std::size_t i) {
    if (n < 2) fail(Errc::invalid_input, "tableau moments need n >= 2");
    if (i < 1 || i > n) fail(Errc::range_error, "index " + std::to_string(i) + " outside 1.." + std::to_string(n));
}

// t^a u^b with coefficient c, for t <= u.
struct Monomial {
    double c;
    int a;
    int b;
};

constexpr Monomial kSigmaHat[] = {{0.5, 2, 0}, {-0.5, 2, 1}, {0.25, 2, 2}, {-1.0 / 6.0, 3, 0}};

}  // namespace

ScoreMatrix exceedance_matrix(std::size_t n) {
    if (n < 2) fail(Errc::invalid_input, "exceedance matrix needs n >= 2");
    RowMatrix a0(n, n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) a0(i, j) = i <= j ? 1.0 : 0.0;
    return center_rows(a0);
}

double tableau_mu(double t) noexcept { return t * (1.0 - 0.5 * t); }

StepPath ExceedanceRecord::s0_path() const {
    StepPath p(n);
    for (std::size_t k = 0; k <= n; ++k) p.values[k] = static_cast<double>(s0[k]);
    return p;
}

StepPath ExceedanceRecord::y_hat() const {
    StepPath p(n);
    const double dn = static_cast<double>(n);
    const double inv_root = 1.0 / std::sqrt(dn);
    for (std::size_t k = 0; k <= n; ++k) {
        p.values[k] = (static_cast<double>(s0[k]) - dn * tableau_mu(static_cast<double>(k) / dn)) * inv_root;
    }
    return p;
}

ExceedanceRecord exceedance_record(std::span<const std::size_t> perm) {
    validate_permutation(perm, perm.size());
    ExceedanceRecord rec;
    const std::size_t n = perm.size();
    rec.n = n;
    rec.perm.assign(perm.begin(), perm.end());
    rec.indicators.resize(n);
    rec.s0.assign(n + 1, 0);
    for (std::size_t i = 0; i < n; ++i) {
        rec.indicators[i] = perm[i] >= i ? 1 : 0;
        rec.s0[i + 1] = rec.s0[i] + rec.indicators[i];
    }
    rec.rows = rec.s0[n];
    // Direct double sum, using a suffix count of zeros.
    std::int64_t zeros_after = 0;
    for (std::size_t i = n; i-- > 0;) {
        if (rec.indicators[i]) rec.area += zeros_after;
        else ++zeros_after;
    }
    std::int64_t sum_s0 = 0;
    for (std::size_t i = 1; i <= n; ++i) sum_s0 += rec.s0[i];
    rec.area_identity = sum_s0 - (rec.rows * rec.rows + rec.rows) / 2;
    return rec;
}

ExceedanceCounts exceedance_counts(std::span<const std::size_t> perm) {
    ExceedanceCounts c;
    std::int64_t zeros_after = 0;
    for (std::size_t i = perm.size(); i-- > 0;) {
        if (perm[i] >= i) {
            ++c.rows;
            c.area += zeros_after;
        } else {
            ++zeros_after;
        }
    }
    return c;
}

Fraction exact_mean_indicator(std::size_t n, std::size_t i) {
    check_index(n, i);
    return reduce(static_cast<std::int64_t>(n - i + 1), static_cast<std::int64_t>(n));
}

Fraction exact_joint_indicator(std::size_t n, std::size_t i, std::size_t j) {
    check_index(n, i);
    check_index(n, j);
    if (i >= j) fail(Errc::index_order, "joint moment needs i < j");
    const auto ni = static_cast<std::int64_t>(n);
    return reduce((ni - static_cast<std::int64_t>(i)) * (ni - static_cast<std::int64_t>(j) + 1), (ni - 1) * ni);
}

Fraction exact_conditional_indicator(std::size_t n, std::size_t i, std::size_t j) {
    check_index(n, i);
    check_index(n, j);
    if (i >= j) fail(Errc::index_order, "conditional moment needs i < j");
    return reduce(static_cast<std::int64_t>(n - i), static_cast<std::int64_t>(n - 1));
}

Fraction exact_mean_s0(std::size_t n, std::size_t k) {
    if (n < 2) fail(Errc::invalid_input, "tableau moments need n >= 2");
    if (k > n) fail(Errc::range_error, "k must lie in 0..n");
    const auto nk = static_cast<std::int64_t>(k);
    const auto nn = static_cast<std::int64_t>(n);
    if (k == 0) return {0, 1};
    return reduce(nk * (2 * nn - nk + 1), 2 * nn);
}

ExactMoments exact_moments(std::size_t n, std::size_t i, std::size_t j, std::size_t k) {
    return {exact_mean_indicator(n, i), exact_joint_indicator(n, i, j), exact_conditional_indicator(n, i, j),
            exact_mean_s0(n, k)};
}

double exact_mean_rows(std::size_t n) {
    if (n < 2) fail(Errc::invalid_input, "tableau moments need n >= 2");
    return 0.5 * static_cast<double>(n + 1);
}

double exact_var_rows(std::size_t n) {
    if (n < 2) fail(Errc::invalid_input, "tableau moments need n >= 2");
    const double dn = static_cast<double>(n);
    double var = 0.0;
    for (std::size_t i = 1; i <= n; ++i) {
        const double pi = (dn - static_cast<double>(i) + 1.0) / dn;
        var += pi * (1.0 - pi);
        for (std::size_t j = i + 1; j <= n; ++j) {
            const double pj = (dn - static_cast<double>(j) + 1.0) / dn;
            const double pij = (dn - static_cast<double>(i)) * (dn - static_cast<double>(j) + 1.0) / ((dn - 1.0) * dn);
            var += 2.0 * (pij - pi * pj);
        }
    }
    return var;
}

double exact_mean_area(std::size_t n) {
    if (n < 2) fail(Errc::invalid_input, "tableau moments need n >= 2");
    const double dn = static_cast<double>(n);
    double mean = 0.0;
    for (std::size_t i = 1; i <= n; ++i) {
        const double pi = (dn - static_cast<double>(i) + 1.0) / dn;
        for (std::size_t j = i + 1; j <= n; ++j) {
            mean += pi - (dn - static_cast<double>(i)) * (dn - static_cast<double>(j) + 1.0) / ((dn - 1.0) * dn);
        }
    }
    return mean;
}

double limit_cov_hat(double t, double u) {
    if (!(t >= 0.0 && t <= 1.0 && u >= 0.0 && u <= 1.0)) fail(Errc::range_error, "sigma_hat arguments must lie in [0,1]");
    if (t > u) std::swap(t, u);
    return 0.5 * t * t * (1.0 - u + 0.5 * u * u) - t * t * t / 6.0;
}

BoundaryPolyline boundary(const ExceedanceRecord& rec) {
    BoundaryPolyline poly;
    poly.n = rec.n;
    poly.points.reserve(rec.n + 1);
    const auto n = static_cast<std::int64_t>(rec.n);
    for (std::size_t l = 0; l <= rec.n; ++l) {
        const std::int64_t s = rec.s0[l];
        poly.points.emplace_back(n - rec.rows - static_cast<std::int64_t>(l) + s, s);
    }
    return poly;
}

double parabola_distance(const BoundaryPolyline& poly) {
    if (poly.n == 0) fail(Errc::invalid_input, "empty boundary");
    const double dn = static_cast<double>(poly.n);
    // x on the arc as a function of y in [0, 1/2]; the arc is symmetric in x and y.
    auto other = [](double c) { return c + 0.5 * (-1.0 + std::sqrt(4.0 - 8.0 * c)); };
    double worst = 0.0;
    for (const auto& [xi, yi] : poly.points) {
        const double x = static_cast<double>(xi) / dn;
        const double y = static_cast<double>(yi) / dn;
        double d = std::numeric_limits<double>::infinity();
        if (y >= 0.0 && y <= 0.5) d = std::min(d, std::abs(x - other(y)));
        if (x >= 0.0 && x <= 0.5) d = std::min(d, std::abs(y - other(x)));
        if (!std::isfinite(d)) {
            d = std::min(std::hypot(x - 0.5, y), std::hypot(x, y - 0.5));
        }
        worst = std::max(worst, d);
    }
    return worst;
}

double area_limit_variance(double scale) {
    double square = 0.0;  // 2 * int_0^1 int_t^1 t^a u^b du dt
    double edge = 0.0;    // int_0^1 sigma_hat(t,1) dt
    double corner = 0.0;  // sigma_hat(1,1)
    for (const Monomial& m : kSigmaHat) {
        square += 2.0 * m.c * (1.0 / (m.a + 1) - 1.0 / (m.a + m.b + 2)) / (m.b + 1);
        edge += m.c / (m.a + 1);
        corner += m.c;
    }
    return scale * (square - edge + 0.25 * corner);
}

TableauPathSource::TableauPathSource(std::size_t n) : n_(n) {
    if (n < 2) fail(Errc::invalid_input, "tableau source needs n >= 2");
}

StepPath TableauPathSource::draw(Rng& rng) const {
    thread_local Permutation perm;
    perm.resize(n_);
    random_permutation(rng, perm);
    StepPath p(n_);
    const double dn = static_cast<double>(n_);
    const double inv_root = 1.0 / std::sqrt(dn);
    std::int64_t s = 0;
    for (std::size_t k = 1; k <= n_; ++k) {
        if (perm[k - 1] >= k - 1) ++s;
        p.values[k] = (static_cast<double>(s) - dn * tableau_mu(static_cast<double>(k) / dn)) * inv_root;
    }
    return p;
}

nlohmann::json TableauPathSource::describe() const { return {{"source", "tableau"}, {"n", n_}}; }

}  // namespace permclt
