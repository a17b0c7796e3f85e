#include "permclt/matrix_core.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "permclt/error.hpp"
#include "permclt/numerics.hpp"

namespace permclt {

namespace {

void validate_square_finite(const RowMatrix& a0) {
    if (a0.rows() != a0.cols()) {
        fail(Errc::invalid_input, "score matrix must be square, got " + std::to_string(a0.rows()) + "x" +
                                      std::to_string(a0.cols()));
    }
    if (a0.rows() < 2) fail(Errc::invalid_input, "score matrix needs n >= 2");
    if (!a0.allFinite()) fail(Errc::invalid_input, "score matrix has non-finite entries");
}

// Entries below this are indistinguishable from centering round-off.
double zero_threshold(const RowMatrix& a0) {
    const double scale = a0.cwiseAbs().maxCoeff();
    return 1e-12 * static_cast<double>(a0.rows()) * scale;
}

double sum_squares(const RowMatrix& x) {
    CompensatedSum acc;
    for (Eigen::Index i = 0; i < x.rows(); ++i)
        for (Eigen::Index j = 0; j < x.cols(); ++j) acc.add(x(i, j) * x(i, j));
    return acc.value();
}

double sum_abs_cubes(const RowMatrix& x) {
    CompensatedSum acc;
    for (Eigen::Index i = 0; i < x.rows(); ++i)
        for (Eigen::Index j = 0; j < x.cols(); ++j) {
            const double v = std::abs(x(i, j));
            acc.add(v * v * v);
        }
    return acc.value();
}

bool negligible(const RowMatrix& x, const RowMatrix& a0) {
    return x.cwiseAbs().maxCoeff() <= zero_threshold(a0);
}

}  // namespace

void validate_permutation(std::span<const std::size_t> perm, std::size_t n) {
    if (perm.size() != n) {
        fail(Errc::invalid_permutation,
             "permutation has length " + std::to_string(perm.size()) + ", expected " + std::to_string(n));
    }
    std::vector<char> seen(n, 0);
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t v = perm[i];
        if (v >= n || seen[v]) {
            fail(Errc::invalid_permutation, "not a bijection: value " + std::to_string(v) + " at position " +
                                                std::to_string(i));
        }
        seen[v] = 1;
    }
}

std::string_view to_string(NormMode mode) noexcept {
    switch (mode) {
        case NormMode::canonical: return "canonical";
        case NormMode::tilde: return "tilde";
        case NormMode::custom: return "custom";
    }
    return "canonical";
}

NormMode parse_norm_mode(std::string_view text) {
    if (text == "canonical") return NormMode::canonical;
    if (text == "tilde") return NormMode::tilde;
    if (text == "custom") return NormMode::custom;
    fail(Errc::parse_error, "unknown normalization mode '" + std::string(text) + "'");
}

StepPath::StepPath(std::size_t resolution, std::vector<double> vals) : n(resolution), values(std::move(vals)) {
    if (values.size() != n + 1) {
        fail(Errc::invalid_input, "step path on grid " + std::to_string(n) + " needs " + std::to_string(n + 1) +
                                      " values, got " + std::to_string(values.size()));
    }
}

std::size_t StepPath::index_of(double t) const noexcept {
    if (!(t > 0.0)) return 0;
    if (t >= 1.0) return n;
    // Nudge so that t = k/n lands on k despite rounding in the caller's t.
    const double scaled = t * static_cast<double>(n) * (1.0 + 1e-14);
    return std::min(n, static_cast<std::size_t>(std::floor(scaled)));
}

double StepPath::at(double t) const {
    if (t < 0.0 || t > 1.0) fail(Errc::range_error, "path evaluated outside [0,1]");
    return values[index_of(t)];
}

ScoreMatrix center_rows(const RowMatrix& a0) {
    validate_square_finite(a0);
    ScoreMatrix m;
    m.n_ = static_cast<std::size_t>(a0.rows());
    m.a0_ = a0;
    m.a_ = a0;
    m.row_means_.assign(m.n_, 0.0);
    m.col_means_.assign(m.n_, 0.0);
    const double inv_n = 1.0 / static_cast<double>(m.n_);
    CompensatedSum grand;
    for (std::size_t i = 0; i < m.n_; ++i) {
        CompensatedSum row;
        for (std::size_t j = 0; j < m.n_; ++j) row.add(a0(i, j));
        m.row_means_[i] = row.value() * inv_n;
        grand.add(row.value());
        for (std::size_t j = 0; j < m.n_; ++j) m.a_(i, j) = a0(i, j) - m.row_means_[i];
    }
    m.grand_mean_ = grand.value() * inv_n * inv_n;
    for (std::size_t j = 0; j < m.n_; ++j) {
        CompensatedSum col;
        for (std::size_t i = 0; i < m.n_; ++i) col.add(m.a_(i, j));
        m.col_means_[j] = col.value() * inv_n;
    }
    return m;
}

RowMatrix tilde_standardize(const RowMatrix& a0) {
    validate_square_finite(a0);
    const auto n = a0.rows();
    const Eigen::VectorXd row_mean = a0.rowwise().mean();
    const Eigen::RowVectorXd col_mean = a0.colwise().mean();
    const double grand = a0.mean();
    RowMatrix out(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < n; ++j) out(i, j) = a0(i, j) - col_mean(j) - row_mean(i) + grand;
    return out;
}

Normalization normalization(const ScoreMatrix& m, NormMode mode, double custom_s) {
    const double denom = static_cast<double>(m.n() - 1);
    switch (mode) {
        case NormMode::canonical: {
            if (negligible(m.a(), m.a0())) {
                fail(Errc::zero_matrix, "centered matrix vanishes; canonical s(a) is undefined");
            }
            return {mode, std::sqrt(sum_squares(m.a()) / denom)};
        }
        case NormMode::tilde: {
            const RowMatrix at = tilde_standardize(m.a0());
            if (negligible(at, m.a0())) {
                fail(Errc::zero_matrix, "doubly centered matrix vanishes; tilde s(a) is undefined");
            }
            return {mode, std::sqrt(sum_squares(at) / denom)};
        }
        case NormMode::custom:
            if (!(custom_s > 0.0) || !std::isfinite(custom_s)) {
                fail(Errc::non_positive, "custom normalization must be positive, got " + std::to_string(custom_s));
            }
            return {mode, custom_s};
    }
    fail(Errc::invalid_input, "unknown normalization mode");
}

double lyapounov_ratio(const ScoreMatrix& m, const Normalization& s) {
    if (!(s.s > 0.0)) fail(Errc::non_positive, "normalization must be positive");
    return sum_abs_cubes(m.a()) / (static_cast<double>(m.n()) * s.s * s.s * s.s);
}

LyapounovRatios lyapounov_ratios(const ScoreMatrix& m, const Normalization& s) {
    LyapounovRatios out;
    out.lambda = lyapounov_ratio(m, s);
    const RowMatrix at = tilde_standardize(m.a0());
    if (!negligible(at, m.a0())) {
        const double st = std::sqrt(sum_squares(at) / static_cast<double>(m.n() - 1));
        out.lambda_tilde = sum_abs_cubes(at) / (static_cast<double>(m.n()) * st * st * st);
        out.has_lambda_tilde = true;
    }
    return out;
}

SigmaMatrix sigma_matrix(const ScoreMatrix& m, const Normalization& s) {
    if (!(s.s > 0.0)) fail(Errc::non_positive, "normalization must be positive");
    const std::size_t n = m.n();
    const double nd = static_cast<double>(n);
    const double s2 = s.s * s.s;
    SigmaMatrix out{n, RowMatrix(n, n)};
    const RowMatrix& a = m.a();
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i; j < n; ++j) {
            CompensatedSum dot;
            for (std::size_t l = 0; l < n; ++l) dot.add(a(i, l) * a(j, l));
            const double v = (i == j) ? dot.value() / (nd * s2) : -dot.value() / (nd * (nd - 1.0) * s2);
            out.sigma(i, j) = v;
            out.sigma(j, i) = v;
        }
    }
    return out;
}

namespace {

// Column partial sums C(k, l) = sum_{i < k} a(i, l) for the requested row counts k.
RowMatrix column_partial_sums(const ScoreMatrix& m, std::span<const std::size_t> counts) {
    const std::size_t n = m.n();
    RowMatrix out(static_cast<Eigen::Index>(counts.size()), static_cast<Eigen::Index>(n));
    std::vector<std::size_t> order(counts.size());
    for (std::size_t k = 0; k < counts.size(); ++k) order[k] = k;
    std::sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) { return counts[x] < counts[y]; });
    std::vector<CompensatedSum> running(n);
    std::size_t rows_done = 0;
    for (std::size_t idx : order) {
        for (; rows_done < counts[idx]; ++rows_done)
            for (std::size_t l = 0; l < n; ++l) running[l].add(m.a()(rows_done, l));
        for (std::size_t l = 0; l < n; ++l) out(static_cast<Eigen::Index>(idx), static_cast<Eigen::Index>(l)) = running[l].value();
    }
    return out;
}

}  // namespace

EmpiricalFunctions empirical_fn_gn(const ScoreMatrix& m, const Normalization& s, std::span<const double> times) {
    if (!(s.s > 0.0)) fail(Errc::non_positive, "normalization must be positive");
    const std::size_t n = m.n();
    const double nd = static_cast<double>(n);
    StepPath probe(n);
    std::vector<std::size_t> counts(times.size());
    for (std::size_t k = 0; k < times.size(); ++k) {
        if (times[k] < 0.0 || times[k] > 1.0) fail(Errc::range_error, "evaluation time outside [0,1]");
        counts[k] = probe.index_of(times[k]);
    }

    std::vector<double> row_sq(n + 1, 0.0);  // cumulative sum of squared rows
    {
        CompensatedSum acc;
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t l = 0; l < n; ++l) acc.add(m.a()(i, l) * m.a()(i, l));
            row_sq[i + 1] = acc.value();
        }
    }

    EmpiricalFunctions out;
    out.times.assign(times.begin(), times.end());
    out.f.resize(times.size());
    for (std::size_t k = 0; k < times.size(); ++k) out.f[k] = row_sq[counts[k]] / (nd * s.s * s.s);

    const RowMatrix partial = column_partial_sums(m, counts);
    out.g = (partial * partial.transpose()) / (nd * s.s * nd * s.s);
    return out;
}

EmpiricalFunctions empirical_fn_gn(const ScoreMatrix& m, const Normalization& s) {
    const std::vector<double> grid = uniform_grid(m.n());
    return empirical_fn_gn(m, s, grid);
}

StepPath build_path(const ScoreMatrix& m, const Normalization& s, std::span<const std::size_t> perm) {
    if (!(s.s > 0.0)) fail(Errc::non_positive, "normalization must be positive");
    const std::size_t n = m.n();
    validate_permutation(perm, n);
    StepPath path(n);
    double acc = 0.0;
    const double inv_s = 1.0 / s.s;
    for (std::size_t i = 0; i < n; ++i) {
        acc += m.a()(i, perm[i]);
        path.values[i + 1] = acc * inv_s;
    }
    return path;
}

StreamedSummary streamed_summary(std::size_t n, const RowGenerator& rows) {
    if (n < 2) fail(Errc::invalid_input, "score matrix needs n >= 2");
    std::vector<double> row(n);
    CompensatedSum sq, cube;
    for (std::size_t i = 0; i < n; ++i) {
        rows(i, row);
        CompensatedSum mean;
        for (double v : row) {
            if (!std::isfinite(v)) fail(Errc::invalid_input, "row " + std::to_string(i) + " has non-finite entries");
            mean.add(v);
        }
        const double mu = mean.value() / static_cast<double>(n);
        for (double v : row) {
            const double c = v - mu;
            sq.add(c * c);
            cube.add(std::abs(c) * c * c);
        }
    }
    StreamedSummary out;
    out.n = n;
    out.sum_sq = sq.value();
    out.sum_cube = cube.value();
    if (!(out.sum_sq > 0.0)) fail(Errc::zero_matrix, "centered matrix vanishes; canonical s(a) is undefined");
    out.s_canonical = std::sqrt(out.sum_sq / static_cast<double>(n - 1));
    out.lambda_canonical = out.sum_cube / (static_cast<double>(n) * std::pow(out.s_canonical, 3));
    return out;
}

}  // namespace permclt
