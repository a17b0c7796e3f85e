#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace permclt {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Zero-based permutation of {0, ..., n-1}: perm[i] is the image of i.
using Permutation = std::vector<std::size_t>;

void validate_permutation(std::span<const std::size_t> perm, std::size_t n);

// Raw scores a0 together with the row-centered matrix a(i,j) = a0(i,j) - mean_j a0(i,j).
class ScoreMatrix {
public:
    std::size_t n() const noexcept { return n_; }
    const RowMatrix& a0() const noexcept { return a0_; }
    const RowMatrix& a() const noexcept { return a_; }
    const std::vector<double>& row_means() const noexcept { return row_means_; }
    // Column means of the centered matrix a.
    const std::vector<double>& col_means() const noexcept { return col_means_; }
    double grand_mean() const noexcept { return grand_mean_; }

    double operator()(std::size_t i, std::size_t j) const noexcept { return a_(i, j); }

private:
    friend ScoreMatrix center_rows(const RowMatrix& a0);

    std::size_t n_ = 0;
    RowMatrix a0_;
    RowMatrix a_;
    std::vector<double> row_means_;
    std::vector<double> col_means_;
    double grand_mean_ = 0.0;
};

enum class NormMode { canonical, tilde, custom };

std::string_view to_string(NormMode mode) noexcept;
NormMode parse_norm_mode(std::string_view text);

struct Normalization {
    NormMode mode = NormMode::canonical;
    double s = 1.0;
};

// Symmetric, positive semidefinite covariance matrix of the increments W_i.
struct SigmaMatrix {
    std::size_t n = 0;
    RowMatrix sigma;
};

// Right-continuous step function on [0,1] with jumps only at k/n.
// values[k] is the value on [k/n, (k+1)/n) for k < n and values[n] is the value at t = 1.
struct StepPath {
    std::size_t n = 0;
    std::vector<double> values;

    StepPath() = default;
    explicit StepPath(std::size_t resolution) : n(resolution), values(resolution + 1, 0.0) {}
    StepPath(std::size_t resolution, std::vector<double> vals);

    double at(double t) const;
    std::size_t index_of(double t) const noexcept;
};

ScoreMatrix center_rows(const RowMatrix& a0);

// Doubly centered matrix a0(i,j) - a0(+,j) - a0(i,+) + a0(+,+).
RowMatrix tilde_standardize(const RowMatrix& a0);

Normalization normalization(const ScoreMatrix& m, NormMode mode, double custom_s = 0.0);

struct LyapounovRatios {
    double lambda = 0.0;
    // Only computed when the doubly centered matrix does not vanish.
    double lambda_tilde = 0.0;
    bool has_lambda_tilde = false;
};

// (n s^3)^-1 sum |a(i,j)|^3 for the supplied normalization.
double lyapounov_ratio(const ScoreMatrix& m, const Normalization& s);

// Both ratios: Lambda from (a, s) and Lambda-tilde from (a-tilde, s-tilde).
LyapounovRatios lyapounov_ratios(const ScoreMatrix& m, const Normalization& s);

SigmaMatrix sigma_matrix(const ScoreMatrix& m, const Normalization& s);

struct EmpiricalFunctions {
    std::vector<double> times;  // evaluation times
    std::vector<double> f;      // f_n(times[k])
    RowMatrix g;                // g_n(times[k], times[l])
};

// f_n and g_n on the full grid k/n, k = 0..n.
EmpiricalFunctions empirical_fn_gn(const ScoreMatrix& m, const Normalization& s);
// f_n and g_n at arbitrary times in [0,1].
EmpiricalFunctions empirical_fn_gn(const ScoreMatrix& m, const Normalization& s,
                                   std::span<const double> times);

// Y(t) = s^-1 sum_{i <= floor(nt)} a(i, perm(i)).
StepPath build_path(const ScoreMatrix& m, const Normalization& s, std::span<const std::size_t> perm);

// Row-wise access to a0 without materializing the matrix; used for families
// too large to store densely.
using RowGenerator = std::function<void(std::size_t row, std::span<double> out)>;

struct StreamedSummary {
    std::size_t n = 0;
    double sum_sq = 0.0;    // sum a(i,j)^2
    double sum_cube = 0.0;  // sum |a(i,j)|^3
    double s_canonical = 0.0;
    double lambda_canonical = 0.0;
};

StreamedSummary streamed_summary(std::size_t n, const RowGenerator& rows);

}  // namespace permclt
