#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "json.hpp"

#include "permclt/matrix_core.hpp"
#include "permclt/mc_engine.hpp"

namespace permclt {

// a0(i,j) = 1{i <= j}, centered to a(i,j) = 1{i <= j} - 1 + (i-1)/n (1-based).
ScoreMatrix exceedance_matrix(std::size_t n);

// mu(t) = t (1 - t/2).
double tableau_mu(double t) noexcept;

// Weak exceedances of one permutation. The permutation is 0-based, so the
// indicator at position i is perm[i] >= i.
struct ExceedanceRecord {
    std::size_t n = 0;
    Permutation perm;
    std::vector<std::uint8_t> indicators;
    std::vector<std::int64_t> s0;  // s0[k] = S_0(k/n), k = 0..n
    std::int64_t rows = 0;         // R_n = S_0(1)
    std::int64_t area = 0;         // direct double sum
    std::int64_t area_identity = 0;  // sum_i S_0(i/n) - S_0(1)^2/2 - S_0(1)/2

    // Y_hat(k/n) = n^{-1/2} (S_0(k/n) - n mu(k/n)) on the grid k/n.
    StepPath y_hat() const;
    StepPath s0_path() const;
};

ExceedanceRecord exceedance_record(std::span<const std::size_t> perm);

// Indicators, R_n and A_n only; no allocation beyond the caller's buffer.
struct ExceedanceCounts {
    std::int64_t rows = 0;
    std::int64_t area = 0;
};
ExceedanceCounts exceedance_counts(std::span<const std::size_t> perm);

struct Fraction {
    std::int64_t num = 0;
    std::int64_t den = 1;
    double value() const noexcept { return static_cast<double>(num) / static_cast<double>(den); }
};

// Closed-form moments for 1-based indices.
Fraction exact_mean_indicator(std::size_t n, std::size_t i);          // (n-i+1)/n
Fraction exact_joint_indicator(std::size_t n, std::size_t i, std::size_t j);  // i < j
Fraction exact_conditional_indicator(std::size_t n, std::size_t i, std::size_t j);
Fraction exact_mean_s0(std::size_t n, std::size_t k);                 // k(2n-k+1)/(2n)

struct ExactMoments {
    Fraction mean_i;
    Fraction joint_ij;
    Fraction conditional_i_given_j;
    Fraction mean_s0_k;
};

ExactMoments exact_moments(std::size_t n, std::size_t i, std::size_t j, std::size_t k);

// E R_n and Var R_n from the pairwise indicator moments.
double exact_mean_rows(std::size_t n);
double exact_var_rows(std::size_t n);
// E A_n from the indicator moments.
double exact_mean_area(std::size_t n);

// sigma_hat(t,u) = t^2 (1 - u + u^2/2)/2 - t^3/6 for t <= u, symmetric.
double limit_cov_hat(double t, double u);

struct BoundaryPolyline {
    std::size_t n = 0;
    std::vector<std::pair<std::int64_t, std::int64_t>> points;  // n + 1 lattice vertices
};

// Vertices (n - S_0(1) - l + S_0(l), S_0(l)), l = 0..n.
BoundaryPolyline boundary(const ExceedanceRecord& rec);

// Max over the vertices of n^{-1} Gamma_n of the distance to the arc
// x + y = 3/4 - (x - y)^2 measured along the coordinate axes.
double parabola_distance(const BoundaryPolyline& poly);

// scale * (int int sigma_hat - int sigma_hat(t,1) dt + sigma_hat(1,1)/4),
// integrated exactly monomial by monomial.
double area_limit_variance(double scale = 1.0);

// Y_hat for uniform random permutations.
class TableauPathSource final : public PathSource {
public:
    explicit TableauPathSource(std::size_t n);
    std::string name() const override { return "tableau"; }
    std::size_t resolution() const override { return n_; }
    StepPath draw(Rng& rng) const override;
    nlohmann::json describe() const override;

private:
    std::size_t n_;
};

}  // namespace permclt
