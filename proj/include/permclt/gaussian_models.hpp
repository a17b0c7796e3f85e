#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "permclt/matrix_core.hpp"
#include "permclt/rng.hpp"

namespace permclt {

// Symmetric factor L with cov ~= L L^T. Coordinates with exactly zero variance
// are excluded from the factorization and held at zero.
struct PsdFactor {
    Eigen::MatrixXd factor;
    std::string method;  // "cholesky", "cholesky+jitter" or "eigen-clip"
    double jitter = 0.0;
    double min_eigenvalue = 0.0;  // only set when eigenvalue clipping ran
    std::size_t zero_variance = 0;
};

// Tries a plain Cholesky, then diagonal jitter from 1e-12 to 1e-8 (relative to
// the mean diagonal), then eigenvalue clipping. Throws NotPSD when the most
// negative eigenvalue is below -1e-8 times the mean diagonal.
PsdFactor factorize_psd(const Eigen::MatrixXd& cov);

// Gaussian surrogate Z_n of the permutation process for one score matrix.
class PreLimitModel {
public:
    PreLimitModel(ScoreMatrix score, Normalization s);

    const ScoreMatrix& score() const noexcept { return score_; }
    const Normalization& norm() const noexcept { return norm_; }
    const SigmaMatrix& sigma() const noexcept { return sigma_; }
    std::size_t n() const noexcept { return score_.n(); }

    // W_i = sum_l a(i,l) (X_il - mean_i X_il) / (s sqrt(n-1)) from n^2 iid normals.
    std::vector<double> sample_increments(Rng& rng) const;

    StepPath sample(Rng& rng) const;

    struct Split {
        StepPath independent;  // Z_n^(1): independent increments
        StepPath common;       // Z_n^(2): driven by the column means of X
    };
    // Z_n = independent - common, both from the same normals.
    Split sample_split(Rng& rng) const;

private:
    ScoreMatrix score_;
    Normalization norm_;
    SigmaMatrix sigma_;
    double coef_;
};

// Z_n drawn from a symmetric factor of sigma: n normals and one triangular
// product per path instead of n^2 normals.
class FactorizedPreLimit {
public:
    explicit FactorizedPreLimit(const SigmaMatrix& sigma);

    std::size_t n() const noexcept { return n_; }
    const PsdFactor& factor() const noexcept { return factor_; }

    StepPath sample(Rng& rng) const;
    // One path per stream; equivalent to calling sample on each.
    std::vector<StepPath> sample_batch(std::span<Rng> streams) const;

private:
    std::size_t n_;
    PsdFactor factor_;
};

// Limit covariance sigma(t,u) = f(min(t,u)) - g(t,u), either in closed form or
// tabulated on a grid.
class LimitKernel {
public:
    using F = std::function<double(double)>;
    using G = std::function<double(double, double)>;

    // Validates f(0) = 0, f nondecreasing and g symmetric on a probe grid.
    static LimitKernel closed_form(F f, G g, std::string name = "custom");
    // values(k,l) = sigma(times[k], times[l]); symmetric and PSD up to regularization.
    static LimitKernel gridded(std::vector<double> times, Eigen::MatrixXd values, std::string name = "custom-grid");

    double operator()(double t, double u) const;
    bool has_closed_form() const noexcept { return static_cast<bool>(f_); }
    double f(double t) const;
    double g(double t, double u) const;
    const std::string& name() const noexcept { return name_; }

    Eigen::MatrixXd matrix(std::span<const double> times) const;

    std::optional<double> beta;
    std::optional<double> c_g;

private:
    std::string name_;
    F f_;
    G g_;
    std::vector<double> times_;
    Eigen::MatrixXd values_;
};

// f(t) = 3t^2 - 2t^3, g(t,u) = 3t^2 u - t^3 - 3/2 t^2 u^2 for t <= u.
LimitKernel tableau_kernel();
// Brownian bridge: f(t) = t, g(t,u) = tu.
LimitKernel bridge_kernel();
LimitKernel zero_kernel();
// "tableau", "bridge", "zero" or "custom-grid:file.csv" where the file holds a
// line of m times followed by m rows of kernel values.
LimitKernel parse_kernel(std::string_view spec);

// Zero-mean Gaussian vector with covariance kernel(t_i, t_j); the factor is
// computed once at construction.
class LimitSampler {
public:
    LimitSampler(const LimitKernel& kernel, std::vector<double> grid);

    const std::vector<double>& grid() const noexcept { return grid_; }
    const Eigen::MatrixXd& covariance() const noexcept { return cov_; }
    const PsdFactor& factor() const noexcept { return factor_; }

    std::vector<double> sample(Rng& rng) const;

private:
    std::vector<double> grid_;
    Eigen::MatrixXd cov_;
    PsdFactor factor_;
};

// Kiefer field on the nodes (j/mv, k/mw): K(v,w) = W(v,w) - v W(1,w) for a
// Brownian sheet W assembled from independent cell increments.
struct KieferField {
    std::size_t mv = 0;
    std::size_t mw = 0;
    RowMatrix values;  // (mv+1) x (mw+1)

    double at_node(std::size_t j, std::size_t k) const { return values(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(k)); }
};

KieferField sample_kiefer(std::size_t mv, std::size_t mw, Rng& rng);

// Kernel function alpha on [0,1]^2 generating a limit process through the
// Kiefer integral.
struct AlphaFamily {
    std::string name;
    std::function<double(double, double)> alpha;
    bool diagonal_jump = false;  // alpha is discontinuous across v = w
    double l2 = 0.0;             // ||alpha||_2 = sigma_a
    double sup = 0.0;            // ||alpha||_inf

    double sigma_a() const noexcept { return l2; }
    double alpha_plus() const noexcept { return sup / l2; }
};

// alpha(v,w) = 1{v <= w} - 1 + v with ||alpha||_2^2 = 1/6 and ||alpha||_inf = 1.
AlphaFamily tableau_alpha();
AlphaFamily constant_alpha(double c = 1.0);
// Norms by tensor midpoint quadrature on a cells x cells grid.
AlphaFamily make_alpha_family(std::string name, std::function<double(double, double)> alpha, bool diagonal_jump,
                              std::size_t cells = 512);

// ||eps_n||_2 = ||alpha_n - alpha||_2 / ||alpha||_2 with alpha_n(v,w) = a(ceil(nv), ceil(nw)),
// integrated with sub x sub midpoints per matrix cell.
double alpha_error_l2(const AlphaFamily& fam, const ScoreMatrix& m, std::size_t sub = 4);

// Z(t) = sigma_a^-1 int_{[0,t] x [0,1]} alpha dK on the grid k/m. Each axis is cut
// into m * refine cells; alpha is evaluated at cell midpoints, and cells on the
// diagonal are split into two triangles (evaluated at their centroids) when
// the family jumps there.
class KieferIntegralSampler {
public:
    KieferIntegralSampler(AlphaFamily fam, std::size_t m, std::size_t refine = 1);

    std::size_t m() const noexcept { return m_; }
    StepPath sample(Rng& rng) const;
    // Exact covariance of the discretized integral on the output grid.
    Eigen::MatrixXd discretized_covariance() const;

private:
    struct Piece {
        std::size_t vcell;
        std::size_t wcell;
        double sqrt_area;
        double drift;  // area / cell width in w
        double weight;  // alpha at the evaluation point / sigma_a
    };

    AlphaFamily fam_;
    std::size_t m_;
    std::size_t refine_;
    std::size_t cells_;
    std::vector<Piece> pieces_;  // grouped by w-cell
    std::vector<std::size_t> column_start_;
};

StepPath sample_limit_integral(const AlphaFamily& fam, std::size_t m, Rng& rng, std::size_t refine = 1);

struct FerniqueEstimate {
    double ratio_sup = 0.0;  // sup |g(t,t)+g(u,u)-2g(t,u)| / |u-t|^beta, i.e. C_g^2
    double c_g = 0.0;        // sqrt(ratio_sup); +inf when divergent
    bool divergent = false;
    std::vector<double> rung_ratios;  // max ratio per gap 2^-k
};

// Probes pairs (t, t + 2^-k), k = 1..rungs, for each base point t. Divergence is
// declared when the last four rung maxima increase strictly and grow by more
// than half.
FerniqueEstimate fernique_check(const std::function<double(double, double)>& g, double beta,
                                std::span<const double> base_points, int rungs = 16);
FerniqueEstimate fernique_check(const LimitKernel& kernel, double beta, std::span<const double> base_points,
                                int rungs = 16);

}  // namespace permclt
