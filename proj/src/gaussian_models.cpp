#include "permclt/gaussian_models.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "permclt/error.hpp"
#include "permclt/matrix_io.hpp"
#include "permclt/numerics.hpp"

namespace permclt {

// ---------------------------------------------------------------------------
// PSD factorization

PsdFactor factorize_psd(const Eigen::MatrixXd& cov) {
    if (cov.rows() != cov.cols()) fail(Errc::invalid_input, "covariance matrix must be square");
    const Eigen::Index n = cov.rows();
    PsdFactor out;
    out.factor = Eigen::MatrixXd::Zero(n, n);

    std::vector<Eigen::Index> active;
    for (Eigen::Index i = 0; i < n; ++i) {
        if (cov(i, i) != 0.0) active.push_back(i);
    }
    out.zero_variance = static_cast<std::size_t>(n) - active.size();
    if (active.empty()) {
        out.method = "cholesky";
        return out;
    }
    const auto k = static_cast<Eigen::Index>(active.size());
    Eigen::MatrixXd sub(k, k);
    for (Eigen::Index a = 0; a < k; ++a)
        for (Eigen::Index b = 0; b < k; ++b) sub(a, b) = cov(active[a], active[b]);
    const double scale = sub.diagonal().mean();
    if (!(scale > 0.0)) fail(Errc::not_psd, "covariance has non-positive diagonal");

    auto embed = [&](const Eigen::MatrixXd& lsub) {
        for (Eigen::Index a = 0; a < k; ++a)
            for (Eigen::Index b = 0; b < lsub.cols(); ++b) out.factor(active[a], active[b]) = lsub(a, b);
    };

    Eigen::LLT<Eigen::MatrixXd> llt(sub);
    if (llt.info() == Eigen::Success) {
        out.method = "cholesky";
        embed(llt.matrixL());
        return out;
    }
    for (double rel = 1e-12; rel <= 1e-8 * 1.0001; rel *= 10.0) {
        Eigen::MatrixXd jittered = sub;
        jittered.diagonal().array() += rel * scale;
        llt.compute(jittered);
        if (llt.info() == Eigen::Success) {
            out.method = "cholesky+jitter";
            out.jitter = rel * scale;
            embed(llt.matrixL());
            return out;
        }
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(sub);
    if (eig.info() != Eigen::Success) fail(Errc::not_psd, "eigendecomposition failed");
    out.min_eigenvalue = eig.eigenvalues().minCoeff();
    if (out.min_eigenvalue < -1e-8 * scale) {
        fail(Errc::not_psd, "covariance is not positive semidefinite: eigenvalue " +
                                std::to_string(out.min_eigenvalue) + " at diagonal scale " + std::to_string(scale));
    }
    const Eigen::VectorXd root = eig.eigenvalues().cwiseMax(0.0).cwiseSqrt();
    out.method = "eigen-clip";
    embed(eig.eigenvectors() * root.asDiagonal());
    return out;
}

// ---------------------------------------------------------------------------
// Pre-limit process

PreLimitModel::PreLimitModel(ScoreMatrix score, Normalization s)
    : score_(std::move(score)), norm_(s), sigma_(sigma_matrix(score_, norm_)) {
    coef_ = 1.0 / (norm_.s * std::sqrt(static_cast<double>(score_.n() - 1)));
}

namespace {

StepPath cumulative_path(std::span<const double> increments) {
    StepPath path(increments.size());
    double acc = 0.0;
    for (std::size_t i = 0; i < increments.size(); ++i) {
        acc += increments[i];
        path.values[i + 1] = acc;
    }
    return path;
}

}  // namespace

std::vector<double> PreLimitModel::sample_increments(Rng& rng) const {
    const std::size_t n = score_.n();
    std::vector<double> w(n, 0.0);
    std::vector<double> x(n);
    const RowMatrix& a = score_.a();
    for (std::size_t l = 0; l < n; ++l) {
        rng.fill_normal(x);
        double mean = 0.0;
        for (double v : x) mean += v;
        mean /= static_cast<double>(n);
        for (std::size_t i = 0; i < n; ++i) w[i] += coef_ * a(i, l) * (x[i] - mean);
    }
    return w;
}

StepPath PreLimitModel::sample(Rng& rng) const {
    const std::vector<double> w = sample_increments(rng);
    return cumulative_path(w);
}

PreLimitModel::Split PreLimitModel::sample_split(Rng& rng) const {
    const std::size_t n = score_.n();
    std::vector<double> first(n, 0.0), second(n, 0.0), x(n);
    const RowMatrix& a = score_.a();
    for (std::size_t l = 0; l < n; ++l) {
        rng.fill_normal(x);
        double mean = 0.0;
        for (double v : x) mean += v;
        mean /= static_cast<double>(n);
        for (std::size_t i = 0; i < n; ++i) {
            first[i] += coef_ * a(i, l) * x[i];
            second[i] += coef_ * a(i, l) * mean;
        }
    }
    return {cumulative_path(first), cumulative_path(second)};
}

FactorizedPreLimit::FactorizedPreLimit(const SigmaMatrix& sigma)
    : n_(sigma.n), factor_(factorize_psd(sigma.sigma)) {}

StepPath FactorizedPreLimit::sample(Rng& rng) const {
    Eigen::VectorXd xi(static_cast<Eigen::Index>(n_));
    for (Eigen::Index i = 0; i < xi.size(); ++i) xi(i) = rng.normal();
    const Eigen::VectorXd w = factor_.factor * xi;
    return cumulative_path(std::span<const double>(w.data(), n_));
}

std::vector<StepPath> FactorizedPreLimit::sample_batch(std::span<Rng> streams) const {
    const auto n = static_cast<Eigen::Index>(n_);
    const auto b = static_cast<Eigen::Index>(streams.size());
    Eigen::MatrixXd xi(n, b);
    for (Eigen::Index c = 0; c < b; ++c) {
        Rng& rng = streams[static_cast<std::size_t>(c)];
        for (Eigen::Index i = 0; i < n; ++i) xi(i, c) = rng.normal();
    }
    Eigen::MatrixXd w(n, b);
    if (factor_.method == "eigen-clip") {
        w.noalias() = factor_.factor * xi;
    } else {
        w.noalias() = factor_.factor.triangularView<Eigen::Lower>() * xi;
    }
    std::vector<StepPath> out;
    out.reserve(streams.size());
    for (Eigen::Index c = 0; c < b; ++c) out.push_back(cumulative_path(std::span<const double>(w.col(c).data(), n_)));
    return out;
}

// ---------------------------------------------------------------------------
// Limit kernels

LimitKernel LimitKernel::closed_form(F f, G g, std::string name) {
    const std::vector<double> probe = uniform_grid(16);
    if (std::abs(f(0.0)) > 1e-12) fail(Errc::invalid_input, "kernel f must vanish at 0");
    for (std::size_t k = 1; k < probe.size(); ++k) {
        if (f(probe[k]) < f(probe[k - 1]) - 1e-12) fail(Errc::invalid_input, "kernel f must be nondecreasing");
    }
    for (double t : probe)
        for (double u : probe) {
            if (std::abs(g(t, u) - g(u, t)) > 1e-10) {
                fail(Errc::symmetry_violation, "kernel g is not symmetric at (" + std::to_string(t) + ", " +
                                                   std::to_string(u) + ")");
            }
        }
    LimitKernel k;
    k.name_ = std::move(name);
    k.f_ = std::move(f);
    k.g_ = std::move(g);
    return k;
}

LimitKernel LimitKernel::gridded(std::vector<double> times, Eigen::MatrixXd values, std::string name) {
    const auto m = static_cast<Eigen::Index>(times.size());
    if (m < 1 || values.rows() != m || values.cols() != m) {
        fail(Errc::invalid_input, "gridded kernel needs an m x m table for m times");
    }
    for (Eigen::Index k = 0; k < m; ++k) {
        if (times[static_cast<std::size_t>(k)] < 0.0 || times[static_cast<std::size_t>(k)] > 1.0) {
            fail(Errc::range_error, "kernel grid times must lie in [0,1]");
        }
        if (k > 0 && !(times[static_cast<std::size_t>(k)] > times[static_cast<std::size_t>(k - 1)])) {
            fail(Errc::invalid_input, "kernel grid times must be strictly increasing");
        }
    }
    const double scale = std::max(values.cwiseAbs().maxCoeff(), 1e-300);
    if ((values - values.transpose()).cwiseAbs().maxCoeff() > 1e-10 * scale) {
        fail(Errc::symmetry_violation, "gridded kernel is not symmetric");
    }
    (void)factorize_psd(values);
    LimitKernel k;
    k.name_ = std::move(name);
    k.times_ = std::move(times);
    k.values_ = std::move(values);
    return k;
}

double LimitKernel::f(double t) const {
    if (!f_) fail(Errc::invalid_input, "kernel '" + name_ + "' has no closed-form f");
    return f_(t);
}

double LimitKernel::g(double t, double u) const {
    if (!g_) fail(Errc::invalid_input, "kernel '" + name_ + "' has no closed-form g");
    return g_(t, u);
}

double LimitKernel::operator()(double t, double u) const {
    if (f_) return f_(std::min(t, u)) - g_(t, u);
    // Bilinear interpolation in the tabulated times, clamped at the ends.
    auto locate = [&](double x, std::size_t& lo, double& w) {
        const std::size_t m = times_.size();
        if (m == 1 || x <= times_.front()) {
            lo = 0;
            w = 0.0;
            return;
        }
        if (x >= times_.back()) {
            lo = m - 2;
            w = 1.0;
            return;
        }
        const auto it = std::upper_bound(times_.begin(), times_.end(), x);
        lo = static_cast<std::size_t>(it - times_.begin()) - 1;
        w = (x - times_[lo]) / (times_[lo + 1] - times_[lo]);
    };
    std::size_t i = 0, j = 0;
    double wi = 0.0, wj = 0.0;
    locate(t, i, wi);
    locate(u, j, wj);
    if (times_.size() == 1) return values_(0, 0);
    auto v = [&](std::size_t a, std::size_t b) { return values_(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)); };
    return (1 - wi) * (1 - wj) * v(i, j) + wi * (1 - wj) * v(i + 1, j) + (1 - wi) * wj * v(i, j + 1) +
           wi * wj * v(i + 1, j + 1);
}

Eigen::MatrixXd LimitKernel::matrix(std::span<const double> times) const {
    const auto m = static_cast<Eigen::Index>(times.size());
    Eigen::MatrixXd out(m, m);
    for (Eigen::Index a = 0; a < m; ++a)
        for (Eigen::Index b = a; b < m; ++b) {
            const double v = (*this)(times[static_cast<std::size_t>(a)], times[static_cast<std::size_t>(b)]);
            out(a, b) = v;
            out(b, a) = v;
        }
    return out;
}

LimitKernel tableau_kernel() {
    auto f = [](double t) { return 3.0 * t * t - 2.0 * t * t * t; };
    auto g = [](double t, double u) {
        const double lo = std::min(t, u);
        const double hi = std::max(t, u);
        return 3.0 * lo * lo * hi - lo * lo * lo - 1.5 * lo * lo * hi * hi;
    };
    LimitKernel k = LimitKernel::closed_form(f, g, "tableau");
    k.beta = 2.0;
    return k;
}

LimitKernel bridge_kernel() {
    LimitKernel k = LimitKernel::closed_form([](double t) { return t; }, [](double t, double u) { return t * u; },
                                             "bridge");
    k.beta = 2.0;
    return k;
}

LimitKernel zero_kernel() {
    return LimitKernel::closed_form([](double) { return 0.0; }, [](double, double) { return 0.0; }, "zero");
}

LimitKernel parse_kernel(std::string_view spec) {
    if (spec == "tableau") return tableau_kernel();
    if (spec == "bridge") return bridge_kernel();
    if (spec == "zero") return zero_kernel();
    constexpr std::string_view prefix = "custom-grid:";
    if (spec.substr(0, prefix.size()) == prefix) {
        const std::string path(spec.substr(prefix.size()));
        std::ifstream in(path);
        if (!in) fail(Errc::io_error, "cannot open '" + path + "'");
        std::ostringstream ss;
        ss << in.rdbuf();
        const std::string text = ss.str();
        // First data line: the times; the rest: the square table.
        const std::size_t first_end = text.find('\n');
        if (first_end == std::string::npos) fail(Errc::parse_error, path + ": expected times line and table");
        const RowMatrix times_row = [&] {
            std::string line = text.substr(0, first_end);
            const std::size_t count = static_cast<std::size_t>(std::count(line.begin(), line.end(), ',')) + 1;
            RowMatrix t(1, static_cast<Eigen::Index>(count));
            std::stringstream ls(line);
            std::string field;
            for (Eigen::Index c = 0; std::getline(ls, field, ','); ++c) {
                try {
                    t(0, c) = std::stod(field);
                } catch (const std::exception&) {
                    fail(Errc::parse_error, path + ": row 1: cannot parse '" + field + "'");
                }
            }
            return t;
        }();
        const RowMatrix table = parse_matrix_csv(std::string_view(text).substr(first_end + 1), path);
        std::vector<double> times(times_row.data(), times_row.data() + times_row.size());
        return LimitKernel::gridded(std::move(times), Eigen::MatrixXd(table), std::string(spec));
    }
    fail(Errc::parse_error, "unknown kernel '" + std::string(spec) + "'");
}

LimitSampler::LimitSampler(const LimitKernel& kernel, std::vector<double> grid)
    : grid_(std::move(grid)), cov_(kernel.matrix(grid_)), factor_(factorize_psd(cov_)) {}

std::vector<double> LimitSampler::sample(Rng& rng) const {
    const auto m = static_cast<Eigen::Index>(grid_.size());
    Eigen::VectorXd xi(m);
    for (Eigen::Index i = 0; i < m; ++i) xi(i) = rng.normal();
    const Eigen::VectorXd z = factor_.factor * xi;
    return {z.data(), z.data() + m};
}

// ---------------------------------------------------------------------------
// Kiefer process

KieferField sample_kiefer(std::size_t mv, std::size_t mw, Rng& rng) {
    if (mv < 1 || mw < 1) fail(Errc::invalid_input, "Kiefer grid needs at least one cell per axis");
    KieferField field;
    field.mv = mv;
    field.mw = mw;
    field.values = RowMatrix::Zero(static_cast<Eigen::Index>(mv + 1), static_cast<Eigen::Index>(mw + 1));
    RowMatrix& w = field.values;
    const double sd = std::sqrt(1.0 / (static_cast<double>(mv) * static_cast<double>(mw)));
    for (Eigen::Index j = 1; j <= static_cast<Eigen::Index>(mv); ++j) {
        double column_run = 0.0;
        for (Eigen::Index k = 1; k <= static_cast<Eigen::Index>(mw); ++k) {
            column_run += sd * rng.normal();
            w(j, k) = w(j - 1, k) + column_run;
        }
    }
    const auto last = static_cast<Eigen::Index>(mv);
    for (Eigen::Index k = 1; k <= static_cast<Eigen::Index>(mw); ++k) {
        const double top = w(last, k);
        for (Eigen::Index j = 1; j <= last; ++j) w(j, k) -= (static_cast<double>(j) / static_cast<double>(mv)) * top;
        w(last, k) = 0.0;
    }
    return field;
}

// ---------------------------------------------------------------------------
// Alpha families and the Kiefer integral

AlphaFamily tableau_alpha() {
    AlphaFamily fam;
    fam.name = "tableau";
    fam.alpha = [](double v, double w) { return (v <= w ? 1.0 : 0.0) - 1.0 + v; };
    fam.diagonal_jump = true;
    fam.l2 = 1.0 / std::sqrt(6.0);
    fam.sup = 1.0;
    return fam;
}

AlphaFamily constant_alpha(double c) {
    if (c == 0.0) fail(Errc::zero_alpha, "alpha vanishes identically");
    AlphaFamily fam;
    fam.name = "constant";
    fam.alpha = [c](double, double) { return c; };
    fam.l2 = std::abs(c);
    fam.sup = std::abs(c);
    return fam;
}

AlphaFamily make_alpha_family(std::string name, std::function<double(double, double)> alpha, bool diagonal_jump,
                              std::size_t cells) {
    if (cells < 1) fail(Errc::invalid_input, "quadrature needs at least one cell");
    const double h = 1.0 / static_cast<double>(cells);
    CompensatedSum sq;
    double sup = 0.0;
    for (std::size_t j = 0; j < cells; ++j)
        for (std::size_t k = 0; k < cells; ++k) {
            const double v = (static_cast<double>(j) + 0.5) * h;
            const double w = (static_cast<double>(k) + 0.5) * h;
            const double x = alpha(v, w);
            sq.add(x * x * h * h);
            sup = std::max(sup, std::abs(x));
        }
    AlphaFamily fam;
    fam.name = std::move(name);
    fam.alpha = std::move(alpha);
    fam.diagonal_jump = diagonal_jump;
    fam.l2 = std::sqrt(sq.value());
    fam.sup = sup;
    if (!(fam.l2 > 0.0)) fail(Errc::zero_alpha, "alpha vanishes on the quadrature grid");
    return fam;
}

double alpha_error_l2(const AlphaFamily& fam, const ScoreMatrix& m, std::size_t sub) {
    if (!(fam.l2 > 0.0)) fail(Errc::zero_alpha, "alpha has zero norm");
    const std::size_t n = m.n();
    const double cell = 1.0 / static_cast<double>(n);
    const double h = cell / static_cast<double>(sub);
    CompensatedSum acc;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            const double an = m(i, j);
            double local = 0.0;
            for (std::size_t p = 0; p < sub; ++p)
                for (std::size_t q = 0; q < sub; ++q) {
                    const double v = static_cast<double>(i) * cell + (static_cast<double>(p) + 0.5) * h;
                    const double w = static_cast<double>(j) * cell + (static_cast<double>(q) + 0.5) * h;
                    const double d = an - fam.alpha(v, w);
                    local += d * d;
                }
            acc.add(local * h * h);
        }
    return std::sqrt(acc.value()) / fam.l2;
}

KieferIntegralSampler::KieferIntegralSampler(AlphaFamily fam, std::size_t m, std::size_t refine)
    : fam_(std::move(fam)), m_(m), refine_(refine), cells_(m * refine) {
    if (m < 1 || refine < 1) fail(Errc::invalid_input, "integral grid needs m >= 1 and refine >= 1");
    if (!(fam_.l2 > 0.0)) fail(Errc::zero_alpha, "alpha has zero norm; sigma_a = 0");
    const double h = 1.0 / static_cast<double>(cells_);
    const double inv_sigma = 1.0 / fam_.l2;
    column_start_.reserve(cells_ + 1);
    for (std::size_t k = 0; k < cells_; ++k) {
        column_start_.push_back(pieces_.size());
        const double w0 = static_cast<double>(k) * h;
        for (std::size_t j = 0; j < cells_; ++j) {
            const double v0 = static_cast<double>(j) * h;
            if (fam_.diagonal_jump && j == k) {
                const double area = 0.5 * h * h;
                pieces_.push_back({j, k, std::sqrt(area), area / h,
                                   fam_.alpha(v0 + h / 3.0, w0 + 2.0 * h / 3.0) * inv_sigma});
                pieces_.push_back({j, k, std::sqrt(area), area / h,
                                   fam_.alpha(v0 + 2.0 * h / 3.0, w0 + h / 3.0) * inv_sigma});
            } else {
                pieces_.push_back({j, k, h, h, fam_.alpha(v0 + 0.5 * h, w0 + 0.5 * h) * inv_sigma});
            }
        }
    }
    column_start_.push_back(pieces_.size());
}

StepPath KieferIntegralSampler::sample(Rng& rng) const {
    std::vector<double> rows(cells_, 0.0);
    std::vector<double> dw;
    for (std::size_t k = 0; k < cells_; ++k) {
        const std::size_t begin = column_start_[k];
        const std::size_t end = column_start_[k + 1];
        dw.resize(end - begin);
        double column_total = 0.0;
        for (std::size_t p = begin; p < end; ++p) {
            const double x = pieces_[p].sqrt_area * rng.normal();
            dw[p - begin] = x;
            column_total += x;
        }
        for (std::size_t p = begin; p < end; ++p) {
            const Piece& pc = pieces_[p];
            rows[pc.vcell] += pc.weight * (dw[p - begin] - pc.drift * column_total);
        }
    }
    StepPath path(m_);
    double acc = 0.0;
    for (std::size_t j = 0; j < cells_; ++j) {
        acc += rows[j];
        if ((j + 1) % refine_ == 0) path.values[(j + 1) / refine_] = acc;
    }
    return path;
}

Eigen::MatrixXd KieferIntegralSampler::discretized_covariance() const {
    // Coefficients of every piece's normal in each v-row sum.
    const auto np = static_cast<Eigen::Index>(pieces_.size());
    Eigen::MatrixXd rows = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(cells_), np);
    for (std::size_t k = 0; k < cells_; ++k) {
        const std::size_t begin = column_start_[k];
        const std::size_t end = column_start_[k + 1];
        for (std::size_t q = begin; q < end; ++q) {
            const Piece& pq = pieces_[q];
            const auto r = static_cast<Eigen::Index>(pq.vcell);
            rows(r, static_cast<Eigen::Index>(q)) += pq.weight * pq.sqrt_area;
            for (std::size_t p = begin; p < end; ++p) {
                rows(r, static_cast<Eigen::Index>(p)) -= pq.weight * pq.drift * pieces_[p].sqrt_area;
            }
        }
    }
    Eigen::MatrixXd out_coef = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(m_ + 1), np);
    Eigen::RowVectorXd acc = Eigen::RowVectorXd::Zero(np);
    for (std::size_t j = 0; j < cells_; ++j) {
        acc += rows.row(static_cast<Eigen::Index>(j));
        if ((j + 1) % refine_ == 0) out_coef.row(static_cast<Eigen::Index>((j + 1) / refine_)) = acc;
    }
    return out_coef * out_coef.transpose();
}

StepPath sample_limit_integral(const AlphaFamily& fam, std::size_t m, Rng& rng, std::size_t refine) {
    return KieferIntegralSampler(fam, m, refine).sample(rng);
}

// ---------------------------------------------------------------------------
// Fernique-type regularity

FerniqueEstimate fernique_check(const std::function<double(double, double)>& g, double beta,
                                std::span<const double> base_points, int rungs) {
    if (!(beta > 0.0 && beta <= 2.0)) fail(Errc::range_error, "beta must lie in (0, 2]");
    if (rungs < 5) fail(Errc::invalid_input, "the probe ladder needs at least 5 rungs");
    FerniqueEstimate est;
    for (int k = 1; k <= rungs; ++k) {
        const double h = std::ldexp(1.0, -k);
        double best = 0.0;
        for (double t : base_points) {
            const double u = t + h;
            if (t < 0.0 || u > 1.0) continue;
            const double incr = std::abs(g(t, t) + g(u, u) - 2.0 * g(t, u));
            best = std::max(best, incr / std::pow(h, beta));
        }
        est.rung_ratios.push_back(best);
        est.ratio_sup = std::max(est.ratio_sup, best);
    }
    const auto& r = est.rung_ratios;
    const std::size_t last = r.size() - 1;
    bool increasing = true;
    for (std::size_t k = last - 3; k <= last; ++k) increasing = increasing && r[k] > r[k - 1];
    if (increasing && r[last] > 1.5 * r[last - 4]) {
        est.divergent = true;
        est.ratio_sup = std::numeric_limits<double>::infinity();
        est.c_g = std::numeric_limits<double>::infinity();
        return est;
    }
    est.c_g = std::sqrt(est.ratio_sup);
    return est;
}

FerniqueEstimate fernique_check(const LimitKernel& kernel, double beta, std::span<const double> base_points,
                                int rungs) {
    return fernique_check([&kernel](double t, double u) { return kernel.g(t, u); }, beta, base_points, rungs);
}

}  // namespace permclt
