#include "permclt/verify.hpp"

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <ctime>
#include <functional>
#include <iomanip>
#include <limits>
#include <map>
#include <sstream>

#include "permclt/error.hpp"
#include "permclt/functionals.hpp"
#include "permclt/gaussian_models.hpp"
#include "permclt/matrix_core.hpp"
#include "permclt/matrix_io.hpp"
#include "permclt/mc_engine.hpp"
#include "permclt/numerics.hpp"
#include "permclt/tableaux.hpp"

namespace permclt {

namespace {

std::size_t pick(std::size_t value, std::size_t fallback) { return value == 0 ? fallback : value; }

Check exact_check(std::string name, double target, double estimate, double tol) {
    Check c{std::move(name), target, estimate, 0.0, tol, "|estimate - target| <= tolerance", false};
    c.pass = std::abs(estimate - target) <= tol;
    return c;
}

Check relative_check(std::string name, double target, double estimate, double se, double rel) {
    Check c{std::move(name), target, estimate, se, rel * std::abs(target), "|estimate - target| <= tolerance", false};
    c.pass = std::abs(estimate - target) <= c.tolerance;
    return c;
}

Check se_check(std::string name, double target, double estimate, double se, double k = 4.0, double floor = 0.0) {
    Check c{std::move(name), target, estimate, se, std::max(k * se, floor), "", false};
    std::ostringstream rule;
    rule << "|estimate - target| <= max(" << k << " se, " << floor << ")";
    c.rule = rule.str();
    c.pass = std::abs(estimate - target) <= c.tolerance;
    return c;
}

Check bound_check(std::string name, double bound, double estimate, bool upper = true) {
    Check c{std::move(name), bound, estimate, 0.0, 0.0, upper ? "estimate <= target" : "estimate >= target", false};
    c.pass = upper ? estimate <= bound : estimate >= bound;
    return c;
}

std::string fmt_pair(double t, double u) {
    std::ostringstream os;
    os << "(" << t << "," << u << ")";
    return os.str();
}

RowMatrix uniform_matrix(std::size_t n, Rng& rng, double lo, double hi) {
    RowMatrix a0(n, n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) a0(i, j) = lo + (hi - lo) * rng.uniform();
    return a0;
}

std::uint64_t factorial(std::size_t n) {
    std::uint64_t f = 1;
    for (std::size_t k = 2; k <= n; ++k) f *= k;
    return f;
}

// ---------------------------------------------------------------------------

SuiteReport suite_exact_cov(const SuiteOptions& opts) {
    SuiteReport rep;
    const std::size_t trials = pick(opts.trials, 20);
    std::vector<std::size_t> sizes;
    if (opts.n == 0) sizes = {3, 4, 5, 6, 7};
    else sizes = {opts.n};
    rep.config = {{"n", sizes}, {"trials", trials}, {"seed", opts.seed}};
    for (std::size_t n : sizes) {
        if (n < 2) fail(Errc::invalid_input, "exact-cov needs n >= 2");
        double worst_cov = 0.0;
        double worst_var = 0.0;
        for (std::size_t trial = 0; trial < trials; ++trial) {
            Rng rng(opts.seed, 1000 * n + trial);
            const RowMatrix a0 = uniform_matrix(n, rng, -1.0, 1.0);
            const ScoreMatrix m = center_rows(a0);
            const Normalization s = normalization(m, NormMode::canonical);
            const SigmaMatrix sig = sigma_matrix(m, s);
            const RowMatrix at = tilde_standardize(a0);
            double sum_t2 = 0.0;
            for (Eigen::Index i = 0; i < at.size(); ++i) sum_t2 += at.data()[i] * at.data()[i];
            const double s_tilde = std::sqrt(sum_t2 / static_cast<double>(n - 1));

            std::vector<long double> mean(n, 0.0L), prod(n * n, 0.0L);
            long double y1 = 0.0L, y1sq = 0.0L;
            std::vector<double> x(n);
            for_each_permutation(n, [&](std::span<const std::size_t> perm) {
                double total = 0.0;
                for (std::size_t i = 0; i < n; ++i) {
                    x[i] = m(i, perm[i]);
                    total += x[i];
                }
                for (std::size_t i = 0; i < n; ++i) {
                    mean[i] += x[i];
                    for (std::size_t j = 0; j < n; ++j) prod[i * n + j] += static_cast<long double>(x[i]) * x[j];
                }
                const long double yy = total / s_tilde;
                y1 += yy;
                y1sq += yy * yy;
            });
            const long double count = static_cast<long double>(factorial(n));
            double scale = 0.0;
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t j = 0; j < n; ++j) scale = std::max(scale, std::abs(s.s * s.s * sig.sigma(i, j)));
            for (std::size_t i = 0; i < n; ++i) {
                for (std::size_t j = 0; j < n; ++j) {
                    const long double cov = prod[i * n + j] / count - (mean[i] / count) * (mean[j] / count);
                    const double target = s.s * s.s * sig.sigma(i, j);
                    worst_cov = std::max(worst_cov, static_cast<double>(std::abs(cov - target)) / scale);
                }
            }
            const long double var = y1sq / count - (y1 / count) * (y1 / count);
            worst_var = std::max(worst_var, static_cast<double>(std::abs(var - 1.0L)));
        }
        rep.checks.push_back(exact_check("n=" + std::to_string(n) + " max relative deviation of Cov vs s^2 sigma", 0.0,
                                         worst_cov, 1e-10));
        rep.checks.push_back(
            exact_check("n=" + std::to_string(n) + " max |Var Y(1) - 1| with tilde normalization", 0.0, worst_var, 1e-10));
    }
    return rep;
}

// ---------------------------------------------------------------------------

SuiteReport suite_moments(const SuiteOptions& opts) {
    SuiteReport rep;
    std::vector<std::size_t> sizes;
    if (opts.n == 0) sizes = {3, 4, 5, 6, 7};
    else sizes = {opts.n};
    rep.config = {{"n", sizes}};
    for (std::size_t n : sizes) {
        if (n < 2 || n > kMaxEnumeration) fail(Errc::too_large, "moments needs 2 <= n <= 8");
        std::vector<std::int64_t> single(n + 1, 0);
        std::vector<std::int64_t> joint((n + 1) * (n + 1), 0);
        std::vector<std::int64_t> s0(n + 1, 0);
        for_each_permutation(n, [&](std::span<const std::size_t> perm) {
            std::int64_t s = 0;
            for (std::size_t i = 1; i <= n; ++i) {
                const bool ii = perm[i - 1] >= i - 1;
                if (ii) {
                    ++single[i];
                    ++s;
                    for (std::size_t j = i + 1; j <= n; ++j)
                        if (perm[j - 1] >= j - 1) ++joint[i * (n + 1) + j];
                }
                s0[i] += s;
            }
        });
        const auto total = static_cast<std::int64_t>(factorial(n));
        double bad_mean = 0, bad_joint = 0, bad_cond = 0, bad_s0 = 0;
        for (std::size_t i = 1; i <= n; ++i) {
            const Fraction f = exact_mean_indicator(n, i);
            if (single[i] * f.den != f.num * total) ++bad_mean;
            for (std::size_t j = i + 1; j <= n; ++j) {
                const Fraction fj = exact_joint_indicator(n, i, j);
                if (joint[i * (n + 1) + j] * fj.den != fj.num * total) ++bad_joint;
                const Fraction fc = exact_conditional_indicator(n, i, j);
                // E{I_i | I_j = 1} = #(I_i I_j = 1) / #(I_j = 1)
                if (joint[i * (n + 1) + j] * fc.den != fc.num * single[j]) ++bad_cond;
            }
        }
        for (std::size_t k = 0; k <= n; ++k) {
            const Fraction f = exact_mean_s0(n, k);
            if (s0[k] * f.den != f.num * total) ++bad_s0;
        }
        const std::string tag = "n=" + std::to_string(n) + " ";
        rep.checks.push_back(exact_check(tag + "E I_i mismatches", 0, bad_mean, 0));
        rep.checks.push_back(exact_check(tag + "E I_i I_j mismatches", 0, bad_joint, 0));
        rep.checks.push_back(exact_check(tag + "E{I_i | I_j = 1} mismatches", 0, bad_cond, 0));
        rep.checks.push_back(exact_check(tag + "E S_0(k/n) mismatches", 0, bad_s0, 0));
    }
    // |E S_0(floor(nt)/n) - n mu(t)| <= 1 from the closed form.
    double worst = 0.0;
    for (std::size_t n : {2, 3, 5, 10, 100, 1000, 10000}) {
        for (std::size_t k = 0; k <= n; ++k) {
            const double t = static_cast<double>(k) / static_cast<double>(n);
            worst = std::max(worst, std::abs(exact_mean_s0(n, k).value() - static_cast<double>(n) * tableau_mu(t)));
        }
    }
    rep.checks.push_back(bound_check("max |E S_0(k/n) - n mu(k/n)| over n <= 10^4", 1.0, worst));
    return rep;
}

// ---------------------------------------------------------------------------

SuiteReport suite_tableau_cov(const SuiteOptions& opts) {
    SuiteReport rep;
    const std::size_t n = pick(opts.n, 1000);
    const std::size_t samples = pick(opts.samples, 20000);
    const std::size_t boundary_samples = pick(opts.trials, 1000);
    RunConfig cfg;
    cfg.n = n;
    cfg.samples = samples;
    cfg.seed = opts.seed;
    cfg.workers = opts.workers;
    cfg.grid = {0.25, 0.5, 0.75, 1.0};
    rep.config = {{"n", n}, {"samples", samples}, {"boundary_samples", boundary_samples}, {"seed", opts.seed},
                  {"grid", cfg.grid}};
    const TableauPathSource source(n);
    const EnsembleResult res = run_ensemble(cfg, source);
    for (std::size_t i = 0; i < cfg.grid.size(); ++i) {
        for (std::size_t j = i; j < cfg.grid.size(); ++j) {
            const double t = cfg.grid[i], u = cfg.grid[j];
            rep.checks.push_back(se_check("Cov Y_hat" + fmt_pair(t, u), limit_cov_hat(t, u), *res.stats.covariance(i, j),
                                          *res.stats.se_covariance(i, j), 4.0, 0.01));
        }
    }
    // Mean sup-distance of the scaled boundary to the parabola arc.
    std::vector<double> dist(boundary_samples);
    parallel_chunks(boundary_samples, opts.workers, [&](std::size_t, std::size_t begin, std::size_t end) {
        Permutation perm(n);
        for (std::size_t k = begin; k < end; ++k) {
            Rng rng(opts.seed ^ 0x9e3779b97f4a7c15ULL, k);
            random_permutation(rng, perm);
            dist[k] = parabola_distance(boundary(exceedance_record(perm)));
        }
    });
    rep.checks.push_back(bound_check("mean sup-distance of boundary to parabola", 5.0 / std::sqrt(static_cast<double>(n)),
                                     compensated_sum(dist) / static_cast<double>(boundary_samples)));
    return rep;
}

// ---------------------------------------------------------------------------

double sample_variance(const std::vector<double>& x, double* mean_out = nullptr) {
    EnsembleStats st(1, 0);
    for (double v : x) st.add(std::span<const double>(&v, 1));
    if (mean_out) *mean_out = st.mean(0);
    return st.variance(0).value_or(0.0);
}

SuiteReport suite_area(const SuiteOptions& opts) {
    SuiteReport rep;
    const std::size_t n = pick(opts.n, 1000);
    const std::size_t samples = pick(opts.samples, 20000);
    rep.config = {{"n", n}, {"samples", samples}, {"seed", opts.seed}};
    const TableauSamples ts = sample_tableau_statistics(n, samples, opts.seed, opts.workers);
    const double dn = static_cast<double>(n);
    const double n3 = dn * dn * dn;
    double mean = 0.0;
    const double var = sample_variance(ts.area, &mean);
    const double m = static_cast<double>(samples);
    const double target = 1.0 / 144.0;
    rep.checks.push_back(relative_check("Var(A_n)/n^3 vs 1/144 (10%)", target, var / n3,
                                        var / n3 * std::sqrt(2.0 / (m - 1.0)), 0.10));
    const double exact_mean = exact_mean_area(n);
    rep.checks.push_back(se_check("E A_n / n^2 vs exact mean", exact_mean / (dn * dn), mean / (dn * dn),
                                  std::sqrt(var / m) / (dn * dn)));
    std::vector<double> z(samples);
    const double sd = std::sqrt(n3 * target);
    for (std::size_t k = 0; k < samples; ++k) z[k] = (ts.area[k] - exact_mean) / sd;
    const KsResult ks = ks_normal(z, 0.0, 1.0);
    Check c{"KS of standardized A_n vs N(0,1)", ks_critical_value(samples, 0.01), ks.statistic, 0.0, 0.0,
            "D < 1% critical value", ks.statistic < ks_critical_value(samples, 0.01)};
    c.se = ks.p_value;  // reported as the p-value
    c.rule = "D < 1% critical value (se column holds the p-value)";
    rep.checks.push_back(c);
    rep.checks.push_back(exact_check("closed-form area variance integral", target, area_limit_variance(), 1e-12));
    return rep;
}

SuiteReport suite_rows(const SuiteOptions& opts) {
    SuiteReport rep;
    const std::size_t n = pick(opts.n, 1000);
    const std::size_t samples = pick(opts.samples, 20000);
    rep.config = {{"n", n}, {"samples", samples}, {"seed", opts.seed}};
    const TableauSamples ts = sample_tableau_statistics(n, samples, opts.seed, opts.workers);
    const double dn = static_cast<double>(n);
    const double m = static_cast<double>(samples);
    double mean = 0.0;
    const double var = sample_variance(ts.rows, &mean);
    rep.checks.push_back(relative_check("Var(R_n)/n vs 1/12 (10%)", 1.0 / 12.0, var / dn,
                                        var / dn * std::sqrt(2.0 / (m - 1.0)), 0.10));
    rep.checks.push_back(se_check("E R_n vs (n+1)/2", exact_mean_rows(n), mean, std::sqrt(var / m)));
    // R_n is integer valued; a U(-1/2,1/2) jitter makes it continuous without
    // changing the mean and adds 1/12 to the variance.
    const double sd = std::sqrt(exact_var_rows(n) + 1.0 / 12.0);
    std::vector<double> z(samples);
    for (std::size_t k = 0; k < samples; ++k) z[k] = (ts.rows[k] + ts.jitter[k] - exact_mean_rows(n)) / sd;
    const KsResult ks = ks_normal(z, 0.0, 1.0);
    const double crit = ks_critical_value(samples, 0.01);
    rep.checks.push_back({"KS of standardized R_n vs N(0,1)", crit, ks.statistic, ks.p_value, 0.0,
                          "D < 1% critical value (se column holds the p-value)", ks.statistic < crit});
    return rep;
}

// ---------------------------------------------------------------------------

SuiteReport suite_kiefer(const SuiteOptions& opts) {
    SuiteReport rep;
    const std::size_t m = pick(opts.n, 64);
    const std::size_t samples = pick(opts.samples, 100000);
    rep.config = {{"grid", m}, {"samples", samples}, {"seed", opts.seed}};
    using Node = std::pair<double, double>;
    const std::array<std::pair<Node, Node>, 10> pairs = {{
        {{0.5, 1.0}, {0.5, 1.0}},
        {{0.25, 0.5}, {0.25, 0.5}},
        {{0.25, 0.5}, {0.75, 1.0}},
        {{0.5, 0.25}, {0.5, 0.75}},
        {{0.125, 1.0}, {0.875, 0.5}},
        {{0.75, 0.75}, {0.25, 0.25}},
        {{0.5, 0.5}, {0.5, 1.0}},
        {{0.375, 0.625}, {0.625, 0.375}},
        {{0.015625, 1.0}, {0.015625, 1.0}},
        {{0.9375, 0.1875}, {0.5, 0.8125}},
    }};
    std::vector<Node> nodes;
    auto index_of = [&](const Node& p) {
        const auto it = std::find(nodes.begin(), nodes.end(), p);
        if (it != nodes.end()) return static_cast<std::size_t>(it - nodes.begin());
        nodes.push_back(p);
        return nodes.size() - 1;
    };
    std::vector<std::pair<std::size_t, std::size_t>> idx;
    for (const auto& [p, q] : pairs) {
        const std::size_t a = index_of(p);
        const std::size_t b = index_of(q);
        idx.emplace_back(a, b);
    }
    const double dm = static_cast<double>(m);
    const EnsembleStats st = run_chunked(samples, opts.workers, nodes.size(), 0,
                                         [&](std::size_t begin, std::size_t end, EnsembleStats& acc) {
                                             std::vector<double> vals(nodes.size());
                                             for (std::size_t k = begin; k < end; ++k) {
                                                 Rng rng(opts.seed, k);
                                                 const KieferField f = sample_kiefer(m, m, rng);
                                                 for (std::size_t q = 0; q < nodes.size(); ++q) {
                                                     vals[q] = f.at_node(static_cast<std::size_t>(std::lround(nodes[q].first * dm)),
                                                                         static_cast<std::size_t>(std::lround(nodes[q].second * dm)));
                                                 }
                                                 acc.add(vals);
                                             }
                                         });
    for (std::size_t k = 0; k < pairs.size(); ++k) {
        const auto& [p, q] = pairs[k];
        const double target = (std::min(p.first, q.first) - p.first * q.first) * std::min(p.second, q.second);
        rep.checks.push_back(se_check("Cov K" + fmt_pair(p.first, p.second) + " K" + fmt_pair(q.first, q.second), target,
                                      *st.covariance(idx[k].first, idx[k].second),
                                      *st.se_covariance(idx[k].first, idx[k].second)));
    }
    return rep;
}

// ---------------------------------------------------------------------------

SuiteReport suite_prelimit(const SuiteOptions& opts) {
    SuiteReport rep;
    const std::size_t n = pick(opts.n, 20);
    const std::size_t samples = pick(opts.samples, 100000);
    rep.config = {{"n", n}, {"samples", samples}, {"seed", opts.seed}, {"matrix", "iid U(0,1)"}};
    Rng mrng(opts.seed, std::uint64_t{1} << 48);
    const ScoreMatrix score = center_rows(uniform_matrix(n, mrng, 0.0, 1.0));
    const Normalization s = normalization(score, NormMode::canonical);
    const PreLimitModel model(score, s);
    const EnsembleStats st = run_chunked(samples, opts.workers, n, 0,
                                         [&](std::size_t begin, std::size_t end, EnsembleStats& acc) {
                                             for (std::size_t k = begin; k < end; ++k) {
                                                 Rng rng(opts.seed, k);
                                                 acc.add(model.sample_increments(rng));
                                             }
                                         });
    std::size_t beyond4 = 0, between = 0;
    double worst = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i; j < n; ++j) {
            const double z = std::abs(*st.covariance(i, j) - model.sigma().sigma(i, j)) / *st.se_covariance(i, j);
            worst = std::max(worst, z);
            if (z > 4.0) ++beyond4;
            else if (z > 3.0) ++between;
        }
    }
    const double pairs = static_cast<double>(n * (n + 1) / 2);
    rep.config["pairs"] = pairs;
    rep.checks.push_back(bound_check("pairs beyond 4 SE", 0.0, static_cast<double>(beyond4)));
    rep.checks.push_back(bound_check("pairs in (3 SE, 4 SE]", 2.0, static_cast<double>(between)));
    Check w{"max |z| over pairs", 4.0, worst, 0.0, 0.0, "informational", true};
    rep.checks.push_back(w);
    return rep;
}

// ---------------------------------------------------------------------------

// Ball functional for the distance experiments.
BallFunctional distance_functional() {
    BallFunctional g;
    g.eps = 0.25;
    g.p = 4.0;
    g.rho = 0.45;
    g.eta = 0.35;
    return g;
}

SuiteReport suite_distance(const SuiteOptions& opts) {
    SuiteReport rep;
    const std::size_t samples = pick(opts.samples, 1000000);
    const std::size_t small = 25;
    const std::size_t large = pick(opts.n, 400);
    const Functional g = distance_functional();
    rep.config = {{"n", {small, large}}, {"samples", samples}, {"seed", opts.seed}, {"functional", describe(g)},
                  {"family", "exceedance"}, {"prelimit", "factorized"}};
    RunConfig cfg;
    cfg.samples = samples;
    cfg.seed = opts.seed;
    cfg.workers = opts.workers;
    auto estimate = [&](std::size_t n) {
        const ScoreMatrix m = exceedance_matrix(n);
        const Normalization s = normalization(m, NormMode::canonical);
        const PermutationPathSource y(m, s);
        const PreLimitPathSource z(m, s, true);
        cfg.n = n;
        return distance_estimate(cfg, g, y, z);
    };
    const DistanceEstimate d_small = estimate(small);
    const DistanceEstimate d_large = estimate(large);
    rep.config["estimates"] = {{std::to_string(small), d_small.to_json()}, {std::to_string(large), d_large.to_json()}};
    const double pooled = std::sqrt(d_small.se * d_small.se + d_large.se * d_large.se);
    Check c{"Delta(" + std::to_string(large) + ") < Delta(" + std::to_string(small) + ") + 3 pooled SE",
            d_small.delta + 3.0 * pooled, d_large.delta, pooled, 3.0 * pooled, "estimate < target", false};
    c.pass = d_large.delta < c.target;
    rep.checks.push_back(c);
    Check info{"Delta(" + std::to_string(small) + ")", 0.0, d_small.delta, d_small.se, 0.0, "informational", true};
    rep.checks.push_back(info);
    return rep;
}

// ---------------------------------------------------------------------------

SuiteReport suite_fernique(const SuiteOptions&) {
    SuiteReport rep;
    std::vector<double> base;
    for (int k = 0; k < 10; ++k) base.push_back(0.1 * k);
    rep.config = {{"base_points", base}, {"rungs", 16}};
    const LimitKernel tab = tableau_kernel();
    const FerniqueEstimate t2 = fernique_check(tab, 2.0, base);
    rep.checks.push_back({"tableau g, beta=2: finite", 0.0, t2.c_g, 0.0, 0.0, "not divergent", !t2.divergent && std::isfinite(t2.c_g)});
    const FerniqueEstimate zero = fernique_check(zero_kernel(), 2.0, base);
    rep.checks.push_back(exact_check("g = 0: C_g", 0.0, zero.c_g, 0.0));
    const FerniqueEstimate br = fernique_check(bridge_kernel(), 2.0, base);
    rep.checks.push_back(exact_check("bridge g = tu, beta=2: C_g", 1.0, br.c_g, 1e-5));
    const FerniqueEstimate rough = fernique_check([](double t, double u) { return std::min(t, u); }, 2.0, base);
    rep.checks.push_back({"g = min(t,u), beta=2: divergent", 1.0, rough.divergent ? 1.0 : 0.0, 0.0, 0.0,
                          "divergence flagged", rough.divergent});
    const FerniqueEstimate rough1 = fernique_check([](double t, double u) { return std::min(t, u); }, 1.0, base);
    rep.checks.push_back(exact_check("g = min(t,u), beta=1: C_g", 1.0, rough1.c_g, 1e-9));
    return rep;
}

// ---------------------------------------------------------------------------

SuiteReport suite_lyapounov(const SuiteOptions&) {
    SuiteReport rep;
    const double oracle = 0.1 * std::pow(6.0, 1.5);
    rep.config = {{"n", {100, 1000, 10000}}, {"family", "exceedance"}};
    for (std::size_t n : {100, 1000, 10000}) {
        const MatrixFamily fam = parse_family("exceedance:" + std::to_string(n));
        const StreamedSummary sum = streamed_summary(n, fam.rows);
        const double scaled = sum.lambda_canonical * std::sqrt(static_cast<double>(n));
        Check c{"n=" + std::to_string(n) + " Lambda sqrt(n) in [1.3, 1.6]", oracle, scaled, 0.0, 0.0,
                "1.3 <= estimate <= 1.6", scaled >= 1.3 && scaled <= 1.6};
        rep.checks.push_back(c);
        if (n == 10000) rep.checks.push_back(relative_check("n=10000 Lambda sqrt(n) vs 6^{3/2}/10 (2%)", oracle, scaled, 0.0, 0.02));
    }
    return rep;
}

// ---------------------------------------------------------------------------

SuiteReport suite_limit_consistency(const SuiteOptions& opts) {
    SuiteReport rep;
    const std::size_t m = pick(opts.n, 32);
    const std::size_t samples = pick(opts.samples, 100000);
    const std::size_t refine = pick(opts.trials, 1);
    rep.config = {{"m", m}, {"samples", samples}, {"seed", opts.seed}, {"refine", refine}};
    const LimitKernel kernel = tableau_kernel();
    RunConfig cfg;
    cfg.samples = samples;
    cfg.seed = opts.seed;
    cfg.workers = opts.workers;
    for (std::size_t k = 1; k <= m; ++k) cfg.grid.push_back(static_cast<double>(k) / static_cast<double>(m));
    const LimitCholeskySource chol(kernel, m);
    const LimitIntegralSource integral(tableau_alpha(), m, refine);
    for (const PathSource* src : {static_cast<const PathSource*>(&chol), static_cast<const PathSource*>(&integral)}) {
        const EnsembleResult res = run_ensemble(cfg, *src);
        std::size_t beyond = 0, between = 0;
        double worst = 0.0;
        for (std::size_t i = 0; i < m; ++i) {
            for (std::size_t j = i; j < m; ++j) {
                const double z = std::abs(*res.stats.covariance(i, j) - kernel(cfg.grid[i], cfg.grid[j])) /
                                 *res.stats.se_covariance(i, j);
                worst = std::max(worst, z);
                if (z > 4.0) ++beyond;
                else if (z > 3.0) ++between;
            }
        }
        rep.checks.push_back(bound_check(src->name() + ": entries beyond 4 SE", 0.0, static_cast<double>(beyond)));
        rep.checks.push_back({src->name() + ": max |z|", 4.0, worst, 0.0, 0.0, "informational", true});
        rep.checks.push_back({src->name() + ": entries in (3 SE, 4 SE]", 0.0, static_cast<double>(between), 0.0, 0.0,
                              "informational", true});
    }
    return rep;
}

// ---------------------------------------------------------------------------

StepPath random_step_path(Rng& rng, std::size_t max_n, double scale) {
    const std::size_t n = 1 + rng.below(static_cast<std::uint32_t>(max_n));
    StepPath p(n);
    double acc = 0.0;
    for (std::size_t k = 1; k <= n; ++k) {
        acc += scale * rng.normal() / std::sqrt(static_cast<double>(n));
        p.values[k] = acc;
    }
    if (rng.uniform() < 0.5) p.values[0] = scale * rng.normal();
    return p;
}

double lp_norm(const StepPath& z, double p) {
    CompensatedSum s;
    for (std::size_t k = 0; k < z.n; ++k) s.add(std::pow(std::abs(z.values[k]), p));
    return std::pow(s.value() / static_cast<double>(z.n), 1.0 / p);
}

SuiteReport suite_functionals(const SuiteOptions& opts) {
    SuiteReport rep;
    const std::size_t trials = pick(opts.trials, 1000);
    rep.config = {{"trials", trials}, {"seed", opts.seed}};
    constexpr std::array<double, 6> ps = {1.0, 2.0, 3.5, 4.0, 8.0, 12.0};
    std::size_t range_bad = 0, plateau_bad = 0, minkowski_bad = 0, monotone_bad = 0, sandwich_bad = 0,
                plateau_hits = 0;
    double large_p_worst = 0.0;
    for (std::size_t k = 0; k < trials; ++k) {
        Rng rng(opts.seed, k);
        BallFunctional g;
        g.eps = 0.05 + 0.95 * rng.uniform();
        g.p = ps[rng.below(ps.size())];
        g.rho = 2.0 * rng.uniform();
        g.eta = 0.05 + 0.95 * rng.uniform();
        const StepPath w = random_step_path(rng, 50, 1.5);
        const double h = h_eps_p(w, g.eps, g.p);
        const double v = ball(g, w);
        if (!(v >= 0.0 && v <= 1.0)) ++range_bad;
        if (h <= g.rho) {
            ++plateau_hits;
            if (v != 1.0) ++plateau_bad;
        }
        if (h >= g.rho + g.eta) {
            ++plateau_hits;
            if (v != 0.0) ++plateau_bad;
        }
        // Minkowski: h(y + z) <= h(y) + ||z||_p on a shared grid.
        StepPath z(w.n);
        for (std::size_t q = 0; q <= w.n; ++q) z.values[q] = rng.normal();
        StepPath sum(w.n);
        for (std::size_t q = 0; q <= w.n; ++q) sum.values[q] = w.values[q] + z.values[q];
        if (h_eps_p(sum, g.eps, g.p) > (h + lp_norm(z, g.p)) * (1.0 + 1e-12)) ++minkowski_bad;
        // Monotone in eps.
        if (h_eps_p(w, 1.5 * g.eps, g.p) < h) ++monotone_bad;
        // h >= eps and h >= ||y||_p.
        if (h < g.eps * (1.0 - 1e-12) || h < lp_norm(w, g.p) * (1.0 - 1e-12)) ++sandwich_bad;
        // Large p approaches the sup of (eps^2 + y^2)^{1/2}.
        double top = 0.0;
        for (std::size_t q = 0; q < w.n; ++q) top = std::max(top, std::hypot(g.eps, w.values[q]));
        large_p_worst = std::max(large_p_worst, std::abs(h_eps_p(w, g.eps, 4096.0) - top) / top);
    }
    rep.checks.push_back(exact_check("ball outside [0,1]", 0, range_bad, 0));
    rep.checks.push_back(exact_check("plateau law violations", 0, plateau_bad, 0));
    rep.checks.push_back({"plateau cases exercised", static_cast<double>(trials) / 4, static_cast<double>(plateau_hits), 0.0,
                          0.0, "estimate >= target", plateau_hits >= trials / 4});
    rep.checks.push_back(exact_check("Minkowski violations", 0, minkowski_bad, 0));
    rep.checks.push_back(exact_check("eps monotonicity violations", 0, monotone_bad, 0));
    rep.checks.push_back(exact_check("h >= max(eps, ||y||_p) violations", 0, sandwich_bad, 0));
    rep.checks.push_back(bound_check("max relative gap of h at p=4096 to the sup", 1e-2, large_p_worst));

    // Finite differences of phi at the junctions 0 and 1.
    const std::array<double, 3> steps = {1e-2, 1e-3, 1e-4};
    for (double x0 : {0.0, 1.0}) {
        for (int order = 1; order <= 3; ++order) {
            std::vector<double> d;
            for (double hstep : steps) {
                const auto f = [&](double dx) { return phi_cutoff(x0 + dx * hstep); };
                double val = 0.0;
                if (order == 1) val = (f(1) - f(-1)) / (2 * hstep);
                if (order == 2) val = (f(1) - 2 * f(0) + f(-1)) / (hstep * hstep);
                if (order == 3) val = (f(2) - 2 * f(1) + 2 * f(-1) - f(-2)) / (2 * hstep * hstep * hstep);
                d.push_back(std::abs(val));
            }
            const bool decreasing = d[1] < d[0] && d[2] < d[1];
            std::ostringstream name;
            name << "phi derivative " << order << " at x=" << x0 << " shrinks with the step";
            rep.checks.push_back({name.str(), 0.0, d[2], 0.0, 0.05, "decreasing over steps 1e-2..1e-4 and last <= 0.05",
                                  decreasing && d[2] <= 0.05});
        }
    }
    return rep;
}

// ---------------------------------------------------------------------------

using SuiteFn = std::function<SuiteReport(const SuiteOptions&)>;

const std::map<std::string, SuiteFn>& registry() {
    static const std::map<std::string, SuiteFn> r = {
        {"exact-cov", suite_exact_cov},
        {"moments", suite_moments},
        {"tableau-cov", suite_tableau_cov},
        {"area", suite_area},
        {"rows", suite_rows},
        {"kiefer", suite_kiefer},
        {"prelimit", suite_prelimit},
        {"distance-decay", suite_distance},
        {"fernique", suite_fernique},
        {"lyapounov", suite_lyapounov},
        {"limit-consistency", suite_limit_consistency},
        {"functionals", suite_functionals},
    };
    return r;
}

std::string utc_now() {
    const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

}  // namespace

TableauSamples sample_tableau_statistics(std::size_t n, std::size_t samples, std::uint64_t seed,
                                         std::size_t workers) {
    if (n < 2) fail(Errc::invalid_input, "tableau statistics need n >= 2");
    if (samples < 1) fail(Errc::config_error, "samples must be at least 1");
    TableauSamples out;
    out.rows.resize(samples);
    out.area.resize(samples);
    out.jitter.resize(samples);
    parallel_chunks(samples, workers, [&](std::size_t, std::size_t begin, std::size_t end) {
        Permutation perm(n);
        for (std::size_t k = begin; k < end; ++k) {
            Rng rng(seed, k);
            random_permutation(rng, perm);
            const ExceedanceCounts c = exceedance_counts(perm);
            out.rows[k] = static_cast<double>(c.rows);
            out.area[k] = static_cast<double>(c.area);
            out.jitter[k] = rng.uniform() - 0.5;
        }
    });
    return out;
}

bool SuiteReport::passed() const noexcept {
    return std::all_of(checks.begin(), checks.end(), [](const Check& c) { return c.pass; });
}

nlohmann::json SuiteReport::to_json() const {
    nlohmann::json cs = nlohmann::json::array();
    for (const Check& c : checks) {
        cs.push_back({{"name", c.name},
                      {"target", c.target},
                      {"estimate", c.estimate},
                      {"se", c.se},
                      {"tolerance", c.tolerance},
                      {"rule", c.rule},
                      {"pass", c.pass}});
    }
    nlohmann::json j = {{"schema", "1"}, {"suite", suite}, {"config", config}, {"checks", cs}, {"passed", passed()}};
    j["metadata"] = {{"rng", std::string(rng_name)}, {"workers", workers}, {"chunk_size", kChunkSize}};
    if (config.contains("seed")) j["metadata"]["seed"] = config["seed"];
    j["timestamp"] = {{"utc", utc_now()}, {"elapsed_seconds", elapsed_seconds}};
    return j;
}

std::string SuiteReport::table() const {
    std::ostringstream os;
    os << "suite " << suite << ": " << (passed() ? "PASS" : "FAIL") << "\n";
    os << std::left << std::setw(58) << "check" << std::right << std::setw(14) << "target" << std::setw(14)
       << "estimate" << std::setw(12) << "se" << std::setw(12) << "tolerance" << "  result\n";
    os << std::setprecision(6);
    for (const Check& c : checks) {
        os << std::left << std::setw(58) << c.name << std::right << std::setw(14) << c.target << std::setw(14)
           << c.estimate << std::setw(12) << c.se << std::setw(12) << c.tolerance << "  " << (c.pass ? "PASS" : "FAIL")
           << "\n";
    }
    return os.str();
}

const std::vector<std::string>& suite_names() {
    static const std::vector<std::string> names = [] {
        std::vector<std::string> v;
        for (const auto& [k, _] : registry()) v.push_back(k);
        return v;
    }();
    return names;
}

SuiteReport run_suite(std::string_view name, const SuiteOptions& opts) {
    const auto it = registry().find(std::string(name));
    if (it == registry().end()) {
        std::string known;
        for (const auto& k : suite_names()) known += (known.empty() ? "" : ", ") + k;
        fail(Errc::unknown_suite, "unknown suite '" + std::string(name) + "' (known: " + known + ")");
    }
    if (opts.workers < 1) fail(Errc::config_error, "workers must be at least 1");
    const auto start = std::chrono::steady_clock::now();
    SuiteReport rep = it->second(opts);
    rep.suite = std::string(name);
    rep.workers = opts.workers;
    rep.elapsed_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return rep;
}

}  // namespace permclt
