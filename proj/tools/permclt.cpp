// permclt: command-line front end for the permutation CLT library.

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "permclt/error.hpp"
#include "permclt/functionals.hpp"
#include "permclt/gaussian_models.hpp"
#include "permclt/matrix_core.hpp"
#include "permclt/matrix_io.hpp"
#include "permclt/mc_engine.hpp"
#include "permclt/numerics.hpp"
#include "permclt/tableaux.hpp"
#include "permclt/verify.hpp"

using namespace permclt;
using nlohmann::json;

namespace {

struct Global {
    std::uint64_t seed = 20261014;
    std::size_t workers = 1;
    std::string out;
    std::string format = "json";
};

std::size_t default_workers() {
    if (const char* env = std::getenv("PERMCLT_WORKERS")) {
        try {
            const long v = std::stol(env);
            if (v >= 1) return static_cast<std::size_t>(v);
        } catch (const std::exception&) {
        }
        std::cerr << "warning: ignoring PERMCLT_WORKERS='" << env << "'\n";
    }
    return 1;
}

void emit(const Global& g, const std::string& text) {
    if (g.out.empty()) {
        std::cout << text;
        if (!text.empty() && text.back() != '\n') std::cout << '\n';
        return;
    }
    std::ofstream f(g.out);
    if (!f) fail(Errc::io_error, "cannot write '" + g.out + "'");
    f << text;
    if (!text.empty() && text.back() != '\n') f << '\n';
}

std::string csv_matrix(const Eigen::Ref<const Eigen::MatrixXd>& m) {
    std::ostringstream os;
    os.precision(17);
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        for (Eigen::Index j = 0; j < m.cols(); ++j) os << (j ? "," : "") << m(i, j);
        os << "\n";
    }
    return os.str();
}

std::vector<double> parse_grid(const std::string& text) {
    std::vector<double> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        try {
            out.push_back(std::stod(item));
        } catch (const std::exception&) {
            fail(Errc::parse_error, "bad grid value '" + item + "'");
        }
    }
    return out;
}

// "exceedance" plus --n becomes "exceedance:n"; specs with parameters pass through.
std::string family_spec(const std::string& family, std::size_t n, std::uint64_t seed, double p) {
    if (family.find(':') != std::string::npos) return family;
    if (n == 0 && family != "file") fail(Errc::config_error, "--n is required for family '" + family + "'");
    const std::string ns = std::to_string(n);
    if (family == "exceedance") return "exceedance:" + ns;
    if (family == "uniform" || family == "additive") return family + ":" + ns + ":" + std::to_string(seed);
    if (family == "bernoulli") {
        std::ostringstream os;
        os << "bernoulli:" << ns << ":" << p << ":" << seed;
        return os.str();
    }
    return family;
}

json with_timestamp(json j, double seconds) {
    j["timestamp"] = {{"elapsed_seconds", seconds}};
    return j;
}

// ---------------------------------------------------------------------------

struct MatrixArgs {
    std::string family = "exceedance";
    std::size_t n = 0;
    double p = 0.5;
    std::string mode = "canonical";
    double s = 0.0;
    std::size_t dense_cap = 400;
};

void add_matrix_options(CLI::App* cmd, MatrixArgs& m) {
    cmd->add_option("--family", m.family, "exceedance|uniform|bernoulli|additive, a full spec such as uniform:50:3, or file:path");
    cmd->add_option("--n", m.n, "matrix size");
    cmd->add_option("--p", m.p, "Bernoulli probability");
    cmd->add_option("--mode", m.mode, "normalization: canonical|tilde|custom");
    cmd->add_option("--s", m.s, "normalization constant for --mode custom");
}

json matrix_summary(const MatrixArgs& args, const Global& g, std::string* csv) {
    const MatrixFamily fam = parse_family(family_spec(args.family, args.n, g.seed, args.p));
    const NormMode mode = parse_norm_mode(args.mode);
    json out = {{"schema", "1"}, {"family", fam.spec}, {"n", fam.n}, {"mode", std::string(to_string(mode))}};
    if (fam.n > args.dense_cap) {
        if (mode != NormMode::canonical) fail(Errc::config_error, "only --mode canonical is available above n = " + std::to_string(args.dense_cap));
        const StreamedSummary sum = streamed_summary(fam.n, fam.rows);
        out["s"] = sum.s_canonical;
        out["lambda"] = sum.lambda_canonical;
        out["lambda_sqrt_n"] = sum.lambda_canonical * std::sqrt(static_cast<double>(fam.n));
        out["note"] = "streamed summary; dense outputs are omitted above n = " + std::to_string(args.dense_cap);
        return out;
    }
    const RowMatrix a0 = fam.dense();
    const ScoreMatrix m = center_rows(a0);
    const Normalization s = normalization(m, mode, args.s);
    out["s"] = s.s;
    json modes = json::object();
    for (NormMode nm : {NormMode::canonical, NormMode::tilde}) {
        try {
            modes[std::string(to_string(nm))] = normalization(m, nm).s;
        } catch (const Error& e) {
            modes[std::string(to_string(nm))] = std::string(errc_name(e.code())) + ": " + e.what();
        }
    }
    out["s_modes"] = modes;
    const LyapounovRatios lr = lyapounov_ratios(m, s);
    out["lambda"] = lr.lambda;
    out["lambda_sqrt_n"] = lr.lambda * std::sqrt(static_cast<double>(fam.n));
    if (lr.has_lambda_tilde) out["lambda_tilde"] = lr.lambda_tilde;
    else out["lambda_tilde"] = "undefined (doubly centered matrix vanishes)";
    const SigmaMatrix sig = sigma_matrix(m, s);
    const EmpiricalFunctions fg = empirical_fn_gn(m, s);
    std::vector<std::vector<double>> centered(fam.n), sigma(fam.n), gn(fam.n + 1);
    for (std::size_t i = 0; i < fam.n; ++i) {
        centered[i].assign(m.a().row(i).data(), m.a().row(i).data() + fam.n);
        sigma[i].assign(sig.sigma.row(i).data(), sig.sigma.row(i).data() + fam.n);
    }
    for (std::size_t i = 0; i <= fam.n; ++i) gn[i].assign(fg.g.row(i).data(), fg.g.row(i).data() + fam.n + 1);
    out["a"] = centered;
    out["row_means"] = m.row_means();
    out["sigma"] = sigma;
    out["fn"] = {{"times", fg.times}, {"values", fg.f}};
    out["gn"] = gn;
    if (csv) *csv = csv_matrix(m.a());
    return out;
}

int cmd_matrix(const MatrixArgs& args, const Global& g) {
    std::string csv;
    const json out = matrix_summary(args, g, g.format == "csv" ? &csv : nullptr);
    if (g.format == "csv") {
        if (csv.empty()) fail(Errc::config_error, "CSV output needs a dense matrix");
        emit(g, csv);
    } else {
        emit(g, out.dump(2));
    }
    return 0;
}

// ---------------------------------------------------------------------------

struct SimArgs {
    MatrixArgs matrix;
    std::string source = "y";
    std::string kernel = "tableau";
    std::size_t m = 64;
    std::size_t refine = 1;
    std::size_t samples = 1000;
    std::string grid = "0.25,0.5,0.75,1";
    std::vector<std::string> functionals;
    std::string config;
};

std::unique_ptr<PathSource> make_source(const std::string& source, const SimArgs& a, const Global& g, std::size_t* n_out) {
    if (source == "limit" || source == "limit-integral") {
        *n_out = a.m;
        if (source == "limit") return std::make_unique<LimitCholeskySource>(parse_kernel(a.kernel), a.m);
        if (a.kernel != "tableau" && a.kernel != "bridge") fail(Errc::config_error, "limit-integral supports --kernel tableau|bridge");
        return std::make_unique<LimitIntegralSource>(a.kernel == "tableau" ? tableau_alpha() : constant_alpha(), a.m, a.refine);
    }
    if (source == "tableau") {
        if (a.matrix.n < 2) fail(Errc::config_error, "--n is required for the tableau source");
        *n_out = a.matrix.n;
        return std::make_unique<TableauPathSource>(a.matrix.n);
    }
    const MatrixFamily fam = parse_family(family_spec(a.matrix.family, a.matrix.n, g.seed, a.matrix.p));
    const ScoreMatrix m = center_rows(fam.dense());
    const Normalization s = normalization(m, parse_norm_mode(a.matrix.mode), a.matrix.s);
    *n_out = fam.n;
    if (source == "y") return std::make_unique<PermutationPathSource>(m, s);
    if (source == "prelimit") return std::make_unique<PreLimitPathSource>(m, s, false);
    if (source == "prelimit-factorized") return std::make_unique<PreLimitPathSource>(m, s, true);
    fail(Errc::config_error, "unknown source '" + source + "' (y|prelimit|prelimit-factorized|limit|limit-integral|tableau)");
}

int cmd_simulate(SimArgs a, const Global& g) {
    RunConfig cfg;
    if (!a.config.empty()) {
        std::ifstream f(a.config);
        if (!f) fail(Errc::io_error, "cannot open config '" + a.config + "'");
        json j;
        try {
            j = json::parse(f);
        } catch (const json::exception& e) {
            fail(Errc::parse_error, a.config + ": " + e.what());
        }
        const json& c = j.contains("config") ? j["config"] : j;
        cfg = RunConfig::from_json(c);
        if (j.contains("source") && j["source"].is_object()) {
            const json& src = j["source"];
            a.source = src.value("source", a.source);
            if (a.source == "limit" && src.value("method", "") == "kiefer-integral") a.source = "limit-integral";
            if (a.source == "prelimit" && src.value("method", "") == "factorized") a.source = "prelimit-factorized";
            if (src.contains("family")) a.matrix.family = src["family"];
            if (src.contains("normalization")) a.matrix.mode = src["normalization"];
            if (src.contains("kernel")) a.kernel = src["kernel"];
            if (src.contains("alpha")) a.kernel = src["alpha"] == "constant" ? "bridge" : "tableau";
            if (src.contains("m")) a.m = src["m"];
            if (src.contains("refine")) a.refine = src["refine"];
            if (src.contains("s") && a.matrix.mode == "custom") a.matrix.s = src["s"];
        }
        a.matrix.n = cfg.n;
    } else {
        cfg.samples = a.samples;
        cfg.seed = g.seed;
        cfg.workers = g.workers;
        cfg.grid = parse_grid(a.grid);
        cfg.functionals = a.functionals;
    }
    cfg.validate();
    const auto start = std::chrono::steady_clock::now();
    std::size_t n = 0;
    const auto src = make_source(a.source, a, g, &n);
    cfg.n = n;
    EnsembleResult res = run_ensemble(cfg, *src);
    json out = res.to_json();
    if (a.source == "y" || a.source == "prelimit" || a.source == "prelimit-factorized") {
        out["source"]["family"] = family_spec(a.matrix.family, a.matrix.n, g.seed, a.matrix.p);
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (g.format == "csv") {
        std::ostringstream os;
        os.precision(17);
        os << "t,u,covariance,se\n";
        for (std::size_t i = 0; i < cfg.grid.size(); ++i)
            for (std::size_t j = 0; j < cfg.grid.size(); ++j) {
                const auto c = res.stats.covariance(i, j);
                const auto se = res.stats.se_covariance(i, j);
                os << cfg.grid[i] << "," << cfg.grid[j] << ",";
                if (c) os << *c << "," << *se << "\n";
                else os << "insufficient data,insufficient data\n";
            }
        emit(g, os.str());
    } else {
        emit(g, with_timestamp(out, secs).dump(2));
    }
    return 0;
}

// ---------------------------------------------------------------------------

struct VerifyArgs {
    std::vector<std::string> suites;
    std::size_t n = 0;
    std::size_t samples = 0;
    std::size_t trials = 0;
    bool quiet = false;
};

int cmd_verify(const VerifyArgs& a, const Global& g) {
    std::vector<std::string> suites = a.suites;
    if (suites.size() == 1 && suites[0] == "all") suites = suite_names();
    if (suites.empty()) fail(Errc::config_error, "--suite is required (or 'all')");
    SuiteOptions opts;
    opts.n = a.n;
    opts.samples = a.samples;
    opts.trials = a.trials;
    opts.seed = g.seed;
    opts.workers = g.workers;
    json reports = json::array();
    bool ok = true;
    std::string table;
    for (const auto& name : suites) {
        const SuiteReport rep = run_suite(name, opts);
        ok = ok && rep.passed();
        reports.push_back(rep.to_json());
        table += rep.table();
    }
    if (!a.quiet) std::cerr << table;
    const json out = reports.size() == 1 ? reports[0] : json{{"schema", "1"}, {"reports", reports}, {"passed", ok}};
    if (g.format == "csv") {
        std::ostringstream os;
        os.precision(17);
        os << "suite,check,target,estimate,se,tolerance,pass\n";
        for (const auto& r : reports)
            for (const auto& c : r["checks"])
                os << r["suite"].get<std::string>() << ",\"" << c["name"].get<std::string>() << "\"," << c["target"] << ","
                   << c["estimate"] << "," << c["se"] << "," << c["tolerance"] << "," << (c["pass"].get<bool>() ? 1 : 0)
                   << "\n";
        emit(g, os.str());
    } else {
        emit(g, out.dump(2));
    }
    std::cout << (ok ? "VERIFY PASS" : "VERIFY FAIL") << std::endl;
    return ok ? 0 : 1;
}

// ---------------------------------------------------------------------------

struct GaussianArgs {
    std::string what = "limit";
    std::string kernel = "tableau";
    std::size_t m = 16;
    std::size_t mw = 0;
    std::size_t refine = 1;
    std::size_t samples = 10000;
    double beta = 2.0;
};

int cmd_gaussian(const GaussianArgs& a, const Global& g) {
    json out = {{"schema", "1"}, {"what", a.what}, {"metadata", {{"seed", g.seed}, {"rng", std::string(rng_name)}, {"workers", g.workers}}}};
    if (a.what == "fernique") {
        const LimitKernel k = parse_kernel(a.kernel);
        std::vector<double> base;
        for (int i = 0; i < 10; ++i) base.push_back(0.1 * i);
        const FerniqueEstimate est = fernique_check(k, a.beta, base);
        out["kernel"] = k.name();
        out["beta"] = a.beta;
        out["divergent"] = est.divergent;
        out["ratio_sup"] = est.divergent ? json("inf") : json(est.ratio_sup);
        out["c_g"] = est.divergent ? json("inf") : json(est.c_g);
        out["rung_ratios"] = est.rung_ratios;
        emit(g, out.dump(2));
        return 0;
    }
    if (a.what == "kiefer") {
        const std::size_t mv = a.m, mw = a.mw ? a.mw : a.m;
        const std::size_t dim = (mv + 1) * (mw + 1);
        if (dim > 4096) fail(Errc::config_error, "kiefer summary is limited to 4096 nodes");
        const EnsembleStats st = run_chunked(a.samples, g.workers, dim, 0, [&](std::size_t b, std::size_t e, EnsembleStats& acc) {
            std::vector<double> vals(dim);
            for (std::size_t k = b; k < e; ++k) {
                Rng rng(g.seed, k);
                const KieferField f = sample_kiefer(mv, mw, rng);
                for (std::size_t i = 0; i <= mv; ++i)
                    for (std::size_t j = 0; j <= mw; ++j) vals[i * (mw + 1) + j] = f.at_node(i, j);
                acc.add(vals);
            }
        });
        std::vector<std::vector<json>> var(mv + 1, std::vector<json>(mw + 1));
        for (std::size_t i = 0; i <= mv; ++i)
            for (std::size_t j = 0; j <= mw; ++j) {
                const auto v = st.variance(i * (mw + 1) + j);
                var[i][j] = v ? json(*v) : json("insufficient data");
            }
        out["mv"] = mv;
        out["mw"] = mw;
        out["samples"] = a.samples;
        out["variance"] = var;
        emit(g, out.dump(2));
        return 0;
    }
    if (a.what != "limit" && a.what != "limit-integral") fail(Errc::config_error, "--what must be limit|limit-integral|kiefer|fernique");
    const LimitKernel k = parse_kernel(a.kernel);
    std::vector<double> grid = uniform_grid(a.m);
    RunConfig cfg;
    cfg.n = a.m;
    cfg.samples = a.samples;
    cfg.seed = g.seed;
    cfg.workers = g.workers;
    cfg.grid = grid;
    std::unique_ptr<PathSource> src;
    if (a.what == "limit") src = std::make_unique<LimitCholeskySource>(k, a.m);
    else src = std::make_unique<LimitIntegralSource>(a.kernel == "bridge" ? constant_alpha() : tableau_alpha(), a.m, a.refine);
    const EnsembleResult res = run_ensemble(cfg, *src);
    out = res.to_json();
    std::vector<std::vector<double>> kern(grid.size(), std::vector<double>(grid.size()));
    for (std::size_t i = 0; i < grid.size(); ++i)
        for (std::size_t j = 0; j < grid.size(); ++j) kern[i][j] = k(grid[i], grid[j]);
    out["kernel_matrix"] = kern;
    emit(g, out.dump(2));
    return 0;
}

// ---------------------------------------------------------------------------

struct TableauArgs {
    std::size_t n = 0;
    std::string perm;
    std::vector<std::size_t> moments;
    bool area_variance = false;
};

int cmd_tableaux(const TableauArgs& a, const Global& g) {
    json out = {{"schema", "1"}};
    Permutation perm;
    if (!a.perm.empty()) {
        for (double v : parse_grid(a.perm)) {
            if (v < 1.0 || v != std::floor(v)) fail(Errc::invalid_permutation, "permutation entries are integers 1..n");
            perm.push_back(static_cast<std::size_t>(v) - 1);
        }
    }
    const std::size_t n = perm.empty() ? a.n : perm.size();
    if (a.area_variance) out["area_limit_variance"] = area_limit_variance();
    if (!a.moments.empty()) {
        if (a.moments.size() != 3) fail(Errc::config_error, "--moments takes i j k");
        const ExactMoments em = exact_moments(n, a.moments[0], a.moments[1], a.moments[2]);
        auto frac = [](const Fraction& f) { return json{{"num", f.num}, {"den", f.den}, {"value", f.value()}}; };
        out["moments"] = {{"n", n},
                          {"i", a.moments[0]},
                          {"j", a.moments[1]},
                          {"k", a.moments[2]},
                          {"E_I_i", frac(em.mean_i)},
                          {"E_I_i_I_j", frac(em.joint_ij)},
                          {"E_I_i_given_I_j", frac(em.conditional_i_given_j)},
                          {"E_S0_k", frac(em.mean_s0_k)}};
    }
    const bool want_record = !perm.empty() || (a.n > 0 && a.moments.empty());
    if (!want_record) {
        if (out.size() == 1) fail(Errc::config_error, "--n or --perm is required");
        emit(g, out.dump(2));
        return 0;
    }
    if (perm.empty()) {
        Rng rng(g.seed, 0);
        perm = random_permutation(a.n, rng);
    }
    const ExceedanceRecord rec = exceedance_record(perm);
    const BoundaryPolyline poly = boundary(rec);
    if (g.format == "csv") {
        std::ostringstream os;
        os << "x,y\n";
        for (const auto& [x, y] : poly.points) os << x << "," << y << "\n";
        emit(g, os.str());
        return 0;
    }
    std::vector<std::size_t> one_based;
    for (std::size_t v : perm) one_based.push_back(v + 1);
    std::vector<int> ind(rec.indicators.begin(), rec.indicators.end());
    std::vector<std::vector<std::int64_t>> pts;
    for (const auto& [x, y] : poly.points) pts.push_back({x, y});
    out["n"] = rec.n;
    out["permutation"] = one_based;
    out["indicators"] = ind;
    out["s0"] = rec.s0;
    out["rows"] = rec.rows;
    out["area"] = rec.area;
    out["area_identity"] = rec.area_identity;
    out["boundary"] = pts;
    out["parabola_distance"] = parabola_distance(poly);
    emit(g, out.dump(2));
    return 0;
}

// ---------------------------------------------------------------------------

struct DistanceArgs {
    SimArgs sim;
    std::string a = "y";
    std::string b = "prelimit-factorized";
    std::string functional = "ball:eps=0.25:p=4:rho=0.45:eta=0.35";
};

int cmd_distance(const DistanceArgs& d, const Global& g) {
    RunConfig cfg;
    cfg.samples = d.sim.samples;
    cfg.seed = g.seed;
    cfg.workers = g.workers;
    cfg.validate();
    const Functional f = parse_functional(d.functional);
    std::size_t na = 0, nb = 0;
    const auto sa = make_source(d.a, d.sim, g, &na);
    const auto sb = make_source(d.b, d.sim, g, &nb);
    cfg.n = na;
    const auto start = std::chrono::steady_clock::now();
    const DistanceEstimate est = distance_estimate(cfg, f, *sa, *sb);
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    json out = {{"schema", "1"},
                {"config", cfg.to_json()},
                {"metadata", {{"seed", g.seed}, {"rng", std::string(rng_name)}, {"workers", g.workers}}},
                {"functional", describe(f)},
                {"source_a", sa->describe()},
                {"source_b", sb->describe()},
                {"estimate", est.to_json()}};
    emit(g, with_timestamp(out, secs).dump(2));
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Functional combinatorial CLT toolkit"};
    app.require_subcommand(1);
    app.fallthrough();
    Global g;
    g.workers = default_workers();
    app.add_option("--seed", g.seed, "root seed")->capture_default_str();
    app.add_option("--workers", g.workers, "worker threads (default from PERMCLT_WORKERS)")->check(CLI::PositiveNumber);
    app.add_option("--out", g.out, "output file (default stdout)");
    app.add_option("--format", g.format, "json|csv")->check(CLI::IsMember({"json", "csv"}));

    MatrixArgs margs;
    auto* matrix = app.add_subcommand("matrix", "score matrix summary: s(a), Lambda, sigma, f_n, g_n");
    add_matrix_options(matrix, margs);

    SimArgs sargs;
    std::size_t sim_samples = 1000;
    auto* simulate = app.add_subcommand("simulate", "ensemble statistics of Y, Z_n or Z");
    add_matrix_options(simulate, sargs.matrix);
    simulate->add_option("--source", sargs.source, "y|prelimit|prelimit-factorized|limit|limit-integral|tableau");
    simulate->add_option("--kernel", sargs.kernel, "limit kernel: tableau|bridge|zero|custom-grid:file");
    simulate->add_option("--m", sargs.m, "limit grid resolution");
    simulate->add_option("--refine", sargs.refine, "cell refinement for limit-integral");
    simulate->add_option("--samples", sim_samples, "Monte Carlo samples");
    simulate->add_option("--grid", sargs.grid, "comma-separated evaluation times");
    simulate->add_option("--functional", sargs.functionals, "functional spec (repeatable)");
    simulate->add_option("--config", sargs.config, "rerun from an emitted result JSON");

    VerifyArgs vargs;
    auto* verify = app.add_subcommand("verify", "run verification suites");
    verify->add_option("--suite", vargs.suites, "suite name (repeatable) or 'all'")->required();
    verify->add_option("--n", vargs.n, "override the suite's size parameter");
    verify->add_option("--samples", vargs.samples, "override the suite's sample count");
    verify->add_option("--trials", vargs.trials, "override the suite's trial count");
    verify->add_flag("--quiet", vargs.quiet, "suppress the human-readable table");

    GaussianArgs gargs;
    auto* gaussian = app.add_subcommand("gaussian", "limit process, Kiefer field and Fernique diagnostics");
    gaussian->add_option("--what", gargs.what, "limit|limit-integral|kiefer|fernique");
    gaussian->add_option("--kernel", gargs.kernel, "tableau|bridge|zero|custom-grid:file");
    gaussian->add_option("--m", gargs.m, "grid resolution (v resolution for kiefer)");
    gaussian->add_option("--mw", gargs.mw, "w resolution for kiefer");
    gaussian->add_option("--refine", gargs.refine, "cell refinement for limit-integral");
    gaussian->add_option("--samples", gargs.samples, "Monte Carlo samples");
    gaussian->add_option("--beta", gargs.beta, "Fernique exponent in (0,2]");

    TableauArgs targs;
    auto* tableaux = app.add_subcommand("tableaux", "weak exceedances, boundary, area and exact moments");
    tableaux->add_option("--n", targs.n, "size (random permutation from --seed when --perm is absent)");
    tableaux->add_option("--perm", targs.perm, "comma-separated 1-based permutation");
    tableaux->add_option("--moments", targs.moments, "i j k: closed-form moments")->expected(3);
    tableaux->add_flag("--area-variance", targs.area_variance, "closed-form limit variance of the area");

    DistanceArgs dargs;
    std::size_t dist_samples = 10000;
    auto* distance = app.add_subcommand("distance", "|E g(A) - E g(B)| for two path sources");
    add_matrix_options(distance, dargs.sim.matrix);
    distance->add_option("--a", dargs.a, "first source");
    distance->add_option("--b", dargs.b, "second source");
    distance->add_option("--functional", dargs.functional, "functional spec");
    distance->add_option("--kernel", dargs.sim.kernel, "kernel for limit sources");
    distance->add_option("--m", dargs.sim.m, "grid for limit sources");
    distance->add_option("--samples", dist_samples, "Monte Carlo samples per source");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*matrix) return cmd_matrix(margs, g);
        if (*simulate) {
            sargs.samples = sim_samples;
            return cmd_simulate(sargs, g);
        }
        if (*verify) return cmd_verify(vargs, g);
        if (*gaussian) return cmd_gaussian(gargs, g);
        if (*tableaux) return cmd_tableaux(targs, g);
        if (*distance) {
            dargs.sim.samples = dist_samples;
            return cmd_distance(dargs, g);
        }
    } catch (const Error& e) {
        std::cerr << "error: " << errc_name(e.code()) << ": " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
