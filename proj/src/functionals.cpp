#include "permclt/functionals.hpp"

#include <cmath>
#include <fstream>
#include <sstream>
#include <vector>

#include "permclt/error.hpp"
#include "permclt/numerics.hpp"

namespace permclt {

namespace {

// (eps^2 + y^2)^{p/2}, with repeated multiplication when p/2 is a small integer.
double integrand(double base, double half_p, int int_half_p) {
    if (int_half_p > 0) {
        double r = base;
        for (int k = 1; k < int_half_p; ++k) r *= base;
        return r;
    }
    return std::pow(base, half_p);
}

StepPath load_center(const std::string& path) {
    std::ifstream in(path);
    if (!in) fail(Errc::io_error, "cannot open center path '" + path + "'");
    std::vector<double> vals;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line[0] == '#' || line[0] == 't') continue;
        // Accept either "value" or "t,value" per line.
        const std::size_t comma = line.find(',');
        const std::string field = comma == std::string::npos ? line : line.substr(comma + 1);
        try {
            vals.push_back(std::stod(field));
        } catch (const std::exception&) {
            fail(Errc::parse_error, path + ": row " + std::to_string(line_no) + ": cannot parse '" + field + "'");
        }
    }
    if (vals.size() < 2) fail(Errc::parse_error, path + ": a center path needs at least two values");
    return StepPath(vals.size() - 1, std::move(vals));
}

std::vector<std::string_view> split(std::string_view s, char sep) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    for (;;) {
        const std::size_t pos = s.find(sep, start);
        out.push_back(s.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return out;
}

double parse_value(std::string_view text, std::string_view spec) {
    try {
        std::size_t used = 0;
        const std::string s(text);
        const double v = std::stod(s, &used);
        if (used != s.size()) throw std::invalid_argument("trailing");
        return v;
    } catch (const std::exception&) {
        fail(Errc::parse_error, "functional '" + std::string(spec) + "': bad number '" + std::string(text) + "'");
    }
}

}  // namespace

double h_eps_p(const StepPath& y, double eps, double p) {
    if (!(eps > 0.0)) fail(Errc::non_positive, "eps must be positive");
    if (!(p >= 1.0)) fail(Errc::range_error, "p must be at least 1");
    if (y.n == 0) fail(Errc::invalid_input, "empty path");
    const double half_p = 0.5 * p;
    const int int_half_p = (half_p == std::floor(half_p) && half_p <= 16.0) ? static_cast<int>(half_p) : 0;
    const double e2 = eps * eps;
    // Factor the largest base out so that large p does not overflow.
    double top = 0.0;
    for (std::size_t k = 0; k < y.n; ++k) top = std::max(top, e2 + y.values[k] * y.values[k]);
    CompensatedSum acc;
    for (std::size_t k = 0; k < y.n; ++k) {
        acc.add(integrand((e2 + y.values[k] * y.values[k]) / top, half_p, int_half_p));
    }
    const double mean = acc.value() / static_cast<double>(y.n);
    return std::sqrt(top) * std::pow(mean, 1.0 / p);
}

double phi_cutoff(double x) noexcept {
    if (x <= 0.0) return 1.0;
    if (x >= 1.0) return 0.0;
    const double x2 = x * x;
    const double x4 = x2 * x2;
    return 1.0 - x4 * (35.0 + x * (-84.0 + x * (70.0 - 20.0 * x)));
}

double phi_rho_eta(double x, double rho, double eta) {
    if (!(eta > 0.0)) fail(Errc::non_positive, "eta must be positive");
    return phi_cutoff((x - rho) / eta);
}

void validate(const BallFunctional& g) {
    if (!(g.eps > 0.0)) fail(Errc::non_positive, "ball functional needs eps > 0");
    if (!(g.p >= 1.0)) fail(Errc::range_error, "ball functional needs p >= 1");
    if (!(g.eta > 0.0)) fail(Errc::non_positive, "ball functional needs eta > 0");
}

double ball(const BallFunctional& g, const StepPath& w) {
    validate(g);
    if (g.center.n == 0) return phi_rho_eta(h_eps_p(w, g.eps, g.p), g.rho, g.eta);
    if (g.center.n != w.n) {
        fail(Errc::grid_mismatch, "path on grid " + std::to_string(w.n) + " vs center on grid " +
                                      std::to_string(g.center.n));
    }
    StepPath diff(w.n);
    for (std::size_t k = 0; k <= w.n; ++k) diff.values[k] = w.values[k] - g.center.values[k];
    return phi_rho_eta(h_eps_p(diff, g.eps, g.p), g.rho, g.eta);
}

double norm_scale(const BallFunctional& g) {
    validate(g);
    return g.p * g.p / (g.eps * g.eps * g.eta * g.eta * g.eta);
}

Functional parse_functional(std::string_view spec) {
    const auto parts = split(spec, ':');
    const std::string_view kind = parts[0];
    if (kind == "integral") {
        if (parts.size() != 1) fail(Errc::parse_error, "functional 'integral' takes no parameters");
        return PathIntegral{};
    }
    if (kind == "eval") {
        if (parts.size() != 2 || parts[1].substr(0, 2) != "t=") fail(Errc::parse_error, "expected 'eval:t=<time>'");
        const double t = parse_value(parts[1].substr(2), spec);
        if (t < 0.0 || t > 1.0) fail(Errc::range_error, "eval time must lie in [0,1]");
        return PointEval{t};
    }
    if (kind == "ball") {
        BallFunctional g;
        bool seen[4] = {false, false, false, false};
        for (std::size_t k = 1; k < parts.size(); ++k) {
            const std::size_t eq = parts[k].find('=');
            if (eq == std::string_view::npos) fail(Errc::parse_error, "ball parameter '" + std::string(parts[k]) + "' lacks '='");
            const std::string_view key = parts[k].substr(0, eq);
            const std::string_view val = parts[k].substr(eq + 1);
            if (key == "eps") {
                g.eps = parse_value(val, spec);
                seen[0] = true;
            } else if (key == "p") {
                g.p = parse_value(val, spec);
                seen[1] = true;
            } else if (key == "rho") {
                g.rho = parse_value(val, spec);
                seen[2] = true;
            } else if (key == "eta") {
                g.eta = parse_value(val, spec);
                seen[3] = true;
            } else if (key == "center") {
                if (val != "zero") g.center = load_center(std::string(val));
            } else {
                fail(Errc::parse_error, "unknown ball parameter '" + std::string(key) + "'");
            }
        }
        if (!(seen[0] && seen[1] && seen[2] && seen[3])) {
            fail(Errc::parse_error, "ball functional needs eps, p, rho and eta");
        }
        validate(g);
        return g;
    }
    fail(Errc::parse_error, "unknown functional '" + std::string(spec) + "'");
}

std::string describe(const Functional& f) {
    std::ostringstream os;
    os.precision(17);
    if (const auto* b = std::get_if<BallFunctional>(&f)) {
        os << "ball:eps=" << b->eps << ":p=" << b->p << ":rho=" << b->rho << ":eta=" << b->eta
           << ":center=" << (b->center.n == 0 ? "zero" : "path");
    } else if (const auto* e = std::get_if<PointEval>(&f)) {
        os << "eval:t=" << e->t;
    } else {
        os << "integral";
    }
    return os.str();
}

double evaluate(const Functional& f, const StepPath& w) {
    if (const auto* b = std::get_if<BallFunctional>(&f)) return ball(*b, w);
    if (const auto* e = std::get_if<PointEval>(&f)) return w.at(e->t);
    CompensatedSum acc;
    for (std::size_t k = 0; k < w.n; ++k) acc.add(w.values[k]);
    return acc.value() / static_cast<double>(w.n);
}

}  // namespace permclt
