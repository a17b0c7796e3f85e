// Acceptance runner: one PASS/FAIL line per criterion, nonzero exit on any failure.
#include <cstdio>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include "permclt/error.hpp"
#include "permclt/verify.hpp"

using namespace permclt;

namespace {

struct Criterion {
    int id;
    std::string title;
    std::string suite;
    double time_limit;  // seconds; <= 0 when unbounded
};

nlohmann::json strip(nlohmann::json j, bool drop_workers) {
    j.erase("timestamp");
    if (drop_workers) j["metadata"].erase("workers");
    return j;
}

void print_failures(const SuiteReport& r) {
    for (const Check& c : r.checks)
        if (!c.pass)
            std::printf("      failed check: %s (target %.6g, estimate %.6g, se %.3g, tol %.3g)\n", c.name.c_str(),
                        c.target, c.estimate, c.se, c.tolerance);
}

}  // namespace

int main() {
    const std::vector<Criterion> criteria = {
        {1, "exact covariance identity, n = 3..7, 20 matrices each", "exact-cov", 10.0},
        {2, "exact exceedance moments by enumeration, n = 3..7", "moments", 5.0},
        {3, "pre-limit sampler covariance, n = 20, M = 1e5", "prelimit", 30.0},
        {4, "tableau covariance limit, n = 1000, M = 2e4", "tableau-cov", 120.0},
        {5, "area law, n = 1000, M = 2e4", "area", 120.0},
        {6, "row law, n = 1000, M = 2e4", "rows", 0.0},
        {7, "Lyapounov scaling of the exceedance family", "lyapounov", 0.0},
        {8, "Kiefer sampler covariance, 64x64, M = 1e5", "kiefer", 0.0},
        {9, "limit sampler consistency, m = 32, M = 1e5", "limit-consistency", 0.0},
        {10, "distance decay, n = 25 vs 400, M = 1e6", "distance-decay", 0.0},
        {11, "functional catalog plateau, cutoff and Minkowski laws", "functionals", 0.0},
    };

    SuiteOptions base;
    base.workers = 1;
    std::map<std::string, SuiteReport> first;
    bool all = true;

    for (const Criterion& c : criteria) {
        bool ok = false;
        std::string detail;
        try {
            SuiteReport r = run_suite(c.suite, base);
            const bool fast = c.time_limit <= 0.0 || r.elapsed_seconds < c.time_limit;
            ok = r.passed() && fast;
            char buf[128];
            std::snprintf(buf, sizeof buf, " (%zu checks, %.2f s", r.checks.size(), r.elapsed_seconds);
            detail = buf;
            if (c.time_limit > 0.0) {
                std::snprintf(buf, sizeof buf, ", limit %.0f s", c.time_limit);
                detail += buf;
            }
            detail += ")";
            if (!r.passed()) {
                std::printf("FAIL [%d] %s%s\n", c.id, c.title.c_str(), detail.c_str());
                print_failures(r);
                all = false;
                first.emplace(c.suite, std::move(r));
                continue;
            }
            first.emplace(c.suite, std::move(r));
        } catch (const Error& e) {
            detail = std::string(" (error: ") + std::string(errc_name(e.code())) + ": " + e.what() + ")";
        }
        std::printf("%s [%d] %s%s\n", ok ? "PASS" : "FAIL", c.id, c.title.c_str(), detail.c_str());
        std::fflush(stdout);
        all = all && ok;
    }

    // Determinism: every suite re-run at one and at four workers.
    bool same = true;
    std::string mismatch;
    try {
        for (const std::string& name : suite_names()) {
            auto it = first.find(name);
            if (it == first.end()) it = first.emplace(name, run_suite(name, base)).first;
            const nlohmann::json ref = it->second.to_json();
            const nlohmann::json again = run_suite(name, base).to_json();
            if (strip(ref, false) != strip(again, false)) {
                same = false;
                mismatch += " " + name + "@1";
            }
            SuiteOptions four = base;
            four.workers = 4;
            const nlohmann::json par = run_suite(name, four).to_json();
            if (strip(ref, true) != strip(par, true)) {
                same = false;
                mismatch += " " + name + "@4";
            }
        }
    } catch (const Error& e) {
        same = false;
        mismatch += std::string(" error: ") + e.what();
    }
    std::printf("%s [12] determinism of every suite at 1 and 4 workers (%zu suites)%s\n", same ? "PASS" : "FAIL",
                suite_names().size(), same ? "" : (" mismatch:" + mismatch).c_str());
    all = all && same;

    std::printf("%s\n", all ? "ACCEPTANCE PASS" : "ACCEPTANCE FAIL");
    return all ? 0 : 1;
}
