#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace permclt {

struct Check {
    std::string name;
    double target = 0.0;
    double estimate = 0.0;
    double se = 0.0;         // 0 for exact checks
    double tolerance = 0.0;  // pass iff the check's own rule holds; see `rule`
    std::string rule;        // short description of the pass rule
    bool pass = false;
};

struct SuiteOptions {
    std::size_t n = 0;        // 0 selects the suite default
    std::size_t samples = 0;  // 0 selects the suite default
    std::size_t trials = 0;   // 0 selects the suite default
    std::uint64_t seed = 20261014;
    std::size_t workers = 1;
};

struct SuiteReport {
    std::string suite;
    nlohmann::json config;
    std::vector<Check> checks;
    std::size_t workers = 1;
    double elapsed_seconds = 0.0;

    bool passed() const noexcept;
    // Everything except the "timestamp" member is a pure function of the options.
    nlohmann::json to_json() const;
    std::string table() const;
};

const std::vector<std::string>& suite_names();

// Throws UnknownSuite for names outside suite_names().
SuiteReport run_suite(std::string_view name, const SuiteOptions& opts);

// Samples shared by the "rows" and "area" suites.
struct TableauSamples {
    std::vector<double> rows;
    std::vector<double> area;
    std::vector<double> jitter;  // U(-1/2, 1/2), one per sample
};
TableauSamples sample_tableau_statistics(std::size_t n, std::size_t samples, std::uint64_t seed,
                                         std::size_t workers);

}  // namespace permclt
