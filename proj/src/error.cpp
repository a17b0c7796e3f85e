#include "permclt/error.hpp"

namespace permclt {

std::string_view errc_name(Errc code) noexcept {
    switch (code) {
        case Errc::invalid_input: return "InvalidInput";
        case Errc::zero_matrix: return "ZeroMatrix";
        case Errc::non_positive: return "NonPositive";
        case Errc::invalid_permutation: return "InvalidPermutation";
        case Errc::too_large: return "TooLarge";
        case Errc::degenerate_sample: return "DegenerateSample";
        case Errc::grid_mismatch: return "GridMismatch";
        case Errc::symmetry_violation: return "SymmetryViolation";
        case Errc::not_psd: return "NotPSD";
        case Errc::zero_alpha: return "ZeroAlpha";
        case Errc::index_order: return "IndexOrder";
        case Errc::range_error: return "RangeError";
        case Errc::unknown_suite: return "UnknownSuite";
        case Errc::parse_error: return "ParseError";
        case Errc::config_error: return "ConfigError";
        case Errc::io_error: return "IOError";
    }
    return "Unknown";
}

}  // namespace permclt
