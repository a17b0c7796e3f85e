#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace permclt {

enum class Errc {
    invalid_input,
    zero_matrix,
    non_positive,
    invalid_permutation,
    too_large,
    degenerate_sample,
    grid_mismatch,
    symmetry_violation,
    not_psd,
    zero_alpha,
    index_order,
    range_error,
    unknown_suite,
    parse_error,
    config_error,
    io_error,
};

std::string_view errc_name(Errc code) noexcept;

// Every failure raised by the library carries one of the codes above.
class Error : public std::runtime_error {
public:
    Error(Errc code, const std::string& what)
        : std::runtime_error(what), code_(code) {}

    Errc code() const noexcept { return code_; }

private:
    Errc code_;
};

[[noreturn]] inline void fail(Errc code, const std::string& what) {
    throw Error(code, what);
}

}  // namespace permclt
