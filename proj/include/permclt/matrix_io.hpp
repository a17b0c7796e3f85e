#pragma once

#include <cstddef>
#include <string>
#include <string_view>

#include "permclt/matrix_core.hpp"

namespace permclt {

// Parses n rows of n comma-separated reals. `source` names the input in errors.
RowMatrix parse_matrix_csv(std::string_view text, std::string_view source = "<csv>");
// Parses {"n": n, "a0": [[...], ...]}.
RowMatrix parse_matrix_json(std::string_view text, std::string_view source = "<json>");
// Dispatches on the file extension (.json, otherwise CSV).
RowMatrix load_matrix_file(const std::string& path);

// A named score-matrix family that can be streamed row by row or materialized.
//   exceedance:n             a0(i,j) = 1{i <= j}
//   uniform:n:seed           iid U(0,1) entries
//   bernoulli:n:p:seed       iid Bernoulli(p) entries
//   additive:n:seed          a0(i,j) = b(i) + c(j), b, c iid U(0,1)
//   file:path                CSV or JSON file
struct MatrixFamily {
    std::string spec;
    std::size_t n = 0;
    RowGenerator rows;

    RowMatrix dense() const;
};

MatrixFamily parse_family(std::string_view spec);

}  // namespace permclt
