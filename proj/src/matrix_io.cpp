#include "permclt/matrix_io.hpp"

#include <charconv>
#include <fstream>
#include <memory>
#include <sstream>
#include <vector>

#include "json.hpp"

#include "permclt/error.hpp"
#include "permclt/rng.hpp"

namespace permclt {

namespace {

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

double parse_real(std::string_view field, std::string_view source, std::size_t row, std::size_t col) {
    field = trim(field);
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
    if (ec != std::errc() || ptr != field.data() + field.size() || field.empty()) {
        fail(Errc::parse_error, std::string(source) + ": row " + std::to_string(row) + ", column " +
                                    std::to_string(col) + ": cannot parse '" + std::string(field) + "'");
    }
    return v;
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

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(Errc::io_error, "cannot open '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::size_t parse_size(std::string_view text, std::string_view what) {
    std::size_t v = 0;
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec != std::errc() || ptr != text.data() + text.size()) {
        fail(Errc::parse_error, "bad " + std::string(what) + " '" + std::string(text) + "'");
    }
    return v;
}

double parse_double(std::string_view text, std::string_view what) {
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec != std::errc() || ptr != text.data() + text.size()) {
        fail(Errc::parse_error, "bad " + std::string(what) + " '" + std::string(text) + "'");
    }
    return v;
}

}  // namespace

RowMatrix parse_matrix_csv(std::string_view text, std::string_view source) {
    std::vector<std::vector<double>> rows;
    std::size_t line_no = 0;
    for (std::string_view line : split(text, '\n')) {
        ++line_no;
        line = trim(line);
        if (line.empty() || line.front() == '#') continue;
        std::vector<double> row;
        const auto fields = split(line, ',');
        for (std::size_t c = 0; c < fields.size(); ++c) row.push_back(parse_real(fields[c], source, line_no, c + 1));
        if (!rows.empty() && row.size() != rows.front().size()) {
            fail(Errc::parse_error, std::string(source) + ": row " + std::to_string(line_no) + " has " +
                                        std::to_string(row.size()) + " fields, expected " +
                                        std::to_string(rows.front().size()));
        }
        rows.push_back(std::move(row));
    }
    if (rows.empty()) fail(Errc::parse_error, std::string(source) + ": no data rows");
    if (rows.size() != rows.front().size()) {
        fail(Errc::parse_error, std::string(source) + ": matrix is " + std::to_string(rows.size()) + "x" +
                                    std::to_string(rows.front().size()) + ", expected square");
    }
    const auto n = static_cast<Eigen::Index>(rows.size());
    RowMatrix out(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < n; ++j) out(i, j) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
    return out;
}

RowMatrix parse_matrix_json(std::string_view text, std::string_view source) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        fail(Errc::parse_error, std::string(source) + ": " + e.what());
    }
    if (!doc.is_object() || !doc.contains("a0") || !doc["a0"].is_array()) {
        fail(Errc::parse_error, std::string(source) + ": expected an object with an \"a0\" array");
    }
    const auto& a0 = doc["a0"];
    const std::size_t n = a0.size();
    if (doc.contains("n") && doc["n"].get<std::size_t>() != n) {
        fail(Errc::parse_error, std::string(source) + ": \"n\" disagrees with the number of rows");
    }
    RowMatrix out(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i) {
        const auto& row = a0[i];
        if (!row.is_array() || row.size() != n) {
            fail(Errc::parse_error, std::string(source) + ": row " + std::to_string(i + 1) + " must have " +
                                        std::to_string(n) + " entries");
        }
        for (std::size_t j = 0; j < n; ++j) {
            if (!row[j].is_number()) {
                fail(Errc::parse_error, std::string(source) + ": row " + std::to_string(i + 1) + ", column " +
                                            std::to_string(j + 1) + " is not a number");
            }
            out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = row[j].get<double>();
        }
    }
    return out;
}

RowMatrix load_matrix_file(const std::string& path) {
    const std::string text = read_file(path);
    if (path.size() >= 5 && path.substr(path.size() - 5) == ".json") return parse_matrix_json(text, path);
    return parse_matrix_csv(text, path);
}

RowMatrix MatrixFamily::dense() const {
    RowMatrix out(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
    std::vector<double> row(n);
    for (std::size_t i = 0; i < n; ++i) {
        rows(i, row);
        for (std::size_t j = 0; j < n; ++j) out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = row[j];
    }
    return out;
}

MatrixFamily parse_family(std::string_view spec) {
    const auto parts = split(spec, ':');
    const std::string_view kind = parts[0];
    MatrixFamily fam;
    fam.spec = std::string(spec);

    auto need = [&](std::size_t count) {
        if (parts.size() != count) {
            fail(Errc::parse_error, "family '" + std::string(spec) + "' expects " + std::to_string(count - 1) +
                                        " parameter(s)");
        }
    };

    if (kind == "exceedance") {
        need(2);
        fam.n = parse_size(parts[1], "size");
        fam.rows = [](std::size_t i, std::span<double> out) {
            for (std::size_t j = 0; j < out.size(); ++j) out[j] = (i <= j) ? 1.0 : 0.0;
        };
    } else if (kind == "uniform") {
        need(3);
        fam.n = parse_size(parts[1], "size");
        const std::uint64_t seed = parse_size(parts[2], "seed");
        fam.rows = [seed](std::size_t i, std::span<double> out) {
            Rng rng(seed, i);
            for (double& v : out) v = rng.uniform();
        };
    } else if (kind == "bernoulli") {
        need(4);
        fam.n = parse_size(parts[1], "size");
        const double p = parse_double(parts[2], "probability");
        if (!(p >= 0.0 && p <= 1.0)) fail(Errc::parse_error, "bernoulli probability must lie in [0,1]");
        const std::uint64_t seed = parse_size(parts[3], "seed");
        fam.rows = [seed, p](std::size_t i, std::span<double> out) {
            Rng rng(seed, i);
            for (double& v : out) v = rng.uniform() < p ? 1.0 : 0.0;
        };
    } else if (kind == "additive") {
        need(3);
        fam.n = parse_size(parts[1], "size");
        const std::uint64_t seed = parse_size(parts[2], "seed");
        const std::size_t n = fam.n;
        auto b = std::make_shared<std::vector<double>>(n);
        auto c = std::make_shared<std::vector<double>>(n);
        Rng rng(seed, 0);
        for (std::size_t k = 0; k < n; ++k) (*b)[k] = rng.uniform();
        for (std::size_t k = 0; k < n; ++k) (*c)[k] = rng.uniform();
        fam.rows = [b, c](std::size_t i, std::span<double> out) {
            for (std::size_t j = 0; j < out.size(); ++j) out[j] = (*b)[i] + (*c)[j];
        };
    } else if (kind == "file") {
        if (parts.size() < 2) fail(Errc::parse_error, "family 'file' needs a path");
        const std::string path(spec.substr(5));
        auto dense = std::make_shared<RowMatrix>(load_matrix_file(path));
        fam.n = static_cast<std::size_t>(dense->rows());
        fam.rows = [dense](std::size_t i, std::span<double> out) {
            for (std::size_t j = 0; j < out.size(); ++j)
                out[j] = (*dense)(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
        };
    } else {
        fail(Errc::parse_error, "unknown matrix family '" + std::string(kind) + "'");
    }
    if (fam.n < 2) fail(Errc::invalid_input, "score matrix needs n >= 2");
    return fam;
}

}  // namespace permclt
