#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

namespace permclt {

// Neumaier's variant of Kahan summation; robust when the running total is
// smaller than an addend.
class CompensatedSum {
public:
    void add(double x) noexcept {
        const double t = sum_ + x;
        if (std::abs(sum_) >= std::abs(x)) {
            comp_ += (sum_ - t) + x;
        } else {
            comp_ += (x - t) + sum_;
        }
        sum_ = t;
    }

    CompensatedSum& operator+=(double x) noexcept {
        add(x);
        return *this;
    }

    double value() const noexcept { return sum_ + comp_; }

private:
    double sum_ = 0.0;
    double comp_ = 0.0;
};

inline double compensated_sum(std::span<const double> xs) noexcept {
    CompensatedSum s;
    for (double x : xs) s.add(x);
    return s.value();
}

// Standard normal distribution function.
inline double normal_cdf(double x) noexcept {
    return 0.5 * std::erfc(-x / std::sqrt(2.0));
}

// Evenly spaced points k/m, k = 0..m.
inline std::vector<double> uniform_grid(std::size_t m) {
    std::vector<double> g(m + 1);
    for (std::size_t k = 0; k <= m; ++k) g[k] = static_cast<double>(k) / static_cast<double>(m);
    return g;
}

}  // namespace permclt
