#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "permclt/functionals.hpp"
#include "permclt/gaussian_models.hpp"
#include "permclt/matrix_core.hpp"
#include "permclt/rng.hpp"

namespace permclt {

// Samples are processed in fixed chunks of this size; chunk accumulators are
// merged in chunk order, so results do not depend on the worker count.
inline constexpr std::size_t kChunkSize = 1024;

struct RunConfig {
    std::size_t n = 0;
    std::size_t samples = 1;
    std::uint64_t seed = 0;
    std::size_t workers = 1;
    std::vector<double> grid;
    std::vector<std::string> functionals;

    void validate() const;
    nlohmann::json to_json() const;
    static RunConfig from_json(const nlohmann::json& j);
};

// Streaming means, co-moments and functional moments (Welford updates, Chan
// et al. pairwise merge).
class EnsembleStats {
public:
    EnsembleStats() = default;
    EnsembleStats(std::size_t dim, std::size_t functionals);

    void add(std::span<const double> values, std::span<const double> functional_values = {});
    void merge(const EnsembleStats& other);

    std::size_t count() const noexcept { return count_; }
    std::size_t dim() const noexcept { return dim_; }
    std::size_t functionals() const noexcept { return nfunc_; }

    double mean(std::size_t i) const { return mean_.at(i); }
    // Unbiased (count - 1) estimators; empty when count < 2.
    std::optional<double> variance(std::size_t i) const { return covariance(i, i); }
    std::optional<double> covariance(std::size_t i, std::size_t j) const;
    std::optional<double> se_mean(std::size_t i) const;
    // Normal-theory standard error sqrt((c_ii c_jj + c_ij^2) / (count - 1)).
    std::optional<double> se_covariance(std::size_t i, std::size_t j) const;

    double functional_mean(std::size_t k) const { return fmean_.at(k); }
    std::optional<double> functional_variance(std::size_t k) const;
    std::optional<double> functional_se(std::size_t k) const;

    nlohmann::json to_json(std::span<const double> grid = {}) const;

private:
    std::size_t dim_ = 0;
    std::size_t nfunc_ = 0;
    std::size_t count_ = 0;
    std::vector<double> mean_;
    std::vector<double> comoment_;  // dim x dim, upper triangle maintained
    std::vector<double> fmean_;
    std::vector<double> fm2_;
};

// Calls fn(chunk, begin, end) for every chunk of [0, samples) across `workers`
// threads. Exceptions from fn are rethrown on the calling thread.
void parallel_chunks(std::size_t samples, std::size_t workers,
                     const std::function<void(std::size_t chunk, std::size_t begin, std::size_t end)>& fn);

// Accumulates per chunk and merges the partial results in chunk order.
EnsembleStats run_chunked(std::size_t samples, std::size_t workers, std::size_t dim, std::size_t functionals,
                          const std::function<void(std::size_t begin, std::size_t end, EnsembleStats& acc)>& fn);

// Uniform permutation by Fisher-Yates.
Permutation random_permutation(std::size_t n, Rng& rng);
void random_permutation(Rng& rng, Permutation& perm);

inline constexpr std::size_t kMaxEnumeration = 8;

// Visits each of the n! permutations exactly once, in lexicographic order.
void for_each_permutation(std::size_t n, const std::function<void(std::span<const std::size_t>)>& visit);

// A random path on a fixed grid.
class PathSource {
public:
    virtual ~PathSource() = default;
    virtual std::string name() const = 0;
    virtual std::size_t resolution() const = 0;
    virtual StepPath draw(Rng& rng) const = 0;
    // One path per stream; sources with a cheaper batched route override this.
    virtual std::vector<StepPath> draw_batch(std::span<Rng> streams) const;
    virtual nlohmann::json describe() const;
};

// Y(pi) for a uniform random permutation pi.
class PermutationPathSource final : public PathSource {
public:
    PermutationPathSource(ScoreMatrix score, Normalization s);
    std::string name() const override { return "y"; }
    std::size_t resolution() const override { return score_.n(); }
    StepPath draw(Rng& rng) const override;
    nlohmann::json describe() const override;

private:
    ScoreMatrix score_;
    Normalization norm_;
};

// Z_n, either via the n^2-normal construction or a symmetric factor of sigma.
class PreLimitPathSource final : public PathSource {
public:
    PreLimitPathSource(ScoreMatrix score, Normalization s, bool factorized);
    std::string name() const override { return "prelimit"; }
    std::size_t resolution() const override { return model_.n(); }
    StepPath draw(Rng& rng) const override;
    std::vector<StepPath> draw_batch(std::span<Rng> streams) const override;
    nlohmann::json describe() const override;

    const PreLimitModel& model() const noexcept { return model_; }

private:
    PreLimitModel model_;
    std::unique_ptr<FactorizedPreLimit> factorized_;
};

// Limit process on the grid k/m from a factor of the kernel matrix.
class LimitCholeskySource final : public PathSource {
public:
    LimitCholeskySource(const LimitKernel& kernel, std::size_t m);
    std::string name() const override { return "limit"; }
    std::size_t resolution() const override { return m_; }
    StepPath draw(Rng& rng) const override;
    nlohmann::json describe() const override;

private:
    std::size_t m_;
    std::string kernel_name_;
    LimitSampler sampler_;
};

// Limit process on the grid k/m from the discretized Kiefer integral.
class LimitIntegralSource final : public PathSource {
public:
    LimitIntegralSource(AlphaFamily fam, std::size_t m, std::size_t refine = 1);
    std::string name() const override { return "limit-integral"; }
    std::size_t resolution() const override { return sampler_.m(); }
    StepPath draw(Rng& rng) const override;
    nlohmann::json describe() const override;

private:
    std::string family_;
    std::size_t refine_;
    KieferIntegralSampler sampler_;
};

struct EnsembleResult {
    RunConfig config;
    nlohmann::json source;
    std::vector<std::string> functional_names;
    EnsembleStats stats;

    // The shared result schema: config, metadata, grid, means, covariances,
    // standard_errors, functionals, tests.
    nlohmann::json to_json() const;
};

// Path values at cfg.grid and every functional in cfg.functionals.
EnsembleResult run_ensemble(const RunConfig& cfg, const PathSource& source);

struct DistanceEstimate {
    double mean_a = 0.0;
    double se_a = 0.0;
    double mean_b = 0.0;
    double se_b = 0.0;
    double delta = 0.0;  // |mean_a - mean_b|
    double se = 0.0;     // pooled sqrt(se_a^2 + se_b^2)
    double ci_low = 0.0;  // 95% interval for mean_a - mean_b
    double ci_high = 0.0;

    nlohmann::json to_json() const;
};

// |E g(A) - E g(B)| with both sources run under cfg (same seed and grid).
DistanceEstimate distance_estimate(const RunConfig& cfg, const Functional& g, const PathSource& a,
                                   const PathSource& b);

struct KsResult {
    double statistic = 0.0;
    double p_value = 1.0;
    std::size_t samples = 0;
};

// Kolmogorov survival function Q(x) = 2 sum_{k>=1} (-1)^{k-1} exp(-2 k^2 x^2).
double kolmogorov_q(double x) noexcept;
// Asymptotic critical value of D for the given sample size and level.
double ks_critical_value(std::size_t samples, double alpha);

// One-sample KS test against N(mean, sd^2). Needs at least 100 samples.
KsResult ks_normal(std::span<const double> samples, double mean, double sd);

}  // namespace permclt
