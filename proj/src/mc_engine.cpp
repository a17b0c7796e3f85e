#include "permclt/mc_engine.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <numeric>
#include <thread>

#include "permclt/error.hpp"
#include "permclt/numerics.hpp"

namespace permclt {

// ---------------------------------------------------------------------------
// RunConfig

void RunConfig::validate() const {
    if (samples < 1) fail(Errc::config_error, "samples must be at least 1");
    if (workers < 1) fail(Errc::config_error, "workers must be at least 1");
    for (std::size_t k = 0; k < grid.size(); ++k) {
        if (grid[k] < 0.0 || grid[k] > 1.0) fail(Errc::config_error, "grid times must lie in [0,1]");
        if (k > 0 && grid[k] < grid[k - 1]) fail(Errc::config_error, "grid times must be sorted");
    }
}

nlohmann::json RunConfig::to_json() const {
    return {{"n", n},       {"samples", samples}, {"seed", seed},
            {"workers", workers}, {"grid", grid},       {"functionals", functionals}};
}

RunConfig RunConfig::from_json(const nlohmann::json& j) {
    RunConfig cfg;
    cfg.n = j.value("n", std::size_t{0});
    cfg.samples = j.value("samples", std::size_t{1});
    cfg.seed = j.value("seed", std::uint64_t{0});
    cfg.workers = j.value("workers", std::size_t{1});
    cfg.grid = j.value("grid", std::vector<double>{});
    cfg.functionals = j.value("functionals", std::vector<std::string>{});
    cfg.validate();
    return cfg;
}

// ---------------------------------------------------------------------------
// EnsembleStats

EnsembleStats::EnsembleStats(std::size_t dim, std::size_t functionals)
    : dim_(dim),
      nfunc_(functionals),
      mean_(dim, 0.0),
      comoment_(dim * dim, 0.0),
      fmean_(functionals, 0.0),
      fm2_(functionals, 0.0) {}

void EnsembleStats::add(std::span<const double> values, std::span<const double> functional_values) {
    if (values.size() != dim_ || functional_values.size() != nfunc_) {
        fail(Errc::invalid_input, "sample dimension does not match the accumulator");
    }
    ++count_;
    const double inv = 1.0 / static_cast<double>(count_);
    thread_local std::vector<double> delta;
    delta.resize(dim_);
    for (std::size_t i = 0; i < dim_; ++i) {
        delta[i] = values[i] - mean_[i];
        mean_[i] += delta[i] * inv;
    }
    for (std::size_t i = 0; i < dim_; ++i) {
        double* row = comoment_.data() + i * dim_;
        const double di = delta[i];
        for (std::size_t j = i; j < dim_; ++j) row[j] += di * (values[j] - mean_[j]);
    }
    for (std::size_t k = 0; k < nfunc_; ++k) {
        const double d = functional_values[k] - fmean_[k];
        fmean_[k] += d * inv;
        fm2_[k] += d * (functional_values[k] - fmean_[k]);
    }
}

void EnsembleStats::merge(const EnsembleStats& other) {
    if (other.count_ == 0) return;
    if (count_ == 0) {
        *this = other;
        return;
    }
    if (other.dim_ != dim_ || other.nfunc_ != nfunc_) fail(Errc::invalid_input, "cannot merge accumulators of different shape");
    const double na = static_cast<double>(count_);
    const double nb = static_cast<double>(other.count_);
    const double total = na + nb;
    std::vector<double> delta(dim_);
    for (std::size_t i = 0; i < dim_; ++i) delta[i] = other.mean_[i] - mean_[i];
    for (std::size_t i = 0; i < dim_; ++i)
        for (std::size_t j = i; j < dim_; ++j)
            comoment_[i * dim_ + j] += other.comoment_[i * dim_ + j] + delta[i] * delta[j] * na * nb / total;
    for (std::size_t i = 0; i < dim_; ++i) mean_[i] += delta[i] * nb / total;
    for (std::size_t k = 0; k < nfunc_; ++k) {
        const double d = other.fmean_[k] - fmean_[k];
        fm2_[k] += other.fm2_[k] + d * d * na * nb / total;
        fmean_[k] += d * nb / total;
    }
    count_ += other.count_;
}

std::optional<double> EnsembleStats::covariance(std::size_t i, std::size_t j) const {
    if (i >= dim_ || j >= dim_) fail(Errc::invalid_input, "covariance index out of range");
    if (count_ < 2) return std::nullopt;
    if (i > j) std::swap(i, j);
    return comoment_[i * dim_ + j] / static_cast<double>(count_ - 1);
}

std::optional<double> EnsembleStats::se_mean(std::size_t i) const {
    const auto v = variance(i);
    if (!v) return std::nullopt;
    return std::sqrt(std::max(*v, 0.0) / static_cast<double>(count_));
}

std::optional<double> EnsembleStats::se_covariance(std::size_t i, std::size_t j) const {
    const auto cij = covariance(i, j);
    if (!cij) return std::nullopt;
    const double cii = *covariance(i, i);
    const double cjj = *covariance(j, j);
    return std::sqrt(std::max(cii * cjj + *cij * *cij, 0.0) / static_cast<double>(count_ - 1));
}

std::optional<double> EnsembleStats::functional_variance(std::size_t k) const {
    if (k >= nfunc_) fail(Errc::invalid_input, "functional index out of range");
    if (count_ < 2) return std::nullopt;
    return fm2_[k] / static_cast<double>(count_ - 1);
}

std::optional<double> EnsembleStats::functional_se(std::size_t k) const {
    const auto v = functional_variance(k);
    if (!v) return std::nullopt;
    return std::sqrt(std::max(*v, 0.0) / static_cast<double>(count_));
}

namespace {

nlohmann::json opt(const std::optional<double>& v) {
    if (!v) return "insufficient data";
    return *v;
}

}  // namespace

nlohmann::json EnsembleStats::to_json(std::span<const double> grid) const {
    nlohmann::json means = nlohmann::json::array();
    nlohmann::json se_means = nlohmann::json::array();
    nlohmann::json cov = nlohmann::json::array();
    nlohmann::json se_cov = nlohmann::json::array();
    for (std::size_t i = 0; i < dim_; ++i) {
        means.push_back(mean_[i]);
        se_means.push_back(opt(se_mean(i)));
        nlohmann::json row = nlohmann::json::array();
        nlohmann::json se_row = nlohmann::json::array();
        for (std::size_t j = 0; j < dim_; ++j) {
            row.push_back(opt(covariance(i, j)));
            se_row.push_back(opt(se_covariance(i, j)));
        }
        cov.push_back(row);
        se_cov.push_back(se_row);
    }
    nlohmann::json out = {{"count", count_},
                          {"means", means},
                          {"covariances", cov},
                          {"standard_errors", {{"means", se_means}, {"covariances", se_cov}}}};
    if (!grid.empty()) out["grid"] = std::vector<double>(grid.begin(), grid.end());
    return out;
}

// ---------------------------------------------------------------------------
// Parallel driver

void parallel_chunks(std::size_t samples, std::size_t workers,
                     const std::function<void(std::size_t, std::size_t, std::size_t)>& fn) {
    const std::size_t chunks = (samples + kChunkSize - 1) / kChunkSize;
    const std::size_t threads = std::max<std::size_t>(1, std::min(workers, chunks));
    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    auto work = [&] {
        for (;;) {
            const std::size_t c = next.fetch_add(1);
            if (c >= chunks) return;
            try {
                fn(c, c * kChunkSize, std::min(samples, (c + 1) * kChunkSize));
            } catch (...) {
                std::lock_guard<std::mutex> lock(error_mutex);
                if (!error) error = std::current_exception();
                next.store(chunks);
                return;
            }
        }
    };
    if (threads == 1) {
        work();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(threads);
        for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(work);
        for (auto& th : pool) th.join();
    }
    if (error) std::rethrow_exception(error);
}

EnsembleStats run_chunked(std::size_t samples, std::size_t workers, std::size_t dim, std::size_t functionals,
                          const std::function<void(std::size_t, std::size_t, EnsembleStats&)>& fn) {
    const std::size_t chunks = (samples + kChunkSize - 1) / kChunkSize;
    std::vector<EnsembleStats> partial(chunks, EnsembleStats(dim, functionals));
    parallel_chunks(samples, workers, [&](std::size_t c, std::size_t begin, std::size_t end) {
        fn(begin, end, partial[c]);
    });
    EnsembleStats total(dim, functionals);
    for (const auto& p : partial) total.merge(p);
    return total;
}

// ---------------------------------------------------------------------------
// Permutations

void random_permutation(Rng& rng, Permutation& perm) {
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    for (std::size_t i = perm.size(); i > 1; --i) {
        const std::size_t j = rng.below(static_cast<std::uint32_t>(i));
        std::swap(perm[i - 1], perm[j]);
    }
}

Permutation random_permutation(std::size_t n, Rng& rng) {
    if (n < 1) fail(Errc::invalid_input, "permutation size must be at least 1");
    Permutation perm(n);
    random_permutation(rng, perm);
    return perm;
}

void for_each_permutation(std::size_t n, const std::function<void(std::span<const std::size_t>)>& visit) {
    if (n < 1) fail(Errc::invalid_input, "permutation size must be at least 1");
    if (n > kMaxEnumeration) {
        fail(Errc::too_large, "enumeration is capped at n = " + std::to_string(kMaxEnumeration) + ", got " +
                                  std::to_string(n));
    }
    Permutation perm(n);
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    do {
        visit(perm);
    } while (std::next_permutation(perm.begin(), perm.end()));
}

// ---------------------------------------------------------------------------
// Path sources

std::vector<StepPath> PathSource::draw_batch(std::span<Rng> streams) const {
    std::vector<StepPath> out;
    out.reserve(streams.size());
    for (Rng& rng : streams) out.push_back(draw(rng));
    return out;
}

nlohmann::json PathSource::describe() const { return {{"source", name()}, {"resolution", resolution()}}; }

PermutationPathSource::PermutationPathSource(ScoreMatrix score, Normalization s)
    : score_(std::move(score)), norm_(s) {}

StepPath PermutationPathSource::draw(Rng& rng) const {
    const std::size_t n = score_.n();
    thread_local Permutation perm;
    perm.resize(n);
    random_permutation(rng, perm);
    StepPath path(n);
    double acc = 0.0;
    const double inv_s = 1.0 / norm_.s;
    const RowMatrix& a = score_.a();
    for (std::size_t i = 0; i < n; ++i) {
        acc += a(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(perm[i]));
        path.values[i + 1] = acc * inv_s;
    }
    return path;
}

nlohmann::json PermutationPathSource::describe() const {
    return {{"source", "y"}, {"n", score_.n()}, {"normalization", std::string(to_string(norm_.mode))}, {"s", norm_.s}};
}

PreLimitPathSource::PreLimitPathSource(ScoreMatrix score, Normalization s, bool factorized)
    : model_(std::move(score), s) {
    if (factorized) factorized_ = std::make_unique<FactorizedPreLimit>(model_.sigma());
}

StepPath PreLimitPathSource::draw(Rng& rng) const {
    return factorized_ ? factorized_->sample(rng) : model_.sample(rng);
}

std::vector<StepPath> PreLimitPathSource::draw_batch(std::span<Rng> streams) const {
    if (factorized_) return factorized_->sample_batch(streams);
    return PathSource::draw_batch(streams);
}

nlohmann::json PreLimitPathSource::describe() const {
    nlohmann::json j = {{"source", "prelimit"},
                        {"n", model_.n()},
                        {"normalization", std::string(to_string(model_.norm().mode))},
                        {"s", model_.norm().s},
                        {"method", factorized_ ? "factorized" : "exact"}};
    if (factorized_) {
        j["factorization"] = {{"method", factorized_->factor().method}, {"jitter", factorized_->factor().jitter}};
    }
    return j;
}

LimitCholeskySource::LimitCholeskySource(const LimitKernel& kernel, std::size_t m)
    : m_(m), kernel_name_(kernel.name()), sampler_(kernel, uniform_grid(m)) {
    if (m < 1) fail(Errc::invalid_input, "limit grid needs m >= 1");
}

StepPath LimitCholeskySource::draw(Rng& rng) const { return StepPath(m_, sampler_.sample(rng)); }

nlohmann::json LimitCholeskySource::describe() const {
    return {{"source", "limit"},
            {"method", "cholesky"},
            {"kernel", kernel_name_},
            {"m", m_},
            {"factorization", {{"method", sampler_.factor().method}, {"jitter", sampler_.factor().jitter}}}};
}

LimitIntegralSource::LimitIntegralSource(AlphaFamily fam, std::size_t m, std::size_t refine)
    : family_(fam.name), refine_(refine), sampler_(std::move(fam), m, refine) {}

StepPath LimitIntegralSource::draw(Rng& rng) const { return sampler_.sample(rng); }

nlohmann::json LimitIntegralSource::describe() const {
    return {{"source", "limit"}, {"method", "kiefer-integral"}, {"alpha", family_}, {"m", sampler_.m()},
            {"refine", refine_}};
}

// ---------------------------------------------------------------------------
// Ensembles

nlohmann::json EnsembleResult::to_json() const {
    nlohmann::json stats_json = stats.to_json();
    nlohmann::json funcs = nlohmann::json::array();
    for (std::size_t k = 0; k < functional_names.size(); ++k) {
        funcs.push_back({{"functional", functional_names[k]},
                         {"mean", stats.functional_mean(k)},
                         {"variance", opt(stats.functional_variance(k))},
                         {"se", opt(stats.functional_se(k))}});
    }
    return {{"schema", "1"},
            {"config", config.to_json()},
            {"metadata", {{"seed", config.seed}, {"rng", std::string(rng_name)}, {"workers", config.workers},
                          {"chunk_size", kChunkSize}}},
            {"source", source},
            {"count", stats.count()},
            {"grid", config.grid},
            {"means", stats_json["means"]},
            {"covariances", stats_json["covariances"]},
            {"standard_errors", stats_json["standard_errors"]},
            {"functionals", funcs},
            {"tests", nlohmann::json::array()}};
}

EnsembleResult run_ensemble(const RunConfig& cfg, const PathSource& source) {
    cfg.validate();
    std::vector<Functional> funcs;
    EnsembleResult result;
    result.config = cfg;
    result.source = source.describe();
    for (const auto& spec : cfg.functionals) {
        funcs.push_back(parse_functional(spec));
        result.functional_names.push_back(spec);
    }
    const std::size_t dim = cfg.grid.size();
    result.stats = run_chunked(cfg.samples, cfg.workers, dim, funcs.size(),
                               [&](std::size_t begin, std::size_t end, EnsembleStats& acc) {
                                   std::vector<Rng> streams;
                                   streams.reserve(end - begin);
                                   for (std::size_t i = begin; i < end; ++i) streams.emplace_back(cfg.seed, i);
                                   const std::vector<StepPath> paths = source.draw_batch(streams);
                                   std::vector<double> values(dim), fvalues(funcs.size());
                                   for (const StepPath& path : paths) {
                                       for (std::size_t k = 0; k < dim; ++k) values[k] = path.at(cfg.grid[k]);
                                       for (std::size_t k = 0; k < funcs.size(); ++k) fvalues[k] = evaluate(funcs[k], path);
                                       acc.add(values, fvalues);
                                   }
                               });
    return result;
}

nlohmann::json DistanceEstimate::to_json() const {
    return {{"mean_a", mean_a}, {"se_a", se_a}, {"mean_b", mean_b}, {"se_b", se_b},
            {"delta", delta},   {"se", se},     {"ci95", {ci_low, ci_high}}};
}

DistanceEstimate distance_estimate(const RunConfig& cfg, const Functional& g, const PathSource& a,
                                   const PathSource& b) {
    RunConfig local = cfg;
    local.grid.clear();
    local.functionals = {describe(g)};
    auto run = [&](const PathSource& src) {
        return run_chunked(local.samples, local.workers, 0, 1, [&](std::size_t begin, std::size_t end, EnsembleStats& acc) {
            std::vector<Rng> streams;
            streams.reserve(end - begin);
            for (std::size_t i = begin; i < end; ++i) streams.emplace_back(local.seed, i);
            const std::vector<StepPath> paths = src.draw_batch(streams);
            for (const StepPath& path : paths) {
                const double v = evaluate(g, path);
                acc.add({}, std::span<const double>(&v, 1));
            }
        });
    };
    local.validate();
    const EnsembleStats sa = run(a);
    const EnsembleStats sb = run(b);
    DistanceEstimate d;
    d.mean_a = sa.functional_mean(0);
    d.mean_b = sb.functional_mean(0);
    d.se_a = sa.functional_se(0).value_or(0.0);
    d.se_b = sb.functional_se(0).value_or(0.0);
    const double diff = d.mean_a - d.mean_b;
    d.delta = std::abs(diff);
    d.se = std::sqrt(d.se_a * d.se_a + d.se_b * d.se_b);
    d.ci_low = diff - 1.959963984540054 * d.se;
    d.ci_high = diff + 1.959963984540054 * d.se;
    return d;
}

// ---------------------------------------------------------------------------
// Kolmogorov-Smirnov

double kolmogorov_q(double x) noexcept {
    if (x <= 0.0) return 1.0;
    if (x < 0.2) return 1.0;  // the series converges slowly here; Q is 1 to double precision
    double sum = 0.0;
    for (int k = 1; k <= 100; ++k) {
        const double term = std::exp(-2.0 * k * k * x * x);
        sum += (k % 2 == 1 ? term : -term);
        if (term < 1e-17) break;
    }
    return std::clamp(2.0 * sum, 0.0, 1.0);
}

double ks_critical_value(std::size_t samples, double alpha) {
    if (!(alpha > 0.0 && alpha < 1.0)) fail(Errc::range_error, "alpha must lie in (0,1)");
    double lo = 0.2, hi = 5.0;
    for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (kolmogorov_q(mid) > alpha) lo = mid; else hi = mid;
    }
    return 0.5 * (lo + hi) / std::sqrt(static_cast<double>(samples));
}

KsResult ks_normal(std::span<const double> samples, double mean, double sd) {
    if (!(sd > 0.0)) fail(Errc::non_positive, "reference sd must be positive");
    if (samples.size() < 100) fail(Errc::invalid_input, "KS test needs at least 100 samples");
    std::vector<double> x(samples.begin(), samples.end());
    const auto [mn, mx] = std::minmax_element(x.begin(), x.end());
    if (*mn == *mx) fail(Errc::degenerate_sample, "sample has zero spread");
    std::sort(x.begin(), x.end());
    const double m = static_cast<double>(x.size());
    double d = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double f = normal_cdf((x[i] - mean) / sd);
        d = std::max({d, static_cast<double>(i + 1) / m - f, f - static_cast<double>(i) / m});
    }
    return {d, kolmogorov_q(std::sqrt(m) * d), x.size()};
}

}  // namespace permclt
