#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "oclb/rng.hpp"
#include "oclb/tensor.hpp"

namespace oclb {

namespace pooling {

/// First R moments per channel: mean, std, standardized central moments.
struct Moments {
    std::size_t order = 3;
    double sigma_floor = 1e-12;
};
struct Avg {};
struct Max {};
struct AvgMax {};
/// alpha * avg + (1 - alpha) * max
struct Mix {
    double alpha = 0.5;
};
/// (E|g|^p)^(1/p)
struct Lp {
    double p = 2.0;
};
/// One activation per channel, sampled proportionally to its min-shifted value.
struct Stochastic {};
/// Top ceil(k * h * w) activations per channel, descending.
struct Rap {
    double k_percent = 0.01;
};

}  // namespace pooling

/// Pooling scheme with exactly the parameters of its kind.
struct PoolingSpec {
    using Params = std::variant<pooling::Moments, pooling::Avg, pooling::Max, pooling::AvgMax, pooling::Mix,
                                pooling::Lp, pooling::Stochastic, pooling::Rap>;
    Params params = pooling::Moments{};

    /// "moments", "avg", "max", "avgmax", "mix", "lp", "stochastic" or "rap".
    std::string kind() const;
    /// Human-readable tag including parameters, e.g. "moments(R=3)".
    std::string describe() const;
    /// Throws ContractError if a parameter is outside its domain.
    void validate() const;
    std::size_t output_dim(std::size_t h, std::size_t w, std::size_t d) const;
    bool needs_rng() const { return std::holds_alternative<pooling::Stochastic>(params); }
};

/// Pooled embedding z = P(g).
struct PooledVector {
    std::vector<double> data;
    PoolingSpec spec;

    std::size_t dim() const noexcept { return data.size(); }
};

/// Concatenated per-channel moments. Coordinate (r - 1) * d + c holds moment r of channel c.
PooledVector pool_moments(const FeatureMap& g, std::size_t order, double sigma_floor = 1e-12);

/// Applies `spec`. `rng` must be present exactly when the kind is stochastic.
PooledVector pool(const FeatureMap& g, const PoolingSpec& spec, RngStream* rng = nullptr);

/// Wasserstein-1 distance between two 1-D empirical distributions.
double moment_drift(std::span<const double> a, std::span<const double> b);

/// Channel-averaged W1 drift for each moment order of moments-pooled embeddings.
/// Entry r - 1 averages moment_drift over channels of coordinate block r.
std::vector<double> moment_drift_by_order(std::span<const PooledVector> clean,
                                          std::span<const PooledVector> shifted, std::size_t channels);

}  // namespace oclb
