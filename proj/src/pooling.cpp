#include "oclb/pooling.hpp"

#include <algorithm>
#include <cstdio>
#include <cmath>
#include <numeric>

#include "oclb/errors.hpp"

namespace oclb {

namespace {

template <class... Ts>
struct overloaded : Ts... {
    using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

std::size_t rap_count(double k_percent, std::size_t positions) {
    // The epsilon keeps products such as 0.07 * 100 from rounding up a slot.
    const auto k = static_cast<std::size_t>(std::ceil(k_percent * static_cast<double>(positions) - 1e-9));
    return std::clamp<std::size_t>(k, 1, positions);
}

void check_finite(const FeatureMap& g) {
    for (float v : g.data()) {
        if (!std::isfinite(v)) {
            throw DataError("pool: non-finite activation");
        }
    }
}

std::vector<double> channel_means(const FeatureMap& g) {
    const std::size_t d = g.channels();
    std::vector<double> sum(d, 0.0);
    const auto data = g.data();
    for (std::size_t p = 0; p < g.positions(); ++p) {
        for (std::size_t c = 0; c < d; ++c) {
            sum[c] += data[p * d + c];
        }
    }
    const double n = static_cast<double>(g.positions());
    for (auto& s : sum) {
        s /= n;
    }
    return sum;
}

std::vector<double> channel_max(const FeatureMap& g) {
    const std::size_t d = g.channels();
    const auto data = g.data();
    std::vector<double> mx(data.begin(), data.begin() + static_cast<std::ptrdiff_t>(d));
    for (std::size_t p = 1; p < g.positions(); ++p) {
        for (std::size_t c = 0; c < d; ++c) {
            mx[c] = std::max(mx[c], static_cast<double>(data[p * d + c]));
        }
    }
    return mx;
}

std::vector<double> channel_values(const FeatureMap& g, std::size_t c) {
    std::vector<double> v(g.positions());
    const auto data = g.data();
    for (std::size_t p = 0; p < v.size(); ++p) {
        v[p] = data[p * g.channels() + c];
    }
    return v;
}

}  // namespace

std::string PoolingSpec::kind() const {
    return std::visit(overloaded{
                          [](const pooling::Moments&) { return std::string("moments"); },
                          [](const pooling::Avg&) { return std::string("avg"); },
                          [](const pooling::Max&) { return std::string("max"); },
                          [](const pooling::AvgMax&) { return std::string("avgmax"); },
                          [](const pooling::Mix&) { return std::string("mix"); },
                          [](const pooling::Lp&) { return std::string("lp"); },
                          [](const pooling::Stochastic&) { return std::string("stochastic"); },
                          [](const pooling::Rap&) { return std::string("rap"); },
                      },
                      params);
}

std::string PoolingSpec::describe() const {
    auto num = [](double v) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "%g", v);
        return std::string(buf);
    };
    return std::visit(overloaded{
                          [](const pooling::Moments& m) { return "moments(R=" + std::to_string(m.order) + ")"; },
                          [&](const pooling::Mix& m) { return "mix(alpha=" + num(m.alpha) + ")"; },
                          [&](const pooling::Lp& m) { return "lp(p=" + num(m.p) + ")"; },
                          [&](const pooling::Rap& m) { return "rap(k=" + num(m.k_percent) + ")"; },
                          [this](const auto&) { return kind(); },
                      },
                      params);
}

void PoolingSpec::validate() const {
    std::visit(overloaded{
                   [](const pooling::Moments& m) {
                       if (m.order < 1) throw ContractError("pooling: moments requires R >= 1");
                       if (!(m.sigma_floor >= 0.0)) throw ContractError("pooling: sigma_floor must be >= 0");
                   },
                   [](const pooling::Mix& m) {
                       if (!(m.alpha >= 0.0 && m.alpha <= 1.0)) throw ContractError("pooling: alpha must be in [0,1]");
                   },
                   [](const pooling::Lp& m) {
                       if (!(m.p >= 1.0) || !std::isfinite(m.p)) throw ContractError("pooling: p must be >= 1");
                   },
                   [](const pooling::Rap& m) {
                       if (!(m.k_percent > 0.0 && m.k_percent <= 1.0))
                           throw ContractError("pooling: k_percent must be in (0,1]");
                   },
                   [](const auto&) {},
               },
               params);
}

std::size_t PoolingSpec::output_dim(std::size_t h, std::size_t w, std::size_t d) const {
    return std::visit(overloaded{
                          [&](const pooling::Moments& m) { return m.order * d; },
                          [&](const pooling::AvgMax&) { return 2 * d; },
                          [&](const pooling::Rap& m) { return d * rap_count(m.k_percent, h * w); },
                          [&](const auto&) { return d; },
                      },
                      params);
}

PooledVector pool_moments(const FeatureMap& g, std::size_t order, double sigma_floor) {
    if (order == 0) {
        throw ContractError("pool_moments: R must be >= 1");
    }
    check_finite(g);
    const std::size_t d = g.channels();
    const std::size_t n = g.positions();
    const auto data = g.data();

    PooledVector out{std::vector<double>(order * d, 0.0),
                     PoolingSpec{pooling::Moments{order, sigma_floor}}};
    const auto mean = channel_means(g);
    std::copy(mean.begin(), mean.end(), out.data.begin());
    if (order == 1) {
        return out;
    }

    // Central power sums: central[(r - 2) * d + c] = sum over positions of (g - mu)^r.
    std::vector<double> central((order - 1) * d, 0.0);
    for (std::size_t p = 0; p < n; ++p) {
        for (std::size_t c = 0; c < d; ++c) {
            const double dev = data[p * d + c] - mean[c];
            double pw = dev;
            for (std::size_t r = 2; r <= order; ++r) {
                pw *= dev;
                central[(r - 2) * d + c] += pw;
            }
        }
    }
    const double inv_n = 1.0 / static_cast<double>(n);
    for (std::size_t c = 0; c < d; ++c) {
        const double sigma = std::sqrt(central[c] * inv_n);
        out.data[d + c] = sigma;
        if (sigma <= sigma_floor) {
            continue;  // standardized moments stay 0
        }
        double sigma_pow = sigma * sigma;
        for (std::size_t r = 3; r <= order; ++r) {
            sigma_pow *= sigma;
            out.data[(r - 1) * d + c] = central[(r - 2) * d + c] * inv_n / sigma_pow;
        }
    }
    return out;
}

PooledVector pool(const FeatureMap& g, const PoolingSpec& spec, RngStream* rng) {
    spec.validate();
    if (spec.needs_rng() != (rng != nullptr)) {
        throw ContractError("pool: an rng stream is required exactly for stochastic pooling");
    }
    if (const auto* m = std::get_if<pooling::Moments>(&spec.params)) {
        return pool_moments(g, m->order, m->sigma_floor);
    }
    check_finite(g);
    const std::size_t d = g.channels();
    const std::size_t n = g.positions();
    const auto data = g.data();

    std::vector<double> out = std::visit(
        overloaded{
            [&](const pooling::Avg&) { return channel_means(g); },
            [&](const pooling::Max&) { return channel_max(g); },
            [&](const pooling::AvgMax&) {
                auto v = channel_means(g);
                const auto mx = channel_max(g);
                v.insert(v.end(), mx.begin(), mx.end());
                return v;
            },
            [&](const pooling::Mix& m) {
                auto v = channel_means(g);
                const auto mx = channel_max(g);
                for (std::size_t c = 0; c < d; ++c) {
                    v[c] = m.alpha * v[c] + (1.0 - m.alpha) * mx[c];
                }
                return v;
            },
            [&](const pooling::Lp& m) {
                std::vector<double> v(d, 0.0);
                for (std::size_t p = 0; p < n; ++p) {
                    for (std::size_t c = 0; c < d; ++c) {
                        v[c] += std::pow(std::abs(static_cast<double>(data[p * d + c])), m.p);
                    }
                }
                for (auto& x : v) {
                    x = std::pow(x / static_cast<double>(n), 1.0 / m.p);
                }
                return v;
            },
            [&](const pooling::Stochastic&) {
                std::vector<double> v(d);
                for (std::size_t c = 0; c < d; ++c) {
                    const auto vals = channel_values(g, c);
                    const double lo = *std::min_element(vals.begin(), vals.end());
                    double total = 0.0;
                    for (double x : vals) total += x - lo;
                    std::size_t pick = 0;
                    if (total > 0.0) {
                        const double u = rng->uniform01() * total;
                        double acc = 0.0;
                        pick = n - 1;
                        for (std::size_t p = 0; p < n; ++p) {
                            acc += vals[p] - lo;
                            if (u < acc) {
                                pick = p;
                                break;
                            }
                        }
                    } else {
                        pick = static_cast<std::size_t>(rng->below(n));
                    }
                    v[c] = vals[pick];
                }
                return v;
            },
            [&](const pooling::Rap& m) {
                const std::size_t k = rap_count(m.k_percent, n);
                std::vector<double> v;
                v.reserve(d * k);
                std::vector<std::size_t> idx(n);
                for (std::size_t c = 0; c < d; ++c) {
                    const auto vals = channel_values(g, c);
                    std::iota(idx.begin(), idx.end(), 0);
                    std::stable_sort(idx.begin(), idx.end(),
                                     [&](std::size_t a, std::size_t b) { return vals[a] > vals[b]; });
                    for (std::size_t i = 0; i < k; ++i) {
                        v.push_back(vals[idx[i]]);
                    }
                }
                return v;
            },
            [&](const pooling::Moments&) { return std::vector<double>{}; },
        },
        spec.params);
    return PooledVector{std::move(out), spec};
}

double moment_drift(std::span<const double> a, std::span<const double> b) {
    if (a.empty() || b.empty()) {
        throw ContractError("moment_drift: empty sample");
    }
    std::vector<double> sa(a.begin(), a.end());
    std::vector<double> sb(b.begin(), b.end());
    std::sort(sa.begin(), sa.end());
    std::sort(sb.begin(), sb.end());
    const std::size_t na = sa.size();
    const std::size_t nb = sb.size();
    if (na == nb) {
        double s = 0.0;
        for (std::size_t i = 0; i < na; ++i) {
            s += std::abs(sa[i] - sb[i]);
        }
        return s / static_cast<double>(na);
    }
    // Walk both quantile functions; mass is counted in units of 1 / (na * nb).
    std::size_t i = 0;
    std::size_t j = 0;
    std::size_t pos = 0;
    std::size_t end_a = nb;
    std::size_t end_b = na;
    double s = 0.0;
    while (i < na && j < nb) {
        const std::size_t next = std::min(end_a, end_b);
        s += std::abs(sa[i] - sb[j]) * static_cast<double>(next - pos);
        pos = next;
        if (end_a == next) {
            ++i;
            end_a += nb;
        }
        if (end_b == next) {
            ++j;
            end_b += na;
        }
    }
    return s / (static_cast<double>(na) * static_cast<double>(nb));
}

std::vector<double> moment_drift_by_order(std::span<const PooledVector> clean,
                                          std::span<const PooledVector> shifted, std::size_t channels) {
    if (clean.empty() || shifted.empty() || channels == 0) {
        throw ContractError("moment_drift_by_order: empty input");
    }
    const std::size_t dim = clean.front().dim();
    if (dim % channels != 0) {
        throw ContractError("moment_drift_by_order: dim is not a multiple of channels");
    }
    for (const auto& z : clean) {
        if (z.dim() != dim) throw ContractError("moment_drift_by_order: dim mismatch");
    }
    for (const auto& z : shifted) {
        if (z.dim() != dim) throw ContractError("moment_drift_by_order: dim mismatch");
    }
    const std::size_t orders = dim / channels;
    std::vector<double> out(orders, 0.0);
    std::vector<double> a(clean.size());
    std::vector<double> b(shifted.size());
    for (std::size_t r = 0; r < orders; ++r) {
        for (std::size_t c = 0; c < channels; ++c) {
            const std::size_t k = r * channels + c;
            for (std::size_t i = 0; i < clean.size(); ++i) a[i] = clean[i].data[k];
            for (std::size_t i = 0; i < shifted.size(); ++i) b[i] = shifted[i].data[k];
            out[r] += moment_drift(a, b);
        }
        out[r] /= static_cast<double>(channels);
    }
    return out;
}

}  // namespace oclb
