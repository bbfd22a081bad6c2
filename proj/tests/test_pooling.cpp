#include <doctest.h>

#include <cmath>

#include "oclb/errors.hpp"
#include "oclb/pooling.hpp"
#include "oracles.hpp"

using namespace oclb;

namespace {

FeatureMap map_1d(std::vector<float> values, std::size_t h, std::size_t w) {
    return FeatureMap(h, w, 1, std::move(values));
}

FeatureMap random_map(RngStream& rng, std::size_t h, std::size_t w, std::size_t d) {
    std::vector<float> v(h * w * d);
    for (auto& x : v) x = static_cast<float>(rng.uniform(-3.0, 3.0));
    return FeatureMap(h, w, d, std::move(v));
}

std::vector<double> channel(const FeatureMap& g, std::size_t c) {
    std::vector<double> out;
    for (std::size_t y = 0; y < g.height(); ++y) {
        for (std::size_t x = 0; x < g.width(); ++x) out.push_back(g.at(y, x, c));
    }
    return out;
}

PoolingSpec spec(PoolingSpec::Params p) {
    return PoolingSpec{p};
}

}  // namespace

TEST_SUITE("pooling") {

TEST_CASE("moments of {1,2,3,4}") {
    const auto z = pool_moments(map_1d({1, 2, 3, 4}, 2, 2), 3).data;
    REQUIRE(z.size() == 3);
    CHECK(z[0] == doctest::Approx(2.5));
    CHECK(z[1] == doctest::Approx(1.1180339887).epsilon(1e-10));
    CHECK(std::abs(z[2]) < 1e-12);
}

TEST_CASE("constant map has zero standardized moments") {
    const auto z = pool_moments(map_1d({5, 5, 5, 5}, 2, 2), 3, 1e-12).data;
    CHECK(z == std::vector<double>{5, 0, 0});
}

TEST_CASE("moments with R=4 match the two-pass oracle") {
    RngStream rng(1, "moments4");
    const auto g = random_map(rng, 4, 4, 2);
    const auto z = pool_moments(g, 4).data;
    for (std::size_t c = 0; c < 2; ++c) {
        const auto want = oracle::two_pass_moments(channel(g, c), 4, 1e-12);
        for (std::size_t r = 0; r < 4; ++r) CHECK(std::abs(z[r * 2 + c] - want[r]) < 1e-6);
    }
}

TEST_CASE("moments reject R=0 and non-finite input") {
    CHECK_THROWS_AS(pool_moments(map_1d({1}, 1, 1), 0), ContractError);
    CHECK_THROWS_AS(spec(pooling::Moments{0}).validate(), ContractError);
}

TEST_CASE("closed forms of the competitor poolings") {
    const auto g = map_1d({1, 2, 3, 4}, 2, 2);
    CHECK(pool(g, spec(pooling::Avg{})).data == std::vector<double>{2.5});
    CHECK(pool(g, spec(pooling::Max{})).data == std::vector<double>{4});
    CHECK(pool(g, spec(pooling::AvgMax{})).data == std::vector<double>{2.5, 4});
    CHECK(pool(g, spec(pooling::Mix{0.5})).data == std::vector<double>{3.25});
    CHECK(pool(g, spec(pooling::Lp{2.0})).data[0] == doctest::Approx(2.7386127875).epsilon(1e-10));
    CHECK(pool(g, spec(pooling::Rap{0.5})).data == std::vector<double>{4, 3});
}

TEST_CASE("rng must be supplied exactly for stochastic pooling") {
    const auto g = map_1d({1, 2, 3, 4}, 2, 2);
    RngStream rng(0, "pool");
    CHECK_THROWS_AS(pool(g, spec(pooling::Stochastic{})), ContractError);
    CHECK_THROWS_AS(pool(g, spec(pooling::Avg{}), &rng), ContractError);
}

TEST_CASE("stochastic pooling samples proportionally to min-shifted activations") {
    // Shifted values {0,1,2,3}: the minimum is never drawn and 4 is drawn half the time.
    const auto g = map_1d({1, 2, 3, 4}, 2, 2);
    RngStream rng(3, "stoch");
    int counts[5] = {0, 0, 0, 0, 0};
    constexpr int n = 60000;
    for (int i = 0; i < n; ++i) ++counts[static_cast<int>(pool(g, spec(pooling::Stochastic{}), &rng).data[0])];
    CHECK(counts[1] == 0);
    CHECK(std::abs(counts[2] / double(n) - 1.0 / 6) < 0.01);
    CHECK(std::abs(counts[4] / double(n) - 0.5) < 0.01);

    // All-equal channel samples uniformly, which returns the common value.
    RngStream r2(3, "flat");
    CHECK(pool(map_1d({7, 7, 7, 7}, 2, 2), spec(pooling::Stochastic{}), &r2).data == std::vector<double>{7});

    RngStream a(8, "same");
    RngStream b(8, "same");
    RngStream big(1, "map");
    const auto m = random_map(big, 5, 5, 6);
    CHECK(pool(m, spec(pooling::Stochastic{}), &a).data == pool(m, spec(pooling::Stochastic{}), &b).data);
}

TEST_CASE("rap ties break by row-major position") {
    const auto g = map_1d({2, 5, 5, 1, 5, 0}, 2, 3);
    // Only the values are visible, but a stable descending sort keeps count semantics exact.
    CHECK(pool(g, spec(pooling::Rap{0.5})).data == std::vector<double>{5, 5, 5});
    CHECK(pool(g, spec(pooling::Rap{0.01})).data == std::vector<double>{5});
    CHECK(pool(g, spec(pooling::Rap{1.0})).data == std::vector<double>{5, 5, 5, 2, 1, 0});
}

TEST_CASE("parameter domains are validated") {
    CHECK_THROWS_AS(spec(pooling::Mix{1.5}).validate(), ContractError);
    CHECK_THROWS_AS(spec(pooling::Lp{0.5}).validate(), ContractError);
    CHECK_THROWS_AS(spec(pooling::Rap{0.0}).validate(), ContractError);
    CHECK_THROWS_AS(spec(pooling::Rap{1.5}).validate(), ContractError);
    CHECK_THROWS_AS(spec(pooling::Moments{3, -1.0}).validate(), ContractError);
    CHECK_NOTHROW(spec(pooling::Mix{0.0}).validate());
    CHECK_NOTHROW(spec(pooling::Lp{1.0}).validate());
}

TEST_CASE("output dimension matches the declared multiplier for random shapes") {
    RngStream rng(21, "dims");
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t h = 1 + rng.below(6);
        const std::size_t w = 1 + rng.below(6);
        const std::size_t d = 1 + rng.below(5);
        const auto g = random_map(rng, h, w, d);
        const double k = rng.uniform(0.01, 1.0);
        const PoolingSpec specs[] = {spec(pooling::Moments{1 + rng.below(5)}), spec(pooling::Avg{}),
                                     spec(pooling::Max{}),  spec(pooling::AvgMax{}),
                                     spec(pooling::Mix{rng.uniform01()}), spec(pooling::Lp{1.0 + 3 * rng.uniform01()}),
                                     spec(pooling::Stochastic{}), spec(pooling::Rap{k})};
        for (const auto& s : specs) {
            RngStream pr(trial, "p");
            const auto z = pool(g, s, s.needs_rng() ? &pr : nullptr);
            REQUIRE_MESSAGE(z.dim() == s.output_dim(h, w, d), s.describe());
        }
        const auto top = static_cast<std::size_t>(std::ceil(k * static_cast<double>(h * w) - 1e-9));
        CHECK(spec(pooling::Rap{k}).output_dim(h, w, d) == d * std::clamp<std::size_t>(top, 1, h * w));
        CHECK(spec(pooling::AvgMax{}).output_dim(h, w, d) == 2 * d);
    }
}

TEST_CASE("R=1 moments equal avg pooling exactly") {
    RngStream rng(4, "avg");
    for (int i = 0; i < 50; ++i) {
        const auto g = random_map(rng, 1 + rng.below(7), 1 + rng.below(7), 1 + rng.below(9));
        CHECK(pool_moments(g, 1).data == pool(g, spec(pooling::Avg{})).data);
    }
}

TEST_CASE("affine maps move mean and sigma and leave standardized moments fixed") {
    RngStream rng(12, "affine");
    for (int i = 0; i < 100; ++i) {
        const auto g = random_map(rng, 2 + rng.below(6), 2 + rng.below(6), 1 + rng.below(4));
        const double a = rng.uniform(0.1, 5.0);
        const double b = rng.uniform(-5.0, 5.0);
        std::vector<float> t(g.data().begin(), g.data().end());
        for (auto& v : t) v = static_cast<float>(a * v + b);
        const FeatureMap g2(g.height(), g.width(), g.channels(), t);
        const auto z = pool_moments(g, 4).data;
        const auto z2 = pool_moments(g2, 4).data;
        const std::size_t d = g.channels();
        for (std::size_t c = 0; c < d; ++c) {
            CHECK(z2[c] == doctest::Approx(a * z[c] + b).epsilon(1e-5));
            CHECK(z2[d + c] == doctest::Approx(a * z[d + c]).epsilon(1e-5));
            CHECK(std::abs(z2[2 * d + c] - z[2 * d + c]) < 1e-5);
            CHECK(std::abs(z2[3 * d + c] - z[3 * d + c]) < 1e-4);
        }
    }
}

TEST_CASE("moment drift examples") {
    const std::vector<double> a{1, 2, 3};
    CHECK(moment_drift(a, a) == 0.0);
    CHECK(moment_drift(std::vector<double>{0, 0}, std::vector<double>{1, 1}) == 1.0);
    CHECK_THROWS_AS(moment_drift(std::vector<double>{}, a), ContractError);

    RngStream rng(2, "drift");
    std::vector<double> x(1000), y(1000);
    for (std::size_t i = 0; i < x.size(); ++i) {
        x[i] = rng.normal();
        y[i] = x[i] + 0.3;
    }
    CHECK(std::abs(moment_drift(x, y) - 0.3) < 0.02);
}

TEST_CASE("moment drift agrees with the CDF-integral oracle and is a metric") {
    RngStream rng(6, "w1");
    auto sample = [&] {
        std::vector<double> v(1 + rng.below(40));
        for (auto& x : v) x = rng.normal() * 2 + rng.uniform(-1, 1);
        return v;
    };
    for (int i = 0; i < 300; ++i) {
        const auto a = sample();
        const auto b = sample();
        const auto c = sample();
        const double ab = moment_drift(a, b);
        CHECK(ab == doctest::Approx(oracle::w1_cdf(a, b)).epsilon(1e-9));
        CHECK(ab == moment_drift(b, a));
        CHECK(moment_drift(a, a) == 0.0);
        CHECK(moment_drift(a, c) <= ab + moment_drift(b, c) + 1e-12);
    }
}

TEST_CASE("drift by order averages each coordinate block over channels") {
    const PooledVector c1{{0, 1, 0, 0}, spec(pooling::Moments{2})};
    const PooledVector c2{{0, 1, 0, 0}, spec(pooling::Moments{2})};
    const PooledVector s1{{1, 1, 0, 2}, spec(pooling::Moments{2})};
    const PooledVector s2{{1, 1, 0, 2}, spec(pooling::Moments{2})};
    const std::vector<PooledVector> clean{c1, c2}, shifted{s1, s2};
    const auto d = moment_drift_by_order(clean, shifted, 2);
    REQUIRE(d.size() == 2);
    CHECK(d[0] == doctest::Approx(0.5));  // channel 0 moves by 1, channel 1 by 0
    CHECK(d[1] == doctest::Approx(1.0));  // channel 0 by 0, channel 1 by 2
}

TEST_CASE("describe names the kind and its parameters") {
    CHECK(spec(pooling::Moments{3}).describe() == "moments(R=3)");
    CHECK(spec(pooling::Avg{}).kind() == "avg");
    CHECK(spec(pooling::Rap{0.01}).kind() == "rap");
}

}  // TEST_SUITE
