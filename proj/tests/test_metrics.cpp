#include <doctest.h>

#include "oclb/accuracy.hpp"
#include "oclb/errors.hpp"
#include "oclb/metrics.hpp"
#include "oclb/stream.hpp"
#include "oracles.hpp"

using namespace oclb;

namespace {

AccuracyMatrix from_rows(const oracle::Mat& r) {
    AccuracyMatrix m(r.size());
    for (std::size_t t = 0; t < r.size(); ++t) {
        for (std::size_t k = 0; k <= t; ++k) m.set(t, k, r[t][k]);
    }
    return m;
}

oracle::Mat random_rows(RngStream& rng, std::size_t K) {
    oracle::Mat r(K, std::vector<double>(K, 0.0));
    for (std::size_t t = 0; t < K; ++t) {
        for (std::size_t k = 0; k <= t; ++k) r[t][k] = rng.uniform(0.0, 100.0);
    }
    return r;
}

}  // namespace

TEST_SUITE("metrics") {

TEST_CASE("rarg reproduces published gains") {
    CHECK(std::abs(rarg(97.69, 99.21) - 65.8) <= 0.05);
    CHECK(std::abs(rarg(46.35, 47.29) - 1.8) <= 0.05);
    CHECK(std::abs(rarg(93.26, 94.72) - 21.7) <= 0.05);
    CHECK(std::abs(rarg(46.59, 51.92) - 10.0) <= 0.05);
    for (double x : {0.0, 12.5, 99.99}) CHECK(rarg(x, x) == 0.0);
    CHECK_THROWS_AS(rarg(100.0, 100.0), UndefinedError);
    CHECK_THROWS_AS(rarg(101.0, 50.0), ContractError);
}

TEST_CASE("rarg is monotone in the new accuracy with the sign of the difference") {
    RngStream rng(1, "rarg");
    for (int i = 0; i < 1000; ++i) {
        const double a = rng.uniform(0.0, 99.9);
        const double b = rng.uniform(0.0, 100.0);
        const double c = rng.uniform(0.0, 100.0);
        const double rb = rarg(a, b);
        CHECK((rb > 0) == (b > a));
        CHECK((rb < 0) == (b < a));
        if (b < c) CHECK(rb < rarg(a, c));
    }
}

TEST_CASE("bwt, forgetting and plasticity closed forms") {
    CHECK(bwt(from_rows({{100, 0}, {60, 50}})) == -40.0);
    CHECK(forgetting(from_rows({{90, 0}, {70, 80}})) == 20.0);
    CHECK(plasticity(from_rows({{80, 0}, {10, 60}})) == 70.0);
    CHECK(plasticity(from_rows({{100, 0, 0}, {5, 100, 0}, {7, 8, 100}})) == 100.0);
    CHECK(bwt(from_rows({{40, 0, 0}, {40, 40, 0}, {40, 40, 40}})) == 0.0);
    CHECK_THROWS_AS(bwt(from_rows({{50}})), ContractError);
    CHECK_THROWS_AS(forgetting(from_rows({{50}})), ContractError);
}

TEST_CASE("forgetting keeps negative differences unless clamped") {
    const auto m = from_rows({{50, 0}, {80, 90}});
    CHECK(forgetting(m) == -30.0);
    CHECK(forgetting(m, true) == 0.0);
}

TEST_CASE("metrics match direct-summation oracles exactly on 1000 random matrices") {
    RngStream rng(2, "matrices");
    for (int i = 0; i < 1000; ++i) {
        const std::size_t K = 2 + rng.below(12);
        const auto r = random_rows(rng, K);
        const auto m = from_rows(r);
        REQUIRE(bwt(m) == oracle::bwt(r));
        REQUIRE(forgetting(m) == oracle::forgetting(r));
        REQUIRE(plasticity(m) == oracle::plasticity(r));
    }
}

TEST_CASE("perfect memory gives zero forgetting and zero bwt; plasticity ignores off-diagonals") {
    RngStream rng(3, "perfect");
    for (int i = 0; i < 200; ++i) {
        const std::size_t K = 2 + rng.below(10);
        auto r = random_rows(rng, K);
        for (std::size_t k = 0; k < K; ++k) {
            for (std::size_t t = k + 1; t < K; ++t) r[t][k] = r[k][k];
        }
        const auto m = from_rows(r);
        CHECK(forgetting(m) == 0.0);
        CHECK(bwt(m) == 0.0);

        auto r2 = random_rows(rng, K);
        for (std::size_t k = 0; k < K; ++k) r2[k][k] = r[k][k];
        CHECK(plasticity(from_rows(r2)) == plasticity(m));
    }
}

TEST_CASE("accuracy matrix entries are range and shape checked") {
    AccuracyMatrix m(3);
    CHECK_THROWS_AS(m.set(0, 1, 50.0), ContractError);
    CHECK_THROWS_AS(m.set(1, 0, 100.5), ContractError);
    CHECK_THROWS_AS(m.at(0, 2), ContractError);
    CHECK(AccuracyMatrix::defined(2, 1));
    CHECK_FALSE(AccuracyMatrix::defined(1, 2));
}

TEST_CASE("final accuracy is sample weighted") {
    CHECK(final_accuracy(10, 10) == 100.0);
    CHECK(final_accuracy(5, 20) == 25.0);  // constant predictor on 4 balanced classes
    CHECK_THROWS_AS(final_accuracy(0, 0), DataError);
}

TEST_CASE("final accuracy equals the last row re-weighted by per-task test counts") {
    RngStream rng(4, "reweight");
    std::vector<LabeledEmbedding> train, test;
    for (ClassId c = 0; c < 5; ++c) {
        for (int i = 0; i < 8; ++i) train.push_back({{c * 3.0 + rng.normal(), rng.normal()}, c});
        const int n_test = 3 + 4 * c;
        for (int i = 0; i < n_test; ++i) test.push_back({{c * 3.0 + rng.normal(), rng.normal()}, c});
    }
    VectorSource src(train, test);
    Learner l(LearnerConfig{}, 2);
    const auto r = run_stream(build_schedule(src.class_ids(), src.train_labels(), std::nullopt, 2), l, src);
    std::size_t correct = 0;
    std::size_t total = 0;
    const std::size_t last = r.accuracy.tasks() - 1;
    for (std::size_t k = 0; k <= last; ++k) {
        // Per-task accuracies are exact ratios of small integers, so the count is recovered exactly.
        correct += static_cast<std::size_t>(std::llround(r.accuracy.at(last, k) * r.test_counts[k] / 100.0));
        total += r.test_counts[k];
    }
    CHECK(correct == r.final_correct);
    CHECK(total == r.final_total);
    const auto m = compute_metrics(r);
    CHECK(m.acc_final == final_accuracy(correct, total));
    CHECK(m.fwt == 0.0);
}

TEST_CASE("mean and population std over orderings") {
    const std::vector<std::optional<double>> v{1.0, 2.0, 3.0, 4.0};
    const auto s = mean_std(v);
    CHECK(*s.mean == 2.5);
    CHECK(*s.std == doctest::Approx(std::sqrt(1.25)));
    const std::vector<std::optional<double>> gap{1.0, std::nullopt};
    CHECK_FALSE(mean_std(gap).mean.has_value());
}

}  // TEST_SUITE
