#include <doctest.h>

#include <cmath>
#include <set>

#include "oclb/errors.hpp"
#include "oclb/learners.hpp"
#include "oracles.hpp"

using namespace oclb;

namespace {

Learner make(LearnerKind kind, std::size_t dim, LearnerConfig cfg = {}) {
    cfg.kind = kind;
    return Learner(cfg, dim);
}

std::vector<double> gaussian(RngStream& rng, std::size_t dim, double scale = 1.0) {
    std::vector<double> z(dim);
    for (auto& v : z) v = rng.normal() * scale;
    return z;
}

bool close_rel(double got, double want, double rel) {
    return std::abs(got - want) <= rel * std::max(1.0, std::abs(want));
}

}  // namespace

TEST_SUITE("learners") {

TEST_CASE("running mean closed forms") {
    const std::vector<double> none;
    const std::vector<double> z{3, 4};
    const auto [m0, t0] = update_running_mean(none, 0, z);
    CHECK(m0 == z);
    CHECK(t0 == 1);
    const auto [m1, t1] = update_running_mean(std::vector<double>{1}, 1, std::vector<double>{3});
    CHECK(m1 == std::vector<double>{2});
    CHECK(t1 == 2);
    CHECK_THROWS_AS(update_running_mean(std::vector<double>{1, 2}, 1, std::vector<double>{3}), ContractError);
}

TEST_CASE("running mean over 100 vectors equals the batch mean") {
    RngStream rng(1, "mean");
    std::vector<std::vector<double>> xs;
    std::vector<double> m;
    std::uint64_t t = 0;
    for (int i = 0; i < 100; ++i) {
        xs.push_back(gaussian(rng, 7, 3.0));
        std::tie(m, t) = update_running_mean(m, t, xs.back());
    }
    const auto want = oracle::batch_mean(xs);
    for (std::size_t i = 0; i < m.size(); ++i) CHECK(close_rel(m[i], want[i], 1e-6));
}

TEST_CASE("running covariance closed forms") {
    const SymMatrix s0 = update_running_covariance(SymMatrix::identity(2), 0, std::vector<double>{5, 1},
                                                   std::vector<double>{0, 0});
    CHECK(s0 == SymMatrix(2));
    const SymMatrix s1 =
        update_running_covariance(SymMatrix(1), 1, std::vector<double>{2}, std::vector<double>{0});
    CHECK(s1(0, 0) == 1.0);
    CHECK_THROWS_AS(update_running_covariance(SymMatrix(2), 1, std::vector<double>{2}, std::vector<double>{0}),
                    ContractError);
}

TEST_CASE("SLDA covariance after a 500-sample 2-class stream equals the replay oracle") {
    RngStream rng(5, "cov");
    Learner slda = make(LearnerKind::slda, 4);
    std::vector<std::vector<double>> zs;
    std::vector<int> ys;
    for (int i = 0; i < 500; ++i) {
        const int y = i < 250 ? 0 : 1;
        auto z = gaussian(rng, 4);
        z[0] += 3.0 * y;
        slda.observe(z, y);
        zs.push_back(z);
        ys.push_back(y);
    }
    const auto& st = std::get<SldaState>(slda.state());
    CHECK(st.n == 500);
    const auto want = oracle::replay_covariance(zs, ys);
    for (std::size_t i = 0; i < 4; ++i) {
        for (std::size_t j = 0; j < 4; ++j) CHECK(close_rel(st.sigma(i, j), want[i][j], 1e-6));
    }
    CHECK(st.sigma.is_symmetric(1e-12));
}

TEST_CASE("NCM prediction geometry and ties") {
    Learner ncm = make(LearnerKind::ncm, 2);
    CHECK_THROWS_AS(ncm.predict(std::vector<double>{0, 0}), StateError);
    ncm.observe(std::vector<double>{1, 2}, 3);
    const auto& proto = std::get<NcmState>(ncm.state()).prototypes;
    REQUIRE(proto.find(3));
    CHECK(proto.find(3)->mean == std::vector<double>{1, 2});
    CHECK(proto.find(3)->count == 1);

    PrototypeTable t;
    t.observe(std::vector<double>{0, 0}, 0);
    t.observe(std::vector<double>{10, 0}, 1);
    CHECK(ncm_predict(t, std::vector<double>{1, 0}).label == 0);
    CHECK(ncm_predict(t, std::vector<double>{5, 0}).label == 0);
    CHECK(ncm_predict(t, std::vector<double>{6, 0}).label == 1);
    CHECK(ncm_predict(t, std::vector<double>{1, 0}).scores[0].second == doctest::Approx(-1.0));
    CHECK_THROWS_AS(ncm_predict(PrototypeTable{}, std::vector<double>{1, 0}), StateError);
}

TEST_CASE("NCM matches an exhaustive nearest-neighbour scan") {
    RngStream rng(7, "nn");
    PrototypeTable t;
    std::vector<std::vector<double>> pts;
    for (int c = 0; c < 20; ++c) {
        pts.push_back(gaussian(rng, 5, 2.0));
        t.observe(pts.back(), c);
    }
    for (int q = 0; q < 200; ++q) {
        const auto z = gaussian(rng, 5, 2.0);
        CHECK(ncm_predict(t, z).label == static_cast<ClassId>(oracle::nearest(pts, z)));
    }
}

TEST_CASE("SLDA weights closed form with a zero covariance") {
    SldaState s;
    s.prototypes.observe(std::vector<double>{1, 0}, 0);
    s.sigma = SymMatrix(2);
    s.epsilon = 1e-4;
    const auto w = slda_weights(s);
    REQUIRE(w.w.size() == 1);
    CHECK(w.w[0][0] == doctest::Approx(1e4).epsilon(1e-9));
    CHECK(std::abs(w.w[0][1]) < 1e-9);
    CHECK(w.b[0] == doctest::Approx(-0.5e4).epsilon(1e-9));
}

TEST_CASE("SLDA weights match a dense inverse oracle for a random SPD covariance") {
    RngStream rng(9, "slda-dense");
    const std::size_t d = 6;
    SldaState s;
    s.epsilon = 1e-4;
    for (int c = 0; c < 5; ++c) s.prototypes.observe(gaussian(rng, d, 2.0), c);
    oracle::Mat sig(d, std::vector<double>(d, 0.0));
    std::vector<double> a(d * d);
    for (auto& v : a) v = rng.normal();
    s.sigma = SymMatrix(d);
    for (std::size_t i = 0; i < d; ++i) {
        for (std::size_t j = 0; j < d; ++j) {
            double acc = i == j ? 0.5 : 0.0;
            for (std::size_t k = 0; k < d; ++k) acc += a[i * d + k] * a[j * d + k];
            sig[i][j] = acc;
            s.sigma(i, j) = acc;
        }
    }
    const auto inv = oracle::gauss_jordan_inverse(oracle::shrunk(sig, s.epsilon));
    const auto w = slda_weights(s);
    for (std::size_t c = 0; c < 5; ++c) {
        const auto& m = s.prototypes.find(static_cast<ClassId>(c))->mean;
        const auto want = oracle::mat_vec(inv, m);
        double b = 0.0;
        for (std::size_t i = 0; i < d; ++i) {
            CHECK(close_rel(w.w[c][i], want[i], 1e-5));
            b += m[i] * want[i];
        }
        CHECK(close_rel(w.b[c], -0.5 * b, 1e-5));
    }
}

TEST_CASE("SLDA with identity covariance predicts the NCM label") {
    RngStream rng(13, "slda-ncm");
    Learner slda = make(LearnerKind::slda, 3);
    Learner ncm = make(LearnerKind::ncm, 3);
    for (int i = 0; i < 60; ++i) {
        const int y = i % 2;
        auto z = gaussian(rng, 3);
        z[1] += 4.0 * y;
        slda.observe(z, y);
        ncm.observe(z, y);
    }
    auto& st = std::get<SldaState>(slda.state());
    st.sigma = SymMatrix::identity(3);
    st.cache.reset();
    slda.prepare();
    for (int q = 0; q < 500; ++q) {
        const auto z = gaussian(rng, 3, 3.0);
        CHECK(slda.predict(z).label == ncm.predict(z).label);
    }
}

TEST_CASE("SQDA agrees with a dense Gaussian discriminant on an anisotropic problem") {
    RngStream rng(17, "sqda");
    const std::size_t d = 3;
    Learner sqda = make(LearnerKind::sqda, d);
    std::map<int, std::vector<std::vector<double>>> data;
    for (int i = 0; i < 400; ++i) {
        const int y = i % 2;
        auto z = gaussian(rng, d);
        if (y == 0) {
            z[0] *= 4.0;
        } else {
            z[1] *= 3.0;
            z[2] += 1.0;
        }
        sqda.observe(z, y);
        data[y].push_back(z);
    }
    sqda.prepare();
    // Batch population covariance per class.
    std::map<int, oracle::Mat> cov;
    std::map<int, std::vector<double>> mean;
    for (auto& [c, xs] : data) {
        mean[c] = oracle::batch_mean(xs);
        oracle::Mat s(d, std::vector<double>(d, 0.0));
        for (const auto& x : xs) {
            for (std::size_t i = 0; i < d; ++i) {
                for (std::size_t j = 0; j < d; ++j) s[i][j] += (x[i] - mean[c][i]) * (x[j] - mean[c][j]);
            }
        }
        for (auto& row : s) {
            for (auto& v : row) v /= static_cast<double>(xs.size());
        }
        cov[c] = oracle::shrunk(s, 1e-4);
    }
    for (int q = 0; q < 500; ++q) {
        auto z = gaussian(rng, d, 3.0);
        const double s0 = oracle::qda_score(cov[0], mean[0], z);
        const double s1 = oracle::qda_score(cov[1], mean[1], z);
        CHECK(sqda.predict(z).label == (s1 > s0 ? 1 : 0));
    }
}

TEST_CASE("SNB variances equal the batch population variance") {
    RngStream rng(19, "snb");
    Learner snb = make(LearnerKind::snb, 4);
    std::vector<std::vector<double>> xs;
    for (int i = 0; i < 50; ++i) {
        xs.push_back(gaussian(rng, 4, 2.5));
        xs.back()[2] += 100.0;
        snb.observe(xs.back(), 0);
    }
    const auto got = std::get<SnbState>(snb.state()).classes.at(0).variance();
    const auto want = oracle::batch_pop_variance(xs);
    for (std::size_t i = 0; i < 4; ++i) CHECK(close_rel(got[i], want[i], 1e-6));
}

TEST_CASE("SNB ties go to the lower class id") {
    Learner snb = make(LearnerKind::snb, 1);
    for (double v : {-1.0, 1.0}) snb.observe(std::vector<double>{-5 + v}, 4);
    for (double v : {-1.0, 1.0}) snb.observe(std::vector<double>{5 + v}, 2);
    CHECK(snb.predict(std::vector<double>{0.0}).label == 2);
    CHECK(snb.predict(std::vector<double>{-4.0}).label == 4);
}

TEST_CASE("PRCPT is mistake driven") {
    Learner p = make(LearnerKind::prcpt, 2);
    p.observe(std::vector<double>{1, 0}, 0);
    p.observe(std::vector<double>{0, 1}, 1);
    const auto before = std::get<PrcptState>(p.state()).weights;
    CHECK(before.at(0) == std::vector<double>{1, 0});
    p.observe(std::vector<double>{2, 0}, 0);  // predicted 0: no change
    CHECK(std::get<PrcptState>(p.state()).weights == before);
    p.observe(std::vector<double>{0.2, 1}, 0);  // predicted 1: w0 += z, w1 -= z
    const auto& w = std::get<PrcptState>(p.state()).weights;
    CHECK(w.at(0) == std::vector<double>{1.2, 1});
    CHECK(w.at(1) == std::vector<double>{-0.2, 0});
}

TEST_CASE("SOvR scores the margin against the global mean") {
    Learner s = make(LearnerKind::sovr, 2);
    s.observe(std::vector<double>{2, 0}, 0);
    s.observe(std::vector<double>{0, 2}, 1);
    s.observe(std::vector<double>{0, 4}, 1);
    // m0 = (2,0), m1 = (0,3), global = (2/3, 2).
    const auto p = s.predict(std::vector<double>{1, 1});
    CHECK(p.scores[0].second == doctest::Approx(1 * (2 - 2.0 / 3) + 1 * (0 - 2.0)));
    CHECK(p.scores[1].second == doctest::Approx(1 * (0 - 2.0 / 3) + 1 * (3 - 2.0)));
    CHECK(p.label == 1);
}

TEST_CASE("FT takes one softmax cross-entropy step per sample") {
    LearnerConfig cfg;
    cfg.lr = 0.01;
    Learner ft = make(LearnerKind::ft, 2, cfg);
    ft.observe(std::vector<double>{1, 0}, 0);
    CHECK(std::get<FtState>(ft.state()).rows.at(0).w == std::vector<double>{0, 0});
    ft.observe(std::vector<double>{0, 1}, 1);
    const auto& rows = std::get<FtState>(ft.state()).rows;
    CHECK(rows.at(0).w[1] == doctest::Approx(-0.005));
    CHECK(rows.at(1).w[1] == doctest::Approx(0.005));
    CHECK(rows.at(0).b == doctest::Approx(-0.005));
    CHECK(rows.at(1).b == doctest::Approx(0.005));
    CHECK(ft.predict(std::vector<double>{0, 1}).label == 1);
}

TEST_CASE("CBCL respects its prototype budget") {
    LearnerConfig cfg;
    cfg.cbcl_threshold = 0.5;
    cfg.cbcl_max = 5;
    Learner cb = make(LearnerKind::cbcl, 3, cfg);
    RngStream rng(23, "cbcl");
    for (int i = 0; i < 300; ++i) {
        cb.observe(gaussian(rng, 3, 4.0), i % 3);
        for (const auto& [c, cls] : std::get<CbclState>(cb.state()).classes) {
            REQUIRE(cls.centroids.size() <= 5);
            std::uint64_t total = 0;
            for (const auto& p : cls.centroids) {
                REQUIRE(p.count >= 1);
                total += p.count;
            }
            REQUIRE(total == cls.seen);
        }
    }
    CHECK(cb.predict(gaussian(rng, 3)).scores.size() == 3);
}

TEST_CASE("CBCL merges within the threshold and weights classes by inverse frequency") {
    LearnerConfig cfg;
    cfg.cbcl_threshold = 17.0;
    Learner cb = make(LearnerKind::cbcl, 1, cfg);
    cb.observe(std::vector<double>{0}, 0);
    cb.observe(std::vector<double>{2}, 0);
    cb.observe(std::vector<double>{100}, 0);
    const auto& cls = std::get<CbclState>(cb.state()).classes.at(0);
    REQUIRE(cls.centroids.size() == 2);
    CHECK(cls.centroids[0].mean == std::vector<double>{1});
    CHECK(cls.centroids[0].count == 2);

    // Class 1 has seen one sample, class 0 three: class 1 gets the larger weight and wins a near tie.
    cb.observe(std::vector<double>{3.2}, 1);
    CHECK(cb.predict(std::vector<double>{2.0}).label == 1);
}

TEST_CASE("iCaRL buffer never exceeds capacity and evictions never widen the class spread") {
    LearnerConfig cfg;
    cfg.buffer = 12;
    cfg.seed = 4;
    Learner ic = make(LearnerKind::icarl, 2, cfg);
    RngStream rng(29, "icarl");
    std::vector<int> labels;
    for (int c = 0; c < 5; ++c) {
        for (int i = 0; i < 3 + 4 * (c % 2); ++i) labels.push_back(c);
    }
    for (int y : labels) {
        const auto& st = std::get<IcarlState>(ic.state());
        const bool full = st.buffer.size() >= st.effective_capacity();
        auto spread = [&](const IcarlState& s) {
            auto counts = s.buffer_counts();
            counts.try_emplace(y, 0);
            std::size_t lo = SIZE_MAX, hi = 0;
            for (const auto& [c, n] : counts) {
                lo = std::min(lo, n);
                hi = std::max(hi, n);
            }
            return hi - lo;
        };
        const std::size_t before = spread(st);
        ic.observe(gaussian(rng, 2), y);
        const auto& after = std::get<IcarlState>(ic.state());
        REQUIRE(after.buffer.size() <= after.effective_capacity());
        if (full) {
            CHECK(spread(after) <= before);
        }
    }
}

TEST_CASE("iCaRL-2pc keeps two samples per seen class") {
    Learner ic = make(LearnerKind::icarl2pc, 1);
    RngStream rng(31, "2pc");
    for (int c = 0; c < 4; ++c) {
        for (int i = 0; i < 5; ++i) ic.observe(gaussian(rng, 1), c);
    }
    const auto& st = std::get<IcarlState>(ic.state());
    CHECK(st.effective_capacity() == 8);
    for (const auto& [c, n] : st.buffer_counts()) CHECK(n == 2);
}

TEST_CASE("every learner accepts one-shot classes and checks dimensions") {
    for (LearnerKind k : {LearnerKind::ncm, LearnerKind::slda, LearnerKind::sqda, LearnerKind::snb,
                          LearnerKind::prcpt, LearnerKind::sovr, LearnerKind::cbcl, LearnerKind::ft,
                          LearnerKind::icarl, LearnerKind::icarl2pc}) {
        Learner l = make(k, 2);
        CHECK_THROWS_AS(l.predict(std::vector<double>{0, 0}), StateError);
        l.observe(std::vector<double>{0, 1}, 0);
        l.observe(std::vector<double>{1, 0}, 1);
        l.prepare();
        const auto p = l.predict(std::vector<double>{0.9, 0.1});
        CHECK_MESSAGE(p.scores.size() == 2, to_string(k));
        CHECK_THROWS_AS(l.observe(std::vector<double>{1}, 0), ContractError);
        CHECK_THROWS_AS(l.predict(std::vector<double>{1, 2, 3}), ContractError);
        CHECK(parse_learner_kind(to_string(k)) == k);
    }
    CHECK_FALSE(parse_learner_kind("svm").has_value());
}

TEST_CASE("observe performs exactly one transition per call") {
    RngStream rng(37, "single");
    Learner ncm = make(LearnerKind::ncm, 3);
    Learner slda = make(LearnerKind::slda, 3);
    for (int i = 0; i < 40; ++i) {
        const auto z = gaussian(rng, 3);
        ncm.observe(z, i % 4);
        slda.observe(z, i % 4);
    }
    std::uint64_t total = 0;
    for (const auto& [c, p] : std::get<NcmState>(ncm.state()).prototypes.classes) total += p.count;
    CHECK(total == 40);
    CHECK(std::get<SldaState>(slda.state()).n == 40);
}

TEST_CASE("NCM state is invariant to within-class order") {
    RngStream rng(41, "perm");
    std::vector<std::vector<double>> xs;
    for (int i = 0; i < 30; ++i) xs.push_back(gaussian(rng, 4, 5.0));
    Learner a = make(LearnerKind::ncm, 4);
    Learner b = make(LearnerKind::ncm, 4);
    for (const auto& x : xs) a.observe(x, 0);
    for (auto it = xs.rbegin(); it != xs.rend(); ++it) b.observe(*it, 0);
    const auto& ma = std::get<NcmState>(a.state()).prototypes.find(0)->mean;
    const auto& mb = std::get<NcmState>(b.state()).prototypes.find(0)->mean;
    for (std::size_t i = 0; i < 4; ++i) CHECK(close_rel(ma[i], mb[i], 1e-6));
}

}  // TEST_SUITE
