#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <vector>

#include "proreg/prob.hpp"
#include "proreg/rng.hpp"

using namespace proreg;

namespace {

ProbVector random_simplex(Rng& rng, std::size_t k) {
    std::vector<double> p(k);
    double sum = 0.0;
    for (double& v : p) {
        v = 0.05 + rng.uniform();
        sum += v;
    }
    for (double& v : p) v /= sum;
    return clamp_to_simplex(p);
}

}  // namespace

TEST_CASE("one_hot is exact and flagged") {
    ProbVector y = ProbVector::one_hot(2, 4);
    CHECK(y.class_count() == 4);
    CHECK(y.is_one_hot());
    CHECK(y.true_class() == 2);
    CHECK(y[2] == 1.0);
    CHECK(y[0] == 0.0);
    CHECK(y[1] == 0.0);
    CHECK(y[3] == 0.0);
    CHECK(is_exact_one_hot(y));

    CHECK_THROWS(ProbVector::one_hot(0, 1));
    CHECK_THROWS(ProbVector::one_hot(4, 4));
}

TEST_CASE("from_probabilities validates the simplex sum") {
    CHECK_NOTHROW(ProbVector::from_probabilities({0.25, 0.75}));
    CHECK_THROWS(ProbVector::from_probabilities({0.25, 0.80}));
    CHECK_THROWS(ProbVector::from_probabilities({}));
    CHECK_THROWS(ProbVector::from_probabilities({0.5, std::nan("")}));
}

TEST_CASE("from_probabilities floors but never renormalizes") {
    ProbVector p = ProbVector::from_probabilities({0.0, 1.0});
    CHECK(p[0] == kProbFloor);
    CHECK(p[1] == 1.0);  // untouched, so lambda = 0 mixes stay bit-exact
    CHECK_FALSE(is_exact_one_hot(p));
}

TEST_CASE("softmax reproduces the closed form for two logits") {
    ProbVector p = softmax(LogitVector{{1.0, 0.0}}, 1.0);
    CHECK(p[0] == doctest::Approx(0.7310585786300049).epsilon(1e-12));
    CHECK(p[1] == doctest::Approx(0.2689414213699951).epsilon(1e-12));
}

TEST_CASE("softmax is invariant to logit shifts") {
    Rng rng(5);
    for (int trial = 0; trial < 50; ++trial) {
        LogitVector z{{rng.uniform(-4, 4), rng.uniform(-4, 4), rng.uniform(-4, 4)}};
        LogitVector shifted{{z.values[0] + 120.0, z.values[1] + 120.0, z.values[2] + 120.0}};
        ProbVector a = softmax(z, 0.5);
        ProbVector b = softmax(shifted, 0.5);
        for (std::size_t i = 0; i < 3; ++i) {
            CHECK(a[i] == doctest::Approx(b[i]).epsilon(1e-12));
        }
    }
}

TEST_CASE("temperature rescales logits") {
    LogitVector z{{0.3, -0.2, 0.9}};
    LogitVector scaled{{z.values[0] / 0.05, z.values[1] / 0.05, z.values[2] / 0.05}};
    ProbVector a = softmax(z, 0.05);
    ProbVector b = softmax(scaled, 1.0);
    for (std::size_t i = 0; i < 3; ++i) {
        CHECK(a[i] == doctest::Approx(b[i]).epsilon(1e-12));
    }
}

TEST_CASE("softmax output is a floored distribution") {
    // Extreme spread underflows the cold class; the floor catches it.
    ProbVector p = softmax(LogitVector{{100.0, 0.0}}, 0.01);
    CHECK(p[1] >= kProbFloor);
    double sum = p[0] + p[1];
    CHECK(std::abs(sum - 1.0) <= 2 * kProbFloor);

    Rng rng(6);
    for (int trial = 0; trial < 100; ++trial) {
        LogitVector z{{rng.uniform(-8, 8), rng.uniform(-8, 8), rng.uniform(-8, 8),
                       rng.uniform(-8, 8)}};
        ProbVector q = softmax(z, 0.3);
        double s = 0.0;
        for (std::size_t i = 0; i < 4; ++i) {
            CHECK(q[i] >= kProbFloor);
            s += q[i];
        }
        CHECK(std::abs(s - 1.0) <= 4 * kProbFloor);
    }
}

TEST_CASE("softmax rejects bad inputs") {
    CHECK_THROWS(softmax(LogitVector{{1.0}}, 1.0));
    CHECK_THROWS(softmax(LogitVector{{1.0, std::nan("")}}, 1.0));
    CHECK_THROWS(softmax(LogitVector{{1.0, 2.0}}, 0.0));
    CHECK_THROWS(softmax(LogitVector{{1.0, 2.0}}, -1.0));
}

TEST_CASE("norms and dot products behave") {
    CHECK(l2_norm({3.0, 4.0}) == doctest::Approx(5.0).epsilon(1e-15));
    CHECK(dot({1.0, 2.0, 3.0}, {4.0, -5.0, 6.0}) == doctest::Approx(12.0).epsilon(1e-15));
    CHECK_THROWS(dot({1.0}, {1.0, 2.0}));
}

TEST_CASE("normalized produces a unit vector and rejects degenerate input") {
    Embedding e{{3.0, 0.0, 4.0}, false};
    Embedding u = normalized(e);
    CHECK(u.unit_norm);
    CHECK(l2_norm(u.values) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(u.values[0] == doctest::Approx(0.6).epsilon(1e-15));

    CHECK_THROWS(normalized(Embedding{{0.0, 0.0}, false}));
    CHECK_THROWS(normalized(Embedding{{std::nan(""), 1.0}, false}));
}

TEST_CASE("cosine_scores recovers alignment against orthonormal directions") {
    std::vector<Embedding> dirs{
        Embedding{{1.0, 0.0, 0.0}, true},
        Embedding{{0.0, 1.0, 0.0}, true},
    };
    Embedding x = normalized(Embedding{{1.0, 1.0, 0.0}, false});
    LogitVector scores = cosine_scores(x, dirs);
    CHECK(scores.values[0] == doctest::Approx(std::sqrt(0.5)).epsilon(1e-12));
    CHECK(scores.values[1] == doctest::Approx(std::sqrt(0.5)).epsilon(1e-12));

    CHECK(cosine_scores(dirs[0], dirs).values[0] == 1.0);
    CHECK(cosine_scores(dirs[0], dirs).values[1] == 0.0);
}

TEST_CASE("cosine on unit-flagged vectors is the raw dot product") {
    Rng rng(7);
    std::vector<Embedding> dirs;
    for (int k = 0; k < 3; ++k) {
        Embedding e;
        for (int d = 0; d < 6; ++d) e.values.push_back(rng.gaussian());
        dirs.push_back(normalized(e));
    }
    Embedding x;
    for (int d = 0; d < 6; ++d) x.values.push_back(rng.gaussian());
    x = normalized(x);

    LogitVector scores = cosine_scores(x, dirs);
    for (std::size_t k = 0; k < dirs.size(); ++k) {
        // bit-for-bit, not approximately: the linear head init relies on it
        CHECK(scores.values[k] == dot(x.values, dirs[k].values));
    }
}

TEST_CASE("cosine_scores validates its inputs") {
    std::vector<Embedding> one{Embedding{{1.0, 0.0}, true}};
    CHECK_THROWS(cosine_scores(Embedding{{1.0, 0.0}, true}, one));

    std::vector<Embedding> dirs{Embedding{{1.0, 0.0}, true}, Embedding{{0.0, 1.0}, true}};
    CHECK_THROWS(cosine_scores(Embedding{{1.0, 0.0, 0.0}, false}, dirs));
    CHECK_THROWS(cosine_scores(Embedding{{0.0, 0.0}, false}, dirs));
}

TEST_CASE("clamp_to_simplex normalizes nonnegative mass") {
    ProbVector p = clamp_to_simplex({1.0, 3.0});
    CHECK(p[0] == doctest::Approx(0.25).epsilon(1e-12));
    CHECK(p[1] == doctest::Approx(0.75).epsilon(1e-12));

    CHECK_THROWS(clamp_to_simplex({-0.1, 1.1}));
    CHECK_THROWS(clamp_to_simplex({0.0, 0.0}));
    CHECK_THROWS(clamp_to_simplex({}));
}

TEST_CASE("random distributions round-trip through from_probabilities") {
    Rng rng(8);
    for (int trial = 0; trial < 20; ++trial) {
        ProbVector p = random_simplex(rng, 5);
        double sum = 0.0;
        for (std::size_t i = 0; i < 5; ++i) sum += p[i];
        CHECK(std::abs(sum - 1.0) <= 5 * kProbFloor + 1e-9);
    }
}
