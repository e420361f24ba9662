#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <vector>

#include "proreg/datagen.hpp"
#include "proreg/oracle.hpp"

using namespace proreg;

namespace {

BiasSpec small_spec() {
    BiasSpec spec;
    spec.class_count = 4;
    spec.semantic_dim = 6;
    spec.context_dim = 5;
    spec.train_size = 200;
    spec.id_test_size = 100;
    spec.ood_test_size = 100;
    spec.bias_strength = 0.9;
    spec.ood_bias = 0.25;
    spec.noise_std = 0.3;
    spec.seed = 31;
    return spec;
}

std::size_t argmax(const ProbVector& p) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < p.class_count(); ++i) {
        if (p[i] > p[best]) best = i;
    }
    return best;
}

}  // namespace

TEST_CASE("oracle construction is deterministic and well-formed") {
    BiasSpec spec = small_spec();
    ZeroShotOracle a = build_oracle(spec, 0.5, 7, 0.05);
    ZeroShotOracle b = build_oracle(spec, 0.5, 7, 0.05);

    REQUIRE(a.class_embeddings.size() == spec.class_count);
    CHECK(a.temperature == 0.05);
    CHECK(a.profile.attended_dims == spec.semantic_dim);
    CHECK(a.profile.total_dims == spec.feature_dim());
    CHECK(a.profile.sigma == 0.5);

    for (std::size_t k = 0; k < spec.class_count; ++k) {
        REQUIRE(a.class_embeddings[k].dim() == spec.feature_dim());
        CHECK(a.class_embeddings[k].unit_norm);
        CHECK(std::abs(l2_norm(a.class_embeddings[k].values) - 1.0) < 1e-12);
        CHECK(a.class_embeddings[k].values == b.class_embeddings[k].values);
        // the context block carries exact zero weight
        for (std::uint32_t d = spec.semantic_dim; d < spec.feature_dim(); ++d) {
            CHECK(a.class_embeddings[k].values[d] == 0.0);
        }
    }

    ZeroShotOracle c = build_oracle(spec, 0.5, 8, 0.05);
    bool any_differs = false;
    for (std::size_t k = 0; k < spec.class_count; ++k) {
        if (a.class_embeddings[k].values != c.class_embeddings[k].values) any_differs = true;
    }
    CHECK(any_differs);
}

TEST_CASE("sigma zero keeps the planted semantic directions") {
    BiasSpec spec = small_spec();
    ZeroShotOracle oracle = build_oracle(spec, 0.0, 7);
    PlantedDirections dirs = planted_directions(spec);
    for (std::size_t k = 0; k < spec.class_count; ++k) {
        for (std::uint32_t d = 0; d < spec.semantic_dim; ++d) {
            CHECK(std::abs(oracle.class_embeddings[k].values[d] - dirs.semantic[k][d]) < 1e-12);
        }
    }
}

TEST_CASE("build_oracle rejects bad parameters") {
    BiasSpec spec = small_spec();
    CHECK_THROWS(build_oracle(spec, -0.1, 7));
    CHECK_THROWS(build_oracle(spec, 0.5, 7, 0.0));
    CHECK_THROWS(build_oracle(spec, 0.5, 7, -1.0));
}

TEST_CASE("predictions are proper distributions") {
    BiasSpec spec = small_spec();
    Dataset ds = generate(spec);
    ZeroShotOracle oracle = build_oracle(spec, 0.5, 7, 0.05);
    for (std::size_t i = 0; i < 20; ++i) {
        ProbVector p = zero_shot_predict(oracle, ds.samples[i].x);
        REQUIRE(p.class_count() == spec.class_count);
        double sum = 0.0;
        for (std::size_t k = 0; k < p.class_count(); ++k) {
            CHECK(p[k] >= kProbFloor);
            sum += p[k];
        }
        CHECK(std::abs(sum - 1.0) < 1e-6);
    }

    Embedding wrong_dim{std::vector<double>(spec.feature_dim() + 1, 0.1), false};
    CHECK_THROWS(zero_shot_predict(oracle, wrong_dim));
}

TEST_CASE("the oracle is blind to the context block") {
    BiasSpec spec = small_spec();
    Dataset ds = generate(spec);
    ZeroShotOracle oracle = build_oracle(spec, 0.5, 7, 0.05);

    for (std::size_t i = 0; i < 50; ++i) {
        const Sample& s = ds.samples[i];
        // reversing the context block preserves the norm but scrambles the
        // context direction entirely
        Embedding swapped = s.x;
        std::reverse(swapped.values.begin() + spec.semantic_dim, swapped.values.end());
        ProbVector before = zero_shot_predict(oracle, s.x);
        ProbVector after = zero_shot_predict(oracle, swapped);
        for (std::size_t k = 0; k < before.class_count(); ++k) {
            REQUIRE(std::abs(before[k] - after[k]) < 1e-12);
        }
    }
}

TEST_CASE("a noiseless oracle solves the noiseless task everywhere") {
    BiasSpec spec = small_spec();
    spec.noise_std = 0.0;
    Dataset ds = generate(spec);
    ZeroShotOracle oracle = build_oracle(spec, 0.0, 7);
    for (const Sample& s : ds.samples) {
        REQUIRE(argmax(zero_shot_predict(oracle, s.x)) == s.label);
    }
}

TEST_CASE("caching fills every sample and records provenance") {
    BiasSpec spec = small_spec();
    Dataset ds = generate(spec);
    REQUIRE_FALSE(ds.has_zero_shot);

    ZeroShotOracle oracle = build_oracle(spec, 0.5, 7, 0.05);
    cache_zero_shot_labels(oracle, ds);

    CHECK(ds.has_zero_shot);
    CHECK(ds.oracle_echo.sigma == 0.5);
    CHECK(ds.oracle_echo.seed == 7);
    CHECK(ds.oracle_echo.temperature == 0.05);
    for (const Sample& s : ds.samples) {
        REQUIRE(s.y_zs.has_value());
        REQUIRE(s.y_zs->class_count() == spec.class_count);
    }

    // idempotent: a second pass rewrites identical values
    std::vector<double> first = ds.samples[0].y_zs->probs();
    cache_zero_shot_labels(oracle, ds);
    CHECK(ds.samples[0].y_zs->probs() == first);

    // cached values equal fresh predictions
    for (std::size_t i = 0; i < 20; ++i) {
        ProbVector fresh = zero_shot_predict(oracle, ds.samples[i].x);
        CHECK(ds.samples[i].y_zs->probs() == fresh.probs());
    }
}

TEST_CASE("caching rejects an oracle built for different dimensions") {
    BiasSpec spec = small_spec();
    Dataset ds = generate(spec);

    BiasSpec other = spec;
    other.semantic_dim = 8;
    ZeroShotOracle mismatched = build_oracle(other, 0.5, 7);
    CHECK_THROWS(cache_zero_shot_labels(mismatched, ds));
}

TEST_CASE("higher sigma degrades zero-shot accuracy") {
    BiasSpec spec = small_spec();
    spec.id_test_size = 1000;
    Dataset ds = generate(spec);

    auto accuracy = [&](double sigma) {
        ZeroShotOracle oracle = build_oracle(spec, sigma, 7);
        std::size_t hits = 0;
        for (const Sample& s : ds.id_test()) {
            if (argmax(zero_shot_predict(oracle, s.x)) == s.label) ++hits;
        }
        return static_cast<double>(hits) / static_cast<double>(ds.id_test().size());
    };

    double clean = accuracy(0.0);
    double noisy = accuracy(2.5);
    CHECK(clean > noisy);
    CHECK(clean > 0.9);
}
