#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include "proreg/datagen.hpp"
#include "proreg/oracle.hpp"
#include "proreg/serialize.hpp"

using namespace proreg;

namespace {

BiasSpec small_spec() {
    BiasSpec spec;
    spec.class_count = 4;
    spec.semantic_dim = 6;
    spec.context_dim = 5;
    spec.train_size = 400;
    spec.id_test_size = 200;
    spec.ood_test_size = 200;
    spec.bias_strength = 0.9;
    spec.ood_bias = 0.25;
    spec.noise_std = 0.3;
    spec.seed = 21;
    return spec;
}

// The context block is a positive multiple of exactly one planted context
// direction, so the drawn context class can be read back exactly.
std::uint32_t context_class(const Sample& s, const Dataset& ds) {
    const BiasSpec& spec = ds.spec;
    std::uint32_t best = 0;
    double best_dot = -1e300;
    for (std::uint32_t k = 0; k < spec.class_count; ++k) {
        double d = 0.0;
        for (std::uint32_t j = 0; j < spec.context_dim; ++j) {
            d += s.x.values[spec.semantic_dim + j] * ds.directions.context[k][j];
        }
        if (d > best_dot) {
            best_dot = d;
            best = k;
        }
    }
    return best;
}

double agreement_rate(std::span<const Sample> split, const Dataset& ds) {
    std::size_t agree = 0;
    for (const Sample& s : split) {
        if (context_class(s, ds) == s.label) ++agree;
    }
    return static_cast<double>(agree) / static_cast<double>(split.size());
}

bool samples_identical(const Sample& a, const Sample& b) {
    if (a.label != b.label || a.split != b.split) return false;
    if (a.x.values != b.x.values) return false;
    bool a_zs = a.y_zs.has_value(), b_zs = b.y_zs.has_value();
    if (a_zs != b_zs) return false;
    if (a_zs && a.y_zs->probs() != b.y_zs->probs()) return false;
    return true;
}

std::string temp_path(const char* name) {
    return std::string("datagen_test_") + name + ".bin";
}

}  // namespace

TEST_CASE("validate rejects impossible specs") {
    BiasSpec spec = small_spec();
    CHECK_NOTHROW(validate(spec));

    BiasSpec few_dims = spec;
    few_dims.semantic_dim = 3;  // fewer than class_count: no orthonormal set exists
    CHECK_THROWS(validate(few_dims));

    BiasSpec one_class = spec;
    one_class.class_count = 1;
    CHECK_THROWS(validate(one_class));

    BiasSpec empty_split = spec;
    empty_split.id_test_size = 0;
    CHECK_THROWS(validate(empty_split));

    BiasSpec bad_rate = spec;
    bad_rate.bias_strength = 1.5;
    CHECK_THROWS(validate(bad_rate));

    BiasSpec bad_noise = spec;
    bad_noise.noise_std = -0.1;
    CHECK_THROWS(validate(bad_noise));
}

TEST_CASE("planted directions are orthonormal") {
    BiasSpec spec = small_spec();
    PlantedDirections dirs = planted_directions(spec);
    REQUIRE(dirs.semantic.size() == spec.class_count);
    REQUIRE(dirs.context.size() == spec.class_count);

    for (const auto& block : {dirs.semantic, dirs.context}) {
        for (std::size_t a = 0; a < block.size(); ++a) {
            CHECK(std::abs(l2_norm(block[a]) - 1.0) < 1e-12);
            for (std::size_t b = 0; b < a; ++b) {
                CHECK(std::abs(dot(block[a], block[b])) < 1e-9);
            }
        }
    }

    // a pure function of the spec
    PlantedDirections again = planted_directions(spec);
    CHECK(again.semantic == dirs.semantic);
    CHECK(again.context == dirs.context);
}

TEST_CASE("generate produces the declared layout") {
    BiasSpec spec = small_spec();
    Dataset ds = generate(spec);

    REQUIRE(ds.samples.size() == 800);
    CHECK(ds.train().size() == 400);
    CHECK(ds.id_test().size() == 200);
    CHECK(ds.ood_test().size() == 200);
    CHECK_FALSE(ds.has_zero_shot);

    for (const Sample& s : ds.train()) CHECK(s.split == Split::train);
    for (const Sample& s : ds.id_test()) CHECK(s.split == Split::id_test);
    for (const Sample& s : ds.ood_test()) CHECK(s.split == Split::ood_test);

    for (const Sample& s : ds.samples) {
        REQUIRE(s.label < spec.class_count);
        REQUIRE(s.x.values.size() == spec.feature_dim());
        REQUIRE(s.x.unit_norm);
        REQUIRE(std::abs(l2_norm(s.x.values) - 1.0) < 1e-12);
    }
}

TEST_CASE("labels are exactly balanced per split") {
    Dataset ds = generate(small_spec());
    for (Split split : {Split::train, Split::id_test, Split::ood_test}) {
        std::vector<int> counts(ds.spec.class_count, 0);
        for (const Sample& s : ds.split(split)) ++counts[s.label];
        for (int c : counts) {
            // split sizes here are multiples of the class count
            CHECK(c == static_cast<int>(ds.split(split).size() / ds.spec.class_count));
        }
    }
}

TEST_CASE("context agreement tracks the configured rates") {
    BiasSpec spec = small_spec();
    spec.train_size = 4000;
    spec.id_test_size = 2000;
    spec.ood_test_size = 2000;
    Dataset ds = generate(spec);

    CHECK(std::abs(agreement_rate(ds.train(), ds) - 0.9) < 0.03);
    CHECK(std::abs(agreement_rate(ds.id_test(), ds) - 0.9) < 0.05);
    CHECK(std::abs(agreement_rate(ds.ood_test(), ds) - 0.25) < 0.07);
}

TEST_CASE("matching ood_bias removes the distribution shift") {
    BiasSpec spec = small_spec();
    spec.ood_test_size = 2000;
    spec.ood_bias = spec.bias_strength;
    Dataset ds = generate(spec);
    CHECK(std::abs(agreement_rate(ds.ood_test(), ds) - 0.9) < 0.05);
}

TEST_CASE("the semantic block carries the label signal") {
    Dataset ds = generate(small_spec());
    double own = 0.0, other = 0.0;
    std::size_t own_n = 0, other_n = 0;
    for (const Sample& s : ds.train()) {
        for (std::uint32_t k = 0; k < ds.spec.class_count; ++k) {
            double d = 0.0;
            for (std::uint32_t j = 0; j < ds.spec.semantic_dim; ++j) {
                d += s.x.values[j] * ds.directions.semantic[k][j];
            }
            if (k == s.label) {
                own += d;
                ++own_n;
            } else {
                other += d;
                ++other_n;
            }
        }
    }
    CHECK(own / static_cast<double>(own_n) > 0.2);
    CHECK(std::abs(other / static_cast<double>(other_n)) < 0.1);
}

TEST_CASE("generation is deterministic in the seed") {
    BiasSpec spec = small_spec();
    Dataset a = generate(spec);
    Dataset b = generate(spec);
    REQUIRE(a.samples.size() == b.samples.size());
    for (std::size_t i = 0; i < a.samples.size(); ++i) {
        REQUIRE(samples_identical(a.samples[i], b.samples[i]));
    }

    spec.seed = 99;
    Dataset c = generate(spec);
    bool any_differs = false;
    for (std::size_t i = 0; i < a.samples.size(); ++i) {
        if (a.samples[i].x.values != c.samples[i].x.values) any_differs = true;
    }
    CHECK(any_differs);
}

TEST_CASE("each split draws from its own stream") {
    BiasSpec big = small_spec();
    BiasSpec small = big;
    small.ood_test_size = 100;

    Dataset a = generate(big);
    Dataset b = generate(small);
    // shrinking the ood split must not move a single train or id_test byte
    for (std::size_t i = 0; i < a.train().size(); ++i) {
        REQUIRE(samples_identical(a.train()[i], b.train()[i]));
    }
    for (std::size_t i = 0; i < a.id_test().size(); ++i) {
        REQUIRE(samples_identical(a.id_test()[i], b.id_test()[i]));
    }
}

TEST_CASE("dataset files round-trip bit-exactly") {
    BiasSpec spec = small_spec();
    Dataset ds = generate(spec);

    SUBCASE("without the zero-shot cache") {
        std::string path = temp_path("plain");
        save_dataset(ds, path);
        Dataset back = load_dataset(path);
        CHECK_FALSE(back.has_zero_shot);
        REQUIRE(back.samples.size() == ds.samples.size());
        for (std::size_t i = 0; i < ds.samples.size(); ++i) {
            REQUIRE(samples_identical(ds.samples[i], back.samples[i]));
        }
        CHECK(back.directions.semantic == ds.directions.semantic);
        CHECK(back.directions.context == ds.directions.context);
        CHECK(back.spec.seed == spec.seed);
        std::remove(path.c_str());
    }

    SUBCASE("with the zero-shot cache") {
        ZeroShotOracle oracle = build_oracle(spec, 0.4, 77);
        cache_zero_shot_labels(oracle, ds);
        std::string path = temp_path("cached");
        save_dataset(ds, path);
        Dataset back = load_dataset(path);
        CHECK(back.has_zero_shot);
        CHECK(back.oracle_echo.sigma == 0.4);
        CHECK(back.oracle_echo.seed == 77);
        CHECK(back.oracle_echo.temperature == oracle.temperature);
        for (std::size_t i = 0; i < ds.samples.size(); ++i) {
            REQUIRE(samples_identical(ds.samples[i], back.samples[i]));
        }
        std::remove(path.c_str());
    }
}

TEST_CASE("version 1 files still load") {
    BiasSpec spec = small_spec();
    Dataset ds = generate(spec);

    // a version 1 body: spec, directions, records; no cache fields anywhere
    ByteWriter body;
    body.u32(spec.class_count);
    body.u32(spec.semantic_dim);
    body.u32(spec.context_dim);
    body.u64(spec.train_size);
    body.u64(spec.id_test_size);
    body.u64(spec.ood_test_size);
    body.f64(spec.bias_strength);
    body.f64(spec.ood_bias);
    body.f64(spec.noise_std);
    body.u64(spec.seed);
    for (const auto& row : ds.directions.semantic) {
        for (double v : row) body.f64(v);
    }
    for (const auto& row : ds.directions.context) {
        for (double v : row) body.f64(v);
    }
    for (const Sample& s : ds.samples) {
        body.u32(s.label);
        for (double v : s.x.values) body.f64(v);
    }

    std::string path = temp_path("v1");
    write_file(path, seal_envelope("PRDS", 1, body.data()));
    Dataset back = load_dataset(path);
    CHECK_FALSE(back.has_zero_shot);
    REQUIRE(back.samples.size() == ds.samples.size());
    for (std::size_t i = 0; i < ds.samples.size(); ++i) {
        REQUIRE(samples_identical(ds.samples[i], back.samples[i]));
    }
    std::remove(path.c_str());
}

TEST_CASE("damaged dataset files fail loudly") {
    BiasSpec spec = small_spec();
    spec.train_size = 40;
    spec.id_test_size = 20;
    spec.ood_test_size = 20;
    Dataset ds = generate(spec);
    std::string path = temp_path("damage");
    save_dataset(ds, path);
    std::vector<unsigned char> file = read_file(path);

    SUBCASE("flipped body byte") {
        std::vector<unsigned char> bad = file;
        bad[40] ^= 0x20;
        write_file(path, bad);
        CHECK_THROWS_AS(load_dataset(path), ChecksumError);
    }

    SUBCASE("truncated body") {
        std::vector<unsigned char> cut(file.begin(), file.end() - 100);
        write_file(path, cut);
        CHECK_THROWS_AS(load_dataset(path), ChecksumError);
    }

    SUBCASE("header stub") {
        std::vector<unsigned char> stub(file.begin(), file.begin() + 6);
        write_file(path, stub);
        CHECK_THROWS_AS(load_dataset(path), TruncationError);
    }

    SUBCASE("foreign magic") {
        std::vector<unsigned char> bad = file;
        bad[0] = 'X';
        write_file(path, bad);
        CHECK_THROWS_AS(load_dataset(path), FormatError);
    }

    SUBCASE("future version") {
        std::vector<unsigned char> body(file.begin() + 12, file.end());
        write_file(path, seal_envelope("PRDS", 9, body));
        CHECK_THROWS_AS(load_dataset(path), VersionError);
    }

    std::remove(path.c_str());
}

TEST_CASE("an out-of-range label in the file is a FormatError") {
    BiasSpec spec = small_spec();
    spec.train_size = 4;
    spec.id_test_size = 4;
    spec.ood_test_size = 4;
    Dataset ds = generate(spec);

    ByteWriter body;
    body.u32(spec.class_count);
    body.u32(spec.semantic_dim);
    body.u32(spec.context_dim);
    body.u64(spec.train_size);
    body.u64(spec.id_test_size);
    body.u64(spec.ood_test_size);
    body.f64(spec.bias_strength);
    body.f64(spec.ood_bias);
    body.f64(spec.noise_std);
    body.u64(spec.seed);
    for (const auto& row : ds.directions.semantic) {
        for (double v : row) body.f64(v);
    }
    for (const auto& row : ds.directions.context) {
        for (double v : row) body.f64(v);
    }
    for (const Sample& s : ds.samples) {
        body.u32(spec.class_count);  // every label out of range
        for (double v : s.x.values) body.f64(v);
    }

    std::string path = temp_path("badlabel");
    write_file(path, seal_envelope("PRDS", 1, body.data()));
    CHECK_THROWS_AS(load_dataset(path), FormatError);
    std::remove(path.c_str());
}

TEST_CASE("jsonl export writes one line per sample plus a header") {
    BiasSpec spec = small_spec();
    spec.train_size = 8;
    spec.id_test_size = 4;
    spec.ood_test_size = 4;
    Dataset ds = generate(spec);
    std::string path = temp_path("export");
    export_jsonl(ds, path);

    std::ifstream in(path);
    REQUIRE(in.good());
    std::string line;
    std::size_t lines = 0;
    while (std::getline(in, line)) {
        REQUIRE_FALSE(line.empty());
        ++lines;
    }
    CHECK(lines == ds.samples.size() + 1);
    std::remove(path.c_str());
}
