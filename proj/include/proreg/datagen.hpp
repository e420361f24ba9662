#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "proreg/prob.hpp"

namespace proreg {

enum class Split : std::uint8_t { train = 0, id_test = 1, ood_test = 2 };

// Parameters of a planted contextual-bias task. A feature vector is a
// semantic block concatenated with a context block. The semantic block is the
// class direction plus gaussian noise; the context block is a class-linked
// context direction with probability bias_strength (train and id_test) or
// ood_bias (ood_test), otherwise a uniformly chosen other class's context.
// The whole vector is unit-normalized.
struct BiasSpec {
    std::uint32_t class_count = 5;
    std::uint32_t semantic_dim = 10;
    std::uint32_t context_dim = 10;
    std::uint64_t train_size = 2000;
    std::uint64_t id_test_size = 1000;
    std::uint64_t ood_test_size = 1000;
    double bias_strength = 0.95;  // rho: class-context agreement in train/id_test
    double ood_bias = 0.2;        // rho': agreement in ood_test; 1/K makes context uninformative
    double noise_std = 0.4;
    std::uint64_t seed = 1;

    std::uint32_t feature_dim() const { return semantic_dim + context_dim; }
};

struct Sample {
    Embedding x;
    std::uint32_t label = 0;
    std::optional<ProbVector> y_zs;  // filled by the oracle cache pass
    Split split = Split::train;
};

// Provenance of a cached zero-shot pass; enough to rebuild the oracle.
struct OracleEcho {
    double sigma = 0.0;
    double temperature = kDefaultTemperature;
    std::uint64_t seed = 0;
};

// Orthonormal class direction sets, one per block. A pure function of the
// spec (including its seed), so the oracle can be built without ever seeing
// sampled data.
struct PlantedDirections {
    std::vector<std::vector<double>> semantic;  // class_count rows of semantic_dim
    std::vector<std::vector<double>> context;   // class_count rows of context_dim
};

struct Dataset {
    BiasSpec spec;
    PlantedDirections directions;
    std::vector<Sample> samples;  // train, then id_test, then ood_test
    bool has_zero_shot = false;
    OracleEcho oracle_echo;

    std::span<const Sample> train() const;
    std::span<const Sample> id_test() const;
    std::span<const Sample> ood_test() const;
    std::span<const Sample> split(Split which) const;
};

// Throws std::invalid_argument when the spec cannot be realized (fewer
// dimensions than classes, empty splits, rates outside [0, 1], ...).
void validate(const BiasSpec& spec);

PlantedDirections planted_directions(const BiasSpec& spec);

Dataset generate(const BiasSpec& spec);

// Binary dataset file (magic "PRDS"). Version 1 held the spec echo, planted
// directions and raw records; version 2 adds the cached zero-shot
// distributions and the oracle echo. See docs/FORMATS.md for the byte layout.
inline constexpr std::uint32_t kDatasetFormatVersion = 2;

void save_dataset(const Dataset& ds, const std::string& path);
Dataset load_dataset(const std::string& path);

// Human-readable JSON-lines export: one meta line, then one line per sample.
void export_jsonl(const Dataset& ds, const std::string& path);

}  // namespace proreg
