#pragma once

#include "proreg/datagen.hpp"
#include "proreg/prob.hpp"

namespace proreg {

// Which feature dimensions the scorer attends to and how perturbed its class
// directions are. attended_dims is the leading semantic block; the context
// block carries exact zero weight.
struct KnowledgeProfile {
    std::uint32_t attended_dims = 0;
    std::uint32_t total_dims = 0;
    double sigma = 0.0;
    std::uint64_t seed = 0;
};

// Frozen stand-in for a pretrained zero-shot scorer: one unit-norm class
// embedding per class, supported on the semantic block only, scored by
// temperature-scaled cosine similarity. Immutable once built.
struct ZeroShotOracle {
    std::vector<Embedding> class_embeddings;
    double temperature = kDefaultTemperature;
    KnowledgeProfile profile;
};

// Builds class embeddings from the spec's planted semantic directions,
// perturbed by sigma * gaussian noise and renormalized (sigma = 0 keeps the
// planted directions). Consumes only the spec, never sampled data.
ZeroShotOracle build_oracle(const BiasSpec& spec, double sigma, std::uint64_t seed,
                            double temperature = kDefaultTemperature);

// softmax(cosine_scores(x, class embeddings), temperature).
ProbVector zero_shot_predict(const ZeroShotOracle& oracle, const Embedding& x);

// Fills y_zs for every sample of every split. Idempotent: recaching with the
// same oracle rewrites identical values.
void cache_zero_shot_labels(const ZeroShotOracle& oracle, Dataset& ds);

}  // namespace proreg
