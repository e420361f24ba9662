#include "proreg/oracle.hpp"

#include <cmath>
#include <stdexcept>

#include "proreg/rng.hpp"

namespace proreg {

ZeroShotOracle build_oracle(const BiasSpec& spec, double sigma, std::uint64_t seed,
                            double temperature) {
    if (!(sigma >= 0.0) || !std::isfinite(sigma)) {
        throw std::invalid_argument("build_oracle: sigma must be non-negative and finite");
    }
    if (!(temperature > 0.0) || !std::isfinite(temperature)) {
        throw std::invalid_argument("build_oracle: temperature must be positive and finite");
    }
    PlantedDirections dirs = planted_directions(spec);
    Rng rng(derive_stream(seed, "oracle"));

    ZeroShotOracle oracle;
    oracle.temperature = temperature;
    oracle.profile = KnowledgeProfile{spec.semantic_dim, spec.feature_dim(), sigma, seed};
    oracle.class_embeddings.reserve(spec.class_count);
    for (std::uint32_t k = 0; k < spec.class_count; ++k) {
        std::vector<double> full(spec.feature_dim(), 0.0);
        for (std::uint32_t d = 0; d < spec.semantic_dim; ++d) {
            full[d] = dirs.semantic[k][d] + sigma * rng.gaussian();
        }
        oracle.class_embeddings.push_back(normalized(Embedding{std::move(full), false}));
    }
    return oracle;
}

ProbVector zero_shot_predict(const ZeroShotOracle& oracle, const Embedding& x) {
    if (x.dim() != oracle.profile.total_dims) {
        throw std::invalid_argument("zero_shot_predict: feature dimension mismatch");
    }
    return softmax(cosine_scores(x, oracle.class_embeddings), oracle.temperature);
}

void cache_zero_shot_labels(const ZeroShotOracle& oracle, Dataset& ds) {
    if (oracle.class_embeddings.size() != ds.spec.class_count) {
        throw std::invalid_argument("cache_zero_shot_labels: class count mismatch");
    }
    if (oracle.profile.total_dims != ds.spec.feature_dim()) {
        throw std::invalid_argument("cache_zero_shot_labels: feature dimension mismatch");
    }
    for (Sample& s : ds.samples) {
        s.y_zs = zero_shot_predict(oracle, s.x);
    }
    ds.has_zero_shot = true;
    ds.oracle_echo = OracleEcho{oracle.profile.sigma, oracle.temperature, oracle.profile.seed};
}

}  // namespace proreg
