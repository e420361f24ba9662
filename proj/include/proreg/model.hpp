#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <utility>

#include "proreg/datagen.hpp"
#include "proreg/losses.hpp"

namespace proreg {

// Linear classification head over fixed features: logits = W x + b, probs =
// softmax(logits, temperature). The backbone never exists here; x is already
// the feature vector.
struct LinearModel {
    std::uint32_t class_count = 0;
    std::uint32_t feature_dim = 0;
    std::vector<double> weights;  // row-major, class_count x feature_dim
    std::vector<double> bias;     // class_count
    double temperature = kDefaultTemperature;

    double weight_at(std::uint32_t row, std::uint32_t col) const {
        return weights[static_cast<std::size_t>(row) * feature_dim + col];
    }
};

enum class OptimizerKind { adamw, sgd_momentum };

struct OptimizerConfig {
    OptimizerKind kind = OptimizerKind::adamw;
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    double weight_decay = 0.01;
    double momentum = 0.9;  // sgd_momentum only
};

// Optimizer state over one LinearModel's parameters. adamw keeps first and
// second moments with bias correction and decoupled weight decay; sgd_momentum
// keeps a velocity (decay also decoupled so the gradient stays auditable).
class Optimizer {
public:
    Optimizer(OptimizerConfig cfg, const LinearModel& model);

    // lr_scale multiplies the learning rate for this step (warmup ramps).
    void step(LinearModel& model, const std::vector<double>& grad_weights,
              const std::vector<double>& grad_bias, double lr_scale = 1.0);

    std::uint64_t step_count() const { return m_step; }
    const OptimizerConfig& config() const { return m_cfg; }

private:
    void apply(std::vector<double>& params, const std::vector<double>& grads,
               std::vector<double>& m, std::vector<double>& v, double lr);
    OptimizerConfig m_cfg;
    std::vector<double> m_mw, m_vw, m_mb, m_vb;
    std::uint64_t m_step = 0;
};

struct TrainConfig {
    LossSpec loss;
    OptimizerConfig optimizer;
    std::uint32_t epochs = 10;
    std::uint32_t batch_size = 64;
    double temperature = kDefaultTemperature;
    bool warmup = false;  // opt-in linear ramp over the first 10% of steps
    std::uint64_t seed = 1;
};

std::pair<LogitVector, ProbVector> forward(const LinearModel& model, const Embedding& x);
ProbVector predict(const LinearModel& model, const Embedding& x);

// Seeded uniform init, zero-mean with half-width 1 / sqrt(feature_dim); zero
// bias.
LinearModel init_ft(std::uint32_t feature_dim, std::uint32_t class_count, std::uint64_t seed,
                    double temperature = kDefaultTemperature);

// Weight rows are the oracle's class embeddings, bias zero. With the oracle's
// temperature and unit-norm inputs, the fresh model reproduces zero-shot
// predictions.
LinearModel init_ft_plus(const std::vector<Embedding>& class_embeddings,
                         double temperature = kDefaultTemperature);

struct ParamGradient {
    std::vector<double> weights;
    std::vector<double> bias;
};

// Mean objective gradient of the batch with respect to W and b. The softmax
// divides the logits by the temperature, so the chain rule carries a 1/tau
// factor onto every parameter. ProReg weights are recomputed from the current
// predictions and treated as constants.
ParamGradient parameter_gradient(const LinearModel& model, std::span<const Sample* const> batch,
                                 const LossSpec& loss);

// One optimizer step on a batch; returns the mean loss breakdown. Throws
// std::runtime_error with a diagnostic if the loss goes non-finite.
LossBreakdown train_step(LinearModel& model, std::span<const Sample* const> batch,
                         const LossSpec& loss, Optimizer& opt, double lr_scale = 1.0);

struct FitResult {
    std::vector<LossBreakdown> epoch_mean;
    std::uint64_t steps = 0;
};

// Epoch loop with per-epoch reshuffling driven by cfg.seed. Deterministic:
// identical (model, data, config) produce bit-identical parameters.
FitResult fit(LinearModel& model, std::span<const Sample> train_split, const TrainConfig& cfg);

// Checkpoint file (magic "PRCK"): dims, temperature, producing config hash,
// weights and bias. See docs/FORMATS.md.
inline constexpr std::uint32_t kCheckpointFormatVersion = 1;

void save_checkpoint(const LinearModel& model, std::uint64_t config_hash, const std::string& path);

struct Checkpoint {
    LinearModel model;
    std::uint64_t config_hash = 0;
};

Checkpoint load_checkpoint(const std::string& path);

}  // namespace proreg
