#include "proreg/model.hpp"

#include <cmath>
#include <numeric>
#include <stdexcept>

#include "proreg/rng.hpp"
#include "proreg/serialize.hpp"

namespace proreg {

namespace {

constexpr std::string_view kCheckpointMagic = "PRCK";

void check_model(const LinearModel& model, const char* where) {
    if (model.class_count < 2 || model.feature_dim == 0) {
        throw std::invalid_argument(std::string(where) + ": model is empty");
    }
    if (model.weights.size() != static_cast<std::size_t>(model.class_count) * model.feature_dim ||
        model.bias.size() != model.class_count) {
        throw std::invalid_argument(std::string(where) + ": parameter shapes are inconsistent");
    }
}

}  // namespace

Optimizer::Optimizer(OptimizerConfig cfg, const LinearModel& model) : m_cfg(cfg) {
    check_model(model, "Optimizer");
    if (!(m_cfg.learning_rate >= 0.0) || !std::isfinite(m_cfg.learning_rate)) {
        throw std::invalid_argument("Optimizer: learning_rate must be non-negative and finite");
    }
    m_mw.assign(model.weights.size(), 0.0);
    m_vw.assign(model.weights.size(), 0.0);
    m_mb.assign(model.bias.size(), 0.0);
    m_vb.assign(model.bias.size(), 0.0);
}

void Optimizer::apply(std::vector<double>& params, const std::vector<double>& grads,
                      std::vector<double>& m, std::vector<double>& v, double lr) {
    if (params.size() != grads.size()) {
        throw std::invalid_argument("Optimizer::step: gradient shape mismatch");
    }
    switch (m_cfg.kind) {
        case OptimizerKind::adamw: {
            double bc1 = 1.0 - std::pow(m_cfg.beta1, static_cast<double>(m_step));
            double bc2 = 1.0 - std::pow(m_cfg.beta2, static_cast<double>(m_step));
            for (std::size_t i = 0; i < params.size(); ++i) {
                m[i] = m_cfg.beta1 * m[i] + (1.0 - m_cfg.beta1) * grads[i];
                v[i] = m_cfg.beta2 * v[i] + (1.0 - m_cfg.beta2) * grads[i] * grads[i];
                double m_hat = m[i] / bc1;
                double v_hat = v[i] / bc2;
                params[i] -= lr * (m_hat / (std::sqrt(v_hat) + m_cfg.epsilon) +
                                   m_cfg.weight_decay * params[i]);
            }
            break;
        }
        case OptimizerKind::sgd_momentum: {
            for (std::size_t i = 0; i < params.size(); ++i) {
                m[i] = m_cfg.momentum * m[i] + grads[i];
                params[i] -= lr * (m[i] + m_cfg.weight_decay * params[i]);
            }
            break;
        }
    }
}

void Optimizer::step(LinearModel& model, const std::vector<double>& grad_weights,
                     const std::vector<double>& grad_bias, double lr_scale) {
    check_model(model, "Optimizer::step");
    if (model.weights.size() != m_mw.size() || model.bias.size() != m_mb.size()) {
        throw std::invalid_argument("Optimizer::step: model does not match optimizer state");
    }
    ++m_step;
    double lr = m_cfg.learning_rate * lr_scale;
    apply(model.weights, grad_weights, m_mw, m_vw, lr);
    apply(model.bias, grad_bias, m_mb, m_vb, lr);
}

std::pair<LogitVector, ProbVector> forward(const LinearModel& model, const Embedding& x) {
    check_model(model, "forward");
    if (x.dim() != model.feature_dim) {
        throw std::invalid_argument("forward: feature dimension mismatch");
    }
    LogitVector logits;
    logits.values.resize(model.class_count);
    for (std::uint32_t k = 0; k < model.class_count; ++k) {
        double acc = model.bias[k];
        const double* row = model.weights.data() + static_cast<std::size_t>(k) * model.feature_dim;
        for (std::uint32_t d = 0; d < model.feature_dim; ++d) acc += row[d] * x.values[d];
        logits.values[k] = acc;
    }
    ProbVector probs = softmax(logits, model.temperature);
    return {std::move(logits), std::move(probs)};
}

ProbVector predict(const LinearModel& model, const Embedding& x) { return forward(model, x).second; }

LinearModel init_ft(std::uint32_t feature_dim, std::uint32_t class_count, std::uint64_t seed,
                    double temperature) {
    if (class_count < 2 || feature_dim == 0) {
        throw std::invalid_argument("init_ft: need at least two classes and one feature");
    }
    LinearModel model;
    model.class_count = class_count;
    model.feature_dim = feature_dim;
    model.temperature = temperature;
    model.bias.assign(class_count, 0.0);
    model.weights.resize(static_cast<std::size_t>(class_count) * feature_dim);
    double half_width = 1.0 / std::sqrt(static_cast<double>(feature_dim));
    Rng rng(derive_stream(seed, "init"));
    for (double& w : model.weights) w = rng.uniform(-half_width, half_width);
    return model;
}

LinearModel init_ft_plus(const std::vector<Embedding>& class_embeddings, double temperature) {
    if (class_embeddings.size() < 2) {
        throw std::invalid_argument("init_ft_plus: need at least two class embeddings");
    }
    std::size_t dim = class_embeddings.front().dim();
    if (dim == 0) throw std::invalid_argument("init_ft_plus: empty embeddings");
    LinearModel model;
    model.class_count = static_cast<std::uint32_t>(class_embeddings.size());
    model.feature_dim = static_cast<std::uint32_t>(dim);
    model.temperature = temperature;
    model.bias.assign(model.class_count, 0.0);
    model.weights.reserve(static_cast<std::size_t>(model.class_count) * dim);
    for (const Embedding& e : class_embeddings) {
        if (e.dim() != dim) {
            throw std::invalid_argument("init_ft_plus: class embedding dimension mismatch");
        }
        model.weights.insert(model.weights.end(), e.values.begin(), e.values.end());
    }
    return model;
}

ParamGradient parameter_gradient(const LinearModel& model, std::span<const Sample* const> batch,
                                 const LossSpec& loss) {
    check_model(model, "parameter_gradient");
    if (batch.empty()) throw std::invalid_argument("parameter_gradient: empty batch");
    ParamGradient g;
    g.weights.assign(model.weights.size(), 0.0);
    g.bias.assign(model.bias.size(), 0.0);
    for (const Sample* s : batch) {
        auto [logits, probs] = forward(model, s->x);
        ProbVector y = ProbVector::one_hot(s->label, model.class_count);
        const ProbVector* y_zs = nullptr;
        if (loss.mode != LossMode::ft) {
            if (!s->y_zs) {
                throw std::invalid_argument("parameter_gradient: sample has no cached y_zs");
            }
            y_zs = &*s->y_zs;
        }
        LogitGradient gl = grad_total_logits(loss, probs, y, y_zs);
        for (std::uint32_t k = 0; k < model.class_count; ++k) {
            double gk = gl.values[k];
            double* row = g.weights.data() + static_cast<std::size_t>(k) * model.feature_dim;
            for (std::uint32_t d = 0; d < model.feature_dim; ++d) row[d] += gk * s->x.values[d];
            g.bias[k] += gk;
        }
    }
    // mean over the batch plus the softmax temperature's 1/tau chain factor
    double scale = 1.0 / (static_cast<double>(batch.size()) * model.temperature);
    for (double& v : g.weights) v *= scale;
    for (double& v : g.bias) v *= scale;
    return g;
}

LossBreakdown train_step(LinearModel& model, std::span<const Sample* const> batch,
                         const LossSpec& loss, Optimizer& opt, double lr_scale) {
    check_model(model, "train_step");
    if (batch.empty()) throw std::invalid_argument("train_step: empty batch");

    LossBreakdown mean;
    ParamGradient g;
    g.weights.assign(model.weights.size(), 0.0);
    g.bias.assign(model.bias.size(), 0.0);
    for (const Sample* s : batch) {
        auto [logits, probs] = forward(model, s->x);
        ProbVector y = ProbVector::one_hot(s->label, model.class_count);
        const ProbVector* y_zs = nullptr;
        if (loss.mode != LossMode::ft) {
            if (!s->y_zs) throw std::invalid_argument("train_step: sample has no cached y_zs");
            y_zs = &*s->y_zs;
        }
        LossBreakdown b = loss_value(loss, probs, y, y_zs);
        mean.ce += b.ce;
        mean.kl += b.kl;
        mean.weight_w += b.weight_w;
        mean.total += b.total;
        mean.mode = b.mode;
        mean.alpha = b.alpha;
        LogitGradient gl = grad_total_logits(loss, probs, y, y_zs);
        for (std::uint32_t k = 0; k < model.class_count; ++k) {
            double gk = gl.values[k];
            double* row = g.weights.data() + static_cast<std::size_t>(k) * model.feature_dim;
            for (std::uint32_t d = 0; d < model.feature_dim; ++d) row[d] += gk * s->x.values[d];
            g.bias[k] += gk;
        }
    }
    double inv = 1.0 / static_cast<double>(batch.size());
    mean.ce *= inv;
    mean.kl *= inv;
    mean.weight_w *= inv;
    mean.total *= inv;
    if (!std::isfinite(mean.total)) {
        throw std::runtime_error("train_step: non-finite loss at optimizer step " +
                                 std::to_string(opt.step_count() + 1) +
                                 " (ce " + std::to_string(mean.ce) + ", kl " +
                                 std::to_string(mean.kl) + ")");
    }
    double scale = inv / model.temperature;
    for (double& v : g.weights) v *= scale;
    for (double& v : g.bias) v *= scale;
    opt.step(model, g.weights, g.bias, lr_scale);
    return mean;
}

FitResult fit(LinearModel& model, std::span<const Sample> train_split, const TrainConfig& cfg) {
    check_model(model, "fit");
    if (train_split.empty()) throw std::invalid_argument("fit: empty training split");
    if (cfg.batch_size == 0) throw std::invalid_argument("fit: batch_size must be positive");
    model.temperature = cfg.temperature;

    Optimizer opt(cfg.optimizer, model);
    Rng shuffle_rng(derive_stream(cfg.seed, "shuffle"));
    std::vector<const Sample*> order(train_split.size());
    for (std::size_t i = 0; i < train_split.size(); ++i) order[i] = &train_split[i];

    std::uint64_t steps_per_epoch = (train_split.size() + cfg.batch_size - 1) / cfg.batch_size;
    std::uint64_t total_steps = steps_per_epoch * cfg.epochs;
    std::uint64_t warmup_steps =
        cfg.warmup ? std::max<std::uint64_t>(1, (total_steps + 9) / 10) : 0;

    FitResult result;
    std::uint64_t step = 0;
    for (std::uint32_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        shuffle_rng.shuffle(order);
        LossBreakdown epoch_mean;
        std::uint64_t batches = 0;
        for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
            std::size_t count = std::min<std::size_t>(cfg.batch_size, order.size() - start);
            double lr_scale = 1.0;
            if (cfg.warmup && step < warmup_steps) {
                lr_scale = static_cast<double>(step + 1) / static_cast<double>(warmup_steps);
            }
            LossBreakdown b = train_step(model, std::span<const Sample* const>(&order[start], count),
                                         cfg.loss, opt, lr_scale);
            epoch_mean.ce += b.ce;
            epoch_mean.kl += b.kl;
            epoch_mean.weight_w += b.weight_w;
            epoch_mean.total += b.total;
            epoch_mean.mode = b.mode;
            epoch_mean.alpha = b.alpha;
            ++batches;
            ++step;
        }
        double inv = 1.0 / static_cast<double>(batches);
        epoch_mean.ce *= inv;
        epoch_mean.kl *= inv;
        epoch_mean.weight_w *= inv;
        epoch_mean.total *= inv;
        result.epoch_mean.push_back(epoch_mean);
    }
    result.steps = step;
    return result;
}

void save_checkpoint(const LinearModel& model, std::uint64_t config_hash, const std::string& path) {
    check_model(model, "save_checkpoint");
    ByteWriter body;
    body.u32(model.class_count);
    body.u32(model.feature_dim);
    body.f64(model.temperature);
    body.u64(config_hash);
    for (double v : model.weights) body.f64(v);
    for (double v : model.bias) body.f64(v);
    write_file(path, seal_envelope(kCheckpointMagic, kCheckpointFormatVersion, body.data()));
}

Checkpoint load_checkpoint(const std::string& path) {
    std::vector<unsigned char> file = read_file(path);
    Envelope env = open_envelope(kCheckpointMagic, 1, kCheckpointFormatVersion, file);
    ByteReader r(env.body);
    Checkpoint ck;
    ck.model.class_count = r.u32();
    ck.model.feature_dim = r.u32();
    ck.model.temperature = r.f64();
    ck.config_hash = r.u64();
    if (ck.model.class_count < 2 || ck.model.feature_dim == 0) {
        throw FormatError("load_checkpoint: degenerate dimensions");
    }
    std::size_t n = static_cast<std::size_t>(ck.model.class_count) * ck.model.feature_dim;
    ck.model.weights.resize(n);
    for (double& v : ck.model.weights) v = r.f64();
    ck.model.bias.resize(ck.model.class_count);
    for (double& v : ck.model.bias) v = r.f64();
    r.expect_end("load_checkpoint");
    check_model(ck.model, "load_checkpoint");
    return ck;
}

}  // namespace proreg
