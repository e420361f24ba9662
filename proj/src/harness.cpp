#include "proreg/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <fstream>
#include <functional>
#include <mutex>
#include <stdexcept>
#include <thread>
#include <tuple>

#include "json.hpp"
#include "proreg/rng.hpp"
#include "proreg/serialize.hpp"

namespace proreg {

namespace {

std::size_t argmax(const ProbVector& p) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < p.class_count(); ++i) {
        if (p[i] > p[best]) best = i;
    }
    return best;
}

template <class Predict>
double accuracy(std::span<const Sample> split, Predict&& predict) {
    if (split.empty()) throw std::invalid_argument("evaluate: empty split");
    std::size_t hits = 0;
    for (const Sample& s : split) {
        if (argmax(predict(s)) == s.label) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(split.size());
}

std::string format_fixed(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.6f", v);
    return buf;
}

// Runs fn(0..jobs-1) across the configured worker count. Each job writes only
// its own slot, so scheduling cannot change any result.
void parallel_for(std::size_t jobs, const std::function<void(std::size_t)>& fn) {
    std::size_t workers = std::min(parallelism(), jobs);
    if (workers <= 1) {
        for (std::size_t i = 0; i < jobs; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr first_error;
    std::mutex error_mutex;
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
            for (;;) {
                std::size_t i = next.fetch_add(1);
                if (i >= jobs) return;
                try {
                    fn(i);
                } catch (...) {
                    std::lock_guard<std::mutex> lock(error_mutex);
                    if (!first_error) first_error = std::current_exception();
                }
            }
        });
    }
    for (auto& t : pool) t.join();
    if (first_error) std::rethrow_exception(first_error);
}

std::string stage_message(const char* stage, const std::exception& e) {
    return std::string("[stage ") + stage + "] " + e.what();
}

}  // namespace

std::string method_name(Method m) {
    switch (m) {
        case Method::zero_shot: return "zero_shot";
        case Method::ft: return "ft";
        case Method::ft_plus: return "ft_plus";
        case Method::kd: return "kd";
        case Method::proreg: return "proreg";
        case Method::ensemble: return "ensemble";
    }
    throw std::logic_error("method_name: unknown method");
}

Method method_from_name(std::string_view name) {
    if (name == "zero_shot") return Method::zero_shot;
    if (name == "ft") return Method::ft;
    if (name == "ft_plus") return Method::ft_plus;
    if (name == "kd") return Method::kd;
    if (name == "proreg") return Method::proreg;
    if (name == "ensemble") return Method::ensemble;
    throw std::invalid_argument("unknown method: " + std::string(name));
}

ExperimentConfig default_experiment() {
    ExperimentConfig cfg;
    cfg.train.temperature = cfg.oracle_temperature;
    return cfg;
}

double harmonic_mean(double id_accuracy, double ood_accuracy) {
    if (!(id_accuracy >= 0.0 && id_accuracy <= 1.0) ||
        !(ood_accuracy >= 0.0 && ood_accuracy <= 1.0)) {
        throw std::invalid_argument("harmonic_mean: accuracies must lie in [0, 1]");
    }
    double sum = id_accuracy + ood_accuracy;
    if (sum == 0.0) return 0.0;
    return 2.0 * id_accuracy * ood_accuracy / sum;
}

ProbVector ensemble_predict(const ProbVector& f_ft, const ProbVector& y_zs, double lambda) {
    if (!(lambda >= 0.0 && lambda <= 1.0)) {
        throw std::invalid_argument("ensemble_predict: lambda must lie in [0, 1]");
    }
    if (f_ft.class_count() != y_zs.class_count()) {
        throw std::invalid_argument("ensemble_predict: class count mismatch");
    }
    if (lambda == 0.0) return f_ft;
    if (lambda == 1.0) return y_zs;
    std::vector<double> mixed(f_ft.class_count());
    for (std::size_t i = 0; i < mixed.size(); ++i) {
        mixed[i] = (1.0 - lambda) * f_ft[i] + lambda * y_zs[i];
    }
    return ProbVector::from_probabilities(std::move(mixed));
}

double evaluate(const LinearModel& model, std::span<const Sample> split) {
    return accuracy(split, [&](const Sample& s) { return predict(model, s.x); });
}

double evaluate(const ZeroShotOracle& oracle, std::span<const Sample> split) {
    return accuracy(split, [&](const Sample& s) { return zero_shot_predict(oracle, s.x); });
}

double evaluate_ensemble(const LinearModel& model, std::span<const Sample> split, double lambda) {
    return accuracy(split, [&](const Sample& s) {
        if (!s.y_zs) throw std::invalid_argument("evaluate_ensemble: sample has no cached y_zs");
        return ensemble_predict(predict(model, s.x), *s.y_zs, lambda);
    });
}

std::string format_param(double value) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%g", value);
    return buf;
}

MetricsRow run_single(const ExperimentConfig& cfg, std::uint64_t seed) {
    return run_single_detailed(cfg, seed).row;
}

SingleRun run_single_detailed(const ExperimentConfig& cfg, std::uint64_t seed) {
    auto t0 = std::chrono::steady_clock::now();

    Dataset ds;
    try {
        BiasSpec spec = cfg.data;
        spec.seed = derive_stream(seed, "data");
        ds = generate(spec);
    } catch (const std::exception& e) {
        throw std::runtime_error(stage_message("generate", e));
    }

    ZeroShotOracle oracle;
    try {
        oracle = build_oracle(ds.spec, cfg.oracle_sigma, derive_stream(seed, "oracle"),
                              cfg.oracle_temperature);
        cache_zero_shot_labels(oracle, ds);
    } catch (const std::exception& e) {
        throw std::runtime_error(stage_message("oracle", e));
    }

    SingleRun out;
    MetricsRow& row = out.row;
    row.method = method_name(cfg.method);
    row.seed = std::to_string(seed);

    try {
        TrainConfig tc = cfg.train;
        tc.seed = derive_stream(seed, "train");

        auto trained_ft = [&]() {
            LinearModel model = init_ft(ds.spec.feature_dim(), ds.spec.class_count, tc.seed,
                                        tc.temperature);
            TrainConfig ft_tc = tc;
            ft_tc.loss = LossSpec::ft();
            fit(model, ds.train(), ft_tc);
            return model;
        };

        switch (cfg.method) {
            case Method::zero_shot: {
                row.id_accuracy = evaluate(oracle, ds.id_test());
                row.ood_accuracy = evaluate(oracle, ds.ood_test());
                break;
            }
            case Method::ft: {
                out.model = trained_ft();
                row.id_accuracy = evaluate(*out.model, ds.id_test());
                row.ood_accuracy = evaluate(*out.model, ds.ood_test());
                break;
            }
            case Method::ft_plus: {
                LinearModel model = init_ft_plus(oracle.class_embeddings, tc.temperature);
                tc.loss = LossSpec::ft();
                fit(model, ds.train(), tc);
                out.model = std::move(model);
                row.id_accuracy = evaluate(*out.model, ds.id_test());
                row.ood_accuracy = evaluate(*out.model, ds.ood_test());
                break;
            }
            case Method::kd: {
                LinearModel model = init_ft(ds.spec.feature_dim(), ds.spec.class_count, tc.seed,
                                            tc.temperature);
                tc.loss = LossSpec::kd(cfg.lambda);
                fit(model, ds.train(), tc);
                out.model = std::move(model);
                row.params = "lambda=" + format_param(cfg.lambda);
                row.id_accuracy = evaluate(*out.model, ds.id_test());
                row.ood_accuracy = evaluate(*out.model, ds.ood_test());
                break;
            }
            case Method::proreg: {
                LinearModel model = init_ft_plus(oracle.class_embeddings, tc.temperature);
                tc.loss = LossSpec::proreg(cfg.alpha);
                fit(model, ds.train(), tc);
                out.model = std::move(model);
                row.params = "alpha=" + format_param(cfg.alpha);
                row.id_accuracy = evaluate(*out.model, ds.id_test());
                row.ood_accuracy = evaluate(*out.model, ds.ood_test());
                break;
            }
            case Method::ensemble: {
                out.model = trained_ft();
                row.params = "lambda=" + format_param(cfg.lambda);
                row.id_accuracy = evaluate_ensemble(*out.model, ds.id_test(), cfg.lambda);
                row.ood_accuracy = evaluate_ensemble(*out.model, ds.ood_test(), cfg.lambda);
                break;
            }
        }
    } catch (const std::exception& e) {
        throw std::runtime_error(stage_message("train", e));
    }

    row.harmonic = harmonic_mean(row.id_accuracy, row.ood_accuracy);
    row.wall_time_s =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return out;
}

std::vector<MetricsRow> run_experiment(const ExperimentConfig& cfg) {
    if (cfg.seeds.empty()) throw std::invalid_argument("run_experiment: no seeds configured");
    std::vector<MetricsRow> rows(cfg.seeds.size());
    parallel_for(cfg.seeds.size(), [&](std::size_t i) { rows[i] = run_single(cfg, cfg.seeds[i]); });
    sort_canonical(rows);
    return rows;
}

std::vector<MetricsRow> sweep(const ExperimentConfig& base, SweepParam param,
                              const std::vector<double>& grid) {
    if (grid.empty()) throw std::invalid_argument("sweep: empty grid");
    if (base.seeds.empty()) throw std::invalid_argument("sweep: no seeds configured");

    std::vector<ExperimentConfig> points;
    points.reserve(grid.size());
    for (double value : grid) {
        ExperimentConfig cfg = base;
        switch (param) {
            case SweepParam::alpha:
                cfg.method = Method::proreg;
                cfg.alpha = value;
                break;
            case SweepParam::kd_lambda:
                cfg.method = Method::kd;
                cfg.lambda = value;
                break;
            case SweepParam::ensemble_lambda:
                cfg.method = Method::ensemble;
                cfg.lambda = value;
                break;
        }
        points.push_back(std::move(cfg));
    }

    std::size_t seeds = base.seeds.size();
    std::vector<MetricsRow> rows(points.size() * seeds);
    parallel_for(rows.size(), [&](std::size_t i) {
        const ExperimentConfig& cfg = points[i / seeds];
        rows[i] = run_single(cfg, cfg.seeds[i % seeds]);
    });
    sort_canonical(rows);
    append_aggregates(rows);
    return rows;
}

void sort_canonical(std::vector<MetricsRow>& rows) {
    std::sort(rows.begin(), rows.end(), [](const MetricsRow& a, const MetricsRow& b) {
        return std::tie(a.method, a.params, a.seed) < std::tie(b.method, b.params, b.seed);
    });
}

void append_aggregates(std::vector<MetricsRow>& rows) {
    struct Group {
        std::string method, params;
        std::vector<const MetricsRow*> members;
    };
    std::vector<Group> groups;
    for (const MetricsRow& row : rows) {
        if (row.seed == "mean" || row.seed == "std") continue;
        auto it = std::find_if(groups.begin(), groups.end(), [&](const Group& g) {
            return g.method == row.method && g.params == row.params;
        });
        if (it == groups.end()) {
            groups.push_back(Group{row.method, row.params, {}});
            it = std::prev(groups.end());
        }
        it->members.push_back(&row);
    }
    for (const Group& g : groups) {
        double n = static_cast<double>(g.members.size());
        MetricsRow mean{g.method, g.params, "mean", 0, 0, 0, 0};
        for (const MetricsRow* m : g.members) {
            mean.id_accuracy += m->id_accuracy;
            mean.ood_accuracy += m->ood_accuracy;
            mean.harmonic += m->harmonic;
        }
        mean.id_accuracy /= n;
        mean.ood_accuracy /= n;
        mean.harmonic /= n;

        MetricsRow dev{g.method, g.params, "std", 0, 0, 0, 0};
        if (g.members.size() > 1) {
            for (const MetricsRow* m : g.members) {
                dev.id_accuracy += (m->id_accuracy - mean.id_accuracy) *
                                   (m->id_accuracy - mean.id_accuracy);
                dev.ood_accuracy += (m->ood_accuracy - mean.ood_accuracy) *
                                    (m->ood_accuracy - mean.ood_accuracy);
                dev.harmonic += (m->harmonic - mean.harmonic) * (m->harmonic - mean.harmonic);
            }
            dev.id_accuracy = std::sqrt(dev.id_accuracy / (n - 1.0));
            dev.ood_accuracy = std::sqrt(dev.ood_accuracy / (n - 1.0));
            dev.harmonic = std::sqrt(dev.harmonic / (n - 1.0));
        }
        rows.push_back(std::move(mean));
        rows.push_back(std::move(dev));
    }
}

std::string csv_field(std::string_view raw) {
    bool needs_quotes = raw.find_first_of(",\"\n\r") != std::string_view::npos;
    if (!needs_quotes) return std::string(raw);
    std::string out = "\"";
    for (char c : raw) {
        if (c == '"') out += '"';
        out += c;
    }
    out += '"';
    return out;
}

std::string to_csv(const std::vector<MetricsRow>& rows, bool include_wall_time) {
    std::string out = "schema_version,method,params,seed,id_accuracy,ood_accuracy,harmonic_mean";
    if (include_wall_time) out += ",wall_time_s";
    out += "\r\n";
    for (const MetricsRow& row : rows) {
        out += std::to_string(kCsvSchemaVersion);
        out += ',';
        out += csv_field(row.method);
        out += ',';
        out += csv_field(row.params);
        out += ',';
        out += csv_field(row.seed);
        out += ',';
        out += format_fixed(row.id_accuracy);
        out += ',';
        out += format_fixed(row.ood_accuracy);
        out += ',';
        out += format_fixed(row.harmonic);
        if (include_wall_time) {
            out += ',';
            out += format_fixed(row.wall_time_s);
        }
        out += "\r\n";
    }
    return out;
}

void write_csv_file(const std::string& path, const std::vector<MetricsRow>& rows,
                    bool include_wall_time) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw FormatError("cannot open file for writing: " + path);
    std::string text = to_csv(rows, include_wall_time);
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    if (!out) throw FormatError("write failed: " + path);
}

std::size_t parallelism() {
    if (const char* env = std::getenv("PROREG_PARALLEL")) {
        char* end = nullptr;
        long v = std::strtol(env, &end, 10);
        if (end != env && v >= 1) return static_cast<std::size_t>(v);
    }
    unsigned hc = std::thread::hardware_concurrency();
    return hc == 0 ? 1 : hc;
}

std::string output_dir(const std::string& configured) {
    if (const char* env = std::getenv("PROREG_OUT_DIR")) {
        if (*env != '\0') return env;
    }
    return configured;
}

namespace {

OptimizerKind optimizer_from_name(const std::string& name) {
    if (name == "adamw") return OptimizerKind::adamw;
    if (name == "sgd_momentum") return OptimizerKind::sgd_momentum;
    throw std::invalid_argument("unknown optimizer: " + name);
}

std::string optimizer_name(OptimizerKind kind) {
    return kind == OptimizerKind::adamw ? "adamw" : "sgd_momentum";
}

}  // namespace

std::string config_to_json(const ExperimentConfig& cfg) {
    nlohmann::json j;
    j["schema_version"] = 1;
    j["data"] = {{"class_count", cfg.data.class_count},
                 {"semantic_dim", cfg.data.semantic_dim},
                 {"context_dim", cfg.data.context_dim},
                 {"train_size", cfg.data.train_size},
                 {"id_test_size", cfg.data.id_test_size},
                 {"ood_test_size", cfg.data.ood_test_size},
                 {"bias_strength", cfg.data.bias_strength},
                 {"ood_bias", cfg.data.ood_bias},
                 {"noise_std", cfg.data.noise_std},
                 {"seed", cfg.data.seed}};
    j["oracle"] = {{"sigma", cfg.oracle_sigma}, {"temperature", cfg.oracle_temperature}};
    j["method"] = method_name(cfg.method);
    j["alpha"] = cfg.alpha;
    j["lambda"] = cfg.lambda;
    j["train"] = {{"optimizer", optimizer_name(cfg.train.optimizer.kind)},
                  {"learning_rate", cfg.train.optimizer.learning_rate},
                  {"beta1", cfg.train.optimizer.beta1},
                  {"beta2", cfg.train.optimizer.beta2},
                  {"epsilon", cfg.train.optimizer.epsilon},
                  {"weight_decay", cfg.train.optimizer.weight_decay},
                  {"momentum", cfg.train.optimizer.momentum},
                  {"epochs", cfg.train.epochs},
                  {"batch_size", cfg.train.batch_size},
                  {"temperature", cfg.train.temperature},
                  {"warmup", cfg.train.warmup}};
    j["seeds"] = cfg.seeds;
    j["output"] = cfg.output;
    return j.dump(2);
}

ExperimentConfig config_from_json(const std::string& text) {
    nlohmann::json j = nlohmann::json::parse(text);
    if (!j.is_object()) throw std::invalid_argument("config: top level must be an object");
    int schema = j.value("schema_version", 1);
    if (schema != 1) {
        throw std::invalid_argument("config: unsupported schema_version " + std::to_string(schema));
    }
    ExperimentConfig cfg = default_experiment();
    if (j.contains("data")) {
        const auto& d = j.at("data");
        cfg.data.class_count = d.value("class_count", cfg.data.class_count);
        cfg.data.semantic_dim = d.value("semantic_dim", cfg.data.semantic_dim);
        cfg.data.context_dim = d.value("context_dim", cfg.data.context_dim);
        cfg.data.train_size = d.value("train_size", cfg.data.train_size);
        cfg.data.id_test_size = d.value("id_test_size", cfg.data.id_test_size);
        cfg.data.ood_test_size = d.value("ood_test_size", cfg.data.ood_test_size);
        cfg.data.bias_strength = d.value("bias_strength", cfg.data.bias_strength);
        cfg.data.ood_bias = d.value("ood_bias", cfg.data.ood_bias);
        cfg.data.noise_std = d.value("noise_std", cfg.data.noise_std);
        cfg.data.seed = d.value("seed", cfg.data.seed);
        if (d.value("adversarial", false)) cfg.data.ood_bias = 0.0;
    }
    if (j.contains("oracle")) {
        const auto& o = j.at("oracle");
        cfg.oracle_sigma = o.value("sigma", cfg.oracle_sigma);
        cfg.oracle_temperature = o.value("temperature", cfg.oracle_temperature);
    }
    cfg.method = method_from_name(j.value("method", method_name(cfg.method)));
    cfg.alpha = j.value("alpha", cfg.alpha);
    cfg.lambda = j.value("lambda", cfg.lambda);
    if (j.contains("train")) {
        const auto& t = j.at("train");
        cfg.train.optimizer.kind =
            optimizer_from_name(t.value("optimizer", optimizer_name(cfg.train.optimizer.kind)));
        cfg.train.optimizer.learning_rate =
            t.value("learning_rate", cfg.train.optimizer.learning_rate);
        cfg.train.optimizer.beta1 = t.value("beta1", cfg.train.optimizer.beta1);
        cfg.train.optimizer.beta2 = t.value("beta2", cfg.train.optimizer.beta2);
        cfg.train.optimizer.epsilon = t.value("epsilon", cfg.train.optimizer.epsilon);
        cfg.train.optimizer.weight_decay =
            t.value("weight_decay", cfg.train.optimizer.weight_decay);
        cfg.train.optimizer.momentum = t.value("momentum", cfg.train.optimizer.momentum);
        cfg.train.epochs = t.value("epochs", cfg.train.epochs);
        cfg.train.batch_size = t.value("batch_size", cfg.train.batch_size);
        cfg.train.temperature = t.value("temperature", cfg.train.temperature);
        cfg.train.warmup = t.value("warmup", cfg.train.warmup);
    }
    if (j.contains("seeds")) {
        cfg.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
    }
    cfg.output = j.value("output", cfg.output);
    return cfg;
}

ExperimentConfig config_from_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw FormatError("cannot open config: " + path);
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return config_from_json(text);
}

std::uint64_t config_hash(const ExperimentConfig& cfg) { return fnv1a64(config_to_json(cfg)); }

}  // namespace proreg
