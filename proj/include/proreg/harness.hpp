#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "proreg/datagen.hpp"
#include "proreg/model.hpp"
#include "proreg/oracle.hpp"

namespace proreg {

// zero_shot  evaluate the oracle, no training
// ft         random-init head, cross-entropy
// ft_plus    oracle-embedding init, cross-entropy
// kd         random-init head, constant-lambda blend (lambda = 0 is exactly ft)
// proreg     oracle-embedding init, adaptive blend scaled by alpha
// ensemble   the ft model's predictions mixed with y_zs at evaluation time
enum class Method { zero_shot, ft, ft_plus, kd, proreg, ensemble };

std::string method_name(Method m);
Method method_from_name(std::string_view name);

struct ExperimentConfig {
    BiasSpec data;
    double oracle_sigma = 0.05;
    double oracle_temperature = 0.3;
    Method method = Method::proreg;
    double alpha = kDefaultProregAlpha;  // proreg
    double lambda = 0.5;                 // kd and ensemble
    TrainConfig train;
    std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};
    std::string output = "results";
};

// The calibrated desk-scale task: five classes, ten semantic and ten context
// dimensions, strong train-time bias, context made uninformative in the OOD
// split. Oracle noise keeps zero-shot ID accuracy 5 to 15 points below FT ID
// accuracy; the shared 0.3 temperature keeps the zero-shot anchor soft enough
// that the adaptive blend can hold ID accuracy while it absorbs the oracle's
// robustness.
ExperimentConfig default_experiment();

std::string config_to_json(const ExperimentConfig& cfg);  // canonical (sorted keys)
ExperimentConfig config_from_json(const std::string& text);
ExperimentConfig config_from_json_file(const std::string& path);
std::uint64_t config_hash(const ExperimentConfig& cfg);

struct MetricsRow {
    std::string method;
    std::string params;  // "alpha=2", "lambda=0.5", or empty
    std::string seed;    // decimal seed, or "mean" / "std" for aggregates
    double id_accuracy = 0.0;
    double ood_accuracy = 0.0;
    double harmonic = 0.0;
    double wall_time_s = 0.0;  // logged, never part of the canonical CSV
};

// Top-1 accuracy; argmax ties break to the lowest class index.
double evaluate(const LinearModel& model, std::span<const Sample> split);
double evaluate(const ZeroShotOracle& oracle, std::span<const Sample> split);
// Mixes predict(model, x) with the sample's cached y_zs.
double evaluate_ensemble(const LinearModel& model, std::span<const Sample> split, double lambda);

// 2ab / (a + b); 0 when both are 0. Inputs must lie in [0, 1].
double harmonic_mean(double id_accuracy, double ood_accuracy);

// (1 - lambda) * f_ft + lambda * y_zs. lambda = 0 returns f_ft bit-identically.
ProbVector ensemble_predict(const ProbVector& f_ft, const ProbVector& y_zs, double lambda);

// One full run for one seed: generate data, build the oracle, cache y_zs,
// train as the method demands, evaluate both test splits.
MetricsRow run_single(const ExperimentConfig& cfg, std::uint64_t seed);

// run_single plus the trained head, for checkpointing. zero_shot runs train
// nothing and leave model empty.
struct SingleRun {
    MetricsRow row;
    std::optional<LinearModel> model;
};
SingleRun run_single_detailed(const ExperimentConfig& cfg, std::uint64_t seed);

// All configured seeds (parallel when PROREG_PARALLEL allows), rows in
// canonical order.
std::vector<MetricsRow> run_experiment(const ExperimentConfig& cfg);

enum class SweepParam { alpha, kd_lambda, ensemble_lambda };

// One run per grid point per seed; seed rows in canonical order with
// mean/std aggregate rows appended.
std::vector<MetricsRow> sweep(const ExperimentConfig& base, SweepParam param,
                              const std::vector<double>& grid);

// Sorts by (method, params, seed) so parallel execution never changes bytes.
void sort_canonical(std::vector<MetricsRow>& rows);

// Appends one "mean" and one "std" (sample std) row per (method, params)
// group of numeric-seed rows. The harmonic column aggregates the per-seed
// harmonic means.
void append_aggregates(std::vector<MetricsRow>& rows);

// RFC-4180 quoting for one field.
std::string csv_field(std::string_view raw);

// Fixed schema v1: schema_version,method,params,seed,id_accuracy,
// ood_accuracy,harmonic_mean. include_wall_time appends a wall_time_s column
// whose values vary run to run, so the canonical output leaves it off.
inline constexpr int kCsvSchemaVersion = 1;
std::string to_csv(const std::vector<MetricsRow>& rows, bool include_wall_time = false);
void write_csv_file(const std::string& path, const std::vector<MetricsRow>& rows,
                    bool include_wall_time = false);

// PROREG_PARALLEL override, else hardware concurrency, at least 1.
std::size_t parallelism();
// PROREG_OUT_DIR override, else the configured directory.
std::string output_dir(const std::string& configured);

std::string format_param(double value);  // shortest round-trip-free "%g"

}  // namespace proreg
