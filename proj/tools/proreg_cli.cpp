// Command-line front end: data generation, training, evaluation, sweeps and
// question rewriting. All heavy lifting lives in the library; this file only
// parses arguments and moves bytes.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "proreg/datagen.hpp"
#include "proreg/harness.hpp"
#include "proreg/model.hpp"
#include "proreg/oracle.hpp"
#include "proreg/q2s.hpp"
#include "proreg/rng.hpp"
#include "proreg/serialize.hpp"

namespace {

namespace fs = std::filesystem;

std::string fixed6(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.6f", v);
    return buf;
}

// An aborted run leaves a readable partial file: every completed row, then a
// final sentinel line so downstream tooling never mistakes it for a full run.
void flush_truncated(const std::string& path, std::vector<proreg::MetricsRow> rows,
                     const std::string& reason) {
    proreg::sort_canonical(rows);
    std::string text = proreg::to_csv(rows);
    text += "# truncated: " + reason + "\r\n";
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
}

std::string ensure_output_dir(const std::string& configured) {
    std::string dir = proreg::output_dir(configured);
    fs::create_directories(dir);
    return dir;
}

int cmd_generate_data(const std::string& spec_path, const std::string& out_path,
                      const std::string& jsonl_path, bool no_cache) {
    proreg::ExperimentConfig cfg = proreg::config_from_json_file(spec_path);
    proreg::Dataset ds = proreg::generate(cfg.data);
    if (!no_cache) {
        proreg::ZeroShotOracle oracle =
            proreg::build_oracle(ds.spec, cfg.oracle_sigma,
                                 proreg::derive_stream(cfg.data.seed, "oracle"),
                                 cfg.oracle_temperature);
        proreg::cache_zero_shot_labels(oracle, ds);
    }
    proreg::save_dataset(ds, out_path);
    std::cout << "wrote " << out_path << " (" << ds.samples.size() << " samples"
              << (ds.has_zero_shot ? ", zero-shot cached" : "") << ")\n";
    if (!jsonl_path.empty()) {
        proreg::export_jsonl(ds, jsonl_path);
        std::cout << "wrote " << jsonl_path << "\n";
    }
    return 0;
}

int cmd_train(const std::string& config_path) {
    proreg::ExperimentConfig cfg = proreg::config_from_json_file(config_path);
    std::string dir = ensure_output_dir(cfg.output);
    std::string csv_path = dir + "/results.csv";
    std::uint64_t hash = proreg::config_hash(cfg);

    std::vector<proreg::MetricsRow> rows;
    for (std::uint64_t seed : cfg.seeds) {
        proreg::SingleRun run;
        try {
            run = proreg::run_single_detailed(cfg, seed);
        } catch (const std::exception& e) {
            flush_truncated(csv_path, rows, e.what());
            std::cerr << "error: seed " << seed << ": " << e.what() << "\n"
                      << "partial results flushed to " << csv_path << "\n";
            return 1;
        }
        rows.push_back(run.row);
        if (run.model) {
            std::string ckpt = dir + "/" + proreg::method_name(cfg.method) + "-seed" +
                               std::to_string(seed) + ".ckpt";
            proreg::save_checkpoint(*run.model, hash, ckpt);
            std::cout << "wrote " << ckpt << "\n";
        }
    }
    proreg::sort_canonical(rows);
    proreg::write_csv_file(csv_path, rows);
    std::cout << "wrote " << csv_path << " (" << rows.size() << " rows)\n";
    return 0;
}

int cmd_evaluate(const std::string& ckpt_path, const std::string& ds_path) {
    proreg::Checkpoint ckpt = proreg::load_checkpoint(ckpt_path);
    proreg::Dataset ds = proreg::load_dataset(ds_path);
    double id_acc = proreg::evaluate(ckpt.model, ds.id_test());
    double ood_acc = proreg::evaluate(ckpt.model, ds.ood_test());
    std::cout << "id_accuracy,ood_accuracy,harmonic_mean\r\n"
              << fixed6(id_acc) << ',' << fixed6(ood_acc) << ','
              << fixed6(proreg::harmonic_mean(id_acc, ood_acc)) << "\r\n";
    return 0;
}

int cmd_sweep(const std::string& template_path, const std::string& param_name,
              const std::string& grid_text) {
    proreg::ExperimentConfig base = proreg::config_from_json_file(template_path);

    proreg::SweepParam param;
    if (param_name == "alpha") {
        param = proreg::SweepParam::alpha;
    } else if (param_name == "kd_lambda") {
        param = proreg::SweepParam::kd_lambda;
    } else if (param_name == "ensemble_lambda") {
        param = proreg::SweepParam::ensemble_lambda;
    } else {
        std::cerr << "error: --param must be alpha, kd_lambda or ensemble_lambda\n";
        return 1;
    }

    std::vector<double> grid;
    std::stringstream ss(grid_text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (item.empty()) continue;
        grid.push_back(std::stod(item));
    }
    if (grid.empty()) {
        std::cerr << "error: --grid is empty\n";
        return 1;
    }

    std::string dir = ensure_output_dir(base.output);
    std::string csv_path = dir + "/sweep-" + param_name + ".csv";

    // One grid point at a time (seeds within a point still run in parallel) so
    // an abort can flush everything already finished.
    std::vector<proreg::MetricsRow> rows;
    for (double value : grid) {
        proreg::ExperimentConfig point = base;
        switch (param) {
            case proreg::SweepParam::alpha:
                point.method = proreg::Method::proreg;
                point.alpha = value;
                break;
            case proreg::SweepParam::kd_lambda:
                point.method = proreg::Method::kd;
                point.lambda = value;
                break;
            case proreg::SweepParam::ensemble_lambda:
                point.method = proreg::Method::ensemble;
                point.lambda = value;
                break;
        }
        std::vector<proreg::MetricsRow> point_rows;
        try {
            point_rows = proreg::run_experiment(point);
        } catch (const std::exception& e) {
            flush_truncated(csv_path, rows, e.what());
            std::cerr << "error: " << param_name << "=" << proreg::format_param(value) << ": "
                      << e.what() << "\n"
                      << "partial results flushed to " << csv_path << "\n";
            return 1;
        }
        rows.insert(rows.end(), point_rows.begin(), point_rows.end());
    }
    proreg::sort_canonical(rows);
    proreg::append_aggregates(rows);
    proreg::sort_canonical(rows);
    proreg::write_csv_file(csv_path, rows);
    std::cout << "wrote " << csv_path << " (" << rows.size() << " rows)\n";
    return 0;
}

int cmd_q2s(const std::string& input_path, bool strict, const std::string& mask_token) {
    std::ifstream file;
    std::istream* in = &std::cin;
    if (!input_path.empty() && input_path != "-") {
        file.open(input_path);
        if (!file) {
            std::cerr << "error: cannot open " << input_path << "\n";
            return 1;
        }
        in = &file;
    }

    proreg::Q2sOptions options;
    if (!mask_token.empty()) options.mask_token = mask_token;

    bool any_unsupported = false;
    std::string line;
    while (std::getline(*in, line)) {
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        proreg::Question q = proreg::normalize_question(line);
        proreg::QuestionType type = proreg::classify(q);
        std::optional<proreg::Statement> st;
        if (type != proreg::QuestionType::unsupported) st = proreg::to_statement(q, options);

        nlohmann::json rec;
        rec["question"] = line;
        if (st) {
            rec["type"] = type == proreg::QuestionType::open_ended ? "open_ended" : "closed_ended";
            rec["statement"] = st->text;
            rec["route"] = st->route == proreg::Route::mlm ? "mlm" : "itm";
            if (st->mask_index) {
                rec["mask_index"] = *st->mask_index;
            } else {
                rec["mask_index"] = nullptr;
            }
        } else {
            // A supported-looking question that no rule family converts is
            // reported as unsupported rather than guessed at.
            any_unsupported = true;
            rec["type"] = "unsupported";
            rec["statement"] = nullptr;
            rec["route"] = nullptr;
            rec["mask_index"] = nullptr;
        }
        std::cout << rec.dump() << "\n";
    }
    return strict && any_unsupported ? 1 : 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"proreg: desk-scale lab for regularized fine-tuning under contextual bias"};
    app.require_subcommand(1);

    auto* gen = app.add_subcommand("generate-data", "Generate a biased dataset file");
    std::string gen_spec, gen_out, gen_jsonl;
    bool gen_no_cache = false;
    gen->add_option("spec", gen_spec, "Experiment config JSON (data and oracle sections)")
        ->required()
        ->check(CLI::ExistingFile);
    gen->add_option("-o,--output", gen_out, "Output dataset path")->required();
    gen->add_option("--jsonl", gen_jsonl, "Also export a JSON-lines copy here");
    gen->add_flag("--no-cache", gen_no_cache, "Skip the zero-shot caching pass");

    auto* train = app.add_subcommand("train", "Run the configured method over all seeds");
    std::string train_config;
    train->add_option("config", train_config, "Experiment config JSON")
        ->required()
        ->check(CLI::ExistingFile);

    auto* eval = app.add_subcommand("evaluate", "Evaluate a checkpoint on a dataset");
    std::string eval_ckpt, eval_ds;
    eval->add_option("checkpoint", eval_ckpt, "Checkpoint file")->required()->check(
        CLI::ExistingFile);
    eval->add_option("dataset", eval_ds, "Dataset file")->required()->check(CLI::ExistingFile);

    auto* sweep = app.add_subcommand("sweep", "Grid sweep over alpha or lambda");
    std::string sweep_template, sweep_param, sweep_grid;
    sweep->add_option("template", sweep_template, "Experiment config JSON template")
        ->required()
        ->check(CLI::ExistingFile);
    sweep->add_option("--param", sweep_param, "alpha, kd_lambda or ensemble_lambda")->required();
    sweep->add_option("--grid", sweep_grid, "Comma-separated grid values")->required();

    auto* q2s = app.add_subcommand("q2s", "Rewrite questions to statements (JSON-lines out)");
    std::string q2s_input, q2s_mask;
    bool q2s_strict = false;
    q2s->add_option("input", q2s_input, "Questions file, one per line ('-' or absent: stdin)");
    q2s->add_flag("--strict", q2s_strict, "Exit nonzero if any question is unsupported");
    q2s->add_option("--mask", q2s_mask, "Mask placeholder token (default [MASK])");

    CLI11_PARSE(app, argc, argv);

    try {
        if (gen->parsed()) return cmd_generate_data(gen_spec, gen_out, gen_jsonl, gen_no_cache);
        if (train->parsed()) return cmd_train(train_config);
        if (eval->parsed()) return cmd_evaluate(eval_ckpt, eval_ds);
        if (sweep->parsed()) return cmd_sweep(sweep_template, sweep_param, sweep_grid);
        if (q2s->parsed()) return cmd_q2s(q2s_input, q2s_strict, q2s_mask);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
