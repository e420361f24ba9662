#include "proreg/datagen.hpp"

#include <cmath>
#include <fstream>
#include <stdexcept>

#include "json.hpp"
#include "proreg/rng.hpp"
#include "proreg/serialize.hpp"

namespace proreg {

namespace {

constexpr std::string_view kDatasetMagic = "PRDS";

std::vector<std::vector<double>> orthonormal_rows(std::uint32_t rows, std::uint32_t dim, Rng& rng) {
    std::vector<std::vector<double>> out;
    out.reserve(rows);
    for (std::uint32_t r = 0; r < rows; ++r) {
        for (;;) {
            std::vector<double> v(dim);
            for (double& x : v) x = rng.gaussian();
            for (const auto& prev : out) {
                double proj = dot(v, prev);
                for (std::uint32_t d = 0; d < dim; ++d) v[d] -= proj * prev[d];
            }
            double norm = l2_norm(v);
            if (norm < 1e-6) continue;  // essentially impossible; redraw to stay safe
            for (double& x : v) x /= norm;
            out.push_back(std::move(v));
            break;
        }
    }
    return out;
}

// Labels are assigned in exact balance (counts differ by at most one) and
// then shuffled, so empirical class balance never drifts with the seed.
std::vector<std::uint32_t> balanced_labels(std::uint64_t n, std::uint32_t classes, Rng& rng) {
    std::vector<std::uint32_t> labels;
    labels.reserve(n);
    for (std::uint64_t i = 0; i < n; ++i) {
        labels.push_back(static_cast<std::uint32_t>(i % classes));
    }
    rng.shuffle(labels);
    return labels;
}

void generate_split(Dataset& ds, Split split, std::uint64_t n, double agree_rate,
                    std::string_view stream_tag) {
    const BiasSpec& spec = ds.spec;
    Rng rng(derive_stream(spec.seed, stream_tag));
    std::vector<std::uint32_t> labels = balanced_labels(n, spec.class_count, rng);
    for (std::uint64_t i = 0; i < n; ++i) {
        std::uint32_t label = labels[i];
        std::vector<double> x(spec.feature_dim());
        for (std::uint32_t d = 0; d < spec.semantic_dim; ++d) {
            x[d] = ds.directions.semantic[label][d] + spec.noise_std * rng.gaussian();
        }
        std::uint32_t ctx = label;
        if (!(rng.uniform() < agree_rate)) {
            std::size_t r = rng.index(spec.class_count - 1);
            ctx = static_cast<std::uint32_t>(r >= label ? r + 1 : r);
        }
        for (std::uint32_t d = 0; d < spec.context_dim; ++d) {
            x[spec.semantic_dim + d] = ds.directions.context[ctx][d];
        }
        Sample s;
        s.x = normalized(Embedding{std::move(x), false});
        s.label = label;
        s.split = split;
        ds.samples.push_back(std::move(s));
    }
}

void write_spec(ByteWriter& w, const BiasSpec& spec) {
    w.u32(spec.class_count);
    w.u32(spec.semantic_dim);
    w.u32(spec.context_dim);
    w.u64(spec.train_size);
    w.u64(spec.id_test_size);
    w.u64(spec.ood_test_size);
    w.f64(spec.bias_strength);
    w.f64(spec.ood_bias);
    w.f64(spec.noise_std);
    w.u64(spec.seed);
}

BiasSpec read_spec(ByteReader& r) {
    BiasSpec spec;
    spec.class_count = r.u32();
    spec.semantic_dim = r.u32();
    spec.context_dim = r.u32();
    spec.train_size = r.u64();
    spec.id_test_size = r.u64();
    spec.ood_test_size = r.u64();
    spec.bias_strength = r.f64();
    spec.ood_bias = r.f64();
    spec.noise_std = r.f64();
    spec.seed = r.u64();
    return spec;
}

const char* split_name(Split s) {
    switch (s) {
        case Split::train: return "train";
        case Split::id_test: return "id_test";
        case Split::ood_test: return "ood_test";
    }
    return "?";
}

}  // namespace

std::span<const Sample> Dataset::train() const {
    return std::span<const Sample>(samples).subspan(0, spec.train_size);
}

std::span<const Sample> Dataset::id_test() const {
    return std::span<const Sample>(samples).subspan(spec.train_size, spec.id_test_size);
}

std::span<const Sample> Dataset::ood_test() const {
    return std::span<const Sample>(samples).subspan(spec.train_size + spec.id_test_size,
                                                    spec.ood_test_size);
}

std::span<const Sample> Dataset::split(Split which) const {
    switch (which) {
        case Split::train: return train();
        case Split::id_test: return id_test();
        case Split::ood_test: return ood_test();
    }
    throw std::invalid_argument("Dataset::split: unknown split");
}

void validate(const BiasSpec& spec) {
    if (spec.class_count < 2) throw std::invalid_argument("BiasSpec: need at least two classes");
    if (spec.semantic_dim < spec.class_count) {
        throw std::invalid_argument("BiasSpec: semantic_dim must be at least class_count");
    }
    if (spec.context_dim < spec.class_count) {
        throw std::invalid_argument("BiasSpec: context_dim must be at least class_count");
    }
    if (spec.train_size == 0 || spec.id_test_size == 0 || spec.ood_test_size == 0) {
        throw std::invalid_argument("BiasSpec: every split must be non-empty");
    }
    if (spec.train_size + spec.id_test_size + spec.ood_test_size > 100'000'000ull) {
        throw std::invalid_argument("BiasSpec: dataset too large");
    }
    if (!(spec.bias_strength >= 0.0 && spec.bias_strength <= 1.0)) {
        throw std::invalid_argument("BiasSpec: bias_strength must lie in [0, 1]");
    }
    if (!(spec.ood_bias >= 0.0 && spec.ood_bias <= 1.0)) {
        throw std::invalid_argument("BiasSpec: ood_bias must lie in [0, 1]");
    }
    if (!(spec.noise_std >= 0.0) || !std::isfinite(spec.noise_std)) {
        throw std::invalid_argument("BiasSpec: noise_std must be non-negative and finite");
    }
}

PlantedDirections planted_directions(const BiasSpec& spec) {
    validate(spec);
    Rng rng(derive_stream(spec.seed, "directions"));
    PlantedDirections dirs;
    dirs.semantic = orthonormal_rows(spec.class_count, spec.semantic_dim, rng);
    dirs.context = orthonormal_rows(spec.class_count, spec.context_dim, rng);
    return dirs;
}

Dataset generate(const BiasSpec& spec) {
    validate(spec);
    Dataset ds;
    ds.spec = spec;
    ds.directions = planted_directions(spec);
    ds.samples.reserve(spec.train_size + spec.id_test_size + spec.ood_test_size);
    generate_split(ds, Split::train, spec.train_size, spec.bias_strength, "train");
    generate_split(ds, Split::id_test, spec.id_test_size, spec.bias_strength, "id_test");
    generate_split(ds, Split::ood_test, spec.ood_test_size, spec.ood_bias, "ood_test");
    return ds;
}

void save_dataset(const Dataset& ds, const std::string& path) {
    ByteWriter body;
    write_spec(body, ds.spec);
    body.u8(ds.has_zero_shot ? 1 : 0);
    if (ds.has_zero_shot) {
        body.f64(ds.oracle_echo.sigma);
        body.f64(ds.oracle_echo.temperature);
        body.u64(ds.oracle_echo.seed);
    }
    for (const auto& row : ds.directions.semantic) {
        for (double v : row) body.f64(v);
    }
    for (const auto& row : ds.directions.context) {
        for (double v : row) body.f64(v);
    }
    for (const Sample& s : ds.samples) {
        body.u32(s.label);
        for (double v : s.x.values) body.f64(v);
        if (ds.has_zero_shot) {
            if (!s.y_zs) throw std::logic_error("save_dataset: cached flag set but y_zs missing");
            for (std::size_t i = 0; i < s.y_zs->class_count(); ++i) body.f64((*s.y_zs)[i]);
        }
    }
    std::vector<unsigned char> file = seal_envelope(kDatasetMagic, kDatasetFormatVersion,
                                                    body.data());
    write_file(path, file);
}

Dataset load_dataset(const std::string& path) {
    std::vector<unsigned char> file = read_file(path);
    Envelope env = open_envelope(kDatasetMagic, 1, kDatasetFormatVersion, file);
    ByteReader r(env.body);

    Dataset ds;
    ds.spec = read_spec(r);
    validate(ds.spec);
    if (env.version >= 2) {
        ds.has_zero_shot = r.u8() != 0;
        if (ds.has_zero_shot) {
            ds.oracle_echo.sigma = r.f64();
            ds.oracle_echo.temperature = r.f64();
            ds.oracle_echo.seed = r.u64();
        }
    }
    auto read_rows = [&r](std::uint32_t rows, std::uint32_t dim) {
        std::vector<std::vector<double>> out(rows, std::vector<double>(dim));
        for (auto& row : out) {
            for (double& v : row) v = r.f64();
        }
        return out;
    };
    ds.directions.semantic = read_rows(ds.spec.class_count, ds.spec.semantic_dim);
    ds.directions.context = read_rows(ds.spec.class_count, ds.spec.context_dim);

    std::uint64_t total = ds.spec.train_size + ds.spec.id_test_size + ds.spec.ood_test_size;
    ds.samples.reserve(total);
    for (std::uint64_t i = 0; i < total; ++i) {
        Sample s;
        s.label = r.u32();
        if (s.label >= ds.spec.class_count) {
            throw FormatError("load_dataset: label out of range");
        }
        s.x.values.resize(ds.spec.feature_dim());
        for (double& v : s.x.values) v = r.f64();
        s.x.unit_norm = true;
        if (ds.has_zero_shot) {
            std::vector<double> probs(ds.spec.class_count);
            for (double& v : probs) v = r.f64();
            s.y_zs = ProbVector::from_probabilities(std::move(probs));
        }
        s.split = i < ds.spec.train_size                          ? Split::train
                  : i < ds.spec.train_size + ds.spec.id_test_size ? Split::id_test
                                                                  : Split::ood_test;
        ds.samples.push_back(std::move(s));
    }
    r.expect_end("load_dataset");
    return ds;
}

void export_jsonl(const Dataset& ds, const std::string& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw FormatError("cannot open file for writing: " + path);

    nlohmann::json spec_json{{"class_count", ds.spec.class_count},
                             {"semantic_dim", ds.spec.semantic_dim},
                             {"context_dim", ds.spec.context_dim},
                             {"train_size", ds.spec.train_size},
                             {"id_test_size", ds.spec.id_test_size},
                             {"ood_test_size", ds.spec.ood_test_size},
                             {"bias_strength", ds.spec.bias_strength},
                             {"ood_bias", ds.spec.ood_bias},
                             {"noise_std", ds.spec.noise_std},
                             {"seed", ds.spec.seed}};
    nlohmann::json meta{{"format", "proreg-dataset"},
                        {"version", kDatasetFormatVersion},
                        {"spec", spec_json},
                        {"cached_zero_shot", ds.has_zero_shot}};
    out << meta.dump() << '\n';

    for (const Sample& s : ds.samples) {
        nlohmann::json line{{"split", split_name(s.split)}, {"label", s.label}, {"x", s.x.values}};
        if (s.y_zs) {
            line["y_zs"] = s.y_zs->probs();
        } else {
            line["y_zs"] = nullptr;
        }
        out << line.dump() << '\n';
    }
    if (!out) throw FormatError("write failed: " + path);
}

}  // namespace proreg
