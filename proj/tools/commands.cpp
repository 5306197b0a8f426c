#include "commands.hpp"

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <set>
#include <sstream>

#include "simdis/fixtures.hpp"
#include "simdis/metrics.hpp"
#include "simdis/random.hpp"

namespace simdis::cli {

namespace fs = std::filesystem;

namespace {

std::size_t line_of_offset(const std::string& text, std::size_t offset) {
    offset = std::min(offset, text.size());
    return 1 + static_cast<std::size_t>(std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(offset), '\n'));
}

// Line of the first occurrence of "key" in the raw text, or 1.
std::size_t line_of_key(const std::string& text, const std::string& key) {
    const auto pos = text.find('"' + key + '"');
    return pos == std::string::npos ? 1 : line_of_offset(text, pos);
}

// Extracts the key name from messages of the form "key 'name': ...".
std::string key_in_message(const std::string& message) {
    const auto start = message.find("key '");
    if (start == std::string::npos) return {};
    const auto end = message.find('\'', start + 5);
    return end == std::string::npos ? std::string{} : message.substr(start + 5, end - start - 5);
}

template <class T>
void read_field(const nlohmann::json& j, const char* key, T& field) {
    if (!j.contains(key)) return;
    try {
        j.at(key).get_to(field);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("key '") + key + "': " + e.what());
    }
}

synth::SynthSpec parse_synth(const nlohmann::json& j) {
    if (!j.is_object()) throw ConfigError("key 'synth': expected an object");
    static const std::set<std::string> known = {"num_classes", "num_samples", "feature_dim", "avg_labels",
                                                "tail_exponent", "noise_sigma", "seed"};
    for (const auto& [key, value] : j.items()) {
        if (!known.contains(key)) throw ConfigError("key '" + key + "': unknown synth option");
    }
    synth::SynthSpec s;
    read_field(j, "num_classes", s.num_classes);
    read_field(j, "num_samples", s.num_samples);
    read_field(j, "feature_dim", s.feature_dim);
    read_field(j, "avg_labels", s.avg_labels);
    read_field(j, "tail_exponent", s.tail_exponent);
    read_field(j, "noise_sigma", s.noise_sigma);
    read_field(j, "seed", s.seed);
    return s;
}

void write_file(const fs::path& path, const std::string& content) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw ConfigError("cannot write " + path.string());
    os << content;
}

std::string dir_name(const Strategy& s) {
    auto name = s.name();
    std::replace(name.begin(), name.end(), ':', '_');
    std::replace(name.begin(), name.end(), '=', '-');
    return name;
}

void emit(std::ostream& out, const verify::PropertyReport& r) { out << verify::to_json(r).dump() << '\n'; }

// Seeded batches exercising every strategy, including an exponential-decay penalty.
std::vector<Strategy> grad_strategies() {
    auto s = all_strategies();
    s.push_back(Strategy::simdis(Placement::OutsideLog, ExponentialDecay{0.5}));
    return s;
}

ContrastiveBatch grad_batch(std::uint64_t seed) {
    Rng rng(seed);
    RandomBatchOptions o;
    o.samples = 8;
    o.dim = 4;
    o.universe = 5;
    o.max_labels = 3;
    o.temperature = 0.5;
    o.paired_views = true;
    return random_batch(rng, o);
}

}  // namespace

// ---------------------------------------------------------------------------
// Config

void ExperimentConfig::validate() const {
    if (synth.has_value() == dataset.has_value()) throw ConfigError("exactly one of 'synth' and 'dataset' is required");
    if (synth) synth->validate();
    train.validate();
    if (!(test_fraction >= 0.0 && test_fraction < 1.0)) throw ConfigError("key 'test_fraction': must lie in [0, 1)");
    for (auto k : metrics_k) {
        if (k < 1) throw ConfigError("key 'metrics_k': entries must be positive");
        if (synth && k > synth->num_classes) throw ConfigError("key 'metrics_k': k exceeds num_classes");
    }
    if (output_dir.empty()) throw ConfigError("key 'output_dir': must be nonempty");
}

nlohmann::json to_json(const ExperimentConfig& c) {
    nlohmann::json j;
    if (c.synth) j["synth"] = *c.synth;
    if (c.dataset) {
        j["dataset"] = c.dataset->string();
        j["num_classes"] = c.num_classes;
    }
    j["train"] = c.train;
    j["output_dir"] = c.output_dir.string();
    j["metrics_k"] = c.metrics_k;
    j["test_fraction"] = c.test_fraction;
    return j;
}

ExperimentConfig parse_config(const std::string& text, const std::string& source) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError(source + ":" + std::to_string(line_of_offset(text, e.byte == 0 ? 0 : e.byte - 1)) + ": " +
                          e.what());
    }
    try {
        if (!j.is_object()) throw ConfigError("top level must be an object");
        static const std::set<std::string> known = {"synth",     "dataset",       "num_classes", "train",
                                                    "output_dir", "metrics_k",    "test_fraction"};
        for (const auto& [key, value] : j.items()) {
            if (!known.contains(key)) throw ConfigError("key '" + key + "': unknown option");
        }
        ExperimentConfig c;
        if (j.contains("synth")) c.synth = parse_synth(j.at("synth"));
        if (j.contains("dataset")) {
            std::string path;
            read_field(j, "dataset", path);
            c.dataset = path;
        }
        read_field(j, "num_classes", c.num_classes);
        if (j.contains("train")) {
            train::from_json(j.at("train"), c.train);
        }
        std::string out_dir = c.output_dir.string();
        read_field(j, "output_dir", out_dir);
        c.output_dir = out_dir;
        read_field(j, "metrics_k", c.metrics_k);
        read_field(j, "test_fraction", c.test_fraction);
        c.validate();
        return c;
    } catch (const ConfigError& e) {
        const std::string msg = e.what();
        const auto key = key_in_message(msg);
        const std::size_t line = key.empty() ? 1 : line_of_key(text, key);
        throw ConfigError(source + ":" + std::to_string(line) + ": " + msg);
    }
}

ExperimentConfig load_config(const fs::path& path) {
    std::ifstream is(path);
    if (!is) throw ConfigError(path.string() + ":1: cannot open config file");
    std::stringstream ss;
    ss << is.rdbuf();
    auto c = parse_config(ss.str(), path.string());
    if (c.dataset && c.dataset->is_relative()) c.dataset = path.parent_path() / *c.dataset;
    return c;
}

// ---------------------------------------------------------------------------
// run

ExperimentResult run_experiment(const synth::Dataset& data, const ExperimentConfig& config) {
    const std::size_t n = data.num_samples();
    std::size_t n_test = static_cast<std::size_t>(std::llround(config.test_fraction * static_cast<double>(n)));
    if (n - n_test < 2) throw ConfigError("key 'test_fraction': leaves fewer than 2 training samples");
    const auto train_part = data.slice(0, n - n_test);
    const auto eval_part = n_test > 0 ? data.slice(n - n_test, n) : train_part;

    ExperimentResult r;
    r.contrastive = train::train_contrastive(train_part, config.train);
    r.probe = train::train_probe(train_part, r.contrastive.params, config.train);
    r.probe.trace.contrastive = r.contrastive.trace.contrastive;
    r.metrics = train::evaluate(r.probe.params, eval_part, config.train.probe_threshold, config.metrics_k);
    r.probe.trace.metrics = r.metrics;
    return r;
}

namespace {

int run_one(const ExperimentConfig& config, const synth::Dataset& data, bool generated, const fs::path& dir,
            std::ostream& out, std::ostream& err) {
    fs::create_directories(dir);
    if (generated) {
        std::ofstream os(dir / "dataset.jsonl", std::ios::binary);
        synth::write_jsonl(os, data);
    }
    try {
        auto r = run_experiment(data, config);
        write_file(dir / "checkpoint.json", train::checkpoint_to_json(r.probe.params, config.train).dump() + "\n");
        write_file(dir / "trace.csv", r.probe.trace.to_csv());
        write_file(dir / "metrics.json", metrics::to_json(r.metrics).dump(2) + "\n");
        write_file(dir / "metrics.csv", metrics::to_csv(r.metrics));
        out << nlohmann::json{{"strategy", config.train.strategy.name()},
                              {"output_dir", dir.string()},
                              {"metrics", metrics::to_json(r.metrics)}}
                   .dump()
            << '\n';
        return kOk;
    } catch (const train::DivergenceError& e) {
        write_file(dir / "trace.csv", e.trace().to_csv());
        err << "training diverged: " << e.what() << '\n';
        return kNumericFailure;
    } catch (const NumericError& e) {
        err << "numeric failure: " << e.what() << '\n';
        return kNumericFailure;
    }
}

bool nonempty_dir(const fs::path& p) { return fs::exists(p) && (!fs::is_directory(p) || !fs::is_empty(p)); }

}  // namespace

int cmd_run(const RunOptions& options, std::ostream& out, std::ostream& err) {
    ExperimentConfig config;
    std::vector<Strategy> strategies;
    try {
        config = load_config(options.config_path);
        if (options.seed) {
            config.train.seed = *options.seed;
            if (config.synth) config.synth->seed = *options.seed;
        }
        for (const auto& name : options.strategies) strategies.push_back(Strategy::parse(name));
        if (strategies.empty()) strategies.push_back(config.train.strategy);
    } catch (const ConfigError& e) {
        err << e.what() << '\n';
        return kConfigError;
    }

    std::vector<fs::path> dirs;
    for (const auto& s : strategies) {
        dirs.push_back(strategies.size() == 1 ? config.output_dir : config.output_dir / dir_name(s));
    }
    for (const auto& d : dirs) {
        if (nonempty_dir(d) && !options.force) {
            err << "refusing to overwrite existing output directory " << d.string() << " (use --force)\n";
            return kConfigError;
        }
    }

    synth::Dataset data;
    try {
        if (config.synth) {
            data = synth::generate(*config.synth);
        } else {
            std::ifstream is(*config.dataset);
            if (!is) throw ConfigError("cannot open dataset " + config.dataset->string());
            data = synth::read_jsonl(is, config.num_classes);
            for (auto k : config.metrics_k) {
                if (k > data.num_classes()) throw ConfigError("metrics_k entry exceeds the dataset's class count");
            }
        }
    } catch (const ConfigError& e) {
        err << e.what() << '\n';
        return kConfigError;
    }

    int status = kOk;
    for (std::size_t k = 0; k < strategies.size(); ++k) {
        auto c = config;
        c.train.strategy = strategies[k];
        try {
            status = std::max(status, run_one(c, data, config.synth.has_value(), dirs[k], out, err));
        } catch (const ConfigError& e) {
            err << e.what() << '\n';
            return kConfigError;
        }
    }
    return status;
}

// ---------------------------------------------------------------------------
// verify / grad-check / case-analysis

int cmd_verify(const VerifyOptions& options, std::ostream& out, std::ostream& err, const verify::FactorFn& factors) {
    bool ok = true;
    try {
        std::vector<verify::PropertyReport> reports;
        auto add = [&](std::vector<verify::PropertyReport> rs, const std::string& suffix) {
            for (auto& r : rs) {
                r.property_name += suffix;
                ok = ok && r.passed();
                emit(out, r);
            }
        };
        if (options.exhaustive) {
            add(verify::check_theorems(options.universe, verify::Exhaustive{}, factors),
                "/exhaustive/U=" + std::to_string(options.universe));
            return ok ? kOk : kVerificationFailed;
        }
        for (std::size_t u = 2; u <= 5; ++u) {
            add(verify::check_theorems(u, verify::Exhaustive{}, factors), "/exhaustive/U=" + std::to_string(u));
        }
        add(verify::check_theorems(options.universe, verify::Randomized{options.trials, options.seed}, factors),
            "/randomized/U=" + std::to_string(options.universe));
        for (const auto& s : grad_strategies()) {
            for (std::size_t b = 0; b < options.grad_batches; ++b) {
                auto r = verify::grad_check(grad_batch(derive_seed(options.seed, b)), s);
                r.seed = options.seed;
                ok = ok && r.passed();
                emit(out, r);
            }
        }
    } catch (const ConfigError& e) {
        err << e.what() << '\n';
        return kConfigError;
    }
    return ok ? kOk : kVerificationFailed;
}

int cmd_grad_check(std::uint64_t seed, std::ostream& out, std::ostream&) {
    bool ok = true;
    const auto batch = grad_batch(seed);
    for (const auto& s : grad_strategies()) {
        auto r = verify::grad_check(batch, s);
        r.seed = seed;
        ok = ok && r.passed();
        emit(out, r);
    }
    return ok ? kOk : kVerificationFailed;
}

int cmd_case_analysis(std::ostream& out, std::ostream& err) {
    const fixtures::RelationFixture f;
    struct Expected {
        std::size_t overlap, excess;
        Fraction similarity, dissimilarity, weight;
    };
    const std::array<Expected, 5> expected = {{
        {0, 3, {0, 1}, {1, 4}, {0, 1}},
        {3, 0, {1, 1}, {1, 1}, {1, 1}},
        {1, 2, {1, 3}, {1, 3}, {1, 9}},
        {2, 0, {2, 3}, {1, 1}, {2, 3}},
        {3, 2, {1, 1}, {1, 3}, {1, 3}},
    }};

    out << std::left << std::setw(10) << "relation" << std::setw(8) << "|y_s|" << std::setw(8) << "|y_d|"
        << std::setw(8) << "K_s" << std::setw(8) << "K_d" << "K_s*K_d" << '\n';
    bool ok = true;
    for (std::size_t m = 0; m < 5; ++m) {
        const auto& t = f.samples[m];
        const auto kind = classify_relation(f.anchor, t);
        const auto exact = exact_factors(f.anchor, t);
        const auto overlap = f.anchor.intersection_size(t);
        const auto excess = t.difference_size(f.anchor);
        out << std::setw(10) << to_string(kind) << std::setw(8) << overlap << std::setw(8) << excess << std::setw(8)
            << exact.similarity.to_string() << std::setw(8) << exact.dissimilarity.to_string()
            << exact.weight.to_string() << '\n';
        const auto& e = expected[m];
        const bool row_ok = static_cast<std::size_t>(kind) == m + 1 && overlap == e.overlap && excess == e.excess &&
                            exact.similarity == e.similarity && exact.dissimilarity == e.dissimilarity &&
                            exact.weight == e.weight;
        if (!row_ok) {
            err << "case analysis mismatch in row R" << (m + 1) << '\n';
            ok = false;
        }
    }
    return ok ? kOk : kVerificationFailed;
}

}  // namespace simdis::cli
