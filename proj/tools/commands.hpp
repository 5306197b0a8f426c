#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "simdis/synth.hpp"
#include "simdis/trainer.hpp"
#include "simdis/verify.hpp"

namespace simdis::cli {

enum ExitCode : int { kOk = 0, kVerificationFailed = 1, kConfigError = 2, kNumericFailure = 3 };

struct ExperimentConfig {
    std::optional<synth::SynthSpec> synth;
    std::optional<std::filesystem::path> dataset;  // JSON Lines, relative to the config file
    std::size_t num_classes = 0;                   // for loaded datasets; 0 infers it
    train::TrainConfig train;
    std::filesystem::path output_dir = "results";
    std::vector<std::size_t> metrics_k = {5, 8};
    double test_fraction = 0.2;

    void validate() const;
};

nlohmann::json to_json(const ExperimentConfig& c);

/// Parses and validates a config document. Errors are ConfigErrors whose
/// message starts with "<source>:<line>:".
ExperimentConfig parse_config(const std::string& text, const std::string& source = "config");
ExperimentConfig load_config(const std::filesystem::path& path);

struct RunOptions {
    std::filesystem::path config_path;
    std::vector<std::string> strategies;  // empty: the config's strategy
    std::optional<std::uint64_t> seed;    // overrides train.seed and synth.seed
    bool force = false;
};

/// Generates or loads data, runs both training phases and writes
/// metrics.json, metrics.csv, trace.csv, checkpoint.json and (for generated
/// data) dataset.jsonl. With several strategies each gets a subdirectory
/// named after it.
int cmd_run(const RunOptions& options, std::ostream& out, std::ostream& err);

/// Runs one experiment fully in memory; used by cmd_run and the acceptance suite.
struct ExperimentResult {
    train::TrainResult contrastive;
    train::TrainResult probe;
    std::map<std::string, double> metrics;
};
ExperimentResult run_experiment(const synth::Dataset& data, const ExperimentConfig& config);

struct VerifyOptions {
    std::size_t universe = 20;
    std::uint64_t trials = 100000;
    std::uint64_t seed = 0;
    bool exhaustive = false;        // only the exhaustive check at `universe`
    std::size_t grad_batches = 5;   // seeded batches per strategy for the gradient suite
};

/// Theorem harness and gradient checks as JSON lines; exit 1 on any failure.
int cmd_verify(const VerifyOptions& options, std::ostream& out, std::ostream& err,
               const verify::FactorFn& factors = verify::default_factors());

/// The five-relation fixture table with exact fractions; exit 1 on mismatch.
int cmd_case_analysis(std::ostream& out, std::ostream& err);

/// Gradient checks for every strategy on a batch drawn from `seed`.
int cmd_grad_check(std::uint64_t seed, std::ostream& out, std::ostream& err);

}  // namespace simdis::cli
