// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <sstream>
#include <string>

#include "commands.hpp"
#include "oracles.hpp"
#include "simdis/fixtures.hpp"
#include "simdis/losses.hpp"
#include "simdis/metrics.hpp"
#include "simdis/random.hpp"
#include "simdis/verify.hpp"
#include "test_support.hpp"

using namespace simdis;

namespace {

constexpr double kCaseAnalysisSeconds = 1.0;
constexpr double kTheoremSeconds = 30.0;
constexpr std::uint64_t kTheoremTrials = 100000;
constexpr std::size_t kTheoremUniverse = 20;
constexpr int kReductionBatches = 100;
constexpr double kReductionTolerance = 1e-12;
constexpr int kOracleBatches = 1000;
constexpr std::size_t kOracleMaxBatch = 32;
constexpr double kOracleTolerance = 1e-10;
constexpr int kGradientBatches = 100;
constexpr double kGradientTolerance = 1e-6;
constexpr double kIdentityTolerance = 1e-12;
constexpr int kBenchmarkSeeds = 5;
constexpr int kBenchmarkWinsNeeded = 3;
constexpr double kBenchmarkSeconds = 300.0;
constexpr int kMetricCases = 50;
constexpr double kMetricTolerance = 1e-12;

struct Outcome {
    bool pass = false;
    std::string detail;
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(const char* f, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, v);
    return buf;
}

Outcome case_analysis() {
    const auto t0 = std::chrono::steady_clock::now();
    std::ostringstream out, err;
    const int status = cli::cmd_case_analysis(out, err);

    const fixtures::RelationFixture f;
    const Fraction ks[] = {{0, 1}, {1, 1}, {1, 3}, {2, 3}, {1, 1}};
    const Fraction kd[] = {{1, 4}, {1, 1}, {1, 3}, {1, 1}, {1, 3}};
    const Fraction w[] = {{0, 1}, {1, 1}, {1, 9}, {2, 3}, {1, 3}};
    int mismatches = 0;
    for (std::size_t r = 0; r < 5; ++r) {
        const auto e = exact_factors(f.anchor, f.samples[r]);
        mismatches += !(e.similarity == ks[r]) + !(e.dissimilarity == kd[r]) + !(e.weight == w[r]);
    }
    const double secs = seconds_since(t0);
    return {status == cli::kOk && mismatches == 0 && secs < kCaseAnalysisSeconds,
            "exit " + std::to_string(status) + ", " + std::to_string(mismatches) + " mismatches, " +
                fmt("%.3f s", secs)};
}

Outcome theorem_suite() {
    const auto t0 = std::chrono::steady_clock::now();
    std::uint64_t failures = 0, trials = 0;
    for (std::size_t u = 2; u <= 5; ++u) {
        for (const auto& r : verify::check_theorems(u, verify::Exhaustive{})) {
            failures += r.failures;
            trials += r.trials;
        }
    }
    std::uint64_t random_trials = 0;
    for (const auto& r : verify::check_theorems(kTheoremUniverse, verify::Randomized{kTheoremTrials, 0})) {
        failures += r.failures;
        trials += r.trials;
        random_trials = std::max(random_trials, r.trials);
    }
    const double secs = seconds_since(t0);
    return {failures == 0 && random_trials == kTheoremTrials && secs < kTheoremSeconds,
            std::to_string(trials) + " checks, " + std::to_string(failures) + " failures, " + fmt("%.2f s", secs)};
}

Outcome reduction_identity() {
    double worst = 0;
    for (int k = 0; k < kReductionBatches; ++k) {
        Rng rng(derive_seed(3, static_cast<std::uint64_t>(k)));
        RandomBatchOptions o;
        o.samples = 2 + rng() % 31;
        o.universe = 8;
        auto b = random_batch(rng, o);
        const auto shared = random_label_set(rng, o.universe);
        std::fill(b.labels.begin(), b.labels.end(), shared);
        const double all = loss_supcon(b, Strategy::all()).total;
        for (auto p : {Placement::InsideLog, Placement::OutsideLog, Placement::TemperatureScaled}) {
            worst = std::max(worst, std::abs(loss_simdis(b, p).total - all));
        }
    }
    return {worst < kReductionTolerance, "max |diff| " + fmt("%.3g", worst)};
}

Outcome oracle_equivalence() {
    double worst = 0;
    for (int k = 0; k < kOracleBatches; ++k) {
        Rng rng(derive_seed(4, static_cast<std::uint64_t>(k)));
        RandomBatchOptions o;
        o.samples = 2 + rng() % (kOracleMaxBatch - 1);
        o.dim = 2 + rng() % 8;
        o.universe = 2 + rng() % 10;
        o.max_labels = 1 + rng() % o.universe;
        o.temperature = 0.05 + 0.95 * static_cast<double>(rng() % 1000) / 1000.0;
        o.paired_views = o.samples % 2 == 0 && k % 2 == 0;
        const auto b = random_batch(rng, o);
        for (const auto& s : all_strategies()) {
            const long double want = oracle::loss(b, s);
            const double got = compute_loss(b, s).total;
            const long double err = want == 0 ? std::abs(got) : std::abs(got - want) / std::abs(want);
            worst = std::max(worst, static_cast<double>(err));
        }
    }
    return {worst < kOracleTolerance, "max relative error " + fmt("%.3g", worst)};
}

Outcome gradients() {
    double worst_fd = 0, worst_identity = 0;
    std::uint64_t failures = 0;
    auto strategies = all_strategies();
    strategies.push_back(Strategy::simdis(Placement::OutsideLog, ExponentialDecay{0.5}));
    for (int k = 0; k < kGradientBatches; ++k) {
        Rng rng(derive_seed(5, static_cast<std::uint64_t>(k)));
        RandomBatchOptions o;
        o.samples = 2 + rng() % 11;
        o.dim = 2 + rng() % 5;
        o.universe = 6;
        const auto b = random_batch(rng, o);
        for (const auto& s : strategies) {
            const auto r = verify::grad_check(b, s, 1e-5, kGradientTolerance);
            failures += r.failures;
            worst_fd = std::max(worst_fd, r.max_error.value_or(0.0));
        }
        const Matrix d = gradient(b, Strategy::simdis(Placement::InsideLog)) - gradient(b, Strategy::any());
        worst_identity = std::max(worst_identity, d.cwiseAbs().maxCoeff());
    }
    return {failures == 0 && worst_fd < kGradientTolerance && worst_identity < kIdentityTolerance,
            "max FD error " + fmt("%.3g", worst_fd) + ", max identity gap " + fmt("%.3g", worst_identity)};
}

Outcome directional_benchmark() {
    const auto t0 = std::chrono::steady_clock::now();
    int wins = 0;
    bool decreasing = true;
    std::ostringstream detail;
    for (int seed = 0; seed < kBenchmarkSeeds; ++seed) {
        cli::ExperimentConfig config;
        synth::SynthSpec spec;
        spec.num_classes = 20;
        spec.num_samples = 2000;
        spec.tail_exponent = 1.5;
        spec.seed = static_cast<std::uint64_t>(seed);
        config.synth = spec;
        config.train.seed = static_cast<std::uint64_t>(seed);
        const auto data = synth::generate(spec);

        double f1_any = 0, f1_outside = 0;
        for (const auto& s : {Strategy::any(), Strategy::simdis(Placement::InsideLog),
                              Strategy::simdis(Placement::OutsideLog)}) {
            config.train.strategy = s;
            const auto r = cli::run_experiment(data, config);
            const double f1 = r.metrics.at("macro_f1");
            if (s.name() == "ANY") f1_any = f1;
            if (s.name() == "SimDis:OutsideLog") f1_outside = f1;
            if (s.is_simdis()) {
                const auto& tr = r.contrastive.trace.contrastive;
                decreasing = decreasing && tr.back().loss < tr.front().loss;
            }
        }
        wins += f1_outside >= f1_any;
        detail << (seed ? " " : "") << fmt("%.3f", f1_outside) << "/" << fmt("%.3f", f1_any);
    }
    const double secs = seconds_since(t0);
    return {wins >= kBenchmarkWinsNeeded && decreasing && secs < kBenchmarkSeconds,
            std::to_string(wins) + "/" + std::to_string(kBenchmarkSeeds) + " seeds OutsideLog >= ANY macro-F1 (" +
                detail.str() + "), loss decreasing: " + (decreasing ? "yes" : "no") + ", " + fmt("%.1f s", secs)};
}

Outcome determinism() {
    support::TempDir tmp("acceptance_det");
    const auto out = tmp.path() / "out";
    const std::string cfg =
        "{\"synth\": {\"num_classes\": 10, \"num_samples\": 400, \"seed\": 7},\n"
        " \"train\": {\"strategy\": \"SimDis:OutsideLog\", \"epochs_contrastive\": 5, \"epochs_probe\": 10, \"seed\": 7},\n"
        " \"output_dir\": \"" + out.string() + "\"}\n";
    support::write_file(tmp.path() / "cfg.json", cfg);
    const std::string args = "run --config \"" + (tmp.path() / "cfg.json").string() + "\" --force";
    const auto a = support::run_cli(args, tmp.path());
    const auto first = support::read_file(out / "metrics.json");
    const auto b = support::run_cli(args, tmp.path());
    const auto second = support::read_file(out / "metrics.json");
    const bool same = a.status == 0 && b.status == 0 && !first.empty() && first == second;
    return {same, same ? "metrics.json byte-identical (" + std::to_string(first.size()) + " bytes)"
                       : "exit " + std::to_string(a.status) + "/" + std::to_string(b.status) + ", outputs differ"};
}

Outcome metric_correctness() {
    double worst = 0;
    for (int k = 0; k < kMetricCases; ++k) {
        Rng rng(derive_seed(8, static_cast<std::uint64_t>(k)));
        const std::size_t n = 2 + rng() % 40, L = 2 + rng() % 10;
        const auto p = support::random_predictions(rng, n, L);
        auto track = [&](double a, double b) { worst = std::max(worst, std::abs(a - b)); };
        track(metrics::f1(p, metrics::Averaging::Micro), oracle::micro_f1(p));
        track(metrics::f1(p, metrics::Averaging::Macro), oracle::macro_f1(p));
        track(metrics::mean_average_precision(p), oracle::mean_ap(p));
        for (std::size_t kk = 1; kk <= L; ++kk) track(metrics::precision_at_k(p, kk), oracle::p_at_k(p, kk));
        track(metrics::auc(p, metrics::Averaging::Micro).value, oracle::micro_auc(p));
        track(metrics::auc(p, metrics::Averaging::Macro).value, oracle::macro_auc(p));
    }
    return {worst <= kMetricTolerance, "max |diff| " + fmt("%.3g", worst)};
}

}  // namespace

int main() {
    struct Criterion {
        int id;
        const char* name;
        std::function<Outcome()> run;
    };
    const Criterion criteria[] = {
        {1, "case-analysis fidelity", case_analysis},
        {2, "theorem suite", theorem_suite},
        {3, "reduction identity", reduction_identity},
        {4, "oracle equivalence", oracle_equivalence},
        {5, "gradient correctness", gradients},
        {6, "long-tail directional benchmark", directional_benchmark},
        {7, "determinism", determinism},
        {8, "metric correctness", metric_correctness},
    };
    int failed = 0;
    for (const auto& c : criteria) {
        Outcome o;
        try {
            o = c.run();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        failed += !o.pass;
        std::printf("criterion %d %-32s %s  %s\n", c.id, c.name, o.pass ? "PASS" : "FAIL", o.detail.c_str());
        std::fflush(stdout);
    }
    return failed == 0 ? 0 : 1;
}
