#pragma once

#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "simdis/batch.hpp"
#include "simdis/label_set.hpp"

namespace simdis {

/// Where the similarity-dissimilarity weight w enters the per-positive term.
enum class Placement {
    InsideLog,          // -log(w exp(s_p) / sum_a exp(s_a)); w is an additive constant
    OutsideLog,         // -w log(exp(s_p) / sum_a exp(s_a))
    TemperatureScaled,  // -log(exp(w s_p) / sum_a exp(s_a))
};

std::string_view to_string(Placement p);

struct AllStrategy {};
struct AnyStrategy {};
struct MulSupConStrategy {};
struct SimDisStrategy {
    Placement placement = Placement::InsideLog;
    PenaltyKind penalty = Reciprocal{};
};

/// Positive-set definition plus loss form.
struct Strategy {
    std::variant<AllStrategy, AnyStrategy, MulSupConStrategy, SimDisStrategy> kind;

    static Strategy all() { return {AllStrategy{}}; }
    static Strategy any() { return {AnyStrategy{}}; }
    static Strategy mulsupcon() { return {MulSupConStrategy{}}; }
    static Strategy simdis(Placement placement = Placement::InsideLog, PenaltyKind penalty = Reciprocal{}) {
        return {SimDisStrategy{placement, penalty}};
    }

    bool is_simdis() const { return std::holds_alternative<SimDisStrategy>(kind); }

    /// "ALL", "ANY", "MulSupCon", "SimDis:InsideLog", "SimDis:OutsideLog:exp=0.5", ...
    std::string name() const;

    /// Accepts the forms produced by name(); a bare "SimDis" means InsideLog
    /// with the reciprocal penalty. Case-insensitive on the strategy keyword.
    static Strategy parse(std::string_view text);
};

/// Every strategy this library ships, SimDis in all three placements.
std::vector<Strategy> all_strategies();

struct PositiveEntry {
    std::size_t index = 0;
    std::size_t multiplicity = 1;
    friend bool operator==(const PositiveEntry&, const PositiveEntry&) = default;
};

/// Positives of `anchor` under the strategy, in increasing index order. The
/// anchor itself is never included.
std::vector<PositiveEntry> positive_set(const Strategy& strategy, const ContrastiveBatch& batch,
                                        std::size_t anchor);

struct LossReport {
    std::vector<double> per_anchor;       // L_i, one per anchor with a nonempty positive set
    std::vector<std::size_t> anchors;     // anchor index of each per_anchor entry
    std::vector<std::size_t> skipped_anchors;
    double total = 0.0;
    Matrix gradient;                      // d total / d embeddings
};

enum class Backend { Serial, Parallel };

/// Evaluates any strategy; the entry point the trainer and CLI use.
LossReport compute_loss(const ContrastiveBatch& batch, const Strategy& strategy,
                        Backend backend = Backend::Parallel);

/// ALL or ANY; throws ConfigError for other strategies.
LossReport loss_supcon(const ContrastiveBatch& batch, const Strategy& strategy,
                       Backend backend = Backend::Parallel);
LossReport loss_mulsupcon(const ContrastiveBatch& batch, Backend backend = Backend::Parallel);
LossReport loss_simdis(const ContrastiveBatch& batch, Placement placement = Placement::InsideLog,
                       const PenaltyKind& penalty = Reciprocal{}, Backend backend = Backend::Parallel);

/// d total / d embeddings, with respect to the rows as given (no normalization chain rule).
Matrix gradient(const ContrastiveBatch& batch, const Strategy& strategy, Backend backend = Backend::Parallel);

}  // namespace simdis
