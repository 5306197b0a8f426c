#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "simdis/batch.hpp"
#include "simdis/label_set.hpp"
#include "simdis/losses.hpp"

namespace simdis::verify {

struct PropertyReport {
    std::string property_name;
    std::uint64_t trials = 0;
    std::uint64_t failures = 0;
    std::optional<nlohmann::json> first_counterexample;  // batch JSON that replays the failure
    std::uint64_t seed = 0;
    std::optional<double> max_error;

    bool passed() const { return failures == 0; }
};

nlohmann::json to_json(const PropertyReport& r);

/// Largest batch the oracle accepts.
inline constexpr std::size_t kOracleMaxSamples = 64;

/// Batch loss by direct nested summation in extended precision: no
/// log-sum-exp shift, no shared code with the optimized kernels. Positive
/// sets and weights are recomputed from sorted member lists.
long double oracle_loss(const ContrastiveBatch& batch, const Strategy& strategy);

/// Per-anchor oracle values (0 for anchors without positives).
std::vector<long double> oracle_anchor_losses(const ContrastiveBatch& batch, const Strategy& strategy);

inline constexpr double kGradCheckThreshold = 1e-6;
inline constexpr double kGradCheckAbsoluteFloor = 1e-8;

/// Central differences of compute_loss(...).total against its analytic
/// gradient. max_error is max_k |analytic_k - numeric_k| / max(|analytic|_inf,
/// |numeric|_inf); when both gradients are below kGradCheckAbsoluteFloor the
/// comparison is absolute instead. A coordinate fails when its error exceeds
/// `threshold` under that scale.
PropertyReport grad_check(const ContrastiveBatch& batch, const Strategy& strategy, double step = 1e-5,
                          double threshold = kGradCheckThreshold);

/// Weight rule under test; the default is pair_factors with the reciprocal penalty.
using FactorFn = std::function<PairFactors(const LabelSet&, const LabelSet&)>;
FactorFn default_factors();

struct Exhaustive {};
struct Randomized {
    std::uint64_t trials = 100000;
    std::uint64_t seed = 0;
};
using TheoremMode = std::variant<Exhaustive, Randomized>;

/// Partition of R1-R5, the cardinality identity |T| = overlap + excess, the
/// five weight theorems and the complete ordering 0 = w(R1) < w(R3..R5) < w(R2) = 1.
///
/// Exhaustive mode enumerates every ordered pair (and, for the dominance
/// theorems, every anchor with every qualifying pair of samples) over
/// nonempty subsets of a universe of at most 5 labels. Randomized mode draws
/// pairs with random_label_set and builds the dominance-theorem triples
/// directly so their hypotheses always hold.
std::vector<PropertyReport> check_theorems(std::size_t universe_size, const TheoremMode& mode,
                                           const FactorFn& factors = default_factors());

}  // namespace simdis::verify
