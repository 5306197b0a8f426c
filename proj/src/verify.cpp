#include "simdis/verify.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <iterator>

#include "simdis/errors.hpp"
#include "simdis/random.hpp"

namespace simdis::verify {

nlohmann::json to_json(const PropertyReport& r) {
    nlohmann::json j{{"property", r.property_name},
                     {"trials", r.trials},
                     {"failures", r.failures},
                     {"passed", r.passed()},
                     {"seed", r.seed}};
    j["max_error"] = r.max_error ? nlohmann::json(*r.max_error) : nlohmann::json(nullptr);
    j["counterexample"] = r.first_counterexample ? *r.first_counterexample : nlohmann::json(nullptr);
    return j;
}

// ---------------------------------------------------------------------------
// Loss oracle

namespace {

std::size_t overlap_by_enumeration(const std::vector<std::size_t>& a, const std::vector<std::size_t>& b) {
    std::vector<std::size_t> both;
    std::set_intersection(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(both));
    return both.size();
}

long double oracle_weight(const std::vector<std::size_t>& anchor, const std::vector<std::size_t>& sample,
                          const PenaltyKind& penalty) {
    const auto shared = static_cast<long double>(overlap_by_enumeration(anchor, sample));
    const long double excess = static_cast<long double>(sample.size()) - shared;
    long double dis = 1.0L / (1.0L + excess);
    if (const auto* e = std::get_if<ExponentialDecay>(&penalty)) {
        dis = std::exp(-static_cast<long double>(e->alpha) * excess);
    }
    return shared / static_cast<long double>(anchor.size()) * dis;
}

}  // namespace

std::vector<long double> oracle_anchor_losses(const ContrastiveBatch& batch, const Strategy& strategy) {
    batch.validate();
    const std::size_t n = batch.size();
    if (n > kOracleMaxSamples) {
        throw ConfigError("oracle refuses batches larger than " + std::to_string(kOracleMaxSamples));
    }
    const auto tau = static_cast<long double>(batch.temperature);
    std::vector<std::vector<std::size_t>> members;
    for (const auto& l : batch.labels) members.push_back(l.members());

    auto sim = [&](std::size_t i, std::size_t j) {
        long double acc = 0.0L;
        for (Eigen::Index c = 0; c < batch.embeddings.cols(); ++c) {
            acc += static_cast<long double>(batch.embeddings(i, c)) * static_cast<long double>(batch.embeddings(j, c));
        }
        return acc / tau;
    };

    std::vector<long double> losses(n, 0.0L);
    for (std::size_t i = 0; i < n; ++i) {
        long double denom = 0.0L;
        for (std::size_t a = 0; a < n; ++a) {
            if (a != i) denom += std::exp(sim(i, a));
        }

        if (std::holds_alternative<MulSupConStrategy>(strategy.kind)) {
            long double li = 0.0L;
            for (std::size_t label : members[i]) {
                std::vector<std::size_t> pl;
                for (std::size_t p = 0; p < n; ++p) {
                    if (p != i && std::binary_search(members[p].begin(), members[p].end(), label)) pl.push_back(p);
                }
                if (pl.empty()) continue;
                long double inner = 0.0L;
                for (auto p : pl) inner += std::log(std::exp(sim(i, p)) / denom);
                li += -inner / static_cast<long double>(pl.size());
            }
            losses[i] = li;
            continue;
        }

        const bool exact = std::holds_alternative<AllStrategy>(strategy.kind);
        std::vector<std::size_t> pos;
        for (std::size_t p = 0; p < n; ++p) {
            if (p == i) continue;
            if (exact ? members[p] == members[i] : overlap_by_enumeration(members[i], members[p]) > 0) pos.push_back(p);
        }
        if (pos.empty()) continue;

        long double sum = 0.0L;
        for (auto p : pos) {
            const long double e = std::exp(sim(i, p));
            if (const auto* s = std::get_if<SimDisStrategy>(&strategy.kind)) {
                const long double w = oracle_weight(members[i], members[p], s->penalty);
                switch (s->placement) {
                    case Placement::InsideLog: sum += std::log(w * e / denom); break;
                    case Placement::OutsideLog: sum += w * std::log(e / denom); break;
                    case Placement::TemperatureScaled: sum += std::log(std::exp(sim(i, p) * w) / denom); break;
                }
            } else {
                sum += std::log(e / denom);
            }
        }
        losses[i] = -sum / static_cast<long double>(pos.size());
    }
    return losses;
}

long double oracle_loss(const ContrastiveBatch& batch, const Strategy& strategy) {
    auto losses = oracle_anchor_losses(batch, strategy);
    long double total = 0.0L;
    for (auto l : losses) total += l;
    if (std::holds_alternative<MulSupConStrategy>(strategy.kind)) {
        long double cards = 0.0L;
        for (const auto& l : batch.labels) cards += static_cast<long double>(l.size());
        total /= cards;
    }
    return total;
}

// ---------------------------------------------------------------------------
// Gradient check

PropertyReport grad_check(const ContrastiveBatch& batch, const Strategy& strategy, double step, double threshold) {
    if (!(step >= 1e-7 && step <= 1e-3)) throw ConfigError("grad_check step must lie in [1e-7, 1e-3]");
    PropertyReport report;
    report.property_name = "grad_check/" + strategy.name();

    const Matrix analytic = compute_loss(batch, strategy, Backend::Serial).gradient;
    Matrix numeric(analytic.rows(), analytic.cols());
    ContrastiveBatch probe = batch;
    for (Eigen::Index r = 0; r < analytic.rows(); ++r) {
        for (Eigen::Index c = 0; c < analytic.cols(); ++c) {
            const double original = probe.embeddings(r, c);
            probe.embeddings(r, c) = original + step;
            const double up = compute_loss(probe, strategy, Backend::Serial).total;
            probe.embeddings(r, c) = original - step;
            const double down = compute_loss(probe, strategy, Backend::Serial).total;
            probe.embeddings(r, c) = original;
            numeric(r, c) = (up - down) / (2.0 * step);
        }
    }

    double scale = std::max(analytic.cwiseAbs().maxCoeff(), numeric.cwiseAbs().maxCoeff());
    if (scale < kGradCheckAbsoluteFloor) scale = 1.0;
    double worst = 0.0;
    for (Eigen::Index k = 0; k < analytic.size(); ++k) {
        const double err = std::abs(analytic.data()[k] - numeric.data()[k]) / scale;
        worst = std::max(worst, err);
        ++report.trials;
        if (!(err <= threshold)) ++report.failures;
    }
    report.max_error = worst;
    if (report.failures > 0) report.first_counterexample = batch_to_json(batch);
    return report;
}

// ---------------------------------------------------------------------------
// Theorem harness

FactorFn default_factors() {
    return [](const LabelSet& a, const LabelSet& b) { return pair_factors(a, b, Reciprocal{}); };
}

namespace {

enum Property : std::size_t {
    kPartition,
    kCardinality,
    kTheorem1,
    kTheorem2,
    kTheorem3,
    kTheorem4,
    kTheorem5,
    kOrdering,
    kPropertyCount
};

constexpr std::array<const char*, kPropertyCount> kNames = {
    "partition_r1_r5", "cardinality_identity", "theorem1_disjoint_zero",  "theorem2_equal_unity",
    "theorem3_strict_bounds", "theorem4_r4_dominates_r3", "theorem5_r5_dominates_r3", "complete_ordering"};

nlohmann::json counterexample(std::initializer_list<const LabelSet*> sets) {
    ContrastiveBatch b;
    b.temperature = 1.0;
    b.embeddings = Matrix::Ones(static_cast<Eigen::Index>(sets.size()), 1);
    for (const auto* s : sets) b.labels.push_back(*s);
    return batch_to_json(b);
}

// The five relation definitions evaluated independently of classify_relation.
std::array<bool, 5> relation_predicates(const LabelSet& s, const LabelSet& t) {
    const auto sm = s.members();
    const auto tm = t.members();
    const bool disjoint = overlap_by_enumeration(sm, tm) == 0;
    const bool s_in_t = std::includes(tm.begin(), tm.end(), sm.begin(), sm.end());
    const bool t_in_s = std::includes(sm.begin(), sm.end(), tm.begin(), tm.end());
    return {disjoint, sm == tm, !disjoint && !s_in_t && !t_in_s, t_in_s && sm != tm, s_in_t && sm != tm};
}

struct Tally {
    std::array<PropertyReport, kPropertyCount> reports;

    void record(Property p, bool ok, std::initializer_list<const LabelSet*> sets) {
        auto& r = reports[p];
        ++r.trials;
        if (!ok) {
            if (r.failures == 0) r.first_counterexample = counterexample(sets);
            ++r.failures;
        }
    }
};

// Partition, cardinality identity, Theorems 1-3 and the ordering chain for one pair.
void check_pair(Tally& tally, const FactorFn& factors, const LabelSet& s, const LabelSet& t) {
    const auto preds = relation_predicates(s, t);
    const auto kind = classify_relation(s, t);
    const auto holding = std::count(preds.begin(), preds.end(), true);
    tally.record(kPartition, holding == 1 && preds[static_cast<std::size_t>(kind) - 1], {&s, &t});

    const auto f = factors(s, t);
    tally.record(kCardinality, f.excess_card + f.overlap_card == t.size() && f.weight == f.similarity * f.dissimilarity,
                 {&s, &t});

    bool chain = false;
    switch (kind) {
        case RelationKind::R1:
            tally.record(kTheorem1, f.weight == 0.0, {&s, &t});
            chain = f.weight == 0.0;
            break;
        case RelationKind::R2:
            tally.record(kTheorem2, f.weight == 1.0, {&s, &t});
            chain = f.weight == 1.0;
            break;
        default:
            tally.record(kTheorem3, f.weight > 0.0 && f.weight < 1.0, {&s, &t});
            chain = f.weight > 0.0 && f.weight < 1.0;
            break;
    }
    tally.record(kOrdering, chain, {&s, &t});
}

void check_dominance4(Tally& tally, const FactorFn& factors, const LabelSet& s, const LabelSet& t3, const LabelSet& t4) {
    tally.record(kTheorem4, factors(s, t4).weight > factors(s, t3).weight, {&s, &t3, &t4});
}

void check_dominance5(Tally& tally, const FactorFn& factors, const LabelSet& s, const LabelSet& t3, const LabelSet& t5) {
    tally.record(kTheorem5, factors(s, t5).weight > factors(s, t3).weight, {&s, &t3, &t5});
}

void run_exhaustive(Tally& tally, const FactorFn& factors, std::size_t universe) {
    std::vector<LabelSet> subsets;
    for (std::uint64_t mask = 1; mask < (std::uint64_t{1} << universe); ++mask) {
        subsets.push_back(LabelSet::from_words(universe, {mask}));
    }
    for (const auto& s : subsets) {
        std::vector<const LabelSet*> r3, r4, r5;
        for (const auto& t : subsets) {
            check_pair(tally, factors, s, t);
            switch (classify_relation(s, t)) {
                case RelationKind::R3: r3.push_back(&t); break;
                case RelationKind::R4: r4.push_back(&t); break;
                case RelationKind::R5: r5.push_back(&t); break;
                default: break;
            }
        }
        for (const auto* t3 : r3) {
            for (const auto* t4 : r4) {
                if (t3->size() == t4->size()) check_dominance4(tally, factors, s, *t3, *t4);
            }
            for (const auto* t5 : r5) {
                if (t5->difference_size(s) <= t3->difference_size(s)) check_dominance5(tally, factors, s, *t3, *t5);
            }
        }
    }
}

std::vector<std::size_t> sample_without_replacement(Rng& rng, std::vector<std::size_t> pool, std::size_t k) {
    for (std::size_t i = 0; i < k; ++i) {
        std::uniform_int_distribution<std::size_t> pick(i, pool.size() - 1);
        std::swap(pool[i], pool[pick(rng)]);
    }
    pool.resize(k);
    return pool;
}

std::size_t uniform(Rng& rng, std::size_t lo, std::size_t hi) {
    return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
}

// Anchor with |S| in [lo_card, U-1], its members and the complement.
struct SplitUniverse {
    std::vector<std::size_t> inside;
    std::vector<std::size_t> outside;
};

SplitUniverse random_split(Rng& rng, std::size_t universe, std::size_t lo_card) {
    std::vector<std::size_t> all(universe);
    for (std::size_t k = 0; k < universe; ++k) all[k] = k;
    auto shuffled = sample_without_replacement(rng, all, universe);
    const std::size_t card = uniform(rng, lo_card, universe - 1);
    return {{shuffled.begin(), shuffled.begin() + static_cast<std::ptrdiff_t>(card)},
            {shuffled.begin() + static_cast<std::ptrdiff_t>(card), shuffled.end()}};
}

LabelSet join(std::size_t universe, std::vector<std::size_t> a, const std::vector<std::size_t>& b) {
    a.insert(a.end(), b.begin(), b.end());
    return LabelSet(universe, a);
}

void run_randomized(Tally& tally, const FactorFn& factors, std::size_t universe, const Randomized& mode) {
    for (std::uint64_t trial = 0; trial < mode.trials; ++trial) {
        Rng rng(derive_seed(mode.seed, trial));
        const auto s = random_label_set(rng, universe);
        const auto t = random_label_set(rng, universe);
        check_pair(tally, factors, s, t);

        if (universe >= 4) {
            // R4 sample: c-subset of S (2 <= c < |S|); R3 sample of the same size
            // sharing k in [max(1, c - |outside|), c - 1] labels with S.
            auto split = random_split(rng, universe, 3);
            const std::size_t c = uniform(rng, 2, split.inside.size() - 1);
            const std::size_t k = uniform(rng, std::max<std::size_t>(1, c > split.outside.size() ? c - split.outside.size() : 1), c - 1);
            const LabelSet anchor(universe, split.inside);
            const LabelSet t4(universe, sample_without_replacement(rng, split.inside, c));
            const LabelSet t3 = join(universe, sample_without_replacement(rng, split.inside, k),
                                     sample_without_replacement(rng, split.outside, c - k));
            check_dominance4(tally, factors, anchor, t3, t4);
        }
        if (universe >= 3) {
            // R5 sample: S plus e5 >= 1 extras; R3 sample: k < |S| shared plus e3 >= e5 extras.
            auto split = random_split(rng, universe, 2);
            const std::size_t e5 = uniform(rng, 1, split.outside.size());
            const std::size_t e3 = uniform(rng, e5, split.outside.size());
            const std::size_t k = uniform(rng, 1, split.inside.size() - 1);
            const LabelSet anchor(universe, split.inside);
            const LabelSet t5 = join(universe, split.inside, sample_without_replacement(rng, split.outside, e5));
            const LabelSet t3 = join(universe, sample_without_replacement(rng, split.inside, k),
                                     sample_without_replacement(rng, split.outside, e3));
            check_dominance5(tally, factors, anchor, t3, t5);
        }
    }
}

}  // namespace

std::vector<PropertyReport> check_theorems(std::size_t universe_size, const TheoremMode& mode, const FactorFn& factors) {
    if (universe_size < 1) throw ConfigError("universe size must be positive");
    Tally tally;
    std::uint64_t seed = 0;
    if (std::holds_alternative<Exhaustive>(mode)) {
        if (universe_size > 5) throw ConfigError("exhaustive theorem checks support universe sizes up to 5");
        run_exhaustive(tally, factors, universe_size);
    } else {
        const auto& r = std::get<Randomized>(mode);
        seed = r.seed;
        run_randomized(tally, factors, universe_size, r);
    }
    std::vector<PropertyReport> out;
    for (std::size_t p = 0; p < kPropertyCount; ++p) {
        auto report = std::move(tally.reports[p]);
        report.property_name = kNames[p];
        report.seed = seed;
        out.push_back(std::move(report));
    }
    return out;
}

}  // namespace simdis::verify
