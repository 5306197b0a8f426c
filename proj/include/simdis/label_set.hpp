#pragma once

#include <cstdint>
#include <initializer_list>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace simdis {

/// A nonempty set of class indices drawn from a universe {0, ..., universe_size-1}.
///
/// Stored as a bitset so that intersection and difference cardinalities are
/// word operations. Construction rejects empty sets and out-of-range members.
class LabelSet {
public:
    LabelSet(std::size_t universe_size, std::span<const std::size_t> members);
    LabelSet(std::size_t universe_size, std::initializer_list<std::size_t> members);

    /// Builds from raw 64-bit words; bits beyond universe_size must be clear.
    static LabelSet from_words(std::size_t universe_size, std::vector<std::uint64_t> words);

    /// Parses the "[0,1,2]" text form. Members may appear in any order but
    /// must be distinct.
    static LabelSet parse(std::string_view text, std::size_t universe_size);

    std::size_t universe_size() const { return universe_; }
    std::size_t size() const { return count_; }
    bool contains(std::size_t label) const;
    std::vector<std::size_t> members() const;
    std::span<const std::uint64_t> words() const { return words_; }

    std::size_t intersection_size(const LabelSet& other) const;
    // |this \ other|
    std::size_t difference_size(const LabelSet& other) const;
    bool is_subset_of(const LabelSet& other) const;

    /// Sorted "[a,b,c]" form; parse(to_string()) round-trips.
    std::string to_string() const;

    friend bool operator==(const LabelSet& a, const LabelSet& b) {
        return a.universe_ == b.universe_ && a.words_ == b.words_;
    }

private:
    LabelSet(std::size_t universe_size, std::vector<std::uint64_t> words, std::size_t count);
    void require_same_universe(const LabelSet& other) const;

    std::size_t universe_ = 0;
    std::vector<std::uint64_t> words_;
    std::size_t count_ = 0;
};

std::ostream& operator<<(std::ostream& os, const LabelSet& s);

/// The five ways two nonempty label sets relate (anchor S, sample T):
/// R1 disjoint, R2 equal, R3 partial overlap, R4 S strictly contains T,
/// R5 S strictly contained in T.
enum class RelationKind { R1 = 1, R2, R3, R4, R5 };

std::string_view to_string(RelationKind kind);

/// Dissimilarity penalty x -> 1/(1+x).
struct Reciprocal {};
/// Dissimilarity penalty x -> exp(-alpha x), alpha > 0.
struct ExponentialDecay {
    double alpha = 1.0;
};
using PenaltyKind = std::variant<Reciprocal, ExponentialDecay>;

/// Evaluates the penalty at a non-negative excess cardinality.
double apply_penalty(const PenaltyKind& penalty, std::size_t excess);
void validate_penalty(const PenaltyKind& penalty);

struct PairFactors {
    double similarity = 0.0;
    double dissimilarity = 0.0;
    double weight = 0.0;
    std::size_t overlap_card = 0;  // |S ∩ T|
    std::size_t excess_card = 0;   // |T \ (S ∩ T)|
};

RelationKind classify_relation(const LabelSet& anchor, const LabelSet& sample);

/// |S ∩ T| / |S|.
double similarity_factor(const LabelSet& anchor, const LabelSet& sample);

/// penalty(|T \ (S ∩ T)|); 1/(1+excess) for Reciprocal.
double dissimilarity_factor(const LabelSet& anchor, const LabelSet& sample,
                            const PenaltyKind& penalty = Reciprocal{});

PairFactors pair_factors(const LabelSet& anchor, const LabelSet& sample,
                         const PenaltyKind& penalty = Reciprocal{});

/// Reduced fraction num/den with den > 0.
struct Fraction {
    std::int64_t num = 0;
    std::int64_t den = 1;

    static Fraction make(std::int64_t num, std::int64_t den);
    double value() const { return static_cast<double>(num) / static_cast<double>(den); }
    std::string to_string() const;
    friend bool operator==(const Fraction&, const Fraction&) = default;
    friend Fraction operator*(const Fraction& a, const Fraction& b);
};

/// Similarity, reciprocal dissimilarity and their product as exact fractions.
struct ExactFactors {
    Fraction similarity;
    Fraction dissimilarity;
    Fraction weight;
};

ExactFactors exact_factors(const LabelSet& anchor, const LabelSet& sample);

}  // namespace simdis
