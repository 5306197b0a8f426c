#include "simdis/label_set.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <numeric>
#include <sstream>

#include "simdis/errors.hpp"

namespace simdis {

namespace {

constexpr std::size_t kWordBits = 64;

std::size_t word_count(std::size_t universe) { return (universe + kWordBits - 1) / kWordBits; }

}  // namespace

LabelSet::LabelSet(std::size_t universe_size, std::vector<std::uint64_t> words, std::size_t count)
    : universe_(universe_size), words_(std::move(words)), count_(count) {}

LabelSet::LabelSet(std::size_t universe_size, std::span<const std::size_t> members)
    : universe_(universe_size), words_(word_count(universe_size), 0) {
    if (universe_size == 0) throw ConfigError("label universe must be nonempty");
    for (std::size_t m : members) {
        if (m >= universe_size) {
            throw DomainError("label " + std::to_string(m) + " outside universe of size " +
                              std::to_string(universe_size));
        }
        std::uint64_t bit = std::uint64_t{1} << (m % kWordBits);
        auto& w = words_[m / kWordBits];
        if (w & bit) throw DomainError("duplicate label " + std::to_string(m));
        w |= bit;
        ++count_;
    }
    if (count_ == 0) throw DomainError("label set must be nonempty");
}

LabelSet::LabelSet(std::size_t universe_size, std::initializer_list<std::size_t> members)
    : LabelSet(universe_size, std::span<const std::size_t>(members.begin(), members.size())) {}

LabelSet LabelSet::from_words(std::size_t universe_size, std::vector<std::uint64_t> words) {
    if (universe_size == 0) throw ConfigError("label universe must be nonempty");
    if (words.size() != word_count(universe_size)) throw ConfigError("word count does not match universe");
    if (universe_size % kWordBits != 0) {
        std::uint64_t valid = (std::uint64_t{1} << (universe_size % kWordBits)) - 1;
        if (words.back() & ~valid) throw DomainError("bits set beyond universe");
    }
    std::size_t count = 0;
    for (auto w : words) count += static_cast<std::size_t>(std::popcount(w));
    if (count == 0) throw DomainError("label set must be nonempty");
    return LabelSet(universe_size, std::move(words), count);
}

LabelSet LabelSet::parse(std::string_view text, std::size_t universe_size) {
    auto trim = [](std::string_view s) {
        while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
        while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
        return s;
    };
    text = trim(text);
    if (text.size() < 2 || text.front() != '[' || text.back() != ']') {
        throw ConfigError("label set must look like [a,b,...]: '" + std::string(text) + "'");
    }
    text = trim(text.substr(1, text.size() - 2));
    std::vector<std::size_t> members;
    while (!text.empty()) {
        auto comma = text.find(',');
        auto token = trim(text.substr(0, comma));
        std::size_t value = 0;
        auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), value);
        if (ec != std::errc{} || ptr != token.data() + token.size() || token.empty()) {
            throw ConfigError("bad label '" + std::string(token) + "'");
        }
        members.push_back(value);
        if (comma == std::string_view::npos) break;
        text = text.substr(comma + 1);
        if (trim(text).empty()) throw ConfigError("trailing comma in label set");
    }
    return LabelSet(universe_size, members);
}

bool LabelSet::contains(std::size_t label) const {
    if (label >= universe_) return false;
    return (words_[label / kWordBits] >> (label % kWordBits)) & 1U;
}

std::vector<std::size_t> LabelSet::members() const {
    std::vector<std::size_t> out;
    out.reserve(count_);
    for (std::size_t w = 0; w < words_.size(); ++w) {
        std::uint64_t bits = words_[w];
        while (bits) {
            out.push_back(w * kWordBits + static_cast<std::size_t>(std::countr_zero(bits)));
            bits &= bits - 1;
        }
    }
    return out;
}

void LabelSet::require_same_universe(const LabelSet& other) const {
    if (universe_ != other.universe_) {
        throw ConfigError("label sets over different universes (" + std::to_string(universe_) + " vs " +
                          std::to_string(other.universe_) + ")");
    }
}

std::size_t LabelSet::intersection_size(const LabelSet& other) const {
    require_same_universe(other);
    std::size_t n = 0;
    for (std::size_t w = 0; w < words_.size(); ++w) n += std::popcount(words_[w] & other.words_[w]);
    return n;
}

std::size_t LabelSet::difference_size(const LabelSet& other) const {
    require_same_universe(other);
    std::size_t n = 0;
    for (std::size_t w = 0; w < words_.size(); ++w) n += std::popcount(words_[w] & ~other.words_[w]);
    return n;
}

bool LabelSet::is_subset_of(const LabelSet& other) const { return difference_size(other) == 0; }

std::string LabelSet::to_string() const {
    std::string out = "[";
    bool first = true;
    for (auto m : members()) {
        if (!first) out += ',';
        out += std::to_string(m);
        first = false;
    }
    return out + "]";
}

std::ostream& operator<<(std::ostream& os, const LabelSet& s) { return os << s.to_string(); }

std::string_view to_string(RelationKind kind) {
    switch (kind) {
        case RelationKind::R1: return "R1";
        case RelationKind::R2: return "R2";
        case RelationKind::R3: return "R3";
        case RelationKind::R4: return "R4";
        case RelationKind::R5: return "R5";
    }
    return "?";
}

void validate_penalty(const PenaltyKind& penalty) {
    if (const auto* e = std::get_if<ExponentialDecay>(&penalty)) {
        if (!(e->alpha > 0.0) || !std::isfinite(e->alpha)) {
            throw ConfigError("exponential decay alpha must be positive and finite");
        }
    }
}

double apply_penalty(const PenaltyKind& penalty, std::size_t excess) {
    validate_penalty(penalty);
    if (const auto* e = std::get_if<ExponentialDecay>(&penalty)) {
        return std::exp(-e->alpha * static_cast<double>(excess));
    }
    return 1.0 / (1.0 + static_cast<double>(excess));
}

RelationKind classify_relation(const LabelSet& anchor, const LabelSet& sample) {
    std::size_t overlap = anchor.intersection_size(sample);
    if (overlap == 0) return RelationKind::R1;
    bool anchor_in_sample = overlap == anchor.size();
    bool sample_in_anchor = overlap == sample.size();
    if (anchor_in_sample && sample_in_anchor) return RelationKind::R2;
    if (sample_in_anchor) return RelationKind::R4;
    if (anchor_in_sample) return RelationKind::R5;
    return RelationKind::R3;
}

double similarity_factor(const LabelSet& anchor, const LabelSet& sample) {
    return static_cast<double>(anchor.intersection_size(sample)) / static_cast<double>(anchor.size());
}

double dissimilarity_factor(const LabelSet& anchor, const LabelSet& sample, const PenaltyKind& penalty) {
    return apply_penalty(penalty, sample.difference_size(anchor));
}

PairFactors pair_factors(const LabelSet& anchor, const LabelSet& sample, const PenaltyKind& penalty) {
    PairFactors f;
    f.overlap_card = anchor.intersection_size(sample);
    f.excess_card = sample.size() - f.overlap_card;
    f.similarity = static_cast<double>(f.overlap_card) / static_cast<double>(anchor.size());
    f.dissimilarity = apply_penalty(penalty, f.excess_card);
    f.weight = f.similarity * f.dissimilarity;
    return f;
}

Fraction Fraction::make(std::int64_t num, std::int64_t den) {
    if (den == 0) throw DomainError("zero denominator");
    if (den < 0) {
        num = -num;
        den = -den;
    }
    std::int64_t g = std::gcd(num, den);
    if (g == 0) g = 1;
    return Fraction{num / g, den / g};
}

std::string Fraction::to_string() const {
    if (den == 1) return std::to_string(num);
    return std::to_string(num) + "/" + std::to_string(den);
}

Fraction operator*(const Fraction& a, const Fraction& b) { return Fraction::make(a.num * b.num, a.den * b.den); }

ExactFactors exact_factors(const LabelSet& anchor, const LabelSet& sample) {
    auto overlap = static_cast<std::int64_t>(anchor.intersection_size(sample));
    auto excess = static_cast<std::int64_t>(sample.size()) - overlap;
    ExactFactors f;
    f.similarity = Fraction::make(overlap, static_cast<std::int64_t>(anchor.size()));
    f.dissimilarity = Fraction::make(1, 1 + excess);
    f.weight = f.similarity * f.dissimilarity;
    return f;
}

}  // namespace simdis
