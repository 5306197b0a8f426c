#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "simdis/batch.hpp"
#include "simdis/label_set.hpp"

namespace simdis::synth {

struct SynthSpec {
    std::size_t num_classes = 20;
    std::size_t num_samples = 2000;
    std::size_t feature_dim = 32;
    double avg_labels = 2.0;      // target mean label cardinality, in [1, num_classes]
    double tail_exponent = 1.5;   // class frequency ~ rank^-tail_exponent
    double noise_sigma = 0.1;
    std::uint64_t seed = 0;

    void validate() const;
};

void to_json(nlohmann::json& j, const SynthSpec& s);
void from_json(const nlohmann::json& j, SynthSpec& s);

struct Dataset {
    Matrix features;               // num_samples x feature_dim
    std::vector<LabelSet> labels;
    Matrix class_prototypes;       // num_classes x feature_dim, unit rows; empty for loaded data
    Matrix noise;                  // features - mean(prototypes of labels); empty for loaded data

    std::size_t num_samples() const { return labels.size(); }
    std::size_t num_classes() const { return labels.empty() ? 0 : labels.front().universe_size(); }

    /// Rows [begin, end) as a new dataset (prototypes shared, noise sliced).
    Dataset slice(std::size_t begin, std::size_t end) const;
};

/// Normalized target class frequencies, proportional to (rank+1)^-tail_exponent.
std::vector<double> class_weights(std::size_t num_classes, double tail_exponent);

/// Draws prototypes, label sets (cardinality 1 + Binomial(L-1, (avg-1)/(L-1)),
/// classes without replacement from the skewed weights) and noisy features.
/// Deterministic in spec.seed.
Dataset generate(const SynthSpec& spec);

/// Two independently noised copies of `row`.
std::pair<Vector, Vector> augment_pair(const Vector& row, double noise_sigma, std::uint64_t seed);

/// JSON Lines, one {"features": [...], "labels": [...]} per sample.
void write_jsonl(std::ostream& os, const Dataset& d);
/// num_classes = 0 infers 1 + the largest label seen.
Dataset read_jsonl(std::istream& is, std::size_t num_classes = 0);

}  // namespace simdis::synth
