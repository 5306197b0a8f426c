#include "simdis/synth.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>
#include <random>
#include <string>

#include "simdis/errors.hpp"
#include "simdis/random.hpp"

namespace simdis::synth {

void SynthSpec::validate() const {
    if (num_classes < 1) throw ConfigError("num_classes must be positive");
    if (num_samples < 2) throw ConfigError("num_samples must be at least 2");
    if (feature_dim < 1) throw ConfigError("feature_dim must be positive");
    if (!(avg_labels >= 1.0) || avg_labels > static_cast<double>(num_classes)) {
        throw ConfigError("avg_labels must lie in [1, num_classes]");
    }
    if (!(tail_exponent >= 0.0) || !std::isfinite(tail_exponent)) throw ConfigError("tail_exponent must be >= 0");
    if (!(noise_sigma >= 0.0) || !std::isfinite(noise_sigma)) throw ConfigError("noise_sigma must be >= 0");
}

void to_json(nlohmann::json& j, const SynthSpec& s) {
    j = {{"num_classes", s.num_classes}, {"num_samples", s.num_samples}, {"feature_dim", s.feature_dim},
         {"avg_labels", s.avg_labels},   {"tail_exponent", s.tail_exponent}, {"noise_sigma", s.noise_sigma},
         {"seed", s.seed}};
}

void from_json(const nlohmann::json& j, SynthSpec& s) {
    s.num_classes = j.value("num_classes", s.num_classes);
    s.num_samples = j.value("num_samples", s.num_samples);
    s.feature_dim = j.value("feature_dim", s.feature_dim);
    s.avg_labels = j.value("avg_labels", s.avg_labels);
    s.tail_exponent = j.value("tail_exponent", s.tail_exponent);
    s.noise_sigma = j.value("noise_sigma", s.noise_sigma);
    s.seed = j.value("seed", s.seed);
}

Dataset Dataset::slice(std::size_t begin, std::size_t end) const {
    if (begin > end || end > num_samples()) throw ConfigError("dataset slice out of range");
    Dataset out;
    const auto b = static_cast<Eigen::Index>(begin);
    const auto n = static_cast<Eigen::Index>(end - begin);
    out.features = features.middleRows(b, n);
    out.labels.assign(labels.begin() + static_cast<std::ptrdiff_t>(begin), labels.begin() + static_cast<std::ptrdiff_t>(end));
    out.class_prototypes = class_prototypes;
    if (noise.rows() == features.rows()) out.noise = noise.middleRows(b, n);
    return out;
}

std::vector<double> class_weights(std::size_t num_classes, double tail_exponent) {
    std::vector<double> w(num_classes);
    double total = 0.0;
    for (std::size_t c = 0; c < num_classes; ++c) {
        w[c] = std::pow(static_cast<double>(c + 1), -tail_exponent);
        total += w[c];
    }
    for (auto& x : w) x /= total;
    return w;
}

Dataset generate(const SynthSpec& spec) {
    spec.validate();
    Rng rng(mix_seed(spec.seed));
    std::normal_distribution<double> normal(0.0, 1.0);
    const auto L = static_cast<Eigen::Index>(spec.num_classes);
    const auto D = static_cast<Eigen::Index>(spec.feature_dim);
    const auto S = static_cast<Eigen::Index>(spec.num_samples);

    Dataset d;
    d.class_prototypes.resize(L, D);
    for (Eigen::Index c = 0; c < L; ++c) {
        for (Eigen::Index k = 0; k < D; ++k) d.class_prototypes(c, k) = normal(rng);
    }
    normalize_rows(d.class_prototypes);

    const auto weights = class_weights(spec.num_classes, spec.tail_exponent);
    const double extra_p =
        spec.num_classes > 1 ? (spec.avg_labels - 1.0) / static_cast<double>(spec.num_classes - 1) : 0.0;
    std::binomial_distribution<std::size_t> extra(spec.num_classes - 1, extra_p);

    d.features.resize(S, D);
    d.noise.resize(S, D);
    for (Eigen::Index i = 0; i < S; ++i) {
        const std::size_t card = 1 + extra(rng);
        std::vector<double> remaining = weights;
        std::vector<std::size_t> chosen;
        for (std::size_t k = 0; k < card; ++k) {
            std::discrete_distribution<std::size_t> pick(remaining.begin(), remaining.end());
            const std::size_t c = pick(rng);
            chosen.push_back(c);
            remaining[c] = 0.0;
        }
        d.labels.emplace_back(spec.num_classes, chosen);

        Vector mean = Vector::Zero(D);
        for (auto c : chosen) mean += d.class_prototypes.row(static_cast<Eigen::Index>(c)).transpose();
        mean /= static_cast<double>(card);
        for (Eigen::Index k = 0; k < D; ++k) d.noise(i, k) = spec.noise_sigma * normal(rng);
        d.features.row(i) = mean.transpose() + d.noise.row(i);
    }
    return d;
}

std::pair<Vector, Vector> augment_pair(const Vector& row, double noise_sigma, std::uint64_t seed) {
    if (!(noise_sigma >= 0.0)) throw ConfigError("noise_sigma must be >= 0");
    Rng rng(mix_seed(seed));
    std::normal_distribution<double> normal(0.0, 1.0);
    Vector a = row;
    Vector b = row;
    if (noise_sigma > 0.0) {
        for (Eigen::Index k = 0; k < row.size(); ++k) a(k) += noise_sigma * normal(rng);
        for (Eigen::Index k = 0; k < row.size(); ++k) b(k) += noise_sigma * normal(rng);
    }
    return {std::move(a), std::move(b)};
}

void write_jsonl(std::ostream& os, const Dataset& d) {
    for (std::size_t i = 0; i < d.num_samples(); ++i) {
        const auto row = d.features.row(static_cast<Eigen::Index>(i));
        nlohmann::json j{{"features", std::vector<double>(row.begin(), row.end())}, {"labels", d.labels[i].members()}};
        os << j.dump() << '\n';
    }
}

Dataset read_jsonl(std::istream& is, std::size_t num_classes) {
    std::vector<std::vector<double>> rows;
    std::vector<std::vector<std::size_t>> raw_labels;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(is, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            auto j = nlohmann::json::parse(line);
            rows.push_back(j.at("features").get<std::vector<double>>());
            raw_labels.push_back(j.at("labels").get<std::vector<std::size_t>>());
        } catch (const nlohmann::json::exception& e) {
            throw ConfigError("dataset line " + std::to_string(line_no) + ": " + e.what());
        }
        if (rows.back().size() != rows.front().size()) {
            throw ConfigError("dataset line " + std::to_string(line_no) + ": feature width differs from line 1");
        }
    }
    if (rows.size() < 2) throw ConfigError("dataset needs at least 2 samples");
    if (num_classes == 0) {
        for (const auto& l : raw_labels) {
            for (auto m : l) num_classes = std::max(num_classes, m + 1);
        }
    }
    Dataset d;
    d.features.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.front().size()));
    for (std::size_t i = 0; i < rows.size(); ++i) {
        for (std::size_t k = 0; k < rows[i].size(); ++k) {
            d.features(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = rows[i][k];
        }
        try {
            d.labels.emplace_back(num_classes, raw_labels[i]);
        } catch (const std::exception& e) {
            throw ConfigError("dataset line " + std::to_string(i + 1) + ": " + e.what());
        }
    }
    if (!d.features.allFinite()) throw ConfigError("dataset contains non-finite features");
    return d;
}

}  // namespace simdis::synth
