#pragma once

#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "simdis/batch.hpp"
#include "simdis/label_set.hpp"

namespace simdis::metrics {

/// Scores are num_samples x L; truths[i] are the true classes of sample i.
struct Predictions {
    Matrix scores;
    std::vector<LabelSet> truths;
    double threshold = 0.5;  // F1 predicts class c when scores(i, c) >= threshold

    std::size_t num_samples() const { return truths.size(); }
    std::size_t num_classes() const { return static_cast<std::size_t>(scores.cols()); }
    void validate() const;
};

enum class Averaging { Micro, Macro };

/// Micro pools TP/FP/FN over all cells; macro averages per-class F1 over all
/// L classes, where a class with TP + FP + FN = 0 scores 0.
double f1(const Predictions& p, Averaging averaging);

/// Per-class AP over the samples ranked by descending score (ties: lower
/// sample index first), averaged over classes with at least one positive.
/// Throws DomainError when no class has a positive.
double mean_average_precision(const Predictions& p);

/// Mean over samples of |top-k classes ∩ truth| / k. Ties in score rank the
/// lower class index first.
double precision_at_k(const Predictions& p, std::size_t k);

struct AucResult {
    double value = 0.5;
    std::vector<std::size_t> excluded_classes;  // macro only: all-positive or all-negative classes
};

/// Mann-Whitney AUC with ties counted as 1/2. Micro pools every cell; macro
/// averages classes that have both positives and negatives.
AucResult auc(const Predictions& p, Averaging averaging);

/// Ordered name -> value map of every metric (p_at_k for each k <= L).
std::map<std::string, double> evaluate_all(const Predictions& p, const std::vector<std::size_t>& ks);

nlohmann::json to_json(const std::map<std::string, double>& metrics);
/// Header line plus one value row.
std::string to_csv(const std::map<std::string, double>& metrics);

}  // namespace simdis::metrics
