#pragma once

#include <Eigen/Core>
#include <json.hpp>
#include <string>
#include <vector>

#include "simdis/label_set.hpp"

namespace simdis {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

/// 2N projected embeddings with their label sets. Row k is z_k.
///
/// Trainer-built batches keep labels[2i] == labels[2i+1] (two views of one
/// sample); hand-built batches need not.
struct ContrastiveBatch {
    Matrix embeddings;
    std::vector<LabelSet> labels;
    double temperature = 0.07;

    std::size_t size() const { return labels.size(); }
    std::size_t dim() const { return static_cast<std::size_t>(embeddings.cols()); }

    /// Throws ConfigError on shape/temperature problems and NumericError on
    /// non-finite entries. With require_unit_rows, every row must have unit
    /// norm to 1e-9.
    void validate(bool require_unit_rows = false) const;

    /// True when labels[2i] == labels[2i+1] for every pair.
    bool has_paired_views() const;
};

/// {temperature, labels: [[ints]], embeddings: [[floats]]}. The universe is
/// not stored; readers supply it (or take 1 + the largest label seen).
nlohmann::json batch_to_json(const ContrastiveBatch& batch);
ContrastiveBatch batch_from_json(const nlohmann::json& j, std::size_t universe_size = 0);

/// L2-normalizes each row in place; rows of zero norm are left unchanged.
void normalize_rows(Matrix& m);

}  // namespace simdis
