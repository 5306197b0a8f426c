#include "simdis/batch.hpp"

#include <algorithm>
#include <cmath>

#include "simdis/errors.hpp"

namespace simdis {

void ContrastiveBatch::validate(bool require_unit_rows) const {
    if (labels.size() < 2) throw ConfigError("a contrastive batch needs at least 2 samples");
    if (static_cast<std::size_t>(embeddings.rows()) != labels.size()) {
        throw ConfigError("embedding rows (" + std::to_string(embeddings.rows()) + ") != label count (" +
                          std::to_string(labels.size()) + ")");
    }
    if (embeddings.cols() < 1) throw ConfigError("embeddings need at least one column");
    if (!(temperature > 0.0) || !std::isfinite(temperature)) throw ConfigError("temperature must be positive");
    const auto universe = labels.front().universe_size();
    for (const auto& l : labels) {
        if (l.universe_size() != universe) throw ConfigError("labels use different universes");
    }
    if (!embeddings.allFinite()) throw NumericError("non-finite embedding entry");
    if (require_unit_rows) {
        for (Eigen::Index r = 0; r < embeddings.rows(); ++r) {
            if (std::abs(embeddings.row(r).norm() - 1.0) > 1e-9) {
                throw ConfigError("row " + std::to_string(r) + " is not unit norm");
            }
        }
    }
}

bool ContrastiveBatch::has_paired_views() const {
    if (labels.size() % 2 != 0) return false;
    for (std::size_t i = 0; i + 1 < labels.size(); i += 2) {
        if (!(labels[i] == labels[i + 1])) return false;
    }
    return true;
}

nlohmann::json batch_to_json(const ContrastiveBatch& batch) {
    nlohmann::json labels = nlohmann::json::array();
    for (const auto& l : batch.labels) labels.push_back(l.members());
    nlohmann::json rows = nlohmann::json::array();
    for (Eigen::Index r = 0; r < batch.embeddings.rows(); ++r) {
        std::vector<double> row(batch.embeddings.row(r).begin(), batch.embeddings.row(r).end());
        rows.push_back(row);
    }
    return {{"temperature", batch.temperature}, {"labels", labels}, {"embeddings", rows}};
}

ContrastiveBatch batch_from_json(const nlohmann::json& j, std::size_t universe_size) {
    try {
        ContrastiveBatch batch;
        batch.temperature = j.at("temperature").get<double>();
        auto raw_labels = j.at("labels").get<std::vector<std::vector<std::size_t>>>();
        auto rows = j.at("embeddings").get<std::vector<std::vector<double>>>();
        if (universe_size == 0) {
            for (const auto& l : raw_labels) {
                for (auto m : l) universe_size = std::max(universe_size, m + 1);
            }
        }
        for (const auto& l : raw_labels) batch.labels.emplace_back(universe_size, l);
        const std::size_t dim = rows.empty() ? 0 : rows.front().size();
        batch.embeddings.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(dim));
        for (std::size_t r = 0; r < rows.size(); ++r) {
            if (rows[r].size() != dim) throw ConfigError("ragged embedding rows");
            for (std::size_t c = 0; c < dim; ++c) batch.embeddings(r, c) = rows[r][c];
        }
        return batch;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("malformed batch JSON: ") + e.what());
    }
}

void normalize_rows(Matrix& m) {
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        const double n = m.row(r).norm();
        if (n > 0.0) m.row(r) /= n;
    }
}

}  // namespace simdis
