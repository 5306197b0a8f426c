#include "simdis/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "simdis/errors.hpp"

namespace simdis::metrics {

namespace {

struct Counts {
    double tp = 0, fp = 0, fn = 0;
};

double f1_of(const Counts& c) {
    const double denom = 2 * c.tp + c.fp + c.fn;
    return denom == 0 ? 0.0 : 2 * c.tp / denom;
}

// Sample order for class c: descending score, ties by lower sample index.
std::vector<std::size_t> ranking(const Matrix& scores, Eigen::Index c) {
    std::vector<std::size_t> order(static_cast<std::size_t>(scores.rows()));
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return scores(static_cast<Eigen::Index>(a), c) > scores(static_cast<Eigen::Index>(b), c);
    });
    return order;
}

// AUC of (score, label) cells; nullopt when one side is empty.
std::optional<double> rank_auc(std::vector<std::pair<double, bool>> cells) {
    std::sort(cells.begin(), cells.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
    double pos_rank_sum = 0.0;
    double n_pos = 0.0;
    std::size_t i = 0;
    while (i < cells.size()) {
        std::size_t j = i;
        while (j < cells.size() && cells[j].first == cells[i].first) ++j;
        // ranks i+1 .. j share their average
        const double avg_rank = (static_cast<double>(i + 1) + static_cast<double>(j)) / 2.0;
        for (std::size_t k = i; k < j; ++k) {
            if (cells[k].second) {
                pos_rank_sum += avg_rank;
                n_pos += 1.0;
            }
        }
        i = j;
    }
    const double n_neg = static_cast<double>(cells.size()) - n_pos;
    if (n_pos == 0.0 || n_neg == 0.0) return std::nullopt;
    return (pos_rank_sum - n_pos * (n_pos + 1.0) / 2.0) / (n_pos * n_neg);
}

}  // namespace

void Predictions::validate() const {
    if (truths.empty()) throw DomainError("predictions need at least one sample");
    if (static_cast<std::size_t>(scores.rows()) != truths.size()) throw ConfigError("score rows != truth count");
    if (!scores.allFinite()) throw NumericError("non-finite score");
    for (const auto& t : truths) {
        if (t.universe_size() > num_classes()) throw ConfigError("truth labels exceed score columns");
    }
}

double f1(const Predictions& p, Averaging averaging) {
    p.validate();
    const auto L = p.num_classes();
    std::vector<Counts> per_class(L);
    for (std::size_t i = 0; i < p.num_samples(); ++i) {
        for (std::size_t c = 0; c < L; ++c) {
            const bool predicted = p.scores(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) >= p.threshold;
            const bool truth = p.truths[i].contains(c);
            if (predicted && truth) per_class[c].tp += 1;
            else if (predicted) per_class[c].fp += 1;
            else if (truth) per_class[c].fn += 1;
        }
    }
    if (averaging == Averaging::Micro) {
        Counts pooled;
        for (const auto& c : per_class) {
            pooled.tp += c.tp;
            pooled.fp += c.fp;
            pooled.fn += c.fn;
        }
        return f1_of(pooled);
    }
    double sum = 0.0;
    for (const auto& c : per_class) sum += f1_of(c);
    return sum / static_cast<double>(L);
}

double mean_average_precision(const Predictions& p) {
    p.validate();
    const auto L = static_cast<std::ptrdiff_t>(p.num_classes());
    std::vector<double> ap(static_cast<std::size_t>(L), 0.0);
    std::vector<char> has_pos(static_cast<std::size_t>(L), 0);

#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t c = 0; c < L; ++c) {
        const auto uc = static_cast<std::size_t>(c);
        double hits = 0.0, sum = 0.0;
        const auto order = ranking(p.scores, c);
        for (std::size_t r = 0; r < order.size(); ++r) {
            if (p.truths[order[r]].contains(uc)) {
                hits += 1.0;
                sum += hits / static_cast<double>(r + 1);
            }
        }
        if (hits > 0) {
            has_pos[uc] = 1;
            ap[uc] = sum / hits;
        }
    }

    double total = 0.0;
    std::size_t used = 0;
    for (std::size_t c = 0; c < ap.size(); ++c) {
        if (has_pos[c]) {
            total += ap[c];
            ++used;
        }
    }
    if (used == 0) throw DomainError("mAP undefined: no class has a positive sample");
    return total / static_cast<double>(used);
}

double precision_at_k(const Predictions& p, std::size_t k) {
    p.validate();
    const auto L = p.num_classes();
    if (k < 1 || k > L) throw ConfigError("precision@k needs 1 <= k <= number of classes");
    double sum = 0.0;
    std::vector<std::size_t> order(L);
    for (std::size_t i = 0; i < p.num_samples(); ++i) {
        const auto row = static_cast<Eigen::Index>(i);
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k), order.end(),
                          [&](std::size_t a, std::size_t b) {
                              const double sa = p.scores(row, static_cast<Eigen::Index>(a));
                              const double sb = p.scores(row, static_cast<Eigen::Index>(b));
                              return sa > sb || (sa == sb && a < b);
                          });
        std::size_t hits = 0;
        for (std::size_t r = 0; r < k; ++r) hits += p.truths[i].contains(order[r]) ? 1 : 0;
        sum += static_cast<double>(hits) / static_cast<double>(k);
    }
    return sum / static_cast<double>(p.num_samples());
}

AucResult auc(const Predictions& p, Averaging averaging) {
    p.validate();
    const auto L = p.num_classes();
    const auto n = p.num_samples();
    AucResult result;
    if (averaging == Averaging::Micro) {
        std::vector<std::pair<double, bool>> cells;
        cells.reserve(n * L);
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t c = 0; c < L; ++c) {
                cells.emplace_back(p.scores(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)),
                                   p.truths[i].contains(c));
            }
        }
        auto v = rank_auc(std::move(cells));
        if (!v) throw DomainError("micro AUC undefined: cells are all positive or all negative");
        result.value = *v;
        return result;
    }

    std::vector<std::optional<double>> per_class(L);
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t c = 0; c < static_cast<std::ptrdiff_t>(L); ++c) {
        std::vector<std::pair<double, bool>> cells;
        cells.reserve(n);
        for (std::size_t i = 0; i < n; ++i) {
            cells.emplace_back(p.scores(static_cast<Eigen::Index>(i), c), p.truths[i].contains(static_cast<std::size_t>(c)));
        }
        per_class[static_cast<std::size_t>(c)] = rank_auc(std::move(cells));
    }
    double sum = 0.0;
    std::size_t used = 0;
    for (std::size_t c = 0; c < L; ++c) {
        if (per_class[c]) {
            sum += *per_class[c];
            ++used;
        } else {
            result.excluded_classes.push_back(c);
        }
    }
    if (used == 0) throw DomainError("macro AUC undefined: every class is degenerate");
    result.value = sum / static_cast<double>(used);
    return result;
}

std::map<std::string, double> evaluate_all(const Predictions& p, const std::vector<std::size_t>& ks) {
    std::map<std::string, double> m;
    m["micro_f1"] = f1(p, Averaging::Micro);
    m["macro_f1"] = f1(p, Averaging::Macro);
    m["mAP"] = mean_average_precision(p);
    for (auto k : ks) {
        if (k >= 1 && k <= p.num_classes()) m["p_at_" + std::to_string(k)] = precision_at_k(p, k);
    }
    m["micro_auc"] = auc(p, Averaging::Micro).value;
    const auto macro = auc(p, Averaging::Macro);
    m["macro_auc"] = macro.value;
    m["macro_auc_excluded_classes"] = static_cast<double>(macro.excluded_classes.size());
    return m;
}

nlohmann::json to_json(const std::map<std::string, double>& metrics) {
    nlohmann::json j = nlohmann::json::object();
    for (const auto& [k, v] : metrics) j[k] = v;
    return j;
}

std::string to_csv(const std::map<std::string, double>& metrics) {
    std::ostringstream header, row;
    row.precision(17);
    bool first = true;
    for (const auto& [k, v] : metrics) {
        if (!first) {
            header << ',';
            row << ',';
        }
        header << k;
        row << v;
        first = false;
    }
    return header.str() + "\n" + row.str() + "\n";
}

}  // namespace simdis::metrics
