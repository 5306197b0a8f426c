#include "simdis/losses.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <sstream>

#include "simdis/errors.hpp"
#include "simdis/kernels.hpp"

namespace simdis {

namespace {

template <class... Ts>
struct overloaded : Ts... {
    using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

std::string lower(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return std::tolower(c); });
    return out;
}

std::vector<std::size_t> any_positives(const ContrastiveBatch& batch, std::size_t anchor) {
    std::vector<std::size_t> out;
    for (std::size_t p = 0; p < batch.size(); ++p) {
        if (p != anchor && batch.labels[anchor].intersection_size(batch.labels[p]) > 0) out.push_back(p);
    }
    return out;
}

kernels::AnchorPlan uniform_plan(const std::vector<std::size_t>& positives) {
    kernels::AnchorPlan plan;
    const double c = positives.empty() ? 0.0 : 1.0 / static_cast<double>(positives.size());
    for (auto p : positives) plan.positives.push_back({p, c, 1.0});
    return plan;
}

kernels::LossPlan build_plan(const ContrastiveBatch& batch, const Strategy& strategy) {
    const std::size_t n = batch.size();
    kernels::LossPlan plan;
    plan.anchors.resize(n);

    std::visit(overloaded{
                   [&](const AllStrategy&) {
                       for (std::size_t i = 0; i < n; ++i) {
                           std::vector<std::size_t> pos;
                           for (std::size_t p = 0; p < n; ++p) {
                               if (p != i && batch.labels[p] == batch.labels[i]) pos.push_back(p);
                           }
                           plan.anchors[i] = uniform_plan(pos);
                       }
                   },
                   [&](const AnyStrategy&) {
                       for (std::size_t i = 0; i < n; ++i) plan.anchors[i] = uniform_plan(any_positives(batch, i));
                   },
                   [&](const MulSupConStrategy&) {
                       // One positive set per anchor label; a positive sharing k labels
                       // accumulates k terms, each divided by its own per-label set size.
                       std::size_t label_total = 0;
                       for (std::size_t i = 0; i < n; ++i) {
                           label_total += batch.labels[i].size();
                           auto pos = any_positives(batch, i);
                           std::vector<double> coeff(pos.size(), 0.0);
                           for (auto l : batch.labels[i].members()) {
                               std::size_t count = 0;
                               for (auto p : pos) count += batch.labels[p].contains(l) ? 1 : 0;
                               if (count == 0) continue;
                               for (std::size_t k = 0; k < pos.size(); ++k) {
                                   if (batch.labels[pos[k]].contains(l)) coeff[k] += 1.0 / static_cast<double>(count);
                               }
                           }
                           for (std::size_t k = 0; k < pos.size(); ++k) {
                               plan.anchors[i].positives.push_back({pos[k], coeff[k], 1.0});
                           }
                       }
                       plan.total_scale = 1.0 / static_cast<double>(label_total);
                   },
                   [&](const SimDisStrategy& s) {
                       validate_penalty(s.penalty);
                       for (std::size_t i = 0; i < n; ++i) {
                           auto pos = any_positives(batch, i);
                           auto& anchor = plan.anchors[i];
                           if (pos.empty()) continue;
                           const double inv = 1.0 / static_cast<double>(pos.size());
                           for (auto p : pos) {
                               const double w = pair_factors(batch.labels[i], batch.labels[p], s.penalty).weight;
                               switch (s.placement) {
                                   case Placement::InsideLog:
                                       anchor.positives.push_back({p, inv, 1.0});
                                       anchor.offset -= inv * std::log(w);
                                       break;
                                   case Placement::OutsideLog:
                                       anchor.positives.push_back({p, inv * w, 1.0});
                                       break;
                                   case Placement::TemperatureScaled:
                                       anchor.positives.push_back({p, inv, w});
                                       break;
                               }
                           }
                       }
                   },
               },
               strategy.kind);
    return plan;
}

LossReport run(const ContrastiveBatch& batch, const Strategy& strategy, Backend backend) {
    batch.validate();
    auto plan = build_plan(batch, strategy);
    auto out = backend == Backend::Serial ? kernels::evaluate_serial(plan, batch.embeddings, batch.temperature)
                                          : kernels::evaluate_parallel(plan, batch.embeddings, batch.temperature);
    LossReport report;
    for (std::size_t i = 0; i < plan.anchors.size(); ++i) {
        if (plan.anchors[i].positives.empty()) {
            report.skipped_anchors.push_back(i);
        } else {
            report.anchors.push_back(i);
            report.per_anchor.push_back(out.anchor_loss[i]);
        }
    }
    report.total = out.total;
    report.gradient = std::move(out.gradient);
    if (!std::isfinite(report.total) || !report.gradient.allFinite()) {
        throw NumericError("non-finite contrastive loss or gradient for strategy " + strategy.name());
    }
    return report;
}

}  // namespace

std::string_view to_string(Placement p) {
    switch (p) {
        case Placement::InsideLog: return "InsideLog";
        case Placement::OutsideLog: return "OutsideLog";
        case Placement::TemperatureScaled: return "TemperatureScaled";
    }
    return "?";
}

std::string Strategy::name() const {
    return std::visit(overloaded{
                          [](const AllStrategy&) { return std::string("ALL"); },
                          [](const AnyStrategy&) { return std::string("ANY"); },
                          [](const MulSupConStrategy&) { return std::string("MulSupCon"); },
                          [](const SimDisStrategy& s) {
                              std::string out = "SimDis:" + std::string(to_string(s.placement));
                              if (const auto* e = std::get_if<ExponentialDecay>(&s.penalty)) {
                                  std::ostringstream os;
                                  os << ":exp=" << e->alpha;
                                  out += os.str();
                              }
                              return out;
                          },
                      },
                      kind);
}

Strategy Strategy::parse(std::string_view text) {
    std::vector<std::string> parts;
    std::size_t start = 0;
    while (true) {
        auto colon = text.find(':', start);
        parts.emplace_back(text.substr(start, colon == std::string_view::npos ? text.npos : colon - start));
        if (colon == std::string_view::npos) break;
        start = colon + 1;
    }
    const auto head = lower(parts[0]);
    if (parts.size() == 1) {
        if (head == "all") return all();
        if (head == "any") return any();
        if (head == "mulsupcon") return mulsupcon();
    }
    if (head != "simdis" || parts.size() > 3) throw ConfigError("unknown strategy '" + std::string(text) + "'");

    SimDisStrategy s;
    if (parts.size() >= 2) {
        const auto placement = lower(parts[1]);
        if (placement == "insidelog") s.placement = Placement::InsideLog;
        else if (placement == "outsidelog") s.placement = Placement::OutsideLog;
        else if (placement == "temperaturescaled") s.placement = Placement::TemperatureScaled;
        else throw ConfigError("unknown placement '" + parts[1] + "'");
    }
    if (parts.size() == 3) {
        const auto penalty = lower(parts[2]);
        if (penalty == "reciprocal") {
            s.penalty = Reciprocal{};
        } else if (penalty.rfind("exp=", 0) == 0) {
            double alpha = 0.0;
            const auto value = penalty.substr(4);
            auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), alpha);
            if (ec != std::errc{} || ptr != value.data() + value.size()) {
                throw ConfigError("bad exponential decay rate '" + value + "'");
            }
            s.penalty = ExponentialDecay{alpha};
            validate_penalty(s.penalty);
        } else {
            throw ConfigError("unknown penalty '" + parts[2] + "'");
        }
    }
    return {s};
}

std::vector<Strategy> all_strategies() {
    return {Strategy::all(), Strategy::any(), Strategy::mulsupcon(), Strategy::simdis(Placement::InsideLog),
            Strategy::simdis(Placement::OutsideLog), Strategy::simdis(Placement::TemperatureScaled)};
}

std::vector<PositiveEntry> positive_set(const Strategy& strategy, const ContrastiveBatch& batch, std::size_t anchor) {
    if (anchor >= batch.size()) throw ConfigError("anchor index out of range");
    std::vector<PositiveEntry> out;
    const auto& s = batch.labels[anchor];
    for (std::size_t p = 0; p < batch.size(); ++p) {
        if (p == anchor) continue;
        const auto overlap = s.intersection_size(batch.labels[p]);
        if (std::holds_alternative<AllStrategy>(strategy.kind)) {
            if (batch.labels[p] == s) out.push_back({p, 1});
        } else if (std::holds_alternative<MulSupConStrategy>(strategy.kind)) {
            if (overlap > 0) out.push_back({p, overlap});
        } else if (overlap > 0) {
            out.push_back({p, 1});
        }
    }
    return out;
}

LossReport compute_loss(const ContrastiveBatch& batch, const Strategy& strategy, Backend backend) {
    return run(batch, strategy, backend);
}

LossReport loss_supcon(const ContrastiveBatch& batch, const Strategy& strategy, Backend backend) {
    if (!std::holds_alternative<AllStrategy>(strategy.kind) && !std::holds_alternative<AnyStrategy>(strategy.kind)) {
        throw ConfigError("loss_supcon takes ALL or ANY, got " + strategy.name());
    }
    return run(batch, strategy, backend);
}

LossReport loss_mulsupcon(const ContrastiveBatch& batch, Backend backend) {
    return run(batch, Strategy::mulsupcon(), backend);
}

LossReport loss_simdis(const ContrastiveBatch& batch, Placement placement, const PenaltyKind& penalty, Backend backend) {
    return run(batch, Strategy::simdis(placement, penalty), backend);
}

Matrix gradient(const ContrastiveBatch& batch, const Strategy& strategy, Backend backend) {
    return run(batch, strategy, backend).gradient;
}

}  // namespace simdis
