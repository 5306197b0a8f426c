#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "simdis/batch.hpp"
#include "simdis/errors.hpp"
#include "simdis/losses.hpp"
#include "simdis/synth.hpp"

namespace simdis::train {

/// Affine layer y = x W + b for row-major batches x. weight is in x out,
/// bias is 1 x out.
struct Dense {
    Matrix weight;
    Matrix bias;

    std::size_t inputs() const { return static_cast<std::size_t>(weight.rows()); }
    std::size_t outputs() const { return static_cast<std::size_t>(weight.cols()); }
};

/// Encoder MLP (ReLU between layers, linear output), two-layer projection
/// head with a ReLU in between, and a linear probe on the encoder output.
struct ModelParams {
    std::vector<Dense> encoder;
    std::vector<Dense> projection;
    Dense probe;

    std::size_t embedding_dim() const { return encoder.back().outputs(); }
    std::size_t projection_dim() const { return projection.back().outputs(); }

    /// Visits "encoder.0.weight", "encoder.0.bias", ..., "probe.bias" in a fixed order.
    void for_each_tensor(const std::function<void(const std::string&, Matrix&)>& fn);
    void for_each_tensor(const std::function<void(const std::string&, const Matrix&)>& fn) const;

    friend bool operator==(const ModelParams& a, const ModelParams& b);
};

struct TrainConfig {
    Strategy strategy = Strategy::simdis(Placement::InsideLog);
    double temperature = 0.07;
    std::size_t epochs_contrastive = 30;
    std::size_t epochs_probe = 50;
    std::size_t batch_pairs = 64;               // N; a contrastive step sees 2N views
    double learning_rate = 0.05;
    double momentum = 0.9;
    double warmup_fraction = 0.05;
    double weight_decay = 1e-4;
    bool normalize_projection = true;
    std::uint64_t seed = 0;

    std::vector<std::size_t> encoder_widths = {64, 64};
    std::size_t projection_dim = 32;
    double augment_noise = 0.1;
    double probe_learning_rate = 0.1;
    double probe_threshold = 0.5;

    void validate() const;
};

void to_json(nlohmann::json& j, const TrainConfig& c);
/// Missing keys keep their defaults; unknown keys and wrong types throw ConfigError.
void from_json(const nlohmann::json& j, TrainConfig& c);

struct EpochRecord {
    std::size_t epoch = 0;     // 1-based within its phase
    std::string phase;         // "contrastive" or "probe"
    double loss = 0.0;         // mean batch loss over the epoch
    double learning_rate = 0;  // rate used by the epoch's last step
};

struct TrainTrace {
    std::vector<EpochRecord> contrastive;
    std::vector<EpochRecord> probe;
    std::map<std::string, double> metrics;

    std::string to_csv() const;
};

/// Training produced a non-finite loss; carries the trace up to that point.
class DivergenceError : public NumericError {
public:
    DivergenceError(const std::string& what, TrainTrace trace) : NumericError(what), trace_(std::move(trace)) {}
    const TrainTrace& trace() const { return trace_; }

private:
    TrainTrace trace_;
};

struct TrainResult {
    ModelParams params;
    TrainTrace trace;
};

/// Linear warmup to `peak` over round(warmup_fraction * total_steps) steps
/// (at least one when the fraction is positive), then cosine decay to 0 at
/// step total_steps.
double scheduled_rate(double peak, std::size_t step, std::size_t total_steps, double warmup_fraction);

/// Deterministic initial parameters for the given input width and class count.
ModelParams init_params(std::size_t feature_dim, std::size_t num_classes, const TrainConfig& config);

/// Sample order for one epoch of either phase.
std::vector<std::size_t> epoch_order(std::uint64_t seed, std::size_t epoch, std::size_t num_samples);

/// Encoder output for every row of `features`.
Matrix encode(const ModelParams& params, const Matrix& features);

/// Projected (optionally normalized) rows for a batch of views.
Matrix project(const ModelParams& params, const Matrix& views, bool normalize);

/// Batch contrastive loss on `views` and its gradient with respect to every
/// encoder and projection tensor (probe gradients are zero). Strategies whose
/// batch total is a plain sum over anchors are divided by the number of views;
/// MulSupCon keeps its own label-count normalization.
struct ContrastiveStep {
    double loss = 0.0;
    ModelParams grads;
};
ContrastiveStep contrastive_step(const ModelParams& params, const Matrix& views, const std::vector<LabelSet>& labels,
                                 const TrainConfig& config);

/// Builds the 2N views of the samples `indices` (rows 2k and 2k+1 are the two
/// augmentations of sample indices[k]).
std::pair<Matrix, std::vector<LabelSet>> make_views(const synth::Dataset& data, std::span<const std::size_t> indices,
                                                    double noise_sigma, std::uint64_t seed);

/// Phase 1: trains encoder and projection head with the configured strategy.
/// Starts from init_params(...) and leaves the probe at its initial value.
TrainResult train_contrastive(const synth::Dataset& data, const TrainConfig& config);

/// Phase 2: sigmoid-BCE linear probe on frozen, un-augmented encoder outputs.
/// `model.encoder` and `model.projection` are returned unchanged.
TrainResult train_probe(const synth::Dataset& data, const ModelParams& model, const TrainConfig& config);

/// Mean over samples of the summed per-class BCE of the probe.
double probe_loss(const ModelParams& params, const synth::Dataset& data);

/// Sigmoid probe scores for every sample.
Matrix probe_scores(const ModelParams& params, const Matrix& features);

/// All metrics of the probe on `data`.
std::map<std::string, double> evaluate(const ModelParams& params, const synth::Dataset& data, double threshold,
                                       const std::vector<std::size_t>& ks);

nlohmann::json checkpoint_to_json(const ModelParams& params, const TrainConfig& config);
ModelParams checkpoint_from_json(const nlohmann::json& j);

}  // namespace simdis::train
