#include "simdis/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <set>
#include <sstream>

#include "simdis/metrics.hpp"
#include "simdis/random.hpp"

namespace simdis::train {

namespace {

constexpr std::uint64_t kInitSalt = 0x1d1715eedULL;
constexpr std::uint64_t kOrderSalt = 0x0bde5a17ULL;
constexpr std::uint64_t kAugmentSalt = 0xa06e47ULL;
constexpr std::uint64_t kProbeSalt = 0x960be5a1ULL;

Dense make_dense(Rng& rng, std::size_t in, std::size_t out) {
    std::normal_distribution<double> normal(0.0, std::sqrt(2.0 / static_cast<double>(in)));
    Dense d;
    d.weight.resize(static_cast<Eigen::Index>(in), static_cast<Eigen::Index>(out));
    for (Eigen::Index k = 0; k < d.weight.size(); ++k) d.weight.data()[k] = normal(rng);
    d.bias = Matrix::Zero(1, static_cast<Eigen::Index>(out));
    return d;
}

Dense zeros_like(const Dense& d) {
    return {Matrix::Zero(d.weight.rows(), d.weight.cols()), Matrix::Zero(d.bias.rows(), d.bias.cols())};
}

ModelParams zeros_like(const ModelParams& p) {
    ModelParams z;
    for (const auto& d : p.encoder) z.encoder.push_back(zeros_like(d));
    for (const auto& d : p.projection) z.projection.push_back(zeros_like(d));
    z.probe = zeros_like(p.probe);
    return z;
}

Matrix affine(const Dense& d, const Matrix& x) {
    Matrix y = x * d.weight;
    y.rowwise() += d.bias.row(0);
    return y;
}

struct MlpCache {
    std::vector<Matrix> inputs;
    std::vector<Matrix> pre;
};

// ReLU after every layer except the last.
Matrix mlp_forward(const std::vector<Dense>& layers, const Matrix& x, MlpCache* cache) {
    Matrix a = x;
    for (std::size_t l = 0; l < layers.size(); ++l) {
        Matrix pre = affine(layers[l], a);
        if (cache) {
            cache->inputs.push_back(a);
            cache->pre.push_back(pre);
        }
        a = l + 1 < layers.size() ? Matrix(pre.cwiseMax(0.0)) : pre;
    }
    return a;
}

// Returns d loss / d input; fills grads with per-layer gradients.
Matrix mlp_backward(const std::vector<Dense>& layers, const MlpCache& cache, Matrix d, std::vector<Dense>& grads) {
    for (std::size_t l = layers.size(); l-- > 0;) {
        if (l + 1 < layers.size()) d = d.cwiseProduct((cache.pre[l].array() > 0.0).cast<double>().matrix());
        grads[l].weight = cache.inputs[l].transpose() * d;
        grads[l].bias = d.colwise().sum();
        d = d * layers[l].weight.transpose();
    }
    return d;
}

std::vector<Matrix*> tensors(ModelParams& p) {
    std::vector<Matrix*> out;
    p.for_each_tensor([&](const std::string&, Matrix& m) { out.push_back(&m); });
    return out;
}

// Heavy-ball SGD with L2 weight decay folded into the gradient.
void sgd_update(Matrix& w, Matrix& velocity, const Matrix& g, double lr, double momentum, double weight_decay) {
    velocity = momentum * velocity + g + weight_decay * w;
    w -= lr * velocity;
}

Matrix label_matrix(const std::vector<LabelSet>& labels, std::size_t num_classes) {
    Matrix y = Matrix::Zero(static_cast<Eigen::Index>(labels.size()), static_cast<Eigen::Index>(num_classes));
    for (std::size_t i = 0; i < labels.size(); ++i) {
        for (auto c : labels[i].members()) y(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) = 1.0;
    }
    return y;
}

// Sum over cells of softplus(x) - y x, i.e. BCE with logits.
double bce_sum(const Matrix& logits, const Matrix& y) {
    double total = 0.0;
    for (Eigen::Index k = 0; k < logits.size(); ++k) {
        const double x = logits.data()[k];
        total += std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))) - y.data()[k] * x;
    }
    return total;
}

Matrix sigmoid(const Matrix& x) {
    return x.unaryExpr([](double v) { return v >= 0 ? 1.0 / (1.0 + std::exp(-v)) : std::exp(v) / (1.0 + std::exp(v)); });
}

std::size_t steps_per_epoch(std::size_t n, std::size_t batch) { return (n + batch - 1) / batch; }

nlohmann::json tensor_json(const Matrix& m) {
    return {{"rows", m.rows()}, {"cols", m.cols()}, {"data", std::vector<double>(m.data(), m.data() + m.size())}};
}

Matrix tensor_from_json(const nlohmann::json& j) {
    const auto rows = j.at("rows").get<Eigen::Index>();
    const auto cols = j.at("cols").get<Eigen::Index>();
    const auto data = j.at("data").get<std::vector<double>>();
    if (static_cast<std::size_t>(rows * cols) != data.size()) throw ConfigError("tensor size mismatch in checkpoint");
    Matrix m(rows, cols);
    std::copy(data.begin(), data.end(), m.data());
    return m;
}

}  // namespace

// ---------------------------------------------------------------------------

void ModelParams::for_each_tensor(const std::function<void(const std::string&, Matrix&)>& fn) {
    for (std::size_t l = 0; l < encoder.size(); ++l) {
        fn("encoder." + std::to_string(l) + ".weight", encoder[l].weight);
        fn("encoder." + std::to_string(l) + ".bias", encoder[l].bias);
    }
    for (std::size_t l = 0; l < projection.size(); ++l) {
        fn("projection." + std::to_string(l) + ".weight", projection[l].weight);
        fn("projection." + std::to_string(l) + ".bias", projection[l].bias);
    }
    fn("probe.weight", probe.weight);
    fn("probe.bias", probe.bias);
}

void ModelParams::for_each_tensor(const std::function<void(const std::string&, const Matrix&)>& fn) const {
    const_cast<ModelParams*>(this)->for_each_tensor([&](const std::string& name, Matrix& m) { fn(name, m); });
}

bool operator==(const ModelParams& a, const ModelParams& b) {
    std::vector<const Matrix*> ta, tb;
    a.for_each_tensor([&](const std::string&, const Matrix& m) { ta.push_back(&m); });
    b.for_each_tensor([&](const std::string&, const Matrix& m) { tb.push_back(&m); });
    if (ta.size() != tb.size()) return false;
    for (std::size_t k = 0; k < ta.size(); ++k) {
        if (ta[k]->rows() != tb[k]->rows() || ta[k]->cols() != tb[k]->cols()) return false;
        if (!std::equal(ta[k]->data(), ta[k]->data() + ta[k]->size(), tb[k]->data())) return false;
    }
    return true;
}

void TrainConfig::validate() const {
    if (!(temperature > 0.0) || !std::isfinite(temperature)) throw ConfigError("temperature must be positive");
    if (!(warmup_fraction >= 0.0 && warmup_fraction < 1.0)) throw ConfigError("warmup_fraction must lie in [0, 1)");
    if (batch_pairs < 1) throw ConfigError("batch_pairs must be positive");
    if (!(learning_rate >= 0.0) || !(probe_learning_rate >= 0.0)) throw ConfigError("learning rates must be >= 0");
    if (!(momentum >= 0.0 && momentum < 1.0)) throw ConfigError("momentum must lie in [0, 1)");
    if (!(weight_decay >= 0.0)) throw ConfigError("weight_decay must be >= 0");
    if (encoder_widths.empty()) throw ConfigError("encoder needs at least one layer");
    for (auto w : encoder_widths) {
        if (w < 1) throw ConfigError("encoder widths must be positive");
    }
    if (projection_dim < 1) throw ConfigError("projection_dim must be positive");
    if (!(augment_noise >= 0.0)) throw ConfigError("augment_noise must be >= 0");
    if (!(probe_threshold > 0.0 && probe_threshold < 1.0)) throw ConfigError("probe_threshold must lie in (0, 1)");
    if (const auto* s = std::get_if<SimDisStrategy>(&strategy.kind)) validate_penalty(s->penalty);
}

void to_json(nlohmann::json& j, const TrainConfig& c) {
    j = {{"strategy", c.strategy.name()},
         {"temperature", c.temperature},
         {"epochs_contrastive", c.epochs_contrastive},
         {"epochs_probe", c.epochs_probe},
         {"batch_pairs", c.batch_pairs},
         {"learning_rate", c.learning_rate},
         {"momentum", c.momentum},
         {"warmup_fraction", c.warmup_fraction},
         {"weight_decay", c.weight_decay},
         {"normalize_projection", c.normalize_projection},
         {"seed", c.seed},
         {"encoder_widths", c.encoder_widths},
         {"projection_dim", c.projection_dim},
         {"augment_noise", c.augment_noise},
         {"probe_learning_rate", c.probe_learning_rate},
         {"probe_threshold", c.probe_threshold}};
}

void from_json(const nlohmann::json& j, TrainConfig& c) {
    if (!j.is_object()) throw ConfigError("key 'train': expected an object");
    static const std::set<std::string> known = {
        "strategy",     "temperature",   "epochs_contrastive", "epochs_probe",   "batch_pairs",
        "learning_rate", "momentum",     "warmup_fraction",    "weight_decay",   "normalize_projection",
        "seed",         "encoder_widths", "projection_dim",    "augment_noise",  "probe_learning_rate",
        "probe_threshold"};
    for (const auto& [key, value] : j.items()) {
        if (!known.contains(key)) throw ConfigError("key '" + key + "': unknown training option");
    }
    auto read = [&](const char* key, auto& field) {
        if (!j.contains(key)) return;
        try {
            j.at(key).get_to(field);
        } catch (const nlohmann::json::exception& e) {
            throw ConfigError(std::string("key '") + key + "': " + e.what());
        }
    };
    if (j.contains("strategy")) {
        if (!j.at("strategy").is_string()) throw ConfigError("key 'strategy': expected a string");
        try {
            c.strategy = Strategy::parse(j.at("strategy").get<std::string>());
        } catch (const ConfigError& e) {
            throw ConfigError(std::string("key 'strategy': ") + e.what());
        }
    }
    read("temperature", c.temperature);
    read("epochs_contrastive", c.epochs_contrastive);
    read("epochs_probe", c.epochs_probe);
    read("batch_pairs", c.batch_pairs);
    read("learning_rate", c.learning_rate);
    read("momentum", c.momentum);
    read("warmup_fraction", c.warmup_fraction);
    read("weight_decay", c.weight_decay);
    read("normalize_projection", c.normalize_projection);
    read("seed", c.seed);
    read("encoder_widths", c.encoder_widths);
    read("projection_dim", c.projection_dim);
    read("augment_noise", c.augment_noise);
    read("probe_learning_rate", c.probe_learning_rate);
    read("probe_threshold", c.probe_threshold);
}

std::string TrainTrace::to_csv() const {
    std::ostringstream os;
    os.precision(17);
    os << "epoch,phase,loss,lr\n";
    for (const auto* phase : {&contrastive, &probe}) {
        for (const auto& r : *phase) os << r.epoch << ',' << r.phase << ',' << r.loss << ',' << r.learning_rate << '\n';
    }
    return os.str();
}

double scheduled_rate(double peak, std::size_t step, std::size_t total_steps, double warmup_fraction) {
    if (total_steps == 0) return peak;
    std::size_t warmup = static_cast<std::size_t>(std::llround(warmup_fraction * static_cast<double>(total_steps)));
    if (warmup_fraction > 0.0) warmup = std::clamp<std::size_t>(warmup, 1, total_steps);
    if (step < warmup) return peak * static_cast<double>(step + 1) / static_cast<double>(warmup);
    const std::size_t decay = total_steps - warmup;
    if (decay == 0) return peak;
    const double progress = static_cast<double>(step - warmup) / static_cast<double>(decay);
    return peak * 0.5 * (1.0 + std::cos(std::numbers::pi * progress));
}

ModelParams init_params(std::size_t feature_dim, std::size_t num_classes, const TrainConfig& config) {
    config.validate();
    Rng rng(derive_seed(config.seed, kInitSalt));
    ModelParams p;
    std::size_t in = feature_dim;
    for (auto w : config.encoder_widths) {
        p.encoder.push_back(make_dense(rng, in, w));
        in = w;
    }
    const std::size_t h = in;
    p.projection.push_back(make_dense(rng, h, h));
    p.projection.push_back(make_dense(rng, h, config.projection_dim));
    p.probe = make_dense(rng, h, num_classes);
    p.probe.weight *= 0.1;
    return p;
}

std::vector<std::size_t> epoch_order(std::uint64_t seed, std::size_t epoch, std::size_t num_samples) {
    std::vector<std::size_t> order(num_samples);
    for (std::size_t k = 0; k < num_samples; ++k) order[k] = k;
    Rng rng(derive_seed(seed ^ kOrderSalt, epoch));
    for (std::size_t k = num_samples; k > 1; --k) {
        std::uniform_int_distribution<std::size_t> pick(0, k - 1);
        std::swap(order[k - 1], order[pick(rng)]);
    }
    return order;
}

Matrix encode(const ModelParams& params, const Matrix& features) {
    return mlp_forward(params.encoder, features, nullptr);
}

Matrix project(const ModelParams& params, const Matrix& views, bool normalize) {
    Matrix z = mlp_forward(params.projection, encode(params, views), nullptr);
    if (normalize) normalize_rows(z);
    return z;
}

ContrastiveStep contrastive_step(const ModelParams& params, const Matrix& views, const std::vector<LabelSet>& labels,
                                 const TrainConfig& config) {
    MlpCache enc_cache, proj_cache;
    const Matrix h = mlp_forward(params.encoder, views, &enc_cache);
    const Matrix u = mlp_forward(params.projection, h, &proj_cache);

    ContrastiveBatch batch;
    batch.embeddings = u;
    Vector norms = Vector::Ones(u.rows());
    if (config.normalize_projection) {
        for (Eigen::Index r = 0; r < u.rows(); ++r) {
            norms(r) = u.row(r).norm();
            if (norms(r) > 0.0) batch.embeddings.row(r) /= norms(r);
        }
    }
    batch.labels = labels;
    batch.temperature = config.temperature;
    auto report = compute_loss(batch, config.strategy);

    Matrix du = report.gradient;
    if (config.normalize_projection) {
        // d/du of u/|u|: (dz - z (z . dz)) / |u|
        for (Eigen::Index r = 0; r < du.rows(); ++r) {
            if (norms(r) == 0.0) continue;
            const auto z = batch.embeddings.row(r);
            du.row(r) = (report.gradient.row(r) - z * z.dot(report.gradient.row(r))) / norms(r);
        }
    }

    // Summed losses are optimized per anchor so the step size does not grow
    // with the batch; MulSupCon's total is already normalized.
    const double scale = std::holds_alternative<MulSupConStrategy>(config.strategy.kind)
                             ? 1.0
                             : 1.0 / static_cast<double>(labels.size());
    du *= scale;

    ContrastiveStep step;
    step.loss = report.total * scale;
    step.grads = zeros_like(params);
    const Matrix dh = mlp_backward(params.projection, proj_cache, du, step.grads.projection);
    mlp_backward(params.encoder, enc_cache, dh, step.grads.encoder);
    return step;
}

std::pair<Matrix, std::vector<LabelSet>> make_views(const synth::Dataset& data, std::span<const std::size_t> indices,
                                                    double noise_sigma, std::uint64_t seed) {
    Matrix views(static_cast<Eigen::Index>(2 * indices.size()), data.features.cols());
    std::vector<LabelSet> labels;
    labels.reserve(2 * indices.size());
    for (std::size_t k = 0; k < indices.size(); ++k) {
        const Vector row = data.features.row(static_cast<Eigen::Index>(indices[k])).transpose();
        auto [a, b] = synth::augment_pair(row, noise_sigma, derive_seed(seed, k));
        views.row(static_cast<Eigen::Index>(2 * k)) = a.transpose();
        views.row(static_cast<Eigen::Index>(2 * k + 1)) = b.transpose();
        labels.push_back(data.labels[indices[k]]);
        labels.push_back(data.labels[indices[k]]);
    }
    return {std::move(views), std::move(labels)};
}

TrainResult train_contrastive(const synth::Dataset& data, const TrainConfig& config) {
    config.validate();
    const std::size_t n = data.num_samples();
    TrainResult result;
    result.params = init_params(static_cast<std::size_t>(data.features.cols()), data.num_classes(), config);
    ModelParams velocity = zeros_like(result.params);
    auto weights = tensors(result.params);
    auto moments = tensors(velocity);
    const std::size_t trainable = weights.size() - 2;  // probe tensors stay fixed in this phase

    const std::size_t spe = steps_per_epoch(n, config.batch_pairs);
    const std::size_t total = spe * config.epochs_contrastive;
    std::size_t step_index = 0;
    for (std::size_t epoch = 0; epoch < config.epochs_contrastive; ++epoch) {
        const auto order = epoch_order(config.seed, epoch, n);
        double loss_sum = 0.0;
        double lr = 0.0;
        for (std::size_t b = 0; b < spe; ++b, ++step_index) {
            const std::size_t begin = b * config.batch_pairs;
            const std::size_t end = std::min(n, begin + config.batch_pairs);
            std::span<const std::size_t> idx(order.data() + begin, end - begin);
            auto [views, labels] =
                make_views(data, idx, config.augment_noise, derive_seed(config.seed ^ kAugmentSalt, step_index));

            ContrastiveStep step;
            try {
                step = contrastive_step(result.params, views, labels, config);
            } catch (const NumericError& e) {
                throw DivergenceError(std::string("contrastive epoch ") + std::to_string(epoch + 1) + ": " + e.what(),
                                      result.trace);
            }
            if (!std::isfinite(step.loss)) {
                throw DivergenceError("non-finite contrastive loss in epoch " + std::to_string(epoch + 1),
                                      result.trace);
            }
            loss_sum += step.loss;
            lr = scheduled_rate(config.learning_rate, step_index, total, config.warmup_fraction);
            auto grads = tensors(step.grads);
            for (std::size_t t = 0; t < trainable; ++t) {
                sgd_update(*weights[t], *moments[t], *grads[t], lr, config.momentum, config.weight_decay);
            }
        }
        result.trace.contrastive.push_back({epoch + 1, "contrastive", loss_sum / static_cast<double>(spe), lr});
    }
    return result;
}

TrainResult train_probe(const synth::Dataset& data, const ModelParams& model, const TrainConfig& config) {
    config.validate();
    TrainResult result;
    result.params = model;
    const std::size_t n = data.num_samples();
    const Matrix h = encode(model, data.features);
    const Matrix y = label_matrix(data.labels, data.num_classes());
    Dense& probe = result.params.probe;
    Dense velocity = zeros_like(probe);

    const std::size_t spe = steps_per_epoch(n, config.batch_pairs);
    const std::size_t total = spe * config.epochs_probe;
    std::size_t step_index = 0;
    for (std::size_t epoch = 0; epoch < config.epochs_probe; ++epoch) {
        const auto order = epoch_order(config.seed ^ kProbeSalt, epoch, n);
        double loss_sum = 0.0;
        double lr = 0.0;
        for (std::size_t b = 0; b < spe; ++b, ++step_index) {
            const std::size_t begin = b * config.batch_pairs;
            const std::size_t end = std::min(n, begin + config.batch_pairs);
            const auto rows = static_cast<Eigen::Index>(end - begin);
            Matrix hb(rows, h.cols());
            Matrix yb(rows, y.cols());
            for (Eigen::Index r = 0; r < rows; ++r) {
                hb.row(r) = h.row(static_cast<Eigen::Index>(order[begin + static_cast<std::size_t>(r)]));
                yb.row(r) = y.row(static_cast<Eigen::Index>(order[begin + static_cast<std::size_t>(r)]));
            }
            const Matrix logits = affine(probe, hb);
            const double loss = bce_sum(logits, yb) / static_cast<double>(rows);
            if (!std::isfinite(loss)) {
                throw DivergenceError("non-finite probe loss in epoch " + std::to_string(epoch + 1), result.trace);
            }
            loss_sum += loss;
            const Matrix dlogits = (sigmoid(logits) - yb) / static_cast<double>(rows);
            const Matrix gw = hb.transpose() * dlogits;
            const Matrix gb = dlogits.colwise().sum();
            lr = scheduled_rate(config.probe_learning_rate, step_index, total, config.warmup_fraction);
            sgd_update(probe.weight, velocity.weight, gw, lr, config.momentum, config.weight_decay);
            sgd_update(probe.bias, velocity.bias, gb, lr, config.momentum, config.weight_decay);
        }
        result.trace.probe.push_back({epoch + 1, "probe", loss_sum / static_cast<double>(spe), lr});
    }
    return result;
}

double probe_loss(const ModelParams& params, const synth::Dataset& data) {
    const Matrix logits = affine(params.probe, encode(params, data.features));
    return bce_sum(logits, label_matrix(data.labels, data.num_classes())) / static_cast<double>(data.num_samples());
}

Matrix probe_scores(const ModelParams& params, const Matrix& features) {
    return sigmoid(affine(params.probe, encode(params, features)));
}

std::map<std::string, double> evaluate(const ModelParams& params, const synth::Dataset& data, double threshold,
                                       const std::vector<std::size_t>& ks) {
    metrics::Predictions p{probe_scores(params, data.features), data.labels, threshold};
    return metrics::evaluate_all(p, ks);
}

nlohmann::json checkpoint_to_json(const ModelParams& params, const TrainConfig& config) {
    nlohmann::json tensors_json = nlohmann::json::object();
    params.for_each_tensor([&](const std::string& name, const Matrix& m) { tensors_json[name] = tensor_json(m); });
    return {{"config", config}, {"seed", config.seed}, {"tensors", tensors_json}};
}

ModelParams checkpoint_from_json(const nlohmann::json& j) {
    try {
        const auto& t = j.at("tensors");
        ModelParams p;
        for (std::size_t l = 0; t.contains("encoder." + std::to_string(l) + ".weight"); ++l) {
            const auto prefix = "encoder." + std::to_string(l);
            p.encoder.push_back({tensor_from_json(t.at(prefix + ".weight")), tensor_from_json(t.at(prefix + ".bias"))});
        }
        for (std::size_t l = 0; t.contains("projection." + std::to_string(l) + ".weight"); ++l) {
            const auto prefix = "projection." + std::to_string(l);
            p.projection.push_back({tensor_from_json(t.at(prefix + ".weight")), tensor_from_json(t.at(prefix + ".bias"))});
        }
        p.probe = {tensor_from_json(t.at("probe.weight")), tensor_from_json(t.at("probe.bias"))};
        if (p.encoder.empty() || p.projection.size() != 2) throw ConfigError("checkpoint is missing layers");
        return p;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("malformed checkpoint: ") + e.what());
    }
}

}  // namespace simdis::train
