#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>

#include "simdis/errors.hpp"
#include "simdis/random.hpp"
#include "simdis/synth.hpp"
#include "simdis/trainer.hpp"

using namespace simdis;
using namespace simdis::train;

namespace {

synth::Dataset small_data(std::uint64_t seed = 1, std::size_t samples = 96) {
    synth::SynthSpec s;
    s.num_classes = 6;
    s.num_samples = samples;
    s.feature_dim = 8;
    s.avg_labels = 1.8;
    s.seed = seed;
    return synth::generate(s);
}

TrainConfig small_config() {
    TrainConfig c;
    c.encoder_widths = {16};
    c.projection_dim = 8;
    c.batch_pairs = 16;
    c.epochs_contrastive = 3;
    c.epochs_probe = 3;
    c.temperature = 0.5;
    return c;
}

}  // namespace

TEST_CASE("learning schedule closed form") {
    // 100 steps, 10 warmup steps.
    CHECK(scheduled_rate(1.0, 0, 100, 0.1) == doctest::Approx(0.1));
    CHECK(scheduled_rate(1.0, 4, 100, 0.1) == doctest::Approx(0.5));
    CHECK(scheduled_rate(1.0, 9, 100, 0.1) == doctest::Approx(1.0));
    CHECK(scheduled_rate(1.0, 10, 100, 0.1) == doctest::Approx(1.0));
    CHECK(scheduled_rate(1.0, 55, 100, 0.1) == doctest::Approx(0.5));
    CHECK(scheduled_rate(2.0, 40, 100, 0.1) == doctest::Approx(1.0 + std::cos(std::numbers::pi / 3.0)));
    CHECK(scheduled_rate(1.0, 100, 100, 0.1) == doctest::Approx(0.0));
    // Without warmup the first step runs at the peak rate.
    CHECK(scheduled_rate(0.3, 0, 50, 0.0) == doctest::Approx(0.3));
    // A tiny positive fraction still gets one warmup step.
    CHECK(scheduled_rate(1.0, 0, 10, 0.01) == doctest::Approx(1.0));
    CHECK(scheduled_rate(1.0, 1, 10, 0.01) == doctest::Approx(1.0));
}

TEST_CASE("contrastive step gradient matches finite differences") {
    Rng rng(4);
    auto config = small_config();
    config.encoder_widths = {5};
    config.projection_dim = 3;
    const auto data = small_data();
    // Zero initial biases can leave a projected row at exactly 0, where row
    // normalization is not differentiable; jitter every tensor first.
    auto params = init_params(4, 6, config);
    std::normal_distribution<double> g;
    params.for_each_tensor([&](const std::string&, Matrix& m) {
        for (Eigen::Index k = 0; k < m.size(); ++k) m.data()[k] += 0.3 * g(rng);
    });
    Matrix views(8, 4);
    for (Eigen::Index i = 0; i < views.size(); ++i) views.data()[i] = g(rng);
    std::vector<LabelSet> labels;
    for (std::size_t k = 0; k < 4; ++k) {
        const auto l = random_label_set(rng, 6, 3);
        labels.push_back(l);
        labels.push_back(l);
    }

    for (const auto& strategy : all_strategies()) {
        config.strategy = strategy;
        const auto step = contrastive_step(params, views, labels, config);
        double worst = 0.0, scale = 0.0;
        ModelParams probe = params;
        ModelParams numeric = step.grads;
        std::vector<std::pair<Matrix*, Matrix*>> pairs;
        {
            std::vector<Matrix*> p, n;
            probe.for_each_tensor([&](const std::string&, Matrix& m) { p.push_back(&m); });
            numeric.for_each_tensor([&](const std::string&, Matrix& m) { n.push_back(&m); });
            for (std::size_t k = 0; k < p.size(); ++k) pairs.emplace_back(p[k], n[k]);
        }
        const double h = 1e-6;
        for (auto [w, num] : pairs) {
            for (Eigen::Index k = 0; k < w->size(); ++k) {
                const double orig = w->data()[k];
                w->data()[k] = orig + h;
                const double up = contrastive_step(probe, views, labels, config).loss;
                w->data()[k] = orig - h;
                const double down = contrastive_step(probe, views, labels, config).loss;
                w->data()[k] = orig;
                num->data()[k] = (up - down) / (2 * h);
            }
        }
        std::vector<const Matrix*> a, n;
        step.grads.for_each_tensor([&](const std::string&, const Matrix& m) { a.push_back(&m); });
        numeric.for_each_tensor([&](const std::string&, const Matrix& m) { n.push_back(&m); });
        for (std::size_t k = 0; k < a.size(); ++k) {
            worst = std::max(worst, (*a[k] - *n[k]).cwiseAbs().maxCoeff());
            scale = std::max({scale, a[k]->cwiseAbs().maxCoeff(), n[k]->cwiseAbs().maxCoeff()});
        }
        CAPTURE(strategy.name());
        CHECK(worst / scale < 1e-5);
        CHECK(step.grads.probe.weight.isZero(0.0));
    }
}

TEST_CASE("a zero learning rate leaves parameters at their initial values") {
    auto config = small_config();
    config.learning_rate = 0.0;
    const auto data = small_data();
    const auto r = train_contrastive(data, config);
    CHECK(r.params == init_params(8, 6, config));
    CHECK(r.trace.contrastive.size() == 3);
}

TEST_CASE("training is deterministic in the seed") {
    const auto data = small_data();
    auto config = small_config();
    const auto a = train_contrastive(data, config);
    const auto b = train_contrastive(data, config);
    CHECK(a.params == b.params);
    CHECK(a.trace.to_csv() == b.trace.to_csv());
    config.seed = 1;
    CHECK_FALSE(train_contrastive(data, config).params == a.params);
}

TEST_CASE("inside-log and ANY produce identical parameters") {
    const auto data = small_data();
    auto config = small_config();
    config.strategy = Strategy::any();
    const auto any = train_contrastive(data, config);
    config.strategy = Strategy::simdis(Placement::InsideLog);
    const auto inside = train_contrastive(data, config);
    CHECK(any.params == inside.params);
    CHECK(any.trace.contrastive.back().loss != inside.trace.contrastive.back().loss);
}

TEST_CASE("contrastive loss decreases") {
    for (std::uint64_t seed = 0; seed < 3; ++seed) {
        const auto data = small_data(seed, 256);
        auto config = small_config();
        config.seed = seed;
        config.epochs_contrastive = 15;
        config.learning_rate = 0.05;
        for (auto p : {Placement::InsideLog, Placement::OutsideLog}) {
            config.strategy = Strategy::simdis(p);
            const auto r = train_contrastive(data, config);
            CAPTURE(seed);
            CHECK(r.trace.contrastive.back().loss < r.trace.contrastive.front().loss);
        }
    }
}

TEST_CASE("probe training leaves the encoder frozen") {
    const auto data = small_data();
    auto config = small_config();
    const auto model = train_contrastive(data, config).params;
    const auto probed = train_probe(data, model, config);
    CHECK(probed.params.encoder.size() == model.encoder.size());
    for (std::size_t k = 0; k < model.encoder.size(); ++k) {
        CHECK(probed.params.encoder[k].weight == model.encoder[k].weight);
        CHECK(probed.params.encoder[k].bias == model.encoder[k].bias);
    }
    for (std::size_t k = 0; k < model.projection.size(); ++k) {
        CHECK(probed.params.projection[k].weight == model.projection[k].weight);
    }
    CHECK(probed.params.probe.weight != model.probe.weight);
    CHECK(probed.trace.probe.back().loss < probed.trace.probe.front().loss);

    config.epochs_probe = 0;
    const auto none = train_probe(data, model, config);
    CHECK(none.params == model);
    CHECK(none.trace.probe.empty());
}

TEST_CASE("probe separates well-separated single-label classes") {
    synth::SynthSpec s;
    s.num_classes = 4;
    s.num_samples = 200;
    s.feature_dim = 16;
    s.avg_labels = 1.0;
    s.tail_exponent = 0.0;
    s.noise_sigma = 0.01;
    const auto data = synth::generate(s);
    auto config = small_config();
    config.encoder_widths = {32};
    config.epochs_probe = 200;
    config.probe_learning_rate = 0.5;
    const auto model = init_params(16, 4, config);
    const auto probed = train_probe(data, model, config);
    const auto m = evaluate(probed.params, data, 0.5, {1});
    CHECK(m.at("micro_f1") == 1.0);
    CHECK(m.at("p_at_1") == 1.0);
}

TEST_CASE("configs and checkpoints round-trip") {
    auto config = small_config();
    config.strategy = Strategy::simdis(Placement::OutsideLog, ExponentialDecay{0.5});
    nlohmann::json j = config;
    TrainConfig back;
    j.get_to(back);
    CHECK(nlohmann::json(back) == j);

    CHECK_THROWS_AS(nlohmann::json({{"learning_rte", 0.1}}).get<TrainConfig>(), ConfigError);
    CHECK_THROWS_AS(nlohmann::json({{"batch_pairs", "ten"}}).get<TrainConfig>(), ConfigError);
    CHECK_THROWS_AS(nlohmann::json({{"strategy", "Nope"}}).get<TrainConfig>(), ConfigError);
    auto bad = config;
    bad.batch_pairs = 0;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    bad = config;
    bad.momentum = 1.0;
    CHECK_THROWS_AS(bad.validate(), ConfigError);

    const auto params = init_params(8, 6, config);
    const auto ckpt = checkpoint_to_json(params, config);
    CHECK(checkpoint_from_json(nlohmann::json::parse(ckpt.dump())) == params);
}

TEST_CASE("trace CSV layout") {
    TrainTrace t;
    t.contrastive.push_back({1, "contrastive", 2.5, 0.01});
    t.probe.push_back({1, "probe", 0.7, 0.1});
    const auto csv = t.to_csv();
    CHECK(csv.rfind("epoch,phase,loss,lr\n", 0) == 0);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 3);
}
