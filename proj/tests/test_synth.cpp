#include <doctest.h>

#include <cmath>
#include <sstream>

#include "simdis/errors.hpp"
#include "simdis/synth.hpp"

using namespace simdis;
using synth::SynthSpec;

namespace {

SynthSpec small_spec(std::uint64_t seed = 3) {
    SynthSpec s;
    s.num_classes = 8;
    s.num_samples = 300;
    s.feature_dim = 6;
    s.avg_labels = 2.5;
    s.seed = seed;
    return s;
}

}  // namespace

TEST_CASE("generation is a function of the seed") {
    const auto a = synth::generate(small_spec());
    const auto b = synth::generate(small_spec());
    CHECK(a.features == b.features);
    CHECK(a.labels == b.labels);
    CHECK(a.class_prototypes == b.class_prototypes);
    const auto c = synth::generate(small_spec(4));
    CHECK(a.features != c.features);
}

TEST_CASE("features are the prototype mean plus the recorded noise") {
    const auto d = synth::generate(small_spec());
    CHECK(d.num_samples() == 300);
    CHECK(d.num_classes() == 8);
    for (Eigen::Index k = 0; k < d.class_prototypes.rows(); ++k) {
        CHECK(d.class_prototypes.row(k).norm() == doctest::Approx(1.0).epsilon(1e-12));
    }
    for (std::size_t i = 0; i < d.num_samples(); ++i) {
        Eigen::RowVectorXd mean = Eigen::RowVectorXd::Zero(d.features.cols());
        for (auto l : d.labels[i].members()) mean += d.class_prototypes.row(static_cast<Eigen::Index>(l));
        mean /= static_cast<double>(d.labels[i].size());
        const auto row = static_cast<Eigen::Index>(i);
        CHECK((d.features.row(row) - mean - d.noise.row(row)).cwiseAbs().maxCoeff() < 1e-12);
    }
}

TEST_CASE("average label count one gives single-label data") {
    auto s = small_spec();
    s.avg_labels = 1.0;
    const auto d = synth::generate(s);
    for (const auto& l : d.labels) CHECK(l.size() == 1);
}

TEST_CASE("mean cardinality tracks the target") {
    SynthSpec s;
    s.num_classes = 20;
    s.num_samples = 20000;
    s.avg_labels = 3.0;
    s.feature_dim = 2;
    const auto d = synth::generate(s);
    double total = 0;
    for (const auto& l : d.labels) total += static_cast<double>(l.size());
    CHECK(std::abs(total / 20000.0 - 3.0) < 0.05);
}

TEST_CASE("class frequencies follow the power law") {
    const auto w = synth::class_weights(10, 1.0);
    double sum = 0;
    for (double x : w) sum += x;
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-14));
    for (std::size_t k = 1; k < w.size(); ++k) CHECK(w[0] / w[k] == doctest::Approx(k + 1.0).epsilon(1e-12));

    // Single-label draws are categorical with these weights: Pearson chi-square
    // with 9 degrees of freedom against the 0.1% critical value.
    SynthSpec s;
    s.num_classes = 10;
    s.num_samples = 20000;
    s.avg_labels = 1.0;
    s.tail_exponent = 1.0;
    s.feature_dim = 2;
    const auto d = synth::generate(s);
    std::vector<double> counts(10, 0.0);
    for (const auto& l : d.labels) counts[l.members()[0]] += 1;
    double chi2 = 0;
    for (std::size_t k = 0; k < 10; ++k) {
        const double expected = w[k] * 20000.0;
        chi2 += (counts[k] - expected) * (counts[k] - expected) / expected;
    }
    CHECK(chi2 < 27.88);
    CHECK(counts[0] > counts[9]);
}

TEST_CASE("augmented views scatter around the row") {
    Vector row(4);
    row << 0.5, -1.0, 2.0, 0.0;
    const double sigma = 0.3;
    const int draws = 20000;
    Vector mean = Vector::Zero(4);
    double sq = 0;
    for (int k = 0; k < draws; ++k) {
        const auto [a, b] = synth::augment_pair(row, sigma, static_cast<std::uint64_t>(k));
        mean += (a - row) + (b - row);
        sq += (a - row).squaredNorm() + (b - row).squaredNorm();
    }
    mean /= 2.0 * draws;
    const double var = sq / (2.0 * draws * 4);
    // Standard error of the mean is sigma / sqrt(40000) = 0.0015.
    CHECK(mean.cwiseAbs().maxCoeff() < 0.0075);
    CHECK(var == doctest::Approx(sigma * sigma).epsilon(0.03));

    const auto [a1, b1] = synth::augment_pair(row, sigma, 9);
    const auto [a2, b2] = synth::augment_pair(row, sigma, 9);
    CHECK(a1 == a2);
    CHECK(b1 == b2);
    CHECK(a1 != b1);
    const auto [z1, z2] = synth::augment_pair(row, 0.0, 9);
    CHECK(z1 == row);
    CHECK(z2 == row);
}

TEST_CASE("JSON Lines round trip") {
    const auto d = synth::generate(small_spec());
    std::stringstream ss;
    synth::write_jsonl(ss, d);
    const auto back = synth::read_jsonl(ss, 8);
    CHECK(back.features == d.features);
    CHECK(back.labels == d.labels);

    std::stringstream bad("{\"features\": [1, 2], \"labels\": [0]}\n{\"features\": [1], \"labels\": [1]}\n");
    try {
        synth::read_jsonl(bad);
        FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
        CHECK(std::string(e.what()).find("line 2") != std::string::npos);
    }
    std::stringstream empty_labels("{\"features\": [1], \"labels\": []}\n{\"features\": [1], \"labels\": [0]}\n");
    CHECK_THROWS_AS(synth::read_jsonl(empty_labels), ConfigError);
}

TEST_CASE("slices and invalid specs") {
    const auto d = synth::generate(small_spec());
    const auto s = d.slice(10, 20);
    CHECK(s.num_samples() == 10);
    CHECK(s.features.row(0) == d.features.row(10));
    CHECK(s.labels[9] == d.labels[19]);
    CHECK_THROWS_AS(d.slice(5, 400), ConfigError);

    auto bad = small_spec();
    bad.avg_labels = 9.0;
    CHECK_THROWS_AS(synth::generate(bad), ConfigError);
    bad = small_spec();
    bad.noise_sigma = -0.1;
    CHECK_THROWS_AS(synth::generate(bad), ConfigError);
    bad = small_spec();
    bad.num_classes = 0;
    CHECK_THROWS_AS(synth::generate(bad), ConfigError);
}
