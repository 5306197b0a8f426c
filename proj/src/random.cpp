#include "simdis/random.hpp"

#include <algorithm>
#include <numeric>
#include <vector>

#include "simdis/errors.hpp"

namespace simdis {

std::uint64_t mix_seed(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index) { return mix_seed(mix_seed(seed) ^ index); }

LabelSet random_label_set(Rng& rng, std::size_t universe, std::size_t max_card) {
    if (universe == 0 || max_card == 0) throw ConfigError("random label set needs a nonempty universe");
    max_card = std::min(max_card, universe);
    std::uniform_int_distribution<std::size_t> card_dist(1, max_card);
    const std::size_t card = card_dist(rng);
    // Partial Fisher-Yates: the first `card` entries are a uniform sample without replacement.
    std::vector<std::size_t> pool(universe);
    std::iota(pool.begin(), pool.end(), std::size_t{0});
    for (std::size_t k = 0; k < card; ++k) {
        std::uniform_int_distribution<std::size_t> pick(k, universe - 1);
        std::swap(pool[k], pool[pick(rng)]);
    }
    return LabelSet(universe, std::span<const std::size_t>(pool.data(), card));
}

LabelSet random_label_set(Rng& rng, std::size_t universe) { return random_label_set(rng, universe, universe); }

ContrastiveBatch random_batch(Rng& rng, const RandomBatchOptions& o) {
    ContrastiveBatch batch;
    batch.temperature = o.temperature;
    std::normal_distribution<double> normal(0.0, 1.0);
    batch.embeddings.resize(static_cast<Eigen::Index>(o.samples), static_cast<Eigen::Index>(o.dim));
    for (Eigen::Index r = 0; r < batch.embeddings.rows(); ++r) {
        for (Eigen::Index c = 0; c < batch.embeddings.cols(); ++c) batch.embeddings(r, c) = normal(rng);
    }
    if (o.unit_rows) normalize_rows(batch.embeddings);
    batch.embeddings *= o.scale;
    for (std::size_t i = 0; i < o.samples; ++i) {
        if (o.paired_views && i % 2 == 1) {
            batch.labels.push_back(batch.labels.back());
        } else {
            batch.labels.push_back(random_label_set(rng, o.universe, o.max_labels));
        }
    }
    return batch;
}

}  // namespace simdis
