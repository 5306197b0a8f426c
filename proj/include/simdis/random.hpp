#pragma once

#include <cstdint>
#include <random>

#include "simdis/batch.hpp"
#include "simdis/label_set.hpp"

namespace simdis {

using Rng = std::mt19937_64;

/// splitmix64 finalizer; used to derive independent sub-seeds.
std::uint64_t mix_seed(std::uint64_t x);

/// Seed for trial `index` of a run seeded with `seed`. Independent of
/// evaluation order, so parallel trials reproduce serial ones.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index);

/// Cardinality uniform in [1, universe], then members without replacement.
LabelSet random_label_set(Rng& rng, std::size_t universe);

/// Cardinality uniform in [1, max_card], members without replacement.
LabelSet random_label_set(Rng& rng, std::size_t universe, std::size_t max_card);

struct RandomBatchOptions {
    std::size_t samples = 8;       // 2N
    std::size_t dim = 4;
    std::size_t universe = 5;
    std::size_t max_labels = 3;
    double temperature = 0.5;
    bool unit_rows = true;
    bool paired_views = false;     // labels[2i] == labels[2i+1]
    double scale = 1.0;            // multiplies rows after optional normalization
};

/// Gaussian rows, random label sets. Deterministic in the generator state.
ContrastiveBatch random_batch(Rng& rng, const RandomBatchOptions& options);

}  // namespace simdis
