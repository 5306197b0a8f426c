#pragma once

#include <array>

#include "simdis/batch.hpp"
#include "simdis/label_set.hpp"

namespace simdis::fixtures {

/// Anchor {0,1,2} and one sample per relation R1..R5 over a universe of 6 labels.
struct RelationFixture {
    LabelSet anchor{6, {0, 1, 2}};
    std::array<LabelSet, 5> samples{
        LabelSet{6, {3, 4, 5}},        // R1 disjoint
        LabelSet{6, {0, 1, 2}},        // R2 equal
        LabelSet{6, {0, 3, 4}},        // R3 partial overlap
        LabelSet{6, {0, 1}},           // R4 anchor superset
        LabelSet{6, {0, 1, 2, 3, 4}},  // R5 anchor subset
    };
};

/// The fixture as a 6-row batch (anchor first) with orthonormal one-hot rows.
inline ContrastiveBatch relation_fixture_batch(double temperature = 1.0) {
    RelationFixture f;
    ContrastiveBatch b;
    b.temperature = temperature;
    b.embeddings = Matrix::Identity(6, 6);
    b.labels.push_back(f.anchor);
    for (const auto& s : f.samples) b.labels.push_back(s);
    return b;
}

}  // namespace simdis::fixtures
