#pragma once

#include <vector>

#include "simdis/batch.hpp"

namespace simdis::kernels {

/// One positive of an anchor in log-softmax form.
///
/// The anchor's loss is
///   offset + sum_p coeff_p * (logsumexp_{a != i} s_a - scale_p * s_p),
/// with s_a = z_i . z_a / tau.
struct PositiveTerm {
    std::size_t index = 0;
    double coeff = 0.0;
    double scale = 1.0;
};

struct AnchorPlan {
    std::vector<PositiveTerm> positives;  // empty => anchor skipped
    double offset = 0.0;
};

/// Strategy-independent description of a batch loss: per-anchor terms and a
/// factor applied to the summed total.
struct LossPlan {
    std::vector<AnchorPlan> anchors;
    double total_scale = 1.0;
};

struct KernelOutput {
    std::vector<double> anchor_loss;  // unscaled L_i, 0 for skipped anchors
    double total = 0.0;               // total_scale * sum_i L_i, summed in anchor order
    Matrix gradient;
};

/// Reference implementation: plain loops, one thread.
KernelOutput evaluate_serial(const LossPlan& plan, const Matrix& z, double temperature);

/// OpenMP over anchors for the softmax coefficients and over rows for the
/// gradient. Every reduction runs in the same fixed order as the serial
/// kernel, so the two agree bit for bit at any thread count.
KernelOutput evaluate_parallel(const LossPlan& plan, const Matrix& z, double temperature);

}  // namespace simdis::kernels
