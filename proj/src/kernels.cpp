#include "simdis/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace simdis::kernels {

namespace {

double dot(const Matrix& z, std::size_t a, std::size_t b) {
    const auto cols = static_cast<std::size_t>(z.cols());
    const double* ra = z.data() + a * cols;
    const double* rb = z.data() + b * cols;
    double acc = 0.0;
    for (std::size_t k = 0; k < cols; ++k) acc += ra[k] * rb[k];
    return acc;
}

// Fills row `i` of the coefficient matrix g (dL_i/ds_ia) and returns L_i.
// `logits` is scratch of length n.
double anchor_terms(const AnchorPlan& plan, const Matrix& z, double inv_tau, std::size_t i,
                    double* g_row, double* logits) {
    const auto n = static_cast<std::size_t>(z.rows());
    std::fill(g_row, g_row + n, 0.0);
    if (plan.positives.empty()) return 0.0;

    double max_logit = -std::numeric_limits<double>::infinity();
    for (std::size_t a = 0; a < n; ++a) {
        if (a == i) continue;
        logits[a] = dot(z, i, a) * inv_tau;
        max_logit = std::max(max_logit, logits[a]);
    }
    double denom = 0.0;
    for (std::size_t a = 0; a < n; ++a) {
        if (a == i) continue;
        denom += std::exp(logits[a] - max_logit);
    }
    const double lse = max_logit + std::log(denom);

    double coeff_sum = 0.0;
    double loss = plan.offset;
    for (const auto& p : plan.positives) {
        coeff_sum += p.coeff;
        loss += p.coeff * (lse - p.scale * logits[p.index]);
    }
    for (std::size_t a = 0; a < n; ++a) {
        if (a == i) continue;
        g_row[a] = coeff_sum * std::exp(logits[a] - lse);
    }
    for (const auto& p : plan.positives) g_row[p.index] -= p.coeff * p.scale;
    return loss;
}

// grad_k = (sum_a g_ka z_a + sum_i g_ik z_i) * scale / tau, summed over a in index order.
void gradient_row(const Matrix& g, const Matrix& z, double factor, std::size_t k, double* out) {
    const auto n = static_cast<std::size_t>(z.rows());
    const auto cols = static_cast<std::size_t>(z.cols());
    std::fill(out, out + cols, 0.0);
    for (std::size_t a = 0; a < n; ++a) {
        const double w = g(k, a) + g(a, k);
        if (w == 0.0) continue;
        const double* row = z.data() + a * cols;
        for (std::size_t c = 0; c < cols; ++c) out[c] += w * row[c];
    }
    for (std::size_t c = 0; c < cols; ++c) out[c] *= factor;
}

double reduce_total(const std::vector<double>& losses, double scale) {
    double sum = 0.0;
    for (double l : losses) sum += l;
    return scale * sum;
}

}  // namespace

KernelOutput evaluate_serial(const LossPlan& plan, const Matrix& z, double temperature) {
    const auto n = static_cast<std::size_t>(z.rows());
    const double inv_tau = 1.0 / temperature;
    KernelOutput out;
    out.anchor_loss.assign(n, 0.0);
    Matrix g(n, n);
    std::vector<double> logits(n);
    for (std::size_t i = 0; i < n; ++i) {
        out.anchor_loss[i] = anchor_terms(plan.anchors[i], z, inv_tau, i, g.data() + i * n, logits.data());
    }
    out.total = reduce_total(out.anchor_loss, plan.total_scale);
    out.gradient.resize(z.rows(), z.cols());
    const double factor = plan.total_scale * inv_tau;
    for (std::size_t k = 0; k < n; ++k) {
        gradient_row(g, z, factor, k, out.gradient.data() + k * static_cast<std::size_t>(z.cols()));
    }
    return out;
}

KernelOutput evaluate_parallel(const LossPlan& plan, const Matrix& z, double temperature) {
    const auto n = static_cast<std::ptrdiff_t>(z.rows());
    const double inv_tau = 1.0 / temperature;
    KernelOutput out;
    out.anchor_loss.assign(static_cast<std::size_t>(n), 0.0);
    Matrix g(n, n);

#pragma omp parallel
    {
        std::vector<double> logits(static_cast<std::size_t>(n));
#pragma omp for schedule(static)
        for (std::ptrdiff_t i = 0; i < n; ++i) {
            const auto ui = static_cast<std::size_t>(i);
            out.anchor_loss[ui] = anchor_terms(plan.anchors[ui], z, inv_tau, ui,
                                               g.data() + ui * static_cast<std::size_t>(n), logits.data());
        }
    }
    out.total = reduce_total(out.anchor_loss, plan.total_scale);

    out.gradient.resize(z.rows(), z.cols());
    const double factor = plan.total_scale * inv_tau;
    const auto cols = static_cast<std::size_t>(z.cols());
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t k = 0; k < n; ++k) {
        gradient_row(g, z, factor, static_cast<std::size_t>(k), out.gradient.data() + static_cast<std::size_t>(k) * cols);
    }
    return out;
}

}  // namespace simdis::kernels
