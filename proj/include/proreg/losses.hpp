#pragma once

#include <functional>

#include "proreg/prob.hpp"

namespace proreg {

enum class LossMode { ft, kd, proreg };

inline constexpr double kDefaultProregAlpha = 2.0;

// Objective selector. FT is plain cross-entropy; KD blends cross-entropy and
// the zero-shot KL term with a constant lambda; ProReg blends them with the
// per-sample adaptive weight w = f_t / (f_t + y_zs_t), with alpha scaling the
// KL side globally.
struct LossSpec {
    LossMode mode = LossMode::ft;
    double lambda = 0.0;  // kd only
    double alpha = kDefaultProregAlpha;  // proreg only

    static LossSpec ft() { return {LossMode::ft, 0.0, 1.0}; }
    static LossSpec kd(double lambda) { return {LossMode::kd, lambda, 1.0}; }
    static LossSpec proreg(double alpha) { return {LossMode::proreg, 0.0, alpha}; }
};

// One evaluation of an objective, split into its parts. In every mode the
// identity total == (1 - weight_w) * ce + alpha * weight_w * kl holds: FT has
// weight_w = 0, KD stores lambda in weight_w with alpha = 1.
struct LossBreakdown {
    LossMode mode = LossMode::ft;
    double ce = 0.0;
    double kl = 0.0;
    double weight_w = 0.0;
    double alpha = 1.0;
    double total = 0.0;
};

// Gradient with respect to the logits feeding the softmax. Entries sum to 0.
struct LogitGradient {
    std::vector<double> values;
    std::size_t class_count() const { return values.size(); }
};

// -log f_t for the true class t of the one-hot label y.
double cross_entropy(const ProbVector& f, const ProbVector& y);

// KL(y_zs || f) = sum_i y_zs_i * log(y_zs_i / f_i). Zero teacher entries
// contribute zero; f is floor-guarded inside the log.
double kl_regularizer(const ProbVector& f, const ProbVector& y_zs);

// (1 - lambda) * ce + lambda * kl, lambda in [0, 1].
LossBreakdown kd_loss(const ProbVector& f, const ProbVector& y, const ProbVector& y_zs,
                      double lambda);

// Adaptive trade-off weight w = f_t / (f_t + y_zs_t) for the true class t.
// Falls back to 0.5 when both terms sit below the probability floor. The
// weight is a per-step constant: nothing differentiates through it.
double proreg_weight(const ProbVector& f, const ProbVector& y, const ProbVector& y_zs);

// (1 - w) * ce + alpha * w * kl with the adaptive w above, alpha > 0.
LossBreakdown proreg_loss(const ProbVector& f, const ProbVector& y, const ProbVector& y_zs,
                          double alpha);

// Dispatch on spec.mode. y_zs may be null for FT only.
LossBreakdown loss_value(const LossSpec& spec, const ProbVector& f, const ProbVector& y,
                         const ProbVector* y_zs);

// d ce / d z = f - y for f = softmax(z).
LogitGradient grad_ce_logits(const ProbVector& f, const ProbVector& y);

// d (kl - ce) / d z = y - y_zs: independent of f, so this direction is
// constant across training steps.
LogitGradient grad_supplementary_logits(const ProbVector& y, const ProbVector& y_zs);

// Full objective gradient with respect to the logits:
//   ft      f - y
//   kd      (1 - lambda) (f - y) + lambda (f - y_zs)
//   proreg  (1 - w) (f - y) + alpha w (f - y_zs), w recomputed from f
LogitGradient grad_total_logits(const LossSpec& spec, const ProbVector& f, const ProbVector& y,
                                const ProbVector* y_zs);

// Max over coordinates of |analytic_i - central difference_i| for a scalar
// function of the logits. Throws on non-finite loss evaluations.
double finite_difference_check(const std::function<double(const LogitVector&)>& loss,
                               const LogitGradient& analytic, const LogitVector& at, double step);

}  // namespace proreg
