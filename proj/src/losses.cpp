#include "proreg/losses.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace proreg {

namespace {

void check_same_length(const ProbVector& a, const ProbVector& b, const char* where) {
    if (a.class_count() != b.class_count()) {
        throw std::invalid_argument(std::string(where) + ": class count mismatch");
    }
}

std::size_t true_class_of(const ProbVector& y, const char* where) {
    if (!is_exact_one_hot(y)) {
        throw std::invalid_argument(std::string(where) + ": label is not one-hot");
    }
    for (std::size_t i = 0; i < y.class_count(); ++i) {
        if (y[i] == 1.0) return i;
    }
    throw std::logic_error(std::string(where) + ": unreachable");
}

}  // namespace

double cross_entropy(const ProbVector& f, const ProbVector& y) {
    check_same_length(f, y, "cross_entropy");
    std::size_t t = true_class_of(y, "cross_entropy");
    return -std::log(std::max(f[t], kProbFloor));
}

double kl_regularizer(const ProbVector& f, const ProbVector& y_zs) {
    check_same_length(f, y_zs, "kl_regularizer");
    double kl = 0.0;
    for (std::size_t i = 0; i < f.class_count(); ++i) {
        if (y_zs[i] <= 0.0) continue;
        kl += y_zs[i] * (std::log(y_zs[i]) - std::log(std::max(f[i], kProbFloor)));
    }
    return std::max(kl, 0.0);  // rounding can leave a tiny negative at f == y_zs
}

LossBreakdown kd_loss(const ProbVector& f, const ProbVector& y, const ProbVector& y_zs,
                      double lambda) {
    if (!(lambda >= 0.0 && lambda <= 1.0)) {
        throw std::invalid_argument("kd_loss: lambda must lie in [0, 1]");
    }
    LossBreakdown out;
    out.mode = LossMode::kd;
    out.ce = cross_entropy(f, y);
    out.kl = kl_regularizer(f, y_zs);
    out.weight_w = lambda;
    out.alpha = 1.0;
    out.total = (1.0 - lambda) * out.ce + lambda * out.kl;
    return out;
}

double proreg_weight(const ProbVector& f, const ProbVector& y, const ProbVector& y_zs) {
    check_same_length(f, y, "proreg_weight");
    check_same_length(f, y_zs, "proreg_weight");
    std::size_t t = true_class_of(y, "proreg_weight");
    double f_t = f[t];
    double zs_t = y_zs[t];
    if (f_t + zs_t < 2.0 * kProbFloor) return 0.5;  // both below the floor: no signal
    return f_t / (f_t + zs_t);
}

LossBreakdown proreg_loss(const ProbVector& f, const ProbVector& y, const ProbVector& y_zs,
                          double alpha) {
    if (!(alpha > 0.0) || !std::isfinite(alpha)) {
        throw std::invalid_argument("proreg_loss: alpha must be positive and finite");
    }
    LossBreakdown out;
    out.mode = LossMode::proreg;
    out.ce = cross_entropy(f, y);
    out.kl = kl_regularizer(f, y_zs);
    out.weight_w = proreg_weight(f, y, y_zs);
    out.alpha = alpha;
    out.total = (1.0 - out.weight_w) * out.ce + alpha * out.weight_w * out.kl;
    return out;
}

LossBreakdown loss_value(const LossSpec& spec, const ProbVector& f, const ProbVector& y,
                         const ProbVector* y_zs) {
    switch (spec.mode) {
        case LossMode::ft: {
            LossBreakdown out;
            out.mode = LossMode::ft;
            out.ce = cross_entropy(f, y);
            out.total = out.ce;
            return out;
        }
        case LossMode::kd:
            if (y_zs == nullptr) throw std::invalid_argument("loss_value: kd needs y_zs");
            return kd_loss(f, y, *y_zs, spec.lambda);
        case LossMode::proreg:
            if (y_zs == nullptr) throw std::invalid_argument("loss_value: proreg needs y_zs");
            return proreg_loss(f, y, *y_zs, spec.alpha);
    }
    throw std::logic_error("loss_value: unknown mode");
}

LogitGradient grad_ce_logits(const ProbVector& f, const ProbVector& y) {
    check_same_length(f, y, "grad_ce_logits");
    true_class_of(y, "grad_ce_logits");
    LogitGradient g;
    g.values.reserve(f.class_count());
    for (std::size_t i = 0; i < f.class_count(); ++i) g.values.push_back(f[i] - y[i]);
    return g;
}

LogitGradient grad_supplementary_logits(const ProbVector& y, const ProbVector& y_zs) {
    check_same_length(y, y_zs, "grad_supplementary_logits");
    true_class_of(y, "grad_supplementary_logits");
    LogitGradient g;
    g.values.reserve(y.class_count());
    for (std::size_t i = 0; i < y.class_count(); ++i) g.values.push_back(y[i] - y_zs[i]);
    return g;
}

LogitGradient grad_total_logits(const LossSpec& spec, const ProbVector& f, const ProbVector& y,
                                const ProbVector* y_zs) {
    switch (spec.mode) {
        case LossMode::ft:
            return grad_ce_logits(f, y);
        case LossMode::kd: {
            if (y_zs == nullptr) throw std::invalid_argument("grad_total_logits: kd needs y_zs");
            if (!(spec.lambda >= 0.0 && spec.lambda <= 1.0)) {
                throw std::invalid_argument("grad_total_logits: lambda must lie in [0, 1]");
            }
            check_same_length(f, y, "grad_total_logits");
            check_same_length(f, *y_zs, "grad_total_logits");
            true_class_of(y, "grad_total_logits");
            LogitGradient g;
            g.values.reserve(f.class_count());
            for (std::size_t i = 0; i < f.class_count(); ++i) {
                g.values.push_back((1.0 - spec.lambda) * (f[i] - y[i]) +
                                   spec.lambda * (f[i] - (*y_zs)[i]));
            }
            return g;
        }
        case LossMode::proreg: {
            if (y_zs == nullptr) throw std::invalid_argument("grad_total_logits: proreg needs y_zs");
            if (!(spec.alpha > 0.0) || !std::isfinite(spec.alpha)) {
                throw std::invalid_argument("grad_total_logits: alpha must be positive and finite");
            }
            double w = proreg_weight(f, y, *y_zs);  // per-step constant, not differentiated
            LogitGradient g;
            g.values.reserve(f.class_count());
            for (std::size_t i = 0; i < f.class_count(); ++i) {
                g.values.push_back((1.0 - w) * (f[i] - y[i]) +
                                   spec.alpha * w * (f[i] - (*y_zs)[i]));
            }
            return g;
        }
    }
    throw std::logic_error("grad_total_logits: unknown mode");
}

double finite_difference_check(const std::function<double(const LogitVector&)>& loss,
                               const LogitGradient& analytic, const LogitVector& at, double step) {
    if (!(step > 0.0)) throw std::invalid_argument("finite_difference_check: step must be positive");
    if (analytic.class_count() != at.class_count()) {
        throw std::invalid_argument("finite_difference_check: gradient length mismatch");
    }
    double worst = 0.0;
    for (std::size_t i = 0; i < at.class_count(); ++i) {
        LogitVector plus = at;
        LogitVector minus = at;
        plus.values[i] += step;
        minus.values[i] -= step;
        double up = loss(plus);
        double down = loss(minus);
        if (!std::isfinite(up) || !std::isfinite(down)) {
            throw std::runtime_error("finite_difference_check: non-finite loss evaluation");
        }
        double central = (up - down) / (2.0 * step);
        worst = std::max(worst, std::abs(central - analytic.values[i]));
    }
    return worst;
}

}  // namespace proreg
