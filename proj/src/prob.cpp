#include "proreg/prob.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace proreg {

namespace {

void check_finite(const std::vector<double>& values, const char* where) {
    for (double v : values) {
        if (!std::isfinite(v)) {
            throw std::invalid_argument(std::string(where) + ": non-finite entry");
        }
    }
}

void floor_renorm_floor(std::vector<double>& p) {
    for (double& v : p) v = std::max(v, kProbFloor);
    double sum = 0.0;
    for (double v : p) sum += v;
    for (double& v : p) v /= sum;
    for (double& v : p) v = std::max(v, kProbFloor);
}

}  // namespace

ProbVector ProbVector::one_hot(std::size_t true_class, std::size_t class_count) {
    if (class_count < 2) throw std::invalid_argument("one_hot: need at least two classes");
    if (true_class >= class_count) throw std::invalid_argument("one_hot: class index out of range");
    ProbVector v;
    v.m_probs.assign(class_count, 0.0);
    v.m_probs[true_class] = 1.0;
    v.m_one_hot = true;
    v.m_true_class = true_class;
    return v;
}

ProbVector ProbVector::from_probabilities(std::vector<double> probs) {
    if (probs.empty()) throw std::invalid_argument("from_probabilities: empty vector");
    check_finite(probs, "from_probabilities");
    double sum = 0.0;
    for (double v : probs) sum += v;
    if (std::abs(sum - 1.0) > 1e-9) {
        throw std::invalid_argument("from_probabilities: entries sum to " + std::to_string(sum) +
                                    ", not 1");
    }
    for (double& v : probs) v = std::max(v, kProbFloor);
    ProbVector out;
    out.m_probs = std::move(probs);
    return out;
}

bool is_exact_one_hot(const ProbVector& v) {
    std::size_t ones = 0;
    for (std::size_t i = 0; i < v.class_count(); ++i) {
        if (v[i] == 1.0) {
            ++ones;
        } else if (v[i] != 0.0) {
            return false;
        }
    }
    return ones == 1;
}

double l2_norm(const std::vector<double>& values) {
    double sum = 0.0;
    for (double v : values) sum += v * v;
    return std::sqrt(sum);
}

double dot(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size()) throw std::invalid_argument("dot: dimension mismatch");
    double sum = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) sum += a[i] * b[i];
    return sum;
}

Embedding normalized(const Embedding& e) {
    check_finite(e.values, "normalized");
    double norm = l2_norm(e.values);
    if (!(norm > 0.0) || !std::isfinite(norm)) {
        throw std::invalid_argument("normalized: zero or non-finite norm");
    }
    Embedding out;
    out.values.reserve(e.values.size());
    for (double v : e.values) out.values.push_back(v / norm);
    out.unit_norm = true;
    return out;
}

ProbVector softmax(const LogitVector& logits, double temperature) {
    if (logits.class_count() < 2) throw std::invalid_argument("softmax: need at least two classes");
    check_finite(logits.values, "softmax");
    if (!(temperature > 0.0) || !std::isfinite(temperature)) {
        throw std::invalid_argument("softmax: temperature must be positive and finite");
    }
    double max_logit = *std::max_element(logits.values.begin(), logits.values.end());
    std::vector<double> p(logits.class_count());
    double sum = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        p[i] = std::exp((logits.values[i] - max_logit) / temperature);
        sum += p[i];
    }
    for (double& v : p) v /= sum;
    floor_renorm_floor(p);
    return ProbVector::from_probabilities(std::move(p));
}

LogitVector cosine_scores(const Embedding& x, const std::vector<Embedding>& class_embeddings) {
    if (class_embeddings.size() < 2) {
        throw std::invalid_argument("cosine_scores: need at least two class embeddings");
    }
    check_finite(x.values, "cosine_scores");
    double x_norm = l2_norm(x.values);
    if (!(x_norm > 0.0) || !std::isfinite(x_norm)) {
        throw std::invalid_argument("cosine_scores: input has zero or non-finite norm");
    }
    LogitVector scores;
    scores.values.reserve(class_embeddings.size());
    for (const Embedding& e : class_embeddings) {
        if (e.dim() != x.dim()) {
            throw std::invalid_argument("cosine_scores: embedding dimension mismatch");
        }
        check_finite(e.values, "cosine_scores");
        double e_norm = l2_norm(e.values);
        if (!(e_norm > 0.0) || !std::isfinite(e_norm)) {
            throw std::invalid_argument("cosine_scores: class embedding has zero or non-finite norm");
        }
        // Vectors flagged unit_norm divide by exactly 1 so the score equals the
        // raw dot product bit for bit; recomputing the norm would perturb the
        // last bit and break the head-initialization identity.
        double denom = (x.unit_norm && e.unit_norm) ? 1.0 : x_norm * e_norm;
        double cosine = dot(x.values, e.values) / denom;
        scores.values.push_back(std::clamp(cosine, -1.0, 1.0));
    }
    return scores;
}

ProbVector clamp_to_simplex(const std::vector<double>& raw) {
    if (raw.empty()) throw std::invalid_argument("clamp_to_simplex: empty vector");
    check_finite(raw, "clamp_to_simplex");
    double sum = 0.0;
    for (double v : raw) {
        if (v < 0.0) throw std::invalid_argument("clamp_to_simplex: negative entry");
        sum += v;
    }
    if (!(sum > 0.0)) throw std::invalid_argument("clamp_to_simplex: all entries are zero");
    std::vector<double> p = raw;
    for (double& v : p) v /= sum;
    floor_renorm_floor(p);
    return ProbVector::from_probabilities(std::move(p));
}

}  // namespace proreg
