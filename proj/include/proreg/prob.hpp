#pragma once

#include <cstddef>
#include <vector>

namespace proreg {

// Probability floor applied before any logarithm or ratio. One-hot label
// vectors are exempt and keep exact 0/1 entries.
inline constexpr double kProbFloor = 1e-7;

// Softmax temperature used when a caller does not pass one. Cosine scores
// live in [-1, 1]; dividing by 0.01 spreads them across roughly [-100, 100].
inline constexpr double kDefaultTemperature = 0.01;

// Unbounded per-class scores; values.size() is the class count.
struct LogitVector {
    std::vector<double> values;
    std::size_t class_count() const { return values.size(); }
};

// A point on the probability simplex. Entries sum to 1 within 1e-9 and sit at
// or above kProbFloor, except for vectors built by one_hot(), which keep exact
// 0/1 entries so cross-entropy reads an exact label.
class ProbVector {
public:
    static ProbVector one_hot(std::size_t true_class, std::size_t class_count);

    // Accepts probabilities that are already on the simplex (sum within 1e-9
    // of 1). Entries are floor-guarded in place but never renormalized, so an
    // identity combination stays bit-identical to its input.
    static ProbVector from_probabilities(std::vector<double> probs);

    const std::vector<double>& probs() const { return m_probs; }
    double operator[](std::size_t i) const { return m_probs[i]; }
    std::size_t class_count() const { return m_probs.size(); }

    bool is_one_hot() const { return m_one_hot; }
    // Index of the 1 entry; meaningful only when is_one_hot().
    std::size_t true_class() const { return m_true_class; }

private:
    ProbVector() = default;
    std::vector<double> m_probs;
    bool m_one_hot = false;
    std::size_t m_true_class = 0;
};

// True when the entries are exactly one 1.0 and otherwise exact 0.0,
// regardless of how the vector was built.
bool is_exact_one_hot(const ProbVector& v);

// Feature or class-direction vector.
struct Embedding {
    std::vector<double> values;
    bool unit_norm = false;
    std::size_t dim() const { return values.size(); }
};

double l2_norm(const std::vector<double>& values);
double dot(const std::vector<double>& a, const std::vector<double>& b);

// L2-normalized copy. Throws std::invalid_argument on a zero or non-finite
// norm.
Embedding normalized(const Embedding& e);

// Temperature-scaled softmax with max-subtraction. The output passes through
// the simplex clamp, so every entry is at least kProbFloor.
ProbVector softmax(const LogitVector& logits, double temperature = kDefaultTemperature);

// Cosine similarity of x against each class embedding; both sides are
// normalized defensively. Entries land in [-1, 1].
LogitVector cosine_scores(const Embedding& x, const std::vector<Embedding>& class_embeddings);

// Projects a raw nonnegative vector onto the floored simplex: floor at
// kProbFloor, renormalize, floor once more so rounding cannot leave an entry
// below the floor.
ProbVector clamp_to_simplex(const std::vector<double>& raw);

}  // namespace proreg
