#pragma once

#include <optional>
#include <string>
#include <vector>

#include "wganc/families.hpp"
#include "wganc/graph.hpp"
#include "wganc/nn.hpp"

namespace wganc::curriculum {

// Nonnegative weights over d critics summing to 1; the curriculum state.
struct Lambda {
    std::vector<double> w;

    size_t dim() const { return w.size(); }
    static Lambda one_hot(size_t d, size_t i);
    bool is_one_hot(size_t* index = nullptr) const;
};

enum class OrderResult { dominates, dominated_by, equal, incomparable };

enum class LambdaErrorKind { negative_entry, sum_not_one };

struct LambdaError {
    LambdaErrorKind kind;
    size_t index = 0;  // offending entry for negative_entry
    double sum = 0.0;  // reported for sum_not_one
    std::string message() const;
};

// ok iff entries >= 0 and the sum is 1 within 1e-9.
std::optional<LambdaError> validate(const Lambda& l);
void check_valid(const Lambda& l);  // throws ValueError on failure

// Domination via the backwards-cumulative-sum sufficient condition:
// a dominates b iff sum_{i=k..d} a_i >= sum_{i=k..d} b_i for every k
// (within 1e-12). This is sufficient, not proven necessary, for the
// set-containment order it certifies.
OrderResult compare(const Lambda& a, const Lambda& b);

struct Stage {
    Lambda lambda;
    size_t iters = 1;
};

// Monotone sequence of (lambda, duration) stages. Construction validates
// every lambda and checks each successive stage dominates-or-equals its
// predecessor.
class Schedule {
public:
    explicit Schedule(std::vector<Stage> stages);

    const std::vector<Stage>& stages() const { return stages_; }
    size_t total_iters() const { return total_; }
    // Stage index active at outer iteration `iter`; the last stage holds
    // beyond the schedule's total duration.
    size_t stage_at(size_t iter) const;

private:
    std::vector<Stage> stages_;
    std::vector<size_t> cumulative_;
    size_t total_ = 0;
};

Schedule one_hot_schedule(size_t d, size_t iters_per_stage);

// One-hot stages of stage_len iterations joined by ramps of ramp_len
// single-iteration stages interpolating linearly between adjacent one-hots.
Schedule blended_schedule(size_t d, size_t stage_len, size_t ramp_len);

// Composite critic f(x) = sum_i lambda_i f_i(x); critics with lambda_i == 0
// are skipped entirely (no forward nodes, no gradients).
struct CompositeResult {
    ad::NodeId out = ad::kNoNode;            // [batch, 1]
    std::vector<size_t> active;              // critic indices with lambda_i != 0
    std::vector<nn::BoundMlp> bound;         // aligned with `active`
};

CompositeResult composite_critic(ad::Graph& g, const families::CriticBank& bank, const Lambda& lambda,
                                 ad::NodeId x, bool trainable);

// Forward through an already-bound active subset, so several composite
// evaluations in one graph share the same parameter leaves.
ad::NodeId composite_forward(ad::Graph& g, const families::CriticBank& bank, const Lambda& lambda,
                             const std::vector<size_t>& active,
                             const std::vector<nn::BoundMlp>& bound, ad::NodeId x);

}  // namespace wganc::curriculum
