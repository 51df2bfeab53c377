#include "wganc/curriculum.hpp"

#include <cmath>

#include "wganc/error.hpp"

namespace wganc::curriculum {

namespace {
constexpr double kSumTol = 1e-9;
constexpr double kCompareTol = 1e-12;
}  // namespace

Lambda Lambda::one_hot(size_t d, size_t i) {
    if (d < 1 || i >= d) throw ValueError("lambda: one_hot index out of range");
    Lambda l;
    l.w.assign(d, 0.0);
    l.w[i] = 1.0;
    return l;
}

bool Lambda::is_one_hot(size_t* index) const {
    for (size_t i = 0; i < w.size(); ++i) {
        if (w[i] == 1.0) {
            bool rest_zero = true;
            for (size_t j = 0; j < w.size(); ++j) {
                if (j != i && w[j] != 0.0) rest_zero = false;
            }
            if (rest_zero) {
                if (index) *index = i;
                return true;
            }
        }
    }
    return false;
}

std::string LambdaError::message() const {
    if (kind == LambdaErrorKind::negative_entry) {
        return "lambda: negative entry at index " + std::to_string(index);
    }
    return "lambda: weights sum to " + std::to_string(sum) + ", expected 1";
}

std::optional<LambdaError> validate(const Lambda& l) {
    if (l.dim() < 1) return LambdaError{LambdaErrorKind::sum_not_one, 0, 0.0};
    double sum = 0.0;
    for (size_t i = 0; i < l.dim(); ++i) {
        if (l.w[i] < 0.0) return LambdaError{LambdaErrorKind::negative_entry, i, 0.0};
        sum += l.w[i];
    }
    if (std::abs(sum - 1.0) > kSumTol) return LambdaError{LambdaErrorKind::sum_not_one, 0, sum};
    return std::nullopt;
}

void check_valid(const Lambda& l) {
    if (auto err = validate(l)) throw ValueError(err->message());
}

OrderResult compare(const Lambda& a, const Lambda& b) {
    if (a.dim() != b.dim()) {
        throw ValueError("compare: lambda dimensions " + std::to_string(a.dim()) + " and " +
                         std::to_string(b.dim()) + " differ");
    }
    bool a_ge = true, b_ge = true, eq = true;
    double sa = 0.0, sb = 0.0;
    for (size_t k = a.dim(); k-- > 0;) {
        sa += a.w[k];
        sb += b.w[k];
        if (sa < sb - kCompareTol) a_ge = false;
        if (sb < sa - kCompareTol) b_ge = false;
        if (std::abs(a.w[k] - b.w[k]) > kCompareTol) eq = false;
    }
    if (eq) return OrderResult::equal;
    if (a_ge && b_ge) return OrderResult::equal;  // sums equal within tolerance everywhere
    if (a_ge) return OrderResult::dominates;
    if (b_ge) return OrderResult::dominated_by;
    return OrderResult::incomparable;
}

Schedule::Schedule(std::vector<Stage> stages) : stages_(std::move(stages)) {
    if (stages_.empty()) throw ValueError("schedule: no stages");
    for (size_t i = 0; i < stages_.size(); ++i) {
        check_valid(stages_[i].lambda);
        if (stages_[i].iters < 1) throw ValueError("schedule: stage durations must be >= 1");
        if (i > 0) {
            OrderResult r = compare(stages_[i].lambda, stages_[i - 1].lambda);
            if (r != OrderResult::dominates && r != OrderResult::equal) {
                throw ValueError("schedule: stage " + std::to_string(i) +
                                 " does not dominate its predecessor");
            }
        }
        total_ += stages_[i].iters;
        cumulative_.push_back(total_);
    }
}

size_t Schedule::stage_at(size_t iter) const {
    for (size_t i = 0; i < cumulative_.size(); ++i) {
        if (iter < cumulative_[i]) return i;
    }
    return stages_.size() - 1;
}

Schedule one_hot_schedule(size_t d, size_t iters_per_stage) {
    if (d < 1) throw ValueError("one_hot_schedule: d must be >= 1");
    if (iters_per_stage < 1) throw ValueError("one_hot_schedule: iterations per stage must be >= 1");
    std::vector<Stage> stages;
    stages.reserve(d);
    for (size_t i = 0; i < d; ++i) stages.push_back({Lambda::one_hot(d, i), iters_per_stage});
    return Schedule(std::move(stages));
}

Schedule blended_schedule(size_t d, size_t stage_len, size_t ramp_len) {
    if (d < 1) throw ValueError("blended_schedule: d must be >= 1");
    if (stage_len < 1) throw ValueError("blended_schedule: stage length must be >= 1");
    std::vector<Stage> stages;
    stages.push_back({Lambda::one_hot(d, 0), stage_len});
    for (size_t i = 0; i + 1 < d; ++i) {
        for (size_t j = 1; j <= ramp_len; ++j) {
            const double t = static_cast<double>(j) / static_cast<double>(ramp_len + 1);
            Lambda l;
            l.w.assign(d, 0.0);
            l.w[i] = 1.0 - t;
            l.w[i + 1] = t;
            stages.push_back({std::move(l), 1});
        }
        stages.push_back({Lambda::one_hot(d, i + 1), stage_len});
    }
    // Schedule's constructor re-checks monotonicity; a violation here would be
    // a construction bug, not user error.
    return Schedule(std::move(stages));
}

CompositeResult composite_critic(ad::Graph& g, const families::CriticBank& bank, const Lambda& lambda,
                                 ad::NodeId x, bool trainable) {
    check_valid(lambda);
    if (bank.size() != lambda.dim()) {
        throw ValueError("composite_critic: bank size " + std::to_string(bank.size()) +
                         " does not match lambda dimension " + std::to_string(lambda.dim()));
    }
    CompositeResult res;
    for (size_t i = 0; i < bank.size(); ++i) {
        if (lambda.w[i] == 0.0) continue;  // skipped entirely: no forward, no gradient
        res.active.push_back(i);
        res.bound.push_back(nn::bind_params(g, bank.critics[i].params, trainable));
    }
    res.out = composite_forward(g, bank, lambda, res.active, res.bound, x);
    return res;
}

ad::NodeId composite_forward(ad::Graph& g, const families::CriticBank& bank, const Lambda& lambda,
                             const std::vector<size_t>& active,
                             const std::vector<nn::BoundMlp>& bound, ad::NodeId x) {
    ad::NodeId out = ad::kNoNode;
    for (size_t a = 0; a < active.size(); ++a) {
        const size_t i = active[a];
        ad::NodeId xi = families::apply_transform(g, bank, i, x);
        ad::NodeId fi = nn::mlp_forward(g, bound[a], bank.critics[i].params.spec, xi);
        ad::NodeId term = lambda.w[i] == 1.0 ? fi : g.scalar_mul(fi, lambda.w[i]);
        out = out == ad::kNoNode ? term : g.add(out, term);
    }
    return out;
}

}  // namespace wganc::curriculum
