#pragma once

#include <functional>
#include <vector>

#include "wganc/curriculum.hpp"
#include "wganc/families.hpp"
#include "wganc/nn.hpp"
#include "wganc/rng.hpp"

namespace wganc::trainer {

enum class PenaltyStyle { one_sided, two_sided };
enum class LossMode { wasserstein_gp, vanilla_gan };

struct TrainConfig {
    size_t batch_size = 64;
    size_t n_critic = 5;
    double beta = 10.0;
    PenaltyStyle penalty = PenaltyStyle::one_sided;
    LossMode loss = LossMode::wasserstein_gp;
    size_t z_dim = 32;
    size_t iterations = 0;
    uint64_t data_seed = 1;
    uint64_t init_seed = 2;
    uint64_t train_seed = 3;
    nn::AdamConfig adam;

    void validate() const;
};

// One row per outer iteration. critic_objective is the unpenalized critic
// objective mean f(x) - mean f(x~): the Wasserstein estimate under the
// wasserstein_gp loss.
struct IterationRecord {
    size_t iter = 0;
    size_t stage = 0;
    std::vector<double> lambda;
    double critic_objective = 0.0;
    double gen_loss = 0.0;
    double penalty = 0.0;
    double wall_ms = 0.0;
};

using RunMetrics = std::vector<IterationRecord>;

struct Batch {
    ad::Tensor real;  // [m, feature]
    ad::Tensor z;     // [m, z_dim]
};

using BatchSampler = std::function<ad::Tensor(size_t m, Rng& rng)>;

// Uniform rows-with-replacement sampler over a fixed dataset [N, feature].
BatchSampler replay_sampler(ad::Tensor dataset);
// z ~ standard normal [m, z_dim].
ad::Tensor sample_noise(size_t m, size_t z_dim, Rng& rng);
// x_hat = eps*x + (1-eps)*x~ with one eps per sample row.
ad::Tensor interpolate(const ad::Tensor& real, const ad::Tensor& fake, const std::vector<double>& eps);

struct CriticStepResult {
    double objective = 0.0;  // mean f(x) - mean f(x~), or the vanilla objective
    double penalty = 0.0;    // beta-scaled penalty contribution (0 in vanilla mode)
    double loss = 0.0;       // value actually descended
};

// One critic update on pre-generated fake samples.
CriticStepResult critic_update(families::CriticBank& bank, std::vector<nn::AdamState>& opt,
                               const curriculum::Lambda& lambda, const ad::Tensor& real,
                               const ad::Tensor& fake, const TrainConfig& cfg, Rng& rng);

// Algorithm step: fake = g(z), then a critic update. Generator is read-only.
CriticStepResult critic_step(families::CriticBank& bank, std::vector<nn::AdamState>& opt,
                             const curriculum::Lambda& lambda, const nn::MlpParams& gen,
                             const Batch& batch, const TrainConfig& cfg, Rng& rng);

// One generator update against the frozen composite critic.
double generator_step(const families::CriticBank& bank, const curriculum::Lambda& lambda,
                      nn::MlpParams& gen, nn::AdamState& gen_opt, const ad::Tensor& z,
                      const TrainConfig& cfg);

struct TrainCallbacks {
    // Called after every outer iteration with the fresh metrics row.
    std::function<void(const IterationRecord&)> on_row;
    // Called when the schedule moves to a new stage (after re-initialization).
    std::function<void(size_t stage)> on_stage_change;
};

// The full outer loop. Mutates bank and gen in place; optimizer states are
// internal. Throws NumericError on a non-finite loss after reporting the rows
// recorded so far through on_row.
RunMetrics train(const TrainConfig& cfg, const curriculum::Schedule& schedule,
                 families::CriticBank& bank, nn::MlpParams& gen, const BatchSampler& real_sampler,
                 const TrainCallbacks& callbacks = {});

// Trains a fresh critic bank restriction under a fixed lambda against fixed
// real/fake samplers and returns the unpenalized objective averaged over the
// final 10% of iterations: a lower-bound estimate of the Wasserstein distance.
double estimate_wasserstein(const BatchSampler& real, const BatchSampler& fake,
                            const families::FamilySpec& family, const curriculum::Lambda& lambda,
                            const TrainConfig& cfg, size_t train_iters, uint64_t seed);

// Same, with the fake side drawn from a frozen generator.
double estimate_wasserstein(const nn::MlpParams& frozen_gen, const curriculum::Lambda& lambda,
                            const BatchSampler& real, const families::FamilySpec& family,
                            const TrainConfig& cfg, size_t train_iters, uint64_t seed);

}  // namespace wganc::trainer
