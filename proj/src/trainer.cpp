#include "wganc/trainer.hpp"

#include <chrono>
#include <cmath>
#include <memory>
#include <string>

#include "wganc/error.hpp"

namespace wganc::trainer {

using ad::Graph;
using ad::NodeId;
using ad::Tensor;

void TrainConfig::validate() const {
    if (batch_size < 1) throw ConfigError("train: batch_size must be >= 1");
    if (n_critic < 1) throw ConfigError("train: n_critic must be >= 1");
    if (beta < 0.0) throw ConfigError("train: beta must be >= 0");
    if (z_dim < 1) throw ConfigError("train: z_dim must be >= 1");
}

BatchSampler replay_sampler(Tensor dataset) {
    if (dataset.rank() != 2) throw ShapeError("replay_sampler: dataset must be [N, feature]");
    auto data = std::make_shared<Tensor>(std::move(dataset));
    return [data](size_t m, Rng& rng) {
        const size_t n = data->rows(), f = data->cols();
        Tensor batch = Tensor::zeros({m, f});
        for (size_t i = 0; i < m; ++i) {
            const size_t row = rng.index(n);
            for (size_t j = 0; j < f; ++j) batch.data[i * f + j] = data->data[row * f + j];
        }
        return batch;
    };
}

Tensor sample_noise(size_t m, size_t z_dim, Rng& rng) {
    Tensor z = Tensor::zeros({m, z_dim});
    for (double& v : z.data) v = rng.normal();
    return z;
}

Tensor interpolate(const Tensor& real, const Tensor& fake, const std::vector<double>& eps) {
    if (!real.same_shape(fake)) {
        throw ShapeError("interpolate: shapes " + ad::shape_str(real.shape) + " and " +
                         ad::shape_str(fake.shape) + " differ");
    }
    if (eps.size() != real.rows()) throw ShapeError("interpolate: one epsilon per sample required");
    Tensor out = real;
    const size_t f = real.cols();
    for (size_t i = 0; i < real.rows(); ++i) {
        for (size_t j = 0; j < f; ++j) {
            out.data[i * f + j] = eps[i] * real.data[i * f + j] + (1.0 - eps[i]) * fake.data[i * f + j];
        }
    }
    return out;
}

namespace {

[[noreturn]] void numeric_abort(const char* where, double loss, double objective) {
    throw NumericError(std::string(where) + ": non-finite loss (loss=" + std::to_string(loss) +
                       ", objective=" + std::to_string(objective) + ")");
}

// mean log D with D = sigmoid(logits); the log is clamp-guarded at 1e-12.
NodeId mean_log_sigmoid(Graph& g, NodeId logits) { return g.mean(g.log_guarded(g.sigmoid(logits))); }

NodeId mean_log_one_minus_sigmoid(Graph& g, NodeId logits) {
    NodeId d = g.sigmoid(logits);
    return g.mean(g.log_guarded(g.add_scalar(g.scalar_mul(d, -1.0), 1.0)));
}

CriticStepResult critic_update_wgan(families::CriticBank& bank, std::vector<nn::AdamState>& opt,
                                    const curriculum::Lambda& lambda, const Tensor& real,
                                    const Tensor& fake, const TrainConfig& cfg, Rng& rng) {
    const size_t m = real.rows();
    std::vector<double> eps(m);
    for (double& e : eps) e = rng.uniform();

    Graph g;
    NodeId xr = g.constant(real);
    NodeId xf = g.constant(fake);
    // The same parameter leaves feed all three forward passes, so one
    // backward produces the full gradient.
    curriculum::CompositeResult on_fake = curriculum::composite_critic(g, bank, lambda, xf, true);
    NodeId f_real = curriculum::composite_forward(g, bank, lambda, on_fake.active, on_fake.bound, xr);

    NodeId mean_fake = g.mean(on_fake.out);
    NodeId mean_real = g.mean(f_real);
    NodeId loss = g.sub(mean_fake, mean_real);

    double penalty_value = 0.0;
    if (cfg.beta > 0.0) {
        NodeId xhat = g.param(interpolate(real, fake, eps));
        NodeId f_hat =
            curriculum::composite_forward(g, bank, lambda, on_fake.active, on_fake.bound, xhat);
        NodeId grad_x = g.grad_as_graph(g.sum(f_hat), xhat);
        NodeId excess = g.add_scalar(ad::l2_norm_rows(g, grad_x), -1.0);
        NodeId per_sample = cfg.penalty == PenaltyStyle::one_sided ? ad::hinge_sq(g, excess)
                                                                   : g.square(excess);
        NodeId penalty = g.scalar_mul(g.mean(per_sample), cfg.beta);
        penalty_value = g.value(penalty).data[0];
        loss = g.add(loss, penalty);
    }

    const double loss_value = g.value(loss).data[0];
    const double objective = g.value(mean_real).data[0] - g.value(mean_fake).data[0];
    if (!std::isfinite(loss_value) || !std::isfinite(objective)) {
        numeric_abort("critic_step", loss_value, objective);
    }

    ad::GradientMap grads = g.backward(loss);
    for (size_t a = 0; a < on_fake.active.size(); ++a) {
        nn::adam_step(opt[on_fake.active[a]], bank.critics[on_fake.active[a]].params, grads,
                      on_fake.bound[a]);
    }
    return {objective, penalty_value, loss_value};
}

CriticStepResult critic_update_vanilla(families::CriticBank& bank, std::vector<nn::AdamState>& opt,
                                       const curriculum::Lambda& lambda, const Tensor& real,
                                       const Tensor& fake, const TrainConfig& cfg) {
    (void)cfg;
    Graph g;
    NodeId xr = g.constant(real);
    NodeId xf = g.constant(fake);
    curriculum::CompositeResult on_fake = curriculum::composite_critic(g, bank, lambda, xf, true);
    NodeId real_logits =
        curriculum::composite_forward(g, bank, lambda, on_fake.active, on_fake.bound, xr);

    // discriminator maximizes log D(x) + log(1 - D(x~))
    NodeId objective_node = g.add(mean_log_sigmoid(g, real_logits),
                                  mean_log_one_minus_sigmoid(g, on_fake.out));
    NodeId loss = g.scalar_mul(objective_node, -1.0);

    const double loss_value = g.value(loss).data[0];
    const double objective = g.value(objective_node).data[0];
    if (!std::isfinite(loss_value)) numeric_abort("critic_step", loss_value, objective);

    ad::GradientMap grads = g.backward(loss);
    for (size_t a = 0; a < on_fake.active.size(); ++a) {
        nn::adam_step(opt[on_fake.active[a]], bank.critics[on_fake.active[a]].params, grads,
                      on_fake.bound[a]);
    }
    return {objective, 0.0, loss_value};
}

}  // namespace

CriticStepResult critic_update(families::CriticBank& bank, std::vector<nn::AdamState>& opt,
                               const curriculum::Lambda& lambda, const Tensor& real,
                               const Tensor& fake, const TrainConfig& cfg, Rng& rng) {
    if (opt.size() != bank.size()) {
        throw ValueError("critic_update: optimizer state count does not match bank size");
    }
    if (!real.same_shape(fake)) {
        throw ShapeError("critic_update: real batch " + ad::shape_str(real.shape) +
                         " and fake batch " + ad::shape_str(fake.shape) + " differ");
    }
    return cfg.loss == LossMode::wasserstein_gp
               ? critic_update_wgan(bank, opt, lambda, real, fake, cfg, rng)
               : critic_update_vanilla(bank, opt, lambda, real, fake, cfg);
}

CriticStepResult critic_step(families::CriticBank& bank, std::vector<nn::AdamState>& opt,
                             const curriculum::Lambda& lambda, const nn::MlpParams& gen,
                             const Batch& batch, const TrainConfig& cfg, Rng& rng) {
    if (batch.real.rows() != batch.z.rows()) {
        throw ShapeError("critic_step: real and noise batches have different row counts");
    }
    Tensor fake = nn::mlp_eval(gen, batch.z);
    return critic_update(bank, opt, lambda, batch.real, fake, cfg, rng);
}

double generator_step(const families::CriticBank& bank, const curriculum::Lambda& lambda,
                      nn::MlpParams& gen, nn::AdamState& gen_opt, const Tensor& z,
                      const TrainConfig& cfg) {
    Graph g;
    nn::BoundMlp gbound = nn::bind_params(g, gen, true);
    NodeId fake = nn::mlp_forward(g, gbound, gen.spec, g.constant(z));
    curriculum::CompositeResult comp = curriculum::composite_critic(g, bank, lambda, fake, false);

    NodeId loss = cfg.loss == LossMode::wasserstein_gp
                      ? g.scalar_mul(g.mean(comp.out), -1.0)
                      : g.scalar_mul(mean_log_sigmoid(g, comp.out), -1.0);  // non-saturating

    const double loss_value = g.value(loss).data[0];
    if (!std::isfinite(loss_value)) numeric_abort("generator_step", loss_value, loss_value);

    ad::GradientMap grads = g.backward(loss);
    nn::adam_step(gen_opt, gen, grads, gbound);
    return loss_value;
}

RunMetrics train(const TrainConfig& cfg, const curriculum::Schedule& schedule,
                 families::CriticBank& bank, nn::MlpParams& gen, const BatchSampler& real_sampler,
                 const TrainCallbacks& callbacks) {
    cfg.validate();
    if (bank.size() != schedule.stages().front().lambda.dim()) {
        throw ConfigError("train: schedule dimension does not match the critic bank");
    }

    std::vector<nn::AdamState> critic_opt;
    for (const auto& c : bank.critics) critic_opt.push_back(nn::make_adam_state(c.params, cfg.adam));
    nn::AdamState gen_opt = nn::make_adam_state(gen, cfg.adam);

    Rng rng(cfg.train_seed);
    RunMetrics metrics;
    metrics.reserve(cfg.iterations);
    size_t prev_stage = 0;

    for (size_t t = 0; t < cfg.iterations; ++t) {
        const auto start = std::chrono::steady_clock::now();
        const size_t stage = schedule.stage_at(t);
        const curriculum::Lambda& lambda = schedule.stages()[stage].lambda;

        if (t > 0 && stage != prev_stage) {
            size_t active = 0;
            if (lambda.is_one_hot(&active)) {
                // fresh discriminator with the appropriately sized input,
                // fresh optimizer state; blended stages keep their critics
                families::reinit_stage(bank, active, mix_seed(cfg.init_seed, 1000 + stage));
                critic_opt[active] = nn::make_adam_state(bank.critics[active].params, cfg.adam);
            }
            if (callbacks.on_stage_change) callbacks.on_stage_change(stage);
        }
        prev_stage = stage;

        CriticStepResult last{};
        double gen_loss = 0.0;
        try {
            for (size_t i = 0; i < cfg.n_critic; ++i) {
                Batch batch{real_sampler(cfg.batch_size, rng),
                            sample_noise(cfg.batch_size, cfg.z_dim, rng)};
                last = critic_step(bank, critic_opt, lambda, gen, batch, cfg, rng);
            }
            gen_loss = generator_step(bank, lambda, gen, gen_opt,
                                      sample_noise(cfg.batch_size, cfg.z_dim, rng), cfg);
        } catch (const NumericError& e) {
            throw NumericError("iteration " + std::to_string(t) + " stage " + std::to_string(stage) +
                               ": " + e.what());
        }

        IterationRecord row;
        row.iter = t;
        row.stage = stage;
        row.lambda = lambda.w;
        row.critic_objective = last.objective;
        row.gen_loss = gen_loss;
        row.penalty = last.penalty;
        row.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() -
                                                                start)
                          .count();
        if (callbacks.on_row) callbacks.on_row(row);
        metrics.push_back(std::move(row));
    }
    return metrics;
}

double estimate_wasserstein(const BatchSampler& real, const BatchSampler& fake,
                            const families::FamilySpec& family, const curriculum::Lambda& lambda,
                            const TrainConfig& cfg, size_t train_iters, uint64_t seed) {
    if (train_iters < 1) throw ValueError("estimate_wasserstein: train_iters must be >= 1");
    curriculum::check_valid(lambda);
    TrainConfig ecfg = cfg;
    ecfg.loss = LossMode::wasserstein_gp;  // the estimate is Wasserstein-specific

    families::CriticBank bank = families::build_bank(family, mix_seed(seed, 1));
    if (bank.size() != lambda.dim()) {
        throw ConfigError("estimate_wasserstein: family size does not match lambda dimension");
    }
    std::vector<nn::AdamState> opt;
    for (const auto& c : bank.critics) opt.push_back(nn::make_adam_state(c.params, ecfg.adam));

    Rng rng(mix_seed(seed, 2));
    const size_t window = std::max<size_t>(1, train_iters / 10);
    double window_sum = 0.0;
    for (size_t t = 0; t < train_iters; ++t) {
        Tensor xr = real(ecfg.batch_size, rng);
        Tensor xf = fake(ecfg.batch_size, rng);
        CriticStepResult res = critic_update(bank, opt, lambda, xr, xf, ecfg, rng);
        if (t + window >= train_iters) window_sum += res.objective;
    }
    return window_sum / static_cast<double>(window);
}

double estimate_wasserstein(const nn::MlpParams& frozen_gen, const curriculum::Lambda& lambda,
                            const BatchSampler& real, const families::FamilySpec& family,
                            const TrainConfig& cfg, size_t train_iters, uint64_t seed) {
    const size_t z_dim = cfg.z_dim;
    BatchSampler fake = [&frozen_gen, z_dim](size_t m, Rng& rng) {
        return nn::mlp_eval(frozen_gen, sample_noise(m, z_dim, rng));
    };
    return estimate_wasserstein(real, fake, family, lambda, cfg, train_iters, seed);
}

}  // namespace wganc::trainer
