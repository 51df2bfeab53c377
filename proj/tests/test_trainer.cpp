#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "testutil.hpp"
#include "wganc/error.hpp"
#include "wganc/trainer.hpp"

using namespace wganc;
using namespace wganc::ad;
using namespace wganc::trainer;
using wganc::curriculum::Lambda;
using wganc::testutil::random_tensor;

namespace {

// Bank with one linear critic f(x) = w.x + b over the full input.
families::CriticBank linear_bank(size_t t, std::vector<double> w, double b) {
    families::CriticBank bank;
    bank.seq_len = t;
    nn::MlpSpec spec;
    spec.input_dim = t;
    spec.output_dim = 1;
    families::CriticEntry e;
    e.transform = {families::TransformKind::prefix, t};
    e.params = nn::init_mlp(spec, 0);
    e.params.weights[0] = Tensor::row_major({1, t}, std::move(w));
    e.params.biases[0] = Tensor::row_major({1}, {b});
    bank.critics.push_back(std::move(e));
    return bank;
}

// Two-layer critic with all-zero weights: the hidden output is constant, so
// f == c and every parameter gradient of mean f(fake) - mean f(real) vanishes.
families::CriticBank constant_critic_bank(size_t t, double c) {
    families::CriticBank bank;
    bank.seq_len = t;
    nn::MlpSpec spec;
    spec.input_dim = t;
    spec.hidden_dims = {4};
    spec.output_dim = 1;
    families::CriticEntry e;
    e.transform = {families::TransformKind::prefix, t};
    e.params = nn::init_mlp(spec, 0);
    for (auto& w : e.params.weights)
        for (double& v : w.data) v = 0.0;
    e.params.biases[1].data[0] = c;
    bank.critics.push_back(std::move(e));
    return bank;
}

std::vector<nn::AdamState> states_for(const families::CriticBank& bank, const TrainConfig& cfg) {
    std::vector<nn::AdamState> opt;
    for (const auto& cr : bank.critics) opt.push_back(nn::make_adam_state(cr.params, cfg.adam));
    return opt;
}

nn::MlpParams tiny_generator(size_t z_dim, size_t t, uint64_t seed) {
    nn::MlpSpec spec;
    spec.input_dim = z_dim;
    spec.hidden_dims = {8};
    spec.output_dim = t;
    spec.hidden_activation = nn::Activation::tanh;
    return nn::init_mlp(spec, seed);
}

bool params_equal(const nn::MlpParams& a, const nn::MlpParams& b) {
    for (size_t l = 0; l < a.layer_count(); ++l) {
        if (a.weights[l].data != b.weights[l].data) return false;
        if (a.biases[l].data != b.biases[l].data) return false;
    }
    return true;
}

families::FamilySpec seq_family(size_t t, std::vector<size_t> lengths, size_t hidden) {
    families::FamilySpec f;
    f.kind = families::FamilySpec::Kind::seq_prefix;
    f.seq_len = t;
    f.lengths = std::move(lengths);
    f.hidden = hidden;
    return f;
}

}  // namespace

TEST_CASE("interpolate") {
    Tensor x = Tensor::row_major({2, 2}, {1, 2, 3, 4});
    Tensor y = Tensor::row_major({2, 2}, {5, 6, 7, 8});
    SUBCASE("eps=1 returns the real sample exactly") {
        CHECK(interpolate(x, y, {1.0, 1.0}).data == x.data);
    }
    SUBCASE("eps=0 returns the fake sample exactly") {
        CHECK(interpolate(x, y, {0.0, 0.0}).data == y.data);
    }
    SUBCASE("per-sample mixing") {
        Tensor m = interpolate(x, y, {1.0, 0.5});
        CHECK(m.data == std::vector<double>{1, 2, 5, 6});
    }
}

TEST_CASE("critic_step") {
    TrainConfig cfg;
    cfg.batch_size = 4;
    cfg.z_dim = 3;
    Rng rng(1);
    Rng data_rng(2);
    Tensor real = random_tensor({4, 6}, data_rng);
    Tensor fake = random_tensor({4, 6}, data_rng);

    SUBCASE("constant critic with beta=0: objective 0 and parameters unchanged") {
        cfg.beta = 0.0;
        families::CriticBank bank = constant_critic_bank(6, 3.25);
        auto opt = states_for(bank, cfg);
        std::vector<double> w0 = bank.critics[0].params.weights[0].data;
        std::vector<double> w1 = bank.critics[0].params.weights[1].data;
        CriticStepResult res = critic_update(bank, opt, Lambda::one_hot(1, 0), real, fake, cfg, rng);
        CHECK(res.objective == 0.0);
        CHECK(res.penalty == 0.0);
        CHECK(bank.critics[0].params.weights[0].data == w0);
        CHECK(bank.critics[0].params.weights[1].data == w1);
        CHECK(opt[0].t == 1);
    }
    SUBCASE("beta=0 loss equals mean f(fake) - mean f(real) exactly") {
        cfg.beta = 0.0;
        families::CriticBank bank = linear_bank(6, {0.3, -1.0, 0.5, 2.0, 0.0, -0.25}, 0.7);
        auto opt = states_for(bank, cfg);
        Tensor fr = nn::mlp_eval(bank.critics[0].params, real);
        Tensor ff = nn::mlp_eval(bank.critics[0].params, fake);
        double expected = 0.0;
        for (size_t i = 0; i < 4; ++i) expected += ff.data[i];
        double mr = 0.0;
        for (size_t i = 0; i < 4; ++i) mr += fr.data[i];
        expected = expected / 4.0 - mr / 4.0;
        CriticStepResult res = critic_update(bank, opt, Lambda::one_hot(1, 0), real, fake, cfg, rng);
        CHECK(res.loss == expected);
        CHECK(res.objective == -expected);
    }
    SUBCASE("penalty arithmetic on linear critics with known gradient norm") {
        cfg.beta = 10.0;
        // ||grad f|| = ||w|| = 0.5 everywhere: one-sided penalty 0
        families::CriticBank half = linear_bank(4, {0.5, 0, 0, 0}, 0.0);
        auto opt_h = states_for(half, cfg);
        Tensor r4 = random_tensor({4, 4}, data_rng);
        Tensor f4 = random_tensor({4, 4}, data_rng);
        CriticStepResult res = critic_update(half, opt_h, Lambda::one_hot(1, 0), r4, f4, cfg, rng);
        CHECK(res.penalty == doctest::Approx(0.0));

        // ||w|| = 2: one-sided contribution beta * (2-1)^2 = 10
        families::CriticBank two = linear_bank(4, {2.0, 0, 0, 0}, 0.0);
        auto opt_t = states_for(two, cfg);
        res = critic_update(two, opt_t, Lambda::one_hot(1, 0), r4, f4, cfg, rng);
        CHECK(res.penalty == doctest::Approx(10.0).epsilon(1e-6));

        // two-sided mode penalizes norms below 1 as well: beta * (0.5-1)^2
        cfg.penalty = PenaltyStyle::two_sided;
        families::CriticBank half2 = linear_bank(4, {0.5, 0, 0, 0}, 0.0);
        auto opt_h2 = states_for(half2, cfg);
        res = critic_update(half2, opt_h2, Lambda::one_hot(1, 0), r4, f4, cfg, rng);
        CHECK(res.penalty == doctest::Approx(10.0 * 0.25).epsilon(1e-6));
    }
    SUBCASE("generator parameters untouched by critic_step") {
        families::CriticBank bank = families::build_seq_bank(6, {3, 6}, 8, 5);
        auto opt = states_for(bank, cfg);
        nn::MlpParams gen = tiny_generator(3, 6, 17);
        nn::MlpParams gen_copy = gen;
        Batch batch{real, random_tensor({4, 3}, data_rng)};
        critic_step(bank, opt, Lambda::one_hot(2, 1), gen, batch, cfg, rng);
        CHECK(params_equal(gen, gen_copy));
    }
    SUBCASE("penalty is nonnegative and zero when all interpolate norms stay below 1") {
        families::CriticBank bank = linear_bank(4, {0.2, 0.1, -0.3, 0.05}, 1.0);
        auto opt = states_for(bank, cfg);
        Tensor r4 = random_tensor({4, 4}, data_rng);
        Tensor f4 = random_tensor({4, 4}, data_rng);
        CriticStepResult res = critic_update(bank, opt, Lambda::one_hot(1, 0), r4, f4, cfg, rng);
        CHECK(res.penalty == 0.0);
    }
}

TEST_CASE("generator_step") {
    TrainConfig cfg;
    cfg.batch_size = 4;
    cfg.z_dim = 3;
    Rng data_rng(3);
    Tensor z = random_tensor({4, 3}, data_rng);

    SUBCASE("constant critic gives zero generator gradient") {
        families::CriticBank bank = constant_critic_bank(6, -2.0);
        nn::MlpParams gen = tiny_generator(3, 6, 21);
        nn::MlpParams before = gen;
        nn::AdamState opt = nn::make_adam_state(gen, cfg.adam);
        double loss = generator_step(bank, Lambda::one_hot(1, 0), gen, opt, z, cfg);
        CHECK(loss == doctest::Approx(2.0));
        CHECK(params_equal(gen, before));
    }
    SUBCASE("critic parameters untouched and loss decreases the critic score") {
        families::CriticBank bank = families::build_seq_bank(6, {3, 6}, 8, 5);
        std::vector<double> critic_w = bank.critics[1].params.weights[0].data;
        nn::MlpParams gen = tiny_generator(3, 6, 22);
        nn::AdamState opt = nn::make_adam_state(gen, cfg.adam);
        generator_step(bank, Lambda::one_hot(2, 1), gen, opt, z, cfg);
        CHECK(bank.critics[1].params.weights[0].data == critic_w);
    }
    SUBCASE("generator gradient matches finite differences") {
        families::CriticBank bank = families::build_seq_bank(5, {2, 5}, 6, 9);
        Lambda l{{0.4, 0.6}};
        Tensor zv = random_tensor({3, 2}, data_rng);
        nn::MlpSpec gspec;
        gspec.input_dim = 2;
        gspec.hidden_dims = {4};
        gspec.output_dim = 5;
        gspec.hidden_activation = nn::Activation::tanh;

        std::vector<Tensor> inputs = {random_tensor({4, 2}, data_rng, -0.8, 0.8),
                                      random_tensor({4}, data_rng, -0.3, 0.3),
                                      random_tensor({5, 4}, data_rng, -0.8, 0.8),
                                      random_tensor({5}, data_rng, -0.3, 0.3)};
        testutil::ScalarBuilder build = [&bank, l, zv, gspec](Graph& g,
                                                              const std::vector<NodeId>& ls) {
            nn::BoundMlp gb;
            gb.weights = {ls[0], ls[2]};
            gb.biases = {ls[1], ls[3]};
            NodeId fake = nn::mlp_forward(g, gb, gspec, g.constant(zv));
            NodeId f = curriculum::composite_critic(g, bank, l, fake, false).out;
            return g.scalar_mul(g.mean(f), -1.0);
        };
        CHECK(testutil::gradcheck(build, inputs) < 1e-4);
    }
}

TEST_CASE("vanilla GAN mode") {
    TrainConfig cfg;
    cfg.batch_size = 4;
    cfg.z_dim = 3;
    cfg.loss = LossMode::vanilla_gan;
    Rng rng(4);
    Rng data_rng(5);
    Tensor real = random_tensor({4, 6}, data_rng);
    Tensor fake = random_tensor({4, 6}, data_rng);

    SUBCASE("D == 0.5 gives discriminator loss 2 log 2 and generator loss log 2") {
        families::CriticBank bank = constant_critic_bank(6, 0.0);  // zero logits
        auto opt = states_for(bank, cfg);
        CriticStepResult res = critic_update(bank, opt, Lambda::one_hot(1, 0), real, fake, cfg, rng);
        CHECK(res.loss == doctest::Approx(2.0 * std::log(2.0)));
        CHECK(res.penalty == 0.0);

        families::CriticBank bank2 = constant_critic_bank(6, 0.0);
        nn::MlpParams gen = tiny_generator(3, 6, 31);
        nn::AdamState gopt = nn::make_adam_state(gen, cfg.adam);
        double gen_loss =
            generator_step(bank2, Lambda::one_hot(1, 0), gen, gopt, random_tensor({4, 3}, data_rng), cfg);
        CHECK(gen_loss == doctest::Approx(std::log(2.0)));
    }
    SUBCASE("a hard-separating discriminator keeps losses finite through the clamp") {
        families::CriticBank bank = linear_bank(1, {1e6}, 0.0);
        auto opt = states_for(bank, cfg);
        Tensor r1 = Tensor::full({4, 1}, -5.0);  // D(real) ~ 0: worst case for log D
        Tensor f1 = Tensor::full({4, 1}, 5.0);
        CriticStepResult res = critic_update(bank, opt, Lambda::one_hot(1, 0), r1, f1, cfg, rng);
        CHECK(std::isfinite(res.loss));
        CHECK(res.loss > 10.0);
    }
    SUBCASE("discriminator gradient matches finite differences") {
        Tensor r5 = random_tensor({3, 5}, data_rng);
        Tensor f5 = random_tensor({3, 5}, data_rng);
        std::vector<Tensor> inputs = {random_tensor({1, 5}, data_rng, -0.8, 0.8),
                                      random_tensor({1}, data_rng, -0.3, 0.3)};
        testutil::ScalarBuilder build = [r5, f5](Graph& g, const std::vector<NodeId>& ls) {
            auto logits = [&](NodeId x) {
                return add_bias(g, g.matmul(x, g.transpose(ls[0])), ls[1]);
            };
            NodeId obj = g.add(g.mean(g.log_guarded(g.sigmoid(logits(g.constant(r5))))),
                               g.mean(g.log_guarded(g.add_scalar(
                                   g.scalar_mul(g.sigmoid(logits(g.constant(f5))), -1.0), 1.0))));
            return g.scalar_mul(obj, -1.0);
        };
        CHECK(testutil::gradcheck(build, inputs) < 1e-4);
    }
}

TEST_CASE("train loop") {
    TrainConfig cfg;
    cfg.batch_size = 8;
    cfg.n_critic = 2;
    cfg.z_dim = 4;
    cfg.adam.lr = 1e-3;
    Rng data_rng(6);
    Tensor dataset = random_tensor({64, 6}, data_rng);

    SUBCASE("zero iterations leave everything untouched") {
        cfg.iterations = 0;
        families::CriticBank bank = families::build_seq_bank(6, {6}, 8, 7);
        nn::MlpParams gen = tiny_generator(4, 6, 40);
        nn::MlpParams gen_before = gen;
        RunMetrics m = train(cfg, curriculum::one_hot_schedule(1, 1), bank, gen,
                             replay_sampler(dataset));
        CHECK(m.empty());
        CHECK(params_equal(gen, gen_before));
    }
    SUBCASE("one metrics row per outer iteration, stages advance, rows stream in order") {
        cfg.iterations = 9;
        families::CriticBank bank = families::build_seq_bank(6, {2, 4, 6}, 8, 7);
        nn::MlpParams gen = tiny_generator(4, 6, 41);
        std::vector<size_t> streamed;
        std::vector<size_t> stage_changes;
        TrainCallbacks cb;
        cb.on_row = [&](const IterationRecord& r) { streamed.push_back(r.iter); };
        cb.on_stage_change = [&](size_t s) { stage_changes.push_back(s); };
        RunMetrics m =
            train(cfg, curriculum::one_hot_schedule(3, 3), bank, gen, replay_sampler(dataset), cb);
        REQUIRE(m.size() == 9);
        for (size_t t = 0; t < 9; ++t) {
            CHECK(m[t].iter == t);
            CHECK(m[t].stage == t / 3);
            CHECK(std::isfinite(m[t].critic_objective));
        }
        CHECK(streamed.size() == 9);
        CHECK(stage_changes == std::vector<size_t>{1, 2});
        CHECK(m[4].lambda == std::vector<double>{0, 1, 0});
    }
    SUBCASE("stage change re-initializes only the newly active critic") {
        cfg.iterations = 4;
        families::CriticBank bank = families::build_seq_bank(6, {2, 4, 6}, 8, 7);
        nn::MlpParams untouched = bank.critics[2].params;
        nn::MlpParams stage1_fresh = bank.critics[1].params;
        nn::MlpParams gen = tiny_generator(4, 6, 42);
        train(cfg, curriculum::one_hot_schedule(3, 2), bank, gen, replay_sampler(dataset));
        // critic 2 never became active: bit-identical
        CHECK(params_equal(bank.critics[2].params, untouched));
        // critic 1 was re-initialized at the boundary, so it cannot have
        // evolved from its original init
        CHECK(!params_equal(bank.critics[1].params, stage1_fresh));
    }
    SUBCASE("single-stage full-length schedule reproduces plain WGAN-GP") {
        cfg.iterations = 5;
        families::CriticBank wide = families::build_seq_bank(6, {2, 4, 6}, 8, 7);
        families::CriticBank narrow;
        narrow.seq_len = 6;
        narrow.critics.push_back(wide.critics[2]);  // same init as the full critic

        std::vector<curriculum::Stage> only_last = {{Lambda::one_hot(3, 2), 1}};
        nn::MlpParams gen_a = tiny_generator(4, 6, 43);
        nn::MlpParams gen_b = gen_a;
        RunMetrics ma =
            train(cfg, curriculum::Schedule(only_last), wide, gen_a, replay_sampler(dataset));
        RunMetrics mb = train(cfg, curriculum::one_hot_schedule(1, 1), narrow, gen_b,
                              replay_sampler(dataset));
        REQUIRE(ma.size() == mb.size());
        for (size_t t = 0; t < ma.size(); ++t) {
            CHECK(ma[t].critic_objective == mb[t].critic_objective);
            CHECK(ma[t].gen_loss == mb[t].gen_loss);
        }
        CHECK(params_equal(gen_a, gen_b));
    }
    SUBCASE("identical seeds give bit-identical runs") {
        cfg.iterations = 6;
        auto run = [&] {
            families::CriticBank bank = families::build_seq_bank(6, {3, 6}, 8, 7);
            nn::MlpParams gen = tiny_generator(4, 6, 44);
            return train(cfg, curriculum::one_hot_schedule(2, 3), bank, gen,
                         replay_sampler(dataset));
        };
        RunMetrics a = run(), b = run();
        REQUIRE(a.size() == b.size());
        for (size_t t = 0; t < a.size(); ++t) {
            CHECK(a[t].critic_objective == b[t].critic_objective);
            CHECK(a[t].gen_loss == b[t].gen_loss);
            CHECK(a[t].penalty == b[t].penalty);
        }
    }
}

TEST_CASE("estimate_wasserstein") {
    TrainConfig cfg;
    cfg.batch_size = 32;
    cfg.adam.lr = 1e-3;

    SUBCASE("identical distributions estimate near zero") {
        Rng data_rng(7);
        Tensor cloud = random_tensor({128, 1}, data_rng);
        BatchSampler s = replay_sampler(cloud);
        double est = estimate_wasserstein(s, s, seq_family(1, {1}, 32), Lambda::one_hot(1, 0), cfg,
                                          300, 11);
        CHECK(std::abs(est) < 0.05);
    }
    SUBCASE("point masses at 0 and 3 estimate the exact distance within 20%") {
        BatchSampler zeros = [](size_t m, Rng&) { return Tensor::zeros({m, 1}); };
        BatchSampler threes = [](size_t m, Rng&) { return Tensor::full({m, 1}, 3.0); };
        double est = estimate_wasserstein(zeros, threes, seq_family(1, {1}, 32),
                                          Lambda::one_hot(1, 0), cfg, 600, 12);
        CHECK(est > 3.0 * 0.8);
        CHECK(est < 3.0 * 1.2);
    }
}
