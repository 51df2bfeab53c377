#pragma once

#include <cstdint>
#include <vector>

#include "wganc/graph.hpp"
#include "wganc/rng.hpp"
#include "wganc/tensor.hpp"

namespace wganc::nn {

enum class Activation { leaky_relu, tanh };

struct MlpSpec {
    size_t input_dim = 1;
    std::vector<size_t> hidden_dims;
    size_t output_dim = 1;
    Activation hidden_activation = Activation::leaky_relu;
    double leaky_slope = 0.2;

    // input_dim, hidden..., output_dim
    std::vector<size_t> layer_dims() const;
    void validate() const;
};

// Per-layer weight [out, in] and bias [out]; the init seed is kept for
// checkpoint headers.
struct MlpParams {
    MlpSpec spec;
    uint64_t seed = 0;
    std::vector<ad::Tensor> weights;
    std::vector<ad::Tensor> biases;

    size_t layer_count() const { return weights.size(); }
};

// Xavier-uniform weights, zero biases. Deterministic per seed.
MlpParams init_mlp(const MlpSpec& spec, uint64_t seed);

// Parameter leaves bound into a graph for one forward pass.
struct BoundMlp {
    std::vector<ad::NodeId> weights;
    std::vector<ad::NodeId> biases;
};

BoundMlp bind_params(ad::Graph& g, const MlpParams& params, bool trainable);

// affine -> activation per hidden layer, final affine. x is [batch, input_dim].
ad::NodeId mlp_forward(ad::Graph& g, const BoundMlp& bound, const MlpSpec& spec, ad::NodeId x);

// No-graph convenience evaluation.
ad::Tensor mlp_eval(const MlpParams& params, const ad::Tensor& x);

// Gradients in layer order W0,b0,W1,b1,... pulled out of a backward() result.
std::vector<ad::Tensor> gather_grads(const BoundMlp& bound, const ad::GradientMap& grads);

struct AdamConfig {
    double lr = 1e-4;
    double beta1 = 0.5;
    double beta2 = 0.9;
    double eps = 1e-8;
};

// First/second moment accumulators in the same W0,b0,W1,b1,... order.
struct AdamState {
    AdamConfig cfg;
    long t = 0;
    std::vector<ad::Tensor> m;
    std::vector<ad::Tensor> v;
};

AdamState make_adam_state(const MlpParams& params, AdamConfig cfg);

// One bias-corrected Adam descent step. grads must be in W0,b0,... order.
void adam_step(AdamState& state, MlpParams& params, const std::vector<ad::Tensor>& grads);
void adam_step(AdamState& state, MlpParams& params, const ad::GradientMap& grads,
               const BoundMlp& bound);

}  // namespace wganc::nn
