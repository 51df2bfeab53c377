#include "wganc/nn.hpp"

#include <cmath>
#include <string>

#include "wganc/error.hpp"

namespace wganc::nn {

std::vector<size_t> MlpSpec::layer_dims() const {
    std::vector<size_t> dims;
    dims.push_back(input_dim);
    dims.insert(dims.end(), hidden_dims.begin(), hidden_dims.end());
    dims.push_back(output_dim);
    return dims;
}

void MlpSpec::validate() const {
    if (input_dim < 1 || output_dim < 1) throw ValueError("mlp spec: dims must be >= 1");
    for (size_t h : hidden_dims) {
        if (h < 1) throw ValueError("mlp spec: dims must be >= 1");
    }
}

MlpParams init_mlp(const MlpSpec& spec, uint64_t seed) {
    spec.validate();
    Rng rng(seed);
    MlpParams p;
    p.spec = spec;
    p.seed = seed;
    const auto dims = spec.layer_dims();
    for (size_t l = 0; l + 1 < dims.size(); ++l) {
        const size_t fan_in = dims[l], fan_out = dims[l + 1];
        const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
        ad::Tensor w = ad::Tensor::zeros({fan_out, fan_in});
        for (double& v : w.data) v = rng.uniform(-bound, bound);
        p.weights.push_back(std::move(w));
        p.biases.push_back(ad::Tensor::zeros({fan_out}));
    }
    return p;
}

BoundMlp bind_params(ad::Graph& g, const MlpParams& params, bool trainable) {
    BoundMlp b;
    for (size_t l = 0; l < params.layer_count(); ++l) {
        b.weights.push_back(trainable ? g.param(params.weights[l]) : g.constant(params.weights[l]));
        b.biases.push_back(trainable ? g.param(params.biases[l]) : g.constant(params.biases[l]));
    }
    return b;
}

ad::NodeId mlp_forward(ad::Graph& g, const BoundMlp& bound, const MlpSpec& spec, ad::NodeId x) {
    const size_t width = g.value(x).cols();
    if (width != spec.input_dim) {
        throw ShapeError("mlp_forward: input width " + std::to_string(width) + " but spec expects " +
                         std::to_string(spec.input_dim));
    }
    ad::NodeId h = x;
    const size_t layers = bound.weights.size();
    for (size_t l = 0; l < layers; ++l) {
        h = ad::add_bias(g, g.matmul(h, g.transpose(bound.weights[l])), bound.biases[l]);
        if (l + 1 < layers) {
            h = spec.hidden_activation == Activation::tanh ? g.tanh(h)
                                                           : g.leaky_relu(h, spec.leaky_slope);
        }
    }
    return h;
}

ad::Tensor mlp_eval(const MlpParams& params, const ad::Tensor& x) {
    ad::Graph g;
    BoundMlp b = bind_params(g, params, false);
    return g.value(mlp_forward(g, b, params.spec, g.constant(x)));
}

std::vector<ad::Tensor> gather_grads(const BoundMlp& bound, const ad::GradientMap& grads) {
    std::vector<ad::Tensor> out;
    out.reserve(bound.weights.size() * 2);
    for (size_t l = 0; l < bound.weights.size(); ++l) {
        auto wi = grads.find(bound.weights[l]);
        auto bi = grads.find(bound.biases[l]);
        if (wi == grads.end() || bi == grads.end()) {
            throw ValueError("gather_grads: gradient map does not cover layer " + std::to_string(l));
        }
        out.push_back(wi->second);
        out.push_back(bi->second);
    }
    return out;
}

AdamState make_adam_state(const MlpParams& params, AdamConfig cfg) {
    AdamState s;
    s.cfg = cfg;
    for (size_t l = 0; l < params.layer_count(); ++l) {
        s.m.push_back(ad::Tensor::zeros(params.weights[l].shape));
        s.m.push_back(ad::Tensor::zeros(params.biases[l].shape));
        s.v.push_back(ad::Tensor::zeros(params.weights[l].shape));
        s.v.push_back(ad::Tensor::zeros(params.biases[l].shape));
    }
    return s;
}

namespace {

void adam_update_tensor(ad::Tensor& x, ad::Tensor& m, ad::Tensor& v, const ad::Tensor& g,
                        const AdamConfig& cfg, long t) {
    if (!x.same_shape(g)) {
        throw ShapeError("adam_step: gradient shape " + ad::shape_str(g.shape) +
                         " does not match parameter " + ad::shape_str(x.shape));
    }
    const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(t));
    const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(t));
    for (size_t i = 0; i < x.numel(); ++i) {
        m.data[i] = cfg.beta1 * m.data[i] + (1.0 - cfg.beta1) * g.data[i];
        v.data[i] = cfg.beta2 * v.data[i] + (1.0 - cfg.beta2) * g.data[i] * g.data[i];
        const double mhat = m.data[i] / bc1;
        const double vhat = v.data[i] / bc2;
        x.data[i] -= cfg.lr * mhat / (std::sqrt(vhat) + cfg.eps);
    }
}

}  // namespace

void adam_step(AdamState& state, MlpParams& params, const std::vector<ad::Tensor>& grads) {
    if (grads.size() != params.layer_count() * 2) {
        throw ValueError("adam_step: expected " + std::to_string(params.layer_count() * 2) +
                         " gradient tensors, got " + std::to_string(grads.size()));
    }
    ++state.t;
    for (size_t l = 0; l < params.layer_count(); ++l) {
        adam_update_tensor(params.weights[l], state.m[2 * l], state.v[2 * l], grads[2 * l], state.cfg,
                           state.t);
        adam_update_tensor(params.biases[l], state.m[2 * l + 1], state.v[2 * l + 1], grads[2 * l + 1],
                           state.cfg, state.t);
    }
}

void adam_step(AdamState& state, MlpParams& params, const ad::GradientMap& grads,
               const BoundMlp& bound) {
    adam_step(state, params, gather_grads(bound, grads));
}

}  // namespace wganc::nn
