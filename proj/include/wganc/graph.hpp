#pragma once

#include <array>
#include <cstdint>
#include <unordered_map>
#include <vector>

#include "wganc/tensor.hpp"

namespace wganc::ad {

using NodeId = int32_t;
inline constexpr NodeId kNoNode = -1;

enum class Op : uint8_t {
    leaf,
    matmul,
    transpose2d,
    add,
    sub,
    mul,
    scalar_mul,
    add_scalar,
    leaky_relu,
    leaky_relu_mask,  // piecewise-constant; derivative 0 everywhere
    tanh_fn,
    sigmoid_fn,
    square,
    sqrt_guard,  // sqrt(x + 1e-12)
    recip,
    log_guard,  // log(max(x, 1e-12))
    max_const,
    gt_const_mask,  // piecewise-constant; derivative 0 everywhere
    sum_all,
    mean_all,
    sum_rows,   // [m,n] -> [n]
    tile_rows,  // [n] -> [m,n]
    sum_cols,   // [m,n] -> [m,1]
    tile_cols,  // [m,1] -> [m,n]
    slice_cols,
    pad_cols,
    concat_cols,
    reshape_view,
    broadcast_scalar,  // {1} -> arbitrary shape
    downsample_avg,    // [b,W,H,C] -> [b,W/k,H/k,C], k x k block means
    upsample_rep,      // [b,W,H,C] -> [b,W*k,H*k,C], nearest-neighbor repeat
};

const char* op_name(Op op);

struct Node {
    Op op = Op::leaf;
    std::array<NodeId, 2> in{kNoNode, kNoNode};
    double c = 0.0;             // scalar attribute: slope / multiplier / clamp bound
    size_t k0 = 0, k1 = 0;      // integer attributes: slice bounds, tile count, block size
    std::vector<size_t> shape_attr;  // reshape / broadcast target
    Tensor value;
    bool requires_grad = false;
    bool is_param = false;  // leaves only: differentiable-parameter vs constant
};

// leaf node id -> gradient tensor (same shape as the leaf)
using GradientMap = std::unordered_map<NodeId, Tensor>;

// Append-only computation graph with eager evaluation: each builder computes
// and caches the node's value immediately, so ids are topologically ordered by
// construction. The backward pass emits its adjoints as ordinary graph nodes
// built from the same primitive set, which is what makes gradients themselves
// differentiable (double backprop for the gradient penalty).
class Graph {
public:
    NodeId param(Tensor v);
    NodeId constant(Tensor v);
    NodeId constant(double v);  // scalar, shape {1}

    NodeId matmul(NodeId a, NodeId b);
    NodeId transpose(NodeId a);
    NodeId add(NodeId a, NodeId b);
    NodeId sub(NodeId a, NodeId b);
    NodeId mul(NodeId a, NodeId b);
    NodeId scalar_mul(NodeId a, double c);
    NodeId add_scalar(NodeId a, double c);
    NodeId leaky_relu(NodeId a, double slope);
    NodeId leaky_relu_mask(NodeId a, double slope);
    NodeId tanh(NodeId a);
    NodeId sigmoid(NodeId a);
    NodeId square(NodeId a);
    NodeId sqrt_guarded(NodeId a);
    NodeId recip(NodeId a);
    NodeId log_guarded(NodeId a);
    NodeId max_with_constant(NodeId a, double c);
    NodeId gt_const_mask(NodeId a, double c);
    NodeId sum(NodeId a);
    NodeId mean(NodeId a);
    NodeId sum_rows(NodeId a);
    NodeId tile_rows(NodeId a, size_t m);
    NodeId sum_cols(NodeId a);
    NodeId tile_cols(NodeId a, size_t n);
    NodeId slice_cols(NodeId a, size_t lo, size_t hi);
    NodeId pad_cols(NodeId a, size_t lo, size_t total);
    NodeId concat_cols(NodeId a, NodeId b);
    NodeId reshape(NodeId a, std::vector<size_t> shape);
    NodeId broadcast_scalar(NodeId a, std::vector<size_t> shape);
    NodeId downsample(NodeId a, size_t k);
    NodeId upsample_repeat(NodeId a, size_t k);

    const Tensor& value(NodeId id) const;
    const Node& node(NodeId id) const;
    size_t size() const { return nodes_.size(); }

    // d(root)/d(leaf) for every differentiable leaf; root must hold one element.
    // Unreachable parameter leaves get zero gradients.
    GradientMap backward(NodeId root);

    // Gradient of root w.r.t. one leaf as a differentiable graph node.
    NodeId grad_as_graph(NodeId root, NodeId wrt_leaf);

private:
    std::vector<Node> nodes_;

    NodeId push(Node n);
    const Tensor& val(NodeId id) const { return nodes_[static_cast<size_t>(id)].value; }
    void check_id(NodeId id, const char* who) const;

    // Builds adjoint nodes for ids [0, root]; adj[i] == kNoNode where no
    // gradient flows. Appends new nodes but only reads adjoints of old ones.
    std::vector<NodeId> adjoint_pass(NodeId root);
    void vjp(NodeId id, NodeId upstream, std::vector<NodeId>& adj);
    void accumulate(std::vector<NodeId>& adj, NodeId target, NodeId contrib);
};

// Composite builders over the primitive set (differentiable to any order the
// primitives support).
NodeId add_bias(Graph& g, NodeId x, NodeId b);       // [m,n] + [n] broadcast over rows
NodeId l2_norm_rows(Graph& g, NodeId x);             // [m,n] -> [m,1], guarded sqrt
NodeId hinge_sq(Graph& g, NodeId u);                 // max(0,u)^2 elementwise

}  // namespace wganc::ad
