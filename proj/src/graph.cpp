#include "wganc/graph.hpp"

#include <cmath>
#include <string>

#include "wganc/error.hpp"

namespace wganc::ad {

namespace {

constexpr double kSqrtGuardEps = 1e-12;
constexpr double kLogGuardEps = 1e-12;

[[noreturn]] void shape_fail(const char* op, const std::string& detail) {
    throw ShapeError(std::string(op) + ": " + detail);
}

void require_rank2(const Tensor& t, const char* op) {
    if (t.rank() != 2) shape_fail(op, "expected rank-2 operand, got " + shape_str(t.shape));
}

void require_rank4(const Tensor& t, const char* op) {
    if (t.rank() != 4) shape_fail(op, "expected rank-4 operand, got " + shape_str(t.shape));
}

}  // namespace

const char* op_name(Op op) {
    switch (op) {
        case Op::leaf: return "leaf";
        case Op::matmul: return "matmul";
        case Op::transpose2d: return "transpose";
        case Op::add: return "add";
        case Op::sub: return "sub";
        case Op::mul: return "mul";
        case Op::scalar_mul: return "scalar_mul";
        case Op::add_scalar: return "add_scalar";
        case Op::leaky_relu: return "leaky_relu";
        case Op::leaky_relu_mask: return "leaky_relu_mask";
        case Op::tanh_fn: return "tanh";
        case Op::sigmoid_fn: return "sigmoid";
        case Op::square: return "square";
        case Op::sqrt_guard: return "sqrt_guarded";
        case Op::recip: return "recip";
        case Op::log_guard: return "log_guarded";
        case Op::max_const: return "max_with_constant";
        case Op::gt_const_mask: return "gt_const_mask";
        case Op::sum_all: return "sum";
        case Op::mean_all: return "mean";
        case Op::sum_rows: return "sum_rows";
        case Op::tile_rows: return "tile_rows";
        case Op::sum_cols: return "sum_cols";
        case Op::tile_cols: return "tile_cols";
        case Op::slice_cols: return "slice_cols";
        case Op::pad_cols: return "pad_cols";
        case Op::concat_cols: return "concat_cols";
        case Op::reshape_view: return "reshape";
        case Op::broadcast_scalar: return "broadcast_scalar";
        case Op::downsample_avg: return "downsample";
        case Op::upsample_rep: return "upsample_repeat";
    }
    return "?";
}

void Graph::check_id(NodeId id, const char* who) const {
    if (id < 0 || static_cast<size_t>(id) >= nodes_.size()) {
        throw ValueError(std::string(who) + ": node id " + std::to_string(id) + " out of range");
    }
}

NodeId Graph::push(Node n) {
    nodes_.push_back(std::move(n));
    return static_cast<NodeId>(nodes_.size() - 1);
}

NodeId Graph::param(Tensor v) {
    Node n;
    n.op = Op::leaf;
    n.value = std::move(v);
    n.requires_grad = true;
    n.is_param = true;
    return push(std::move(n));
}

NodeId Graph::constant(Tensor v) {
    Node n;
    n.op = Op::leaf;
    n.value = std::move(v);
    return push(std::move(n));
}

NodeId Graph::constant(double v) { return constant(Tensor::scalar(v)); }

const Tensor& Graph::value(NodeId id) const {
    check_id(id, "value");
    return nodes_[static_cast<size_t>(id)].value;
}

const Node& Graph::node(NodeId id) const {
    check_id(id, "node");
    return nodes_[static_cast<size_t>(id)];
}

// ---------------------------------------------------------------------------
// op builders (eager evaluation)
// ---------------------------------------------------------------------------

NodeId Graph::matmul(NodeId a, NodeId b) {
    check_id(a, "matmul");
    check_id(b, "matmul");
    const Tensor& ta = val(a);
    const Tensor& tb = val(b);
    require_rank2(ta, "matmul");
    require_rank2(tb, "matmul");
    if (ta.cols() != tb.rows()) {
        shape_fail("matmul", "cannot multiply " + shape_str(ta.shape) + " by " + shape_str(tb.shape));
    }
    const size_t m = ta.rows(), k = ta.cols(), n = tb.cols();
    Tensor out = Tensor::zeros({m, n});
    for (size_t i = 0; i < m; ++i) {
        const double* arow = &ta.data[i * k];
        double* orow = &out.data[i * n];
        for (size_t p = 0; p < k; ++p) {
            const double aik = arow[p];
            const double* brow = &tb.data[p * n];
            for (size_t j = 0; j < n; ++j) orow[j] += aik * brow[j];
        }
    }
    Node node;
    node.op = Op::matmul;
    node.in = {a, b};
    node.value = std::move(out);
    node.requires_grad = nodes_[a].requires_grad || nodes_[b].requires_grad;
    return push(std::move(node));
}

NodeId Graph::transpose(NodeId a) {
    check_id(a, "transpose");
    const Tensor& t = val(a);
    require_rank2(t, "transpose");
    const size_t m = t.rows(), n = t.cols();
    Tensor out = Tensor::zeros({n, m});
    for (size_t i = 0; i < m; ++i)
        for (size_t j = 0; j < n; ++j) out.data[j * m + i] = t.data[i * n + j];
    Node node;
    node.op = Op::transpose2d;
    node.in = {a, kNoNode};
    node.value = std::move(out);
    node.requires_grad = nodes_[a].requires_grad;
    return push(std::move(node));
}

namespace {

Tensor elementwise2(const Tensor& x, const Tensor& y, const char* op, double (*f)(double, double)) {
    if (!x.same_shape(y)) {
        shape_fail(op, "operand shapes " + shape_str(x.shape) + " and " + shape_str(y.shape) + " differ");
    }
    Tensor out = x;
    for (size_t i = 0; i < out.data.size(); ++i) out.data[i] = f(x.data[i], y.data[i]);
    return out;
}

}  // namespace

NodeId Graph::add(NodeId a, NodeId b) {
    check_id(a, "add");
    check_id(b, "add");
    Node node;
    node.op = Op::add;
    node.in = {a, b};
    node.value = elementwise2(val(a), val(b), "add", [](double x, double y) { return x + y; });
    node.requires_grad = nodes_[a].requires_grad || nodes_[b].requires_grad;
    return push(std::move(node));
}

NodeId Graph::sub(NodeId a, NodeId b) {
    check_id(a, "sub");
    check_id(b, "sub");
    Node node;
    node.op = Op::sub;
    node.in = {a, b};
    node.value = elementwise2(val(a), val(b), "sub", [](double x, double y) { return x - y; });
    node.requires_grad = nodes_[a].requires_grad || nodes_[b].requires_grad;
    return push(std::move(node));
}

NodeId Graph::mul(NodeId a, NodeId b) {
    check_id(a, "mul");
    check_id(b, "mul");
    Node node;
    node.op = Op::mul;
    node.in = {a, b};
    node.value = elementwise2(val(a), val(b), "mul", [](double x, double y) { return x * y; });
    node.requires_grad = nodes_[a].requires_grad || nodes_[b].requires_grad;
    return push(std::move(node));
}

namespace {

template <class F>
Node unary_node(Op op, NodeId a, const Node& src, F f) {
    Node node;
    node.op = op;
    node.in = {a, kNoNode};
    node.value = src.value;
    for (double& v : node.value.data) v = f(v);
    node.requires_grad = src.requires_grad;
    return node;
}

}  // namespace

NodeId Graph::scalar_mul(NodeId a, double c) {
    check_id(a, "scalar_mul");
    Node node = unary_node(Op::scalar_mul, a, nodes_[a], [c](double v) { return c * v; });
    node.c = c;
    return push(std::move(node));
}

NodeId Graph::add_scalar(NodeId a, double c) {
    check_id(a, "add_scalar");
    Node node = unary_node(Op::add_scalar, a, nodes_[a], [c](double v) { return v + c; });
    node.c = c;
    return push(std::move(node));
}

NodeId Graph::leaky_relu(NodeId a, double slope) {
    check_id(a, "leaky_relu");
    Node node =
        unary_node(Op::leaky_relu, a, nodes_[a], [slope](double v) { return v > 0.0 ? v : slope * v; });
    node.c = slope;
    return push(std::move(node));
}

NodeId Graph::leaky_relu_mask(NodeId a, double slope) {
    check_id(a, "leaky_relu_mask");
    Node node = unary_node(Op::leaky_relu_mask, a, nodes_[a],
                           [slope](double v) { return v > 0.0 ? 1.0 : slope; });
    node.c = slope;
    node.requires_grad = false;  // derivative is 0 a.e.; nothing flows through
    return push(std::move(node));
}

NodeId Graph::tanh(NodeId a) {
    check_id(a, "tanh");
    return push(unary_node(Op::tanh_fn, a, nodes_[a], [](double v) { return std::tanh(v); }));
}

NodeId Graph::sigmoid(NodeId a) {
    check_id(a, "sigmoid");
    return push(unary_node(Op::sigmoid_fn, a, nodes_[a],
                           [](double v) { return 1.0 / (1.0 + std::exp(-v)); }));
}

NodeId Graph::square(NodeId a) {
    check_id(a, "square");
    return push(unary_node(Op::square, a, nodes_[a], [](double v) { return v * v; }));
}

NodeId Graph::sqrt_guarded(NodeId a) {
    check_id(a, "sqrt_guarded");
    return push(unary_node(Op::sqrt_guard, a, nodes_[a],
                           [](double v) { return std::sqrt(v + kSqrtGuardEps); }));
}

NodeId Graph::recip(NodeId a) {
    check_id(a, "recip");
    return push(unary_node(Op::recip, a, nodes_[a], [](double v) { return 1.0 / v; }));
}

NodeId Graph::log_guarded(NodeId a) {
    check_id(a, "log_guarded");
    return push(unary_node(Op::log_guard, a, nodes_[a],
                           [](double v) { return std::log(v > kLogGuardEps ? v : kLogGuardEps); }));
}

NodeId Graph::max_with_constant(NodeId a, double c) {
    check_id(a, "max_with_constant");
    Node node = unary_node(Op::max_const, a, nodes_[a], [c](double v) { return v > c ? v : c; });
    node.c = c;
    return push(std::move(node));
}

NodeId Graph::gt_const_mask(NodeId a, double c) {
    check_id(a, "gt_const_mask");
    Node node = unary_node(Op::gt_const_mask, a, nodes_[a], [c](double v) { return v > c ? 1.0 : 0.0; });
    node.c = c;
    node.requires_grad = false;
    return push(std::move(node));
}

NodeId Graph::sum(NodeId a) {
    check_id(a, "sum");
    double s = 0.0;
    for (double v : val(a).data) s += v;
    Node node;
    node.op = Op::sum_all;
    node.in = {a, kNoNode};
    node.value = Tensor::scalar(s);
    node.requires_grad = nodes_[a].requires_grad;
    return push(std::move(node));
}

NodeId Graph::mean(NodeId a) {
    check_id(a, "mean");
    double s = 0.0;
    for (double v : val(a).data) s += v;
    Node node;
    node.op = Op::mean_all;
    node.in = {a, kNoNode};
    node.value = Tensor::scalar(s / static_cast<double>(val(a).numel()));
    node.requires_grad = nodes_[a].requires_grad;
    return push(std::move(node));
}

NodeId Graph::sum_rows(NodeId a) {
    check_id(a, "sum_rows");
    const Tensor& t = val(a);
    require_rank2(t, "sum_rows");
    const size_t m = t.rows(), n = t.cols();
    Tensor out = Tensor::zeros({n});
    for (size_t i = 0; i < m; ++i)
        for (size_t j = 0; j < n; ++j) out.data[j] += t.data[i * n + j];
    Node node;
    node.op = Op::sum_rows;
    node.in = {a, kNoNode};
    node.value = std::move(out);
    node.requires_grad = nodes_[a].requires_grad;
    return push(std::move(node));
}

NodeId Graph::tile_rows(NodeId a, size_t m) {
    check_id(a, "tile_rows");
    const Tensor& t = val(a);
    if (t.rank() != 1) shape_fail("tile_rows", "expected rank-1 operand, got " + shape_str(t.shape));
    if (m == 0) shape_fail("tile_rows", "row count must be positive");
    const size_t n = t.shape[0];
    Tensor out = Tensor::zeros({m, n});
    for (size_t i = 0; i < m; ++i)
        for (size_t j = 0; j < n; ++j) out.data[i * n + j] = t.data[j];
    Node node;
    node.op = Op::tile_rows;
    node.in = {a, kNoNode};
    node.k0 = m;
    node.value = std::move(out);
    node.requires_grad = nodes_[a].requires_grad;
    return push(std::move(node));
}

NodeId Graph::sum_cols(NodeId a) {
    check_id(a, "sum_cols");
    const Tensor& t = val(a);
    require_rank2(t, "sum_cols");
    const size_t m = t.rows(), n = t.cols();
    Tensor out = Tensor::zeros({m, 1});
    for (size_t i = 0; i < m; ++i) {
        double s = 0.0;
        for (size_t j = 0; j < n; ++j) s += t.data[i * n + j];
        out.data[i] = s;
    }
    Node node;
    node.op = Op::sum_cols;
    node.in = {a, kNoNode};
    node.value = std::move(out);
    node.requires_grad = nodes_[a].requires_grad;
    return push(std::move(node));
}

NodeId Graph::tile_cols(NodeId a, size_t n) {
    check_id(a, "tile_cols");
    const Tensor& t = val(a);
    require_rank2(t, "tile_cols");
    if (t.cols() != 1) shape_fail("tile_cols", "expected [m,1] operand, got " + shape_str(t.shape));
    if (n == 0) shape_fail("tile_cols", "column count must be positive");
    const size_t m = t.rows();
    Tensor out = Tensor::zeros({m, n});
    for (size_t i = 0; i < m; ++i)
        for (size_t j = 0; j < n; ++j) out.data[i * n + j] = t.data[i];
    Node node;
    node.op = Op::tile_cols;
    node.in = {a, kNoNode};
    node.k0 = n;
    node.value = std::move(out);
    node.requires_grad = nodes_[a].requires_grad;
    return push(std::move(node));
}

NodeId Graph::slice_cols(NodeId a, size_t lo, size_t hi) {
    check_id(a, "slice_cols");
    const Tensor& t = val(a);
    require_rank2(t, "slice_cols");
    const size_t m = t.rows(), n = t.cols();
    if (lo >= hi || hi > n) {
        shape_fail("slice_cols", "range [" + std::to_string(lo) + "," + std::to_string(hi) +
                                     ") invalid for " + shape_str(t.shape));
    }
    const size_t w = hi - lo;
    Tensor out = Tensor::zeros({m, w});
    for (size_t i = 0; i < m; ++i)
        for (size_t j = 0; j < w; ++j) out.data[i * w + j] = t.data[i * n + lo + j];
    Node node;
    node.op = Op::slice_cols;
    node.in = {a, kNoNode};
    node.k0 = lo;
    node.k1 = hi;
    node.value = std::move(out);
    node.requires_grad = nodes_[a].requires_grad;
    return push(std::move(node));
}

NodeId Graph::pad_cols(NodeId a, size_t lo, size_t total) {
    check_id(a, "pad_cols");
    const Tensor& t = val(a);
    require_rank2(t, "pad_cols");
    const size_t m = t.rows(), w = t.cols();
    if (lo + w > total) {
        shape_fail("pad_cols", "cannot place " + shape_str(t.shape) + " at column " +
                                   std::to_string(lo) + " of width " + std::to_string(total));
    }
    Tensor out = Tensor::zeros({m, total});
    for (size_t i = 0; i < m; ++i)
        for (size_t j = 0; j < w; ++j) out.data[i * total + lo + j] = t.data[i * w + j];
    Node node;
    node.op = Op::pad_cols;
    node.in = {a, kNoNode};
    node.k0 = lo;
    node.k1 = total;
    node.value = std::move(out);
    node.requires_grad = nodes_[a].requires_grad;
    return push(std::move(node));
}

NodeId Graph::concat_cols(NodeId a, NodeId b) {
    check_id(a, "concat_cols");
    check_id(b, "concat_cols");
    const Tensor& ta = val(a);
    const Tensor& tb = val(b);
    require_rank2(ta, "concat_cols");
    require_rank2(tb, "concat_cols");
    if (ta.rows() != tb.rows()) {
        shape_fail("concat_cols",
                   "row counts of " + shape_str(ta.shape) + " and " + shape_str(tb.shape) + " differ");
    }
    const size_t m = ta.rows(), p = ta.cols(), q = tb.cols();
    Tensor out = Tensor::zeros({m, p + q});
    for (size_t i = 0; i < m; ++i) {
        for (size_t j = 0; j < p; ++j) out.data[i * (p + q) + j] = ta.data[i * p + j];
        for (size_t j = 0; j < q; ++j) out.data[i * (p + q) + p + j] = tb.data[i * q + j];
    }
    Node node;
    node.op = Op::concat_cols;
    node.in = {a, b};
    node.value = std::move(out);
    node.requires_grad = nodes_[a].requires_grad || nodes_[b].requires_grad;
    return push(std::move(node));
}

NodeId Graph::reshape(NodeId a, std::vector<size_t> shape) {
    check_id(a, "reshape");
    const Tensor& t = val(a);
    if (shape_numel(shape) != t.numel()) {
        shape_fail("reshape", "cannot view " + shape_str(t.shape) + " as " + shape_str(shape));
    }
    Node node;
    node.op = Op::reshape_view;
    node.in = {a, kNoNode};
    node.shape_attr = shape;
    node.value = Tensor(std::move(shape), t.data);
    node.requires_grad = nodes_[a].requires_grad;
    return push(std::move(node));
}

NodeId Graph::broadcast_scalar(NodeId a, std::vector<size_t> shape) {
    check_id(a, "broadcast_scalar");
    const Tensor& t = val(a);
    if (t.numel() != 1) {
        shape_fail("broadcast_scalar", "expected single-element operand, got " + shape_str(t.shape));
    }
    Node node;
    node.op = Op::broadcast_scalar;
    node.in = {a, kNoNode};
    node.shape_attr = shape;
    node.value = Tensor::full(std::move(shape), t.data[0]);
    node.requires_grad = nodes_[a].requires_grad;
    return push(std::move(node));
}

NodeId Graph::downsample(NodeId a, size_t k) {
    check_id(a, "downsample");
    const Tensor& t = val(a);
    require_rank4(t, "downsample");
    if (k == 0) shape_fail("downsample", "factor must be positive");
    const size_t b = t.shape[0], w = t.shape[1], h = t.shape[2], c = t.shape[3];
    if (w % k != 0 || h % k != 0) {
        shape_fail("downsample", "factor " + std::to_string(k) + " does not divide " + shape_str(t.shape));
    }
    const size_t wo = w / k, ho = h / k;
    Tensor out = Tensor::zeros({b, wo, ho, c});
    const double inv = 1.0 / static_cast<double>(k * k);
    for (size_t bi = 0; bi < b; ++bi)
        for (size_t wi = 0; wi < wo; ++wi)
            for (size_t hi = 0; hi < ho; ++hi)
                for (size_t ci = 0; ci < c; ++ci) {
                    double s = 0.0;
                    for (size_t dw = 0; dw < k; ++dw)
                        for (size_t dh = 0; dh < k; ++dh) {
                            s += t.data[((bi * w + wi * k + dw) * h + hi * k + dh) * c + ci];
                        }
                    out.data[((bi * wo + wi) * ho + hi) * c + ci] = s * inv;
                }
    Node node;
    node.op = Op::downsample_avg;
    node.in = {a, kNoNode};
    node.k0 = k;
    node.value = std::move(out);
    node.requires_grad = nodes_[a].requires_grad;
    return push(std::move(node));
}

NodeId Graph::upsample_repeat(NodeId a, size_t k) {
    check_id(a, "upsample_repeat");
    const Tensor& t = val(a);
    require_rank4(t, "upsample_repeat");
    if (k == 0) shape_fail("upsample_repeat", "factor must be positive");
    const size_t b = t.shape[0], w = t.shape[1], h = t.shape[2], c = t.shape[3];
    const size_t wo = w * k, ho = h * k;
    Tensor out = Tensor::zeros({b, wo, ho, c});
    for (size_t bi = 0; bi < b; ++bi)
        for (size_t wi = 0; wi < wo; ++wi)
            for (size_t hi = 0; hi < ho; ++hi)
                for (size_t ci = 0; ci < c; ++ci) {
                    out.data[((bi * wo + wi) * ho + hi) * c + ci] =
                        t.data[((bi * w + wi / k) * h + hi / k) * c + ci];
                }
    Node node;
    node.op = Op::upsample_rep;
    node.in = {a, kNoNode};
    node.k0 = k;
    node.value = std::move(out);
    node.requires_grad = nodes_[a].requires_grad;
    return push(std::move(node));
}

// ---------------------------------------------------------------------------
// adjoint construction
// ---------------------------------------------------------------------------

void Graph::accumulate(std::vector<NodeId>& adj, NodeId target, NodeId contrib) {
    if (target >= static_cast<NodeId>(adj.size())) return;  // node created during this pass
    adj[static_cast<size_t>(target)] =
        adj[static_cast<size_t>(target)] == kNoNode ? contrib : add(adj[static_cast<size_t>(target)], contrib);
}

void Graph::vjp(NodeId id, NodeId up, std::vector<NodeId>& adj) {
    const Node& n = nodes_[static_cast<size_t>(id)];
    const NodeId a = n.in[0];
    const NodeId b = n.in[1];
    const bool need_a = a != kNoNode && nodes_[static_cast<size_t>(a)].requires_grad;
    const bool need_b = b != kNoNode && nodes_[static_cast<size_t>(b)].requires_grad;
    if (!need_a && !need_b) return;

    switch (n.op) {
        case Op::leaf:
            return;
        case Op::matmul:
            if (need_a) accumulate(adj, a, matmul(up, transpose(b)));
            if (need_b) accumulate(adj, b, matmul(transpose(a), up));
            return;
        case Op::transpose2d:
            accumulate(adj, a, transpose(up));
            return;
        case Op::add:
            if (need_a) accumulate(adj, a, up);
            if (need_b) accumulate(adj, b, up);
            return;
        case Op::sub:
            if (need_a) accumulate(adj, a, up);
            if (need_b) accumulate(adj, b, scalar_mul(up, -1.0));
            return;
        case Op::mul:
            if (need_a) accumulate(adj, a, mul(up, b));
            if (need_b) accumulate(adj, b, mul(up, a));
            return;
        case Op::scalar_mul:
            accumulate(adj, a, scalar_mul(up, n.c));
            return;
        case Op::add_scalar:
            accumulate(adj, a, up);
            return;
        case Op::leaky_relu:
            accumulate(adj, a, mul(up, leaky_relu_mask(a, n.c)));
            return;
        case Op::tanh_fn:
            // 1 - tanh(x)^2, in terms of the cached output
            accumulate(adj, a, mul(up, add_scalar(scalar_mul(square(id), -1.0), 1.0)));
            return;
        case Op::sigmoid_fn:
            // s(1 - s)
            accumulate(adj, a, mul(up, mul(id, add_scalar(scalar_mul(id, -1.0), 1.0))));
            return;
        case Op::square:
            accumulate(adj, a, mul(up, scalar_mul(a, 2.0)));
            return;
        case Op::sqrt_guard:
            // d sqrt(x+eps)/dx = 0.5 / sqrt(x+eps)
            accumulate(adj, a, mul(up, scalar_mul(recip(id), 0.5)));
            return;
        case Op::recip:
            // d(1/x)/dx = -1/x^2
            accumulate(adj, a, scalar_mul(mul(up, square(id)), -1.0));
            return;
        case Op::log_guard:
            accumulate(adj, a, mul(up, recip(max_with_constant(a, kLogGuardEps))));
            return;
        case Op::max_const:
            accumulate(adj, a, mul(up, gt_const_mask(a, n.c)));
            return;
        case Op::sum_all:
            accumulate(adj, a, broadcast_scalar(up, val(a).shape));
            return;
        case Op::mean_all:
            accumulate(adj, a,
                       scalar_mul(broadcast_scalar(up, val(a).shape),
                                  1.0 / static_cast<double>(val(a).numel())));
            return;
        case Op::sum_rows:
            accumulate(adj, a, tile_rows(up, val(a).rows()));
            return;
        case Op::tile_rows:
            accumulate(adj, a, sum_rows(up));
            return;
        case Op::sum_cols:
            accumulate(adj, a, tile_cols(up, val(a).cols()));
            return;
        case Op::tile_cols:
            accumulate(adj, a, sum_cols(up));
            return;
        case Op::slice_cols:
            accumulate(adj, a, pad_cols(up, n.k0, val(a).cols()));
            return;
        case Op::pad_cols:
            accumulate(adj, a, slice_cols(up, n.k0, n.k0 + val(a).cols()));
            return;
        case Op::concat_cols:
            if (need_a) accumulate(adj, a, slice_cols(up, 0, val(a).cols()));
            if (need_b) accumulate(adj, b, slice_cols(up, val(a).cols(), val(a).cols() + val(b).cols()));
            return;
        case Op::reshape_view:
            accumulate(adj, a, reshape(up, val(a).shape));
            return;
        case Op::broadcast_scalar:
            accumulate(adj, a, reshape(sum(up), val(a).shape));
            return;
        case Op::downsample_avg:
            accumulate(adj, a, scalar_mul(upsample_repeat(up, n.k0),
                                          1.0 / static_cast<double>(n.k0 * n.k0)));
            return;
        case Op::upsample_rep:
            // each input pixel fans out to k*k outputs; block mean times k^2 is the block sum
            accumulate(adj, a, scalar_mul(downsample(up, n.k0), static_cast<double>(n.k0 * n.k0)));
            return;
        case Op::leaky_relu_mask:
        case Op::gt_const_mask:
            return;  // derivative 0 a.e.; nothing to propagate
    }
    throw ValueError(std::string("backward: no differentiable-gradient rule registered for op ") +
                     op_name(n.op));
}

std::vector<NodeId> Graph::adjoint_pass(NodeId root) {
    check_id(root, "backward");
    const Tensor& rv = val(root);
    if (rv.numel() != 1) {
        throw ShapeError("backward: root must hold a single element, got " + shape_str(rv.shape));
    }
    std::vector<NodeId> adj(static_cast<size_t>(root) + 1, kNoNode);
    adj[static_cast<size_t>(root)] = constant(Tensor::full(rv.shape, 1.0));
    // Reverse id order: every consumer of node i has id > i, so adj[i] is
    // complete by the time we expand node i. Each original node is visited once.
    for (NodeId i = root; i >= 0; --i) {
        const NodeId up = adj[static_cast<size_t>(i)];
        if (up == kNoNode) continue;
        if (!nodes_[static_cast<size_t>(i)].requires_grad) continue;
        vjp(i, up, adj);
    }
    return adj;
}

GradientMap Graph::backward(NodeId root) {
    const size_t n_before = static_cast<size_t>(root) + 1;
    std::vector<NodeId> adj = adjoint_pass(root);
    GradientMap grads;
    for (size_t i = 0; i < n_before; ++i) {
        const Node& n = nodes_[i];
        if (!n.is_param) continue;
        const NodeId g = adj[i];
        grads.emplace(static_cast<NodeId>(i),
                      g == kNoNode ? Tensor::zeros(n.value.shape) : val(g));
    }
    return grads;
}

NodeId Graph::grad_as_graph(NodeId root, NodeId wrt_leaf) {
    check_id(wrt_leaf, "grad_as_graph");
    const Node& leaf = nodes_[static_cast<size_t>(wrt_leaf)];
    if (leaf.op != Op::leaf) {
        throw ValueError("grad_as_graph: node " + std::to_string(wrt_leaf) + " is not a leaf");
    }
    if (wrt_leaf > root) {
        throw ValueError("grad_as_graph: leaf " + std::to_string(wrt_leaf) +
                         " is not in the subgraph of root " + std::to_string(root));
    }
    std::vector<NodeId> adj = adjoint_pass(root);
    const NodeId g = adj[static_cast<size_t>(wrt_leaf)];
    return g == kNoNode ? constant(Tensor::zeros(leaf.value.shape)) : g;
}

// ---------------------------------------------------------------------------
// composites
// ---------------------------------------------------------------------------

NodeId add_bias(Graph& g, NodeId x, NodeId b) {
    return g.add(x, g.tile_rows(b, g.value(x).rows()));
}

NodeId l2_norm_rows(Graph& g, NodeId x) {
    return g.sqrt_guarded(g.sum_cols(g.square(x)));
}

NodeId hinge_sq(Graph& g, NodeId u) {
    return g.square(g.max_with_constant(u, 0.0));
}

}  // namespace wganc::ad
