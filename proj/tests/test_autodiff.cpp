#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "testutil.hpp"
#include "wganc/error.hpp"
#include "wganc/graph.hpp"

using namespace wganc;
using namespace wganc::ad;
using namespace wganc::testutil;

namespace {

// Scalar root with non-uniform weights so gradients are not all ones. Weights
// come from a fixed per-case seed so rebuilding the graph (as the
// finite-difference oracle does) evaluates the exact same function.
NodeId weighted_sum(Graph& g, NodeId x, uint64_t seed) {
    Rng rng(seed);
    Tensor w = Tensor::zeros(g.value(x).shape);
    for (double& v : w.data) v = rng.uniform(-1.5, 1.5);
    return g.sum(g.mul(x, g.constant(w)));
}

}  // namespace

TEST_CASE("tensor invariants") {
    CHECK_THROWS_AS(Tensor({2, 3}, {1.0, 2.0}), ShapeError);
    CHECK_THROWS_AS(Tensor({0}, {}), ShapeError);
    Tensor t = Tensor::row_major({2, 2}, {1, 2, 3, 4});
    CHECK(t.numel() == 4);
    CHECK(t.at(1, 0) == 3.0);
}

TEST_CASE("forward examples") {
    Graph g;
    SUBCASE("matmul") {
        NodeId a = g.constant(Tensor::row_major({2, 2}, {1, 2, 3, 4}));
        NodeId b = g.constant(Tensor::row_major({2, 1}, {1, 1}));
        const Tensor& y = g.value(g.matmul(a, b));
        CHECK(y.shape == std::vector<size_t>{2, 1});
        CHECK(y.data[0] == 3.0);
        CHECK(y.data[1] == 7.0);
    }
    SUBCASE("mean") {
        NodeId x = g.constant(Tensor::row_major({3}, {2, 4, 6}));
        CHECK(g.value(g.mean(x)).data[0] == 4.0);
    }
    SUBCASE("leaky_relu") {
        NodeId x = g.constant(Tensor::row_major({2}, {-1.0, 1.5}));
        const Tensor& y = g.value(g.leaky_relu(x, 0.2));
        CHECK(y.data[0] == doctest::Approx(-0.2));
        CHECK(y.data[1] == doctest::Approx(1.5));
    }
    SUBCASE("shape mismatch names the op and shapes") {
        NodeId a = g.constant(Tensor::zeros({2, 3}));
        NodeId b = g.constant(Tensor::zeros({2, 3}));
        try {
            g.matmul(a, b);
            FAIL("expected ShapeError");
        } catch (const ShapeError& e) {
            std::string msg = e.what();
            CHECK(msg.find("matmul") != std::string::npos);
            CHECK(msg.find("[2,3]") != std::string::npos);
        }
        CHECK_THROWS_AS(g.add(a, g.constant(Tensor::zeros({3, 2}))), ShapeError);
    }
    SUBCASE("forward is cached and deterministic") {
        NodeId x = g.constant(Tensor::row_major({2}, {0.3, -0.7}));
        NodeId y = g.tanh(x);
        Tensor first = g.value(y);
        CHECK(g.value(y).data == first.data);
    }
}

TEST_CASE("backward examples") {
    SUBCASE("d/dx sum(x*x) at [1,2]") {
        Graph g;
        NodeId x = g.param(Tensor::row_major({2}, {1, 2}));
        GradientMap gm = g.backward(g.sum(g.mul(x, x)));
        CHECK(gm.at(x).data[0] == doctest::Approx(2.0));
        CHECK(gm.at(x).data[1] == doctest::Approx(4.0));
    }
    SUBCASE("d/dW sum(Wx) is the outer structure") {
        Graph g;
        NodeId w = g.param(Tensor::zeros({1, 2}));
        NodeId x = g.constant(Tensor::row_major({2, 1}, {1, 2}));
        GradientMap gm = g.backward(g.sum(g.matmul(w, x)));
        CHECK(gm.at(w).data == std::vector<double>{1.0, 2.0});
    }
    SUBCASE("non-scalar root rejected") {
        Graph g;
        NodeId x = g.param(Tensor::zeros({3}));
        CHECK_THROWS_AS(g.backward(g.mul(x, x)), ShapeError);
    }
    SUBCASE("fan-out accumulates additively") {
        Graph g;
        NodeId x = g.param(Tensor::row_major({2}, {0.5, -1.0}));
        // y = sum(x*x + x); dy/dx = 2x + 1
        GradientMap gm = g.backward(g.sum(g.add(g.mul(x, x), x)));
        CHECK(gm.at(x).data[0] == doctest::Approx(2.0));
        CHECK(gm.at(x).data[1] == doctest::Approx(-1.0));
    }
    SUBCASE("every param leaf gets an entry; unreachable ones are zero") {
        Graph g;
        NodeId used = g.param(Tensor::row_major({2}, {1, 1}));
        NodeId unused = g.param(Tensor::zeros({3}));
        GradientMap gm = g.backward(g.sum(used));
        CHECK(gm.size() == 2);
        CHECK(gm.at(unused).data == std::vector<double>{0, 0, 0});
    }
}

TEST_CASE("grad_as_graph examples") {
    SUBCASE("f=sum(x*x) gives node valued 2x") {
        Graph g;
        NodeId x = g.param(Tensor::row_major({1}, {3}));
        NodeId gx = g.grad_as_graph(g.sum(g.mul(x, x)), x);
        CHECK(g.value(gx).data[0] == doctest::Approx(6.0));
    }
    SUBCASE("penalty chain d(4x^2)/dx = 8x") {
        Graph g;
        NodeId x = g.param(Tensor::row_major({1}, {1}));
        NodeId f = g.sum(g.mul(x, x));
        NodeId gx = g.grad_as_graph(f, x);       // 2x
        NodeId s = g.sum(g.mul(gx, gx));         // 4x^2
        GradientMap gm = g.backward(s);
        CHECK(gm.at(x).data[0] == doctest::Approx(8.0));
    }
    SUBCASE("non-leaf argument rejected") {
        Graph g;
        NodeId x = g.param(Tensor::row_major({1}, {2}));
        NodeId y = g.square(x);
        CHECK_THROWS_AS(g.grad_as_graph(g.sum(y), y), ValueError);
    }
    SUBCASE("leaf with no path gets explicit zeros") {
        Graph g;
        NodeId x = g.param(Tensor::row_major({2}, {1, 2}));
        NodeId z = g.param(Tensor::row_major({2}, {3, 4}));
        NodeId gz = g.grad_as_graph(g.sum(g.square(x)), z);
        CHECK(g.value(gz).data == std::vector<double>{0, 0});
    }
}

TEST_CASE("gradient check: every primitive matches central finite differences") {
    Rng rng(20240811);
    constexpr double kTol = 1e-4;
    constexpr int kCases = 25;

    auto run = [&](const char* name, auto make_case) {
        double worst = 0.0;
        for (int i = 0; i < kCases; ++i) {
            auto [build, inputs] = make_case(rng);
            worst = std::max(worst, gradcheck(build, inputs));
        }
        INFO(name);
        CHECK(worst < kTol);
    };

    run("matmul", [](Rng& r) {
        size_t m = 2 + r.index(3), k = 2 + r.index(3), n = 2 + r.index(3);
        std::vector<Tensor> in = {random_tensor({m, k}, r), random_tensor({k, n}, r)};
        uint64_t ws = r.next_u64();
        ScalarBuilder b = [ws](Graph& g, const std::vector<NodeId>& ls) {
            return weighted_sum(g, g.matmul(ls[0], ls[1]), ws);
        };
        return std::pair(b, in);
    });
    run("transpose", [](Rng& r) {
        std::vector<Tensor> in = {random_tensor({3, 2}, r)};
        uint64_t ws = r.next_u64();
        ScalarBuilder b = [ws](Graph& g, const std::vector<NodeId>& ls) {
            return weighted_sum(g, g.transpose(ls[0]), ws);
        };
        return std::pair(b, in);
    });
    run("add/sub/mul", [](Rng& r) {
        std::vector<Tensor> in = {random_tensor({2, 3}, r), random_tensor({2, 3}, r)};
        uint64_t ws = r.next_u64();
        ScalarBuilder b = [ws](Graph& g, const std::vector<NodeId>& ls) {
            NodeId y = g.add(g.mul(ls[0], ls[1]), g.sub(ls[0], ls[1]));
            return weighted_sum(g, y, ws);
        };
        return std::pair(b, in);
    });
    run("scalar_mul/add_scalar", [](Rng& r) {
        std::vector<Tensor> in = {random_tensor({4}, r)};
        double c = r.uniform(-2, 2);
        uint64_t ws = r.next_u64();
        ScalarBuilder b = [ws, c](Graph& g, const std::vector<NodeId>& ls) {
            return weighted_sum(g, g.add_scalar(g.scalar_mul(ls[0], c), 0.7), ws);
        };
        return std::pair(b, in);
    });
    run("leaky_relu", [](Rng& r) {
        std::vector<Tensor> in = {random_tensor_away_from({3, 3}, r, 0.0, 0.05)};
        uint64_t ws = r.next_u64();
        ScalarBuilder b = [ws](Graph& g, const std::vector<NodeId>& ls) {
            return weighted_sum(g, g.leaky_relu(ls[0], 0.2), ws);
        };
        return std::pair(b, in);
    });
    run("tanh", [](Rng& r) {
        std::vector<Tensor> in = {random_tensor({5}, r)};
        uint64_t ws = r.next_u64();
        ScalarBuilder b = [ws](Graph& g, const std::vector<NodeId>& ls) {
            return weighted_sum(g, g.tanh(ls[0]), ws);
        };
        return std::pair(b, in);
    });
    run("sigmoid", [](Rng& r) {
        std::vector<Tensor> in = {random_tensor({5}, r)};
        uint64_t ws = r.next_u64();
        ScalarBuilder b = [ws](Graph& g, const std::vector<NodeId>& ls) {
            return weighted_sum(g, g.sigmoid(ls[0]), ws);
        };
        return std::pair(b, in);
    });
    run("square", [](Rng& r) {
        std::vector<Tensor> in = {random_tensor({4}, r)};
        uint64_t ws = r.next_u64();
        ScalarBuilder b = [ws](Graph& g, const std::vector<NodeId>& ls) {
            return weighted_sum(g, g.square(ls[0]), ws);
        };
        return std::pair(b, in);
    });
    run("sqrt_guarded", [](Rng& r) {
        std::vector<Tensor> in = {random_tensor({4}, r, 0.1, 2.0)};
        uint64_t ws = r.next_u64();
        ScalarBuilder b = [ws](Graph& g, const std::vector<NodeId>& ls) {
            return weighted_sum(g, g.sqrt_guarded(ls[0]), ws);
        };
        return std::pair(b, in);
    });
    run("recip", [](Rng& r) {
        std::vector<Tensor> in = {random_tensor({4}, r, 0.2, 2.0)};
        uint64_t ws = r.next_u64();
        ScalarBuilder b = [ws](Graph& g, const std::vector<NodeId>& ls) {
            return weighted_sum(g, g.recip(ls[0]), ws);
        };
        return std::pair(b, in);
    });
    run("log_guarded", [](Rng& r) {
        std::vector<Tensor> in = {random_tensor({4}, r, 0.05, 2.0)};
        uint64_t ws = r.next_u64();
        ScalarBuilder b = [ws](Graph& g, const std::vector<NodeId>& ls) {
            return weighted_sum(g, g.log_guarded(ls[0]), ws);
        };
        return std::pair(b, in);
    });
    run("max_with_constant", [](Rng& r) {
        std::vector<Tensor> in = {random_tensor_away_from({4}, r, 0.3, 0.05)};
        uint64_t ws = r.next_u64();
        ScalarBuilder b = [ws](Graph& g, const std::vector<NodeId>& ls) {
            return weighted_sum(g, g.max_with_constant(ls[0], 0.3), ws);
        };
        return std::pair(b, in);
    });
    run("sum/mean", [](Rng& r) {
        std::vector<Tensor> in = {random_tensor({2, 3}, r)};
        ScalarBuilder b = [](Graph& g, const std::vector<NodeId>& ls) {
            return g.add(g.sum(ls[0]), g.scalar_mul(g.mean(ls[0]), 0.5));
        };
        return std::pair(b, in);
    });
    run("sum_rows/tile_rows", [](Rng& r) {
        std::vector<Tensor> in = {random_tensor({3, 4}, r), random_tensor({4}, r)};
        uint64_t ws = r.next_u64();
        ScalarBuilder b = [ws](Graph& g, const std::vector<NodeId>& ls) {
            NodeId y = g.mul(g.tile_rows(ls[1], 3), ls[0]);
            return weighted_sum(g, g.sum_rows(y), ws);
        };
        return std::pair(b, in);
    });
    run("sum_cols/tile_cols", [](Rng& r) {
        std::vector<Tensor> in = {random_tensor({3, 4}, r), random_tensor({3, 1}, r)};
        uint64_t ws = r.next_u64();
        ScalarBuilder b = [ws](Graph& g, const std::vector<NodeId>& ls) {
            NodeId y = g.mul(g.tile_cols(ls[1], 4), ls[0]);
            return weighted_sum(g, g.sum_cols(y), ws);
        };
        return std::pair(b, in);
    });
    run("slice/pad/concat", [](Rng& r) {
        std::vector<Tensor> in = {random_tensor({2, 5}, r), random_tensor({2, 3}, r)};
        uint64_t ws1 = r.next_u64(), ws2 = r.next_u64();
        ScalarBuilder b = [ws1, ws2](Graph& g, const std::vector<NodeId>& ls) {
            NodeId s = g.slice_cols(ls[0], 1, 4);
            NodeId p = g.pad_cols(ls[1], 2, 6);
            return g.add(weighted_sum(g, g.concat_cols(s, ls[1]), ws1), weighted_sum(g, p, ws2));
        };
        return std::pair(b, in);
    });
    run("reshape/broadcast_scalar", [](Rng& r) {
        std::vector<Tensor> in = {random_tensor({2, 6}, r), random_tensor({1}, r)};
        uint64_t ws = r.next_u64();
        ScalarBuilder b = [ws](Graph& g, const std::vector<NodeId>& ls) {
            NodeId y = g.mul(g.reshape(ls[0], {3, 4}), g.broadcast_scalar(ls[1], {3, 4}));
            return weighted_sum(g, y, ws);
        };
        return std::pair(b, in);
    });
    run("downsample/upsample", [](Rng& r) {
        std::vector<Tensor> in = {random_tensor({2, 4, 4, 2}, r, 0.0, 1.0)};
        uint64_t ws1 = r.next_u64(), ws2 = r.next_u64();
        ScalarBuilder b = [ws1, ws2](Graph& g, const std::vector<NodeId>& ls) {
            NodeId d = g.downsample(ls[0], 2);
            NodeId u = g.upsample_repeat(d, 2);
            return g.add(weighted_sum(g, d, ws1), weighted_sum(g, u, ws2));
        };
        return std::pair(b, in);
    });
    run("add_bias/l2_norm_rows/hinge_sq", [](Rng& r) {
        std::vector<Tensor> in = {random_tensor({3, 4}, r), random_tensor({4}, r)};
        ScalarBuilder b = [](Graph& g, const std::vector<NodeId>& ls) {
            NodeId y = add_bias(g, ls[0], ls[1]);
            NodeId n = l2_norm_rows(g, y);
            return g.mean(hinge_sq(g, g.add_scalar(n, -1.0)));
        };
        return std::pair(b, in);
    });
}

namespace {

// Hand-rolled 2-layer critic: leaky_relu hidden, affine out, [m,1].
NodeId tiny_critic(Graph& g, NodeId x, NodeId w1, NodeId b1, NodeId w2, NodeId b2,
                   bool tanh_hidden = false) {
    NodeId a1 = add_bias(g, g.matmul(x, g.transpose(w1)), b1);
    NodeId h = tanh_hidden ? g.tanh(a1) : g.leaky_relu(a1, 0.2);
    return add_bias(g, g.matmul(h, g.transpose(w2)), b2);
}

std::vector<Tensor> tiny_critic_params(size_t in_dim, size_t hidden, Rng& rng) {
    return {random_tensor({hidden, in_dim}, rng, -0.8, 0.8), random_tensor({hidden}, rng, -0.3, 0.3),
            random_tensor({1, hidden}, rng, -0.8, 0.8), random_tensor({1}, rng, -0.3, 0.3)};
}

}  // namespace

TEST_CASE("double backprop: parameter gradient of gradient-norm terms matches FD") {
    Rng rng(7151);
    constexpr double kTol = 1e-3;
    constexpr int kCases = 20;
    const size_t m = 3, in_dim = 4, hidden = 6;

    SUBCASE("smooth ||grad_x f||^2, leaky_relu and tanh critics") {
        for (bool tanh_hidden : {false, true}) {
            double worst = 0.0;
            for (int i = 0; i < kCases; ++i) {
                Tensor xhat = random_tensor({m, in_dim}, rng);
                ScalarBuilder build = [xhat, tanh_hidden](Graph& g, const std::vector<NodeId>& ls) {
                    NodeId x = g.param(xhat);
                    NodeId f = tiny_critic(g, x, ls[0], ls[1], ls[2], ls[3], tanh_hidden);
                    NodeId gx = g.grad_as_graph(g.sum(f), x);
                    return g.mean(g.sum_cols(g.square(gx)));
                };
                worst = std::max(worst, gradcheck(build, tiny_critic_params(in_dim, hidden, rng)));
            }
            CHECK(worst < kTol);
        }
    }

    SUBCASE("one-sided hinge penalty term") {
        double worst = 0.0;
        size_t active = 0;
        for (int i = 0; i < kCases; ++i) {
            Tensor xhat = random_tensor({m, in_dim}, rng);
            ScalarBuilder build = [xhat](Graph& g, const std::vector<NodeId>& ls) {
                NodeId x = g.param(xhat);
                NodeId f = tiny_critic(g, x, ls[0], ls[1], ls[2], ls[3]);
                NodeId gx = g.grad_as_graph(g.sum(f), x);
                NodeId norm = l2_norm_rows(g, gx);
                return g.mean(hinge_sq(g, g.add_scalar(norm, -1.0)));
            };
            // weight scale 2 keeps gradient norms above 1, so the hinge is live
            std::vector<Tensor> params = {random_tensor({hidden, in_dim}, rng, -2.0, 2.0),
                                          random_tensor({hidden}, rng, -0.3, 0.3),
                                          random_tensor({1, hidden}, rng, -2.0, 2.0),
                                          random_tensor({1}, rng, -0.3, 0.3)};
            if (testutil::eval_scalar(build, params) > 1e-12) ++active;
            worst = std::max(worst, gradcheck(build, params));
        }
        CHECK(worst < kTol);
        CHECK(active >= kCases / 2);  // the check must not be vacuous
    }
}

TEST_CASE("linearity of backward") {
    Rng rng(99);
    for (int i = 0; i < 10; ++i) {
        Tensor xv = random_tensor({4}, rng);
        double a = rng.uniform(-2, 2), b = rng.uniform(-2, 2);

        Graph g;
        NodeId x = g.param(xv);
        NodeId f = g.sum(g.square(x));
        NodeId h = g.sum(g.tanh(x));
        NodeId combined = g.add(g.scalar_mul(f, a), g.scalar_mul(h, b));

        Tensor gf = g.backward(f).at(x);
        Tensor gh = g.backward(h).at(x);
        Tensor gc = g.backward(combined).at(x);
        for (size_t j = 0; j < xv.numel(); ++j) {
            CHECK(gc.data[j] == doctest::Approx(a * gf.data[j] + b * gh.data[j]).epsilon(1e-12));
        }
    }
}

TEST_CASE("determinism: identical seeds give bit-identical values") {
    auto run = [] {
        Rng rng(5150);
        Graph g;
        NodeId x = g.param(random_tensor({4, 4}, rng));
        NodeId w = g.param(random_tensor({4, 4}, rng));
        NodeId y = g.mean(g.tanh(g.matmul(x, w)));
        GradientMap gm = g.backward(y);
        std::vector<double> out = g.value(y).data;
        const Tensor& gw = gm.at(w);
        out.insert(out.end(), gw.data.begin(), gw.data.end());
        return out;
    };
    CHECK(run() == run());
}
