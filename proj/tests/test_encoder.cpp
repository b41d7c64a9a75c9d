#include "support.hpp"

#include <gtest/gtest.h>

using namespace cascadenet;
using namespace cascadenet::testing;

namespace {

constexpr double kGradTol = 1e-4;
constexpr int kInstances = 20;

double inner(const Matrix& a, const Matrix& b) { return a.cwiseProduct(b).sum(); }

const std::array<DirectionMode, 4> kModes{DirectionMode::Undirected, DirectionMode::TopDown, DirectionMode::BottomUp,
                                          DirectionMode::Bidirectional};

struct RandomGraphInput {
    UserInteractionGraph graph;
    NeighborhoodOperators ops;
    SparseMatrix adjacency;
};

RandomGraphInput random_graph_input(std::size_t n, Rng& rng) {
    RandomGraphInput g;
    g.graph = random_user_graph(n, rng, 0.35);
    g.ops = NeighborhoodOperators::from_graph(g.graph);
    g.adjacency = g.graph.adjacency();
    return g;
}

/// Wraps a SageParams so the finite-difference helper can walk it.
struct SageBox {
    SageParams p;
    template <class Self, class F>
    static void visit(Self& self, F&& f) {
        SageParams::visit(self.p, "sage", kBackbone, f);
    }
};

}  // namespace

TEST(CrossAttention, GradientsMatchFiniteDifferences) {
    Rng rng(100);
    for (int trial = 0; trial < kInstances; ++trial) {
        const int d = 2 + static_cast<int>(uniform_index(rng, 4));
        const auto users = 1 + uniform_index(rng, 5);
        const auto posts_n = 1 + uniform_index(rng, 6);
        Matrix u = random_matrix(users, d, rng);
        Matrix posts = random_matrix(posts_n, 2 * d, rng);
        Matrix wq = random_matrix(d, d, rng, 0.7), wk = random_matrix(2 * d, d, rng, 0.7),
               wv = random_matrix(2 * d, d, rng, 0.7);
        const Matrix r = random_matrix(users, d, rng);
        auto loss = [&] {
            AttentionCache c;
            return inner(r, cross_attention(u, posts, wq, wk, wv, c));
        };
        AttentionCache cache;
        cross_attention(u, posts, wq, wk, wv, cache);
        AttentionGrad g{Matrix::Zero(d, d), Matrix::Zero(2 * d, d), Matrix::Zero(2 * d, d), Matrix()};
        cross_attention_backward(r, u, posts, wq, wk, wv, cache, g);
        EXPECT_LE(fd_relative_error(wq, g.wq, loss), kGradTol);
        EXPECT_LE(fd_relative_error(wk, g.wk, loss), kGradTol);
        EXPECT_LE(fd_relative_error(wv, g.wv, loss), kGradTol);
        EXPECT_LE(fd_relative_error(posts, g.posts, loss), kGradTol);
    }
}

TEST(CrossAttention, RowsAreStochastic) {
    Rng rng(101);
    for (int trial = 0; trial < 150; ++trial) {
        const int d = 1 + static_cast<int>(uniform_index(rng, 8));
        const auto users = 1 + uniform_index(rng, 12);
        const auto posts_n = 1 + uniform_index(rng, 20);
        const double scale = 0.1 + 5.0 * uniform01(rng);
        AttentionCache c;
        cross_attention(random_matrix(users, d, rng, scale), random_matrix(posts_n, 2 * d, rng, scale),
                        random_matrix(d, d, rng), random_matrix(2 * d, d, rng), random_matrix(2 * d, d, rng), c);
        for (Eigen::Index i = 0; i < c.probs.rows(); ++i) EXPECT_NEAR(c.probs.row(i).sum(), 1.0, 1e-6);
        EXPECT_GE(c.probs.minCoeff(), 0.0);
    }
}

TEST(Sage, GradientsMatchFiniteDifferencesInEveryMode) {
    Rng rng(200);
    for (DirectionMode mode : kModes) {
        for (Activation act : {Activation::Relu, Activation::Identity}) {
            for (int trial = 0; trial < kInstances; ++trial) {
                const auto n = 1 + uniform_index(rng, 7);
                const int in = 1 + static_cast<int>(uniform_index(rng, 4));
                const int out = 1 + static_cast<int>(uniform_index(rng, 4));
                const auto g = random_graph_input(n, rng);
                SageBox box{SageParams::init(in, out, mode, act, rng)};
                for (auto& t : tensors(box)) *t.value = random_matrix(t.value->rows(), t.value->cols(), rng, 0.8);
                Matrix x = random_matrix(n, in, rng);
                const Matrix r = random_matrix(n, out, rng);
                auto loss = [&] {
                    SageCache c;
                    return inner(r, sage_layer(box.p, x, g.ops, c));
                };
                SageCache cache;
                sage_layer(box.p, x, g.ops, cache);
                SageBox grad = zeros_like(box);
                const Matrix dx = sage_layer_backward(box.p, grad.p, r, x, g.ops, cache);
                std::string worst;
                EXPECT_LE(fd_parameter_error(box, grad, loss, &worst), kGradTol)
                    << direction_name(mode) << " " << worst;
                EXPECT_LE(fd_relative_error(x, dx, loss), kGradTol) << direction_name(mode);
            }
        }
    }
}

TEST(Sage, DirectedModesUseFlowDirection) {
    // a -> b only. Top-down: b averages a; bottom-up: a averages b.
    UserInteractionGraph g;
    g.users = {"a", "b"};
    g.flow_edges = {{0, 1}};
    const auto ops = NeighborhoodOperators::from_graph(g);
    const Matrix td(ops.top_down), bu(ops.bottom_up), un(ops.undirected);
    EXPECT_EQ(td(1, 0), 1.0);
    EXPECT_EQ(td(0, 1), 0.0);
    EXPECT_EQ(bu(0, 1), 1.0);
    EXPECT_EQ(bu(1, 0), 0.0);
    EXPECT_EQ(un(0, 1), 1.0);
    EXPECT_EQ(un(1, 0), 1.0);
}

TEST(Sage, OperatorsAreRowStochasticOrZero) {
    Rng rng(201);
    for (int trial = 0; trial < 120; ++trial) {
        const auto g = random_graph_input(1 + uniform_index(rng, 15), rng);
        for (const SparseMatrix* op : {&g.ops.undirected, &g.ops.top_down, &g.ops.bottom_up}) {
            const Matrix m(*op);
            for (Eigen::Index i = 0; i < m.rows(); ++i) {
                const double s = m.row(i).sum();
                EXPECT_TRUE(std::abs(s - 1.0) < 1e-12 || s == 0.0);
            }
            EXPECT_EQ(m.diagonal().sum(), 0.0);
        }
    }
}

TEST(DiffPool, GradientsMatchFiniteDifferences) {
    Rng rng(300);
    for (DirectionMode mode : kModes) {
        for (int trial = 0; trial < kInstances; ++trial) {
            const auto n = 1 + uniform_index(rng, 7);
            const int d = 1 + static_cast<int>(uniform_index(rng, 4));
            const int k = 1 + static_cast<int>(uniform_index(rng, 4));
            const auto g = random_graph_input(n, rng);
            SageBox box{SageParams::init(d, k, mode, Activation::Identity, rng)};
            Matrix x = random_matrix(n, d, rng);
            const Matrix r_comm = random_matrix(k, d, rng);
            const Matrix r_assign = random_matrix(n, k, rng);
            const Matrix r_adj = random_matrix(k, k, rng);
            auto loss = [&] {
                PoolCache c;
                const auto p = diffpool(box.p, x, g.adjacency, g.ops, c);
                return inner(r_comm, p.communities) + inner(r_assign, p.assignment) + inner(r_adj, p.adjacency);
            };
            PoolCache cache;
            const auto pooled = diffpool(box.p, x, g.adjacency, g.ops, cache);
            // d<R_adj, C^T A C>/dC = A C R_adj^T + A^T C R_adj.
            const Matrix a(g.adjacency);
            const Matrix d_assign = r_assign + a * pooled.assignment * r_adj.transpose() +
                                    a.transpose() * pooled.assignment * r_adj;
            SageBox grad = zeros_like(box);
            const Matrix dx = diffpool_backward(box.p, grad.p, r_comm, d_assign, x, g.ops, pooled, cache);
            std::string worst;
            EXPECT_LE(fd_parameter_error(box, grad, loss, &worst), kGradTol) << worst;
            EXPECT_LE(fd_relative_error(x, dx, loss), kGradTol);
        }
    }
}

TEST(DiffPool, AssignmentRowStochasticAndPooledAdjacencySymmetric) {
    Rng rng(301);
    for (int trial = 0; trial < 150; ++trial) {
        const auto n = 1 + uniform_index(rng, 15);
        const int d = 1 + static_cast<int>(uniform_index(rng, 6));
        const int k = 1 + static_cast<int>(uniform_index(rng, 8));
        const auto g = random_graph_input(n, rng);
        const auto mode = kModes[uniform_index(rng, kModes.size())];
        const auto assign = SageParams::init(d, k, mode, Activation::Identity, rng);
        PoolCache c;
        const auto p = diffpool(assign, random_matrix(n, d, rng, 3.0), g.adjacency, g.ops, c);
        for (Eigen::Index i = 0; i < p.assignment.rows(); ++i) EXPECT_NEAR(p.assignment.row(i).sum(), 1.0, 1e-6);
        EXPECT_GE(p.assignment.minCoeff(), 0.0);
        EXPECT_LE((p.adjacency - p.adjacency.transpose()).cwiseAbs().maxCoeff(), 1e-12);
    }
}

TEST(DiffPool, RegularizerGradientMatchesFiniteDifferences) {
    Rng rng(302);
    for (int trial = 0; trial < kInstances; ++trial) {
        const auto n = 1 + uniform_index(rng, 7);
        const int k = 1 + static_cast<int>(uniform_index(rng, 4));
        const auto g = random_graph_input(n, rng);
        Matrix c = row_softmax(random_matrix(n, k, rng));
        const double weight = 0.5 + uniform01(rng);
        auto loss = [&] {
            Matrix scratch;
            return pooling_regularizers(c, g.adjacency, weight, scratch);
        };
        Matrix grad;
        pooling_regularizers(c, g.adjacency, weight, grad);
        EXPECT_LE(fd_relative_error(c, grad, loss), kGradTol);
    }
}

TEST(Backbone, GradientsMatchFiniteDifferences) {
    Rng rng(400);
    for (DirectionMode mode : kModes) {
        for (int trial = 0; trial < kInstances / 2; ++trial) {
            const auto n_users = 1 + uniform_index(rng, 5);
            const auto n_posts = n_users + uniform_index(rng, 4);
            const int d = 2 + static_cast<int>(uniform_index(rng, 3));
            const auto config = toy_model_config(d, 1 + static_cast<int>(uniform_index(rng, 3)), mode);
            const auto g = random_graph_input(n_users, rng);
            BackboneInput in;
            in.user_init = random_matrix(n_users, d, rng);
            in.post_content = random_matrix(n_posts, d, rng);
            in.post_time = Vector::NullaryExpr(n_posts, [&] { return uniform01(rng); });
            in.adjacency = g.adjacency;
            in.ops = g.ops;
            BackboneParams p = BackboneParams::init(config, rng);
            // Nonzero biases keep pre-activations of dropped-out isolated
            // rows off the relu kink at exactly 0.
            for (auto& t : tensors(p))
                if (t.name.ends_with(".b")) *t.value = random_matrix(t.value->rows(), t.value->cols(), rng, 0.5);
            const Matrix r_x2 = random_matrix(n_users, d, rng);
            const Matrix r_comm = random_matrix(config.communities, d, rng);
            const Matrix r_assign = random_matrix(n_users, config.communities, rng);
            const std::uint64_t dropout_seed = trial;
            auto run = [&] {
                Rng drop(dropout_seed);
                return backbone_forward(p, in, config, &drop);
            };
            auto loss = [&] {
                const auto t = run();
                return inner(r_x2, t.x2) + inner(r_comm, t.pooled.communities) + inner(r_assign, t.pooled.assignment);
            };
            const auto trace = run();
            BackboneParams grad = zeros_like(p);
            backbone_backward(p, grad, in, trace, r_x2, r_comm, r_assign);
            std::string worst;
            EXPECT_LE(fd_parameter_error(p, grad, loss, &worst), kGradTol) << direction_name(mode) << " " << worst;
        }
    }
}

TEST(Backbone, InferenceIsDeterministicAndDropoutOnlyInTraining) {
    Rng rng(401);
    const auto config = toy_model_config(4, 3);
    const auto g = random_graph_input(6, rng);
    BackboneInput in;
    in.user_init = random_matrix(6, 4, rng);
    in.post_content = random_matrix(9, 4, rng);
    in.post_time = Vector::LinSpaced(9, 0.0, 1.0);
    in.adjacency = g.adjacency;
    in.ops = g.ops;
    const auto p = BackboneParams::init(config, rng);
    const auto a = backbone_forward(p, in, config, nullptr);
    const auto b = backbone_forward(p, in, config, nullptr);
    EXPECT_EQ(a.x2, b.x2);
    EXPECT_EQ(a.mask1.size(), 0);
    Rng drop(1);
    const auto t = backbone_forward(p, in, config, &drop);
    ASSERT_EQ(t.mask1.rows(), 6);
    for (Eigen::Index i = 0; i < t.mask1.size(); ++i)
        EXPECT_TRUE(t.mask1.data()[i] == 0.0 || std::abs(t.mask1.data()[i] - 1.25) < 1e-15);
}

TEST(Backbone, PostTimesNormalizeByObservedWindow) {
    const auto e = make_event("e", Label::Rumor,
                              {{"s", std::nullopt, "a", 0}, {"p", "s", "b", 10}, {"q", "s", "c", 40}, {"r", "q", "d", 100}});
    const auto obs = observe_prefix(e, 0.5);
    const Vector tau = normalized_post_times(obs);
    ASSERT_EQ(tau.size(), 3);
    EXPECT_DOUBLE_EQ(tau(1), 0.2);
    EXPECT_DOUBLE_EQ(tau(2), 0.8);
    const auto single = make_event("s", Label::Rumor, {{"s", std::nullopt, "a", 0}});
    EXPECT_EQ(normalized_post_times(observe_prefix(single, 1.0))(0), 0.0);
}

TEST(TextEncoder, TokenizeAndEncode) {
    EXPECT_EQ(tokenize("Hello, WORLD! x2", 10), (std::vector<std::string>{"hello", "world", "x2"}));
    EXPECT_EQ(tokenize("a b c d", 2).size(), 2u);
    const HashTextEncoder enc(8, 5, 3);
    EXPECT_EQ(enc.encode(""), RowVector::Zero(8));
    EXPECT_EQ(enc.encode("one two"), enc.encode("ONE two"));
    // Tokens past the limit are ignored.
    EXPECT_EQ(enc.encode("a b c"), enc.encode("a b c d e"));
    const RowVector expected = (enc.projection_row(HashTextEncoder::bucket_of("a", enc.buckets())) +
                                enc.projection_row(HashTextEncoder::bucket_of("b", enc.buckets()))) /
                               2.0;
    EXPECT_LE((enc.encode("a b") - expected).cwiseAbs().maxCoeff(), 1e-15);
    EXPECT_NE(HashTextEncoder(8, 6, 3).encode("a"), enc.encode("a"));
}
