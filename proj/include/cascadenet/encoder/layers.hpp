#pragma once

// Differentiable building blocks: affine maps, user-post cross attention,
// mean-aggregation graph layers, and soft community pooling.
//
// Every forward function fills a cache that its backward counterpart
// consumes. Backward functions accumulate (+=) parameter gradients into a
// structure shaped like the parameters and return the input gradient.

#include "cascadenet/core/params.hpp"
#include "cascadenet/data/observe.hpp"

namespace cascadenet {

enum class Activation { Relu, Identity };

struct Affine {
    Matrix w;  // in x out
    Matrix b;  // 1 x out

    static Affine init(Eigen::Index in, Eigen::Index out, Rng& rng) {
        Affine a;
        a.w.resize(in, out);
        glorot_uniform(a.w, rng);
        a.b = Matrix::Zero(1, out);
        return a;
    }

    template <class Self, class F>
    static void visit(Self& self, const std::string& prefix, int owner, F&& f) {
        f(prefix + ".w", owner, self.w);
        f(prefix + ".b", owner, self.b);
    }

    Matrix apply(const Matrix& x) const {
        Matrix y = x * w;
        y.rowwise() += b.row(0);
        return y;
    }

    /// Accumulates parameter gradients into `grad`; returns dL/dx.
    Matrix backward(const Matrix& d_out, const Matrix& x, Affine& grad) const {
        grad.w.noalias() += x.transpose() * d_out;
        grad.b += d_out.colwise().sum();
        return d_out * w.transpose();
    }
};

inline Matrix activate(const Matrix& pre, Activation act) {
    return act == Activation::Relu ? Matrix(pre.cwiseMax(0.0)) : pre;
}

inline Matrix activation_backward(const Matrix& d_out, const Matrix& pre, Activation act) {
    if (act == Activation::Identity) return d_out;
    return d_out.cwiseProduct((pre.array() > 0.0).cast<double>().matrix());
}

inline Matrix row_softmax(const Matrix& logits) {
    Matrix out(logits.rows(), logits.cols());
    for (Eigen::Index i = 0; i < logits.rows(); ++i) {
        const double peak = logits.row(i).maxCoeff();
        out.row(i) = (logits.row(i).array() - peak).exp().matrix();
        out.row(i) /= out.row(i).sum();
    }
    return out;
}

/// Gradient of row-wise softmax: dL/dlogits from dL/dprobs.
inline Matrix row_softmax_backward(const Matrix& d_probs, const Matrix& probs) {
    const Eigen::VectorXd inner = d_probs.cwiseProduct(probs).rowwise().sum();
    return probs.cwiseProduct(d_probs - inner.replicate(1, probs.cols()));
}

/// Inverted-dropout mask (entries 0 or 1/(1-rate)).
inline Matrix dropout_mask(Eigen::Index rows, Eigen::Index cols, double rate, Rng& rng) {
    Matrix mask(rows, cols);
    const double keep = 1.0 / (1.0 - rate);
    for (Eigen::Index j = 0; j < cols; ++j)
        for (Eigen::Index i = 0; i < rows; ++i) mask(i, j) = uniform01(rng) < rate ? 0.0 : keep;
    return mask;
}

inline Matrix apply_mask(const Matrix& x, const Matrix& mask) {
    return mask.size() == 0 ? x : Matrix(x.cwiseProduct(mask));
}

// ---------------------------------------------------------------------------
// Cross attention: users query, posts provide keys and values.

struct AttentionCache {
    Matrix q, k, v;
    Matrix probs;  // |U| x |V|
};

struct AttentionGrad {
    Matrix wq, wk, wv;
    Matrix posts;  // dL/dX_p
};

inline Matrix cross_attention(const Matrix& users, const Matrix& posts, const Matrix& wq, const Matrix& wk,
                              const Matrix& wv, AttentionCache& cache) {
    cache.q = users * wq;
    cache.k = posts * wk;
    cache.v = posts * wv;
    const double scale = 1.0 / std::sqrt(static_cast<double>(wq.cols()));
    cache.probs = row_softmax((cache.q * cache.k.transpose()) * scale);
    return cache.probs * cache.v;
}

inline void cross_attention_backward(const Matrix& d_out, const Matrix& users, const Matrix& posts, const Matrix& wq,
                                     const Matrix& wk, const Matrix& wv, const AttentionCache& cache,
                                     AttentionGrad& grad) {
    const double scale = 1.0 / std::sqrt(static_cast<double>(wq.cols()));
    const Matrix d_probs = d_out * cache.v.transpose();
    const Matrix d_v = cache.probs.transpose() * d_out;
    const Matrix d_scores = row_softmax_backward(d_probs, cache.probs) * scale;
    const Matrix d_q = d_scores * cache.k;
    const Matrix d_k = d_scores.transpose() * cache.q;
    grad.wq.noalias() += users.transpose() * d_q;
    grad.wk.noalias() += posts.transpose() * d_k;
    grad.wv.noalias() += posts.transpose() * d_v;
    grad.posts = d_k * wk.transpose() + d_v * wv.transpose();
}

// ---------------------------------------------------------------------------
// Mean-aggregation graph layer.

/// Row-normalised neighbourhood operators. Rows of isolated nodes are zero,
/// so their neighbour mean is the zero vector.
struct NeighborhoodOperators {
    SparseMatrix undirected;
    SparseMatrix top_down;   // row b averages users whose posts b reposted
    SparseMatrix bottom_up;  // row a averages users who reposted a

    static SparseMatrix mean_rows(const SparseMatrix& m) {
        SparseMatrix out = m;
        for (Eigen::Index r = 0; r < out.outerSize(); ++r) {
            double total = 0.0;
            for (SparseMatrix::InnerIterator it(out, r); it; ++it) total += it.value();
            if (total == 0.0) continue;
            for (SparseMatrix::InnerIterator it(out, r); it; ++it) it.valueRef() /= total;
        }
        return out;
    }

    static NeighborhoodOperators from_flow(const SparseMatrix& flow, const SparseMatrix& symmetric) {
        NeighborhoodOperators ops;
        ops.undirected = mean_rows(symmetric);
        ops.top_down = mean_rows(SparseMatrix(flow.transpose()));
        ops.bottom_up = mean_rows(flow);
        return ops;
    }

    static NeighborhoodOperators from_graph(const UserInteractionGraph& graph) {
        return from_flow(graph.flow(), graph.adjacency());
    }

    /// Operators for a symmetric adjacency only; directed modes reuse it.
    static NeighborhoodOperators from_symmetric(const SparseMatrix& symmetric) {
        return from_flow(symmetric, symmetric);
    }
};

/// One aggregation layer: act([x_self, mean_neighbours(x)] W + b).
/// Bidirectional mode runs a top-down and a bottom-up branch (each with its
/// own weights and a rectified output), concatenates them and projects the
/// result with `merge`.
struct SageParams {
    DirectionMode mode = DirectionMode::Undirected;
    Activation act = Activation::Relu;
    Affine primary;
    Affine reverse;  // bidirectional only
    Affine merge;    // bidirectional only

    static SageParams init(Eigen::Index in, Eigen::Index out, DirectionMode mode, Activation act, Rng& rng) {
        SageParams p;
        p.mode = mode;
        p.act = act;
        p.primary = Affine::init(2 * in, out, rng);
        if (mode == DirectionMode::Bidirectional) {
            p.reverse = Affine::init(2 * in, out, rng);
            p.merge = Affine::init(2 * out, out, rng);
        }
        return p;
    }

    template <class Self, class F>
    static void visit(Self& self, const std::string& prefix, int owner, F&& f) {
        Affine::visit(self.primary, prefix + ".primary", owner, f);
        if (self.mode == DirectionMode::Bidirectional) {
            Affine::visit(self.reverse, prefix + ".reverse", owner, f);
            Affine::visit(self.merge, prefix + ".merge", owner, f);
        }
    }

    /// The weight matrix feeding this layer's output directly.
    const Matrix& output_weights() const { return mode == DirectionMode::Bidirectional ? merge.w : primary.w; }
    Matrix& output_weights() { return mode == DirectionMode::Bidirectional ? merge.w : primary.w; }
};

struct SageCache {
    Matrix in_primary, pre_primary;
    Matrix in_reverse, pre_reverse;
    Matrix in_merge, pre_merge;
};

namespace sage_detail {

inline Matrix concat_cols(const Matrix& a, const Matrix& b) {
    Matrix out(a.rows(), a.cols() + b.cols());
    out << a, b;
    return out;
}

inline Matrix branch_forward(const Affine& p, const Matrix& x, const SparseMatrix& op, Activation act, Matrix& in,
                             Matrix& pre) {
    in = concat_cols(x, Matrix(op * x));
    pre = p.apply(in);
    return activate(pre, act);
}

inline Matrix branch_backward(const Affine& p, Affine& grad, const Matrix& d_out, const SparseMatrix& op,
                              Activation act, const Matrix& in, const Matrix& pre, Eigen::Index width) {
    const Matrix d_pre = activation_backward(d_out, pre, act);
    const Matrix d_in = p.backward(d_pre, in, grad);
    Matrix d_x = d_in.leftCols(width);
    d_x.noalias() += op.transpose() * d_in.rightCols(width);
    return d_x;
}

inline const SparseMatrix& primary_operator(DirectionMode mode, const NeighborhoodOperators& ops) {
    switch (mode) {
        case DirectionMode::TopDown:
        case DirectionMode::Bidirectional: return ops.top_down;
        case DirectionMode::BottomUp: return ops.bottom_up;
        case DirectionMode::Undirected: break;
    }
    return ops.undirected;
}

}  // namespace sage_detail

inline Matrix sage_layer(const SageParams& p, const Matrix& x, const NeighborhoodOperators& ops, SageCache& cache) {
    using namespace sage_detail;
    const SparseMatrix& op = primary_operator(p.mode, ops);
    if (p.mode != DirectionMode::Bidirectional) {
        return branch_forward(p.primary, x, op, p.act, cache.in_primary, cache.pre_primary);
    }
    const Matrix down = branch_forward(p.primary, x, op, Activation::Relu, cache.in_primary, cache.pre_primary);
    const Matrix up = branch_forward(p.reverse, x, ops.bottom_up, Activation::Relu, cache.in_reverse, cache.pre_reverse);
    cache.in_merge = concat_cols(down, up);
    cache.pre_merge = p.merge.apply(cache.in_merge);
    return activate(cache.pre_merge, p.act);
}

inline Matrix sage_layer_backward(const SageParams& p, SageParams& grad, const Matrix& d_out, const Matrix& x,
                                  const NeighborhoodOperators& ops, const SageCache& cache) {
    using namespace sage_detail;
    const SparseMatrix& op = primary_operator(p.mode, ops);
    if (p.mode != DirectionMode::Bidirectional) {
        return branch_backward(p.primary, grad.primary, d_out, op, p.act, cache.in_primary, cache.pre_primary, x.cols());
    }
    const Matrix d_merge_in =
        p.merge.backward(activation_backward(d_out, cache.pre_merge, p.act), cache.in_merge, grad.merge);
    const Eigen::Index out = p.primary.w.cols();
    Matrix d_x = branch_backward(p.primary, grad.primary, d_merge_in.leftCols(out), op, Activation::Relu,
                                 cache.in_primary, cache.pre_primary, x.cols());
    d_x += branch_backward(p.reverse, grad.reverse, d_merge_in.rightCols(out), ops.bottom_up, Activation::Relu,
                           cache.in_reverse, cache.pre_reverse, x.cols());
    return d_x;
}

// ---------------------------------------------------------------------------
// Soft community pooling.

struct PooledGraph {
    Matrix assignment;   // C: |U| x communities, row-stochastic
    Matrix communities;  // X_c = C^T X: communities x d
    Matrix adjacency;    // A_c = C^T A C
};

struct PoolCache {
    SageCache assign;
    Matrix logits;
};

inline PooledGraph diffpool(const SageParams& assign, const Matrix& x, const SparseMatrix& adjacency,
                            const NeighborhoodOperators& ops, PoolCache& cache) {
    PooledGraph out;
    cache.logits = sage_layer(assign, x, ops, cache.assign);
    out.assignment = row_softmax(cache.logits);
    out.communities = out.assignment.transpose() * x;
    out.adjacency = out.assignment.transpose() * (adjacency * out.assignment);
    return out;
}

/// Backward through pooling given dL/dX_c and any extra dL/dC from
/// downstream consumers of the assignment. Returns dL/dx.
inline Matrix diffpool_backward(const SageParams& assign, SageParams& grad, const Matrix& d_communities,
                                const Matrix& d_assignment_extra, const Matrix& x, const NeighborhoodOperators& ops,
                                const PooledGraph& pooled, const PoolCache& cache) {
    Matrix d_assignment = x * d_communities.transpose();
    if (d_assignment_extra.size() != 0) d_assignment += d_assignment_extra;
    Matrix d_x = pooled.assignment * d_communities;
    const Matrix d_logits = row_softmax_backward(d_assignment, pooled.assignment);
    d_x += sage_layer_backward(assign, grad, d_logits, x, ops, cache.assign);
    return d_x;
}

/// Optional pooling regularisers: mean squared link-reconstruction error
/// ||A - C C^T||_F^2 / n^2 and mean assignment entropy. Adds their gradient
/// (scaled by `weight`) to `d_assignment` and returns the weighted sum.
inline double pooling_regularizers(const Matrix& assignment, const SparseMatrix& adjacency, double weight,
                                   Matrix& d_assignment) {
    const auto n = static_cast<double>(assignment.rows());
    const Matrix residual = Matrix(adjacency) - assignment * assignment.transpose();
    const double link = residual.squaredNorm() / (n * n);
    const Matrix logc = assignment.array().max(1e-300).log().matrix();
    const double entropy = -(assignment.cwiseProduct(logc)).sum() / n;
    if (d_assignment.size() == 0) d_assignment = Matrix::Zero(assignment.rows(), assignment.cols());
    d_assignment += weight * (-4.0 / (n * n)) * (residual * assignment);
    d_assignment += weight * (-(logc.array() + 1.0) / n).matrix();
    return weight * (link + entropy);
}

}  // namespace cascadenet
