#pragma once

// Task heads: sum readout feeding the rumor and virality MLPs, and the
// community-enhanced refinement feeding the vulnerability MLP.

#include "cascadenet/encoder/layers.hpp"

namespace cascadenet {

/// in -> hidden (rectified) -> out.
struct Mlp {
    Affine hidden;
    Affine out;

    static Mlp init(Eigen::Index in, Eigen::Index width, Eigen::Index outputs, Rng& rng) {
        return {Affine::init(in, width, rng), Affine::init(width, outputs, rng)};
    }

    template <class Self, class F>
    static void visit(Self& self, const std::string& prefix, int owner, F&& f) {
        Affine::visit(self.hidden, prefix + ".hidden", owner, f);
        Affine::visit(self.out, prefix + ".out", owner, f);
    }
};

struct MlpCache {
    Matrix in;
    Matrix pre;
    Matrix hidden;
};

inline Matrix mlp_forward(const Mlp& m, const Matrix& x, MlpCache& cache) {
    cache.in = x;
    cache.pre = m.hidden.apply(x);
    cache.hidden = cache.pre.cwiseMax(0.0);
    return m.out.apply(cache.hidden);
}

inline Matrix mlp_forward(const Mlp& m, const Matrix& x) {
    MlpCache cache;
    return mlp_forward(m, x, cache);
}

inline Matrix mlp_backward(const Mlp& m, Mlp& grad, const Matrix& d_out, const MlpCache& cache) {
    const Matrix d_hidden = m.out.backward(d_out, cache.hidden, grad.out);
    return m.hidden.backward(activation_backward(d_hidden, cache.pre, Activation::Relu), cache.in, grad.hidden);
}

struct HeadParams {
    Mlp rumor;          // d -> d -> 2, logits [non_rumor, rumor]
    Mlp virality;       // d -> d -> 1
    SageParams cvp;     // 2d -> d
    Mlp vulnerability;  // d -> d -> 1, sigmoid applied outside

    static HeadParams init(Eigen::Index d, DirectionMode mode, Rng& rng) {
        HeadParams h;
        h.rumor = Mlp::init(d, d, 2, rng);
        h.virality = Mlp::init(d, d, 1, rng);
        h.cvp = SageParams::init(2 * d, d, mode, Activation::Relu, rng);
        h.vulnerability = Mlp::init(d, d, 1, rng);
        return h;
    }

    template <class Self, class F>
    static void visit(Self& self, F&& f) {
        Mlp::visit(self.rumor, "heads.rumor", static_cast<int>(Task::Rumor), f);
        Mlp::visit(self.virality, "heads.virality", static_cast<int>(Task::Virality), f);
        SageParams::visit(self.cvp, "heads.cvp", static_cast<int>(Task::Vulnerability), f);
        Mlp::visit(self.vulnerability, "heads.vulnerability", static_cast<int>(Task::Vulnerability), f);
    }
};

struct Predictions {
    RowVector rumor_logits = RowVector::Zero(2);  // [non_rumor, rumor]
    double virality = 0.0;                       // predicted log2 unique users
    Vector vulnerability;                        // aligned with graph users

    double rumor_probability() const {
        const double m = rumor_logits.maxCoeff();
        const double a = std::exp(rumor_logits(0) - m);
        const double b = std::exp(rumor_logits(1) - m);
        return b / (a + b);
    }
    /// Ties resolve to non_rumor.
    Label predicted_label() const { return rumor_logits(1) > rumor_logits(0) ? Label::Rumor : Label::NonRumor; }
};

inline RowVector readout_sum(const Matrix& communities) { return communities.colwise().sum(); }

inline std::pair<RowVector, double> predict_graph_heads(const RowVector& readout, const HeadParams& heads) {
    return {mlp_forward(heads.rumor, readout).row(0), mlp_forward(heads.virality, readout)(0, 0)};
}

struct CvpCache {
    Matrix community_mix;  // C X_c
    Matrix input;          // [X_u2, C X_c]
    SageCache sage;
};

inline Matrix cvp_refine(const Matrix& x2, const Matrix& assignment, const Matrix& communities,
                         const NeighborhoodOperators& ops, const SageParams& cvp, CvpCache& cache) {
    cache.community_mix = assignment * communities;
    cache.input.resize(x2.rows(), x2.cols() + cache.community_mix.cols());
    cache.input << x2, cache.community_mix;
    return sage_layer(cvp, cache.input, ops, cache.sage);
}

inline Matrix cvp_refine(const Matrix& x2, const Matrix& assignment, const Matrix& communities,
                         const NeighborhoodOperators& ops, const HeadParams& heads) {
    CvpCache cache;
    return cvp_refine(x2, assignment, communities, ops, heads.cvp, cache);
}

struct CvpGrad {
    Matrix x2;
    Matrix assignment;
    Matrix communities;
};

inline CvpGrad cvp_refine_backward(const SageParams& cvp, SageParams& grad, const Matrix& d_out, const Matrix& assignment,
                                   const Matrix& communities, const NeighborhoodOperators& ops,
                                   const CvpCache& cache) {
    const Matrix d_input = sage_layer_backward(cvp, grad, d_out, cache.input, ops, cache.sage);
    const Eigen::Index d = communities.cols();
    const Matrix d_mix = d_input.rightCols(d);
    return {d_input.leftCols(cache.input.cols() - d), d_mix * communities.transpose(),
            assignment.transpose() * d_mix};
}

inline Vector sigmoid(const Vector& z) {
    return z.unaryExpr([](double v) {
        if (v >= 0.0) return 1.0 / (1.0 + std::exp(-v));
        const double e = std::exp(v);
        return e / (1.0 + e);
    });
}

inline Vector predict_vulnerability(const Matrix& x4, const Mlp& head) { return sigmoid(mlp_forward(head, x4).col(0)); }

inline Vector predict_vulnerability(const Matrix& x4, const HeadParams& heads) {
    return predict_vulnerability(x4, heads.vulnerability);
}

}  // namespace cascadenet
