#pragma once

// Shared backbone: time-aware post embeddings, user-post cross attention,
// one aggregation layer, and soft community pooling.

#include "cascadenet/encoder/layers.hpp"
#include "cascadenet/encoder/text_encoder.hpp"

namespace cascadenet {

struct ModelConfig {
    int dim = 64;
    int communities = 50;
    double dropout = 0.2;
    int max_post_tokens = 50;
    DirectionMode direction = DirectionMode::Undirected;
    bool pooling_regularizers = false;
    double pooling_regularizer_weight = 1.0;
    std::uint64_t text_seed = 0x7e47c0deULL;

    void validate() const {
        auto fail = [](const std::string& why) { throw Error(ErrorCode::ConfigInvalid, why); };
        if (dim < 1) fail("dim must be positive");
        if (communities < 1) fail("communities must be positive");
        if (!(dropout >= 0.0 && dropout < 1.0)) fail("dropout must lie in [0,1)");
        if (max_post_tokens < 1) fail("max_post_tokens must be positive");
        if (!(pooling_regularizer_weight >= 0.0)) fail("pooling_regularizer_weight must be non-negative");
    }

    HashTextEncoder make_text_encoder() const {
        return HashTextEncoder(dim, text_seed, static_cast<std::size_t>(max_post_tokens));
    }
};

inline nlohmann::json to_json(const ModelConfig& c) {
    return {{"dim", c.dim},
            {"communities", c.communities},
            {"dropout", c.dropout},
            {"max_post_tokens", c.max_post_tokens},
            {"direction", direction_name(c.direction)},
            {"pooling_regularizers", c.pooling_regularizers},
            {"pooling_regularizer_weight", c.pooling_regularizer_weight},
            {"text_seed", c.text_seed}};
}

inline ModelConfig model_config_from_json(const nlohmann::json& j) {
    ModelConfig c;
    try {
        c.dim = j.value("dim", c.dim);
        c.communities = j.value("communities", c.communities);
        c.dropout = j.value("dropout", c.dropout);
        c.max_post_tokens = j.value("max_post_tokens", c.max_post_tokens);
        c.direction = parse_direction(j.value("direction", std::string(direction_name(c.direction))));
        c.pooling_regularizers = j.value("pooling_regularizers", c.pooling_regularizers);
        c.pooling_regularizer_weight = j.value("pooling_regularizer_weight", c.pooling_regularizer_weight);
        c.text_seed = j.value("text_seed", c.text_seed);
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::ConfigInvalid, std::string("model config: ") + e.what());
    }
    c.validate();
    return c;
}

struct BackboneParams {
    Affine time;  // 1 -> d
    Matrix wq;    // d x d
    Matrix wk;    // 2d x d
    Matrix wv;    // 2d x d
    SageParams embed;
    SageParams assign;  // d -> communities, identity activation (logits)

    static BackboneParams init(const ModelConfig& config, Rng& rng) {
        const Eigen::Index d = config.dim;
        BackboneParams p;
        p.time = Affine::init(1, d, rng);
        p.wq.resize(d, d);
        p.wk.resize(2 * d, d);
        p.wv.resize(2 * d, d);
        glorot_uniform(p.wq, rng);
        glorot_uniform(p.wk, rng);
        glorot_uniform(p.wv, rng);
        p.embed = SageParams::init(d, d, config.direction, Activation::Relu, rng);
        p.assign = SageParams::init(d, config.communities, config.direction, Activation::Identity, rng);
        return p;
    }

    template <class Self, class F>
    static void visit(Self& self, F&& f) {
        Affine::visit(self.time, "backbone.time", kBackbone, f);
        f("backbone.attention.wq", kBackbone, self.wq);
        f("backbone.attention.wk", kBackbone, self.wk);
        f("backbone.attention.wv", kBackbone, self.wv);
        SageParams::visit(self.embed, "backbone.embed", kBackbone, f);
        SageParams::visit(self.assign, "backbone.assign", kBackbone, f);
    }
};

/// Timestamps divided by the observation window f*T (window floored at a
/// tiny epsilon so single-post events map to 0).
inline Vector normalized_post_times(const ObservedEvent& observed) {
    constexpr double kMinWindow = 1e-9;
    const double window = std::max(observed.window(), kMinWindow);
    Vector tau(static_cast<Eigen::Index>(observed.size()));
    for (std::size_t i = 0; i < observed.size(); ++i) tau(static_cast<Eigen::Index>(i)) = observed.post(i).timestamp / window;
    return tau;
}

template <TextEncoder E>
Matrix encode_post_texts(const ObservedEvent& observed, const E& encoder) {
    Matrix content(static_cast<Eigen::Index>(observed.size()), encoder.dim());
    for (std::size_t i = 0; i < observed.size(); ++i) {
        content.row(static_cast<Eigen::Index>(i)) = encoder.encode(observed.post(i).text);
    }
    return content;
}

/// [content | time_proj(tau)] for precomputed content rows.
inline Matrix assemble_post_embeddings(const Matrix& content, const Vector& tau, const Affine& time) {
    Matrix out(content.rows(), content.cols() + time.w.cols());
    out.leftCols(content.cols()) = content;
    out.rightCols(time.w.cols()) = time.apply(Matrix(tau));
    return out;
}

template <TextEncoder E>
Matrix embed_posts(const ObservedEvent& observed, const E& encoder, const BackboneParams& params) {
    return assemble_post_embeddings(encode_post_texts(observed, encoder), normalized_post_times(observed), params.time);
}

/// Fixed per-event inputs of the backbone.
struct BackboneInput {
    Matrix user_init;     // |U| x d, pre-trained user vectors
    Matrix post_content;  // |V| x d, frozen text features
    Vector post_time;     // |V|, normalised timestamps
    SparseMatrix adjacency;
    NeighborhoodOperators ops;
};

struct BackboneTrace {
    Matrix posts;
    AttentionCache attention;
    Matrix attended;  // X_u1 before dropout
    Matrix mask1;
    Matrix x1;
    SageCache embed;
    Matrix aggregated;  // X_u2 before dropout
    Matrix mask2;
    Matrix x2;
    PoolCache pool;
    PooledGraph pooled;
};

/// `dropout_rng` null means inference (no dropout).
inline BackboneTrace backbone_forward(const BackboneParams& p, const BackboneInput& in, const ModelConfig& config,
                                      Rng* dropout_rng) {
    BackboneTrace t;
    t.posts = assemble_post_embeddings(in.post_content, in.post_time, p.time);
    t.attended = cross_attention(in.user_init, t.posts, p.wq, p.wk, p.wv, t.attention);
    if (dropout_rng && config.dropout > 0.0) {
        t.mask1 = dropout_mask(t.attended.rows(), t.attended.cols(), config.dropout, *dropout_rng);
    }
    t.x1 = apply_mask(t.attended, t.mask1);
    t.aggregated = sage_layer(p.embed, t.x1, in.ops, t.embed);
    if (dropout_rng && config.dropout > 0.0) {
        t.mask2 = dropout_mask(t.aggregated.rows(), t.aggregated.cols(), config.dropout, *dropout_rng);
    }
    t.x2 = apply_mask(t.aggregated, t.mask2);
    t.pooled = diffpool(p.assign, t.x2, in.adjacency, in.ops, t.pool);
    return t;
}

/// Accumulates backbone gradients given the upstream gradients w.r.t. X_u2,
/// X_c and C.
inline void backbone_backward(const BackboneParams& p, BackboneParams& grad, const BackboneInput& in,
                              const BackboneTrace& t, const Matrix& d_x2_upstream, const Matrix& d_communities,
                              const Matrix& d_assignment) {
    Matrix d_x2 = diffpool_backward(p.assign, grad.assign, d_communities, d_assignment, t.x2, in.ops, t.pooled, t.pool);
    if (d_x2_upstream.size() != 0) d_x2 += d_x2_upstream;
    const Matrix d_aggregated = apply_mask(d_x2, t.mask2);
    const Matrix d_x1 = sage_layer_backward(p.embed, grad.embed, d_aggregated, t.x1, in.ops, t.embed);
    const Matrix d_attended = apply_mask(d_x1, t.mask1);
    AttentionGrad ag{Matrix::Zero(p.wq.rows(), p.wq.cols()), Matrix::Zero(p.wk.rows(), p.wk.cols()),
                     Matrix::Zero(p.wv.rows(), p.wv.cols()), Matrix()};
    cross_attention_backward(d_attended, in.user_init, t.posts, p.wq, p.wk, p.wv, t.attention, ag);
    grad.wq += ag.wq;
    grad.wk += ag.wk;
    grad.wv += ag.wv;
    const Matrix d_time = ag.posts.rightCols(p.time.w.cols());
    grad.time.w.noalias() += in.post_time.transpose() * d_time;
    grad.time.b += d_time.colwise().sum();
}

}  // namespace cascadenet
