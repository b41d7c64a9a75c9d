#pragma once

// Full network: backbone plus task heads, per-event forward/backward, and
// batch objectives for the trainer.

#include "cascadenet/encoder/backbone.hpp"
#include "cascadenet/model/losses.hpp"
#include "cascadenet/pretrain/user_embeddings.hpp"

#include <thread>

namespace cascadenet {

struct ModelParams {
    BackboneParams backbone;
    HeadParams heads;

    static ModelParams init(const ModelConfig& config, std::uint64_t seed) {
        config.validate();
        Rng rng(derive_seed(seed, 0x1417ULL));
        ModelParams p;
        p.backbone = BackboneParams::init(config, rng);
        p.heads = HeadParams::init(config.dim, config.direction, rng);
        return p;
    }

    template <class Self, class F>
    static void visit(Self& self, F&& f) {
        BackboneParams::visit(self.backbone, f);
        HeadParams::visit(self.heads, f);
    }
};

/// Everything the network needs about one observed event, computed once:
/// frozen text features and user vectors, graph operators and targets.
struct PreparedEvent {
    std::string event_id;
    double fraction = 1.0;
    std::vector<std::string> users;
    BackboneInput input;
    EventTargets targets;
};

template <TextEncoder E>
PreparedEvent prepare_event(const PropagationEvent& event, double fraction, const E& encoder,
                            const UserEmbeddingTable& table, const LabelSet& labels) {
    if (table.dim != encoder.dim()) {
        throw Error(ErrorCode::ConfigInvalid, "user embedding dim " + std::to_string(table.dim) +
                                                  " differs from model dim " + std::to_string(encoder.dim()));
    }
    const ObservedEvent observed = observe_prefix(event, fraction);
    const UserInteractionGraph graph = build_user_graph(observed);
    PreparedEvent out;
    out.event_id = event.event_id;
    out.fraction = fraction;
    out.users = graph.users;
    out.input.user_init.resize(static_cast<Eigen::Index>(graph.size()), table.dim);
    for (std::size_t u = 0; u < graph.size(); ++u) {
        out.input.user_init.row(static_cast<Eigen::Index>(u)) = table.lookup(graph.users[u]);
    }
    out.input.post_content = encode_post_texts(observed, encoder);
    out.input.post_time = normalized_post_times(observed);
    out.input.adjacency = graph.adjacency();
    out.input.ops = NeighborhoodOperators::from_graph(graph);
    out.targets = event_targets(labels, event, graph);
    return out;
}

template <TextEncoder E>
std::vector<PreparedEvent> prepare_events(const std::vector<const PropagationEvent*>& events, double fraction,
                                          const E& encoder, const UserEmbeddingTable& table, const LabelSet& labels) {
    std::vector<PreparedEvent> out;
    out.reserve(events.size());
    for (const PropagationEvent* e : events) out.push_back(prepare_event(*e, fraction, encoder, table, labels));
    return out;
}

struct ForwardTrace {
    BackboneTrace backbone;
    RowVector readout;
    MlpCache rumor;
    MlpCache virality;
    CvpCache cvp;
    Matrix refined;  // X_u4 before dropout
    Matrix mask4;
    Matrix x4;
    MlpCache vulnerability;
    Predictions predictions;
    double regularizer = 0.0;
};

inline ForwardTrace forward_trace(const ModelParams& p, const PreparedEvent& event, const ModelConfig& config,
                                  Rng* dropout_rng) {
    ForwardTrace t;
    t.backbone = backbone_forward(p.backbone, event.input, config, dropout_rng);
    const PooledGraph& pooled = t.backbone.pooled;
    t.readout = readout_sum(pooled.communities);
    t.predictions.rumor_logits = mlp_forward(p.heads.rumor, t.readout, t.rumor).row(0);
    t.predictions.virality = mlp_forward(p.heads.virality, t.readout, t.virality)(0, 0);
    t.refined = cvp_refine(t.backbone.x2, pooled.assignment, pooled.communities, event.input.ops, p.heads.cvp, t.cvp);
    if (dropout_rng && config.dropout > 0.0) {
        t.mask4 = dropout_mask(t.refined.rows(), t.refined.cols(), config.dropout, *dropout_rng);
    }
    t.x4 = apply_mask(t.refined, t.mask4);
    t.predictions.vulnerability = sigmoid(mlp_forward(p.heads.vulnerability, t.x4, t.vulnerability).col(0));
    if (config.pooling_regularizers) {
        Matrix unused;
        t.regularizer = pooling_regularizers(pooled.assignment, event.input.adjacency,
                                             config.pooling_regularizer_weight, unused);
    }
    return t;
}

/// Inference-mode predictions (no dropout).
inline Predictions forward(const ModelParams& p, const PreparedEvent& event, const ModelConfig& config) {
    return forward_trace(p, event, config, nullptr).predictions;
}

/// End-to-end forward from a raw observation.
template <TextEncoder E>
std::pair<Predictions, ForwardTrace> forward(const ObservedEvent& observed, const UserEmbeddingTable& table,
                                             const E& encoder, const ModelParams& p, const ModelConfig& config) {
    const PreparedEvent prepared = prepare_event(*observed.event, observed.fraction, encoder, table, LabelSet{});
    ForwardTrace trace = forward_trace(p, prepared, config, nullptr);
    return {trace.predictions, std::move(trace)};
}

/// Accumulates the gradient of sum_k weights[k] * L_k (plus the pooling
/// regulariser when `with_regularizer`) into `grad`. Heads with zero weight
/// are skipped, so their gradients stay exactly zero.
inline void model_backward(const ModelParams& p, const PreparedEvent& event, const ForwardTrace& t,
                           const ModelConfig& config, const TaskVector& weights, bool with_regularizer,
                           ModelParams& grad) {
    const PooledGraph& pooled = t.backbone.pooled;
    const PredictionGrad pg = loss_gradient(t.predictions, event.targets, weights);
    Matrix d_communities = Matrix::Zero(pooled.communities.rows(), pooled.communities.cols());
    Matrix d_assignment;
    Matrix d_x2;
    bool touched = false;

    RowVector d_readout = RowVector::Zero(t.readout.size());
    if (weights[0] != 0.0) {
        d_readout += mlp_backward(p.heads.rumor, grad.heads.rumor, pg.rumor_logits, t.rumor).row(0);
        touched = true;
    }
    if (weights[1] != 0.0) {
        d_readout += mlp_backward(p.heads.virality, grad.heads.virality, Matrix::Constant(1, 1, pg.virality), t.virality)
                         .row(0);
        touched = true;
    }
    d_communities.rowwise() += d_readout;

    if (weights[2] != 0.0 && !event.targets.labeled_nodes.empty()) {
        const Vector& s = t.predictions.vulnerability;
        const Matrix d_logit = pg.vulnerability.cwiseProduct(s).cwiseProduct((1.0 - s.array()).matrix());
        const Matrix d_x4 = mlp_backward(p.heads.vulnerability, grad.heads.vulnerability, d_logit, t.vulnerability);
        const CvpGrad cg = cvp_refine_backward(p.heads.cvp, grad.heads.cvp, apply_mask(d_x4, t.mask4),
                                               pooled.assignment, pooled.communities, event.input.ops, t.cvp);
        d_x2 = cg.x2;
        d_assignment = cg.assignment;
        d_communities += cg.communities;
        touched = true;
    }
    if (with_regularizer && config.pooling_regularizers) {
        pooling_regularizers(pooled.assignment, event.input.adjacency, config.pooling_regularizer_weight, d_assignment);
        touched = true;
    }
    if (touched) backbone_backward(p.backbone, grad.backbone, event.input, t.backbone, d_x2, d_communities, d_assignment);
}

/// Batch objective: losses averaged over events. Dropout masks for event i
/// come from Rng(dropout_seeds[i]); an empty seed list disables dropout.
/// Events are processed on up to `jobs` threads; per-event gradients are
/// summed in event order so the result does not depend on `jobs`.
class BatchObjective {
public:
    BatchObjective(const ModelConfig& config, std::vector<const PreparedEvent*> events,
                   std::vector<std::uint64_t> dropout_seeds = {}, unsigned jobs = 1)
        : config_(&config), events_(std::move(events)), seeds_(std::move(dropout_seeds)), jobs_(std::max(1u, jobs)) {
        if (!seeds_.empty() && seeds_.size() != events_.size()) {
            throw Error(ErrorCode::ConfigInvalid, "one dropout seed per event required");
        }
    }

    Evaluation<ModelParams> operator()(const ModelParams& p, const TaskVector& weights, bool per_task) const {
        if (events_.empty()) throw Error(ErrorCode::EmptyInput, "empty batch");
        struct Partial {
            LossBundle losses;
            double regularizer = 0.0;
            std::optional<ModelParams> combined;
            std::array<std::optional<ModelParams>, kTaskCount> tasks;
        };
        std::vector<Partial> parts(events_.size());
        auto work = [&](std::size_t i) {
            const PreparedEvent& event = *events_[i];
            std::optional<Rng> rng;
            if (!seeds_.empty()) rng.emplace(seeds_[i]);
            const ForwardTrace t = forward_trace(p, event, *config_, rng ? &*rng : nullptr);
            Partial& part = parts[i];
            part.losses = event_losses(t.predictions, event.targets);
            part.regularizer = t.regularizer;
            if (!per_task) {
                part.combined = zeros_like(p);
                model_backward(p, event, t, *config_, weights, true, *part.combined);
                return;
            }
            for (int k = 0; k < kTaskCount; ++k) {
                TaskVector one{};
                one[static_cast<std::size_t>(k)] = 1.0;
                auto& g = part.tasks[static_cast<std::size_t>(k)];
                g = zeros_like(p);
                model_backward(p, event, t, *config_, one, false, *g);
            }
            if (config_->pooling_regularizers) {
                part.combined = zeros_like(p);
                model_backward(p, event, t, *config_, TaskVector{}, true, *part.combined);
            }
        };
        run_parallel(events_.size(), work);

        const double inv = 1.0 / static_cast<double>(events_.size());
        Evaluation<ModelParams> out;
        out.combined = zeros_like(p);
        if (per_task) {
            for (auto& g : out.per_task) g = zeros_like(p);
            out.has_per_task = true;
        }
        for (const Partial& part : parts) {
            const TaskVector l = part.losses.as_vector();
            for (int k = 0; k < kTaskCount; ++k) out.losses[static_cast<std::size_t>(k)] += inv * l[static_cast<std::size_t>(k)];
            out.extra_loss += inv * part.regularizer;
            if (part.combined) add_scaled(out.combined, *part.combined, inv);
            if (per_task) {
                for (int k = 0; k < kTaskCount; ++k) {
                    add_scaled(out.per_task[static_cast<std::size_t>(k)], *part.tasks[static_cast<std::size_t>(k)], inv);
                }
            }
        }
        if (per_task) {
            for (int k = 0; k < kTaskCount; ++k) {
                const double w = weights[static_cast<std::size_t>(k)];
                if (w != 0.0) add_scaled(out.combined, out.per_task[static_cast<std::size_t>(k)], w);
            }
        }
        return out;
    }

    std::size_t size() const { return events_.size(); }

private:
    template <class Work>
    void run_parallel(std::size_t n, Work& work) const {
        const std::size_t workers = std::min<std::size_t>(jobs_, n);
        if (workers <= 1) {
            for (std::size_t i = 0; i < n; ++i) work(i);
            return;
        }
        std::vector<std::thread> threads;
        std::vector<std::exception_ptr> errors(workers);
        for (std::size_t w = 0; w < workers; ++w) {
            threads.emplace_back([&, w] {
                try {
                    for (std::size_t i = w; i < n; i += workers) work(i);
                } catch (...) {
                    errors[w] = std::current_exception();
                }
            });
        }
        for (auto& t : threads) t.join();
        for (auto& e : errors) {
            if (e) std::rethrow_exception(e);
        }
    }

    const ModelConfig* config_;
    std::vector<const PreparedEvent*> events_;
    std::vector<std::uint64_t> seeds_;
    unsigned jobs_;
};

}  // namespace cascadenet
