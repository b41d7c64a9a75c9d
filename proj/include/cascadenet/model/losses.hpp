#pragma once

// Per-event task losses and their gradients w.r.t. the predictions.

#include "cascadenet/data/labels.hpp"
#include "cascadenet/heads/heads.hpp"

namespace cascadenet {

struct LossBundle {
    double rumor = 0.0;          // cross-entropy
    double virality = 0.0;       // squared error on log2 unique users
    double vulnerability = 0.0;  // mean squared error over labeled users; 0 if none
    std::size_t labeled_user_count = 0;

    double operator[](int task) const {
        return task == 0 ? rumor : task == 1 ? virality : vulnerability;
    }
    TaskVector as_vector() const { return {rumor, virality, vulnerability}; }
    double weighted(const TaskVector& w) const { return w[0] * rumor + w[1] * virality + w[2] * vulnerability; }
};

/// Targets of one event aligned with its user graph.
struct EventTargets {
    Label label = Label::NonRumor;
    double virality = 0.0;
    std::vector<int> labeled_nodes;
    std::vector<double> labeled_values;
};

inline EventTargets event_targets(const LabelSet& labels, const PropagationEvent& event,
                                  const UserInteractionGraph& graph) {
    EventTargets t;
    t.label = event.label;
    auto it = labels.virality.find(event.event_id);
    t.virality = it != labels.virality.end() ? it->second : derive_virality_label(event);
    for (std::size_t u = 0; u < graph.users.size(); ++u) {
        if (auto v = labels.user_vulnerability(graph.users[u])) {
            t.labeled_nodes.push_back(static_cast<int>(u));
            t.labeled_values.push_back(*v);
        }
    }
    return t;
}

inline double cross_entropy(const RowVector& logits, Label label) {
    const double m = logits.maxCoeff();
    const double lse = m + std::log((logits.array() - m).exp().sum());
    return lse - logits(static_cast<int>(label));
}

inline LossBundle event_losses(const Predictions& p, const EventTargets& t) {
    LossBundle out;
    out.rumor = cross_entropy(p.rumor_logits, t.label);
    out.virality = (p.virality - t.virality) * (p.virality - t.virality);
    out.labeled_user_count = t.labeled_nodes.size();
    if (!t.labeled_nodes.empty()) {
        double total = 0.0;
        for (std::size_t i = 0; i < t.labeled_nodes.size(); ++i) {
            const double e = p.vulnerability(t.labeled_nodes[i]) - t.labeled_values[i];
            total += e * e;
        }
        out.vulnerability = total / static_cast<double>(t.labeled_nodes.size());
    }
    return out;
}

inline LossBundle compute_task_losses(const Predictions& preds, const LabelSet& labels, const PropagationEvent& event,
                                      const UserInteractionGraph& graph) {
    return event_losses(preds, event_targets(labels, event, graph));
}

/// dL/d(predictions) for each loss, already scaled by the task weights.
struct PredictionGrad {
    RowVector rumor_logits;
    double virality = 0.0;
    Vector vulnerability;  // dL/d(score), zero for unlabeled users
};

inline PredictionGrad loss_gradient(const Predictions& p, const EventTargets& t, const TaskVector& w) {
    PredictionGrad g;
    const double m = p.rumor_logits.maxCoeff();
    RowVector probs = (p.rumor_logits.array() - m).exp().matrix();
    probs /= probs.sum();
    probs(static_cast<int>(t.label)) -= 1.0;
    g.rumor_logits = w[0] * probs;
    g.virality = w[1] * 2.0 * (p.virality - t.virality);
    g.vulnerability = Vector::Zero(p.vulnerability.size());
    if (!t.labeled_nodes.empty()) {
        const double scale = w[2] * 2.0 / static_cast<double>(t.labeled_nodes.size());
        for (std::size_t i = 0; i < t.labeled_nodes.size(); ++i) {
            const int u = t.labeled_nodes[i];
            g.vulnerability(u) += scale * (p.vulnerability(u) - t.labeled_values[i]);
        }
    }
    return g;
}

}  // namespace cascadenet
