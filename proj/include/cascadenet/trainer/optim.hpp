#pragma once

// Optimisation steps written against any ParameterSet and any objective
// callable as  objective(params, weights, per_task) -> Evaluation<P>.

#include "cascadenet/core/params.hpp"

#include <numeric>

namespace cascadenet {

template <class O, class P>
concept Objective = ParameterSet<P> && requires(const O& o, const P& p, const TaskVector& w) {
    { o(p, w, true) } -> std::same_as<Evaluation<P>>;
};

struct AdamConfig {
    double lr = 5e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

template <ParameterSet P>
struct AdamState {
    P m;
    P v;
    std::int64_t t = 0;

    static AdamState zeros(const P& like) { return {zeros_like(like), zeros_like(like), 0}; }
};

template <ParameterSet P>
void adam_update(P& params, const P& grad, AdamState<P>& state, const AdamConfig& cfg) {
    ++state.t;
    const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.t));
    const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.t));
    auto p = tensors(params);
    auto g = tensors(grad);
    auto m = tensors(state.m);
    auto v = tensors(state.v);
    for (std::size_t i = 0; i < p.size(); ++i) {
        Matrix& mi = *m[i].value;
        Matrix& vi = *v[i].value;
        const Matrix& gi = *g[i].value;
        mi = cfg.beta1 * mi + (1.0 - cfg.beta1) * gi;
        vi = cfg.beta2 * vi + (1.0 - cfg.beta2) * gi.cwiseProduct(gi);
        *p[i].value -= (cfg.lr * (mi / c1).array() / ((vi / c2).array().sqrt() + cfg.eps)).matrix();
    }
}

inline TaskVector mask_weights(const TaskMask& mask, const TaskVector& weights = {1.0, 1.0, 1.0}) {
    TaskVector out{};
    for (std::size_t k = 0; k < out.size(); ++k) out[k] = mask[k] ? weights[k] : 0.0;
    return out;
}

inline void require_finite_loss(const TaskVector& losses, double extra, std::string_view where) {
    bool ok = std::isfinite(extra);
    for (double l : losses) ok = ok && std::isfinite(l);
    if (!ok) {
        std::ostringstream msg;
        msg << where << ": losses [" << losses[0] << ", " << losses[1] << ", " << losses[2] << "] extra " << extra;
        throw Error(ErrorCode::NonFiniteLoss, msg.str());
    }
}

struct StepReport {
    TaskVector losses{};     // per-task losses at the pre-step parameters
    double objective = 0.0;  // the value actually minimised by this step
    TaskVector weights{};    // task weights used for this step
};

/// One Adam step on sum_k weights[k] * L_k.
template <ParameterSet P, class O>
    requires Objective<O, P>
StepReport basic_step(P& params, AdamState<P>& adam, const AdamConfig& cfg, const O& objective,
                      const TaskVector& weights) {
    Evaluation<P> e = objective(params, weights, false);
    require_finite_loss(e.losses, e.extra_loss, "basic step");
    adam_update(params, e.combined, adam, cfg);
    return {e.losses, e.weighted_loss(weights), weights};
}

/// First-order meta step: each enabled head takes one plain gradient step
/// on its own loss (theta'_k = theta_k - inner_lr * dL_k/dtheta_k); the
/// outer gradient of sum_k L_k at (theta_b, theta'_1..3) is then applied to
/// the original parameters with Adam.
template <ParameterSet P, class O>
    requires Objective<O, P>
StepReport meta_step(P& params, AdamState<P>& adam, const AdamConfig& cfg, const O& objective, const TaskMask& mask,
                     double inner_lr) {
    const TaskVector weights = mask_weights(mask);
    Evaluation<P> inner = objective(params, weights, false);
    require_finite_loss(inner.losses, inner.extra_loss, "meta inner step");
    // A head's gradient under the masked sum is exactly dL_k/dtheta_k, since
    // no other loss reaches it.
    P adapted = params;
    auto a = tensors(adapted);
    auto g = tensors(inner.combined);
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (a[i].owner == kBackbone || !mask[static_cast<std::size_t>(a[i].owner)]) continue;
        *a[i].value -= inner_lr * *g[i].value;
    }
    Evaluation<P> outer = objective(adapted, weights, false);
    require_finite_loss(outer.losses, outer.extra_loss, "meta outer step");
    adam_update(params, outer.combined, adam, cfg);
    return {inner.losses, outer.weighted_loss(weights), weights};
}

struct GradNormConfig {
    double alpha = 1.5;
    double weight_lr = 2.5e-2;
};

/// One update of the task weights. `shared_grad_norms[k]` is the norm of
/// dL_k/dW at the shared layer W (unweighted), so G_k = w_k * norm_k. The
/// targets Gbar * r_k^alpha are held constant while stepping on
/// sum_k |G_k - target_k|. Weights of disabled tasks are 0; enabled weights
/// are renormalised to sum to the number of enabled tasks. A zero initial
/// loss falls back to equal weights.
inline TaskVector gradnorm_update(const TaskVector& losses, const TaskVector& initial_losses, const TaskVector& weights,
                                  const TaskVector& shared_grad_norms, const TaskMask& mask,
                                  const GradNormConfig& cfg) {
    TaskVector out{};
    std::vector<std::size_t> active;
    for (std::size_t k = 0; k < out.size(); ++k) {
        if (mask[k]) active.push_back(k);
    }
    if (active.empty()) return out;
    const double count = static_cast<double>(active.size());
    for (std::size_t k : active) {
        if (initial_losses[k] == 0.0) {
            for (std::size_t j : active) out[j] = 1.0;
            return out;
        }
    }
    TaskVector g{}, ratio{};
    double g_mean = 0.0, ratio_mean = 0.0;
    for (std::size_t k : active) {
        g[k] = weights[k] * shared_grad_norms[k];
        ratio[k] = losses[k] / initial_losses[k];
        g_mean += g[k] / count;
        ratio_mean += ratio[k] / count;
    }
    constexpr double kMinWeight = 1e-6;
    double total = 0.0;
    for (std::size_t k : active) {
        const double relative = ratio_mean > 0.0 ? ratio[k] / ratio_mean : 1.0;
        const double target = g_mean * std::pow(relative, cfg.alpha);
        const double diff = g[k] - target;
        const double sign = diff > 0.0 ? 1.0 : (diff < 0.0 ? -1.0 : 0.0);
        out[k] = std::max(kMinWeight, weights[k] - cfg.weight_lr * sign * shared_grad_norms[k]);
        total += out[k];
    }
    for (std::size_t k : active) out[k] *= count / total;
    return out;
}

struct GradNormState {
    TaskVector weights{1.0, 1.0, 1.0};
    TaskVector initial_losses{};
    bool initialized = false;
};

/// Selects the shared-layer tensor from a parameter set.
template <class P>
using SharedLayer = std::function<const Matrix&(const P&)>;

/// Adam step on the current weighted loss, then a weight update.
template <ParameterSet P, class O>
    requires Objective<O, P>
StepReport gradnorm_step(P& params, AdamState<P>& adam, const AdamConfig& cfg, const O& objective,
                         const TaskMask& mask, GradNormState& state, const GradNormConfig& gn,
                         const SharedLayer<P>& shared) {
    if (!state.initialized) {
        for (std::size_t k = 0; k < state.weights.size(); ++k) state.weights[k] = mask[k] ? 1.0 : 0.0;
    }
    const TaskVector weights = mask_weights(mask, state.weights);
    Evaluation<P> e = objective(params, weights, true);
    require_finite_loss(e.losses, e.extra_loss, "gradnorm step");
    if (!state.initialized) {
        state.initial_losses = e.losses;
        state.initialized = true;
    }
    TaskVector norms{};
    for (std::size_t k = 0; k < norms.size(); ++k) norms[k] = shared(e.per_task[k]).norm();
    adam_update(params, e.combined, adam, cfg);
    state.weights = gradnorm_update(e.losses, state.initial_losses, state.weights, norms, mask, gn);
    return {e.losses, e.weighted_loss(weights), weights};
}

}  // namespace cascadenet
