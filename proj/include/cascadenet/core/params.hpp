#pragma once

// Generic operations over parameter sets.
//
// A parameter set is any type P exposing
//
//     template <class Self, class F> static void visit(Self& self, F&& f);
//
// which calls f(name, owner, matrix) once per tensor in a fixed order. `owner`
// is kBackbone for shared tensors or the index of the task head that owns
// the tensor. Everything else in the trainer (optimizers, meta steps,
// checkpoints, gradient checks) is written against this interface, so toy
// models used in tests run through the same code paths as the real network.

#include "cascadenet/core/common.hpp"

#include <array>
#include <concepts>
#include <cstring>
#include <functional>
#include <string>
#include <vector>

namespace cascadenet {

inline constexpr int kBackbone = -1;
inline constexpr int kTaskCount = 3;

enum class Task : int { Rumor = 0, Virality = 1, Vulnerability = 2 };

using TaskVector = std::array<double, kTaskCount>;
using TaskMask = std::array<bool, kTaskCount>;

inline constexpr TaskMask kAllTasks{true, true, true};

inline std::string_view task_name(int task) {
    switch (task) {
        case 0: return "rumor";
        case 1: return "virality";
        case 2: return "vulnerability";
        default: return "backbone";
    }
}

template <class P>
concept ParameterSet = std::copyable<P> && requires(P& p, const P& cp) {
    P::visit(p, [](std::string_view, int, Matrix&) {});
    P::visit(cp, [](std::string_view, int, const Matrix&) {});
};

struct TensorRef {
    std::string name;
    int owner;
    Matrix* value;
};

struct ConstTensorRef {
    std::string name;
    int owner;
    const Matrix* value;
};

template <ParameterSet P>
std::vector<TensorRef> tensors(P& params) {
    std::vector<TensorRef> out;
    P::visit(params, [&](std::string_view name, int owner, Matrix& m) {
        out.push_back({std::string(name), owner, &m});
    });
    return out;
}

template <ParameterSet P>
std::vector<ConstTensorRef> tensors(const P& params) {
    std::vector<ConstTensorRef> out;
    P::visit(params, [&](std::string_view name, int owner, const Matrix& m) {
        out.push_back({std::string(name), owner, &m});
    });
    return out;
}

template <ParameterSet P>
P zeros_like(const P& params) {
    P out = params;
    P::visit(out, [](std::string_view, int, Matrix& m) { m.setZero(); });
    return out;
}

/// dst += scale * src, tensor by tensor.
template <ParameterSet P>
void add_scaled(P& dst, const P& src, double scale) {
    auto d = tensors(dst);
    auto s = tensors(src);
    for (std::size_t i = 0; i < d.size(); ++i) *d[i].value += scale * *s[i].value;
}

template <ParameterSet P>
void scale_in_place(P& params, double scale) {
    P::visit(params, [&](std::string_view, int, Matrix& m) { m *= scale; });
}

/// Zeroes every tensor whose owner is a task not enabled in `mask`.
template <ParameterSet P>
void zero_masked_heads(P& params, const TaskMask& mask) {
    P::visit(params, [&](std::string_view, int owner, Matrix& m) {
        if (owner != kBackbone && !mask[static_cast<std::size_t>(owner)]) m.setZero();
    });
}

template <ParameterSet P>
bool params_finite(const P& params) {
    bool ok = true;
    P::visit(params, [&](std::string_view, int, const Matrix& m) { ok = ok && m.allFinite(); });
    return ok;
}

template <ParameterSet P>
double max_abs_difference(const P& a, const P& b) {
    auto ta = tensors(a);
    auto tb = tensors(b);
    double worst = 0.0;
    for (std::size_t i = 0; i < ta.size(); ++i) {
        if (ta[i].value->size() == 0) continue;
        worst = std::max(worst, (*ta[i].value - *tb[i].value).cwiseAbs().maxCoeff());
    }
    return worst;
}

template <ParameterSet P>
bool bit_equal(const P& a, const P& b) {
    auto ta = tensors(a);
    auto tb = tensors(b);
    if (ta.size() != tb.size()) return false;
    for (std::size_t i = 0; i < ta.size(); ++i) {
        if (ta[i].name != tb[i].name) return false;
        const Matrix& x = *ta[i].value;
        const Matrix& y = *tb[i].value;
        if (x.rows() != y.rows() || x.cols() != y.cols()) return false;
        if (x.size() > 0 &&
            std::memcmp(x.data(), y.data(), sizeof(double) * static_cast<std::size_t>(x.size())) != 0) {
            return false;
        }
    }
    return true;
}

template <ParameterSet P>
std::size_t parameter_count(const P& params) {
    std::size_t n = 0;
    P::visit(params, [&](std::string_view, int, const Matrix& m) { n += static_cast<std::size_t>(m.size()); });
    return n;
}

/// Losses and gradients of a weighted multi-task objective at one point.
/// `combined` is the gradient of sum_k weights[k] * losses[k] + extra_loss;
/// `per_task[k]` (when requested) is the unweighted gradient of losses[k].
template <ParameterSet P>
struct Evaluation {
    TaskVector losses{};
    double extra_loss = 0.0;
    P combined;
    std::array<P, kTaskCount> per_task;
    bool has_per_task = false;

    double weighted_loss(const TaskVector& w) const {
        double total = extra_loss;
        for (int k = 0; k < kTaskCount; ++k) total += w[static_cast<std::size_t>(k)] * losses[static_cast<std::size_t>(k)];
        return total;
    }
};

/// Glorot-uniform fill used for every weight matrix.
inline void glorot_uniform(Matrix& m, Rng& rng) {
    const double limit = std::sqrt(6.0 / static_cast<double>(m.rows() + m.cols()));
    for (Eigen::Index j = 0; j < m.cols(); ++j)
        for (Eigen::Index i = 0; i < m.rows(); ++i) m(i, j) = (2.0 * uniform01(rng) - 1.0) * limit;
}

}  // namespace cascadenet
