#pragma once

// Helpers shared by the unit tests and the acceptance binary.

#include "cascadenet/cascadenet.hpp"

#include <functional>

namespace cascadenet::testing {

/// Relative error ||analytic - numeric|| / (||analytic|| + ||numeric||)
/// between an analytic gradient and central differences of `loss` w.r.t.
/// every entry of `x`. Both gradients below the difference noise floor
/// count as agreement.
inline double fd_relative_error(Matrix& x, const Matrix& analytic, const std::function<double()>& loss,
                                double step = 1e-5) {
    Matrix numeric(x.rows(), x.cols());
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        const double saved = x.data()[i];
        x.data()[i] = saved + step;
        const double up = loss();
        x.data()[i] = saved - step;
        const double down = loss();
        x.data()[i] = saved;
        numeric.data()[i] = (up - down) / (2.0 * step);
    }
    const double scale = analytic.norm() + numeric.norm();
    if (scale < 1e-8) return 0.0;
    return (analytic - numeric).norm() / scale;
}

/// Best agreement over several steps. Small steps lose tensors whose gradient
/// sits near the roundoff floor, large steps lose ReLU kinks; no single step
/// serves both.
inline double fd_best_relative_error(Matrix& x, const Matrix& analytic, const std::function<double()>& loss) {
    double best = std::numeric_limits<double>::infinity();
    for (double step : {1e-5, 1e-4, 1e-6}) {
        best = std::min(best, fd_relative_error(x, analytic, loss, step));
        if (best <= 1e-6) break;
    }
    return best;
}

/// Worst per-tensor relative error over a whole parameter set.
template <ParameterSet P>
double fd_parameter_error(P& params, const P& analytic, const std::function<double()>& loss,
                          std::string* worst_name = nullptr, bool multi_step = false) {
    auto p = tensors(params);
    auto g = tensors(analytic);
    double worst = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        const double err = multi_step ? fd_best_relative_error(*p[i].value, *g[i].value, loss)
                                      : fd_relative_error(*p[i].value, *g[i].value, loss);
        if (err > worst) {
            worst = err;
            if (worst_name) *worst_name = p[i].name;
        }
    }
    return worst;
}

inline Matrix random_matrix(Eigen::Index rows, Eigen::Index cols, Rng& rng, double scale = 1.0) {
    Matrix m(rows, cols);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = scale * standard_normal(rng);
    return m;
}

/// Random directed user graph on n nodes without self-loops.
inline UserInteractionGraph random_user_graph(std::size_t n, Rng& rng, double edge_prob = 0.4) {
    UserInteractionGraph g;
    for (std::size_t i = 0; i < n; ++i) g.users.push_back("u" + std::to_string(i));
    for (std::size_t a = 0; a < n; ++a)
        for (std::size_t b = 0; b < n; ++b)
            if (a != b && uniform01(rng) < edge_prob) g.flow_edges.emplace(static_cast<int>(a), static_cast<int>(b));
    return g;
}

struct PostSpec {
    std::string id;
    std::optional<std::string> parent;
    std::string user;
    double t;
    std::string text = "";
};

inline nlohmann::json event_record(const std::string& id, Label label, const std::vector<PostSpec>& posts) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& p : posts) {
        nlohmann::json j = {{"post_id", p.id},
                            {"parent_id", p.parent ? nlohmann::json(*p.parent) : nlohmann::json(nullptr)},
                            {"user_id", p.user},
                            {"ts", p.t},
                            {"text", p.text}};
        arr.push_back(j);
    }
    return {{"event_id", id}, {"label", label_name(label)}, {"posts", arr}};
}

inline PropagationEvent make_event(const std::string& id, Label label, const std::vector<PostSpec>& posts) {
    return parse_event(event_record(id, label, posts));
}

/// Random valid event: n posts, random earlier parents, users drawn from a
/// pool of `users` ids.
inline PropagationEvent random_event(const std::string& id, std::size_t n, std::size_t users, Rng& rng,
                                     const std::string& user_prefix = "u") {
    std::vector<PostSpec> posts;
    std::vector<double> times{0.0};
    for (std::size_t i = 1; i < n; ++i) times.push_back(times.back() + exponential(rng, 1.0) * 10.0);
    for (std::size_t i = 0; i < n; ++i) {
        PostSpec p;
        p.id = id + "_p" + std::to_string(i);
        if (i > 0) p.parent = id + "_p" + std::to_string(uniform_index(rng, i));
        p.user = user_prefix + std::to_string(uniform_index(rng, users));
        p.t = times[i];
        p.text = "word" + std::to_string(uniform_index(rng, 7)) + " token" + std::to_string(uniform_index(rng, 5));
        posts.push_back(p);
    }
    return make_event(id, uniform01(rng) < 0.5 ? Label::Rumor : Label::NonRumor, posts);
}

/// Small model configuration for gradient checks.
inline ModelConfig toy_model_config(int dim, int communities, DirectionMode mode = DirectionMode::Undirected) {
    ModelConfig c;
    c.dim = dim;
    c.communities = communities;
    c.direction = mode;
    c.max_post_tokens = 8;
    return c;
}

/// Random embedding table of unit rows for the given users.
inline UserEmbeddingTable random_table(const std::vector<std::string>& users, int dim, Rng& rng) {
    UserEmbeddingTable t;
    t.dim = dim;
    t.users = users;
    t.vectors = random_matrix(static_cast<Eigen::Index>(users.size()), dim, rng);
    normalize_rows(t.vectors);
    for (std::size_t i = 0; i < users.size(); ++i) t.index.emplace(users[i], static_cast<int>(i));
    t.fallback = normalized_mean(t.vectors);
    return t;
}

inline std::vector<const PropagationEvent*> pointers(const std::vector<PropagationEvent>& events) {
    std::vector<const PropagationEvent*> out;
    for (const auto& e : events) out.push_back(&e);
    return out;
}

/// Six hand-checkable events. Users a and b join three events each
/// (a: 2 rumors of 3, b: 1 rumor of 3); every other user joins one. The last
/// event has exactly 256 unique users.
inline std::vector<PropagationEvent> label_fixture_corpus() {
    std::vector<PropagationEvent> corpus;
    corpus.push_back(make_event("E1", Label::Rumor,
                                {{"e1s", std::nullopt, "a", 0}, {"e1r1", "e1s", "b", 5}, {"e1r2", "e1r1", "c", 9}}));
    corpus.push_back(make_event("E2", Label::Rumor, {{"e2s", std::nullopt, "a", 0}, {"e2r1", "e2s", "d", 3}}));
    corpus.push_back(make_event("E3", Label::NonRumor,
                                {{"e3s", std::nullopt, "a", 0},
                                 {"e3r1", "e3s", "b", 1},
                                 {"e3r2", "e3s", "e", 2},
                                 {"e3r3", "e3r1", "a", 4}}));
    corpus.push_back(make_event("E4", Label::NonRumor, {{"e4s", std::nullopt, "b", 0}, {"e4r1", "e4s", "f", 7}}));
    corpus.push_back(make_event("E5", Label::Rumor, {{"e5s", std::nullopt, "g", 0}}));
    std::vector<PostSpec> big{{"e6s", std::nullopt, "h0", 0}};
    for (int i = 1; i < 256; ++i) big.push_back({"e6r" + std::to_string(i), "e6s", "h" + std::to_string(i), double(i)});
    corpus.push_back(make_event("E6", Label::NonRumor, big));
    return corpus;
}

/// Toy model with one scalar backbone parameter b and one scalar head h_k
/// per task: L_k = 0.5 * (b * h_k * x_k - y_k)^2.
struct ScalarToy {
    Matrix b = Matrix::Constant(1, 1, 1.0);
    std::array<Matrix, kTaskCount> h{Matrix::Constant(1, 1, 1.0), Matrix::Constant(1, 1, 1.0),
                                     Matrix::Constant(1, 1, 1.0)};

    template <class Self, class F>
    static void visit(Self& self, F&& f) {
        f("toy.backbone", kBackbone, self.b);
        for (int k = 0; k < kTaskCount; ++k) f("toy.head" + std::to_string(k), k, self.h[static_cast<std::size_t>(k)]);
    }

    double bv() const { return b(0, 0); }
    double hv(std::size_t k) const { return h[k](0, 0); }
};

struct ScalarToyObjective {
    TaskVector x{1.0, 1.0, 1.0};
    TaskVector y{1.0, 1.0, 1.0};

    Evaluation<ScalarToy> operator()(const ScalarToy& p, const TaskVector& w, bool per_task) const {
        Evaluation<ScalarToy> e;
        e.combined = zeros_like(p);
        for (auto& g : e.per_task) g = zeros_like(p);
        e.has_per_task = per_task;
        for (std::size_t k = 0; k < 3; ++k) {
            const double r = p.bv() * p.hv(k) * x[k] - y[k];
            e.losses[k] = 0.5 * r * r;
            const double db = r * p.hv(k) * x[k];
            const double dh = r * p.bv() * x[k];
            e.per_task[k].b(0, 0) = db;
            e.per_task[k].h[k](0, 0) = dh;
            e.combined.b(0, 0) += w[k] * db;
            e.combined.h[k](0, 0) += w[k] * dh;
        }
        return e;
    }
};

}  // namespace cascadenet::testing
