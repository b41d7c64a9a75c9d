#pragma once

// Cross-event user graph and random-walk contrastive user embeddings.

#include "cascadenet/data/observe.hpp"

#include <cstdio>
#include <map>

namespace cascadenet {

struct GlobalUserGraph {
    std::vector<std::string> users;
    std::map<std::string, int> index;
    std::vector<std::vector<int>> neighbors;  // sorted, no self-loops, symmetric

    std::size_t size() const { return users.size(); }
    std::size_t degree(int u) const { return neighbors[static_cast<std::size_t>(u)].size(); }

    int add_user(const std::string& id) {
        auto [it, inserted] = index.emplace(id, static_cast<int>(users.size()));
        if (inserted) {
            users.push_back(id);
            neighbors.emplace_back();
        }
        return it->second;
    }
};

/// Merges the full-event interaction graphs of `events` into one graph with
/// identical users collapsed.
inline GlobalUserGraph build_global_user_graph(const std::vector<const PropagationEvent*>& events) {
    GlobalUserGraph g;
    std::set<std::pair<int, int>> edges;
    for (const PropagationEvent* e : events) {
        const auto local = build_user_graph(observe_prefix(*e, 1.0));
        std::vector<int> ids;
        ids.reserve(local.users.size());
        for (const auto& u : local.users) ids.push_back(g.add_user(u));
        for (auto [a, b] : local.flow_edges) {
            const int x = ids[static_cast<std::size_t>(a)];
            const int y = ids[static_cast<std::size_t>(b)];
            edges.emplace(std::min(x, y), std::max(x, y));
        }
    }
    for (auto [a, b] : edges) {
        g.neighbors[static_cast<std::size_t>(a)].push_back(b);
        g.neighbors[static_cast<std::size_t>(b)].push_back(a);
    }
    for (auto& n : g.neighbors) std::sort(n.begin(), n.end());
    return g;
}

inline GlobalUserGraph build_global_user_graph(const std::vector<PropagationEvent>& events) {
    std::vector<const PropagationEvent*> ptrs;
    for (const auto& e : events) ptrs.push_back(&e);
    return build_global_user_graph(ptrs);
}

struct ContrastiveTriplet {
    int anchor;
    int positive;
    int negative;
};

struct WalkSample {
    std::vector<int> path;  // nodes visited after the anchor, in order
    int positive = -1;
};

/// Simple random walk of `walk_len` steps from the anchor; the positive is a
/// uniformly chosen non-anchor node of the path.
inline WalkSample sample_walk_positive(const GlobalUserGraph& graph, int anchor, int walk_len, Rng& rng) {
    if (graph.degree(anchor) == 0) {
        throw Error(ErrorCode::IsolatedAnchor, "user '" + graph.users[static_cast<std::size_t>(anchor)] + "' has no neighbors");
    }
    WalkSample out;
    out.path.reserve(static_cast<std::size_t>(walk_len));
    int at = anchor;
    for (int step = 0; step < walk_len; ++step) {
        const auto& nb = graph.neighbors[static_cast<std::size_t>(at)];
        at = nb[uniform_index(rng, nb.size())];
        out.path.push_back(at);
    }
    std::vector<int> candidates;
    for (int node : out.path) {
        if (node != anchor) candidates.push_back(node);
    }
    // The first step always leaves the anchor, so candidates is non-empty.
    out.positive = candidates[uniform_index(rng, candidates.size())];
    return out;
}

/// Positive from `sample_walk_positive`; negative is a uniform user that is
/// neither the anchor nor on the walk.
inline ContrastiveTriplet sample_contrastive_triplet(const GlobalUserGraph& graph, int anchor, int walk_len, Rng& rng) {
    const auto [path, positive] = sample_walk_positive(graph, anchor, walk_len, rng);

    std::vector<bool> excluded(graph.size(), false);
    excluded[static_cast<std::size_t>(anchor)] = true;
    std::size_t excluded_count = 1;
    for (int node : path) {
        if (!excluded[static_cast<std::size_t>(node)]) {
            excluded[static_cast<std::size_t>(node)] = true;
            ++excluded_count;
        }
    }
    if (excluded_count >= graph.size()) {
        throw Error(ErrorCode::NoNegativeCandidate, "walk covers every user");
    }
    std::size_t pick = uniform_index(rng, graph.size() - excluded_count);
    int negative = -1;
    for (std::size_t u = 0; u < graph.size(); ++u) {
        if (excluded[u]) continue;
        if (pick == 0) {
            negative = static_cast<int>(u);
            break;
        }
        --pick;
    }
    return {anchor, positive, negative};
}

struct PretrainConfig {
    int dim = 64;
    int epochs = 20;
    int walk_len = 5;
    double lr = 5e-3;
};

struct UserEmbeddingTable {
    int dim = 0;
    std::vector<std::string> users;
    std::map<std::string, int> index;
    Matrix vectors;  // users.size() x dim, unit rows
    RowVector fallback;

    RowVector lookup(const std::string& user) const {
        auto it = index.find(user);
        if (it == index.end()) return fallback;
        return vectors.row(it->second);
    }

    bool contains(const std::string& user) const { return index.count(user) > 0; }
};

inline RowVector normalized_mean(const Matrix& rows) {
    RowVector mean = rows.colwise().mean();
    const double norm = mean.norm();
    if (norm > 0.0) mean /= norm;
    return mean;
}

inline void normalize_rows(Matrix& m) {
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        const double n = m.row(i).norm();
        if (n > 0.0) m.row(i) /= n;
    }
}

/// One gradient step on loss = x_a.x_neg - x_a.x_pos, without
/// re-normalization.
inline void contrastive_step(Matrix& vectors, const ContrastiveTriplet& t, double lr) {
    const RowVector a = vectors.row(t.anchor);
    const RowVector p = vectors.row(t.positive);
    const RowVector n = vectors.row(t.negative);
    vectors.row(t.anchor) = a - lr * (n - p);
    vectors.row(t.positive) = p + lr * a;
    vectors.row(t.negative) = n - lr * a;
}

/// Maximises x_a.x_pos - x_a.x_neg over sampled triplets by plain gradient
/// steps, projecting every touched vector back to the unit sphere.
inline UserEmbeddingTable pretrain_user_embeddings(const GlobalUserGraph& graph, const PretrainConfig& config,
                                                   std::uint64_t seed) {
    UserEmbeddingTable table;
    table.dim = config.dim;
    table.users = graph.users;
    for (std::size_t i = 0; i < graph.users.size(); ++i) table.index.emplace(graph.users[i], static_cast<int>(i));

    Rng rng(derive_seed(seed, 0x9e7a41ULL));
    table.vectors.resize(static_cast<Eigen::Index>(graph.size()), config.dim);
    for (Eigen::Index i = 0; i < table.vectors.rows(); ++i)
        for (Eigen::Index j = 0; j < table.vectors.cols(); ++j) table.vectors(i, j) = standard_normal(rng);
    normalize_rows(table.vectors);

    std::vector<int> order(graph.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        shuffle_in_place(order, rng);
        for (int anchor : order) {
            if (graph.degree(anchor) == 0 || graph.size() < 3) continue;
            ContrastiveTriplet t;
            try {
                t = sample_contrastive_triplet(graph, anchor, config.walk_len, rng);
            } catch (const Error& e) {
                if (e.code() == ErrorCode::NoNegativeCandidate) continue;
                throw;
            }
            contrastive_step(table.vectors, t, config.lr);
            for (int row : {t.anchor, t.positive, t.negative}) {
                const double norm = table.vectors.row(row).norm();
                if (norm > 0.0) table.vectors.row(row) /= norm;
            }
        }
    }
    table.fallback = graph.size() > 0 ? normalized_mean(table.vectors) : RowVector::Zero(config.dim);
    if (table.fallback.norm() == 0.0) {
        table.fallback = RowVector::Zero(config.dim);
        table.fallback(0) = 1.0;
    }
    return table;
}

inline RowVector lookup_user_embedding(const UserEmbeddingTable& table, const std::string& user) {
    return table.lookup(user);
}

inline constexpr int kEmbeddingFormatVersion = 1;

/// Text format: a header line, one row per user, then the fallback row.
/// Values are written with 17 significant digits, which round-trips doubles
/// exactly.
inline void save_embedding_table(const std::string& path, const UserEmbeddingTable& table) {
    std::FILE* f = std::fopen(path.c_str(), "wb");
    if (!f) throw Error(ErrorCode::IoError, "cannot write '" + path + "'");
    std::fprintf(f, "cascadenet-user-embeddings version=%d dim=%d users=%zu\n", kEmbeddingFormatVersion, table.dim,
                 table.users.size());
    auto write_row = [&](const std::string& id, const auto& row) {
        std::fputs(id.c_str(), f);
        for (Eigen::Index j = 0; j < row.size(); ++j) std::fprintf(f, " %.17g", row(j));
        std::fputc('\n', f);
    };
    for (std::size_t i = 0; i < table.users.size(); ++i) {
        if (table.users[i].find_first_of(" \t\n") != std::string::npos) {
            std::fclose(f);
            throw Error(ErrorCode::ValidationError, "user id contains whitespace: '" + table.users[i] + "'");
        }
        write_row(table.users[i], table.vectors.row(static_cast<Eigen::Index>(i)));
    }
    write_row("<fallback>", table.fallback);
    const bool ok = std::fclose(f) == 0;
    if (!ok) throw Error(ErrorCode::IoError, "write failed for '" + path + "'");
}

inline UserEmbeddingTable load_embedding_table(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::IoError, "cannot open '" + path + "'");
    std::string magic, version, dim, users;
    in >> magic >> version >> dim >> users;
    if (magic != "cascadenet-user-embeddings") throw Error(ErrorCode::ValidationError, "not an embedding table");
    if (version != "version=" + std::to_string(kEmbeddingFormatVersion)) {
        throw Error(ErrorCode::VersionMismatch, "embedding table " + version);
    }
    UserEmbeddingTable table;
    try {
        table.dim = std::stoi(dim.substr(4));
        const std::size_t count = std::stoull(users.substr(6));
        table.vectors.resize(static_cast<Eigen::Index>(count), table.dim);
        table.fallback.resize(table.dim);
        for (std::size_t i = 0; i <= count; ++i) {
            std::string id;
            in >> id;
            for (int j = 0; j < table.dim; ++j) {
                std::string token;
                in >> token;
                const double v = std::strtod(token.c_str(), nullptr);
                if (i < count) table.vectors(static_cast<Eigen::Index>(i), j) = v;
                else table.fallback(j) = v;
            }
            if (!in) throw Error(ErrorCode::ValidationError, "truncated embedding table");
            if (i < count) {
                table.index.emplace(id, static_cast<int>(i));
                table.users.push_back(std::move(id));
            }
        }
    } catch (const std::logic_error& e) {
        throw Error(ErrorCode::ValidationError, std::string("embedding table header: ") + e.what());
    }
    return table;
}

}  // namespace cascadenet
