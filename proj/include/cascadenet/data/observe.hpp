#pragma once

// Observation prefixes and per-event user interaction graphs.

#include "cascadenet/data/event.hpp"

#include <cassert>
#include <set>
#include <utility>

namespace cascadenet {

/// Time-prefix of an event. Holds a non-owning pointer; the event must
/// outlive the observation.
struct ObservedEvent {
    const PropagationEvent* event = nullptr;
    double fraction = 1.0;
    std::vector<std::size_t> posts;              // indices into event->posts
    std::vector<std::pair<int, int>> reply_edges;  // (child, parent), local indices

    std::size_t size() const { return posts.size(); }
    const Post& post(std::size_t local) const { return event->posts[posts[local]]; }
    double window() const { return fraction * event->duration; }

    /// Symmetric binary post adjacency with zero diagonal.
    Matrix adjacency() const {
        Matrix a = Matrix::Zero(static_cast<Eigen::Index>(size()), static_cast<Eigen::Index>(size()));
        for (auto [child, parent] : reply_edges) {
            a(child, parent) = 1.0;
            a(parent, child) = 1.0;
        }
        return a;
    }
};

/// Retains exactly the posts with timestamp <= fraction * T. Inclusive so
/// that fraction 1 reproduces the full event.
inline ObservedEvent observe_prefix(const PropagationEvent& event, double fraction) {
    assert(fraction > 0.0 && fraction <= 1.0);
    ObservedEvent obs;
    obs.event = &event;
    obs.fraction = fraction;
    const double threshold = fraction * event.duration;
    std::vector<int> local(event.posts.size(), -1);
    for (std::size_t i = 0; i < event.posts.size(); ++i) {
        if (event.posts[i].timestamp <= threshold || !event.posts[i].parent_id) {
            local[i] = static_cast<int>(obs.posts.size());
            obs.posts.push_back(i);
        }
    }
    const auto parents = event.parent_index();
    for (std::size_t i = 0; i < event.posts.size(); ++i) {
        if (local[i] < 0 || parents[i] < 0) continue;
        // A parent is never later than its child, so it is retained too.
        assert(local[static_cast<std::size_t>(parents[i])] >= 0);
        obs.reply_edges.emplace_back(local[i], local[static_cast<std::size_t>(parents[i])]);
    }
    return obs;
}

enum class DirectionMode { Undirected, TopDown, BottomUp, Bidirectional };

inline std::string_view direction_name(DirectionMode mode) {
    switch (mode) {
        case DirectionMode::Undirected: return "undirected";
        case DirectionMode::TopDown: return "top_down";
        case DirectionMode::BottomUp: return "bottom_up";
        case DirectionMode::Bidirectional: return "bidirectional";
    }
    return "undirected";
}

inline DirectionMode parse_direction(std::string_view name) {
    if (name == "undirected") return DirectionMode::Undirected;
    if (name == "top_down") return DirectionMode::TopDown;
    if (name == "bottom_up") return DirectionMode::BottomUp;
    if (name == "bidirectional") return DirectionMode::Bidirectional;
    throw Error(ErrorCode::ConfigInvalid, "unknown direction mode '" + std::string(name) + "'");
}

struct UserInteractionGraph {
    std::vector<std::string> users;  // first-appearance order
    /// (a, b) with a != b: some post by a was reposted or replied to by b.
    std::set<std::pair<int, int>> flow_edges;

    std::size_t size() const { return users.size(); }

    /// Symmetric binary adjacency, zero diagonal.
    SparseMatrix adjacency() const {
        std::set<std::pair<int, int>> sym;
        for (auto [a, b] : flow_edges) {
            sym.emplace(a, b);
            sym.emplace(b, a);
        }
        std::vector<Triplet> trips;
        trips.reserve(sym.size());
        for (auto [a, b] : sym) trips.emplace_back(a, b, 1.0);
        SparseMatrix m(static_cast<Eigen::Index>(size()), static_cast<Eigen::Index>(size()));
        m.setFromTriplets(trips.begin(), trips.end());
        return m;
    }

    /// Directed adjacency with entry (a, b) = 1 iff a -> b carries information.
    SparseMatrix flow() const {
        std::vector<Triplet> trips;
        for (auto [a, b] : flow_edges) trips.emplace_back(a, b, 1.0);
        SparseMatrix m(static_cast<Eigen::Index>(size()), static_cast<Eigen::Index>(size()));
        m.setFromTriplets(trips.begin(), trips.end());
        return m;
    }

    Matrix dense_adjacency() const { return Matrix(adjacency()); }
};

inline UserInteractionGraph build_user_graph(const ObservedEvent& observed) {
    UserInteractionGraph graph;
    std::unordered_map<std::string_view, int> index;
    std::vector<int> author(observed.size());
    for (std::size_t i = 0; i < observed.size(); ++i) {
        const std::string& user = observed.post(i).user_id;
        auto [it, inserted] = index.emplace(user, static_cast<int>(graph.users.size()));
        if (inserted) graph.users.push_back(user);
        author[i] = it->second;
    }
    for (auto [child, parent] : observed.reply_edges) {
        const int from = author[static_cast<std::size_t>(parent)];
        const int to = author[static_cast<std::size_t>(child)];
        if (from != to) graph.flow_edges.emplace(from, to);
    }
    return graph;
}

}  // namespace cascadenet
