#pragma once

// Propagation events: one source post plus its repost cascade.

#include "cascadenet/core/common.hpp"

#include <json.hpp>

#include <algorithm>
#include <fstream>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

namespace cascadenet {

enum class Label : int { NonRumor = 0, Rumor = 1 };

inline std::string_view label_name(Label label) {
    return label == Label::Rumor ? "rumor" : "non_rumor";
}

inline Label parse_label(std::string_view text) {
    if (text == "rumor") return Label::Rumor;
    if (text == "non_rumor") return Label::NonRumor;
    throw Error(ErrorCode::MalformedRecord, "unknown label '" + std::string(text) + "'");
}

struct Post {
    std::string post_id;
    std::optional<std::string> parent_id;
    std::string user_id;
    double timestamp = 0.0;
    std::string text;

    bool operator==(const Post&) const = default;
};

struct PropagationEvent {
    std::string event_id;
    Label label = Label::NonRumor;
    std::vector<Post> posts;  // chronological, source first
    double duration = 0.0;    // timestamp of the last post

    /// Index of each post's parent within `posts`, -1 for the source.
    std::vector<int> parent_index() const {
        std::unordered_map<std::string_view, int> index;
        index.reserve(posts.size());
        for (std::size_t i = 0; i < posts.size(); ++i) index.emplace(posts[i].post_id, static_cast<int>(i));
        std::vector<int> parents(posts.size(), -1);
        for (std::size_t i = 0; i < posts.size(); ++i) {
            if (posts[i].parent_id) parents[i] = index.at(*posts[i].parent_id);
        }
        return parents;
    }

    /// Unique user ids in first-appearance order.
    std::vector<std::string> unique_users() const {
        std::vector<std::string> users;
        std::unordered_map<std::string_view, bool> seen;
        for (const Post& p : posts) {
            if (seen.emplace(p.user_id, true).second) users.push_back(p.user_id);
        }
        return users;
    }
};

namespace detail {

inline const nlohmann::json& require(const nlohmann::json& obj, const char* key) {
    auto it = obj.find(key);
    if (it == obj.end()) throw Error(ErrorCode::MalformedRecord, std::string("missing field '") + key + "'");
    return *it;
}

inline std::string require_string(const nlohmann::json& obj, const char* key) {
    const auto& v = require(obj, key);
    if (!v.is_string()) throw Error(ErrorCode::MalformedRecord, std::string("field '") + key + "' must be a string");
    return v.get<std::string>();
}

}  // namespace detail

/// Validates one event record and normalises it: posts sorted by
/// (timestamp, post_id), timestamps rebased to the source post.
inline PropagationEvent parse_event(const nlohmann::json& record) {
    if (!record.is_object()) throw Error(ErrorCode::MalformedRecord, "record is not an object");
    PropagationEvent event;
    event.event_id = detail::require_string(record, "event_id");
    event.label = parse_label(detail::require_string(record, "label"));
    const auto& posts = detail::require(record, "posts");
    if (!posts.is_array() || posts.empty()) {
        throw Error(ErrorCode::MalformedRecord, "event '" + event.event_id + "' has no posts");
    }

    event.posts.reserve(posts.size());
    for (const auto& p : posts) {
        Post post;
        post.post_id = detail::require_string(p, "post_id");
        const auto& parent = detail::require(p, "parent_id");
        if (!parent.is_null()) {
            if (!parent.is_string()) throw Error(ErrorCode::MalformedRecord, "parent_id must be a string or null");
            post.parent_id = parent.get<std::string>();
        }
        post.user_id = detail::require_string(p, "user_id");
        const auto& ts = detail::require(p, "ts");
        if (!ts.is_number()) throw Error(ErrorCode::MalformedRecord, "ts must be a number");
        post.timestamp = ts.get<double>();
        if (!std::isfinite(post.timestamp)) throw Error(ErrorCode::MalformedRecord, "ts must be finite");
        if (auto it = p.find("text"); it != p.end() && !it->is_null()) {
            if (!it->is_string()) throw Error(ErrorCode::MalformedRecord, "text must be a string");
            post.text = it->get<std::string>();
        }
        event.posts.push_back(std::move(post));
    }

    std::unordered_map<std::string, std::size_t> by_id;
    for (std::size_t i = 0; i < event.posts.size(); ++i) {
        if (!by_id.emplace(event.posts[i].post_id, i).second) {
            throw Error(ErrorCode::MalformedRecord, "duplicate post_id '" + event.posts[i].post_id + "'");
        }
    }

    std::size_t sources = 0;
    std::size_t root = 0;
    for (std::size_t i = 0; i < event.posts.size(); ++i) {
        if (!event.posts[i].parent_id) {
            ++sources;
            root = i;
        }
    }
    if (sources != 1) {
        throw Error(ErrorCode::MissingSource, "event '" + event.event_id + "' must have exactly one source post, found " +
                                                  std::to_string(sources));
    }

    std::vector<std::vector<std::size_t>> children(event.posts.size());
    for (std::size_t i = 0; i < event.posts.size(); ++i) {
        const auto& parent = event.posts[i].parent_id;
        if (!parent) continue;
        auto it = by_id.find(*parent);
        if (it == by_id.end()) {
            throw Error(ErrorCode::DanglingParent, "post '" + event.posts[i].post_id + "' cites unknown parent '" +
                                                       *parent + "'");
        }
        children[it->second].push_back(i);
    }

    // Every post must be reachable from the source; anything left over sits
    // on a parent cycle.
    std::vector<bool> reached(event.posts.size(), false);
    std::vector<std::size_t> stack{root};
    reached[root] = true;
    std::size_t reached_count = 1;
    while (!stack.empty()) {
        const std::size_t node = stack.back();
        stack.pop_back();
        for (std::size_t child : children[node]) {
            if (!reached[child]) {
                reached[child] = true;
                ++reached_count;
                stack.push_back(child);
            }
        }
    }
    if (reached_count != event.posts.size()) {
        throw Error(ErrorCode::CycleDetected, "event '" + event.event_id + "' has posts on a parent cycle");
    }

    for (std::size_t i = 0; i < event.posts.size(); ++i) {
        const auto& parent = event.posts[i].parent_id;
        if (parent && event.posts[i].timestamp < event.posts[by_id[*parent]].timestamp) {
            throw Error(ErrorCode::NonMonotoneChild,
                        "post '" + event.posts[i].post_id + "' is earlier than its parent '" + *parent + "'");
        }
    }

    const double origin = event.posts[root].timestamp;
    for (Post& p : event.posts) p.timestamp -= origin;
    std::stable_sort(event.posts.begin(), event.posts.end(), [](const Post& a, const Post& b) {
        if (a.timestamp != b.timestamp) return a.timestamp < b.timestamp;
        // The source sorts first among posts sharing timestamp 0.
        if (a.parent_id.has_value() != b.parent_id.has_value()) return !a.parent_id.has_value();
        return a.post_id < b.post_id;
    });
    event.duration = event.posts.back().timestamp;
    return event;
}

inline nlohmann::json to_json(const PropagationEvent& event) {
    nlohmann::json posts = nlohmann::json::array();
    for (const Post& p : event.posts) {
        posts.push_back({{"post_id", p.post_id},
                         {"parent_id", p.parent_id ? nlohmann::json(*p.parent_id) : nlohmann::json(nullptr)},
                         {"user_id", p.user_id},
                         {"ts", p.timestamp},
                         {"text", p.text}});
    }
    return {{"event_id", event.event_id}, {"label", label_name(event.label)}, {"posts", std::move(posts)}};
}

inline std::string to_jsonl(const std::vector<PropagationEvent>& corpus) {
    std::string out;
    for (const auto& e : corpus) {
        out += to_json(e).dump();
        out += '\n';
    }
    return out;
}

inline std::vector<PropagationEvent> read_events(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::IoError, "cannot open '" + path + "'");
    std::vector<PropagationEvent> corpus;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        nlohmann::json record;
        try {
            record = nlohmann::json::parse(line);
        } catch (const nlohmann::json::parse_error& e) {
            throw Error(ErrorCode::MalformedRecord, path + ":" + std::to_string(line_no) + ": " + e.what());
        }
        try {
            corpus.push_back(parse_event(record));
        } catch (const Error& e) {
            throw Error(e.code(), path + ":" + std::to_string(line_no) + ": " + e.what());
        }
    }
    return corpus;
}

inline void write_events(const std::string& path, const std::vector<PropagationEvent>& corpus) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorCode::IoError, "cannot write '" + path + "'");
    out << to_jsonl(corpus);
    if (!out) throw Error(ErrorCode::IoError, "write failed for '" + path + "'");
}

}  // namespace cascadenet
