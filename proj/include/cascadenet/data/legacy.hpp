#pragma once

// Conversion of legacy propagation-tree dumps into canonical event records.
//
// Each tree file holds one edge per line:
//
//     ['uid', 'tweet_id', 'delay_min']->['uid', 'tweet_id', 'delay_min']
//
// with a parent of ['ROOT', 'ROOT', '0.0'] marking the source. The label
// file has one "label:event_id" per line; "non-rumor" maps to non_rumor and
// every other veracity class ("false", "true", "unverified") to rumor. An
// optional text file holds "event_id<TAB>text" for source posts.

#include "cascadenet/data/event.hpp"

#include <filesystem>
#include <map>
#include <regex>

namespace cascadenet {

struct LegacyConversionReport {
    std::size_t events = 0;
    std::size_t skipped_events = 0;
    std::size_t dropped_edges = 0;
};

namespace legacy_detail {

struct Node {
    std::string uid;
    std::string tweet;
    double delay = 0.0;
    std::string key() const { return uid + ":" + tweet + ":" + std::to_string(delay); }
};

inline std::optional<std::pair<Node, Node>> parse_edge(const std::string& line) {
    static const std::regex pattern(
        R"(\[\s*'([^']*)'\s*,\s*'([^']*)'\s*,\s*'([^']*)'\s*\]\s*->\s*\[\s*'([^']*)'\s*,\s*'([^']*)'\s*,\s*'([^']*)'\s*\])");
    std::smatch m;
    if (!std::regex_search(line, m, pattern)) return std::nullopt;
    auto to_delay = [](const std::string& s) {
        try {
            return std::stod(s);
        } catch (...) {
            return 0.0;
        }
    };
    Node parent{m[1], m[2], to_delay(m[3])};
    Node child{m[4], m[5], to_delay(m[6])};
    return std::make_pair(parent, child);
}

}  // namespace legacy_detail

/// Converts one tree file. Edges whose parent has not been seen, or whose
/// child precedes its parent, are dropped and counted.
inline std::optional<PropagationEvent> convert_legacy_tree(std::istream& tree, const std::string& event_id, Label label,
                                                           const std::string& source_text,
                                                           LegacyConversionReport& report) {
    using legacy_detail::Node;
    PropagationEvent event;
    event.event_id = event_id;
    event.label = label;
    std::map<std::string, std::size_t> known;
    std::string line;
    std::vector<std::pair<Node, Node>> edges;
    while (std::getline(tree, line)) {
        if (auto e = legacy_detail::parse_edge(line)) edges.push_back(*e);
    }
    for (const auto& [parent, child] : edges) {
        if (parent.uid == "ROOT") {
            if (known.count(child.key())) continue;
            Post p;
            p.post_id = child.key();
            p.user_id = child.uid;
            p.timestamp = child.delay * 60.0;
            p.text = source_text;
            known[p.post_id] = event.posts.size();
            event.posts.push_back(std::move(p));
            break;
        }
    }
    if (event.posts.empty()) return std::nullopt;
    for (const auto& [parent, child] : edges) {
        if (parent.uid == "ROOT") continue;
        auto it = known.find(parent.key());
        if (it == known.end() || known.count(child.key()) || child.delay < parent.delay) {
            ++report.dropped_edges;
            continue;
        }
        Post p;
        p.post_id = child.key();
        p.parent_id = parent.key();
        p.user_id = child.uid;
        p.timestamp = child.delay * 60.0;
        known[p.post_id] = event.posts.size();
        event.posts.push_back(std::move(p));
    }
    return parse_event(to_json(event));
}

inline std::vector<PropagationEvent> convert_legacy_corpus(const std::filesystem::path& tree_dir,
                                                           const std::filesystem::path& label_file,
                                                           const std::optional<std::filesystem::path>& text_file,
                                                           LegacyConversionReport& report) {
    std::ifstream labels_in(label_file);
    if (!labels_in) throw Error(ErrorCode::IoError, "cannot open '" + label_file.string() + "'");
    std::map<std::string, std::string> texts;
    if (text_file) {
        std::ifstream in(*text_file);
        if (!in) throw Error(ErrorCode::IoError, "cannot open '" + text_file->string() + "'");
        std::string line;
        while (std::getline(in, line)) {
            const auto tab = line.find('\t');
            if (tab != std::string::npos) texts[line.substr(0, tab)] = line.substr(tab + 1);
        }
    }
    std::vector<PropagationEvent> corpus;
    std::string line;
    while (std::getline(labels_in, line)) {
        const auto colon = line.find(':');
        if (colon == std::string::npos) continue;
        std::string tag = line.substr(0, colon);
        std::string id = line.substr(colon + 1);
        while (!id.empty() && (id.back() == '\r' || id.back() == ' ')) id.pop_back();
        const Label label = (tag == "non-rumor" || tag == "non_rumor") ? Label::NonRumor : Label::Rumor;
        std::ifstream tree(tree_dir / (id + ".txt"));
        if (!tree) {
            ++report.skipped_events;
            continue;
        }
        try {
            auto event = convert_legacy_tree(tree, id, label, texts.count(id) ? texts[id] : std::string(), report);
            if (!event) {
                ++report.skipped_events;
                continue;
            }
            corpus.push_back(std::move(*event));
            ++report.events;
        } catch (const Error&) {
            ++report.skipped_events;
        }
    }
    return corpus;
}

}  // namespace cascadenet
