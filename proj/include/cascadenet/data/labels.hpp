#pragma once

// Ground-truth labels derived from complete events.

#include "cascadenet/data/event.hpp"

#include <map>
#include <set>

namespace cascadenet {

struct LabelSet {
    std::map<std::string, double> virality;       // event_id -> log2 unique users of the full event
    std::map<std::string, double> vulnerability;  // user_id -> rumor fraction, users in >= 2 events only
    std::map<std::string, Label> event_class;

    std::optional<double> user_vulnerability(const std::string& user) const {
        auto it = vulnerability.find(user);
        if (it == vulnerability.end()) return std::nullopt;
        return it->second;
    }
};

inline double derive_virality_label(const PropagationEvent& event) {
    std::set<std::string_view> users;
    for (const Post& p : event.posts) users.insert(p.user_id);
    return std::log2(static_cast<double>(users.size()));
}

/// Fraction of rumor events among the distinct events each user joined.
/// Users seen in a single event are left unlabeled.
inline std::map<std::string, double> derive_vulnerability_labels(const std::vector<PropagationEvent>& corpus) {
    struct Tally {
        int events = 0;
        int rumors = 0;
    };
    std::map<std::string, Tally> tally;
    for (const auto& event : corpus) {
        std::set<std::string_view> users;
        for (const Post& p : event.posts) users.insert(p.user_id);
        for (std::string_view u : users) {
            Tally& t = tally[std::string(u)];
            ++t.events;
            if (event.label == Label::Rumor) ++t.rumors;
        }
    }
    std::map<std::string, double> out;
    for (const auto& [user, t] : tally) {
        if (t.events >= 2) out.emplace(user, static_cast<double>(t.rumors) / static_cast<double>(t.events));
    }
    return out;
}

inline LabelSet derive_labels(const std::vector<PropagationEvent>& corpus) {
    LabelSet labels;
    for (const auto& e : corpus) {
        labels.virality[e.event_id] = derive_virality_label(e);
        labels.event_class[e.event_id] = e.label;
    }
    labels.vulnerability = derive_vulnerability_labels(corpus);
    return labels;
}

inline nlohmann::json to_json(const LabelSet& labels) {
    nlohmann::json cls = nlohmann::json::object();
    for (const auto& [id, l] : labels.event_class) cls[id] = label_name(l);
    return {{"virality", labels.virality}, {"vulnerability", labels.vulnerability}, {"class", cls}};
}

inline LabelSet labels_from_json(const nlohmann::json& doc) {
    LabelSet labels;
    try {
        labels.virality = doc.at("virality").get<std::map<std::string, double>>();
        labels.vulnerability = doc.at("vulnerability").get<std::map<std::string, double>>();
        if (auto it = doc.find("class"); it != doc.end()) {
            for (const auto& [id, v] : it->items()) labels.event_class[id] = parse_label(v.get<std::string>());
        }
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::ValidationError, std::string("labels document: ") + e.what());
    }
    return labels;
}

}  // namespace cascadenet
