#pragma once

// Leakage-free train/validation/test splits.
//
// Validation and test events are drawn only from events whose users appear
// in no other event, so no evaluation user is ever seen during training.

#include "cascadenet/data/event.hpp"

#include <map>
#include <set>

namespace cascadenet {

struct CorpusSplits {
    std::uint64_t seed = 0;
    std::vector<std::string> train;
    std::vector<std::string> validation;
    std::vector<std::string> test;

    bool operator==(const CorpusSplits&) const = default;
};

/// Indices of events sharing no user with any other event.
inline std::vector<std::size_t> non_overlapping_events(const std::vector<PropagationEvent>& corpus) {
    std::map<std::string_view, int> membership;
    std::vector<std::set<std::string_view>> users(corpus.size());
    for (std::size_t i = 0; i < corpus.size(); ++i) {
        for (const Post& p : corpus[i].posts) users[i].insert(p.user_id);
        for (std::string_view u : users[i]) ++membership[u];
    }
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < corpus.size(); ++i) {
        bool isolated = true;
        for (std::string_view u : users[i]) {
            if (membership[u] > 1) {
                isolated = false;
                break;
            }
        }
        if (isolated) out.push_back(i);
    }
    return out;
}

inline CorpusSplits split_corpus(const std::vector<PropagationEvent>& corpus, std::uint64_t seed) {
    const std::size_t per_split = corpus.size() / 10;
    auto candidates = non_overlapping_events(corpus);
    if (candidates.size() < 2 * per_split) {
        throw Error(ErrorCode::InsufficientNonOverlap,
                    "need " + std::to_string(2 * per_split) + " non-overlapping events, found " +
                        std::to_string(candidates.size()));
    }
    Rng rng(derive_seed(seed, 0x5b1175ULL));
    shuffle_in_place(candidates, rng);
    std::vector<int> role(corpus.size(), 0);
    for (std::size_t i = 0; i < per_split; ++i) role[candidates[i]] = 1;
    for (std::size_t i = per_split; i < 2 * per_split; ++i) role[candidates[i]] = 2;

    CorpusSplits splits;
    splits.seed = seed;
    // Validation/test keep the sampled order; train keeps corpus order.
    for (std::size_t i = 0; i < per_split; ++i) splits.validation.push_back(corpus[candidates[i]].event_id);
    for (std::size_t i = per_split; i < 2 * per_split; ++i) splits.test.push_back(corpus[candidates[i]].event_id);
    for (std::size_t i = 0; i < corpus.size(); ++i) {
        if (role[i] == 0) splits.train.push_back(corpus[i].event_id);
    }
    return splits;
}

inline nlohmann::json to_json(const CorpusSplits& s) {
    return {{"seed", s.seed}, {"train", s.train}, {"validation", s.validation}, {"test", s.test}};
}

inline CorpusSplits splits_from_json(const nlohmann::json& doc) {
    CorpusSplits s;
    try {
        s.seed = doc.at("seed").get<std::uint64_t>();
        s.train = doc.at("train").get<std::vector<std::string>>();
        s.validation = doc.at("validation").get<std::vector<std::string>>();
        s.test = doc.at("test").get<std::vector<std::string>>();
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::ValidationError, std::string("splits document: ") + e.what());
    }
    return s;
}

/// Events of `corpus` whose ids are listed, in list order.
inline std::vector<const PropagationEvent*> select_events(const std::vector<PropagationEvent>& corpus,
                                                          const std::vector<std::string>& ids) {
    std::map<std::string_view, const PropagationEvent*> by_id;
    for (const auto& e : corpus) by_id.emplace(e.event_id, &e);
    std::vector<const PropagationEvent*> out;
    out.reserve(ids.size());
    for (const auto& id : ids) {
        auto it = by_id.find(id);
        if (it == by_id.end()) throw Error(ErrorCode::ValidationError, "split references unknown event '" + id + "'");
        out.push_back(it->second);
    }
    return out;
}

}  // namespace cascadenet
