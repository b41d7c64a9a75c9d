#pragma once

// Synthetic cascade corpora with a planted vulnerability/virality link.
//
// Every user carries a latent vulnerability drawn from a two-component
// mixture. Each event picks a target vulnerability level (high for rumors,
// low for non-rumors) and recruits participants whose latent values lie
// near it. The event's log-size is shifted by the standardised target with
// correlation strength rho: upward for rumors, downward for non-rumors.
// A fraction of events recruit brand-new users only, which gives the split
// its pool of non-overlapping events. Emitted labels are re-derived from the
// generated cascades, never copied from the latents.

#include "cascadenet/data/labels.hpp"

#include <array>

namespace cascadenet {

struct SynthConfig {
    std::size_t events = 64;
    std::size_t user_pool = 0;  // 0 = sized so pooled users join ~3 events each
    double rumor_ratio = 0.5;
    double mean_users = 16.0;  // geometric mean of unique users per event
    double rho = 0.5;
    double non_overlap_fraction = 0.3;
    double repeat_post_rate = 0.25;  // chance that a participant posts a second time
    double duration_scale = 3600.0;  // seconds

    void validate() const {
        auto fail = [](const std::string& why) { throw Error(ErrorCode::ConfigInvalid, why); };
        if (events == 0) fail("events must be positive");
        if (!(rumor_ratio >= 0.0 && rumor_ratio <= 1.0)) fail("rumor_ratio must lie in [0,1]");
        if (!(mean_users >= 2.0)) fail("mean_users must be at least 2");
        if (!(rho >= 0.0 && rho <= 1.0)) fail("rho must lie in [0,1]");
        if (!(non_overlap_fraction >= 0.0 && non_overlap_fraction <= 1.0)) fail("non_overlap_fraction must lie in [0,1]");
        if (!(repeat_post_rate >= 0.0 && repeat_post_rate <= 1.0)) fail("repeat_post_rate must lie in [0,1]");
        if (!(duration_scale > 0.0)) fail("duration_scale must be positive");
    }

    std::size_t resolved_pool() const {
        if (user_pool > 0) return user_pool;
        const double pooled_events = static_cast<double>(events) * (1.0 - non_overlap_fraction);
        return std::max<std::size_t>(40, static_cast<std::size_t>(pooled_events * mean_users / 3.0));
    }
};

struct SyntheticCorpus {
    std::vector<PropagationEvent> events;
    LabelSet labels;
    std::map<std::string, double> planted_vulnerability;       // user -> latent
    std::map<std::string, double> event_mean_vulnerability;    // event -> mean latent of participants
};

namespace synth_detail {

inline constexpr std::array<const char*, 8> kRumorWords{"shocking", "unconfirmed", "leaked", "secret",
                                                         "exposed", "hoax",        "banned", "coverup"};
inline constexpr std::array<const char*, 8> kFactWords{"official", "report",    "confirmed", "statement",
                                                        "update",   "according", "data",      "announced"};
inline constexpr std::array<const char*, 8> kGullibleWords{"omg", "share", "wow",   "believe",
                                                            "must", "true", "urgent", "everyone"};
inline constexpr std::array<const char*, 8> kSkepticWords{"source", "verify", "doubt",  "check",
                                                           "fake",   "really", "proof", "evidence"};
inline constexpr std::array<const char*, 12> kFillerWords{"city",  "people", "today",  "news",   "video", "police",
                                                           "photo", "school", "health", "market", "storm", "team"};

template <std::size_t N>
const char* pick(const std::array<const char*, N>& words, Rng& rng) {
    return words[uniform_index(rng, N)];
}

inline double clamp01(double v, double lo = 0.0, double hi = 1.0) { return std::min(hi, std::max(lo, v)); }

inline double draw_latent(Rng& rng) {
    const double center = uniform01(rng) < 0.5 ? 0.8 : 0.2;
    return clamp01(center + 0.08 * standard_normal(rng));
}

inline std::string post_text(bool source, Label label, double vulnerability, Rng& rng) {
    std::string text;
    auto add = [&](const char* w) {
        if (!text.empty()) text += ' ';
        text += w;
    };
    const bool rumor = label == Label::Rumor;
    const int class_tokens = source ? 3 : 1;
    for (int i = 0; i < class_tokens; ++i) {
        const bool faithful = uniform01(rng) < (source ? 0.9 : 0.6);
        add((rumor == faithful) ? pick(kRumorWords, rng) : pick(kFactWords, rng));
    }
    add(pick(kFillerWords, rng));
    for (int i = 0; i < 2; ++i) {
        add(uniform01(rng) < vulnerability ? pick(kGullibleWords, rng) : pick(kSkepticWords, rng));
    }
    add(pick(kFillerWords, rng));
    return text;
}

}  // namespace synth_detail

inline SyntheticCorpus generate_synthetic_corpus(const SynthConfig& config, std::uint64_t seed) {
    using namespace synth_detail;
    config.validate();
    Rng rng(derive_seed(seed, 0x5e7a11ULL));
    SyntheticCorpus out;

    const std::size_t pool_size = config.resolved_pool();
    std::vector<std::pair<double, std::string>> pool;  // sorted by latent
    pool.reserve(pool_size);
    for (std::size_t i = 0; i < pool_size; ++i) {
        std::string id = "u" + std::to_string(i);
        const double v = draw_latent(rng);
        out.planted_vulnerability[id] = v;
        pool.emplace_back(v, std::move(id));
    }
    std::sort(pool.begin(), pool.end());

    const std::size_t n = config.events;
    const auto rumor_count = static_cast<std::size_t>(std::llround(config.rumor_ratio * static_cast<double>(n)));
    const auto fresh_count =
        std::min(n, static_cast<std::size_t>(std::ceil(config.non_overlap_fraction * static_cast<double>(n))));
    std::vector<Label> labels(n, Label::NonRumor);
    std::vector<bool> fresh(n, false);
    for (std::size_t i = 0; i < rumor_count; ++i) labels[i] = Label::Rumor;
    for (std::size_t i = 0; i < fresh_count; ++i) fresh[i] = true;
    shuffle_in_place(labels, rng);
    shuffle_in_place(fresh, rng);

    constexpr double kTargetSpread = 0.1;
    constexpr double kParticipantSpread = 0.08;
    constexpr double kLogSizeSpread = 0.6;

    for (std::size_t e = 0; e < n; ++e) {
        PropagationEvent event;
        event.event_id = "e" + std::to_string(e);
        event.label = labels[e];
        const bool rumor = labels[e] == Label::Rumor;
        const double center = rumor ? 0.75 : 0.25;
        const double z = standard_normal(rng);
        const double target = clamp01(center + kTargetSpread * z, rumor ? 0.5 : 0.02, rumor ? 0.98 : 0.5);
        const double standardized = (target - center) / kTargetSpread;
        const double sign = rumor ? 1.0 : -1.0;
        const double shift = config.rho * sign * standardized +
                             std::sqrt(1.0 - config.rho * config.rho) * standard_normal(rng);
        const double log_users = std::log2(config.mean_users) + kLogSizeSpread * shift;
        auto user_count = static_cast<std::size_t>(std::max(2.0, std::round(std::exp2(log_users))));
        if (!fresh[e]) user_count = std::min(user_count, pool.size());

        std::vector<std::string> participants;
        std::vector<double> latent;
        std::set<std::size_t> taken;
        for (std::size_t k = 0; k < user_count; ++k) {
            const double want = clamp01(target + kParticipantSpread * standard_normal(rng));
            if (fresh[e]) {
                std::string id = "f" + std::to_string(e) + "_" + std::to_string(k);
                out.planted_vulnerability[id] = want;
                participants.push_back(std::move(id));
                latent.push_back(want);
                continue;
            }
            // Nearest pooled user by latent value not already in this event.
            auto it = std::lower_bound(pool.begin(), pool.end(), std::make_pair(want, std::string()));
            std::ptrdiff_t hi = it - pool.begin();
            std::ptrdiff_t lo = hi - 1;
            const auto size = static_cast<std::ptrdiff_t>(pool.size());
            while (hi < size && taken.count(static_cast<std::size_t>(hi))) ++hi;
            while (lo >= 0 && taken.count(static_cast<std::size_t>(lo))) --lo;
            std::ptrdiff_t chosen;
            if (lo < 0) chosen = hi;
            else if (hi >= size) chosen = lo;
            else chosen = (want - pool[static_cast<std::size_t>(lo)].first <= pool[static_cast<std::size_t>(hi)].first - want) ? lo : hi;
            taken.insert(static_cast<std::size_t>(chosen));
            participants.push_back(pool[static_cast<std::size_t>(chosen)].second);
            latent.push_back(pool[static_cast<std::size_t>(chosen)].first);
        }
        double mean_latent = 0.0;
        for (double v : latent) mean_latent += v;
        out.event_mean_vulnerability[event.event_id] = mean_latent / static_cast<double>(latent.size());

        // Authors: every participant once (source first), plus repeat posts.
        std::vector<std::size_t> authors;
        for (std::size_t k = 1; k < participants.size(); ++k) authors.push_back(k);
        for (std::size_t k = 0; k < participants.size(); ++k) {
            if (uniform01(rng) < config.repeat_post_rate) authors.push_back(k);
        }
        shuffle_in_place(authors, rng);

        std::vector<double> times;
        for (std::size_t i = 0; i < authors.size(); ++i) times.push_back(exponential(rng, 1.0) * config.duration_scale);
        std::sort(times.begin(), times.end());

        auto make_id = [&](std::size_t i) { return event.event_id + "_p" + std::to_string(i); };
        Post source;
        source.post_id = make_id(0);
        source.user_id = participants[0];
        source.timestamp = 0.0;
        source.text = post_text(true, event.label, latent[0], rng);
        event.posts.push_back(std::move(source));
        for (std::size_t i = 0; i < authors.size(); ++i) {
            Post post;
            post.post_id = make_id(i + 1);
            const std::size_t existing = event.posts.size();
            const std::size_t parent = uniform01(rng) < 0.4 ? 0 : uniform_index(rng, existing);
            post.parent_id = event.posts[parent].post_id;
            post.user_id = participants[authors[i]];
            post.timestamp = times[i];
            post.text = post_text(false, event.label, latent[authors[i]], rng);
            event.posts.push_back(std::move(post));
        }
        event = parse_event(to_json(event));
        out.events.push_back(std::move(event));
    }

    out.labels = derive_labels(out.events);
    return out;
}

}  // namespace cascadenet
