#pragma once

// Per-class corpus statistics.

#include "cascadenet/data/labels.hpp"

#include <cstdio>

namespace cascadenet {

struct ClassStats {
    Label label = Label::NonRumor;
    std::size_t instances = 0;
    double avg_posts = 0.0;
    double avg_users = 0.0;
    std::optional<double> avg_vulnerability;  // over labeled (event, participant) pairs
    double avg_virality = 0.0;                // unique-user count, not its log
};

struct StatsTable {
    std::vector<ClassStats> rows;  // rumor first, then non-rumor; empty classes omitted
};

inline StatsTable corpus_stats(const std::vector<PropagationEvent>& corpus, const LabelSet& labels) {
    StatsTable table;
    for (Label label : {Label::Rumor, Label::NonRumor}) {
        ClassStats row;
        row.label = label;
        double posts = 0.0, users = 0.0, virality = 0.0, vuln = 0.0;
        std::size_t vuln_count = 0;
        for (const auto& e : corpus) {
            if (e.label != label) continue;
            ++row.instances;
            posts += static_cast<double>(e.posts.size());
            const auto unique = e.unique_users();
            users += static_cast<double>(unique.size());
            auto it = labels.virality.find(e.event_id);
            virality += it != labels.virality.end() ? std::exp2(it->second) : static_cast<double>(unique.size());
            for (const auto& u : unique) {
                if (auto v = labels.user_vulnerability(u)) {
                    vuln += *v;
                    ++vuln_count;
                }
            }
        }
        if (row.instances == 0) continue;
        const double n = static_cast<double>(row.instances);
        row.avg_posts = posts / n;
        row.avg_users = users / n;
        row.avg_virality = virality / n;
        if (vuln_count > 0) row.avg_vulnerability = vuln / static_cast<double>(vuln_count);
        table.rows.push_back(row);
    }
    return table;
}

inline std::string format_stats(const StatsTable& table) {
    std::string out = "type        instances  avg_posts  avg_users  avg_vulnerability  avg_virality\n";
    char line[256];
    for (const auto& r : table.rows) {
        char vuln[32];
        if (r.avg_vulnerability) std::snprintf(vuln, sizeof vuln, "%.3f", *r.avg_vulnerability);
        else std::snprintf(vuln, sizeof vuln, "n/a");
        std::snprintf(line, sizeof line, "%-10s  %9zu  %9.1f  %9.1f  %17s  %12.1f\n",
                      std::string(label_name(r.label)).c_str(), r.instances, r.avg_posts, r.avg_users, vuln,
                      r.avg_virality);
        out += line;
    }
    return out;
}

inline nlohmann::json to_json(const StatsTable& table) {
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& r : table.rows) {
        rows.push_back({{"type", label_name(r.label)},
                        {"instances", r.instances},
                        {"avg_posts", r.avg_posts},
                        {"avg_users", r.avg_users},
                        {"avg_vulnerability", r.avg_vulnerability ? nlohmann::json(*r.avg_vulnerability)
                                                                  : nlohmann::json(nullptr)},
                        {"avg_virality", r.avg_virality}});
    }
    return {{"classes", rows}};
}

}  // namespace cascadenet
