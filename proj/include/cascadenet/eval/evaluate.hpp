#pragma once

// Split-level evaluation and observation-fraction sweeps.

#include "cascadenet/eval/metrics.hpp"
#include "cascadenet/model/model.hpp"

namespace cascadenet {

struct EventPrediction {
    std::string event_id;
    Label truth = Label::NonRumor;
    Label predicted = Label::NonRumor;
    double rumor_probability = 0.0;
    double virality = 0.0;
    double virality_target = 0.0;
    std::vector<double> vulnerability;         // labeled users only
    std::vector<double> vulnerability_target;  // aligned with `vulnerability`
};

struct RankedRegression {
    double mse = 0.0;
    double msle = 0.0;
    double ndcg = 0.0;
};

struct ReportMeta {
    std::string split;
    double obs_fraction = 1.0;
    std::size_t event_count = 0;
    std::size_t labeled_user_count = 0;
    std::uint64_t seed = 0;
};

struct MetricsReport {
    ClassificationMetrics rumor;
    RankedRegression virality;
    std::optional<RankedRegression> vulnerability;  // absent without labeled users
    ReportMeta meta;
};

inline EventPrediction make_event_prediction(const PreparedEvent& event, const Predictions& p) {
    EventPrediction out;
    out.event_id = event.event_id;
    out.truth = event.targets.label;
    out.predicted = p.predicted_label();
    out.rumor_probability = p.rumor_probability();
    out.virality = p.virality;
    out.virality_target = event.targets.virality;
    for (std::size_t i = 0; i < event.targets.labeled_nodes.size(); ++i) {
        out.vulnerability.push_back(p.vulnerability(event.targets.labeled_nodes[i]));
        out.vulnerability_target.push_back(event.targets.labeled_values[i]);
    }
    return out;
}

/// Rumor and virality metrics over events; vulnerability metrics pooled over
/// all labeled users. Virality ranking relevance is 2^target (unique users).
inline MetricsReport evaluate_predictions(const std::vector<EventPrediction>& predictions, ReportMeta meta) {
    if (predictions.empty()) throw Error(ErrorCode::EmptyInput, "no events to evaluate");
    std::vector<Label> pred, truth;
    std::vector<double> vir, vir_target, vir_relevance, vul, vul_target;
    for (const auto& e : predictions) {
        pred.push_back(e.predicted);
        truth.push_back(e.truth);
        vir.push_back(e.virality);
        vir_target.push_back(e.virality_target);
        vir_relevance.push_back(std::exp2(e.virality_target));
        vul.insert(vul.end(), e.vulnerability.begin(), e.vulnerability.end());
        vul_target.insert(vul_target.end(), e.vulnerability_target.begin(), e.vulnerability_target.end());
    }
    MetricsReport report;
    report.rumor = classification_report(pred, truth);
    const RegressionMetrics v = regression_metrics(vir, vir_target, true);
    report.virality = {v.mse, v.msle, ndcg(vir, vir_relevance)};
    if (!vul.empty()) {
        const RegressionMetrics u = regression_metrics(vul, vul_target);
        report.vulnerability = RankedRegression{u.mse, u.msle, ndcg(vul, vul_target)};
    }
    meta.event_count = predictions.size();
    meta.labeled_user_count = vul.size();
    report.meta = std::move(meta);
    return report;
}

inline std::vector<EventPrediction> predict_events(const ModelParams& params, const std::vector<PreparedEvent>& events,
                                                   const ModelConfig& config) {
    std::vector<EventPrediction> out;
    out.reserve(events.size());
    for (const auto& e : events) out.push_back(make_event_prediction(e, forward(params, e, config)));
    return out;
}

inline MetricsReport evaluate(const ModelParams& params, const std::vector<PreparedEvent>& events,
                              const ModelConfig& config, ReportMeta meta) {
    if (events.empty()) throw Error(ErrorCode::EmptyInput, "empty split");
    meta.obs_fraction = events.front().fraction;
    return evaluate_predictions(predict_events(params, events, config), std::move(meta));
}

template <TextEncoder E>
MetricsReport evaluate(const ModelParams& params, const std::vector<const PropagationEvent*>& split,
                       const LabelSet& labels, const UserEmbeddingTable& table, const E& encoder,
                       const ModelConfig& config, double obs_fraction, ReportMeta meta) {
    if (split.empty()) throw Error(ErrorCode::EmptyInput, "empty split");
    meta.obs_fraction = obs_fraction;
    return evaluate(params, prepare_events(split, obs_fraction, encoder, table, labels), config, std::move(meta));
}

inline const std::vector<double> kDefaultSweepFractions{0.2, 0.4, 0.6, 0.8};

template <TextEncoder E>
std::vector<MetricsReport> observation_sweep(const ModelParams& params, const std::vector<const PropagationEvent*>& split,
                                             const LabelSet& labels, const UserEmbeddingTable& table,
                                             const E& encoder, const ModelConfig& config,
                                             const std::vector<double>& fractions, const ReportMeta& meta) {
    std::vector<MetricsReport> out;
    for (double f : fractions) {
        if (!(f > 0.0 && f <= 1.0)) throw Error(ErrorCode::ConfigInvalid, "fractions must lie in (0,1]");
        out.push_back(evaluate(params, split, labels, table, encoder, config, f, meta));
    }
    return out;
}

inline nlohmann::json to_json(const MetricsReport& r) {
    auto ranked = [](const RankedRegression& m) { return nlohmann::json{{"mse", m.mse}, {"msle", m.msle}, {"ndcg", m.ndcg}}; };
    return {{"rumor",
             {{"accuracy", r.rumor.accuracy},
              {"precision", r.rumor.precision},
              {"recall", r.rumor.recall},
              {"macF1", r.rumor.macro_f1}}},
            {"virality", ranked(r.virality)},
            {"vulnerability", r.vulnerability ? ranked(*r.vulnerability) : nlohmann::json(nullptr)},
            {"meta",
             {{"split", r.meta.split},
              {"obs_fraction", r.meta.obs_fraction},
              {"event_count", r.meta.event_count},
              {"labeled_user_count", r.meta.labeled_user_count},
              {"seed", r.meta.seed}}}};
}

/// Checks a report document against the MetricsReport layout and ranges.
/// Returns an empty string when valid, otherwise the first problem found.
inline std::string validate_report_json(const nlohmann::json& doc) {
    auto in_unit = [](const nlohmann::json& v) { return v.is_number() && v.get<double>() >= 0.0 && v.get<double>() <= 1.0; };
    auto non_negative = [](const nlohmann::json& v) { return v.is_number() && v.get<double>() >= 0.0; };
    if (!doc.is_object()) return "report is not an object";
    for (const char* key : {"rumor", "virality", "vulnerability", "meta"}) {
        if (!doc.contains(key)) return std::string("missing '") + key + "'";
    }
    for (const char* key : {"accuracy", "precision", "recall", "macF1"}) {
        if (!doc["rumor"].contains(key) || !in_unit(doc["rumor"][key])) return std::string("rumor.") + key;
    }
    auto check_ranked = [&](const nlohmann::json& m, const std::string& name) -> std::string {
        if (!m.is_object()) return name + " is not an object";
        if (!m.contains("mse") || !non_negative(m["mse"])) return name + ".mse";
        if (!m.contains("msle") || !non_negative(m["msle"])) return name + ".msle";
        if (!m.contains("ndcg") || !in_unit(m["ndcg"])) return name + ".ndcg";
        return {};
    };
    if (auto err = check_ranked(doc["virality"], "virality"); !err.empty()) return err;
    if (!doc["vulnerability"].is_null()) {
        if (auto err = check_ranked(doc["vulnerability"], "vulnerability"); !err.empty()) return err;
    }
    const auto& meta = doc["meta"];
    if (!meta.is_object() || !meta.contains("split") || !meta["split"].is_string()) return "meta.split";
    if (!meta.contains("obs_fraction") || !in_unit(meta["obs_fraction"])) return "meta.obs_fraction";
    for (const char* key : {"event_count", "labeled_user_count", "seed"}) {
        if (!meta.contains(key) || !meta[key].is_number_unsigned()) return std::string("meta.") + key;
    }
    return {};
}

/// fraction x metric table; empty cells for undefined vulnerability metrics.
inline std::string sweep_csv(const std::vector<MetricsReport>& reports) {
    std::ostringstream out;
    out.precision(17);
    out << "obs_fraction,rumor_accuracy,rumor_precision,rumor_recall,rumor_macf1,virality_mse,virality_msle,"
           "virality_ndcg,vulnerability_mse,vulnerability_msle,vulnerability_ndcg\n";
    for (const auto& r : reports) {
        out << r.meta.obs_fraction << ',' << r.rumor.accuracy << ',' << r.rumor.precision << ',' << r.rumor.recall
            << ',' << r.rumor.macro_f1 << ',' << r.virality.mse << ',' << r.virality.msle << ',' << r.virality.ndcg;
        if (r.vulnerability) {
            out << ',' << r.vulnerability->mse << ',' << r.vulnerability->msle << ',' << r.vulnerability->ndcg;
        } else {
            out << ",,,";
        }
        out << '\n';
    }
    return out.str();
}

}  // namespace cascadenet
