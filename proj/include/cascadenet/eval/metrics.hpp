#pragma once

// Classification, regression and ranking metrics.

#include "cascadenet/data/event.hpp"

#include <numeric>

namespace cascadenet {

struct ClassificationMetrics {
    double accuracy = 0.0;
    double precision = 0.0;  // macro average over the two classes
    double recall = 0.0;     // macro average over the two classes
    double macro_f1 = 0.0;
};

/// 0/0 terms count as 0; both classes always enter the macro averages.
inline ClassificationMetrics classification_report(const std::vector<Label>& predicted, const std::vector<Label>& truth) {
    if (predicted.empty() || predicted.size() != truth.size()) {
        throw Error(ErrorCode::EmptyInput, "classification_report needs equal-length non-empty inputs");
    }
    std::array<std::array<double, 2>, 2> confusion{};  // [truth][predicted]
    for (std::size_t i = 0; i < truth.size(); ++i) {
        confusion[static_cast<std::size_t>(truth[i])][static_cast<std::size_t>(predicted[i])] += 1.0;
    }
    auto ratio = [](double a, double b) { return b == 0.0 ? 0.0 : a / b; };
    ClassificationMetrics m;
    m.accuracy = (confusion[0][0] + confusion[1][1]) / static_cast<double>(truth.size());
    for (std::size_t c = 0; c < 2; ++c) {
        const double tp = confusion[c][c];
        const double predicted_c = confusion[0][c] + confusion[1][c];
        const double actual_c = confusion[c][0] + confusion[c][1];
        const double p = ratio(tp, predicted_c);
        const double r = ratio(tp, actual_c);
        m.precision += p / 2.0;
        m.recall += r / 2.0;
        m.macro_f1 += ratio(2.0 * p * r, p + r) / 2.0;
    }
    return m;
}

struct RegressionMetrics {
    double mse = 0.0;
    double msle = 0.0;  // natural log with the (1 + x) shift
};

/// With `floor_at_zero`, predictions below 0 are raised to 0 for the
/// logarithmic term only.
inline RegressionMetrics regression_metrics(const std::vector<double>& predicted, const std::vector<double>& targets,
                                            bool floor_at_zero = false) {
    if (predicted.empty() || predicted.size() != targets.size()) {
        throw Error(ErrorCode::EmptyInput, "regression_metrics needs equal-length non-empty inputs");
    }
    RegressionMetrics m;
    const auto n = static_cast<double>(predicted.size());
    for (std::size_t i = 0; i < predicted.size(); ++i) {
        const double p = predicted[i];
        const double y = targets[i];
        const double pl = floor_at_zero ? std::max(0.0, p) : p;
        if (!(pl > -1.0) || !(y > -1.0)) throw Error(ErrorCode::ValidationError, "msle needs values above -1");
        m.mse += (p - y) * (p - y) / n;
        const double d = std::log1p(pl) - std::log1p(y);
        m.msle += d * d / n;
    }
    return m;
}

/// Full-list nDCG with linear gain and log2(i + 1) discount (1-based i).
/// Ties in score keep input order. Returns 1 when the ideal DCG is 0.
inline double ndcg(const std::vector<double>& scores, const std::vector<double>& relevances) {
    if (scores.empty() || scores.size() != relevances.size()) {
        throw Error(ErrorCode::EmptyInput, "ndcg needs equal-length non-empty inputs");
    }
    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
    std::vector<double> ideal = relevances;
    std::sort(ideal.begin(), ideal.end(), std::greater<>());
    double dcg = 0.0, idcg = 0.0;
    for (std::size_t i = 0; i < order.size(); ++i) {
        const double discount = std::log2(static_cast<double>(i) + 2.0);
        dcg += relevances[order[i]] / discount;
        idcg += ideal[i] / discount;
    }
    return idcg == 0.0 ? 1.0 : dcg / idcg;
}

}  // namespace cascadenet
