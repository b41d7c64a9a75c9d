#pragma once

// Epoch loop with step-level state, per-epoch validation, and best-epoch
// retention.

#include "cascadenet/eval/evaluate.hpp"
#include "cascadenet/trainer/optim.hpp"

#include <chrono>

namespace cascadenet {

enum class Strategy { SingleRumor, SingleVirality, SingleVuln, Basic, GradNorm, Meta };

inline std::string_view strategy_name(Strategy s) {
    switch (s) {
        case Strategy::SingleRumor: return "single_rumor";
        case Strategy::SingleVirality: return "single_virality";
        case Strategy::SingleVuln: return "single_vuln";
        case Strategy::Basic: return "basic";
        case Strategy::GradNorm: return "gradnorm";
        case Strategy::Meta: return "meta";
    }
    return "basic";
}

inline Strategy parse_strategy(std::string_view name) {
    for (Strategy s : {Strategy::SingleRumor, Strategy::SingleVirality, Strategy::SingleVuln, Strategy::Basic,
                       Strategy::GradNorm, Strategy::Meta}) {
        if (strategy_name(s) == name) return s;
    }
    throw Error(ErrorCode::ConfigInvalid, "unknown strategy '" + std::string(name) + "'");
}

inline bool is_single_task(Strategy s) {
    return s == Strategy::SingleRumor || s == Strategy::SingleVirality || s == Strategy::SingleVuln;
}

struct TrainConfig {
    Strategy strategy = Strategy::Basic;
    int epochs = 20;
    int batch_size = 8;
    double lr = 5e-3;
    double inner_lr = 5e-3;
    double gradnorm_alpha = 1.5;
    double gradnorm_weight_lr = 2.5e-2;
    double obs_fraction = 0.8;
    std::uint64_t seed = 0;
    TaskMask loss_mask = kAllTasks;
    unsigned jobs = 1;

    /// Single-task strategies train exactly one loss; the others use loss_mask.
    TaskMask effective_mask() const {
        switch (strategy) {
            case Strategy::SingleRumor: return {true, false, false};
            case Strategy::SingleVirality: return {false, true, false};
            case Strategy::SingleVuln: return {false, false, true};
            default: return loss_mask;
        }
    }

    void validate() const {
        auto fail = [](const std::string& why) { throw Error(ErrorCode::ConfigInvalid, why); };
        if (epochs < 0) fail("epochs must be non-negative");
        if (batch_size < 1) fail("batch_size must be at least 1");
        if (!(lr >= 0.0)) fail("lr must be non-negative");
        if (!(inner_lr >= 0.0)) fail("inner_lr must be non-negative");
        if (!(gradnorm_weight_lr >= 0.0)) fail("gradnorm_weight_lr must be non-negative");
        if (!(obs_fraction > 0.0 && obs_fraction <= 1.0)) fail("obs_fraction must lie in (0,1]");
        const TaskMask m = effective_mask();
        if (!m[0] && !m[1] && !m[2]) fail("at least one loss must be enabled");
    }
};

inline nlohmann::json to_json(const TrainConfig& c) {
    return {{"strategy", strategy_name(c.strategy)},
            {"epochs", c.epochs},
            {"batch_size", c.batch_size},
            {"lr", c.lr},
            {"inner_lr", c.inner_lr},
            {"gradnorm_alpha", c.gradnorm_alpha},
            {"gradnorm_weight_lr", c.gradnorm_weight_lr},
            {"obs_fraction", c.obs_fraction},
            {"seed", c.seed},
            {"loss_mask", c.loss_mask},
            {"jobs", c.jobs}};
}

inline TrainConfig train_config_from_json(const nlohmann::json& j) {
    TrainConfig c;
    try {
        c.strategy = parse_strategy(j.value("strategy", std::string(strategy_name(c.strategy))));
        c.epochs = j.value("epochs", c.epochs);
        c.batch_size = j.value("batch_size", c.batch_size);
        c.lr = j.value("lr", c.lr);
        c.inner_lr = j.value("inner_lr", c.inner_lr);
        c.gradnorm_alpha = j.value("gradnorm_alpha", c.gradnorm_alpha);
        c.gradnorm_weight_lr = j.value("gradnorm_weight_lr", c.gradnorm_weight_lr);
        c.obs_fraction = j.value("obs_fraction", c.obs_fraction);
        c.seed = j.value("seed", c.seed);
        c.loss_mask = j.value("loss_mask", c.loss_mask);
        c.jobs = j.value("jobs", c.jobs);
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::ConfigInvalid, std::string("train config: ") + e.what());
    }
    c.validate();
    return c;
}

struct EpochRecord {
    int epoch = 0;
    TaskVector train_losses{};  // mean over the epoch's batches
    TaskVector weights{};       // task weights in effect at the epoch's end
    std::optional<MetricsReport> validation;
    double wall_seconds = 0.0;
};

inline nlohmann::json to_json(const EpochRecord& r) {
    return {{"epoch", r.epoch},
            {"train_losses", {{"rumor", r.train_losses[0]}, {"virality", r.train_losses[1]}, {"vulnerability", r.train_losses[2]}}},
            {"weights", r.weights},
            {"validation", r.validation ? to_json(*r.validation) : nlohmann::json(nullptr)},
            {"wall_seconds", r.wall_seconds}};
}

/// Validation score vector for one epoch, larger is better; NaN marks an
/// undefined component.
inline std::vector<double> selection_components(Strategy strategy, const TaskMask& mask, const MetricsReport& report) {
    const double nan = std::numeric_limits<double>::quiet_NaN();
    const double vuln = report.vulnerability ? -report.vulnerability->mse : nan;
    switch (strategy) {
        case Strategy::SingleRumor: return {report.rumor.macro_f1};
        case Strategy::SingleVirality: return {-report.virality.mse};
        case Strategy::SingleVuln: return {vuln};
        default: break;
    }
    std::vector<double> out;
    if (mask[0]) out.push_back(report.rumor.macro_f1);
    if (mask[1]) out.push_back(-report.virality.mse);
    if (mask[2]) out.push_back(vuln);
    return out;
}

/// Index of the epoch maximising the mean of per-component z-scores taken
/// over all epochs. Components undefined in any epoch, or constant across
/// epochs, are ignored. Ties go to the earliest epoch; nullopt when no
/// component discriminates.
inline std::optional<std::size_t> select_best_epoch(const std::vector<std::vector<double>>& scores) {
    if (scores.empty()) return std::nullopt;
    const std::size_t dims = scores.front().size();
    const auto n = static_cast<double>(scores.size());
    std::vector<double> total(scores.size(), 0.0);
    bool any = false;
    for (std::size_t j = 0; j < dims; ++j) {
        double mean = 0.0;
        bool defined = true;
        for (const auto& s : scores) {
            defined = defined && std::isfinite(s[j]);
            mean += s[j] / n;
        }
        if (!defined) continue;
        double var = 0.0;
        for (const auto& s : scores) var += (s[j] - mean) * (s[j] - mean) / n;
        if (var <= 0.0) continue;
        any = true;
        const double sd = std::sqrt(var);
        for (std::size_t e = 0; e < scores.size(); ++e) total[e] += (scores[e][j] - mean) / sd;
    }
    if (!any) return std::nullopt;
    std::size_t best = 0;
    for (std::size_t e = 1; e < total.size(); ++e) {
        if (total[e] > total[best]) best = e;
    }
    return best;
}

/// True when `a` is strictly better than `b` on every component defined in
/// both. A strictly dominated epoch can never win select_best_epoch.
inline bool strictly_dominates(const std::vector<double>& a, const std::vector<double>& b) {
    bool compared = false;
    for (std::size_t j = 0; j < a.size(); ++j) {
        if (!std::isfinite(a[j]) || !std::isfinite(b[j])) continue;
        if (!(a[j] > b[j])) return false;
        compared = true;
    }
    return compared;
}

struct TrainResult {
    ModelParams final_params;
    ModelParams best_params;
    int best_epoch = -1;  // -1: no epochs, or no discriminating validation signal (best = final)
    std::vector<EpochRecord> log;
};

/// Everything needed to continue training exactly where it stopped.
struct TrainerState {
    ModelParams params;
    AdamState<ModelParams> adam;
    Rng rng;
    GradNormState gradnorm;
    int epoch = 0;
    std::size_t cursor = 0;
    std::vector<std::size_t> order;
    std::int64_t steps = 0;
    TaskVector epoch_loss_sum{};
    std::size_t epoch_batches = 0;
    double epoch_seconds = 0.0;
    std::vector<EpochRecord> log;
    std::vector<std::vector<double>> selection_scores;
    std::vector<std::pair<int, ModelParams>> candidates;  // non-dominated epoch snapshots
};

struct StepRecord {
    std::int64_t step = 0;
    int epoch = 0;
    TaskVector losses{};
    double objective = 0.0;
    TaskVector weights{};
};

class Trainer {
public:
    /// `train` and `validation` must outlive the trainer.
    Trainer(ModelConfig model, TrainConfig config, const std::vector<PreparedEvent>& train,
            const std::vector<PreparedEvent>& validation, ModelParams init)
        : model_(model), config_(config), train_(&train), validation_(&validation) {
        model_.validate();
        config_.validate();
        state_.adam = AdamState<ModelParams>::zeros(init);
        state_.params = std::move(init);
        state_.rng.seed(derive_seed(config_.seed, 0x7a1a5eedULL));
    }

    const TrainerState& state() const { return state_; }
    TrainerState& mutable_state() { return state_; }
    const ModelConfig& model_config() const { return model_; }
    const TrainConfig& config() const { return config_; }

    bool finished() const { return state_.epoch >= config_.epochs; }

    /// One optimisation step on the next batch; closes the epoch when the
    /// batch is its last.
    StepRecord step() {
        if (finished()) throw Error(ErrorCode::ConfigInvalid, "training already finished");
        if (train_->empty()) throw Error(ErrorCode::EmptyInput, "no training events");
        const auto started = std::chrono::steady_clock::now();
        if (state_.cursor == 0) {
            state_.order.resize(train_->size());
            for (std::size_t i = 0; i < state_.order.size(); ++i) state_.order[i] = i;
            shuffle_in_place(state_.order, state_.rng);
        }
        const std::size_t end = std::min(state_.order.size(), state_.cursor + static_cast<std::size_t>(config_.batch_size));
        std::vector<const PreparedEvent*> batch;
        std::vector<std::uint64_t> seeds;
        for (std::size_t i = state_.cursor; i < end; ++i) {
            batch.push_back(&(*train_)[state_.order[i]]);
            seeds.push_back(state_.rng());
        }
        const BatchObjective objective(model_, std::move(batch), std::move(seeds), config_.jobs);
        const AdamConfig adam{config_.lr};
        const TaskMask mask = config_.effective_mask();
        StepReport report;
        switch (config_.strategy) {
            case Strategy::Meta:
                report = meta_step(state_.params, state_.adam, adam, objective, mask, config_.inner_lr);
                break;
            case Strategy::GradNorm:
                report = gradnorm_step<ModelParams>(
                    state_.params, state_.adam, adam, objective, mask, state_.gradnorm,
                    GradNormConfig{config_.gradnorm_alpha, config_.gradnorm_weight_lr},
                    [](const ModelParams& p) -> const Matrix& { return p.backbone.embed.output_weights(); });
                break;
            default:
                report = basic_step(state_.params, state_.adam, adam, objective, mask_weights(mask));
                break;
        }
        StepRecord rec{state_.steps, state_.epoch, report.losses, report.objective, report.weights};
        ++state_.steps;
        for (std::size_t k = 0; k < report.losses.size(); ++k) state_.epoch_loss_sum[k] += report.losses[k];
        ++state_.epoch_batches;
        state_.cursor = end;
        state_.epoch_seconds += std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
        if (state_.cursor >= state_.order.size()) close_epoch();
        return rec;
    }

    void run_epoch() {
        const int current = state_.epoch;
        while (!finished() && state_.epoch == current) step();
    }

    TrainResult run() {
        while (!finished()) step();
        return result();
    }

    TrainResult result() const {
        TrainResult out;
        out.final_params = state_.params;
        out.best_params = state_.params;
        out.log = state_.log;
        if (auto best = select_best_epoch(state_.selection_scores)) {
            for (const auto& [epoch, params] : state_.candidates) {
                if (epoch == static_cast<int>(*best)) {
                    out.best_params = params;
                    out.best_epoch = epoch;
                }
            }
        }
        return out;
    }

private:
    void close_epoch() {
        const auto started = std::chrono::steady_clock::now();
        EpochRecord rec;
        rec.epoch = state_.epoch;
        for (std::size_t k = 0; k < rec.train_losses.size(); ++k) {
            rec.train_losses[k] = state_.epoch_loss_sum[k] / static_cast<double>(state_.epoch_batches);
        }
        rec.weights = config_.strategy == Strategy::GradNorm ? state_.gradnorm.weights : mask_weights(config_.effective_mask());
        if (!validation_->empty()) {
            rec.validation = evaluate(state_.params, *validation_, model_, ReportMeta{"validation", 0, 0, 0, config_.seed});
            std::vector<double> score = selection_components(config_.strategy, config_.effective_mask(), *rec.validation);
            std::erase_if(state_.candidates, [&](const auto& c) {
                return strictly_dominates(score, state_.selection_scores[static_cast<std::size_t>(c.first)]);
            });
            bool dominated = false;
            for (const auto& c : state_.candidates) {
                dominated = dominated || strictly_dominates(state_.selection_scores[static_cast<std::size_t>(c.first)], score);
            }
            state_.selection_scores.push_back(score);
            if (!dominated) state_.candidates.emplace_back(state_.epoch, state_.params);
        }
        rec.wall_seconds = state_.epoch_seconds +
                           std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
        state_.log.push_back(rec);
        ++state_.epoch;
        state_.cursor = 0;
        state_.order.clear();
        state_.epoch_loss_sum = {};
        state_.epoch_batches = 0;
        state_.epoch_seconds = 0.0;
    }

    ModelConfig model_;
    TrainConfig config_;
    const std::vector<PreparedEvent>* train_;
    const std::vector<PreparedEvent>* validation_;
    TrainerState state_;
};

inline TrainResult train(const ModelConfig& model, const TrainConfig& config, const std::vector<PreparedEvent>& train_events,
                         const std::vector<PreparedEvent>& validation_events) {
    Trainer trainer(model, config, train_events, validation_events, ModelParams::init(model, config.seed));
    return trainer.run();
}

}  // namespace cascadenet
