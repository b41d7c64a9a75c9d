#include "support.hpp"

#include <gtest/gtest.h>

using namespace cascadenet;
using namespace cascadenet::testing;

namespace {

/// Plain-scalar Adam used as an oracle for the toy traces.
struct ScalarAdam {
    double m = 0.0, v = 0.0;
    double step(double param, double grad, int t, double lr) {
        m = 0.9 * m + 0.1 * grad;
        v = 0.999 * v + 0.001 * grad * grad;
        const double mh = m / (1.0 - std::pow(0.9, t));
        const double vh = v / (1.0 - std::pow(0.999, t));
        return param - lr * mh / (std::sqrt(vh) + 1e-8);
    }
};

struct SmallSetup {
    ModelConfig model;
    std::vector<PropagationEvent> corpus;
    LabelSet labels;
    UserEmbeddingTable table;
    std::vector<PreparedEvent> train;
    std::vector<PreparedEvent> validation;
};

SmallSetup small_setup(std::size_t events = 30, int dim = 6, std::uint64_t seed = 1) {
    SmallSetup s;
    s.model = toy_model_config(dim, 4);
    SynthConfig sc;
    sc.events = events;
    sc.mean_users = 6;
    auto synth = generate_synthetic_corpus(sc, seed);
    s.corpus = std::move(synth.events);
    s.labels = synth.labels;
    const auto splits = split_corpus(s.corpus, seed);
    PretrainConfig pc;
    pc.dim = dim;
    pc.epochs = 2;
    s.table = pretrain_user_embeddings(build_global_user_graph(select_events(s.corpus, splits.train)), pc, seed);
    const auto enc = s.model.make_text_encoder();
    s.train = prepare_events(select_events(s.corpus, splits.train), 0.8, enc, s.table, s.labels);
    s.validation = prepare_events(select_events(s.corpus, splits.validation), 0.8, enc, s.table, s.labels);
    return s;
}

std::vector<const PreparedEvent*> first_events(const std::vector<PreparedEvent>& events, std::size_t n) {
    std::vector<const PreparedEvent*> out;
    for (std::size_t i = 0; i < n && i < events.size(); ++i) out.push_back(&events[i]);
    return out;
}

}  // namespace

TEST(Adam, MatchesScalarOracle) {
    ScalarToy p;
    p.b(0, 0) = 0.3;
    auto adam = AdamState<ScalarToy>::zeros(p);
    ScalarAdam oracle;
    double b = 0.3;
    for (int t = 1; t <= 5; ++t) {
        ScalarToy g = zeros_like(p);
        g.b(0, 0) = 0.1 * t - 0.25;
        adam_update(p, g, adam, AdamConfig{0.01});
        b = oracle.step(b, 0.1 * t - 0.25, t, 0.01);
        EXPECT_NEAR(p.bv(), b, 1e-15);
    }
}

TEST(MetaStep, ReproducesHandTrace) {
    ScalarToy p;
    p.b(0, 0) = 0.8;
    p.h = {Matrix::Constant(1, 1, 1.2), Matrix::Constant(1, 1, -0.5), Matrix::Constant(1, 1, 0.3)};
    ScalarToyObjective obj;
    obj.x = {1.0, 2.0, -1.5};
    obj.y = {0.4, 1.0, 0.7};
    const double eta = 0.1, lr = 0.05;
    auto adam = AdamState<ScalarToy>::zeros(p);

    double b = 0.8;
    std::array<double, 3> h{1.2, -0.5, 0.3};
    ScalarAdam ab;
    std::array<ScalarAdam, 3> ah;
    for (int t = 1; t <= 3; ++t) {
        // Alg. 1 by hand: one inner step per head, outer loss at adapted heads.
        std::array<double, 3> adapted{};
        for (std::size_t k = 0; k < 3; ++k) {
            const double r = b * h[k] * obj.x[k] - obj.y[k];
            adapted[k] = h[k] - eta * r * b * obj.x[k];
        }
        double gb = 0.0, outer = 0.0;
        std::array<double, 3> gh{};
        for (std::size_t k = 0; k < 3; ++k) {
            const double r = b * adapted[k] * obj.x[k] - obj.y[k];
            outer += 0.5 * r * r;
            gb += r * adapted[k] * obj.x[k];
            gh[k] = r * b * obj.x[k];
        }
        b = ab.step(b, gb, t, lr);
        for (std::size_t k = 0; k < 3; ++k) h[k] = ah[k].step(h[k], gh[k], t, lr);

        const StepReport rep = meta_step(p, adam, AdamConfig{lr}, obj, kAllTasks, eta);
        EXPECT_NEAR(rep.objective, outer, 1e-9) << "step " << t;
        EXPECT_NEAR(p.bv(), b, 1e-9);
        for (std::size_t k = 0; k < 3; ++k) EXPECT_NEAR(p.hv(k), h[k], 1e-9);
    }
}

TEST(MetaStep, ZeroInnerRateEqualsBasicStep) {
    ScalarToyObjective obj;
    obj.x = {0.5, 1.5, 2.0};
    obj.y = {1.0, -1.0, 0.2};
    ScalarToy a;
    a.b(0, 0) = 0.7;
    a.h = {Matrix::Constant(1, 1, 0.2), Matrix::Constant(1, 1, 0.9), Matrix::Constant(1, 1, -0.4)};
    ScalarToy c = a;
    auto adam_a = AdamState<ScalarToy>::zeros(a);
    auto adam_c = AdamState<ScalarToy>::zeros(c);
    for (int t = 0; t < 5; ++t) {
        const auto meta = meta_step(a, adam_a, AdamConfig{0.02}, obj, kAllTasks, 0.0);
        const auto basic = basic_step(c, adam_c, AdamConfig{0.02}, obj, TaskVector{1, 1, 1});
        EXPECT_NEAR(meta.objective, basic.objective, 1e-9);
        EXPECT_LE(max_abs_difference(a, c), 1e-12);
    }
}

TEST(MetaStep, ZeroInnerRateEqualsBasicOnRealModel) {
    auto s = small_setup();
    const auto batch = first_events(s.train, 6);
    const BatchObjective objective(s.model, batch, {1, 2, 3, 4, 5, 6});
    ModelParams a = ModelParams::init(s.model, 3);
    ModelParams c = a;
    auto adam_a = AdamState<ModelParams>::zeros(a);
    auto adam_c = AdamState<ModelParams>::zeros(c);
    for (int t = 0; t < 3; ++t) {
        const auto meta = meta_step(a, adam_a, AdamConfig{}, objective, kAllTasks, 0.0);
        const auto basic = basic_step(c, adam_c, AdamConfig{}, objective, TaskVector{1, 1, 1});
        EXPECT_NEAR(meta.objective, basic.objective, 1e-9);
    }
    EXPECT_LE(max_abs_difference(a, c), 1e-12);
}

TEST(MetaStep, MaskedHeadIsUntouched) {
    auto s = small_setup();
    const BatchObjective objective(s.model, first_events(s.train, 4), {1, 2, 3, 4});
    ModelParams p = ModelParams::init(s.model, 4);
    const ModelParams before = p;
    auto adam = AdamState<ModelParams>::zeros(p);
    for (int t = 0; t < 3; ++t) meta_step(p, adam, AdamConfig{}, objective, TaskMask{true, false, true}, 0.05);
    EXPECT_TRUE(p.heads.virality.hidden.w == before.heads.virality.hidden.w);
    EXPECT_TRUE(p.heads.virality.out.b == before.heads.virality.out.b);
    EXPECT_FALSE(p.heads.rumor.out.w == before.heads.rumor.out.w);
}

TEST(GradNorm, HandFixture) {
    const GradNormConfig cfg{1.5, 0.1};
    // ratios (0.5, 1, 0.5) -> relative (0.75, 1.5, 0.75); G = (1, 2, 3),
    // mean 2; targets 2 * relative^1.5 = (1.299, 3.674, 1.299).
    const TaskVector w = gradnorm_update({2.0, 1.0, 0.5}, {4.0, 1.0, 1.0}, {1, 1, 1}, {1.0, 2.0, 3.0}, kAllTasks, cfg);
    EXPECT_NEAR(w[0], 1.1, 1e-12);
    EXPECT_NEAR(w[1], 1.2, 1e-12);
    EXPECT_NEAR(w[2], 0.7, 1e-12);
    // Task 1 disabled: G = (1, 3) against target 2 each; (1.1, 0.7) rescaled to sum 2.
    const TaskVector m = gradnorm_update({2.0, 1.0, 0.5}, {4.0, 1.0, 1.0}, {1, 1, 1}, {1.0, 2.0, 3.0},
                                         TaskMask{true, false, true}, cfg);
    EXPECT_NEAR(m[0], 1.1 * 2.0 / 1.8, 1e-12);
    EXPECT_EQ(m[1], 0.0);
    EXPECT_NEAR(m[2], 0.7 * 2.0 / 1.8, 1e-12);
    EXPECT_NEAR(m[0] + m[2], 2.0, 1e-9);
}

TEST(GradNorm, ZeroInitialLossFallsBackToEqualWeights) {
    const TaskVector w = gradnorm_update({1, 1, 1}, {0.0, 1.0, 1.0}, {0.5, 2.0, 0.5}, {1, 1, 1}, kAllTasks, {});
    EXPECT_EQ(w, (TaskVector{1, 1, 1}));
}

TEST(GradNorm, WeightsStayPositiveAndSumToTaskCount) {
    Rng rng(7);
    for (int trial = 0; trial < 200; ++trial) {
        TaskVector losses, initial, weights, norms;
        for (std::size_t k = 0; k < 3; ++k) {
            losses[k] = 0.01 + 5 * uniform01(rng);
            initial[k] = 0.01 + 5 * uniform01(rng);
            weights[k] = 0.01 + 2 * uniform01(rng);
            norms[k] = 10 * uniform01(rng);
        }
        const TaskVector w = gradnorm_update(losses, initial, weights, norms, kAllTasks, GradNormConfig{1.5, 0.5});
        EXPECT_NEAR(w[0] + w[1] + w[2], 3.0, 1e-9);
        for (double v : w) EXPECT_GT(v, 0.0);
    }
}

TEST(GradNorm, StepMatchesHandComputationOnTwoParameterModel) {
    // Shared layer is the backbone scalar b; G_k = w_k |dL_k/db|.
    ScalarToyObjective obj;
    obj.x = {1.0, 2.0, 0.5};
    obj.y = {0.0, 0.5, 2.0};
    ScalarToy p;
    p.b(0, 0) = 1.0;
    p.h = {Matrix::Constant(1, 1, 1.0), Matrix::Constant(1, 1, 0.5), Matrix::Constant(1, 1, 1.5)};
    auto adam = AdamState<ScalarToy>::zeros(p);
    GradNormState state;
    const GradNormConfig gn{1.5, 0.05};
    const SharedLayer<ScalarToy> shared = [](const ScalarToy& q) -> const Matrix& { return q.b; };

    auto hand = [&](const ScalarToy& q, const TaskVector& w, const TaskVector& initial) {
        TaskVector loss, norm, out;
        for (std::size_t k = 0; k < 3; ++k) {
            const double r = q.bv() * q.hv(k) * obj.x[k] - obj.y[k];
            loss[k] = 0.5 * r * r;
            norm[k] = std::abs(r * q.hv(k) * obj.x[k]);
        }
        const TaskVector& init = initial[0] == 0.0 ? loss : initial;
        double gbar = 0, rbar = 0;
        for (std::size_t k = 0; k < 3; ++k) {
            gbar += w[k] * norm[k] / 3;
            rbar += loss[k] / init[k] / 3;
        }
        double total = 0;
        for (std::size_t k = 0; k < 3; ++k) {
            const double target = gbar * std::pow(loss[k] / init[k] / rbar, 1.5);
            const double g = w[k] * norm[k];
            out[k] = w[k] - 0.05 * (g > target ? 1.0 : g < target ? -1.0 : 0.0) * norm[k];
            total += out[k];
        }
        for (double& v : out) v *= 3.0 / total;
        return std::make_pair(out, loss);
    };

    const auto [w1, l0] = hand(p, {1, 1, 1}, {0, 0, 0});
    gradnorm_step(p, adam, AdamConfig{0.01}, obj, kAllTasks, state, gn, shared);
    for (std::size_t k = 0; k < 3; ++k) {
        EXPECT_NEAR(state.weights[k], w1[k], 1e-6);
        EXPECT_NEAR(state.initial_losses[k], l0[k], 1e-12);
    }
    const ScalarToy at_step2 = p;
    const auto [w2, l1] = hand(at_step2, state.weights, state.initial_losses);
    const auto rep = gradnorm_step(p, adam, AdamConfig{0.01}, obj, kAllTasks, state, gn, shared);
    for (std::size_t k = 0; k < 3; ++k) EXPECT_NEAR(state.weights[k], w2[k], 1e-6);
    EXPECT_NEAR(rep.objective, w1[0] * l1[0] + w1[1] * l1[1] + w1[2] * l1[2], 1e-12);
}

TEST(GradNorm, IdenticalTasksKeepEqualWeights) {
    // Tasks 0 and 1 are copies; task 2 differs.
    ScalarToyObjective obj;
    obj.x = {1.5, 1.5, 0.7};
    obj.y = {0.3, 0.3, 1.2};
    ScalarToy p;
    p.b(0, 0) = 0.9;
    p.h = {Matrix::Constant(1, 1, 0.6), Matrix::Constant(1, 1, 0.6), Matrix::Constant(1, 1, -0.2)};
    auto adam = AdamState<ScalarToy>::zeros(p);
    GradNormState state;
    const SharedLayer<ScalarToy> shared = [](const ScalarToy& q) -> const Matrix& { return q.b; };
    for (int t = 0; t < 100; ++t) {
        gradnorm_step(p, adam, AdamConfig{0.01}, obj, kAllTasks, state, GradNormConfig{}, shared);
        const double ratio = state.weights[0] / state.weights[1];
        ASSERT_GE(ratio, 0.95);
        ASSERT_LE(ratio, 1.05);
    }
    EXPECT_NE(state.weights[0], state.weights[2]);
}

TEST(BasicStep, MaskedHeadsGetZeroGradientAndStayFixed) {
    auto s = small_setup();
    const BatchObjective objective(s.model, first_events(s.train, 5), {1, 2, 3, 4, 5});
    ModelParams p = ModelParams::init(s.model, 5);
    const ModelParams before = p;
    const auto eval = objective(p, mask_weights({true, false, false}), false);
    for (const auto& t : tensors(eval.combined))
        if (t.owner == 1 || t.owner == 2) EXPECT_EQ(t.value->cwiseAbs().maxCoeff(), 0.0) << t.name;
    auto adam = AdamState<ModelParams>::zeros(p);
    for (int i = 0; i < 3; ++i) basic_step(p, adam, AdamConfig{}, objective, mask_weights({true, false, false}));
    const auto now = tensors(std::as_const(p));
    const auto old = tensors(before);
    for (std::size_t i = 0; i < now.size(); ++i) {
        if (now[i].owner == 1 || now[i].owner == 2) EXPECT_TRUE(*now[i].value == *old[i].value) << now[i].name;
    }
}

TEST(BasicStep, ZeroLearningRateKeepsParameters) {
    auto s = small_setup();
    const BatchObjective objective(s.model, first_events(s.train, 3), {1, 2, 3});
    ModelParams p = ModelParams::init(s.model, 6);
    const ModelParams before = p;
    auto adam = AdamState<ModelParams>::zeros(p);
    basic_step(p, adam, AdamConfig{0.0}, objective, TaskVector{1, 1, 1});
    EXPECT_TRUE(bit_equal(p, before));
}

TEST(BasicStep, DeltaMatchesNumericalGradientStep) {
    auto s = small_setup();
    const BatchObjective objective(s.model, first_events(s.train, 2), {8, 9});
    ModelParams p = ModelParams::init(s.model, 7);
    const ModelParams before = p;
    const TaskVector w{1, 1, 1};
    const double lr = 1e-3;
    auto adam = AdamState<ModelParams>::zeros(p);
    basic_step(p, adam, AdamConfig{lr}, objective, w);

    // Independent step: central differences, then Adam's first update
    // lr * g / (|g| + eps) written out directly.
    ModelParams probe = before;
    auto refs = tensors(probe);
    auto moved = tensors(std::as_const(p));
    auto orig = tensors(before);
    double diff = 0.0, norm = 0.0;
    for (std::size_t t = 0; t < refs.size(); ++t) {
        Matrix& m = *refs[t].value;
        for (Eigen::Index i = 0; i < m.size(); ++i) {
            const double saved = m.data()[i];
            m.data()[i] = saved + 1e-5;
            const double up = objective(probe, w, false).weighted_loss(w);
            m.data()[i] = saved - 1e-5;
            const double down = objective(probe, w, false).weighted_loss(w);
            m.data()[i] = saved;
            const double g = (up - down) / 2e-5;
            const double expected = -lr * g / (std::abs(g) + 1e-8);
            const double actual = moved[t].value->data()[i] - orig[t].value->data()[i];
            // Entries whose gradient sits below the difference noise floor have
            // no well-defined sign.
            if (std::abs(g) < 1e-6) continue;
            diff += (actual - expected) * (actual - expected);
            norm += expected * expected;
        }
    }
    EXPECT_LE(std::sqrt(diff / norm), 1e-4);
}

TEST(BasicStep, NonFiniteLossAborts) {
    ScalarToyObjective obj;
    obj.y = {std::numeric_limits<double>::infinity(), 0, 0};
    ScalarToy p;
    auto adam = AdamState<ScalarToy>::zeros(p);
    try {
        basic_step(p, adam, AdamConfig{}, obj, TaskVector{1, 1, 1});
        ADD_FAILURE();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::NonFiniteLoss);
    }
}

TEST(Selection, ZScoreMeanWithUndefinedAndConstantComponents) {
    const double nan = std::numeric_limits<double>::quiet_NaN();
    // Component 0 favours epoch 2; component 1 is constant; component 2 undefined.
    const std::vector<std::vector<double>> scores{{0.1, 1.0, nan}, {0.2, 1.0, -0.5}, {0.5, 1.0, -0.1}};
    EXPECT_EQ(select_best_epoch(scores), std::optional<std::size_t>(2));
    EXPECT_EQ(select_best_epoch({{1.0}, {1.0}}), std::nullopt);
    EXPECT_EQ(select_best_epoch({}), std::nullopt);
    // Tie goes to the earliest epoch.
    EXPECT_EQ(select_best_epoch({{0.0, 1.0}, {1.0, 0.0}}), std::optional<std::size_t>(0));
    // Trade-off: z-scores (-1.22, 0, 1.22) and (1.22, 0, -1.22) * 2-weighted via a duplicate.
    EXPECT_EQ(select_best_epoch({{3.0, 0.0, 0.0}, {2.0, 2.0, 2.0}, {1.0, 1.0, 1.0}}), std::optional<std::size_t>(1));
}

TEST(Selection, DominanceIgnoresUndefinedComponents) {
    const double nan = std::numeric_limits<double>::quiet_NaN();
    EXPECT_TRUE(strictly_dominates({1.0, 2.0}, {0.5, 1.0}));
    EXPECT_FALSE(strictly_dominates({1.0, 1.0}, {0.5, 1.0}));
    EXPECT_TRUE(strictly_dominates({1.0, nan}, {0.5, 3.0}));
    EXPECT_FALSE(strictly_dominates({nan}, {nan}));
}

TEST(Selection, ComponentsFollowStrategy) {
    MetricsReport r;
    r.rumor.macro_f1 = 0.7;
    r.virality.mse = 2.0;
    EXPECT_EQ(selection_components(Strategy::SingleRumor, kAllTasks, r), (std::vector<double>{0.7}));
    EXPECT_EQ(selection_components(Strategy::SingleVirality, kAllTasks, r), (std::vector<double>{-2.0}));
    const auto joint = selection_components(Strategy::Basic, kAllTasks, r);
    ASSERT_EQ(joint.size(), 3u);
    EXPECT_TRUE(std::isnan(joint[2]));
}

TEST(Trainer, ZeroEpochsReturnsInitialization) {
    auto s = small_setup();
    TrainConfig cfg;
    cfg.epochs = 0;
    cfg.seed = 3;
    const auto result = train(s.model, cfg, s.train, s.validation);
    EXPECT_TRUE(result.log.empty());
    EXPECT_TRUE(bit_equal(result.final_params, ModelParams::init(s.model, 3)));
    EXPECT_EQ(result.best_epoch, -1);
}

TEST(Trainer, DeterministicForEveryStrategy) {
    auto s = small_setup();
    for (Strategy strategy : {Strategy::SingleRumor, Strategy::SingleVirality, Strategy::SingleVuln, Strategy::Basic,
                              Strategy::GradNorm, Strategy::Meta}) {
        TrainConfig cfg;
        cfg.strategy = strategy;
        cfg.epochs = 2;
        cfg.seed = 11;
        const auto a = train(s.model, cfg, s.train, s.validation);
        const auto b = train(s.model, cfg, s.train, s.validation);
        EXPECT_TRUE(bit_equal(a.final_params, b.final_params)) << strategy_name(strategy);
        ASSERT_EQ(a.log.size(), 2u);
        for (std::size_t e = 0; e < a.log.size(); ++e) EXPECT_EQ(a.log[e].train_losses, b.log[e].train_losses);
        EXPECT_TRUE(params_finite(a.final_params));
    }
}

TEST(Trainer, JobsDoNotChangeTrajectory) {
    auto s = small_setup();
    TrainConfig cfg;
    cfg.epochs = 1;
    cfg.seed = 2;
    const auto one = train(s.model, cfg, s.train, s.validation);
    cfg.jobs = 3;
    const auto three = train(s.model, cfg, s.train, s.validation);
    EXPECT_TRUE(bit_equal(one.final_params, three.final_params));
}

TEST(Trainer, SingleTaskLeavesOtherHeadsAtInitialization) {
    auto s = small_setup();
    TrainConfig cfg;
    cfg.strategy = Strategy::SingleVirality;
    cfg.epochs = 2;
    cfg.seed = 4;
    const auto init = ModelParams::init(s.model, 4);
    const auto result = train(s.model, cfg, s.train, s.validation);
    const auto now = tensors(result.final_params);
    const auto old = tensors(init);
    for (std::size_t i = 0; i < now.size(); ++i) {
        if (now[i].owner == 0 || now[i].owner == 2) EXPECT_TRUE(*now[i].value == *old[i].value) << now[i].name;
        if (now[i].owner == 1) EXPECT_FALSE(*now[i].value == *old[i].value) << now[i].name;
    }
}

TEST(Trainer, StepwiseRunMatchesFullRun) {
    auto s = small_setup();
    TrainConfig cfg;
    cfg.epochs = 2;
    cfg.batch_size = 4;
    cfg.strategy = Strategy::GradNorm;
    Trainer a(s.model, cfg, s.train, s.validation, ModelParams::init(s.model, 0));
    std::vector<double> objectives;
    while (!a.finished()) objectives.push_back(a.step().objective);
    const auto expected_steps = 2 * ((s.train.size() + 3) / 4);
    EXPECT_EQ(objectives.size(), expected_steps);
    const auto full = train(s.model, cfg, s.train, s.validation);
    EXPECT_TRUE(bit_equal(a.result().final_params, full.final_params));
    EXPECT_EQ(a.state().log.size(), 2u);
    for (double w : a.state().log.back().weights) EXPECT_GT(w, 0.0);
}

TEST(Trainer, BestEpochIsRetainedCandidate) {
    auto s = small_setup(40);
    TrainConfig cfg;
    cfg.epochs = 4;
    cfg.seed = 9;
    Trainer t(s.model, cfg, s.train, s.validation, ModelParams::init(s.model, 9));
    std::vector<ModelParams> per_epoch;
    while (!t.finished()) {
        t.run_epoch();
        per_epoch.push_back(t.state().params);
    }
    const auto result = t.result();
    ASSERT_EQ(result.log.size(), 4u);
    for (const auto& rec : result.log) ASSERT_TRUE(rec.validation.has_value());
    const auto best = select_best_epoch(t.state().selection_scores);
    if (best) {
        EXPECT_EQ(result.best_epoch, static_cast<int>(*best));
        EXPECT_TRUE(bit_equal(result.best_params, per_epoch[*best]));
    } else {
        EXPECT_TRUE(bit_equal(result.best_params, result.final_params));
    }
}

TEST(TrainConfig, JsonRoundTripAndValidation) {
    TrainConfig c;
    c.strategy = Strategy::Meta;
    c.loss_mask = {true, false, true};
    c.inner_lr = 0.01;
    const auto back = train_config_from_json(to_json(c));
    EXPECT_EQ(to_json(back), to_json(c));
    nlohmann::json bad = to_json(c);
    bad["batch_size"] = 0;
    EXPECT_THROW(train_config_from_json(bad), Error);
    bad = to_json(c);
    bad["strategy"] = "nope";
    EXPECT_THROW(train_config_from_json(bad), Error);
    bad = to_json(c);
    bad["loss_mask"] = {false, false, false};
    EXPECT_THROW(train_config_from_json(bad), Error);
    EXPECT_EQ(c.effective_mask(), (TaskMask{true, false, true}));
    c.strategy = Strategy::SingleVuln;
    EXPECT_EQ(c.effective_mask(), (TaskMask{false, false, true}));
}
