// cascadenet: command-line pipeline over the cascadenet library.
//
//   synth -> prepare-data -> pretrain-users -> train -> eval / sweep-observation / export
//
// Each command reads from --data and writes into --out (they may be the
// same directory; inputs are never rewritten). Every artifact-producing
// command writes manifest_<command>.json next to its outputs.

#include "run_config.hpp"

#include <CLI11.hpp>

#include <iostream>

using namespace cascadenet;
using namespace cascadenet::cli;

namespace {

constexpr const char* kEventsFile = "events.jsonl";
constexpr const char* kLabelsFile = "labels.json";
constexpr const char* kSplitsFile = "splits.json";
constexpr const char* kTableFile = "user_embeddings.txt";

struct Options {
    std::string data;
    std::string out;
    std::string config_file;
    std::string checkpoint;
    std::string resume;
    std::string split = "test";
    std::string kind = "all";
    std::string strategy;
    std::string trees, label_file, text_file;
    std::uint64_t seed = 0;
    double obs_frac = 0.0;
    double rho = 0.0;
    std::size_t events = 0;
    int epochs = 0;
    unsigned jobs = 1;
    std::vector<double> fracs = kDefaultSweepFractions;
};

struct Context {
    const Options& opt;
    const CLI::App& cmd;
    std::vector<std::string> argv;
    RunConfig config;
    std::uint64_t seed = 0;

    bool given(const std::string& flag) const {
        const CLI::Option* o = cmd.get_option_no_throw(flag);
        return o != nullptr && o->count() > 0;
    }
};

fs::path events_path(const std::string& data) {
    const fs::path p(data);
    return fs::is_regular_file(p) ? p : p / kEventsFile;
}

fs::path require_out(const Options& opt) {
    if (opt.out.empty()) throw Error(ErrorCode::UsageError, "--out is required");
    fs::create_directories(opt.out);
    return opt.out;
}

fs::path require_data(const Options& opt) {
    if (opt.data.empty()) throw Error(ErrorCode::UsageError, "--data is required");
    return opt.data;
}

/// Defaults, then the config file, then flags.
void resolve_config(Context& ctx) {
    if (!ctx.opt.config_file.empty()) ctx.config.load_file(ctx.opt.config_file);
    if (ctx.given("--seed")) ctx.config.set("train", "seed", std::to_string(ctx.opt.seed), "flag");
    if (ctx.given("--epochs")) ctx.config.set("train", "epochs", std::to_string(ctx.opt.epochs), "flag");
    if (ctx.given("--strategy")) ctx.config.set("train", "strategy", ctx.opt.strategy, "flag");
    if (ctx.given("--jobs")) ctx.config.set("train", "jobs", std::to_string(ctx.opt.jobs), "flag");
    if (ctx.given("--obs-frac")) {
        std::ostringstream v;
        v.precision(17);
        v << ctx.opt.obs_frac;
        ctx.config.set("train", "obs_fraction", v.str(), "flag");
    }
    if (ctx.given("--events")) ctx.config.set("synth", "events", std::to_string(ctx.opt.events), "flag");
    if (ctx.given("--rho")) {
        std::ostringstream v;
        v.precision(17);
        v << ctx.opt.rho;
        ctx.config.set("synth", "rho", v.str(), "flag");
    }
    ctx.config.validate();
    ctx.seed = ctx.config.values["train"]["seed"].get<std::uint64_t>();
}

std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) out += c == '"' ? std::string("\"\"") : std::string(1, c);
    return out + "\"";
}

std::string number(double v) {
    std::ostringstream out;
    out.precision(17);
    out << v;
    return out.str();
}

/// Corpus plus the derived artifacts of prepare-data and pretrain-users.
struct Workspace {
    std::vector<PropagationEvent> events;
    LabelSet labels;
    CorpusSplits splits;
    UserEmbeddingTable table;
};

Workspace load_workspace(const fs::path& data, Manifest& manifest, bool with_table) {
    Workspace w;
    const fs::path events = events_path(data.string());
    const fs::path dir = fs::is_regular_file(data) ? data.parent_path() : data;
    manifest.input(events);
    w.events = read_events(events.string());
    manifest.input(dir / kLabelsFile);
    w.labels = labels_from_json(read_json(dir / kLabelsFile));
    manifest.input(dir / kSplitsFile);
    w.splits = splits_from_json(read_json(dir / kSplitsFile));
    if (with_table) {
        manifest.input(dir / kTableFile);
        w.table = load_embedding_table((dir / kTableFile).string());
    }
    return w;
}

const std::vector<std::string>& split_ids(const CorpusSplits& s, const std::string& name) {
    if (name == "train") return s.train;
    if (name == "validation") return s.validation;
    if (name == "test") return s.test;
    throw Error(ErrorCode::UsageError, "unknown split '" + name + "'");
}

ModelCheckpoint load_model(const Options& opt, Manifest& manifest) {
    if (opt.checkpoint.empty()) throw Error(ErrorCode::UsageError, "--checkpoint is required");
    manifest.input(opt.checkpoint);
    return load_checkpoint(opt.checkpoint);
}

/// Explicit flag, else the fraction the checkpoint was trained at.
double eval_fraction(const Context& ctx, const ModelCheckpoint& ckpt) {
    if (ctx.given("--obs-frac")) return ctx.opt.obs_frac;
    if (ckpt.extra.contains("train_config")) return ckpt.extra["train_config"].value("obs_fraction", 1.0);
    return 1.0;
}

int cmd_synth(Context& ctx) {
    resolve_config(ctx);
    const fs::path out = require_out(ctx.opt);
    Manifest manifest("synth", ctx.argv);
    const auto corpus = generate_synthetic_corpus(ctx.config.synth(), ctx.seed);
    write_events((out / kEventsFile).string(), corpus.events);
    write_text(out / "planted.json",
               nlohmann::json{{"user_vulnerability", corpus.planted_vulnerability},
                              {"event_mean_vulnerability", corpus.event_mean_vulnerability}}
                       .dump() + "\n");
    manifest.output(out / kEventsFile);
    manifest.output(out / "planted.json");
    manifest.write(out, ctx.config, ctx.seed);
    return 0;
}

int cmd_prepare(Context& ctx) {
    resolve_config(ctx);
    const fs::path data = require_data(ctx.opt);
    const fs::path out = require_out(ctx.opt);
    Manifest manifest("prepare-data", ctx.argv);
    const fs::path source = events_path(data.string());
    manifest.input(source);
    const auto events = read_events(source.string());
    const fs::path target = out / kEventsFile;
    if (!fs::exists(target) || !fs::equivalent(source, target)) {
        fs::copy_file(source, target, fs::copy_options::overwrite_existing);
    }
    write_text(out / kLabelsFile, cascadenet::to_json(derive_labels(events)).dump() + "\n");
    write_text(out / kSplitsFile, cascadenet::to_json(split_corpus(events, ctx.seed)).dump() + "\n");
    for (const char* f : {kEventsFile, kLabelsFile, kSplitsFile}) manifest.output(out / f);
    manifest.write(out, ctx.config, ctx.seed);
    return 0;
}

int cmd_stats(Context& ctx) {
    resolve_config(ctx);
    const fs::path data = require_data(ctx.opt);
    Manifest manifest("dataset-stats", ctx.argv);
    const fs::path source = events_path(data.string());
    manifest.input(source);
    const auto events = read_events(source.string());
    const fs::path labels_path = source.parent_path() / kLabelsFile;
    LabelSet labels;
    if (fs::exists(labels_path)) {
        manifest.input(labels_path);
        labels = labels_from_json(read_json(labels_path));
    } else {
        labels = derive_labels(events);
    }
    const StatsTable table = corpus_stats(events, labels);
    std::cout << format_stats(table);
    if (!ctx.opt.out.empty()) {
        const fs::path out = require_out(ctx.opt);
        write_text(out / "stats.json", cascadenet::to_json(table).dump(2) + "\n");
        write_text(out / "stats.txt", format_stats(table));
        manifest.output(out / "stats.json");
        manifest.output(out / "stats.txt");
        manifest.write(out, ctx.config, ctx.seed);
    }
    return 0;
}

int cmd_pretrain(Context& ctx) {
    resolve_config(ctx);
    const fs::path data = require_data(ctx.opt);
    const fs::path out = require_out(ctx.opt);
    Manifest manifest("pretrain-users", ctx.argv);
    const Workspace w = load_workspace(data, manifest, false);
    const auto graph = build_global_user_graph(select_events(w.events, w.splits.train));
    const auto table = pretrain_user_embeddings(graph, ctx.config.pretrain(), ctx.seed);
    save_embedding_table((out / kTableFile).string(), table);
    manifest.output(out / kTableFile);
    manifest.write(out, ctx.config, ctx.seed);
    return 0;
}

int cmd_train(Context& ctx) {
    resolve_config(ctx);
    const fs::path data = require_data(ctx.opt);
    const fs::path out = require_out(ctx.opt);
    Manifest manifest("train", ctx.argv);
    const Workspace w = load_workspace(data, manifest, true);
    const ModelConfig model = ctx.config.model();
    const TrainConfig train = ctx.config.train();
    const auto encoder = model.make_text_encoder();
    const auto train_set =
        prepare_events(select_events(w.events, w.splits.train), train.obs_fraction, encoder, w.table, w.labels);
    const auto validation_set =
        prepare_events(select_events(w.events, w.splits.validation), train.obs_fraction, encoder, w.table, w.labels);

    Trainer trainer(model, train, train_set, validation_set, ModelParams::init(model, train.seed));
    if (!ctx.opt.resume.empty()) {
        manifest.input(ctx.opt.resume);
        load_trainer_checkpoint(ctx.opt.resume, trainer);
    }
    const fs::path snapshot = out / "trainer.ckpt";
    while (!trainer.finished()) {
        trainer.run_epoch();
        save_trainer_checkpoint(snapshot.string(), trainer);
        const auto& rec = trainer.state().log.back();
        std::cerr << "epoch " << rec.epoch << " losses " << rec.train_losses[0] << ' ' << rec.train_losses[1] << ' '
                  << rec.train_losses[2] << '\n';
    }
    const TrainResult result = trainer.result();
    std::string log;
    for (const auto& rec : result.log) log += cascadenet::to_json(rec).dump() + "\n";
    write_text(out / "train_log.jsonl", log);
    const nlohmann::json extra = {{"train_config", cascadenet::to_json(train)}, {"best_epoch", result.best_epoch}};
    save_checkpoint((out / "model.ckpt").string(), result.best_params, model, extra);
    save_checkpoint((out / "final.ckpt").string(), result.final_params, model, extra);
    for (const char* f : {"train_log.jsonl", "model.ckpt", "final.ckpt"}) manifest.output(out / f);
    if (fs::exists(snapshot)) manifest.output(snapshot);
    manifest.write(out, ctx.config, ctx.seed);
    return 0;
}

int cmd_eval(Context& ctx) {
    resolve_config(ctx);
    const fs::path data = require_data(ctx.opt);
    const fs::path out = require_out(ctx.opt);
    Manifest manifest("eval", ctx.argv);
    const ModelCheckpoint ckpt = load_model(ctx.opt, manifest);
    const Workspace w = load_workspace(data, manifest, true);
    const auto split = select_events(w.events, split_ids(w.splits, ctx.opt.split));
    const double fraction = eval_fraction(ctx, ckpt);
    const auto report = evaluate(ckpt.params, split, w.labels, w.table, ckpt.config.make_text_encoder(), ckpt.config,
                                 fraction, ReportMeta{ctx.opt.split, fraction, 0, 0, ctx.seed});
    const auto doc = cascadenet::to_json(report);
    if (auto problem = validate_report_json(doc); !problem.empty()) throw Error(ErrorCode::ValidationError, problem);
    write_text(out / "report.json", doc.dump(2) + "\n");
    std::cout << doc.dump(2) << '\n';
    manifest.output(out / "report.json");
    manifest.write(out, ctx.config, ctx.seed);
    return 0;
}

int cmd_sweep(Context& ctx) {
    resolve_config(ctx);
    const fs::path data = require_data(ctx.opt);
    const fs::path out = require_out(ctx.opt);
    Manifest manifest("sweep-observation", ctx.argv);
    const ModelCheckpoint ckpt = load_model(ctx.opt, manifest);
    const Workspace w = load_workspace(data, manifest, true);
    const auto split = select_events(w.events, split_ids(w.splits, ctx.opt.split));
    const auto reports = observation_sweep(ckpt.params, split, w.labels, w.table, ckpt.config.make_text_encoder(),
                                           ckpt.config, ctx.opt.fracs, ReportMeta{ctx.opt.split, 1.0, 0, 0, ctx.seed});
    nlohmann::json doc = nlohmann::json::array();
    for (const auto& r : reports) doc.push_back(cascadenet::to_json(r));
    write_text(out / "sweep.json", doc.dump(2) + "\n");
    write_text(out / "sweep.csv", sweep_csv(reports));
    std::cout << sweep_csv(reports);
    manifest.output(out / "sweep.json");
    manifest.output(out / "sweep.csv");
    manifest.write(out, ctx.config, ctx.seed);
    return 0;
}

int cmd_export(Context& ctx) {
    resolve_config(ctx);
    const fs::path data = require_data(ctx.opt);
    const fs::path out = require_out(ctx.opt);
    const std::string& kind = ctx.opt.kind;
    const bool all = kind == "all";
    Manifest manifest("export", ctx.argv);
    const ModelCheckpoint ckpt = load_model(ctx.opt, manifest);
    const Workspace w = load_workspace(data, manifest, true);
    const auto split = select_events(w.events, split_ids(w.splits, ctx.opt.split));
    const auto encoder = ckpt.config.make_text_encoder();
    const auto prepared = prepare_events(split, eval_fraction(ctx, ckpt), encoder, w.table, w.labels);
    const int k = ckpt.config.communities;
    const int d = ckpt.config.dim;

    std::ostringstream communities, assignments, embeddings, predictions, vulnerability;
    communities << "user_id,event_id,community,weight\n";
    assignments << "event_id,user_id";
    for (int c = 0; c < k; ++c) assignments << ",c" << c;
    assignments << '\n';
    embeddings << "event_id,user_id";
    for (int c = 0; c < d; ++c) embeddings << ",x" << c;
    embeddings << '\n';
    predictions << "event_id,rumor_probability,predicted_label,predicted_virality\n";
    vulnerability << "event_id,user_id,community,vulnerability\n";
    for (const auto& e : prepared) {
        const ForwardTrace trace = forward_trace(ckpt.params, e, ckpt.config, nullptr);
        const Matrix& assign = trace.backbone.pooled.assignment;
        const Predictions& p = trace.predictions;
        const std::string id = csv_field(e.event_id);
        predictions << id << ',' << number(p.rumor_probability()) << ',' << label_name(p.predicted_label()) << ','
                    << number(p.virality) << '\n';
        for (std::size_t u = 0; u < e.users.size(); ++u) {
            const auto row = static_cast<Eigen::Index>(u);
            Eigen::Index best = 0;
            const double weight = assign.row(row).maxCoeff(&best);
            const std::string user = csv_field(e.users[u]);
            communities << user << ',' << id << ',' << best << ',' << number(weight) << '\n';
            vulnerability << id << ',' << user << ',' << best << ',' << number(p.vulnerability(row)) << '\n';
            assignments << id << ',' << user;
            for (int c = 0; c < k; ++c) assignments << ',' << number(assign(row, c));
            assignments << '\n';
            embeddings << id << ',' << user;
            for (int c = 0; c < d; ++c) embeddings << ',' << number(trace.x4(row, c));
            embeddings << '\n';
        }
    }
    std::vector<std::pair<std::string, std::string>> files;
    if (all || kind == "communities") {
        files.emplace_back("communities.csv", communities.str());
        files.emplace_back("assignments.csv", assignments.str());
    }
    if (all || kind == "embeddings") files.emplace_back("embeddings.csv", embeddings.str());
    if (all || kind == "predictions") {
        files.emplace_back("predictions.csv", predictions.str());
        files.emplace_back("vulnerability.csv", vulnerability.str());
    }
    if (files.empty()) throw Error(ErrorCode::UsageError, "unknown export kind '" + kind + "'");
    for (const auto& [name, text] : files) {
        write_text(out / name, text);
        manifest.output(out / name);
    }
    manifest.write(out, ctx.config, ctx.seed);
    return 0;
}

int cmd_convert(Context& ctx) {
    resolve_config(ctx);
    const fs::path out = require_out(ctx.opt);
    if (ctx.opt.trees.empty() || ctx.opt.label_file.empty()) {
        throw Error(ErrorCode::UsageError, "--trees and --labels are required");
    }
    Manifest manifest("convert-legacy", ctx.argv);
    manifest.input(ctx.opt.label_file);
    std::optional<fs::path> texts;
    if (!ctx.opt.text_file.empty()) {
        texts = ctx.opt.text_file;
        manifest.input(*texts);
    }
    LegacyConversionReport report;
    const auto events = convert_legacy_corpus(ctx.opt.trees, ctx.opt.label_file, texts, report);
    write_events((out / kEventsFile).string(), events);
    write_text(out / "conversion.json", nlohmann::json{{"events", report.events},
                                                       {"skipped_events", report.skipped_events},
                                                       {"dropped_edges", report.dropped_edges}}
                                                .dump(2) + "\n");
    manifest.output(out / kEventsFile);
    manifest.output(out / "conversion.json");
    manifest.write(out, ctx.config, ctx.seed);
    return 0;
}

int fail(ErrorCode code, std::string message) {
    const std::string prefix = std::string(to_string(code)) + ": ";
    if (message.rfind(prefix, 0) == 0) message.erase(0, prefix.size());
    std::cerr << nlohmann::json{{"error", {{"code", std::string(to_string(code))}, {"message", message}}}}.dump() << '\n';
    return code == ErrorCode::UsageError ? 2 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Rumor, virality and user vulnerability modelling on propagation cascades"};
    app.require_subcommand(1);
    Options opt;

    auto add_common = [&](CLI::App* c) {
        c->add_option("--data", opt.data, "Input directory (or events file)");
        c->add_option("--out", opt.out, "Output directory");
        c->add_option("--seed", opt.seed, "Random seed");
        c->add_option("--config", opt.config_file, "INI file with [model] [train] [pretrain] [synth] sections");
        c->add_option("--jobs", opt.jobs, "Worker threads")->check(CLI::PositiveNumber);
    };
    auto add_model_input = [&](CLI::App* c) {
        c->add_option("--checkpoint", opt.checkpoint, "Model checkpoint");
        c->add_option("--split", opt.split, "train, validation or test");
        c->add_option("--obs-frac", opt.obs_frac, "Observation fraction in (0,1]");
    };

    std::vector<std::pair<CLI::App*, int (*)(Context&)>> commands;
    auto* synth = app.add_subcommand("synth", "Generate a synthetic corpus");
    add_common(synth);
    synth->add_option("--events", opt.events, "Number of events");
    synth->add_option("--rho", opt.rho, "Planted vulnerability/rumor correlation in [0,1]");
    commands.emplace_back(synth, cmd_synth);

    auto* prepare = app.add_subcommand("prepare-data", "Derive labels and splits");
    add_common(prepare);
    commands.emplace_back(prepare, cmd_prepare);

    auto* stats = app.add_subcommand("dataset-stats", "Per-class corpus statistics");
    add_common(stats);
    commands.emplace_back(stats, cmd_stats);

    auto* pretrain = app.add_subcommand("pretrain-users", "Pre-train user embeddings on the training graph");
    add_common(pretrain);
    commands.emplace_back(pretrain, cmd_pretrain);

    auto* train = app.add_subcommand("train", "Train the multi-task model");
    add_common(train);
    train->add_option("--strategy", opt.strategy, "single_rumor, single_virality, single_vuln, basic, gradnorm, meta");
    train->add_option("--epochs", opt.epochs, "Training epochs");
    train->add_option("--obs-frac", opt.obs_frac, "Observation fraction in (0,1]");
    train->add_option("--resume", opt.resume, "Trainer checkpoint to continue from");
    commands.emplace_back(train, cmd_train);

    auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint on a split");
    add_common(eval);
    add_model_input(eval);
    commands.emplace_back(eval, cmd_eval);

    auto* sweep = app.add_subcommand("sweep-observation", "Evaluate across observation fractions");
    add_common(sweep);
    add_model_input(sweep);
    sweep->add_option("--fracs", opt.fracs, "Comma-separated fractions")->delimiter(',');
    commands.emplace_back(sweep, cmd_sweep);

    auto* exp = app.add_subcommand("export", "Export communities, embeddings and predictions");
    add_common(exp);
    add_model_input(exp);
    exp->add_option("--kind", opt.kind, "communities, embeddings, predictions or all");
    commands.emplace_back(exp, cmd_export);

    auto* convert = app.add_subcommand("convert-legacy", "Convert tree-file corpora to event records");
    add_common(convert);
    convert->add_option("--trees", opt.trees, "Directory of <event_id>.txt tree files");
    convert->add_option("--labels", opt.label_file, "label:event_id lines");
    convert->add_option("--texts", opt.text_file, "event_id<TAB>source text lines");
    commands.emplace_back(convert, cmd_convert);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        return fail(ErrorCode::UsageError, e.what());
    }

    for (auto& [cmd, run] : commands) {
        if (!cmd->parsed()) continue;
        Context ctx{opt, *cmd, std::vector<std::string>(argv, argv + argc), RunConfig{}, 0};
        try {
            return run(ctx);
        } catch (const Error& e) {
            return fail(e.code(), e.what());
        } catch (const fs::filesystem_error& e) {
            return fail(ErrorCode::IoError, e.what());
        } catch (const std::exception& e) {
            return fail(ErrorCode::ValidationError, e.what());
        }
    }
    return fail(ErrorCode::UsageError, "no subcommand");
}
