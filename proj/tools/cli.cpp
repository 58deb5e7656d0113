#include "cli.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <sstream>
#include <ostream>

#include <CLI11.hpp>
#include <json.hpp>

#include "conceptgcn/persistence.hpp"
#include "conceptgcn/stage2.hpp"
#include "report.hpp"
#include "run_dir.hpp"

namespace conceptgcn::cli {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

std::string fixed4(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4f", v);
    return buf;
}

std::string utc_now() {
    const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

void write_text(const fs::path& path, const std::string& text) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream f(path, std::ios::binary);
    if (!f) throw ConfigError("cannot write " + path.string());
    f << text;
    if (!f) throw ConfigError("write failed: " + path.string());
}

json stats_json(const AttributedGraph& g, const IngestReport& ingest) {
    const DatasetStats s = stats_of(g);
    return {{"nodes", s.nodes},
            {"edges", s.edges},
            {"features", s.features},
            {"classes", s.classes},
            {"class_histogram", class_histogram(g)},
            {"ingest",
             {{"citation_records", ingest.citation_records},
              {"dropped_unknown", ingest.dropped_unknown},
              {"dropped_self", ingest.dropped_self},
              {"duplicate_records", ingest.duplicate_records}}}};
}

json accuracy_json(const Accuracy& a) {
    return {{"train_acc", a.train}, {"val_acc", a.val}, {"test_acc", a.test}};
}

std::string class_name(const AttributedGraph& g, int label) {
    const auto c = static_cast<std::size_t>(label);
    return c < g.class_names.size() ? g.class_names[c] : std::to_string(label);
}

std::string node_name(const AttributedGraph& g, std::size_t i) {
    return i < g.node_names.size() ? g.node_names[i] : std::to_string(i);
}

// Every training option as an override that is applied only when given.
struct TrainFlags {
    std::optional<double> learning_rate, momentum, gamma, dropout, negative_slope, weight_decay,
        sigma, ratio_node, alpha, train_ratio, val_ratio;
    std::optional<std::size_t> epochs, batch_size, hidden, graph_size, phase1_epochs;
    std::optional<std::uint64_t> seed, split_seed;
    std::optional<bool> original_edges, row_normalize, stochastic_concept_pass, joint_finetune;

    void add_to(CLI::App& cmd) {
        cmd.add_option("--lr,--learning-rate", learning_rate, "Initial learning rate");
        cmd.add_option("--epochs", epochs, "Total epochs over both phases");
        cmd.add_option("--phase1-epochs", phase1_epochs, "Stage-1 epochs (default epochs/2)");
        cmd.add_option("--batch-size", batch_size, "Training nodes per step; 0 = full batch");
        cmd.add_option("--momentum", momentum);
        cmd.add_option("--gamma", gamma, "Per-epoch learning-rate multiplier");
        cmd.add_option("--dropout", dropout);
        cmd.add_option("--hidden", hidden, "Hidden width of every layer");
        cmd.add_option("--negative-slope", negative_slope, "LeakyReLU slope");
        cmd.add_option("--weight-decay", weight_decay, "Fixed weight decay (default from preset)");
        cmd.add_option("--sigma", sigma, "Kernel width of the conceptual graph");
        cmd.add_option("--ratio-node", ratio_node);
        cmd.add_option("--graph-size", graph_size);
        cmd.add_option("--alpha", alpha, "Share of the conceptual graph when mixing");
        cmd.add_option("--seed", seed, "Training seed");
        cmd.add_option("--split-seed", split_seed);
        cmd.add_option("--train-ratio", train_ratio);
        cmd.add_option("--val-ratio", val_ratio);
        cmd.add_flag("--original-edges,!--no-original-edges", original_edges,
                     "Mix the input graph into the conceptual graph");
        cmd.add_flag("--row-normalize,!--no-row-normalize", row_normalize,
                     "Scale feature rows to unit sum");
        cmd.add_flag("--stochastic-concept-pass,!--no-stochastic-concept-pass",
                     stochastic_concept_pass, "Keep dropout on when building the conceptual graph");
        cmd.add_flag("--joint-finetune,!--no-joint-finetune", joint_finetune,
                     "Keep training stage 1 during phase B");
    }

    void apply(TrainConfig& c) const {
        auto set = [](auto& field, const auto& flag) {
            if (flag) field = *flag;
        };
        set(c.learning_rate, learning_rate);
        set(c.epochs, epochs);
        if (phase1_epochs) c.phase1_epochs = *phase1_epochs;
        set(c.batch_size, batch_size);
        set(c.momentum, momentum);
        set(c.gamma, gamma);
        set(c.dropout, dropout);
        set(c.hidden, hidden);
        set(c.negative_slope, negative_slope);
        if (weight_decay) c.weight_decay_override = *weight_decay;
        set(c.sigma, sigma);
        set(c.ratio_node, ratio_node);
        set(c.graph_size, graph_size);
        set(c.alpha, alpha);
        set(c.seed, seed);
        set(c.split_seed, split_seed);
        set(c.train_ratio, train_ratio);
        set(c.val_ratio, val_ratio);
        set(c.include_original_edges, original_edges);
        set(c.row_normalize_features, row_normalize);
        set(c.stochastic_concept_pass, stochastic_concept_pass);
        set(c.joint_finetune, joint_finetune);
    }
};

std::string preset_key(const std::string& argument, const AttributedGraph& g) {
    std::string key = fs::path(argument).extension() == ".json" ? g.name : argument;
    std::transform(key.begin(), key.end(), key.begin(),
                   [](unsigned char ch) { return static_cast<char>(std::tolower(ch)); });
    return key;
}

TrainConfig preset_for(const std::string& key) {
    try {
        return TrainConfig::for_dataset(key);
    } catch (const ConfigError&) {
        TrainConfig c;
        c.dataset = key;
        return c;
    }
}

void print_epoch(std::ostream& out, const EpochRecord& r, const char* tag) {
    char buf[160];
    std::snprintf(buf, sizeof buf,
                  "epoch %4zu  %-8s train_loss %.4f  val_loss %.4f  train_acc %.4f  "
                  "val_acc %.4f  lr %.5f\n",
                  r.epoch, tag, r.train_loss, r.val_loss, r.train_acc, r.val_acc, r.lr);
    out << buf;
}

struct TrainArgs {
    std::string dataset;
    std::string data_dir;
    std::string config_path;
    std::string out_dir;
    std::size_t log_every = 10;
    bool baseline = false;
    TrainFlags flags;
};

int cmd_train(const TrainArgs& a, std::ostream& out) {
    const fs::path data_dir = a.data_dir.empty() ? default_data_dir() : fs::path(a.data_dir);
    ResolvedDataset ds = resolve_dataset(a.dataset, data_dir);
    const AttributedGraph& g = ds.graph;

    TrainConfig cfg = preset_for(preset_key(a.dataset, g));
    if (!a.config_path.empty()) {
        std::ifstream f(a.config_path, std::ios::binary);
        if (!f) throw ConfigError("cannot read config file " + a.config_path);
        std::ostringstream ss;
        ss << f.rdbuf();
        cfg = overlay_config(cfg, ss.str());
    }
    a.flags.apply(cfg);
    cfg.validate();

    const RunPaths paths{a.out_dir.empty() ? fs::path("runs") / cfg.dataset : fs::path(a.out_dir)};
    fs::create_directories(paths.dir);
    const std::string started = utc_now();

    const DataSplit split = make_splits(g, cfg.train_ratio, cfg.val_ratio, cfg.split_seed);
    out << "dataset " << cfg.dataset << ": " << g.node_count() << " nodes, " << g.edge_count()
        << " edges, " << g.feature_count() << " features, " << g.class_count << " classes\n";
    out << "split " << mask_count(split.train_mask) << " / " << mask_count(split.val_mask) << " / "
        << mask_count(split.test_mask) << "  weight decay " << cfg.weight_decay() << "\n";

    const std::size_t phase1 = cfg.resolved_phase1_epochs();
    auto progress = [&](const char* fixed_tag) {
        return [&, fixed_tag](const EpochRecord& r) {
            if (a.log_every > 0 && (r.epoch % a.log_every == 0 || r.epoch == phase1 ||
                                    r.epoch == cfg.epochs)) {
                print_epoch(out, r, fixed_tag ? fixed_tag : r.epoch <= phase1 ? "stage 1" : "stage 2");
            }
        };
    };
    PipelineResult result = train_pipeline(cfg, g, split, progress(nullptr));
    save_run(paths, g, result);

    json manifest;
    manifest["version"] = CONCEPTGCN_VERSION;
    manifest["command"] = "train";
    manifest["created"] = started;
    manifest["finished"] = utc_now();
    manifest["seed"] = cfg.seed;
    manifest["config"] = json::parse(to_json(cfg));
    json files = json::array();
    for (const auto& f : ds.files) files.push_back(f.string());
    manifest["dataset"] = {{"name", cfg.dataset},
                           {"argument", a.dataset},
                           {"format", ds.format},
                           {"files", files},
                           {"stats", stats_json(g, ds.ingest)}};
    manifest["split"] = {{"train", mask_count(split.train_mask)},
                         {"val", mask_count(split.val_mask)},
                         {"test", mask_count(split.test_mask)}};
    json outputs = {{"manifest", "manifest.json"},
                    {"metrics", "metrics.csv"},
                    {"stage1", {"stage1.bin", "stage1.json"}},
                    {"stage2", {"stage2.bin", "stage2.json"}},
                    {"stage1_output", {"stage1_output.bin", "stage1_output.json"}},
                    {"concept_graph", "concept_graph.json"}};
    manifest["results"] = accuracy_json(result.accuracy);
    manifest["concept_graph"] = {{"neighbors", cfg.concept_params().neighbor_count()},
                                 {"edges", (result.conceptual.adjacency.nnz() -
                                            result.conceptual.adjacency.rows()) / 2}};

    out << "final accuracy  train " << fixed4(result.accuracy.train) << "  val "
        << fixed4(result.accuracy.val) << "  test " << fixed4(result.accuracy.test) << "\n";

    if (a.baseline) {
        out << "training baseline GCN\n";
        BaselineResult base = train_baseline_gcn(cfg, g, split, progress("baseline"));
        save_parameters(base.model.parameters(), paths.bin("baseline"), paths.shapes("baseline"));
        base.log.write_csv(paths.dir / "baseline_metrics.csv");
        outputs["baseline"] = {"baseline.bin", "baseline.json"};
        outputs["baseline_metrics"] = "baseline_metrics.csv";
        manifest["baseline_results"] = accuracy_json(base.accuracy);
        out << "\n              train     val    test\n";
        out << "pipeline     " << fixed4(result.accuracy.train) << "  " << fixed4(result.accuracy.val)
            << "  " << fixed4(result.accuracy.test) << "\n";
        out << "baseline     " << fixed4(base.accuracy.train) << "  " << fixed4(base.accuracy.val)
            << "  " << fixed4(base.accuracy.test) << "\n";
    }
    manifest["outputs"] = outputs;
    write_text(paths.manifest(), manifest.dump(2) + "\n");
    out << "run written to " << paths.dir.string() << "\n";
    return kExitOk;
}

struct EvalArgs {
    std::string run_dir;
    std::string dataset;
    std::string data_dir;
    std::optional<std::uint64_t> split_seed;
    bool as_json = false;
};

LoadedRun load(const EvalArgs& a) {
    const fs::path data_dir = a.data_dir.empty() ? default_data_dir() : fs::path(a.data_dir);
    return load_run(RunPaths{a.run_dir}, a.dataset, data_dir, a.split_seed);
}

int cmd_eval(const EvalArgs& a, std::ostream& out) {
    const LoadedRun run = load(a);
    const Accuracy acc =
        evaluate_split(run_probabilities(run), run.dataset.graph.labels, run.split);
    if (a.as_json) {
        out << accuracy_json(acc).dump() << "\n";
    } else {
        out << "train_acc " << fixed4(acc.train) << "\nval_acc   " << fixed4(acc.val)
            << "\ntest_acc  " << fixed4(acc.test) << "\n";
    }
    return kExitOk;
}

struct ExportArgs {
    std::string what;
    std::string out_path;
    EvalArgs source;
};

int cmd_export(const ExportArgs& a, std::ostream& out) {
    const RunPaths paths{a.source.run_dir};
    const fs::path target(a.out_path);
    if (a.what == "curves") {
        const MetricsLog log = MetricsLog::read_csv(paths.metrics());
        fs::path stem = target;
        if (stem.extension() == ".csv" || stem.extension() == ".svg") stem.replace_extension();
        const fs::path csv = fs::path(stem).concat(".csv"), svg = fs::path(stem).concat(".svg");
        write_text(csv, log.to_csv());
        write_text(svg, curves_svg(log, "training curves: " + paths.dir.filename().string()));
        out << "wrote " << csv.string() << " and " << svg.string() << "\n";
        return kExitOk;
    }
    if (a.what == "concept-graph") {
        if (!fs::is_regular_file(paths.concept_graph())) {
            throw ParseError("missing " + paths.concept_graph().string());
        }
        if (target.has_parent_path()) fs::create_directories(target.parent_path());
        fs::copy_file(paths.concept_graph(), target, fs::copy_options::overwrite_existing);
        out << "wrote " << target.string() << "\n";
        return kExitOk;
    }

    const LoadedRun run = load(a.source);
    const AttributedGraph& g = run.dataset.graph;
    std::string csv;
    if (a.what == "embeddings") {
        const DenseMatrix& high = run.stage1_output.high_level;
        const DenseMatrix& probs = run.stage1_output.prediction.probabilities();
        const DenseMatrix pcs = pca_project(high, std::min<std::size_t>(2, high.cols()));
        csv = "node_name,label";
        for (std::size_t c = 0; c < pcs.cols(); ++c) csv += ",pc" + std::to_string(c + 1);
        for (std::size_t c = 0; c < high.cols(); ++c) csv += ",h_" + std::to_string(c);
        for (std::size_t c = 0; c < probs.cols(); ++c) csv += ",p_" + std::to_string(c);
        csv += '\n';
        for (std::size_t i = 0; i < g.node_count(); ++i) {
            csv += csv_field(node_name(g, i)) + ',' + csv_field(class_name(g, g.labels[i]));
            for (double v : pcs.row(i)) csv += ',' + format_double(v);
            for (double v : high.row(i)) csv += ',' + format_double(v);
            for (double v : probs.row(i)) csv += ',' + format_double(v);
            csv += '\n';
        }
    } else {
        const DenseMatrix probs = run_probabilities(run);
        const std::vector<int> predicted = predict(probs);
        csv = "node_name,label,true_label,split";
        for (std::size_t c = 0; c < probs.cols(); ++c) {
            csv += ',' + csv_field("p_" + class_name(g, static_cast<int>(c)));
        }
        csv += '\n';
        for (std::size_t i = 0; i < g.node_count(); ++i) {
            const char* split = run.split.train_mask[i] ? "train"
                                : run.split.val_mask[i] ? "val"
                                                        : "test";
            csv += csv_field(node_name(g, i)) + ',' + csv_field(class_name(g, predicted[i])) +
                   ',' + csv_field(class_name(g, g.labels[i])) + ',' + split;
            for (double v : probs.row(i)) csv += ',' + format_double(v);
            csv += '\n';
        }
    }
    write_text(target, csv);
    out << "wrote " << target.string() << " (" << g.node_count() << " rows)\n";
    return kExitOk;
}

struct StatsArgs {
    std::string dataset;
    std::string data_dir;
    bool as_json = false;
};

int cmd_stats(const StatsArgs& a, std::ostream& out) {
    const fs::path data_dir = a.data_dir.empty() ? default_data_dir() : fs::path(a.data_dir);
    const ResolvedDataset ds = resolve_dataset(a.dataset, data_dir);
    const AttributedGraph& g = ds.graph;
    json stats = stats_json(g, ds.ingest);
    if (a.as_json) {
        stats["name"] = g.name;
        stats["class_names"] = g.class_names;
        out << stats.dump(2) << "\n";
        return kExitOk;
    }
    out << "dataset   " << g.name << "\nnodes     " << g.node_count() << "\nedges     "
        << g.edge_count() << "\nfeatures  " << g.feature_count() << "\nclasses   "
        << g.class_count << "\n\nclass distribution\n";
    const std::vector<std::size_t> hist = class_histogram(g);
    const std::size_t peak = hist.empty() ? 1 : std::max<std::size_t>(1, *std::max_element(hist.begin(), hist.end()));
    std::size_t width = 5;
    for (std::size_t c = 0; c < hist.size(); ++c) {
        width = std::max(width, class_name(g, static_cast<int>(c)).size());
    }
    for (std::size_t c = 0; c < hist.size(); ++c) {
        char buf[64];
        std::snprintf(buf, sizeof buf, " %6zu  %5.1f%%  ", hist[c],
                      100.0 * static_cast<double>(hist[c]) / static_cast<double>(g.node_count()));
        std::string name = class_name(g, static_cast<int>(c));
        name.resize(width, ' ');
        out << "  " << name << buf << std::string(hist[c] * 40 / peak, '#') << "\n";
    }
    if (ds.format == "linqs") {
        out << "\ncitation records " << ds.ingest.citation_records << ": "
            << ds.ingest.duplicate_records << " duplicate, " << ds.ingest.dropped_self
            << " self-citations, " << ds.ingest.dropped_unknown << " with unknown endpoints\n";
    }
    return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Two-stage conceptual-graph GCN for node classification"};
    app.name("conceptgcn");
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string(CONCEPTGCN_VERSION));

    TrainArgs train;
    CLI::App* train_cmd = app.add_subcommand("train", "Train the pipeline and write a run directory");
    train_cmd->add_option("--dataset", train.dataset, "Dataset name or path to a .json graph")
        ->required();
    train_cmd->add_option("--data-dir", train.data_dir,
                          "Dataset root (default $CONCEPTGCN_DATA_DIR or ./data)");
    train_cmd->add_option("--config", train.config_path, "JSON file of config overrides");
    train_cmd->add_option("--out", train.out_dir, "Run directory (default runs/<dataset>)");
    train_cmd->add_option("--log-every", train.log_every, "Print every Nth epoch; 0 = quiet");
    train_cmd->add_flag("--baseline", train.baseline, "Also train the plain two-layer GCN");
    train.flags.add_to(*train_cmd);

    auto add_source = [](CLI::App* cmd, EvalArgs& e) {
        cmd->add_option("--run", e.run_dir, "Run directory written by train")->required();
        cmd->add_option("--dataset", e.dataset, "Dataset override (default: the one trained on)");
        cmd->add_option("--data-dir", e.data_dir, "Dataset root for --dataset");
        cmd->add_option("--split-seed", e.split_seed, "Split seed override");
    };

    EvalArgs eval;
    CLI::App* eval_cmd = app.add_subcommand("eval", "Accuracy of a trained run per split");
    add_source(eval_cmd, eval);
    eval_cmd->add_flag("--json", eval.as_json, "Print one JSON object");

    ExportArgs exp;
    CLI::App* export_cmd = app.add_subcommand("export", "Write embeddings, predictions, graph or curves");
    export_cmd->add_option("what", exp.what, "embeddings | predictions | concept-graph | curves")
        ->required()
        ->check(CLI::IsMember({"embeddings", "predictions", "concept-graph", "curves"}));
    export_cmd->add_option("--out", exp.out_path, "Output file (curves: path stem)")->required();
    add_source(export_cmd, exp.source);

    StatsArgs stats;
    CLI::App* stats_cmd = app.add_subcommand("stats", "Dataset counts and class distribution");
    stats_cmd->add_option("--dataset", stats.dataset, "Dataset name or path")->required();
    stats_cmd->add_option("--data-dir", stats.data_dir, "Dataset root");
    stats_cmd->add_flag("--json", stats.as_json, "Print JSON");

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kExitOk : kExitUsage;
    }

    try {
        if (*train_cmd) return cmd_train(train, out);
        if (*eval_cmd) return cmd_eval(eval, out);
        if (*export_cmd) return cmd_export(exp, out);
        if (*stats_cmd) return cmd_stats(stats, out);
    } catch (const NumericError& e) {
        err << "error: " << e.what() << "\n";
        return kExitNumeric;
    } catch (const Error& e) {
        err << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const fs::filesystem_error& e) {
        err << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const std::exception& e) {
        err << "internal error: " << e.what() << "\n";
        return 1;
    }
    return kExitUsage;
}

}  // namespace conceptgcn::cli
