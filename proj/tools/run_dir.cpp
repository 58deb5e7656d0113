#include "run_dir.hpp"

#include <fstream>
#include <sstream>

#include "conceptgcn/persistence.hpp"

namespace conceptgcn::cli {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError("cannot read " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void load_into(const RunPaths& paths, const char* stem, const std::vector<ParamRef>& params) {
    assign_parameters(load_parameters(paths.bin(stem), paths.shapes(stem)), params);
}

}  // namespace

void save_run(const RunPaths& paths, const AttributedGraph& g, PipelineResult& result) {
    result.log.write_csv(paths.metrics());
    save_parameters(result.stage1.parameters(), paths.bin("stage1"), paths.shapes("stage1"));
    save_parameters(result.stage2.parameters(), paths.bin("stage2"), paths.shapes("stage2"));
    DenseMatrix high = result.stage1_output.high_level;
    DenseMatrix probs = result.stage1_output.prediction.probabilities();
    save_parameters({{"high_level", &high}, {"probabilities", &probs}},
                    paths.bin(kStage1OutputStem), paths.shapes(kStage1OutputStem));
    save_json_graph(g, paths.concept_graph(), &result.conceptual.adjacency);
}

LoadedRun load_run(const RunPaths& paths, const std::string& dataset, const fs::path& data_dir,
                   std::optional<std::uint64_t> split_seed) {
    LoadedRun run;
    try {
        run.manifest = json::parse(read_file(paths.manifest()));
        run.config = overlay_config(TrainConfig{}, run.manifest.at("config").dump());
        if (split_seed) run.config.split_seed = *split_seed;

        const json& ds = run.manifest.at("dataset");
        if (!dataset.empty()) {
            run.dataset = resolve_dataset(dataset, data_dir);
        } else {
            std::vector<fs::path> files;
            for (const auto& f : ds.at("files")) files.emplace_back(f.get<std::string>());
            run.dataset = load_dataset_files(ds.at("format").get<std::string>(), files);
        }
        const AttributedGraph& g = run.dataset.graph;
        const json& st = ds.at("stats");
        if (st.at("nodes").get<std::size_t>() != g.node_count() ||
            st.at("features").get<std::size_t>() != g.feature_count() ||
            st.at("classes").get<std::size_t>() != g.class_count) {
            throw ConfigError("eval: dataset shape differs from the one this run was trained on");
        }
    } catch (const json::exception& e) {
        throw ParseError("manifest " + paths.manifest().string() + ": " + e.what());
    }

    const TrainConfig& cfg = run.config;
    const AttributedGraph& g = run.dataset.graph;
    Rng rng(0);
    run.stage1 = Stage1Model::init({g.feature_count(), cfg.hidden, cfg.hidden, cfg.hidden,
                                    g.class_count},
                                   cfg.negative_slope, rng);
    run.stage2 = Stage2Model::init({g.feature_count(), cfg.hidden, g.class_count, cfg.hidden},
                                   cfg.negative_slope, rng);
    load_into(paths, "stage1", run.stage1.parameters());
    load_into(paths, "stage2", run.stage2.parameters());

    const GraphContext ctx = GraphContext::build(g, cfg.row_normalize_features);
    if (cfg.stochastic_concept_pass && !cfg.joint_finetune) {
        DenseMatrix high(g.node_count(), cfg.hidden), probs(g.node_count(), g.class_count);
        load_into(paths, kStage1OutputStem, {{"high_level", &high}, {"probabilities", &probs}});
        run.stage1_output = {std::move(high), SoftPrediction(std::move(probs))};
    } else {
        run.stage1_output = pipeline_stage1(run.stage1, ctx);
    }

    const SparseMatrixCSR adjacency = parse_weighted_edges(read_file(paths.concept_graph()));
    if (adjacency.rows() != g.node_count()) {
        throw ConfigError("eval: conceptual graph has " + std::to_string(adjacency.rows()) +
                          " nodes, dataset has " + std::to_string(g.node_count()));
    }
    run.concept_normalized = symmetric_normalize(adjacency);
    run.split = make_splits(g, cfg.train_ratio, cfg.val_ratio, cfg.split_seed);
    return run;
}

DenseMatrix run_probabilities(const LoadedRun& run) {
    const GraphContext ctx =
        GraphContext::build(run.dataset.graph, run.config.row_normalize_features);
    return pipeline_stage2(run.stage2, run.concept_normalized, ctx, run.stage1_output);
}

}  // namespace conceptgcn::cli
