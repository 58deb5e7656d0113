#pragma once

// Layout of a training run directory and reloading a finished run.

#include <filesystem>

#include <json.hpp>

#include "conceptgcn/training.hpp"
#include "datasets.hpp"

namespace conceptgcn::cli {

struct RunPaths {
    std::filesystem::path dir;

    std::filesystem::path manifest() const { return dir / "manifest.json"; }
    std::filesystem::path metrics() const { return dir / "metrics.csv"; }
    std::filesystem::path concept_graph() const { return dir / "concept_graph.json"; }
    std::filesystem::path bin(const char* stem) const { return dir / (std::string(stem) + ".bin"); }
    std::filesystem::path shapes(const char* stem) const {
        return dir / (std::string(stem) + ".json");
    }
};

// Stage-1 output that fed the conceptual graph; eval needs it when that
// pass ran with dropout.
inline constexpr const char* kStage1OutputStem = "stage1_output";

void save_run(const RunPaths& paths, const AttributedGraph& g, PipelineResult& result);

struct LoadedRun {
    nlohmann::json manifest;
    TrainConfig config;
    ResolvedDataset dataset;
    Stage1Model stage1;
    Stage2Model stage2;
    Stage1Output stage1_output;      // recomputed, or the stored one (see above)
    SparseMatrixCSR concept_normalized;
    DataSplit split;
};

// `dataset` and `split_seed` override what the manifest recorded. Missing or
// unreadable files raise ParseError.
LoadedRun load_run(const RunPaths& paths, const std::string& dataset,
                   const std::filesystem::path& data_dir, std::optional<std::uint64_t> split_seed);

// Stage-2 probabilities of a loaded run.
DenseMatrix run_probabilities(const LoadedRun& run);

}  // namespace conceptgcn::cli
