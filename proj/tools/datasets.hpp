#pragma once

// Locating a dataset from a command-line name or path.

#include <filesystem>
#include <string>
#include <vector>

#include "conceptgcn/errors.hpp"
#include "conceptgcn/graph_data.hpp"

namespace conceptgcn::cli {

class DatasetNotFound : public ConfigError {
public:
    using ConfigError::ConfigError;
};

struct ResolvedDataset {
    AttributedGraph graph;
    IngestReport ingest;
    std::string format;                        // "json", "linqs" or "pubmed-tab"
    std::vector<std::filesystem::path> files;  // json: one file; otherwise nodes, cites
};

// $CONCEPTGCN_DATA_DIR, else ./data.
std::filesystem::path default_data_dir();

// A path to a .json file is loaded directly. A name is looked up under
// `data_dir` as <name>.json, <name>/<name>.json, <name>/<name>.content
// (+ .cites), <name>.content (+ .cites), then the PubMed tab tables in
// <name>/ or <name>/data/ (for "pubmed" also Pubmed-Diabetes/[data/]).
ResolvedDataset resolve_dataset(const std::string& name_or_path,
                                const std::filesystem::path& data_dir);

ResolvedDataset load_dataset_files(const std::string& format,
                                   const std::vector<std::filesystem::path>& files);

}  // namespace conceptgcn::cli
