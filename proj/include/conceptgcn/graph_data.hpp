#pragma once

// Attributed graphs H = (V, E): binary symmetric adjacency, node feature
// matrix, class labels. Parsers for the LINQS text distributions and the
// neutral JSON layout, adjacency renormalization, and stratified splits.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "conceptgcn/linalg.hpp"

namespace conceptgcn {

struct AttributedGraph {
    std::string name;
    SparseMatrixCSR adjacency;  // n x n, binary, symmetric, zero diagonal
    DenseMatrix features;       // n x m
    std::vector<int> labels;    // class ids in [0, class_count)
    std::size_t class_count = 0;
    std::vector<std::string> node_names;
    std::vector<std::string> class_names;  // optional; empty when unknown

    std::size_t node_count() const noexcept { return labels.size(); }
    std::size_t feature_count() const noexcept { return features.cols(); }
    // Undirected edge count (each {i, j} once).
    std::size_t edge_count() const noexcept { return adjacency.nnz() / 2; }

    // Throws ContractError when an invariant is broken.
    void validate() const;
};

struct DatasetStats {
    std::size_t nodes = 0;
    std::size_t edges = 0;
    std::size_t features = 0;
    std::size_t classes = 0;
    bool operator==(const DatasetStats&) const = default;
};

DatasetStats stats_of(const AttributedGraph& g);
std::vector<std::size_t> class_histogram(const AttributedGraph& g);

// Counts of citation records that did not become edges.
struct IngestReport {
    std::size_t citation_records = 0;
    std::size_t dropped_unknown = 0;    // endpoint missing from the content file
    std::size_t dropped_self = 0;
    std::size_t duplicate_records = 0;  // same undirected pair seen before
};

// `content`: `<id> f1 .. fm <label>` per line (tab or space separated).
// `cites`:   `<cited> <citing>` per line. Direction is discarded.
// Node order follows the content file; class ids follow sorted label names.
AttributedGraph parse_linqs(std::istream& content, std::istream& cites,
                            IngestReport* report = nullptr, std::string name = {});

AttributedGraph load_linqs(const std::filesystem::path& content_path,
                           const std::filesystem::path& cites_path,
                           IngestReport* report = nullptr);

// The tab-separated PubMed release: a node table (`<id> label=<k>
// <word>=<tf-idf> ... summary=...` after two header lines declaring the
// numeric attributes) and a cites table (`<id> paper:<a> | paper:<b>`).
AttributedGraph parse_pubmed_tab(std::istream& nodes, std::istream& cites,
                                 IngestReport* report = nullptr, std::string name = {});
AttributedGraph load_pubmed_tab(const std::filesystem::path& node_path,
                                const std::filesystem::path& cites_path,
                                IngestReport* report = nullptr);

// Neutral JSON layout: name, num_nodes, num_features, num_classes, features,
// labels, edges (undirected pairs), optional node_names / edge_weights.
AttributedGraph load_json_graph(const std::filesystem::path& path,
                                IngestReport* report = nullptr);
AttributedGraph parse_json_graph(const std::string& text, IngestReport* report = nullptr);

// `weighted` replaces the graph's own edges and adds `edge_weights`, plus
// `self_weights` (one per node) when it has a nonzero diagonal.
std::string to_json_graph(const AttributedGraph& g, const SparseMatrixCSR* weighted = nullptr);
void save_json_graph(const AttributedGraph& g, const std::filesystem::path& path,
                     const SparseMatrixCSR* weighted = nullptr);
// Inverse of the weighted form above: the symmetric weight matrix.
SparseMatrixCSR parse_weighted_edges(const std::string& text);

// Builds the symmetric, zero-diagonal binary adjacency from undirected pairs.
// Self pairs and repeats are dropped and counted in `report`.
SparseMatrixCSR adjacency_from_pairs(std::size_t n,
                                     const std::vector<std::pair<std::size_t, std::size_t>>& pairs,
                                     IngestReport* report = nullptr);

// A + I with unit weights (the closed-neighbourhood pattern).
SparseMatrixCSR with_self_loops(const SparseMatrixCSR& adjacency);

// D~^{-1/2} (A + I) D~^{-1/2} with d~ = degree + 1.
SparseMatrixCSR normalize_adjacency(const AttributedGraph& g);
SparseMatrixCSR normalize_adjacency(const SparseMatrixCSR& adjacency);

struct DataSplit {
    std::vector<bool> train_mask;
    std::vector<bool> val_mask;
    std::vector<bool> test_mask;
};

std::vector<std::size_t> mask_indices(const std::vector<bool>& mask);
std::size_t mask_count(const std::vector<bool>& mask);

// Per-class stratified shuffle. Each class contributes round(ratio * size)
// nodes to train and val; the rest go to test.
DataSplit make_splits(const AttributedGraph& g, double train_ratio, double val_ratio,
                      std::uint64_t seed);

}  // namespace conceptgcn
