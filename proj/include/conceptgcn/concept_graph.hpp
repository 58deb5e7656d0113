#pragma once

// Secondary graph over nodes, built from stage-1 soft predictions: each node
// links to its k nearest nodes in probability space with Gaussian weights.

#include <vector>

#include "conceptgcn/linalg.hpp"
#include "conceptgcn/stage1.hpp"

namespace conceptgcn {

struct ConceptParams {
    double sigma = 2.0;
    double ratio_node = 0.33;
    std::size_t graph_size = 40;
    bool include_original_edges = true;
    double alpha = 0.5;  // weight of the conceptual part when mixing

    // max(1, round(ratio_node * graph_size)).
    std::size_t neighbor_count() const;
    // Throws ConfigError.
    void validate() const;
};

struct ConceptualGraph {
    SparseMatrixCSR weights;     // kernel graph: symmetric, unit diagonal
    SparseMatrixCSR adjacency;   // weights, or the mix with the original graph
    SparseMatrixCSR normalized;  // symmetric renormalization of adjacency
};

// exp(-|a - b|^2 / (2 sigma^2)).
double kernel_weight(std::span<const double> a, std::span<const double> b, double sigma);

// For each row, the k other rows closest in Euclidean distance, nearest first;
// equal distances go to the lower index.
std::vector<std::vector<std::size_t>> nearest_neighbors(const DenseMatrix& points, std::size_t k);

ConceptualGraph build_conceptual_graph(const SoftPrediction& prediction,
                                       const ConceptParams& params,
                                       const SparseMatrixCSR* original = nullptr);

}  // namespace conceptgcn
