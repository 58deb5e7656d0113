#include "conceptgcn/concept_graph.hpp"

#include <algorithm>
#include <cfloat>
#include <cmath>
#include <numeric>
#include <utility>

#include "conceptgcn/errors.hpp"
#include "conceptgcn/graph_data.hpp"

namespace conceptgcn {

std::size_t ConceptParams::neighbor_count() const {
    const double k = std::round(ratio_node * static_cast<double>(graph_size));
    return std::max<std::size_t>(1, static_cast<std::size_t>(std::max(k, 0.0)));
}

void ConceptParams::validate() const {
    if (!(sigma > 0.0)) throw ConfigError("concept graph: sigma must be > 0");
    if (!(ratio_node > 0.0 && ratio_node <= 1.0)) {
        throw ConfigError("concept graph: ratio_node must lie in (0,1]");
    }
    if (graph_size == 0) throw ConfigError("concept graph: graph_size must be positive");
    if (!(alpha >= 0.0 && alpha <= 1.0)) throw ConfigError("concept graph: alpha outside [0,1]");
}

namespace {

double squared_distance(std::span<const double> a, std::span<const double> b) {
    double d2 = 0.0;
    for (std::size_t t = 0; t < a.size(); ++t) {
        const double d = a[t] - b[t];
        d2 += d * d;
    }
    return d2;
}

}  // namespace

double kernel_weight(std::span<const double> a, std::span<const double> b, double sigma) {
    if (!(sigma > 0.0)) throw ConfigError("kernel_weight: sigma must be > 0");
    if (a.size() != b.size()) {
        throw DimensionError("kernel_weight: vectors of length " + std::to_string(a.size()) +
                             " and " + std::to_string(b.size()));
    }
    return std::exp(-squared_distance(a, b) / (2.0 * sigma * sigma));
}

std::vector<std::vector<std::size_t>> nearest_neighbors(const DenseMatrix& points, std::size_t k) {
    const std::size_t n = points.rows();
    if (k >= n) {
        throw ConfigError("nearest_neighbors: k = " + std::to_string(k) + " needs more than " +
                          std::to_string(n) + " nodes");
    }
    std::vector<std::vector<std::size_t>> result(n);
    std::vector<std::pair<double, std::size_t>> cand;
    cand.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        cand.clear();
        for (std::size_t j = 0; j < n; ++j) {
            if (j != i) cand.emplace_back(squared_distance(points.row(i), points.row(j)), j);
        }
        // pair ordering: distance first, then index.
        std::partial_sort(cand.begin(), cand.begin() + static_cast<std::ptrdiff_t>(k), cand.end());
        result[i].reserve(k);
        for (std::size_t t = 0; t < k; ++t) result[i].push_back(cand[t].second);
    }
    return result;
}

ConceptualGraph build_conceptual_graph(const SoftPrediction& prediction,
                                       const ConceptParams& params,
                                       const SparseMatrixCSR* original) {
    params.validate();
    const DenseMatrix& p = prediction.probabilities();
    const std::size_t n = p.rows();
    const std::size_t k = params.neighbor_count();
    if (k >= n) {
        throw ConfigError("conceptual graph: k = " + std::to_string(k) +
                          " would connect every node (n = " + std::to_string(n) + ")");
    }
    const auto neighbours = nearest_neighbors(p, k);

    std::vector<Triplet> trip;
    trip.reserve(n * (2 * k + 1));
    for (std::size_t i = 0; i < n; ++i) {
        trip.push_back({i, i, 1.0});
        for (std::size_t j : neighbours[i]) {
            // Keep far pairs as edges even if the kernel underflows.
            const double w = std::max(kernel_weight(p.row(i), p.row(j), params.sigma), DBL_MIN);
            trip.push_back({i, j, w});
            trip.push_back({j, i, w});
        }
    }
    ConceptualGraph out;
    out.weights = SparseMatrixCSR::from_triplets(n, n, std::move(trip),
                                                 SparseMatrixCSR::Duplicates::max);

    if (params.include_original_edges && original != nullptr && params.alpha < 1.0) {
        if (original->rows() != n || original->cols() != n) {
            throw DimensionError("conceptual graph: original adjacency " + shape_of(*original) +
                                 " for " + std::to_string(n) + " nodes");
        }
        out.adjacency = linear_combination(params.alpha, symmetric_normalize(out.weights),
                                           1.0 - params.alpha, normalize_adjacency(*original));
    } else {
        out.adjacency = out.weights;
    }
    out.normalized = symmetric_normalize(out.adjacency);
    return out;
}

}  // namespace conceptgcn
