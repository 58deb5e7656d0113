#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "conceptgcn/concept_graph.hpp"
#include "conceptgcn/errors.hpp"
#include "conceptgcn/training.hpp"
#include "printers.hpp"
#include "synthetic.hpp"

using namespace conceptgcn;
using conceptgcn::testkit::random_matrix;

namespace {

SoftPrediction random_prediction(std::size_t n, std::size_t c, std::uint64_t seed) {
    return SoftPrediction(row_softmax(random_matrix(n, c, seed, -3.0, 3.0)));
}

// Exhaustive all-pairs ranking: full stable sort by distance over ascending
// indices, so equal distances keep the lower index first.
std::vector<std::vector<std::size_t>> all_pairs_knn(const DenseMatrix& p, std::size_t k) {
    const std::size_t n = p.rows();
    std::vector<std::vector<std::size_t>> out(n);
    for (std::size_t i = 0; i < n; ++i) {
        std::vector<double> dist(n);
        for (std::size_t j = 0; j < n; ++j) {
            double s = 0.0;
            for (std::size_t c = 0; c < p.cols(); ++c) s += (p(i, c) - p(j, c)) * (p(i, c) - p(j, c));
            dist[j] = s;
        }
        std::vector<std::size_t> order(n);
        std::iota(order.begin(), order.end(), 0);
        order.erase(order.begin() + static_cast<std::ptrdiff_t>(i));
        std::stable_sort(order.begin(), order.end(),
                         [&](std::size_t a, std::size_t b) { return dist[a] < dist[b]; });
        out[i].assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k));
    }
    return out;
}

ConceptParams params_with_k(std::size_t k, double sigma = 2.0) {
    ConceptParams p;
    p.sigma = sigma;
    p.ratio_node = 1.0;
    p.graph_size = k;
    p.include_original_edges = false;
    return p;
}

}  // namespace

TEST(Kernel, ZeroDistanceIsOne) {
    const std::vector<double> a{0.2, 0.3, 0.5};
    EXPECT_EQ(kernel_weight(a, a, 2.0), 1.0);
}

TEST(Kernel, ClosedForm) {
    const std::vector<double> a{2.0, 0.0}, b{0.0, -2.0};  // squared distance 8
    EXPECT_NEAR(kernel_weight(a, b, 2.0), std::exp(-1.0), 1e-15);
    EXPECT_NEAR(kernel_weight(a, b, 2.0), 0.367879, 1e-6);
}

TEST(Kernel, SymmetricExactly) {
    const DenseMatrix p = random_matrix(2, 7, 1);
    EXPECT_EQ(kernel_weight(p.row(0), p.row(1), 0.7), kernel_weight(p.row(1), p.row(0), 0.7));
}

TEST(Kernel, Errors) {
    const std::vector<double> a{1.0}, b{1.0, 2.0};
    EXPECT_THROW(kernel_weight(a, a, 0.0), ConfigError);
    EXPECT_THROW(kernel_weight(a, b, 1.0), DimensionError);
}

TEST(ConceptParams, CoraNeighbourCount) {
    EXPECT_EQ(TrainConfig::for_dataset("cora").concept_params().neighbor_count(), 13u);
    EXPECT_EQ(params_with_k(0).neighbor_count(), 1u);
}

TEST(ConceptParams, Validation) {
    ConceptParams p;
    p.sigma = 0.0;
    EXPECT_THROW(p.validate(), ConfigError);
    p = {};
    p.ratio_node = 1.5;
    EXPECT_THROW(p.validate(), ConfigError);
    p = {};
    p.alpha = -0.1;
    EXPECT_THROW(p.validate(), ConfigError);
}

TEST(ConceptGraph, ThreeNodeTieBreak) {
    const SoftPrediction p(DenseMatrix::from_rows({{1, 0}, {1, 0}, {0, 1}}));
    const double sigma = 1.5;
    const auto g = build_conceptual_graph(p, params_with_k(1, sigma));
    const DenseMatrix w = g.weights.to_dense();
    const double far = std::exp(-1.0 / (sigma * sigma));
    EXPECT_EQ(w, DenseMatrix::from_rows({{1, 1, far}, {1, 1, 0}, {far, 0, 1}}));
}

TEST(ConceptGraph, NeighboursMatchAllPairsOracle) {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        DenseMatrix p = random_prediction(150, 4, seed).probabilities();
        // Duplicate rows create exact ties.
        for (std::size_t i = 0; i < 10; ++i)
            std::copy(p.row(i).begin(), p.row(i).end(), p.row(140 + i).begin());
        for (std::size_t k : {1u, 5u, 13u}) {
            EXPECT_EQ(nearest_neighbors(p, k), all_pairs_knn(p, k)) << seed << " k=" << k;
        }
    }
}

TEST(ConceptGraph, EdgesAreNeighbourUnion) {
    const SoftPrediction p = random_prediction(80, 3, 7);
    const auto g = build_conceptual_graph(p, params_with_k(4));
    const auto knn = all_pairs_knn(p.probabilities(), 4);
    for (std::size_t i = 0; i < 80; ++i) {
        for (std::size_t j = 0; j < 80; ++j) {
            const bool linked = i == j ||
                                std::count(knn[i].begin(), knn[i].end(), j) > 0 ||
                                std::count(knn[j].begin(), knn[j].end(), i) > 0;
            EXPECT_EQ(g.weights.at(i, j) != 0.0, linked) << i << "," << j;
        }
    }
}

TEST(ConceptGraph, SymmetricUnitDiagonal) {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const auto g = build_conceptual_graph(random_prediction(60, 5, seed), params_with_k(6, 0.3));
        EXPECT_LE(asymmetry(g.weights), 1e-12);
        EXPECT_LE(asymmetry(g.normalized), 1e-12);
        for (std::size_t i = 0; i < 60; ++i) EXPECT_EQ(g.weights.at(i, i), 1.0);
        for (double v : g.weights.values()) {
            EXPECT_GT(v, 0.0);
            EXPECT_LE(v, 1.0);
        }
    }
}

TEST(ConceptGraph, LargerSigmaNeverLowersWeights) {
    const SoftPrediction p = random_prediction(70, 4, 11);
    const auto narrow = build_conceptual_graph(p, params_with_k(5, 0.2));
    const auto wide = build_conceptual_graph(p, params_with_k(5, 0.9));
    ASSERT_EQ(narrow.weights.col_idx().size(), wide.weights.col_idx().size());
    EXPECT_TRUE(std::equal(narrow.weights.col_idx().begin(), narrow.weights.col_idx().end(),
                           wide.weights.col_idx().begin()));
    for (std::size_t k = 0; k < narrow.weights.nnz(); ++k) {
        EXPECT_GE(wide.weights.values()[k], narrow.weights.values()[k]);
    }
}

TEST(ConceptGraph, RelabelingEquivariance) {
    const DenseMatrix p = random_prediction(50, 3, 13).probabilities();
    std::vector<std::size_t> perm(50);
    std::iota(perm.begin(), perm.end(), 0);
    std::mt19937_64 rng(14);
    std::shuffle(perm.begin(), perm.end(), rng);
    DenseMatrix q(50, 3);
    for (std::size_t i = 0; i < 50; ++i)
        std::copy(p.row(perm[i]).begin(), p.row(perm[i]).end(), q.row(i).begin());

    const auto a = build_conceptual_graph(SoftPrediction(p), params_with_k(4)).weights.to_dense();
    const auto b = build_conceptual_graph(SoftPrediction(q), params_with_k(4)).weights.to_dense();
    DenseMatrix back(50, 50);
    for (std::size_t i = 0; i < 50; ++i)
        for (std::size_t j = 0; j < 50; ++j) back(perm[i], perm[j]) = b(i, j);
    EXPECT_EQ(back, a);
}

TEST(ConceptGraph, MixingWithOriginalEdges) {
    const auto orig = testkit::random_graph(40, 2, 3, 0.1, 15);
    const SoftPrediction p = random_prediction(40, 3, 16);
    ConceptParams cp = params_with_k(3);
    cp.include_original_edges = true;
    cp.alpha = 0.5;
    const auto g = build_conceptual_graph(p, cp, &orig.adjacency);
    const auto expect = linear_combination(0.5, symmetric_normalize(g.weights), 0.5,
                                           normalize_adjacency(orig.adjacency));
    EXPECT_EQ(g.adjacency, expect);
    EXPECT_EQ(g.normalized, symmetric_normalize(expect));

    cp.alpha = 1.0;
    EXPECT_EQ(build_conceptual_graph(p, cp, &orig.adjacency).adjacency, g.weights);

    const auto small = testkit::random_graph(10, 2, 3, 0.3, 17);
    cp.alpha = 0.5;
    EXPECT_THROW(build_conceptual_graph(p, cp, &small.adjacency), DimensionError);
}

TEST(ConceptGraph, TooManyNeighbours) {
    EXPECT_THROW(build_conceptual_graph(random_prediction(5, 2, 18), params_with_k(5)), ConfigError);
}

TEST(SoftPrediction, RejectsNonDistributions) {
    EXPECT_THROW(SoftPrediction(DenseMatrix::from_rows({{0.5, 0.6}})), ContractError);
    EXPECT_THROW(SoftPrediction(DenseMatrix::from_rows({{1.5, -0.5}})), ContractError);
    EXPECT_NO_THROW(SoftPrediction(DenseMatrix::from_rows({{0.25, 0.75}})));
}
