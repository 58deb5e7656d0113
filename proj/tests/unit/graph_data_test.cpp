#include <gtest/gtest.h>

#include <Eigen/Dense>
#include <algorithm>
#include <filesystem>
#include <random>
#include <sstream>

#include "conceptgcn/errors.hpp"
#include "conceptgcn/graph_data.hpp"
#include "printers.hpp"
#include "synthetic.hpp"

using namespace conceptgcn;

namespace {

AttributedGraph parse(const std::string& content, const std::string& cites,
                      IngestReport* report = nullptr) {
    std::istringstream c(content), e(cites);
    return parse_linqs(c, e, report, "inline");
}

// Graph with only labels mattering; class sizes as in the Cora distribution.
AttributedGraph labelled(const std::vector<std::size_t>& sizes) {
    AttributedGraph g;
    for (std::size_t c = 0; c < sizes.size(); ++c)
        for (std::size_t i = 0; i < sizes[c]; ++i) g.labels.push_back(static_cast<int>(c));
    // Interleave classes so the split cannot rely on label order.
    std::mt19937_64 rng(3);
    std::shuffle(g.labels.begin(), g.labels.end(), rng);
    g.class_count = sizes.size();
    g.adjacency = SparseMatrixCSR(g.labels.size(), g.labels.size());
    g.features = DenseMatrix(g.labels.size(), 1);
    return g;
}

}  // namespace

TEST(Linqs, TwoNodeMutualCitation) {
    const auto g = parse("a\t1\t0\tx\nb\t0\t1\ty\n", "a\tb\nb\ta\n");
    EXPECT_EQ(g.adjacency.to_dense(), DenseMatrix::from_rows({{0, 1}, {1, 0}}));
    EXPECT_EQ(g.edge_count(), 1u);
    EXPECT_EQ(g.node_names, (std::vector<std::string>{"a", "b"}));
}

TEST(Linqs, DropsAndCountsBadCitations) {
    IngestReport r;
    const auto g = parse("p 1 0 0 B\nq 0 1 0 A\nr 0 0 1 B\n",
                         "p q\nq p\np p\np zz\nq r\nr q\nr p\n", &r);
    EXPECT_EQ(r.citation_records, 7u);
    EXPECT_EQ(r.duplicate_records, 2u);
    EXPECT_EQ(r.dropped_self, 1u);
    EXPECT_EQ(r.dropped_unknown, 1u);
    EXPECT_EQ(g.edge_count(), 3u);
    // Class ids follow sorted label names.
    EXPECT_EQ(g.labels, (std::vector<int>{1, 0, 1}));
    EXPECT_EQ(g.class_names, (std::vector<std::string>{"A", "B"}));
    EXPECT_NO_THROW(g.validate());
}

TEST(Linqs, MalformedInputThrows) {
    EXPECT_THROW(parse("a 1 0 x\nb 1 y\n", ""), ParseError);
    EXPECT_THROW(parse("a 1 x\na 0 y\n", ""), ParseError);
    EXPECT_THROW(parse("", ""), ParseError);
    EXPECT_THROW(parse("a 1 x\n", "a\n"), ParseError);
}

TEST(Linqs, AdjacencySymmetricZeroDiagonal) {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        std::mt19937_64 rng(seed);
        std::ostringstream content, cites;
        for (int i = 0; i < 30; ++i) content << "n" << i << " " << (rng() % 2) << " c" << (rng() % 3) << "\n";
        for (int e = 0; e < 80; ++e) cites << "n" << rng() % 32 << " n" << rng() % 30 << "\n";
        const auto g = parse(content.str(), cites.str());
        EXPECT_EQ(asymmetry(g.adjacency), 0.0);
        for (std::size_t i = 0; i < g.node_count(); ++i) EXPECT_EQ(g.adjacency.at(i, i), 0.0);
    }
}

TEST(PubmedTab, ParsesSparseAttributesAndCites) {
    std::istringstream nodes(
        "NODE\tpaper\n"
        "cat=1,2,3:label\tnumeric:w-a:0.0\tnumeric:w-b:0.0\tnumeric:w-c:0.0\n"
        "11\tlabel=2\tw-b=0.5\tsummary=w-b\n"
        "12\tlabel=1\tw-a=0.25\tw-c=0.125\tsummary=w-a,w-c\n"
        "13\tlabel=3\tsummary=\n");
    std::istringstream cites(
        "DIRECTED\tcites\n"
        "NO_FEATURES\n"
        "1\tpaper:11\t|\tpaper:12\n"
        "2\tpaper:12\t|\tpaper:11\n"
        "3\tpaper:13\t|\tpaper:13\n"
        "4\tpaper:13\t|\tpaper:99\n"
        "5\tpaper:12\t|\tpaper:13\n");
    IngestReport rep;
    const AttributedGraph g = parse_pubmed_tab(nodes, cites, &rep, "pubmed");
    EXPECT_EQ(stats_of(g), (DatasetStats{3, 2, 3, 3}));
    EXPECT_EQ(g.features, DenseMatrix::from_rows({{0, 0.5, 0}, {0.25, 0, 0.125}, {0, 0, 0}}));
    EXPECT_EQ(g.labels, (std::vector<int>{1, 0, 2}));
    EXPECT_EQ(g.node_names, (std::vector<std::string>{"11", "12", "13"}));
    EXPECT_EQ(rep.citation_records, 5u);
    EXPECT_EQ(rep.duplicate_records, 1u);
    EXPECT_EQ(rep.dropped_self, 1u);
    EXPECT_EQ(rep.dropped_unknown, 1u);
}

TEST(PubmedTab, RejectsUndeclaredAttributes) {
    std::istringstream nodes("NODE\tpaper\nnumeric:w-a:0.0\n1\tlabel=1\tw-z=1\n");
    std::istringstream cites("DIRECTED\tcites\nNO_FEATURES\n");
    EXPECT_THROW(parse_pubmed_tab(nodes, cites), ParseError);
}

TEST(JsonGraph, RoundTrip) {
    testkit::SyntheticSpec spec;
    spec.nodes = 120;
    const auto g = testkit::planted_partition(spec);
    const auto back = parse_json_graph(to_json_graph(g));
    EXPECT_EQ(back.adjacency, g.adjacency);
    EXPECT_EQ(back.features, g.features);
    EXPECT_EQ(back.labels, g.labels);
    EXPECT_EQ(back.class_count, g.class_count);
    EXPECT_EQ(back.node_names, g.node_names);
}

TEST(JsonGraph, FileRoundTrip) {
    const auto g = testkit::random_graph(15, 4, 3, 0.3, 5);
    const auto path = std::filesystem::temp_directory_path() / "conceptgcn_graph_rt.json";
    save_json_graph(g, path);
    const auto back = load_json_graph(path);
    std::filesystem::remove(path);
    EXPECT_EQ(back.adjacency, g.adjacency);
    EXPECT_EQ(back.features, g.features);
}

TEST(JsonGraph, SingleNode) {
    const auto g = parse_json_graph(
        R"({"name":"one","num_nodes":1,"num_features":2,"num_classes":1,
            "features":[[0.5,1]],"labels":[0],"edges":[]})");
    EXPECT_EQ(g.node_count(), 1u);
    EXPECT_EQ(g.adjacency.nnz(), 0u);
    EXPECT_NO_THROW(g.validate());
}

TEST(JsonGraph, SchemaViolations) {
    const std::string ok_head = R"("name":"t","num_nodes":2,"num_features":1,"num_classes":2,)";
    EXPECT_THROW(parse_json_graph("[1,2]"), SchemaError);
    EXPECT_THROW(parse_json_graph("{not json"), SchemaError);
    EXPECT_THROW(parse_json_graph("{" + ok_head + R"("features":[[1]],"labels":[0,1],"edges":[]})"),
                 SchemaError);
    EXPECT_THROW(parse_json_graph("{" + ok_head + R"("features":[[1],[0]],"labels":[0,2],"edges":[]})"),
                 SchemaError);
    EXPECT_THROW(parse_json_graph("{" + ok_head + R"("features":[[1],[0]],"labels":[0,1],"edges":[[0,5]]})"),
                 SchemaError);
}

TEST(JsonGraph, WeightedEdgesRoundTripWithDiagonal) {
    const AttributedGraph g = testkit::random_graph(7, 3, 2, 0.4, 5);
    std::vector<Triplet> t;
    for (std::size_t i = 0; i < 7; ++i) t.push_back({i, i, 0.25 + 0.1 * static_cast<double>(i)});
    t.push_back({0, 3, 1.0 / 3.0});
    t.push_back({3, 0, 1.0 / 3.0});
    t.push_back({2, 6, 0x1p-1070});
    t.push_back({6, 2, 0x1p-1070});
    const SparseMatrixCSR w = SparseMatrixCSR::from_triplets(7, 7, t);
    const std::string text = to_json_graph(g, &w);
    EXPECT_EQ(parse_weighted_edges(text), w);
    EXPECT_EQ(parse_json_graph(text).edge_count(), 2u);
}

TEST(JsonGraph, WeightedEdgesRequireAlignedWeights) {
    EXPECT_THROW(parse_weighted_edges(R"({"num_nodes": 2, "edges": [[0, 1]]})"), SchemaError);
    EXPECT_THROW(parse_weighted_edges(
                     R"({"num_nodes": 2, "edges": [[0, 1]], "edge_weights": [1, 2]})"),
                 SchemaError);
    EXPECT_THROW(parse_weighted_edges(
                     R"({"num_nodes": 2, "edges": [[0, 1]], "edge_weights": [1], "self_weights": [1]})"),
                 SchemaError);
}

TEST(Normalize, IsolatedNode) {
    EXPECT_EQ(normalize_adjacency(SparseMatrixCSR(1, 1)).to_dense(), DenseMatrix::from_rows({{1.0}}));
}

TEST(Normalize, TwoNodePath) {
    const auto a = adjacency_from_pairs(2, {{0, 1}});
    EXPECT_EQ(normalize_adjacency(a).to_dense(), DenseMatrix::from_rows({{0.5, 0.5}, {0.5, 0.5}}));
}

TEST(Normalize, SpectralRadiusAtMostOne) {
    for (std::uint64_t seed = 0; seed < 12; ++seed) {
        const std::size_t n = 10 + seed * 15;
        const auto g = testkit::random_graph(n, 1, 2, 3.0 / static_cast<double>(n), seed);
        const DenseMatrix a = normalize_adjacency(g).to_dense();
        Eigen::MatrixXd m(n, n);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j) m(i, j) = a(i, j);
        const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(m, Eigen::EigenvaluesOnly);
        EXPECT_LE(eig.eigenvalues().cwiseAbs().maxCoeff(), 1.0 + 1e-9) << "n=" << n;
    }
}

TEST(Splits, CoraSizedCounts) {
    const auto g = labelled({818, 180, 217, 426, 351, 418, 298});
    const auto s = make_splits(g, 0.6, 0.2, 1);
    EXPECT_NEAR(static_cast<double>(mask_count(s.train_mask)), 1625.0, 7.0);
    EXPECT_NEAR(static_cast<double>(mask_count(s.val_mask)), 541.0, 7.0);
    EXPECT_NEAR(static_cast<double>(mask_count(s.test_mask)), 542.0, 7.0);
}

TEST(Splits, DisjointCoveringStratified) {
    const std::vector<std::size_t> sizes{37, 5, 61, 12, 3};
    const auto g = labelled(sizes);
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const auto s = make_splits(g, 0.6, 0.2, seed);
        std::vector<std::size_t> per_class(sizes.size(), 0);
        for (std::size_t i = 0; i < g.node_count(); ++i) {
            EXPECT_EQ(s.train_mask[i] + s.val_mask[i] + s.test_mask[i], 1) << i;
            if (s.train_mask[i]) ++per_class[g.labels[i]];
        }
        for (std::size_t c = 0; c < sizes.size(); ++c) {
            EXPECT_GE(per_class[c], 1u);
            EXPECT_LE(std::abs(static_cast<double>(per_class[c]) - 0.6 * sizes[c]), 1.0);
        }
    }
}

TEST(Splits, SeedDeterminesMasks) {
    const auto g = labelled({40, 30, 20});
    const auto a = make_splits(g, 0.6, 0.2, 9), b = make_splits(g, 0.6, 0.2, 9);
    EXPECT_EQ(a.train_mask, b.train_mask);
    EXPECT_EQ(a.val_mask, b.val_mask);
    EXPECT_NE(a.train_mask, make_splits(g, 0.6, 0.2, 10).train_mask);
}

TEST(Splits, RatioPrecondition) {
    const auto g = labelled({10, 10});
    EXPECT_THROW(make_splits(g, 0.8, 0.2, 1), ContractError);
    EXPECT_THROW(make_splits(g, 0.0, 0.2, 1), ContractError);
}
