#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "conceptgcn/errors.hpp"
#include "conceptgcn/layers.hpp"
#include "conceptgcn/stage1.hpp"
#include "conceptgcn/training.hpp"
#include "printers.hpp"
#include "synthetic.hpp"

using namespace conceptgcn;
using conceptgcn::testkit::random_matrix;

namespace {

GcnLayerParams identity_layer(std::size_t d) { return {DenseMatrix::identity(d), DenseMatrix(1, d)}; }

}  // namespace

TEST(GcnLayer, IdentityPropagation) {
    const DenseMatrix h = random_matrix(5, 3, 1, 0.0, 2.0);
    const auto a_hat = SparseMatrixCSR::identity(5);
    EXPECT_EQ(gcn_layer(a_hat, h, identity_layer(3), Activation::relu), h);
}

TEST(GcnLayer, TwoNodePath) {
    const auto a_hat = normalize_adjacency(adjacency_from_pairs(2, {{0, 1}}));
    const DenseMatrix h = DenseMatrix::from_rows({{2, 0}, {0, 2}});
    EXPECT_EQ(gcn_layer(a_hat, h, identity_layer(2), Activation::identity),
              DenseMatrix::from_rows({{1, 1}, {1, 1}}));
}

TEST(GcnLayer, SparseAndDenseInputsAgree) {
    const auto g = testkit::random_graph(12, 7, 3, 0.3, 2);
    const auto a_hat = share(normalize_adjacency(g));
    Rng rng(3);
    const auto p = GcnLayerParams::init(7, 4, rng);
    Tape t;
    const GcnLayerNodes nodes{t.constant(p.weight), t.constant(random_matrix(1, 4, 4))};
    const InputBlock sparse = InputBlock::of(share(SparseMatrixCSR::from_dense(g.features)));
    const NodeId a = gcn_layer(t, a_hat, std::span<const InputBlock>(&sparse, 1), nodes,
                               Activation::leaky_relu);
    const NodeId b = gcn_layer(t, a_hat, t.constant(g.features), nodes, Activation::leaky_relu);
    EXPECT_EQ(t.value(a), t.value(b));
}

TEST(GcnLayer, BlockwiseEqualsConcatenated) {
    const auto g = testkit::random_graph(10, 6, 2, 0.3, 5);
    const auto a_hat = share(normalize_adjacency(g));
    const DenseMatrix extra = random_matrix(10, 3, 6);
    const DenseMatrix w = random_matrix(9, 4, 7), b = random_matrix(1, 4, 8);
    Tape t;
    const GcnLayerNodes nodes{t.constant(w), t.constant(b)};
    const std::array<InputBlock, 2> blocks{
        InputBlock::of(share(SparseMatrixCSR::from_dense(g.features))),
        InputBlock::of(t.constant(extra))};
    const NodeId split = gcn_layer(t, a_hat, blocks, nodes, Activation::identity);
    const DenseMatrix whole = gcn_layer(*a_hat, hconcat({&g.features, &extra}), {w, b},
                                        Activation::identity);
    EXPECT_LE(max_abs_diff(t.value(split), whole), 1e-12);
}

TEST(Attention, IsolatedNodeAttendsToItself) {
    AttributedGraph g = testkit::random_graph(4, 3, 2, 0.0, 9);
    Rng rng(10);
    const auto p = AttentionParams::init(3, 2, 0.2, rng);
    const DenseMatrix out = attention_layer(g, g.features, p);
    EXPECT_LE(max_abs_diff(out, matmul(g.features, p.weight)), 1e-15);
}

TEST(Attention, ZeroScoresAverageNeighbourhood) {
    const auto g = testkit::random_graph(9, 4, 2, 0.4, 11);
    Rng rng(12);
    auto p = AttentionParams::init(4, 3, 0.2, rng);
    p.att_l = DenseMatrix(3, 1);
    p.att_r = DenseMatrix(3, 1);
    const DenseMatrix out = attention_layer(g, g.features, p);
    const DenseMatrix z = matmul(g.features, p.weight);
    const auto closed = with_self_loops(g.adjacency);
    for (std::size_t i = 0; i < 9; ++i) {
        const auto cols = closed.row_cols(i);
        for (std::size_t j = 0; j < 3; ++j) {
            double mean = 0.0;
            for (std::size_t c : cols) mean += z(c, j);
            EXPECT_NEAR(out(i, j), mean / static_cast<double>(cols.size()), 1e-14);
        }
    }
}

TEST(Attention, EdgeOrderDoesNotMatter) {
    const auto g = testkit::random_graph(20, 5, 2, 0.2, 13);
    std::vector<std::pair<std::size_t, std::size_t>> pairs;
    for (std::size_t i = 0; i < 20; ++i)
        for (std::size_t j : g.adjacency.row_cols(i))
            if (i < j) pairs.emplace_back(j, i);
    std::mt19937_64 rng(14);
    std::shuffle(pairs.begin(), pairs.end(), rng);
    AttributedGraph h = g;
    h.adjacency = adjacency_from_pairs(20, pairs);
    Rng init(15);
    const auto p = AttentionParams::init(5, 4, 0.2, init);
    EXPECT_EQ(attention_layer(g, g.features, p), attention_layer(h, h.features, p));
}

TEST(Attention, CoefficientRowsSumToOne) {
    const auto g = testkit::random_graph(60, 8, 3, 0.08, 16);
    const auto closed = with_self_loops(g.adjacency);
    Rng rng(17);
    const auto p = AttentionParams::init(8, 4, 0.2, rng);
    const DenseMatrix z = matmul(g.features, p.weight);
    const auto alpha =
        attention_coefficients(closed, matmul(z, p.att_l), matmul(z, p.att_r), 0.2);
    const auto rp = closed.row_ptr();
    for (std::size_t i = 0; i < 60; ++i) {
        double s = 0.0;
        for (std::size_t k = rp[i]; k < rp[i + 1]; ++k) {
            EXPECT_GE(alpha[k], 0.0);
            s += alpha[k];
        }
        EXPECT_NEAR(s, 1.0, 1e-9);
    }
}

TEST(Attention, SlopeMustBePositive) {
    Rng rng(18);
    EXPECT_THROW(AttentionParams::init(3, 2, 0.0, rng), ConfigError);
}

TEST(Encoder, IdentityOnNonNegative) {
    const DenseMatrix emb = random_matrix(6, 4, 19, 0.0, 1.0);
    EXPECT_EQ(encoder(emb, {DenseMatrix::identity(4), DenseMatrix(1, 4)}), emb);
}

TEST(Encoder, CodeWidthFollowsHiddenSize) {
    const auto cfg = TrainConfig::for_dataset("cora");
    Rng rng(20);
    const auto m = Stage1Model::init({1433, cfg.hidden, cfg.hidden, cfg.hidden, 7}, 0.2, rng);
    EXPECT_EQ(m.encoder.code_dim(), 16u);
}

TEST(Dropout, ZeroRateIsIdentity) {
    const DenseMatrix h = random_matrix(4, 5, 21);
    Rng rng(22);
    EXPECT_EQ(dropout(h, 0.0, Mode::train, rng), h);
    EXPECT_EQ(dropout(h, 0.0, Mode::eval, rng), h);
}

TEST(Dropout, EvalIsIdentity) {
    const DenseMatrix h = random_matrix(4, 5, 23);
    Rng rng(24);
    EXPECT_EQ(dropout(h, 0.6, Mode::eval, rng), h);
}

TEST(Dropout, Statistics) {
    Rng rng(25);
    const DenseMatrix m = dropout_mask(1000, 100, 0.4, rng);
    std::size_t zeros = 0;
    double survivors = 0.0;
    for (double v : m.values()) {
        if (v == 0.0) {
            ++zeros;
        } else {
            survivors += v;
        }
    }
    const double zero_fraction = static_cast<double>(zeros) / 1e5;
    EXPECT_NEAR(zero_fraction, 0.4, 0.01);
    const double mean_scale = survivors / static_cast<double>(100000 - zeros);
    EXPECT_NEAR(mean_scale, 1.0 / 0.6, 0.02 / 0.6);
}

TEST(Dropout, RateOutOfRange) {
    Rng rng(26);
    EXPECT_THROW(dropout_mask(2, 2, 1.0, rng), ConfigError);
    EXPECT_THROW(dropout_mask(2, 2, -0.1, rng), ConfigError);
}

TEST(CrossEntropy, UniformLogits) {
    const std::vector<int> labels{0, 3, 6, 2};
    const std::vector<bool> mask(4, true);
    EXPECT_NEAR(cross_entropy(DenseMatrix(4, 7), labels, mask), std::log(7.0), 1e-15);
    EXPECT_NEAR(std::log(7.0), 1.9459, 1e-4);
}

TEST(CrossEntropy, ConfidentCorrectLogitsApproachZero) {
    const std::vector<int> labels{1, 0, 2};
    const std::vector<bool> mask(3, true);
    auto loss_at = [&](double scale) {
        DenseMatrix z(3, 3);
        for (std::size_t i = 0; i < 3; ++i) z(i, labels[i]) = scale;
        return cross_entropy(z, labels, mask);
    };
    const double l1 = loss_at(1), l10 = loss_at(10), l100 = loss_at(100);
    EXPECT_GT(l1, l10);
    EXPECT_GT(l10, l100);
    EXPECT_LT(l100, 1e-40);
}

TEST(CrossEntropy, MaskMustMatchLabels) {
    EXPECT_THROW(cross_entropy(DenseMatrix(2, 2), std::vector<int>{0, 1}, {true}), DimensionError);
}

TEST(Glorot, Bounds) {
    Rng rng(27);
    const DenseMatrix w = glorot_uniform(30, 20, rng);
    const double limit = std::sqrt(6.0 / 50.0);
    for (double v : w.values()) EXPECT_LE(std::abs(v), limit);
}
