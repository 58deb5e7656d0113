#pragma once

// Differentiable building blocks: graph convolution, split (att-l / att-r)
// attention, the encoder, dropout and the classification loss.
//
// Every layer has two entry points: a tape form used for training, and a
// plain form over DenseMatrix that builds a throwaway tape internally.

#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "conceptgcn/graph_data.hpp"
#include "conceptgcn/tape.hpp"

namespace conceptgcn {

using Rng = std::mt19937_64;

enum class Activation { relu, leaky_relu, identity };
enum class Mode { train, eval };

// Uniform in +-sqrt(6 / (rows + cols)).
DenseMatrix glorot_uniform(std::size_t rows, std::size_t cols, Rng& rng);

struct ParamRef {
    std::string name;
    DenseMatrix* value;
};

struct GcnLayerParams {
    DenseMatrix weight;  // d_in x d_out
    DenseMatrix bias;    // 1 x d_out

    static GcnLayerParams init(std::size_t d_in, std::size_t d_out, Rng& rng);
    std::size_t in_dim() const noexcept { return weight.rows(); }
    std::size_t out_dim() const noexcept { return weight.cols(); }
};

struct AttentionParams {
    DenseMatrix weight;  // m x d_att
    DenseMatrix att_l;   // d_att x 1, scores the receiving node
    DenseMatrix att_r;   // d_att x 1, scores the neighbour
    double negative_slope = 0.2;

    static AttentionParams init(std::size_t m, std::size_t d_att, double negative_slope, Rng& rng);
    std::size_t out_dim() const noexcept { return weight.cols(); }
};

struct EncoderParams {
    DenseMatrix weight;  // d_att x z
    DenseMatrix bias;    // 1 x z

    static EncoderParams init(std::size_t d_att, std::size_t z, Rng& rng);
    std::size_t code_dim() const noexcept { return weight.cols(); }
};

struct GcnLayerNodes {
    NodeId weight, bias;
};
struct AttentionNodes {
    NodeId weight, att_l, att_r;
    double negative_slope;
};
struct EncoderNodes {
    NodeId weight, bias;
};

GcnLayerNodes bind(Tape& tape, const GcnLayerParams& p);
AttentionNodes bind(Tape& tape, const AttentionParams& p);
EncoderNodes bind(Tape& tape, const EncoderParams& p);

// One column block of a layer input: either a tape node or a constant sparse
// matrix (raw bag-of-words features stay sparse end to end).
struct InputBlock {
    std::optional<NodeId> dense;
    SharedSparse sparse;

    static InputBlock of(NodeId node) { return {node, nullptr}; }
    static InputBlock of(SharedSparse s) { return {std::nullopt, std::move(s)}; }
    std::size_t width(const Tape& tape) const;
};

// [B_0 | B_1 | ...] * W computed block by block against row slices of W.
NodeId project(Tape& tape, std::span<const InputBlock> blocks, NodeId weight);

NodeId apply_activation(Tape& tape, NodeId x, Activation act, double negative_slope);

// act(A_hat * (H * W) + b).
NodeId gcn_layer(Tape& tape, const SharedSparse& a_hat, std::span<const InputBlock> input,
                 const GcnLayerNodes& p, Activation act, double negative_slope = 0.2);
NodeId gcn_layer(Tape& tape, const SharedSparse& a_hat, NodeId h, const GcnLayerNodes& p,
                 Activation act, double negative_slope = 0.2);
DenseMatrix gcn_layer(const SparseMatrixCSR& a_hat, const DenseMatrix& h, const GcnLayerParams& p,
                      Activation act, double negative_slope = 0.2);

// Attention over the closed neighbourhood pattern `structure` (A + I):
// z = X W, e_ij = LeakyReLU(att_l . z_i + att_r . z_j), out_i = sum_j a_ij z_j.
NodeId attention_layer(Tape& tape, const SharedSparse& structure, const InputBlock& x,
                       const AttentionNodes& p);
DenseMatrix attention_layer(const AttributedGraph& g, const DenseMatrix& x,
                            const AttentionParams& p);

// code = relu(emb * W1 + b1).
NodeId encoder(Tape& tape, NodeId emb, const EncoderNodes& p);
DenseMatrix encoder(const DenseMatrix& emb, const EncoderParams& p);

// Entries are 0 with probability `rate`, else 1 / (1 - rate).
DenseMatrix dropout_mask(std::size_t rows, std::size_t cols, double rate, Rng& rng);
NodeId dropout(Tape& tape, NodeId h, double rate, Mode mode, Rng& rng);
DenseMatrix dropout(const DenseMatrix& h, double rate, Mode mode, Rng& rng);

NodeId softmax_cross_entropy(Tape& tape, NodeId logits, std::span<const int> labels,
                             const std::vector<bool>& mask);
double cross_entropy(const DenseMatrix& logits, std::span<const int> labels,
                     const std::vector<bool>& mask);

DenseMatrix row_softmax(const DenseMatrix& logits);

// Shared, immutable per-dataset operands for every model.
struct GraphContext {
    SharedSparse features;      // X as CSR (row-normalized when requested)
    SharedSparse propagation;   // D~^{-1/2} (A + I) D~^{-1/2}
    SharedSparse neighbourhood; // A + I pattern, attention structure
    DenseMatrix dense_features; // same values as `features`

    std::size_t node_count() const noexcept { return dense_features.rows(); }
    std::size_t feature_count() const noexcept { return dense_features.cols(); }

    static GraphContext build(const AttributedGraph& g, bool row_normalize_features);
};

}  // namespace conceptgcn
