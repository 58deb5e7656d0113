#pragma once

// Reverse-mode differentiation over 2-D matrices.
//
// A Tape is an append-only list of nodes; each op appends one node whose
// parents already exist, so the list is topologically ordered by
// construction. backward() walks it once in reverse.
//
// Sparse operands (adjacency, bag-of-words features) enter as shared
// constants and are never differentiated.

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <vector>

#include "conceptgcn/linalg.hpp"

namespace conceptgcn {

struct NodeId {
    std::size_t index = 0;
    bool operator==(const NodeId&) const = default;
};

enum class OpTag {
    constant,
    parameter,
    matmul,
    spmm,
    add,
    add_row,
    scale,
    hadamard,
    sum,
    slice_rows,
    concat_cols,
    relu,
    leaky_relu,
    mask_multiply,
    row_softmax,
    softmax_cross_entropy,
    graph_attention,
};

class Tape;

struct DiffNode {
    OpTag op = OpTag::constant;
    std::vector<std::size_t> parents;
    DenseMatrix value;
    DenseMatrix grad;  // empty until backward reaches the node
    bool requires_grad = false;
    std::function<void(Tape&, std::size_t)> backward_fn;
};

using SharedSparse = std::shared_ptr<const SparseMatrixCSR>;

inline SharedSparse share(SparseMatrixCSR m) {
    return std::make_shared<const SparseMatrixCSR>(std::move(m));
}

class Tape {
public:
    NodeId constant(DenseMatrix value);
    NodeId parameter(DenseMatrix value);

    const DenseMatrix& value(NodeId id) const { return nodes_.at(id.index).value; }
    // Valid after backward(); parameters the loss does not reach hold zeros.
    const DenseMatrix& grad(NodeId id) const;
    const DiffNode& node(NodeId id) const { return nodes_.at(id.index); }
    std::size_t size() const noexcept { return nodes_.size(); }

    // Requires a 1x1 loss. May be called once per tape.
    void backward(NodeId loss);

    NodeId matmul(NodeId a, NodeId b);
    NodeId spmm(SharedSparse s, NodeId d);
    NodeId add(NodeId a, NodeId b);
    // m (n x d) plus a 1 x d row broadcast over every row.
    NodeId add_row(NodeId m, NodeId row);
    NodeId scale(NodeId a, double factor);
    NodeId hadamard(NodeId a, NodeId b);
    NodeId sum(NodeId a);
    NodeId slice_rows(NodeId a, std::size_t begin, std::size_t end);
    NodeId concat_cols(std::span<const NodeId> parts);
    NodeId relu(NodeId a);
    // Slope `negative_slope` for x <= 0, including the kink itself.
    NodeId leaky_relu(NodeId a, double negative_slope);
    // Elementwise product with a constant (dropout masks).
    NodeId mask_multiply(NodeId a, DenseMatrix mask);
    NodeId row_softmax(NodeId a);
    // Mean over `rows` of -log softmax(logits_r)[labels[r]].
    NodeId softmax_cross_entropy(NodeId logits, std::span<const int> labels,
                                 std::span<const std::size_t> rows);

    // Additive split attention over the stored pattern of `structure`:
    //   e_ij   = LeakyReLU(score_l[i] + score_r[j])      for (i, j) in structure
    //   a_ij   = softmax_j(e_ij) within row i
    //   out_i  = sum_j a_ij * z_j
    // score_l and score_r are n x 1. Rows with no stored entries output zero.
    NodeId graph_attention(SharedSparse structure, NodeId z, NodeId score_l, NodeId score_r,
                           double negative_slope);

private:
    NodeId push(OpTag op, std::vector<std::size_t> parents, DenseMatrix value,
                std::function<void(Tape&, std::size_t)> backward_fn);
    DenseMatrix& grad_slot(std::size_t index);
    bool needs(std::size_t index) const { return nodes_[index].requires_grad; }

    std::vector<DiffNode> nodes_;
    bool backward_done_ = false;
};

// Attention coefficients (one value per stored entry of `structure`, CSR
// order) for the given scores. Exposed for normalization checks.
std::vector<double> attention_coefficients(const SparseMatrixCSR& structure,
                                           const DenseMatrix& score_l,
                                           const DenseMatrix& score_r, double negative_slope);

}  // namespace conceptgcn
