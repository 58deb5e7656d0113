#include "conceptgcn/layers.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>

#include "conceptgcn/errors.hpp"

namespace conceptgcn {

DenseMatrix glorot_uniform(std::size_t rows, std::size_t cols, Rng& rng) {
    const double limit = std::sqrt(6.0 / static_cast<double>(rows + cols));
    std::uniform_real_distribution<double> dist(-limit, limit);
    DenseMatrix m(rows, cols);
    for (double& v : m.values()) v = dist(rng);
    return m;
}

GcnLayerParams GcnLayerParams::init(std::size_t d_in, std::size_t d_out, Rng& rng) {
    return {glorot_uniform(d_in, d_out, rng), DenseMatrix(1, d_out)};
}

AttentionParams AttentionParams::init(std::size_t m, std::size_t d_att, double negative_slope,
                                      Rng& rng) {
    if (!(negative_slope > 0.0)) throw ConfigError("attention: negative_slope must be > 0");
    AttentionParams p;
    p.weight = glorot_uniform(m, d_att, rng);
    p.att_l = glorot_uniform(d_att, 1, rng);
    p.att_r = glorot_uniform(d_att, 1, rng);
    p.negative_slope = negative_slope;
    return p;
}

EncoderParams EncoderParams::init(std::size_t d_att, std::size_t z, Rng& rng) {
    if (z == 0) throw ConfigError("encoder: code dimension must be > 0");
    return {glorot_uniform(d_att, z, rng), DenseMatrix(1, z)};
}

GcnLayerNodes bind(Tape& tape, const GcnLayerParams& p) {
    return {tape.parameter(p.weight), tape.parameter(p.bias)};
}

AttentionNodes bind(Tape& tape, const AttentionParams& p) {
    return {tape.parameter(p.weight), tape.parameter(p.att_l), tape.parameter(p.att_r),
            p.negative_slope};
}

EncoderNodes bind(Tape& tape, const EncoderParams& p) {
    return {tape.parameter(p.weight), tape.parameter(p.bias)};
}

std::size_t InputBlock::width(const Tape& tape) const {
    if (dense) return tape.value(*dense).cols();
    if (!sparse) throw ContractError("input block holds neither a node nor a sparse matrix");
    return sparse->cols();
}

NodeId project(Tape& tape, std::span<const InputBlock> blocks, NodeId weight) {
    if (blocks.empty()) throw ContractError("project: no input blocks");
    std::size_t total = 0;
    for (const auto& b : blocks) total += b.width(tape);
    const DenseMatrix& w = tape.value(weight);
    if (total != w.rows()) {
        throw DimensionError("project: input width " + std::to_string(total) +
                             " does not match weight " + shape_of(w));
    }
    std::optional<NodeId> acc;
    std::size_t offset = 0;
    for (const auto& b : blocks) {
        const std::size_t width = b.width(tape);
        if (width == 0) continue;
        NodeId slice = blocks.size() == 1 ? weight : tape.slice_rows(weight, offset, offset + width);
        NodeId part = b.dense ? tape.matmul(*b.dense, slice) : tape.spmm(b.sparse, slice);
        acc = acc ? tape.add(*acc, part) : part;
        offset += width;
    }
    if (!acc) throw DimensionError("project: all input blocks have zero width");
    return *acc;
}

NodeId apply_activation(Tape& tape, NodeId x, Activation act, double negative_slope) {
    switch (act) {
        case Activation::relu:
            return tape.relu(x);
        case Activation::leaky_relu:
            return tape.leaky_relu(x, negative_slope);
        case Activation::identity:
            return x;
    }
    return x;
}

NodeId gcn_layer(Tape& tape, const SharedSparse& a_hat, std::span<const InputBlock> input,
                 const GcnLayerNodes& p, Activation act, double negative_slope) {
    if (!a_hat) throw ContractError("gcn_layer: null propagation matrix");
    const NodeId hw = project(tape, input, p.weight);
    if (a_hat->cols() != tape.value(hw).rows()) {
        throw DimensionError("gcn_layer: propagation " + shape_of(*a_hat) + " vs input rows " +
                             std::to_string(tape.value(hw).rows()));
    }
    const NodeId propagated = tape.add_row(tape.spmm(a_hat, hw), p.bias);
    return apply_activation(tape, propagated, act, negative_slope);
}

NodeId gcn_layer(Tape& tape, const SharedSparse& a_hat, NodeId h, const GcnLayerNodes& p,
                 Activation act, double negative_slope) {
    const InputBlock block = InputBlock::of(h);
    return gcn_layer(tape, a_hat, std::span<const InputBlock>(&block, 1), p, act, negative_slope);
}

DenseMatrix gcn_layer(const SparseMatrixCSR& a_hat, const DenseMatrix& h, const GcnLayerParams& p,
                      Activation act, double negative_slope) {
    Tape tape;
    const NodeId out = gcn_layer(tape, share(a_hat), tape.constant(h),
                                 {tape.constant(p.weight), tape.constant(p.bias)}, act,
                                 negative_slope);
    return tape.value(out);
}

NodeId attention_layer(Tape& tape, const SharedSparse& structure, const InputBlock& x,
                       const AttentionNodes& p) {
    const NodeId z = project(tape, std::span<const InputBlock>(&x, 1), p.weight);
    const NodeId score_l = tape.matmul(z, p.att_l);
    const NodeId score_r = tape.matmul(z, p.att_r);
    return tape.graph_attention(structure, z, score_l, score_r, p.negative_slope);
}

DenseMatrix attention_layer(const AttributedGraph& g, const DenseMatrix& x,
                            const AttentionParams& p) {
    if (x.rows() != g.node_count()) {
        throw DimensionError("attention_layer: features " + shape_of(x) + " for " +
                             std::to_string(g.node_count()) + " nodes");
    }
    Tape tape;
    const AttentionNodes nodes{tape.constant(p.weight), tape.constant(p.att_l),
                               tape.constant(p.att_r), p.negative_slope};
    const NodeId out = attention_layer(tape, share(with_self_loops(g.adjacency)),
                                       InputBlock::of(tape.constant(x)), nodes);
    return tape.value(out);
}

NodeId encoder(Tape& tape, NodeId emb, const EncoderNodes& p) {
    return tape.relu(tape.add_row(tape.matmul(emb, p.weight), p.bias));
}

DenseMatrix encoder(const DenseMatrix& emb, const EncoderParams& p) {
    Tape tape;
    const NodeId out =
        encoder(tape, tape.constant(emb), {tape.constant(p.weight), tape.constant(p.bias)});
    return tape.value(out);
}

namespace {

void check_rate(double rate) {
    if (!(rate >= 0.0 && rate < 1.0)) {
        throw ConfigError("dropout: rate " + std::to_string(rate) + " outside [0,1)");
    }
}

}  // namespace

DenseMatrix dropout_mask(std::size_t rows, std::size_t cols, double rate, Rng& rng) {
    check_rate(rate);
    DenseMatrix mask(rows, cols);
    const double keep = 1.0 / (1.0 - rate);
    // Each 64-bit draw is split into four 16-bit uniforms.
    const double threshold = rate * 65536.0;
    auto values = mask.values();
    for (std::size_t i = 0; i < values.size(); i += 4) {
        std::uint64_t bits = rng();
        for (std::size_t t = i; t < std::min(i + 4, values.size()); ++t, bits >>= 16) {
            const auto u = static_cast<double>(bits & 0xFFFFu);
            values[t] = static_cast<double>(u >= threshold) * keep;
        }
    }
    return mask;
}

NodeId dropout(Tape& tape, NodeId h, double rate, Mode mode, Rng& rng) {
    check_rate(rate);
    if (mode == Mode::eval || rate == 0.0) return h;
    const DenseMatrix& v = tape.value(h);
    return tape.mask_multiply(h, dropout_mask(v.rows(), v.cols(), rate, rng));
}

DenseMatrix dropout(const DenseMatrix& h, double rate, Mode mode, Rng& rng) {
    check_rate(rate);
    if (mode == Mode::eval || rate == 0.0) return h;
    const DenseMatrix mask = dropout_mask(h.rows(), h.cols(), rate, rng);
    DenseMatrix out = h;
    for (std::size_t i = 0; i < out.size(); ++i) out.values()[i] *= mask.values()[i];
    return out;
}

NodeId softmax_cross_entropy(Tape& tape, NodeId logits, std::span<const int> labels,
                             const std::vector<bool>& mask) {
    if (mask.size() != labels.size()) {
        throw DimensionError("softmax_cross_entropy: mask length " + std::to_string(mask.size()) +
                             " vs " + std::to_string(labels.size()) + " labels");
    }
    const auto rows = mask_indices(mask);
    return tape.softmax_cross_entropy(logits, labels, rows);
}

double cross_entropy(const DenseMatrix& logits, std::span<const int> labels,
                     const std::vector<bool>& mask) {
    Tape tape;
    const NodeId loss = softmax_cross_entropy(tape, tape.constant(logits), labels, mask);
    return tape.value(loss)(0, 0);
}

DenseMatrix row_softmax(const DenseMatrix& logits) {
    Tape tape;
    return tape.value(tape.row_softmax(tape.constant(logits)));
}

GraphContext GraphContext::build(const AttributedGraph& g, bool row_normalize_features) {
    GraphContext ctx;
    ctx.dense_features = row_normalize_features ? row_normalize(g.features) : g.features;
    ctx.features = share(SparseMatrixCSR::from_dense(ctx.dense_features));
    ctx.propagation = share(normalize_adjacency(g));
    ctx.neighbourhood = share(with_self_loops(g.adjacency));
    return ctx;
}

}  // namespace conceptgcn
