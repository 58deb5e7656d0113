#pragma once

// First stage: attention embedding, encoder, fusion with the raw features,
// and the first two-layer GCN. It emits high-level node features and a
// soft (row-stochastic) class distribution. No hard labels are produced
// here; argmax happens only after the second stage.

#include <vector>

#include "conceptgcn/layers.hpp"

namespace conceptgcn {

struct Stage1Dims {
    std::size_t features = 0;   // m
    std::size_t attention = 0;  // d_att
    std::size_t code = 0;       // z
    std::size_t hidden = 0;
    std::size_t classes = 0;

    std::size_t fused_width() const noexcept { return features + code + attention; }
};

struct Stage1Model {
    AttentionParams attention;
    EncoderParams encoder;
    GcnLayerParams gcn1_a;  // fused -> hidden
    GcnLayerParams gcn1_b;  // hidden -> hidden
    GcnLayerParams head1;   // hidden -> classes

    static Stage1Model init(const Stage1Dims& dims, double negative_slope, Rng& rng);
    Stage1Dims dims() const;
    // Throws DimensionError when the layer chain does not line up.
    void validate() const;
    std::vector<ParamRef> parameters();
};

struct Stage1Nodes {
    AttentionNodes attention;
    EncoderNodes encoder;
    GcnLayerNodes gcn1_a, gcn1_b, head1;

    // Same order as Stage1Model::parameters().
    std::vector<NodeId> all() const;
};

Stage1Nodes bind(Tape& tape, const Stage1Model& model);

// Row-stochastic n x c matrix; rows are checked to sum to 1 within 1e-9.
class SoftPrediction {
public:
    SoftPrediction() = default;
    explicit SoftPrediction(DenseMatrix probabilities);

    const DenseMatrix& probabilities() const noexcept { return probabilities_; }
    std::size_t node_count() const noexcept { return probabilities_.rows(); }
    std::size_t class_count() const noexcept { return probabilities_.cols(); }

private:
    DenseMatrix probabilities_;
};

struct Stage1Output {
    DenseMatrix high_level;     // n x hidden
    SoftPrediction prediction;  // n x c
};

struct Stage1Graph {
    NodeId embedding;
    NodeId code;
    NodeId high_level;
    NodeId logits;
    NodeId probabilities;
};

// [X | code | emb].
DenseMatrix fuse_inputs(const DenseMatrix& x, const DenseMatrix& code, const DenseMatrix& emb);

// The first GCN over already-fused input blocks.
Stage1Graph stage1_gcn(Tape& tape, const Stage1Nodes& nodes, const SharedSparse& a_hat,
                       std::span<const InputBlock> fused, double dropout_rate, Mode mode,
                       Rng& rng);

// Attention + encoder + fusion + first GCN on the tape, as trained.
Stage1Graph stage1_graph(Tape& tape, const Stage1Nodes& nodes, const GraphContext& ctx,
                         double dropout_rate, Mode mode, Rng& rng);

// First GCN on a given fused matrix (attention/encoder parameters unused).
Stage1Output stage1_forward(const Stage1Model& model, const SparseMatrixCSR& a_hat,
                            const DenseMatrix& fused, double dropout_rate, Mode mode, Rng& rng);

// Full first stage starting from raw features.
Stage1Output stage1_infer(const Stage1Model& model, const GraphContext& ctx, double dropout_rate,
                          Mode mode, Rng& rng);

}  // namespace conceptgcn
