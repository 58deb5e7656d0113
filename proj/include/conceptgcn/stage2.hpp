#pragma once

// Second stage: two GCN layers over the conceptual graph and the final
// softmax head. This is the only place hard labels come from.

#include <vector>

#include "conceptgcn/concept_graph.hpp"
#include "conceptgcn/layers.hpp"

namespace conceptgcn {

struct Stage2Dims {
    std::size_t features = 0;
    std::size_t high_level = 0;
    std::size_t classes = 0;
    std::size_t hidden = 0;

    std::size_t fused_width() const noexcept { return features + high_level + classes; }
};

struct Stage2Model {
    GcnLayerParams gcn2_a;  // m + hidden1 + c -> hidden
    GcnLayerParams gcn2_b;  // hidden -> hidden
    GcnLayerParams head2;   // hidden -> c
    double negative_slope = 0.2;

    static Stage2Model init(const Stage2Dims& dims, double negative_slope, Rng& rng);
    void validate() const;
    std::vector<ParamRef> parameters();
};

struct Stage2Nodes {
    GcnLayerNodes gcn2_a, gcn2_b, head2;
    double negative_slope = 0.2;

    std::vector<NodeId> all() const;
};

Stage2Nodes bind(Tape& tape, const Stage2Model& model);

struct Stage2Graph {
    NodeId logits;
    NodeId probabilities;
};

// [X | H_high | P].
DenseMatrix fuse_stage2(const DenseMatrix& x, const DenseMatrix& high_level,
                        const SoftPrediction& p);

Stage2Graph stage2_graph(Tape& tape, const Stage2Nodes& nodes, const SharedSparse& concept_norm,
                         std::span<const InputBlock> fused, double dropout_rate, Mode mode,
                         Rng& rng);

// n x c probabilities.
DenseMatrix stage2_forward(const Stage2Model& model, const ConceptualGraph& graph,
                           const DenseMatrix& fused, double dropout_rate, Mode mode, Rng& rng);

// Row-wise argmax, ties to the lowest class index.
std::vector<int> predict(const DenseMatrix& probs);

}  // namespace conceptgcn
