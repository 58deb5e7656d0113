#include "conceptgcn/stage2.hpp"

#include "conceptgcn/errors.hpp"

namespace conceptgcn {

Stage2Model Stage2Model::init(const Stage2Dims& dims, double negative_slope, Rng& rng) {
    if (dims.fused_width() == 0 || dims.hidden == 0 || dims.classes == 0) {
        throw ConfigError("stage2: every dimension must be positive");
    }
    Stage2Model m;
    m.gcn2_a = GcnLayerParams::init(dims.fused_width(), dims.hidden, rng);
    m.gcn2_b = GcnLayerParams::init(dims.hidden, dims.hidden, rng);
    m.head2 = GcnLayerParams::init(dims.hidden, dims.classes, rng);
    m.negative_slope = negative_slope;
    return m;
}

void Stage2Model::validate() const {
    auto expect = [](bool ok, const char* what) {
        if (!ok) throw DimensionError(std::string("stage2 model: ") + what);
    };
    expect(gcn2_b.in_dim() == gcn2_a.out_dim(), "gcn2_b input width");
    expect(gcn2_b.out_dim() == gcn2_a.out_dim(), "gcn2_b output width");
    expect(head2.in_dim() == gcn2_b.out_dim(), "head2 input width");
    for (const GcnLayerParams* p : {&gcn2_a, &gcn2_b, &head2}) {
        expect(p->bias.rows() == 1 && p->bias.cols() == p->out_dim(), "bias shape");
    }
}

std::vector<ParamRef> Stage2Model::parameters() {
    return {{"gcn2_a.weight", &gcn2_a.weight}, {"gcn2_a.bias", &gcn2_a.bias},
            {"gcn2_b.weight", &gcn2_b.weight}, {"gcn2_b.bias", &gcn2_b.bias},
            {"head2.weight", &head2.weight},   {"head2.bias", &head2.bias}};
}

std::vector<NodeId> Stage2Nodes::all() const {
    return {gcn2_a.weight, gcn2_a.bias, gcn2_b.weight, gcn2_b.bias, head2.weight, head2.bias};
}

Stage2Nodes bind(Tape& tape, const Stage2Model& model) {
    return {bind(tape, model.gcn2_a), bind(tape, model.gcn2_b), bind(tape, model.head2),
            model.negative_slope};
}

DenseMatrix fuse_stage2(const DenseMatrix& x, const DenseMatrix& high_level,
                        const SoftPrediction& p) {
    return hconcat({&x, &high_level, &p.probabilities()});
}

Stage2Graph stage2_graph(Tape& tape, const Stage2Nodes& nodes, const SharedSparse& concept_norm,
                         std::span<const InputBlock> fused, double dropout_rate, Mode mode,
                         Rng& rng) {
    const double slope = nodes.negative_slope;
    NodeId h = gcn_layer(tape, concept_norm, fused, nodes.gcn2_a, Activation::leaky_relu, slope);
    h = dropout(tape, h, dropout_rate, mode, rng);
    h = gcn_layer(tape, concept_norm, h, nodes.gcn2_b, Activation::leaky_relu, slope);
    h = dropout(tape, h, dropout_rate, mode, rng);
    Stage2Graph out{};
    out.logits = gcn_layer(tape, concept_norm, h, nodes.head2, Activation::identity);
    out.probabilities = tape.row_softmax(out.logits);
    return out;
}

DenseMatrix stage2_forward(const Stage2Model& model, const ConceptualGraph& graph,
                           const DenseMatrix& fused, double dropout_rate, Mode mode, Rng& rng) {
    model.validate();
    if (fused.cols() != model.gcn2_a.in_dim()) {
        throw DimensionError("stage2_forward: fused input " + shape_of(fused) +
                             " vs expected width " + std::to_string(model.gcn2_a.in_dim()));
    }
    Tape tape;
    auto gcn = [&](const GcnLayerParams& p) {
        return GcnLayerNodes{tape.constant(p.weight), tape.constant(p.bias)};
    };
    const Stage2Nodes nodes{gcn(model.gcn2_a), gcn(model.gcn2_b), gcn(model.head2),
                            model.negative_slope};
    const InputBlock block = InputBlock::of(share(SparseMatrixCSR::from_dense(fused)));
    const Stage2Graph g = stage2_graph(tape, nodes, share(graph.normalized),
                                       std::span<const InputBlock>(&block, 1), dropout_rate, mode,
                                       rng);
    return tape.value(g.probabilities);
}

std::vector<int> predict(const DenseMatrix& probs) {
    if (probs.rows() == 0 || probs.cols() == 0) throw ContractError("predict: empty input");
    std::vector<int> labels(probs.rows());
    for (std::size_t i = 0; i < probs.rows(); ++i) {
        const auto row = probs.row(i);
        std::size_t best = 0;
        for (std::size_t c = 1; c < row.size(); ++c) {
            if (row[c] > row[best]) best = c;
        }
        labels[i] = static_cast<int>(best);
    }
    return labels;
}

}  // namespace conceptgcn
