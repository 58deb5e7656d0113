#include "conceptgcn/stage1.hpp"

#include <array>
#include <cmath>

#include "conceptgcn/errors.hpp"

namespace conceptgcn {

Stage1Model Stage1Model::init(const Stage1Dims& dims, double negative_slope, Rng& rng) {
    if (dims.features == 0 || dims.attention == 0 || dims.code == 0 || dims.hidden == 0 ||
        dims.classes == 0) {
        throw ConfigError("stage1: every dimension must be positive");
    }
    Stage1Model m;
    m.attention = AttentionParams::init(dims.features, dims.attention, negative_slope, rng);
    m.encoder = EncoderParams::init(dims.attention, dims.code, rng);
    m.gcn1_a = GcnLayerParams::init(dims.fused_width(), dims.hidden, rng);
    m.gcn1_b = GcnLayerParams::init(dims.hidden, dims.hidden, rng);
    m.head1 = GcnLayerParams::init(dims.hidden, dims.classes, rng);
    return m;
}

Stage1Dims Stage1Model::dims() const {
    return {attention.weight.rows(), attention.out_dim(), encoder.code_dim(), gcn1_a.out_dim(),
            head1.out_dim()};
}

void Stage1Model::validate() const {
    const Stage1Dims d = dims();
    auto expect = [](bool ok, const std::string& what) {
        if (!ok) throw DimensionError("stage1 model: " + what);
    };
    expect(attention.att_l.rows() == d.attention && attention.att_l.cols() == 1, "att_l shape");
    expect(attention.att_r.rows() == d.attention && attention.att_r.cols() == 1, "att_r shape");
    expect(encoder.weight.rows() == d.attention, "encoder input width");
    expect(encoder.bias.rows() == 1 && encoder.bias.cols() == d.code, "encoder bias shape");
    expect(gcn1_a.in_dim() == d.fused_width(),
           "gcn1_a input " + std::to_string(gcn1_a.in_dim()) + " != fused width " +
               std::to_string(d.fused_width()));
    expect(gcn1_b.in_dim() == d.hidden && gcn1_b.out_dim() == d.hidden, "gcn1_b shape");
    expect(head1.in_dim() == d.hidden, "head1 input width");
    for (const GcnLayerParams* p : {&gcn1_a, &gcn1_b, &head1}) {
        expect(p->bias.rows() == 1 && p->bias.cols() == p->out_dim(), "gcn bias shape");
    }
}

std::vector<ParamRef> Stage1Model::parameters() {
    return {{"attention.weight", &attention.weight},
            {"attention.att_l", &attention.att_l},
            {"attention.att_r", &attention.att_r},
            {"encoder.weight", &encoder.weight},
            {"encoder.bias", &encoder.bias},
            {"gcn1_a.weight", &gcn1_a.weight},
            {"gcn1_a.bias", &gcn1_a.bias},
            {"gcn1_b.weight", &gcn1_b.weight},
            {"gcn1_b.bias", &gcn1_b.bias},
            {"head1.weight", &head1.weight},
            {"head1.bias", &head1.bias}};
}

std::vector<NodeId> Stage1Nodes::all() const {
    return {attention.weight, attention.att_l, attention.att_r, encoder.weight, encoder.bias,
            gcn1_a.weight,    gcn1_a.bias,     gcn1_b.weight,   gcn1_b.bias,    head1.weight,
            head1.bias};
}

Stage1Nodes bind(Tape& tape, const Stage1Model& model) {
    Stage1Nodes n;
    n.attention = bind(tape, model.attention);
    n.encoder = bind(tape, model.encoder);
    n.gcn1_a = bind(tape, model.gcn1_a);
    n.gcn1_b = bind(tape, model.gcn1_b);
    n.head1 = bind(tape, model.head1);
    return n;
}

SoftPrediction::SoftPrediction(DenseMatrix probabilities) : probabilities_(std::move(probabilities)) {
    for (std::size_t i = 0; i < probabilities_.rows(); ++i) {
        double total = 0.0;
        for (double p : probabilities_.row(i)) {
            if (!(p >= 0.0 && p <= 1.0)) {
                throw ContractError("soft prediction: entry outside [0,1] in row " +
                                    std::to_string(i));
            }
            total += p;
        }
        if (std::abs(total - 1.0) > 1e-9) {
            throw ContractError("soft prediction: row " + std::to_string(i) + " sums to " +
                                std::to_string(total));
        }
    }
}

DenseMatrix fuse_inputs(const DenseMatrix& x, const DenseMatrix& code, const DenseMatrix& emb) {
    return hconcat({&x, &code, &emb});
}

Stage1Graph stage1_gcn(Tape& tape, const Stage1Nodes& nodes, const SharedSparse& a_hat,
                       std::span<const InputBlock> fused, double dropout_rate, Mode mode,
                       Rng& rng) {
    const double slope = nodes.attention.negative_slope;
    Stage1Graph out{};
    NodeId h = gcn_layer(tape, a_hat, fused, nodes.gcn1_a, Activation::leaky_relu, slope);
    h = dropout(tape, h, dropout_rate, mode, rng);
    out.high_level = gcn_layer(tape, a_hat, h, nodes.gcn1_b, Activation::leaky_relu, slope);
    const NodeId dropped = dropout(tape, out.high_level, dropout_rate, mode, rng);
    out.logits = gcn_layer(tape, a_hat, dropped, nodes.head1, Activation::identity);
    out.probabilities = tape.row_softmax(out.logits);
    return out;
}

Stage1Graph stage1_graph(Tape& tape, const Stage1Nodes& nodes, const GraphContext& ctx,
                         double dropout_rate, Mode mode, Rng& rng) {
    const NodeId emb =
        attention_layer(tape, ctx.neighbourhood, InputBlock::of(ctx.features), nodes.attention);
    const NodeId code = encoder(tape, emb, nodes.encoder);
    const std::array<InputBlock, 3> fused{InputBlock::of(ctx.features), InputBlock::of(code),
                                          InputBlock::of(emb)};
    Stage1Graph out = stage1_gcn(tape, nodes, ctx.propagation, fused, dropout_rate, mode, rng);
    out.embedding = emb;
    out.code = code;
    return out;
}

namespace {

Stage1Nodes constant_nodes(Tape& tape, const Stage1Model& model) {
    auto gcn = [&](const GcnLayerParams& p) {
        return GcnLayerNodes{tape.constant(p.weight), tape.constant(p.bias)};
    };
    Stage1Nodes n;
    n.attention = {tape.constant(model.attention.weight), tape.constant(model.attention.att_l),
                   tape.constant(model.attention.att_r), model.attention.negative_slope};
    n.encoder = {tape.constant(model.encoder.weight), tape.constant(model.encoder.bias)};
    n.gcn1_a = gcn(model.gcn1_a);
    n.gcn1_b = gcn(model.gcn1_b);
    n.head1 = gcn(model.head1);
    return n;
}

}  // namespace

Stage1Output stage1_forward(const Stage1Model& model, const SparseMatrixCSR& a_hat,
                            const DenseMatrix& fused, double dropout_rate, Mode mode, Rng& rng) {
    model.validate();
    if (fused.cols() != model.dims().fused_width()) {
        throw DimensionError("stage1_forward: fused input " + shape_of(fused) +
                             " vs expected width " + std::to_string(model.dims().fused_width()));
    }
    Tape tape;
    const Stage1Nodes nodes = constant_nodes(tape, model);
    const InputBlock block = InputBlock::of(share(SparseMatrixCSR::from_dense(fused)));
    const Stage1Graph g = stage1_gcn(tape, nodes, share(a_hat), std::span<const InputBlock>(&block, 1),
                                     dropout_rate, mode, rng);
    return {tape.value(g.high_level), SoftPrediction(tape.value(g.probabilities))};
}

Stage1Output stage1_infer(const Stage1Model& model, const GraphContext& ctx, double dropout_rate,
                          Mode mode, Rng& rng) {
    model.validate();
    Tape tape;
    const Stage1Nodes nodes = constant_nodes(tape, model);
    const Stage1Graph g = stage1_graph(tape, nodes, ctx, dropout_rate, mode, rng);
    return {tape.value(g.high_level), SoftPrediction(tape.value(g.probabilities))};
}

}  // namespace conceptgcn
