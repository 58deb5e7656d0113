#include "conceptgcn/training.hpp"

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "conceptgcn/errors.hpp"

namespace conceptgcn {

using json = nlohmann::json;

TrainConfig TrainConfig::for_dataset(const std::string& name) {
    TrainConfig c;
    c.dataset = name;
    if (name == "cora") {
        return c;
    }
    if (name == "citeseer") {
        c.weight_decay_override = 0.00035;
        c.ratio_node = 0.56;
        c.dropout = 0.4;
        c.sigma = 4.0;
        c.hidden = 32;
        c.graph_size = 100;
        c.batch_size = 40;
        c.epochs = 260;
        return c;
    }
    if (name == "pubmed") {
        c.weight_decay_override = 0.00029;
        c.ratio_node = 0.75;
        c.dropout = 0.6;
        c.sigma = 6.0;
        c.hidden = 64;
        c.graph_size = 150;
        c.batch_size = 80;
        c.epochs = 300;
        return c;
    }
    throw ConfigError("no built-in defaults for dataset '" + name +
                      "' (known: cora, citeseer, pubmed)");
}

void TrainConfig::validate() const {
    auto fail = [](const std::string& msg) { throw ConfigError("config: " + msg); };
    if (!(learning_rate > 0.0)) fail("learning_rate must be > 0");
    if (epochs < 1) fail("epochs must be >= 1");
    if (!(momentum >= 0.0 && momentum < 1.0)) fail("momentum must lie in [0,1)");
    if (!(gamma > 0.0 && gamma <= 1.0)) fail("gamma must lie in (0,1]");
    if (!(dropout >= 0.0 && dropout < 1.0)) fail("dropout must lie in [0,1)");
    if (hidden == 0) fail("hidden must be > 0");
    if (!(negative_slope > 0.0)) fail("negative_slope must be > 0");
    if (weight_decay_override && !(*weight_decay_override >= 0.0)) {
        fail("weight_decay must be >= 0");
    }
    if (resolved_phase1_epochs() >= epochs) {
        fail("phase1_epochs (" + std::to_string(resolved_phase1_epochs()) +
             ") must be < epochs (" + std::to_string(epochs) + ")");
    }
    if (!(train_ratio > 0.0 && val_ratio > 0.0 && train_ratio + val_ratio < 1.0)) {
        fail("need 0 < train_ratio, 0 < val_ratio, train_ratio + val_ratio < 1");
    }
    concept_params().validate();
}

double TrainConfig::weight_decay() const {
    return weight_decay_override ? *weight_decay_override : weight_decay_of(learning_rate, epochs);
}

ConceptParams TrainConfig::concept_params() const {
    return {sigma, ratio_node, graph_size, include_original_edges, alpha};
}

std::string to_json(const TrainConfig& c) {
    json j;
    j["dataset"] = c.dataset;
    j["learning_rate"] = c.learning_rate;
    j["epochs"] = c.epochs;
    j["batch_size"] = c.batch_size;
    j["momentum"] = c.momentum;
    j["gamma"] = c.gamma;
    j["dropout"] = c.dropout;
    j["hidden"] = c.hidden;
    j["negative_slope"] = c.negative_slope;
    j["weight_decay_override"] =
        c.weight_decay_override ? json(*c.weight_decay_override) : json(nullptr);
    j["weight_decay"] = c.weight_decay();
    j["sigma"] = c.sigma;
    j["ratio_node"] = c.ratio_node;
    j["graph_size"] = c.graph_size;
    j["include_original_edges"] = c.include_original_edges;
    j["alpha"] = c.alpha;
    j["seed"] = c.seed;
    j["phase1_epochs"] = c.resolved_phase1_epochs();
    j["split_seed"] = c.split_seed;
    j["train_ratio"] = c.train_ratio;
    j["val_ratio"] = c.val_ratio;
    j["row_normalize_features"] = c.row_normalize_features;
    j["stochastic_concept_pass"] = c.stochastic_concept_pass;
    j["joint_finetune"] = c.joint_finetune;
    return j.dump(2);
}

TrainConfig overlay_config(const TrainConfig& base, const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("config: not valid JSON: ") + e.what());
    }
    if (!j.is_object()) throw ConfigError("config: top level must be an object");
    TrainConfig c = base;
    for (const auto& [key, v] : j.items()) {
        try {
            if (key == "dataset") c.dataset = v.get<std::string>();
            else if (key == "learning_rate") c.learning_rate = v.get<double>();
            else if (key == "epochs") c.epochs = v.get<std::size_t>();
            else if (key == "batch_size") c.batch_size = v.get<std::size_t>();
            else if (key == "momentum") c.momentum = v.get<double>();
            else if (key == "gamma") c.gamma = v.get<double>();
            else if (key == "dropout") c.dropout = v.get<double>();
            else if (key == "hidden") c.hidden = v.get<std::size_t>();
            else if (key == "negative_slope") c.negative_slope = v.get<double>();
            else if (key == "weight_decay_override" || key == "weight_decay") {
                if (v.is_null()) c.weight_decay_override.reset();
                else c.weight_decay_override = v.get<double>();
            }
            else if (key == "sigma") c.sigma = v.get<double>();
            else if (key == "ratio_node") c.ratio_node = v.get<double>();
            else if (key == "graph_size") c.graph_size = v.get<std::size_t>();
            else if (key == "include_original_edges") c.include_original_edges = v.get<bool>();
            else if (key == "alpha") c.alpha = v.get<double>();
            else if (key == "seed") c.seed = v.get<std::uint64_t>();
            else if (key == "phase1_epochs") {
                if (v.is_null()) c.phase1_epochs.reset();
                else c.phase1_epochs = v.get<std::size_t>();
            }
            else if (key == "split_seed") c.split_seed = v.get<std::uint64_t>();
            else if (key == "train_ratio") c.train_ratio = v.get<double>();
            else if (key == "val_ratio") c.val_ratio = v.get<double>();
            else if (key == "row_normalize_features") c.row_normalize_features = v.get<bool>();
            else if (key == "stochastic_concept_pass") c.stochastic_concept_pass = v.get<bool>();
            else if (key == "joint_finetune") c.joint_finetune = v.get<bool>();
            else throw ConfigError("config: unknown key '" + key + "'");
        } catch (const json::exception& e) {
            throw ConfigError("config: bad value for '" + key + "': " + e.what());
        }
    }
    return c;
}

double weight_decay_of(double learning_rate, std::size_t epochs) {
    if (epochs == 0) throw ConfigError("weight_decay_of: epochs must be >= 1");
    return learning_rate / static_cast<double>(epochs);
}

void sgd_momentum_step(std::span<DenseMatrix* const> params, std::span<const DenseMatrix> grads,
                       OptimizerState& state, double lr, double momentum, double weight_decay) {
    if (params.size() != grads.size()) {
        throw DimensionError("sgd_momentum_step: " + std::to_string(params.size()) +
                             " parameters vs " + std::to_string(grads.size()) + " gradients");
    }
    if (state.velocity.empty()) {
        for (const DenseMatrix* p : params) state.velocity.emplace_back(p->rows(), p->cols());
    }
    if (state.velocity.size() != params.size()) {
        throw DimensionError("sgd_momentum_step: optimizer state holds " +
                             std::to_string(state.velocity.size()) + " velocities");
    }
    for (std::size_t t = 0; t < params.size(); ++t) {
        DenseMatrix& w = *params[t];
        DenseMatrix& v = state.velocity[t];
        const DenseMatrix& g = grads[t];
        if (!w.same_shape(g) || !w.same_shape(v)) {
            throw DimensionError("sgd_momentum_step: parameter " + shape_of(w) + ", gradient " +
                                 shape_of(g) + ", velocity " + shape_of(v));
        }
        auto wv = w.values();
        auto vv = v.values();
        auto gv = g.values();
        for (std::size_t i = 0; i < wv.size(); ++i) {
            vv[i] = momentum * vv[i] - lr * (gv[i] + weight_decay * wv[i]);
            wv[i] += vv[i];
        }
    }
    state.current_lr = lr;
}

void MetricsLog::append(const EpochRecord& r) {
    if (!records_.empty() && r.epoch <= records_.back().epoch) {
        throw ContractError("metrics: epoch " + std::to_string(r.epoch) + " after " +
                            std::to_string(records_.back().epoch));
    }
    records_.push_back(r);
}

std::string MetricsLog::to_csv(bool with_wall_time) const {
    std::string out = "epoch,train_loss,val_loss,train_acc,val_acc,lr";
    out += with_wall_time ? ",wall_ms\n" : "\n";
    char buf[512];
    for (const auto& r : records_) {
        std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g,%.17g,%.17g,%.17g", r.epoch, r.train_loss,
                      r.val_loss, r.train_acc, r.val_acc, r.lr);
        out += buf;
        if (with_wall_time) {
            std::snprintf(buf, sizeof buf, ",%.3f", r.wall_ms);
            out += buf;
        }
        out += '\n';
    }
    return out;
}

void MetricsLog::write_csv(const std::filesystem::path& path) const {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw Error("cannot write " + path.string());
    f << to_csv();
}

MetricsLog MetricsLog::read_csv(const std::filesystem::path& path) {
    std::ifstream f(path);
    if (!f) throw ParseError("cannot open " + path.string());
    std::string line;
    if (!std::getline(f, line) || line.rfind("epoch,", 0) != 0) {
        throw ParseError(path.string() + ": missing metrics header");
    }
    MetricsLog log;
    std::size_t lineno = 1;
    while (std::getline(f, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::replace(line.begin(), line.end(), ',', ' ');
        std::istringstream in(line);
        EpochRecord r;
        if (!(in >> r.epoch >> r.train_loss >> r.val_loss >> r.train_acc >> r.val_acc >> r.lr)) {
            throw ParseError(path.string() + ":" + std::to_string(lineno) + ": malformed row");
        }
        in >> r.wall_ms;
        log.append(r);
    }
    return log;
}

double evaluate(const DenseMatrix& probs, std::span<const int> labels,
                const std::vector<bool>& mask) {
    if (mask.size() != probs.rows() || labels.size() != probs.rows()) {
        throw DimensionError("evaluate: " + shape_of(probs) + " with " +
                             std::to_string(labels.size()) + " labels and mask of " +
                             std::to_string(mask.size()));
    }
    const auto rows = mask_indices(mask);
    if (rows.empty()) throw ContractError("evaluate: empty mask");
    const auto pred = predict(probs);
    std::size_t correct = 0;
    for (std::size_t r : rows) correct += pred[r] == labels[r] ? 1 : 0;
    return static_cast<double>(correct) / static_cast<double>(rows.size());
}

Accuracy evaluate_split(const DenseMatrix& probs, std::span<const int> labels,
                        const DataSplit& split) {
    return {evaluate(probs, labels, split.train_mask), evaluate(probs, labels, split.val_mask),
            evaluate(probs, labels, split.test_mask)};
}

namespace {

enum Stream : std::uint64_t { init_stream = 1, dropout_stream = 2, batch_stream = 3,
                              concept_stream = 4 };

Rng make_rng(std::uint64_t seed, Stream stream) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(stream)};
    return Rng(seq);
}

// Shuffled labelled training nodes cut into batches; each batch is sorted so
// a full batch gives the same loss whatever the shuffle.
std::vector<std::vector<std::size_t>> make_batches(const std::vector<std::size_t>& train,
                                                   std::size_t batch_size, Rng& rng) {
    std::vector<std::size_t> order = train;
    std::shuffle(order.begin(), order.end(), rng);
    const std::size_t size = batch_size == 0 ? order.size() : batch_size;
    std::vector<std::vector<std::size_t>> batches;
    for (std::size_t b = 0; b < order.size(); b += size) {
        const auto end = order.begin() + static_cast<std::ptrdiff_t>(std::min(order.size(), b + size));
        std::vector<std::size_t> batch(order.begin() + static_cast<std::ptrdiff_t>(b), end);
        std::sort(batch.begin(), batch.end());
        batches.push_back(std::move(batch));
    }
    return batches;
}

void check_split(const AttributedGraph& g, const DataSplit& split) {
    const std::size_t n = g.node_count();
    if (split.train_mask.size() != n || split.val_mask.size() != n ||
        split.test_mask.size() != n) {
        throw DimensionError("split masks do not match the " + std::to_string(n) + "-node graph");
    }
    if (mask_count(split.train_mask) == 0) throw ContractError("split: empty train mask");
    if (mask_count(split.val_mask) == 0) throw ContractError("split: empty val mask");
}

// Loss and accuracy on the train and val masks from eval-mode logits.
EpochRecord epoch_record(std::size_t epoch, const DenseMatrix& logits, const DenseMatrix& probs,
                         std::span<const int> labels, const DataSplit& split, double lr,
                         double wall_ms) {
    EpochRecord r;
    r.epoch = epoch;
    r.train_loss = cross_entropy(logits, labels, split.train_mask);
    r.val_loss = cross_entropy(logits, labels, split.val_mask);
    r.train_acc = evaluate(probs, labels, split.train_mask);
    r.val_acc = evaluate(probs, labels, split.val_mask);
    r.lr = lr;
    r.wall_ms = wall_ms;
    return r;
}

double elapsed_ms(std::chrono::steady_clock::time_point since) {
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - since)
        .count();
}

std::vector<DenseMatrix*> values_of(const std::vector<ParamRef>& refs) {
    std::vector<DenseMatrix*> out;
    for (const auto& r : refs) out.push_back(r.value);
    return out;
}

std::vector<DenseMatrix> grads_of(const Tape& tape, const std::vector<NodeId>& nodes) {
    std::vector<DenseMatrix> out;
    out.reserve(nodes.size());
    for (NodeId id : nodes) out.push_back(tape.grad(id));
    return out;
}


}  // namespace

Stage1Output pipeline_stage1(const Stage1Model& model, const GraphContext& ctx) {
    Rng unused(0);
    return stage1_infer(model, ctx, 0.0, Mode::eval, unused);
}

namespace {

struct Stage2Eval {
    DenseMatrix logits;
    DenseMatrix probabilities;
};

Stage2Eval stage2_eval(const Stage2Model& model, const SharedSparse& concept_norm,
                       const GraphContext& ctx, const DenseMatrix& high_level,
                       const DenseMatrix& probs) {
    Tape tape;
    auto gcn = [&](const GcnLayerParams& p) {
        return GcnLayerNodes{tape.constant(p.weight), tape.constant(p.bias)};
    };
    const Stage2Nodes nodes{gcn(model.gcn2_a), gcn(model.gcn2_b), gcn(model.head2),
                            model.negative_slope};
    const std::array<InputBlock, 3> blocks{InputBlock::of(ctx.features),
                                           InputBlock::of(tape.constant(high_level)),
                                           InputBlock::of(tape.constant(probs))};
    Rng unused(0);
    const Stage2Graph g = stage2_graph(tape, nodes, concept_norm, blocks, 0.0, Mode::eval, unused);
    return {tape.value(g.logits), tape.value(g.probabilities)};
}

}  // namespace

DenseMatrix pipeline_stage2(const Stage2Model& model, const SparseMatrixCSR& concept_normalized,
                            const GraphContext& ctx, const Stage1Output& s1) {
    model.validate();
    return stage2_eval(model, share(concept_normalized), ctx, s1.high_level,
                       s1.prediction.probabilities())
        .probabilities;
}

PipelineResult train_pipeline(const TrainConfig& config, const AttributedGraph& g,
                              const DataSplit& split, const EpochCallback& on_epoch) {
    config.validate();
    g.validate();
    check_split(g, split);

    const GraphContext ctx = GraphContext::build(g, config.row_normalize_features);
    const std::span<const int> labels = g.labels;
    const auto train_nodes = mask_indices(split.train_mask);
    const double wd = config.weight_decay();
    const std::size_t phase1 = config.resolved_phase1_epochs();

    Rng init_rng = make_rng(config.seed, init_stream);
    Rng drop_rng = make_rng(config.seed, dropout_stream);
    Rng batch_rng = make_rng(config.seed, batch_stream);

    PipelineResult result;
    const Stage1Dims dims1{g.feature_count(), config.hidden, config.hidden, config.hidden,
                           g.class_count};
    result.stage1 = Stage1Model::init(dims1, config.negative_slope, init_rng);
    const Stage2Dims dims2{g.feature_count(), config.hidden, g.class_count, config.hidden};
    result.stage2 = Stage2Model::init(dims2, config.negative_slope, init_rng);

    // Phase A: stage 1 alone.
    {
        OptimizerState opt;
        double lr = config.learning_rate;
        auto params = result.stage1.parameters();
        const auto param_values = values_of(params);
        for (std::size_t epoch = 1; epoch <= phase1; ++epoch) {
            const auto start = std::chrono::steady_clock::now();
            for (const auto& batch : make_batches(train_nodes, config.batch_size, batch_rng)) {
                Tape tape;
                const Stage1Nodes nodes = bind(tape, result.stage1);
                const Stage1Graph s1 =
                    stage1_graph(tape, nodes, ctx, config.dropout, Mode::train, drop_rng);
                tape.backward(tape.softmax_cross_entropy(s1.logits, labels, batch));
                sgd_momentum_step(param_values, grads_of(tape, nodes.all()), opt, lr,
                                  config.momentum, wd);
            }
            Tape tape;
            const Stage1Graph s1 = [&] {
                const Stage1Nodes nodes = bind(tape, result.stage1);
                return stage1_graph(tape, nodes, ctx, 0.0, Mode::eval, drop_rng);
            }();
            const EpochRecord rec =
                epoch_record(epoch, tape.value(s1.logits), tape.value(s1.probabilities), labels,
                             split, lr, elapsed_ms(start));
            result.log.append(rec);
            if (on_epoch) on_epoch(rec);
            lr *= config.gamma;
        }
    }

    // Conceptual graph from the stage-1 soft prediction.
    if (config.stochastic_concept_pass) {
        Rng concept_rng = make_rng(config.seed, concept_stream);
        result.stage1_output =
            stage1_infer(result.stage1, ctx, config.dropout, Mode::train, concept_rng);
    } else {
        result.stage1_output = pipeline_stage1(result.stage1, ctx);
    }
    result.conceptual = build_conceptual_graph(result.stage1_output.prediction,
                                            config.concept_params(), &g.adjacency);
    const SharedSparse concept_norm = share(result.conceptual.normalized);

    // Phase B: stage 2, optionally with stage 1 still learning.
    {
        OptimizerState opt;
        double lr = config.learning_rate;
        auto params = result.stage2.parameters();
        if (config.joint_finetune) {
            auto more = result.stage1.parameters();
            params.insert(params.end(), more.begin(), more.end());
        }
        const auto param_values = values_of(params);
        for (std::size_t epoch = phase1 + 1; epoch <= config.epochs; ++epoch) {
            const auto start = std::chrono::steady_clock::now();
            for (const auto& batch : make_batches(train_nodes, config.batch_size, batch_rng)) {
                Tape tape;
                const Stage2Nodes nodes2 = bind(tape, result.stage2);
                std::vector<NodeId> trained = nodes2.all();
                NodeId high, probs;
                if (config.joint_finetune) {
                    const Stage1Nodes nodes1 = bind(tape, result.stage1);
                    const Stage1Graph s1 =
                        stage1_graph(tape, nodes1, ctx, config.dropout, Mode::train, drop_rng);
                    high = s1.high_level;
                    probs = s1.probabilities;
                    const auto more = nodes1.all();
                    trained.insert(trained.end(), more.begin(), more.end());
                } else {
                    high = tape.constant(result.stage1_output.high_level);
                    probs = tape.constant(result.stage1_output.prediction.probabilities());
                }
                const std::array<InputBlock, 3> blocks{InputBlock::of(ctx.features),
                                                       InputBlock::of(high), InputBlock::of(probs)};
                const Stage2Graph s2 = stage2_graph(tape, nodes2, concept_norm, blocks,
                                                    config.dropout, Mode::train, drop_rng);
                tape.backward(tape.softmax_cross_entropy(s2.logits, labels, batch));
                sgd_momentum_step(param_values, grads_of(tape, trained), opt, lr, config.momentum,
                                  wd);
            }
            const Stage1Output s1 = config.joint_finetune ? pipeline_stage1(result.stage1, ctx)
                                                          : result.stage1_output;
            const Stage2Eval ev = stage2_eval(result.stage2, concept_norm, ctx, s1.high_level,
                                              s1.prediction.probabilities());
            const EpochRecord rec = epoch_record(epoch, ev.logits, ev.probabilities, labels, split,
                                                 lr, elapsed_ms(start));
            result.log.append(rec);
            if (on_epoch) on_epoch(rec);
            lr *= config.gamma;
        }
    }

    if (config.joint_finetune) result.stage1_output = pipeline_stage1(result.stage1, ctx);
    result.probabilities = stage2_eval(result.stage2, concept_norm, ctx,
                                       result.stage1_output.high_level,
                                       result.stage1_output.prediction.probabilities())
                               .probabilities;
    result.accuracy = evaluate_split(result.probabilities, labels, split);
    return result;
}

std::vector<ParamRef> BaselineModel::parameters() {
    return {{"layer1.weight", &layer1.weight},
            {"layer1.bias", &layer1.bias},
            {"layer2.weight", &layer2.weight},
            {"layer2.bias", &layer2.bias}};
}

namespace {

struct BaselineGraph {
    NodeId logits, probabilities;
    std::vector<NodeId> params;
};

BaselineGraph baseline_graph(Tape& tape, const BaselineModel& model, const GraphContext& ctx,
                             bool trainable, double dropout_rate, Mode mode, Rng& rng) {
    auto node = [&](const DenseMatrix& m) {
        return trainable ? tape.parameter(m) : tape.constant(m);
    };
    const GcnLayerNodes l1{node(model.layer1.weight), node(model.layer1.bias)};
    const GcnLayerNodes l2{node(model.layer2.weight), node(model.layer2.bias)};
    const InputBlock x = InputBlock::of(ctx.features);
    NodeId h = gcn_layer(tape, ctx.propagation, std::span<const InputBlock>(&x, 1), l1,
                         Activation::relu);
    h = dropout(tape, h, dropout_rate, mode, rng);
    BaselineGraph out;
    out.logits = gcn_layer(tape, ctx.propagation, h, l2, Activation::identity);
    out.probabilities = tape.row_softmax(out.logits);
    out.params = {l1.weight, l1.bias, l2.weight, l2.bias};
    return out;
}

}  // namespace

DenseMatrix baseline_forward(const BaselineModel& model, const GraphContext& ctx) {
    Tape tape;
    Rng unused(0);
    const BaselineGraph g = baseline_graph(tape, model, ctx, false, 0.0, Mode::eval, unused);
    return tape.value(g.probabilities);
}

BaselineResult train_baseline_gcn(const TrainConfig& config, const AttributedGraph& g,
                                  const DataSplit& split, const EpochCallback& on_epoch) {
    config.validate();
    g.validate();
    check_split(g, split);

    const GraphContext ctx = GraphContext::build(g, config.row_normalize_features);
    const std::span<const int> labels = g.labels;
    const auto train_nodes = mask_indices(split.train_mask);
    const double wd = config.weight_decay();

    Rng init_rng = make_rng(config.seed, init_stream);
    Rng drop_rng = make_rng(config.seed, dropout_stream);
    Rng batch_rng = make_rng(config.seed, batch_stream);

    BaselineResult result;
    result.model.layer1 = GcnLayerParams::init(g.feature_count(), config.hidden, init_rng);
    result.model.layer2 = GcnLayerParams::init(config.hidden, g.class_count, init_rng);
    const auto param_values = values_of(result.model.parameters());

    OptimizerState opt;
    double lr = config.learning_rate;
    for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
        const auto start = std::chrono::steady_clock::now();
        for (const auto& batch : make_batches(train_nodes, config.batch_size, batch_rng)) {
            Tape tape;
            const BaselineGraph bg =
                baseline_graph(tape, result.model, ctx, true, config.dropout, Mode::train, drop_rng);
            tape.backward(tape.softmax_cross_entropy(bg.logits, labels, batch));
            sgd_momentum_step(param_values, grads_of(tape, bg.params), opt, lr, config.momentum,
                              wd);
        }
        Tape tape;
        const BaselineGraph bg =
            baseline_graph(tape, result.model, ctx, false, 0.0, Mode::eval, drop_rng);
        const EpochRecord rec = epoch_record(epoch, tape.value(bg.logits),
                                             tape.value(bg.probabilities), labels, split, lr,
                                             elapsed_ms(start));
        result.log.append(rec);
        if (on_epoch) on_epoch(rec);
        lr *= config.gamma;
    }
    result.probabilities = baseline_forward(result.model, ctx);
    result.accuracy = evaluate_split(result.probabilities, labels, split);
    return result;
}

}  // namespace conceptgcn
