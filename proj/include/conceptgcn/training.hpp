#pragma once

// Optimizer, two-phase pipeline trainer, baseline GCN and evaluation.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "conceptgcn/concept_graph.hpp"
#include "conceptgcn/graph_data.hpp"
#include "conceptgcn/stage1.hpp"
#include "conceptgcn/stage2.hpp"

namespace conceptgcn {

struct TrainConfig {
    std::string dataset = "cora";
    double learning_rate = 0.1;
    std::size_t epochs = 230;
    std::size_t batch_size = 20;  // 0 means full batch
    double momentum = 0.9;
    double gamma = 0.99;  // per-epoch lr multiplier
    double dropout = 0.2;
    std::size_t hidden = 16;
    double negative_slope = 0.2;
    std::optional<double> weight_decay_override = 0.0004;
    double sigma = 2.0;
    double ratio_node = 0.33;
    std::size_t graph_size = 40;
    bool include_original_edges = true;
    double alpha = 0.5;
    std::uint64_t seed = 0;
    std::optional<std::size_t> phase1_epochs;  // default epochs / 2

    std::uint64_t split_seed = 1;
    double train_ratio = 0.6;
    double val_ratio = 0.2;
    bool row_normalize_features = false;
    bool stochastic_concept_pass = false;
    bool joint_finetune = false;

    // Per-dataset defaults; ConfigError for unknown names.
    static TrainConfig for_dataset(const std::string& name);

    void validate() const;
    double weight_decay() const;
    std::size_t resolved_phase1_epochs() const noexcept {
        return phase1_epochs.value_or(epochs / 2);
    }
    ConceptParams concept_params() const;
};

// Every field, phase1_epochs resolved; optional override written as null
// when absent.
std::string to_json(const TrainConfig& config);
// Keys present in `text` replace the corresponding fields of `base`.
// Unknown keys raise ConfigError.
TrainConfig overlay_config(const TrainConfig& base, const std::string& text);

// learning_rate / epochs.
double weight_decay_of(double learning_rate, std::size_t epochs);

struct OptimizerState {
    std::vector<DenseMatrix> velocity;
    double current_lr = 0.0;
};

// v <- momentum v - lr (g + wd w);  w <- w + v.
void sgd_momentum_step(std::span<DenseMatrix* const> params, std::span<const DenseMatrix> grads,
                       OptimizerState& state, double lr, double momentum, double weight_decay);

struct EpochRecord {
    std::size_t epoch = 0;
    double train_loss = 0.0;
    double val_loss = 0.0;
    double train_acc = 0.0;
    double val_acc = 0.0;
    double lr = 0.0;
    double wall_ms = 0.0;
};

class MetricsLog {
public:
    // Epochs must be strictly increasing; ContractError otherwise.
    void append(const EpochRecord& r);
    const std::vector<EpochRecord>& records() const noexcept { return records_; }
    std::size_t size() const noexcept { return records_.size(); }

    std::string to_csv(bool with_wall_time = true) const;
    void write_csv(const std::filesystem::path& path) const;
    static MetricsLog read_csv(const std::filesystem::path& path);

private:
    std::vector<EpochRecord> records_;
};

// Fraction of masked nodes whose argmax matches the label.
double evaluate(const DenseMatrix& probs, std::span<const int> labels,
                const std::vector<bool>& mask);

struct Accuracy {
    double train = 0.0, val = 0.0, test = 0.0;
};
Accuracy evaluate_split(const DenseMatrix& probs, std::span<const int> labels,
                        const DataSplit& split);

using EpochCallback = std::function<void(const EpochRecord&)>;

struct PipelineResult {
    Stage1Model stage1;
    Stage1Output stage1_output;  // eval-mode pass used to build the conceptual graph
    ConceptualGraph conceptual;
    Stage2Model stage2;
    MetricsLog log;
    DenseMatrix probabilities;  // final stage-2 output, eval mode
    Accuracy accuracy;
};

PipelineResult train_pipeline(const TrainConfig& config, const AttributedGraph& g,
                              const DataSplit& split, const EpochCallback& on_epoch = {});

struct BaselineModel {
    GcnLayerParams layer1;  // m -> hidden, relu
    GcnLayerParams layer2;  // hidden -> c

    std::vector<ParamRef> parameters();
};

struct BaselineResult {
    BaselineModel model;
    MetricsLog log;
    DenseMatrix probabilities;
    Accuracy accuracy;
};

BaselineResult train_baseline_gcn(const TrainConfig& config, const AttributedGraph& g,
                                  const DataSplit& split, const EpochCallback& on_epoch = {});

DenseMatrix baseline_forward(const BaselineModel& model, const GraphContext& ctx);

// Evaluation-mode passes over a trained pipeline (used by `eval`).
Stage1Output pipeline_stage1(const Stage1Model& model, const GraphContext& ctx);
DenseMatrix pipeline_stage2(const Stage2Model& model, const SparseMatrixCSR& concept_normalized,
                            const GraphContext& ctx, const Stage1Output& s1);

}  // namespace conceptgcn
