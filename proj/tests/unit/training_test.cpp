#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "conceptgcn/errors.hpp"
#include "conceptgcn/training.hpp"
#include "printers.hpp"
#include "synthetic.hpp"

using namespace conceptgcn;

namespace {

struct SmallProblem {
    AttributedGraph graph;
    DataSplit split;
};

SmallProblem small_problem(std::uint64_t seed = 7) {
    testkit::SyntheticSpec s;
    s.seed = seed;
    SmallProblem p{testkit::planted_partition(s), {}};
    p.split = make_splits(p.graph, 0.6, 0.2, 1);
    return p;
}

TrainConfig small_config() {
    TrainConfig c = TrainConfig::for_dataset("cora");
    c.epochs = 12;
    c.hidden = 8;
    c.graph_size = 20;
    return c;
}

}  // namespace

TEST(WeightDecay, RuleValues) {
    EXPECT_NEAR(weight_decay_of(0.1, 230), 0.000435, 5e-7);
    EXPECT_NEAR(weight_decay_of(0.1, 260), 0.000385, 5e-7);
    EXPECT_NEAR(weight_decay_of(0.1, 300), 0.000333, 5e-7);
    EXPECT_EQ(weight_decay_of(0.1, 1), 0.1);
    EXPECT_THROW(weight_decay_of(0.1, 0), ConfigError);
}

TEST(WeightDecay, PresetsCloseToRule) {
    for (const char* name : {"cora", "citeseer", "pubmed"}) {
        const auto c = TrainConfig::for_dataset(name);
        EXPECT_LE(std::abs(c.weight_decay() - weight_decay_of(c.learning_rate, c.epochs)), 5e-5)
            << name;
    }
}

TEST(Config, Presets) {
    const auto cora = TrainConfig::for_dataset("cora");
    EXPECT_EQ(cora.epochs, 230u);
    EXPECT_EQ(cora.hidden, 16u);
    EXPECT_EQ(cora.batch_size, 20u);
    EXPECT_EQ(cora.learning_rate, 0.1);
    EXPECT_EQ(cora.weight_decay(), 0.0004);
    const auto citeseer = TrainConfig::for_dataset("citeseer");
    EXPECT_EQ(citeseer.hidden, 32u);
    EXPECT_EQ(citeseer.epochs, 260u);
    const auto pubmed = TrainConfig::for_dataset("pubmed");
    EXPECT_EQ(pubmed.hidden, 64u);
    EXPECT_EQ(pubmed.weight_decay(), 0.00029);
    EXPECT_THROW(TrainConfig::for_dataset("nonexistent"), ConfigError);
    for (const auto& c : {cora, citeseer, pubmed}) EXPECT_NO_THROW(c.validate());
}

TEST(Config, Validation) {
    auto broken = [](auto&& edit) {
        TrainConfig c = TrainConfig::for_dataset("cora");
        edit(c);
        return c;
    };
    EXPECT_THROW(broken([](TrainConfig& c) { c.learning_rate = 0; }).validate(), ConfigError);
    EXPECT_THROW(broken([](TrainConfig& c) { c.momentum = 1.0; }).validate(), ConfigError);
    EXPECT_THROW(broken([](TrainConfig& c) { c.gamma = 0.0; }).validate(), ConfigError);
    EXPECT_THROW(broken([](TrainConfig& c) { c.epochs = 0; }).validate(), ConfigError);
    EXPECT_THROW(broken([](TrainConfig& c) { c.phase1_epochs = 230; }).validate(), ConfigError);
    EXPECT_THROW(broken([](TrainConfig& c) { c.sigma = -1; }).validate(), ConfigError);
    EXPECT_THROW(broken([](TrainConfig& c) { c.weight_decay_override = -1e-3; }).validate(),
                 ConfigError);
}

TEST(Config, JsonOverlay) {
    const auto base = TrainConfig::for_dataset("cora");
    const auto c = overlay_config(base, R"({"epochs": 50, "hidden": 8, "weight_decay": null})");
    EXPECT_EQ(c.epochs, 50u);
    EXPECT_EQ(c.hidden, 8u);
    EXPECT_EQ(c.weight_decay(), 0.1 / 50.0);
    EXPECT_EQ(c.sigma, base.sigma);
    EXPECT_THROW(overlay_config(base, R"({"epochz": 5})"), ConfigError);
    EXPECT_THROW(overlay_config(base, R"({"epochs": "many"})"), ConfigError);
    EXPECT_THROW(overlay_config(base, "[1]"), ConfigError);
}

TEST(Config, JsonRoundTrip) {
    for (const char* name : {"cora", "citeseer", "pubmed"}) {
        TrainConfig c = TrainConfig::for_dataset(name);
        c.seed = 42;
        c.joint_finetune = true;
        const std::string text = to_json(c);
        EXPECT_EQ(to_json(overlay_config(TrainConfig{}, text)), text) << name;
    }
    TrainConfig plain;
    plain.weight_decay_override.reset();
    EXPECT_EQ(to_json(overlay_config(TrainConfig{}, to_json(plain))), to_json(plain));
}

TEST(Optimizer, PlainGradientStep) {
    DenseMatrix w = DenseMatrix::from_rows({{1, -2}});
    const std::vector<DenseMatrix> g{DenseMatrix::from_rows({{0.5, 4}})};
    const std::vector<DenseMatrix*> params{&w};
    OptimizerState s;
    sgd_momentum_step(params, g, s, 0.1, 0.0, 0.0);
    EXPECT_EQ(w, DenseMatrix::from_rows({{1 - 0.1 * 0.5, -2 - 0.1 * 4}}));
}

TEST(Optimizer, ZeroGradientFixedPoint) {
    DenseMatrix w = DenseMatrix::from_rows({{3, 4}});
    const std::vector<DenseMatrix*> params{&w};
    OptimizerState s;
    sgd_momentum_step(params, std::vector<DenseMatrix>{DenseMatrix(1, 2)}, s, 0.1, 0.9, 0.0);
    EXPECT_EQ(w, DenseMatrix::from_rows({{3, 4}}));
}

TEST(Optimizer, MomentumRecurrenceOnSquare) {
    // f(w) = w^2, g = 2w, from w = 1:
    //   v1 = -0.1 * 2        = -0.2,  w1 = 0.8
    //   v2 = 0.9 v1 - 0.1*1.6 = -0.34, w2 = 0.46
    DenseMatrix w = DenseMatrix::from_rows({{1.0}});
    const std::vector<DenseMatrix*> params{&w};
    OptimizerState s;
    for (double expect : {0.8, 0.46}) {
        const std::vector<DenseMatrix> g{DenseMatrix::from_rows({{2.0 * w(0, 0)}})};
        sgd_momentum_step(params, g, s, 0.1, 0.9, 0.0);
        EXPECT_NEAR(w(0, 0), expect, 1e-15);
    }
    EXPECT_NEAR(s.velocity[0](0, 0), -0.34, 1e-15);
}

TEST(Optimizer, WeightDecayTerm) {
    DenseMatrix w = DenseMatrix::from_rows({{2.0}});
    const std::vector<DenseMatrix*> params{&w};
    OptimizerState s;
    sgd_momentum_step(params, std::vector<DenseMatrix>{DenseMatrix(1, 1)}, s, 0.5, 0.0, 0.1);
    EXPECT_DOUBLE_EQ(w(0, 0), 2.0 - 0.5 * 0.1 * 2.0);
}

TEST(Optimizer, ShapeErrors) {
    DenseMatrix w(2, 2);
    const std::vector<DenseMatrix*> params{&w};
    OptimizerState s;
    EXPECT_THROW(sgd_momentum_step(params, std::vector<DenseMatrix>{DenseMatrix(1, 2)}, s, 0.1, 0, 0),
                 DimensionError);
    EXPECT_THROW(sgd_momentum_step(params, std::vector<DenseMatrix>{}, s, 0.1, 0, 0), DimensionError);
}

TEST(Evaluate, Counts) {
    const DenseMatrix p = DenseMatrix::from_rows({{0.9, 0.1}, {0.2, 0.8}, {0.6, 0.4}, {0.3, 0.7}});
    const std::vector<bool> all(4, true);
    EXPECT_EQ(evaluate(p, std::vector<int>{0, 1, 0, 1}, all), 1.0);
    EXPECT_EQ(evaluate(p, std::vector<int>{1, 0, 1, 0}, all), 0.0);
    EXPECT_EQ(evaluate(p, std::vector<int>{0, 1, 1, 1}, all), 0.75);
    EXPECT_EQ(evaluate(p, std::vector<int>{0, 1, 1, 1}, {true, true, false, false}), 1.0);
    EXPECT_THROW(evaluate(p, std::vector<int>{0, 1, 1, 1}, std::vector<bool>(4, false)),
                 ContractError);
}

TEST(MetricsLog, EpochsStrictlyIncrease) {
    MetricsLog log;
    log.append({1});
    log.append({3});
    EXPECT_THROW(log.append({3}), ContractError);
    EXPECT_THROW(log.append({2}), ContractError);
}

TEST(MetricsLog, CsvRoundTrip) {
    MetricsLog log;
    log.append({1, 1.0 / 3.0, 2.5e-17, 0.5, 0.25, 0.1, 12.5});
    log.append({2, 0.7, 0.8, 0.625, 0.5, 0.099, 11.0});
    const auto path = std::filesystem::temp_directory_path() / "conceptgcn_metrics_rt.csv";
    log.write_csv(path);
    const MetricsLog back = MetricsLog::read_csv(path);
    std::filesystem::remove(path);
    EXPECT_EQ(back.to_csv(false), log.to_csv(false));
    EXPECT_EQ(back.records()[0].train_loss, 1.0 / 3.0);
    EXPECT_NE(log.to_csv(true).find("wall_ms"), std::string::npos);
    EXPECT_EQ(log.to_csv(false).find("wall_ms"), std::string::npos);
}

TEST(MetricsLog, MalformedCsv) {
    const auto path = std::filesystem::temp_directory_path() / "conceptgcn_metrics_bad.csv";
    std::ofstream(path) << "epoch,train_loss\n1,abc\n";
    EXPECT_THROW(MetricsLog::read_csv(path), ParseError);
    std::ofstream(path) << "nonsense\n";
    EXPECT_THROW(MetricsLog::read_csv(path), ParseError);
    std::filesystem::remove(path);
}

TEST(Pipeline, DeterministicUnderSeed) {
    const auto p = small_problem();
    const auto cfg = small_config();
    const auto a = train_pipeline(cfg, p.graph, p.split);
    const auto b = train_pipeline(cfg, p.graph, p.split);
    EXPECT_EQ(a.log.to_csv(false), b.log.to_csv(false));
    EXPECT_EQ(a.probabilities, b.probabilities);
    auto pa = const_cast<PipelineResult&>(a).stage2.parameters();
    auto pb = const_cast<PipelineResult&>(b).stage2.parameters();
    for (std::size_t i = 0; i < pa.size(); ++i) EXPECT_EQ(*pa[i].value, *pb[i].value);

    TrainConfig other = cfg;
    other.seed = 1;
    EXPECT_NE(train_pipeline(other, p.graph, p.split).log.to_csv(false), a.log.to_csv(false));
}

TEST(Pipeline, LogsEveryEpochAndPhases) {
    const auto p = small_problem();
    auto cfg = small_config();
    cfg.phase1_epochs = 5;
    std::vector<std::size_t> seen;
    const auto r = train_pipeline(cfg, p.graph, p.split,
                                  [&](const EpochRecord& e) { seen.push_back(e.epoch); });
    ASSERT_EQ(r.log.size(), 12u);
    EXPECT_EQ(seen.size(), 12u);
    for (std::size_t i = 0; i < 12; ++i) EXPECT_EQ(r.log.records()[i].epoch, i + 1);
    // lr decays within a phase and restarts for the second.
    EXPECT_DOUBLE_EQ(r.log.records()[1].lr, 0.1 * cfg.gamma);
    EXPECT_EQ(r.log.records()[5].lr, 0.1);
    EXPECT_EQ(r.conceptual.weights.rows(), p.graph.node_count());
    for (double acc : {r.accuracy.train, r.accuracy.val, r.accuracy.test}) {
        EXPECT_GE(acc, 0.0);
        EXPECT_LE(acc, 1.0);
    }
}

TEST(Pipeline, FullBatchIgnoresOrder) {
    const auto p = small_problem();
    auto cfg = small_config();
    cfg.momentum = 0.0;
    cfg.gamma = 1.0;
    const std::size_t n_train = mask_count(p.split.train_mask);
    std::string reference;
    for (std::size_t bs : {std::size_t{0}, n_train, 10 * n_train}) {
        cfg.batch_size = bs;
        const std::string csv = train_pipeline(cfg, p.graph, p.split).log.to_csv(false);
        if (reference.empty()) reference = csv;
        EXPECT_EQ(csv, reference) << "batch_size " << bs;
    }
}

TEST(Pipeline, PhaseALossFiniteAndTrendingDown) {
    const auto p = small_problem(11);
    auto cfg = small_config();
    cfg.epochs = 80;
    cfg.phase1_epochs = 70;
    const auto r = train_pipeline(cfg, p.graph, p.split);
    const auto& rec = r.log.records();
    for (const auto& e : rec) EXPECT_TRUE(std::isfinite(e.train_loss));
    for (std::size_t t = 0; t + 30 < 70; ++t) {
        EXPECT_LT(rec[t + 30].train_loss, rec[t].train_loss) << "window from epoch " << t + 1;
    }
}

TEST(Pipeline, RejectsBadInputs) {
    const auto p = small_problem();
    auto cfg = small_config();
    DataSplit bad = p.split;
    bad.train_mask.pop_back();
    EXPECT_THROW(train_pipeline(cfg, p.graph, bad), DimensionError);
    cfg.momentum = 2.0;
    EXPECT_THROW(train_pipeline(cfg, p.graph, p.split), ConfigError);
}

TEST(Pipeline, OptionalModesRun) {
    const auto p = small_problem();
    auto cfg = small_config();
    cfg.stochastic_concept_pass = true;
    cfg.joint_finetune = true;
    const auto a = train_pipeline(cfg, p.graph, p.split);
    const auto b = train_pipeline(cfg, p.graph, p.split);
    EXPECT_EQ(a.log.to_csv(false), b.log.to_csv(false));
}

TEST(Baseline, DeterministicAndLearns) {
    const auto p = small_problem();
    auto cfg = small_config();
    cfg.epochs = 30;
    const auto a = train_baseline_gcn(cfg, p.graph, p.split);
    const auto b = train_baseline_gcn(cfg, p.graph, p.split);
    EXPECT_EQ(a.log.to_csv(false), b.log.to_csv(false));
    EXPECT_EQ(a.log.size(), 30u);
    EXPECT_GT(a.accuracy.train, 0.8);
    const auto ctx = GraphContext::build(p.graph, cfg.row_normalize_features);
    EXPECT_EQ(baseline_forward(a.model, ctx), a.probabilities);
}
