#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "simproto/contrastive.hpp"
#include "simproto/datagen.hpp"
#include "simproto/label_softening.hpp"
#include "simproto/model.hpp"
#include "simproto/prototype.hpp"

namespace simproto {

// Generator settings for one synthetic benchmark dataset.
struct DataSpec {
  int classes = 7;
  int labels = 30;
  int regions = 12;
  ConfusableSpec confusable = ConfusableSpec::benchmark();
  SampleOptions sample;
  CorrelationMetric metric = CorrelationMetric::CosineSimilarity;
};

struct GeneratedData {
  SyntheticDataset dataset;
  SimilarityPrototype prototype;  // built from the training maps
  TrainData train_data;
};

GeneratedData generate_train_data(const DataSpec& spec, std::uint64_t seed);

// A named combination of label strategy and optional contrastive term.
struct StrategySpec {
  std::string name;
  LabelStrategy labels = HardStrategy{};
  std::optional<BclConfig> bcl;
};

// Grammar: <labels>[+bcl|+cl] with labels in {hard, lsr, gls}; "bcl" and "cl" alone
// imply hard labels. "+cl" is the traditional contrastive baseline.
StrategySpec parse_strategy(std::string_view token, const LsrStrategy& lsr, const GlsStrategy& gls,
                            const BclConfig& bcl);

struct BenchRun {
  std::string strategy;
  std::uint64_t seed = 0;
  TrainReport report;
};

struct BenchRow {
  std::string strategy;
  std::size_t runs = 0;
  double mean = 0.0;
  std::optional<double> stddev;  // sample stddev, absent for a single run
  double delta_mean = 0.0;       // paired mean difference against the baseline
  int wins = 0;
  int losses = 0;
  int ties = 0;
  double sign_p = 1.0;  // exact two-sided sign test, ties dropped
};

struct BenchSetup {
  std::vector<StrategySpec> strategies;
  std::vector<std::uint64_t> seeds;
  TrainConfig train;  // strategy/bcl/seed fields are overwritten per run
  // Either a generator spec (fresh dataset per seed) or a fixed dataset.
  std::optional<DataSpec> generator;
  std::optional<TrainData> fixed;
  unsigned threads = 1;
};

// Runs in (seed, strategy) order regardless of thread count.
std::vector<BenchRun> run_bench(const BenchSetup& setup);

// One row per listed strategy, repeats included. Baseline is the strategy named "hard"
// when present, else the first listed.
std::vector<BenchRow> summarize_bench(const std::vector<BenchRun>& runs,
                                      const std::vector<std::string>& strategy_order);

double sign_test_p(int wins, int losses);

}  // namespace simproto
