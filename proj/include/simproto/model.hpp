#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "simproto/contrastive.hpp"
#include "simproto/dataset_io.hpp"
#include "simproto/label_softening.hpp"
#include "simproto/types.hpp"

namespace simproto {

// Affine map applied as X * weight + bias, so weight is (in x out).
struct DenseLayer {
  Matrix weight;
  Vector bias;
};

// Rectified hidden layers followed by a linear logit layer.
class MlpClassifier {
 public:
  MlpClassifier() = default;
  // All parameters zero. dims = {input, hidden..., classes}.
  explicit MlpClassifier(std::vector<int> dims);

  // Uniform fan-in initialization U(-1/sqrt(in), 1/sqrt(in)) drawn from seed.
  static MlpClassifier initialized(std::vector<int> dims, std::uint64_t seed);

  const std::vector<int>& dims() const { return dims_; }
  int input_dim() const { return dims_.front(); }
  int num_classes() const { return dims_.back(); }
  std::size_t hidden_layers() const { return layers_.size() - 1; }
  std::size_t parameter_count() const;

  std::vector<DenseLayer>& layers() { return layers_; }
  const std::vector<DenseLayer>& layers() const { return layers_; }

  Matrix forward(const Matrix& features) const;

  // activations[0] is the input, activations[k] the output of layer k (post-ReLU for
  // hidden layers), activations.back() the logits.
  std::vector<Matrix> forward_trace(const Matrix& features) const;

  // Output of the last hidden layer. Throws UnsupportedModel without one.
  Matrix penultimate(const Matrix& features) const;

  void save(const std::filesystem::path& file) const;
  static MlpClassifier load(const std::filesystem::path& file);

 private:
  std::vector<int> dims_;
  std::vector<DenseLayer> layers_;
};

using ModelGradients = std::vector<DenseLayer>;

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double weight_decay = 0.0;  // L2 term added to the gradient before the moments
};

class AdamOptimizer {
 public:
  AdamOptimizer(const MlpClassifier& model, AdamConfig config);

  void step(MlpClassifier& model, const ModelGradients& grads);
  std::int64_t steps() const { return steps_; }

 private:
  AdamConfig config_;
  std::int64_t steps_ = 0;
  ModelGradients first_;
  ModelGradients second_;
};

struct ModelLoss {
  CombinedLoss loss;  // grad holds d total / d logits
  ModelGradients grads;
  Matrix logits;
};

// Composite loss of the batch backpropagated to every parameter.
ModelLoss loss_and_grad(const MlpClassifier& model, const Matrix& features,
                        std::span<const int> targets, const SoftLabelMatrix& labels,
                        const Matrix& prototype, const std::optional<BclConfig>& bcl);

struct TrainConfig {
  LabelStrategy strategy = HardStrategy{};
  std::optional<BclConfig> bcl;
  int epochs = 30;
  int batch_size = 32;
  double learning_rate = 1e-3;
  double weight_decay = 1e-5;
  std::uint64_t seed = 1;
  bool shuffle = true;
  std::vector<int> hidden{64};
};

struct TrainData {
  FeatureSet train;
  FeatureSet test;
  // C x C similarity prototype; required by GLS and prototype-sourced BCL.
  Matrix prototype;
};

struct ConfusionMatrix {
  int num_classes = 0;
  std::vector<std::size_t> counts;  // row-major, [true][predicted]

  std::size_t at(int truth, int predicted) const {
    return counts[static_cast<std::size_t>(truth) * num_classes + predicted];
  }
  std::size_t total() const;
  std::size_t correct() const;
};

struct Evaluation {
  double accuracy = 0.0;
  ConfusionMatrix confusion;
};

struct EpochRecord {
  int epoch = 0;
  double sigma = 1.0;  // scheduled confidence; past the cap the labels in effect are hard
  bool hard = true;
  double loss = 0.0;   // mean over batches of the backpropagated composite
  double cross_entropy = 0.0;
  double inter = 0.0;
  double intra = 0.0;
  double train_accuracy = 0.0;
  double test_accuracy = 0.0;
};

struct TrainReport {
  std::vector<EpochRecord> epochs;
  double test_accuracy = 0.0;
  ConfusionMatrix confusion;
  double wall_seconds = 0.0;
};

// Argmax per row, ties to the lowest class index.
std::vector<int> predict(const Matrix& logits);
Evaluation evaluate_logits(const Matrix& logits, std::span<const int> labels, int num_classes);
Evaluation evaluate(const MlpClassifier& model, const FeatureSet& split);

// Labels used at a given epoch under a strategy. prototype is ignored unless GLS.
SoftLabelMatrix strategy_labels(const LabelStrategy& strategy, const Matrix& prototype,
                                int num_classes, int epoch, double* sigma = nullptr,
                                bool* hard = nullptr);

TrainReport train(MlpClassifier& model, const TrainData& data, const TrainConfig& config);

struct Embeddings {
  std::vector<int> labels;  // 0-based
  Matrix values;
};

Embeddings export_embeddings(const MlpClassifier& model, const FeatureSet& split);

struct GradCheckCase {
  std::string description;
  std::string labels;      // "hard" or "gls"
  std::string indexing;    // "-" when BCL is off
  std::string similarity;
  std::string reduction;
  std::string level;       // "logits" or "parameters"
  int batch = 0;
  int classes = 0;
  double max_rel_error = 0.0;
  bool ce_only() const { return reduction == "-"; }
};

struct GradCheckReport {
  std::vector<GradCheckCase> cases;
  double worst_ce_only = 0.0;
  double worst_composite = 0.0;
};

struct GradCheckOptions {
  int trials = 32;
  double step = 1e-5;
  std::uint64_t seed = 1;
  bool parameters = true;  // also check through a small network
};

// Central differences against analytic gradients. Each entry's error is
// |analytic - numeric| / max(scale, kGradCheckFloor), where scale is the largest
// magnitude in the gradient tensor being checked (logits, or one weight/bias array).
inline constexpr double kGradCheckFloor = 1e-6;
double relative_error(double analytic, double numeric, double scale);
GradCheckReport gradient_check(const GradCheckOptions& options);

}  // namespace simproto
