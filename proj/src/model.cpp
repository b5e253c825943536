#include "simproto/model.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "simproto/error.hpp"
#include "simproto/random.hpp"

namespace simproto {

MlpClassifier::MlpClassifier(std::vector<int> dims) : dims_(std::move(dims)) {
  if (dims_.size() < 2) {
    throw Error(ErrorCode::DimensionMismatch, "an MLP needs input and output dims");
  }
  for (int d : dims_) {
    if (d < 1) throw Error(ErrorCode::DimensionMismatch, "layer dims must be positive");
  }
  for (std::size_t k = 0; k + 1 < dims_.size(); ++k) {
    layers_.push_back({Matrix::Zero(dims_[k], dims_[k + 1]), Vector::Zero(dims_[k + 1])});
  }
}

MlpClassifier MlpClassifier::initialized(std::vector<int> dims, std::uint64_t seed) {
  MlpClassifier model(std::move(dims));
  auto rng = make_engine(seed, {stream::kInit});
  for (auto& layer : model.layers_) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(layer.weight.rows()));
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (Eigen::Index i = 0; i < layer.weight.size(); ++i) layer.weight.data()[i] = dist(rng);
    for (Eigen::Index i = 0; i < layer.bias.size(); ++i) layer.bias(i) = dist(rng);
  }
  return model;
}

std::size_t MlpClassifier::parameter_count() const {
  std::size_t n = 0;
  for (const auto& l : layers_) n += static_cast<std::size_t>(l.weight.size() + l.bias.size());
  return n;
}

std::vector<Matrix> MlpClassifier::forward_trace(const Matrix& features) const {
  if (features.cols() != input_dim()) {
    throw Error(ErrorCode::DimensionMismatch, "features have " + std::to_string(features.cols()) +
                                                  " columns, model expects " +
                                                  std::to_string(input_dim()));
  }
  std::vector<Matrix> acts;
  acts.reserve(layers_.size() + 1);
  acts.push_back(features);
  for (std::size_t k = 0; k < layers_.size(); ++k) {
    Matrix z = acts.back() * layers_[k].weight;
    z.rowwise() += layers_[k].bias.transpose();
    if (k + 1 < layers_.size()) z = z.cwiseMax(0.0);
    acts.push_back(std::move(z));
  }
  return acts;
}

Matrix MlpClassifier::forward(const Matrix& features) const {
  return std::move(forward_trace(features).back());
}

Matrix MlpClassifier::penultimate(const Matrix& features) const {
  if (hidden_layers() == 0) {
    throw Error(ErrorCode::UnsupportedModel, "model has no hidden layer to export");
  }
  auto acts = forward_trace(features);
  return std::move(acts[acts.size() - 2]);
}

namespace {

void write_values(std::ostream& out, const double* data, Eigen::Index rows, Eigen::Index cols) {
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index j = 0; j < cols; ++j) {
      out << (j ? " " : "") << format_double(data[i * cols + j]);
    }
    out << "\n";
  }
}

void read_values(std::istream& in, double* data, Eigen::Index n, const std::string& context) {
  std::string token;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (!(in >> token)) throw Error(ErrorCode::Ingestion, context + ": truncated parameters");
    data[i] = parse_double(token, context);
  }
}

void expect_token(std::istream& in, const std::string& want, const std::string& context) {
  std::string got;
  if (!(in >> got) || got != want) {
    throw Error(ErrorCode::Ingestion, context + ": expected '" + want + "', got '" + got + "'");
  }
}

}  // namespace

void MlpClassifier::save(const std::filesystem::path& file) const {
  std::ofstream out(file, std::ios::binary);
  if (!out) throw Error(ErrorCode::Ingestion, file.string() + ": cannot write checkpoint");
  out << "simproto-checkpoint v1\n";
  out << "dims " << dims_.size();
  for (int d : dims_) out << " " << d;
  out << "\n";
  for (std::size_t k = 0; k < layers_.size(); ++k) {
    const auto& l = layers_[k];
    out << "weight " << k << " " << l.weight.rows() << " " << l.weight.cols() << "\n";
    write_values(out, l.weight.data(), l.weight.rows(), l.weight.cols());
    out << "bias " << k << " " << l.bias.size() << "\n";
    write_values(out, l.bias.data(), 1, l.bias.size());
  }
}

MlpClassifier MlpClassifier::load(const std::filesystem::path& file) {
  std::ifstream in(file);
  const auto context = file.string();
  if (!in) throw Error(ErrorCode::Ingestion, context + ": cannot open checkpoint");
  expect_token(in, "simproto-checkpoint", context);
  expect_token(in, "v1", context);
  expect_token(in, "dims", context);
  std::size_t n = 0;
  if (!(in >> n) || n < 2 || n > 64) throw Error(ErrorCode::Ingestion, context + ": bad dims");
  std::vector<int> dims(n);
  for (auto& d : dims) {
    if (!(in >> d) || d < 1) throw Error(ErrorCode::Ingestion, context + ": bad dims");
  }
  MlpClassifier model(dims);
  for (std::size_t k = 0; k < model.layers_.size(); ++k) {
    auto& l = model.layers_[k];
    expect_token(in, "weight", context);
    expect_token(in, std::to_string(k), context);
    expect_token(in, std::to_string(l.weight.rows()), context);
    expect_token(in, std::to_string(l.weight.cols()), context);
    read_values(in, l.weight.data(), l.weight.size(), context);
    expect_token(in, "bias", context);
    expect_token(in, std::to_string(k), context);
    expect_token(in, std::to_string(l.bias.size()), context);
    read_values(in, l.bias.data(), l.bias.size(), context);
  }
  return model;
}

AdamOptimizer::AdamOptimizer(const MlpClassifier& model, AdamConfig config) : config_(config) {
  for (const auto& l : model.layers()) {
    first_.push_back({Matrix::Zero(l.weight.rows(), l.weight.cols()), Vector::Zero(l.bias.size())});
  }
  second_ = first_;
}

namespace {

template <typename Param, typename Moment>
void adam_update(Param& theta, const Param& grad, Moment& m, Moment& v, const AdamConfig& c,
                 double bias1, double bias2) {
  auto g = (grad.array() + c.weight_decay * theta.array()).eval();
  m.array() = c.beta1 * m.array() + (1.0 - c.beta1) * g;
  v.array() = c.beta2 * v.array() + (1.0 - c.beta2) * g.square();
  theta.array() -= c.learning_rate * (m.array() / bias1) /
                   ((v.array() / bias2).sqrt() + c.epsilon);
}

}  // namespace

void AdamOptimizer::step(MlpClassifier& model, const ModelGradients& grads) {
  auto& layers = model.layers();
  if (grads.size() != layers.size()) {
    throw Error(ErrorCode::DimensionMismatch, "gradient layer count differs from model");
  }
  ++steps_;
  const double bias1 = 1.0 - std::pow(config_.beta1, static_cast<double>(steps_));
  const double bias2 = 1.0 - std::pow(config_.beta2, static_cast<double>(steps_));
  for (std::size_t k = 0; k < layers.size(); ++k) {
    adam_update(layers[k].weight, grads[k].weight, first_[k].weight, second_[k].weight, config_,
                bias1, bias2);
    adam_update(layers[k].bias, grads[k].bias, first_[k].bias, second_[k].bias, config_, bias1,
                bias2);
  }
}

ModelLoss loss_and_grad(const MlpClassifier& model, const Matrix& features,
                        std::span<const int> targets, const SoftLabelMatrix& labels,
                        const Matrix& prototype, const std::optional<BclConfig>& bcl) {
  const auto acts = model.forward_trace(features);
  BatchPredictions batch{acts.back(), std::vector<int>(targets.begin(), targets.end())};
  ModelLoss out;
  out.loss = combined_loss(batch, labels, prototype, bcl);
  out.logits = std::move(batch.logits);
  if (!std::isfinite(out.loss.total) || !out.loss.grad.allFinite()) {
    throw Error(ErrorCode::Numeric, "non-finite loss or gradient");
  }

  const auto& layers = model.layers();
  out.grads.resize(layers.size());
  Matrix delta = out.loss.grad;
  for (std::size_t k = layers.size(); k-- > 0;) {
    out.grads[k].weight = acts[k].transpose() * delta;
    out.grads[k].bias = delta.colwise().sum().transpose();
    if (k == 0) break;
    Matrix upstream = delta * layers[k].weight.transpose();
    // acts[k] is post-ReLU; it is positive exactly where the pre-activation was.
    delta = (acts[k].array() > 0.0).select(upstream, 0.0);
  }
  return out;
}

std::size_t ConfusionMatrix::total() const {
  return std::accumulate(counts.begin(), counts.end(), std::size_t{0});
}

std::size_t ConfusionMatrix::correct() const {
  std::size_t n = 0;
  for (int c = 0; c < num_classes; ++c) n += at(c, c);
  return n;
}

std::vector<int> predict(const Matrix& logits) {
  std::vector<int> out(static_cast<std::size_t>(logits.rows()));
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    Eigen::Index best = 0;
    for (Eigen::Index j = 1; j < logits.cols(); ++j) {
      if (logits(i, j) > logits(i, best)) best = j;
    }
    out[static_cast<std::size_t>(i)] = static_cast<int>(best);
  }
  return out;
}

Evaluation evaluate_logits(const Matrix& logits, std::span<const int> labels, int num_classes) {
  if (labels.empty()) throw Error(ErrorCode::EmptyDataset, "cannot evaluate an empty split");
  if (static_cast<std::size_t>(logits.rows()) != labels.size()) {
    throw Error(ErrorCode::DimensionMismatch, "logit rows and label count differ");
  }
  Evaluation ev;
  ev.confusion.num_classes = num_classes;
  ev.confusion.counts.assign(static_cast<std::size_t>(num_classes) * num_classes, 0);
  const auto predicted = predict(logits);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || labels[i] >= num_classes) {
      throw Error(ErrorCode::OutOfRange, "label " + std::to_string(labels[i] + 1) + " outside [1, " +
                                             std::to_string(num_classes) + "]");
    }
    ++ev.confusion.counts[static_cast<std::size_t>(labels[i]) * num_classes + predicted[i]];
  }
  ev.accuracy = static_cast<double>(ev.confusion.correct()) / static_cast<double>(labels.size());
  return ev;
}

Evaluation evaluate(const MlpClassifier& model, const FeatureSet& split) {
  if (split.size() == 0) throw Error(ErrorCode::EmptyDataset, "cannot evaluate an empty split");
  return evaluate_logits(model.forward(split.features), split.labels, model.num_classes());
}

SoftLabelMatrix strategy_labels(const LabelStrategy& strategy, const Matrix& prototype,
                                int num_classes, int epoch, double* sigma, bool* hard) {
  SoftLabelMatrix labels;
  double s = 1.0;
  bool h = true;
  if (std::holds_alternative<HardStrategy>(strategy)) {
    labels = hard_labels(num_classes);
  } else if (const auto* lsr = std::get_if<LsrStrategy>(&strategy)) {
    labels = lsr_labels(num_classes, lsr->epsilon);
    s = labels.confidence(0);
    h = false;
  } else {
    const auto& gls = std::get<GlsStrategy>(strategy);
    if (prototype.rows() != num_classes) {
      throw Error(ErrorCode::DimensionMismatch, "GLS needs a C x C prototype");
    }
    const auto schedule = SofteningSchedule::from_prototype(prototype, gls.step, gls.cap);
    labels = epoch_labels(prototype, schedule, epoch);
    s = schedule.sigma_at(epoch);
    h = schedule.is_hard(epoch);
  }
  if (sigma) *sigma = s;
  if (hard) *hard = h;
  return labels;
}

namespace {

void validate(const TrainData& data, const TrainConfig& config, const MlpClassifier& model) {
  if (data.train.size() == 0) throw Error(ErrorCode::EmptyDataset, "training split is empty");
  if (data.test.size() == 0) throw Error(ErrorCode::EmptyDataset, "test split is empty");
  if (config.epochs < 0 || config.batch_size < 1) {
    throw Error(ErrorCode::Config, "epochs must be >= 0 and batch size >= 1");
  }
  const bool needs_prototype =
      std::holds_alternative<GlsStrategy>(config.strategy) ||
      (config.bcl && config.bcl->source == ThresholdSource::Prototype);
  if (needs_prototype && data.prototype.rows() != model.num_classes()) {
    throw Error(ErrorCode::DimensionMismatch, "strategy requires a C x C similarity prototype");
  }
  if (const auto* gls = std::get_if<GlsStrategy>(&config.strategy); gls && gls->step < 1) {
    throw Error(ErrorCode::Config, "STEP must be >= 1");
  }
}

}  // namespace

TrainReport train(MlpClassifier& model, const TrainData& data, const TrainConfig& config) {
  validate(data, config, model);
  const auto start = std::chrono::steady_clock::now();
  const int classes = model.num_classes();
  AdamOptimizer optimizer(model, {config.learning_rate, 0.9, 0.999, 1e-8, config.weight_decay});

  const auto n = static_cast<Eigen::Index>(data.train.size());
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  Matrix batch_x;
  std::vector<int> batch_y;

  TrainReport report;
  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    EpochRecord rec;
    rec.epoch = epoch;
    const auto labels =
        strategy_labels(config.strategy, data.prototype, classes, epoch, &rec.sigma, &rec.hard);

    std::iota(order.begin(), order.end(), Eigen::Index{0});
    if (config.shuffle) {
      auto rng = make_engine(config.seed, {stream::kShuffle, static_cast<std::uint64_t>(epoch)});
      std::shuffle(order.begin(), order.end(), rng);
    }

    std::size_t batches = 0;
    std::size_t correct = 0;
    for (Eigen::Index begin = 0; begin < n; begin += config.batch_size) {
      const Eigen::Index size = std::min<Eigen::Index>(config.batch_size, n - begin);
      batch_x.resize(size, data.train.features.cols());
      batch_y.resize(static_cast<std::size_t>(size));
      for (Eigen::Index i = 0; i < size; ++i) {
        const auto src = order[static_cast<std::size_t>(begin + i)];
        batch_x.row(i) = data.train.features.row(src);
        batch_y[static_cast<std::size_t>(i)] = data.train.labels[static_cast<std::size_t>(src)];
      }
      auto result = loss_and_grad(model, batch_x, batch_y, labels, data.prototype, config.bcl);
      const auto predicted = predict(result.logits);
      for (std::size_t i = 0; i < batch_y.size(); ++i) correct += predicted[i] == batch_y[i];
      optimizer.step(model, result.grads);

      rec.loss += result.loss.total;
      rec.cross_entropy += result.loss.cross_entropy;
      rec.inter += result.loss.inter;
      rec.intra += result.loss.intra;
      ++batches;
    }
    const double nb = static_cast<double>(batches);
    rec.loss /= nb;
    rec.cross_entropy /= nb;
    rec.inter /= nb;
    rec.intra /= nb;
    rec.train_accuracy = static_cast<double>(correct) / static_cast<double>(n);
    rec.test_accuracy = evaluate(model, data.test).accuracy;
    report.epochs.push_back(rec);
  }

  const auto final_eval = evaluate(model, data.test);
  report.test_accuracy = final_eval.accuracy;
  report.confusion = final_eval.confusion;
  report.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return report;
}

Embeddings export_embeddings(const MlpClassifier& model, const FeatureSet& split) {
  return {split.labels, model.penultimate(split.features)};
}

}  // namespace simproto
