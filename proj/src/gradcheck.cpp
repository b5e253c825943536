#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <vector>

#include "simproto/error.hpp"
#include "simproto/model.hpp"
#include "simproto/random.hpp"

namespace simproto {

double relative_error(double analytic, double numeric, double scale) {
  return std::abs(analytic - numeric) / std::max(scale, kGradCheckFloor);
}

namespace {

// Finite differences are meaningless across a hinge; instances whose off-diagonal
// pairs sit within this distance of a threshold, or whose hidden units sit this close
// to the ReLU kink, are redrawn.
constexpr double kKinkMargin = 1e-3;

Matrix random_prototype(int c, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> off(0.05, 0.9);
  Matrix s = Matrix::Identity(c, c);
  for (int i = 0; i < c; ++i) {
    for (int j = i + 1; j < c; ++j) {
      s(i, j) = off(rng);
      s(j, i) = s(i, j);
    }
  }
  return s;
}

double hinge_margin(const Matrix& logits, std::span<const int> targets, const Matrix& prototype,
                    const BclConfig& bcl) {
  const Matrix p = pairwise_similarity(logits, bcl.similarity);
  const auto thr = make_thresholds(prototype, targets, bcl);
  // exp(-d) never reaches 0, so thresholds at or below 0 cannot be crossed.
  const double floor = bcl.similarity == PairSimilarity::EuclideanExpOnLogits ? 0.0 : -1.0;
  const auto distance = [floor](double pij, double t) {
    return t <= floor ? std::numeric_limits<double>::infinity() : std::abs(pij - t);
  };
  double margin = std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < p.rows(); ++i) {
    for (Eigen::Index j = 0; j < p.cols(); ++j) {
      if (i == j) continue;
      margin = std::min(margin, distance(p(i, j), thr.inter(i, j)));
      if (bcl.uses_intra()) margin = std::min(margin, distance(p(i, j), thr.intra(i, j)));
    }
  }
  return margin;
}

double relu_margin(const MlpClassifier& model, const Matrix& x) {
  double margin = std::numeric_limits<double>::infinity();
  Matrix a = x;
  const auto& layers = model.layers();
  for (std::size_t k = 0; k + 1 < layers.size(); ++k) {
    Matrix z = a * layers[k].weight;
    z.rowwise() += layers[k].bias.transpose();
    margin = std::min(margin, z.cwiseAbs().minCoeff());
    a = z.cwiseMax(0.0);
  }
  return margin;
}

double max_error(const double* analytic, double* params, Eigen::Index n, double h,
                 const std::function<double()>& loss) {
  std::vector<double> numeric(static_cast<std::size_t>(n));
  double scale = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double saved = params[i];
    params[i] = saved + h;
    const double up = loss();
    params[i] = saved - h;
    const double down = loss();
    params[i] = saved;
    numeric[static_cast<std::size_t>(i)] = (up - down) / (2.0 * h);
    scale = std::max({scale, std::abs(analytic[i]), std::abs(numeric[static_cast<std::size_t>(i)])});
  }
  double worst = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    worst = std::max(worst, relative_error(analytic[i], numeric[static_cast<std::size_t>(i)], scale));
  }
  return worst;
}

struct Instance {
  int batch = 0;
  int classes = 0;
  Matrix prototype;
  SoftLabelMatrix labels;
  std::vector<int> targets;
};

Instance draw_instance(std::mt19937_64& rng, bool gls) {
  Instance inst;
  inst.batch = std::uniform_int_distribution<int>(0, 1)(rng) ? 8 : 2;
  inst.classes = std::uniform_int_distribution<int>(0, 1)(rng) ? 7 : 3;
  inst.prototype = random_prototype(inst.classes, rng);
  if (gls) {
    const int step = 5;
    const int epoch = std::uniform_int_distribution<int>(1, step + 1)(rng);
    inst.labels = epoch_labels(inst.prototype, epoch, step);
  } else {
    inst.labels = hard_labels(inst.classes);
  }
  std::uniform_int_distribution<int> cls(0, inst.classes - 1);
  inst.targets.resize(static_cast<std::size_t>(inst.batch));
  for (auto& t : inst.targets) t = cls(rng);
  // Keep at least one same-class pair so intra terms are exercised.
  inst.targets.back() = inst.targets.front();
  return inst;
}

GradCheckCase describe_case(const Instance& inst, bool gls, const std::optional<BclConfig>& bcl,
                            const char* level) {
  GradCheckCase c;
  c.labels = gls ? "gls" : "hard";
  c.indexing = bcl ? std::string(to_string(bcl->indexing)) : "-";
  c.similarity = bcl ? std::string(to_string(bcl->similarity)) : "-";
  c.reduction = bcl ? std::string(to_string(bcl->reduction)) : "-";
  c.level = level;
  c.batch = inst.batch;
  c.classes = inst.classes;
  c.description = c.labels + (bcl ? "+bcl(" + describe(*bcl) + ")" : "") + " B=" +
                  std::to_string(inst.batch) + " C=" + std::to_string(inst.classes) + " " + level;
  return c;
}

double check_logits(const Instance& inst, const std::optional<BclConfig>& bcl, double h,
                    std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  BatchPredictions batch;
  batch.targets = inst.targets;
  for (int attempt = 0;; ++attempt) {
    batch.logits.resize(inst.batch, inst.classes);
    for (Eigen::Index i = 0; i < batch.logits.size(); ++i) batch.logits.data()[i] = normal(rng);
    if (!bcl || hinge_margin(batch.logits, batch.targets, inst.prototype, *bcl) > kKinkMargin) break;
    if (attempt > 1000) throw Error(ErrorCode::Numeric, "could not draw a kink-free instance");
  }
  const auto analytic = combined_loss(batch, inst.labels, inst.prototype, bcl);
  return max_error(analytic.grad.data(), batch.logits.data(), batch.logits.size(), h, [&] {
    return combined_loss(batch, inst.labels, inst.prototype, bcl).total;
  });
}

double check_parameters(const Instance& inst, const std::optional<BclConfig>& bcl, double h,
                        std::mt19937_64& rng) {
  constexpr int kInput = 4;
  constexpr int kHidden = 5;
  std::normal_distribution<double> normal(0.0, 1.0);
  MlpClassifier model;
  Matrix x(inst.batch, kInput);
  for (int attempt = 0;; ++attempt) {
    model = MlpClassifier::initialized({kInput, kHidden, inst.classes}, rng());
    // Larger output weights spread the logits so pair similarities are not all near 1.
    model.layers().back().weight *= 3.0;
    for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = normal(rng);
    const bool relu_ok = relu_margin(model, x) > kKinkMargin;
    const bool hinge_ok =
        !bcl || hinge_margin(model.forward(x), inst.targets, inst.prototype, *bcl) > kKinkMargin;
    if (relu_ok && hinge_ok) break;
    if (attempt > 1000) throw Error(ErrorCode::Numeric, "could not draw a kink-free instance");
  }
  const auto analytic = loss_and_grad(model, x, inst.targets, inst.labels, inst.prototype, bcl);
  auto loss = [&] {
    BatchPredictions batch{model.forward(x), inst.targets};
    return combined_loss(batch, inst.labels, inst.prototype, bcl).total;
  };
  double worst = 0.0;
  for (std::size_t k = 0; k < model.layers().size(); ++k) {
    auto& layer = model.layers()[k];
    worst = std::max(worst, max_error(analytic.grads[k].weight.data(), layer.weight.data(),
                                      layer.weight.size(), h, loss));
    worst = std::max(worst, max_error(analytic.grads[k].bias.data(), layer.bias.data(),
                                      layer.bias.size(), h, loss));
  }
  return worst;
}

}  // namespace

GradCheckReport gradient_check(const GradCheckOptions& options) {
  if (options.trials < 1) throw Error(ErrorCode::Config, "gradient check needs >= 1 trial");
  GradCheckReport report;
  constexpr BclReduction kReductions[] = {BclReduction::MeanInter, BclReduction::NonzeroInterIntra,
                                          BclReduction::MeanInterIntra, BclReduction::NonzeroInter};
  for (int t = 0; t < options.trials; ++t) {
    auto rng = make_engine(options.seed, {stream::kGradCheck, static_cast<std::uint64_t>(t)});
    // Trial index enumerates the axes so 32 trials cover every combination.
    const bool gls = t % 2 == 1;
    BclConfig bcl;
    bcl.indexing = (t / 2) % 2 ? ThresholdIndexing::RowProduct : ThresholdIndexing::EntryLookup;
    bcl.similarity =
        (t / 4) % 2 ? PairSimilarity::EuclideanExpOnLogits : PairSimilarity::CosineOnLogits;
    bcl.reduction = kReductions[(t / 8) % 4];
    const Instance inst = draw_instance(rng, gls);

    for (const auto& cfg : {std::optional<BclConfig>{}, std::optional<BclConfig>{bcl}}) {
      auto c = describe_case(inst, gls, cfg, "logits");
      c.max_rel_error = check_logits(inst, cfg, options.step, rng);
      report.cases.push_back(c);
      if (options.parameters) {
        auto p = describe_case(inst, gls, cfg, "parameters");
        p.max_rel_error = check_parameters(inst, cfg, options.step, rng);
        report.cases.push_back(p);
      }
    }
  }
  for (const auto& c : report.cases) {
    auto& worst = c.ce_only() ? report.worst_ce_only : report.worst_composite;
    worst = std::max(worst, c.max_rel_error);
  }
  return report;
}

}  // namespace simproto
