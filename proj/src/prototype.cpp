#include "simproto/prototype.hpp"

#include <cmath>

#include "simproto/error.hpp"

namespace simproto {

std::string_view to_string(CorrelationMetric metric) {
  return metric == CorrelationMetric::CosineSimilarity ? "cosine" : "euclidean";
}

CorrelationMetric parse_metric(std::string_view text) {
  if (text == "cosine") return CorrelationMetric::CosineSimilarity;
  if (text == "euclidean") return CorrelationMetric::EuclideanExp;
  throw Error(ErrorCode::Config, "unknown metric '" + std::string(text) +
                                     "' (expected cosine|euclidean)");
}

namespace {

void require_same_length(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) {
    throw Error(ErrorCode::DimensionMismatch, "vectors of length " + std::to_string(a.size()) +
                                                  " and " + std::to_string(b.size()));
  }
}

}  // namespace

double cosine_correlation(std::span<const double> a, std::span<const double> b) {
  require_same_length(a, b);
  double dot = 0.0;
  double na = 0.0;
  double nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (!(na > 0.0) || !(nb > 0.0)) {
    throw Error(ErrorCode::DegenerateRepresentation, "cosine of a zero-norm vector");
  }
  return dot / (std::sqrt(na) * std::sqrt(nb));
}

double euclidean_correlation(std::span<const double> a, std::span<const double> b) {
  require_same_length(a, b);
  double sq = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    sq += d * d;
  }
  return std::exp(-std::sqrt(sq));
}

double correlation(CorrelationMetric metric, std::span<const double> a, std::span<const double> b) {
  return metric == CorrelationMetric::CosineSimilarity ? cosine_correlation(a, b)
                                                       : euclidean_correlation(a, b);
}

SimilarityPrototype build_prototype(const std::vector<std::vector<double>>& reps,
                                    std::vector<std::string> class_names, CorrelationMetric metric) {
  const auto c = static_cast<Eigen::Index>(reps.size());
  if (c < 2) throw Error(ErrorCode::DimensionMismatch, "a prototype needs at least 2 classes");
  if (class_names.size() != reps.size()) {
    throw Error(ErrorCode::DimensionMismatch, "class name count differs from class count");
  }
  for (std::size_t i = 0; i < reps.size(); ++i) {
    if (reps[i].size() != reps.front().size()) {
      throw Error(ErrorCode::DimensionMismatch, "class '" + class_names[i] + "' has length " +
                                                    std::to_string(reps[i].size()));
    }
    double norm = 0.0;
    for (double v : reps[i]) norm += v * v;
    if (!(norm > 0.0)) {
      throw Error(ErrorCode::DegenerateRepresentation,
                  "class '" + class_names[i] + "' has an all-zero semantic representation");
    }
  }

  SimilarityPrototype proto;
  proto.class_names = std::move(class_names);
  proto.metric = metric;
  proto.matrix = Matrix::Identity(c, c);
  for (Eigen::Index i = 0; i < c; ++i) {
    for (Eigen::Index j = i + 1; j < c; ++j) {
      double v = correlation(metric, reps[static_cast<std::size_t>(i)],
                             reps[static_cast<std::size_t>(j)]);
      // Nonnegative inputs keep cosine in [0, 1]; clamp the last-ulp overshoot.
      if (v > 1.0) v = 1.0;
      if (v < 0.0) v = 0.0;
      proto.matrix(i, j) = v;
      proto.matrix(j, i) = v;
    }
  }
  return proto;
}

SimilarityPrototype build_prototype(const DatasetSemanticSummary& summary, CorrelationMetric metric) {
  std::vector<std::vector<double>> reps;
  reps.reserve(summary.representations.size());
  for (const auto& r : summary.representations) reps.push_back(r.values);
  return build_prototype(reps, summary.class_names(), metric);
}

void validate_prototype(const Matrix& m, double symmetry_tol) {
  if (m.rows() != m.cols() || m.rows() < 2) {
    throw Error(ErrorCode::DimensionMismatch, "prototype must be square with C >= 2");
  }
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    if (m(i, i) != 1.0) {
      throw Error(ErrorCode::Spec, "prototype diagonal (" + std::to_string(i + 1) + ") is not 1");
    }
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      const double v = m(i, j);
      if (!std::isfinite(v) || v < 0.0 || v > 1.0) {
        throw Error(ErrorCode::Spec, "prototype entry outside [0, 1]");
      }
      if (std::abs(v - m(j, i)) > symmetry_tol) {
        throw Error(ErrorCode::Spec, "prototype is not symmetric at (" + std::to_string(i + 1) +
                                         ", " + std::to_string(j + 1) + ")");
      }
    }
  }
}

}  // namespace simproto
