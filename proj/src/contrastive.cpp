#include "simproto/contrastive.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "simproto/error.hpp"

namespace simproto {

std::string_view to_string(ThresholdIndexing v) {
  return v == ThresholdIndexing::EntryLookup ? "entry" : "row_product";
}

std::string_view to_string(PairSimilarity v) {
  return v == PairSimilarity::CosineOnLogits ? "cosine" : "euclidean";
}

std::string_view to_string(BclReduction v) {
  switch (v) {
    case BclReduction::MeanInter: return "mean_inter";
    case BclReduction::NonzeroInterIntra: return "nonzero_inter_intra";
    case BclReduction::MeanInterIntra: return "mean_inter_intra";
    case BclReduction::NonzeroInter: return "nonzero_inter";
  }
  return "?";
}

std::string_view to_string(ThresholdSource v) {
  return v == ThresholdSource::Prototype ? "prototype" : "traditional";
}

ThresholdIndexing parse_indexing(std::string_view text) {
  if (text == "entry") return ThresholdIndexing::EntryLookup;
  if (text == "row_product") return ThresholdIndexing::RowProduct;
  throw Error(ErrorCode::Config, "unknown indexing '" + std::string(text) +
                                     "' (expected entry|row_product)");
}

PairSimilarity parse_pair_similarity(std::string_view text) {
  if (text == "cosine") return PairSimilarity::CosineOnLogits;
  if (text == "euclidean") return PairSimilarity::EuclideanExpOnLogits;
  throw Error(ErrorCode::Config, "unknown pair similarity '" + std::string(text) +
                                     "' (expected cosine|euclidean)");
}

BclReduction parse_reduction(std::string_view text) {
  for (auto r : {BclReduction::MeanInter, BclReduction::NonzeroInterIntra,
                 BclReduction::MeanInterIntra, BclReduction::NonzeroInter}) {
    if (text == to_string(r)) return r;
  }
  throw Error(ErrorCode::Config,
              "unknown reduction '" + std::string(text) +
                  "' (expected mean_inter|nonzero_inter_intra|mean_inter_intra|nonzero_inter)");
}

ThresholdSource parse_threshold_source(std::string_view text) {
  if (text == "prototype") return ThresholdSource::Prototype;
  if (text == "traditional") return ThresholdSource::Traditional;
  throw Error(ErrorCode::Config, "unknown threshold source '" + std::string(text) +
                                     "' (expected prototype|traditional)");
}

std::string describe(const BclConfig& c) {
  std::ostringstream ss;
  ss << to_string(c.source) << "/" << to_string(c.indexing) << "/" << to_string(c.similarity)
     << "/" << to_string(c.reduction);
  if (c.weight != 1.0) ss << "/w=" << c.weight;
  return ss.str();
}

Matrix self_similarity_matrix(const Matrix& s) {
  if (s.rows() != s.cols() || s.rows() < 2) {
    throw Error(ErrorCode::DimensionMismatch, "self-similarity needs a square matrix with C >= 2");
  }
  const auto c = s.rows();
  Matrix out = Matrix::Zero(c, c);
  for (Eigen::Index i = 0; i < c; ++i) {
    double best = -std::numeric_limits<double>::infinity();
    for (Eigen::Index k = 0; k < c; ++k) {
      if (k != i) best = std::max(best, s(i, k));
    }
    out(i, i) = best;
  }
  return out;
}

namespace {

void check_targets(std::span<const int> targets, Eigen::Index classes) {
  for (int t : targets) {
    if (t < 0 || t >= classes) {
      throw Error(ErrorCode::OutOfRange, "target " + std::to_string(t + 1) + " outside [1, " +
                                             std::to_string(classes) + "]");
    }
  }
}

void check_same_shape(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw Error(ErrorCode::DimensionMismatch, "pair matrices differ in shape");
  }
}

}  // namespace

Matrix batch_thresholds(const Matrix& s, std::span<const int> targets, ThresholdIndexing indexing) {
  check_targets(targets, s.rows());
  const auto b = static_cast<Eigen::Index>(targets.size());
  Matrix out(b, b);
  for (Eigen::Index i = 0; i < b; ++i) {
    const int ti = targets[static_cast<std::size_t>(i)];
    for (Eigen::Index j = 0; j < b; ++j) {
      const int tj = targets[static_cast<std::size_t>(j)];
      out(i, j) = indexing == ThresholdIndexing::EntryLookup ? s(ti, tj)
                                                             : s.row(ti).dot(s.row(tj));
    }
  }
  return out;
}

Matrix pairwise_similarity(const Matrix& z, PairSimilarity mode) {
  const auto b = z.rows();
  Matrix p(b, b);
  if (mode == PairSimilarity::CosineOnLogits) {
    Vector norms(b);
    for (Eigen::Index i = 0; i < b; ++i) {
      norms(i) = z.row(i).norm();
      if (!(norms(i) > 0.0)) {
        throw Error(ErrorCode::DegenerateRow,
                    "logit row " + std::to_string(i + 1) + " has zero norm");
      }
    }
    for (Eigen::Index i = 0; i < b; ++i) {
      p(i, i) = 1.0;
      for (Eigen::Index j = i + 1; j < b; ++j) {
        const double v = std::clamp(z.row(i).dot(z.row(j)) / (norms(i) * norms(j)), -1.0, 1.0);
        p(i, j) = v;
        p(j, i) = v;
      }
    }
  } else {
    for (Eigen::Index i = 0; i < b; ++i) {
      p(i, i) = 1.0;
      for (Eigen::Index j = i + 1; j < b; ++j) {
        const double v = std::exp(-(z.row(i) - z.row(j)).norm());
        p(i, j) = v;
        p(j, i) = v;
      }
    }
  }
  return p;
}

Matrix pairwise_similarity_backward(const Matrix& z, const Matrix& p, const Matrix& grad_p,
                                    PairSimilarity mode) {
  const auto b = z.rows();
  Matrix grad = Matrix::Zero(b, z.cols());
  if (mode == PairSimilarity::CosineOnLogits) {
    Vector norms(b);
    for (Eigen::Index i = 0; i < b; ++i) norms(i) = z.row(i).norm();
    for (Eigen::Index i = 0; i < b; ++i) {
      const auto ui = z.row(i) / norms(i);
      for (Eigen::Index j = 0; j < b; ++j) {
        if (i == j) continue;
        // P_ij depends on z_i through both (i, j) and (j, i).
        const double g = grad_p(i, j) + grad_p(j, i);
        if (g == 0.0) continue;
        const auto uj = z.row(j) / norms(j);
        grad.row(i) += g * (uj - p(i, j) * ui) / norms(i);
      }
    }
  } else {
    for (Eigen::Index i = 0; i < b; ++i) {
      for (Eigen::Index j = 0; j < b; ++j) {
        if (i == j) continue;
        const double g = grad_p(i, j) + grad_p(j, i);
        if (g == 0.0) continue;
        const auto diff = z.row(i) - z.row(j);
        const double d = diff.norm();
        if (d == 0.0) continue;  // subgradient 0 at coincident rows
        grad.row(i) -= g * p(i, j) * diff / d;
      }
    }
  }
  return grad;
}

Matrix inter_hinge(const Matrix& p, const Matrix& thresholds) {
  check_same_shape(p, thresholds);
  return (p - thresholds).cwiseMax(0.0);
}

Matrix intra_hinge(const Matrix& p, const Matrix& intra_thresholds) {
  check_same_shape(p, intra_thresholds);
  return (intra_thresholds - p).cwiseMax(0.0);
}

double reduce(const Matrix& hinge, Reduction reduction) {
  const double sum = hinge.sum();
  if (reduction == Reduction::Mean) return sum / static_cast<double>(hinge.size());
  const auto nonzero = (hinge.array() > 0.0).count();
  return nonzero == 0 ? 0.0 : sum / static_cast<double>(nonzero);
}

double inter_loss(const Matrix& p, const Matrix& thresholds, Reduction reduction) {
  return reduce(inter_hinge(p, thresholds), reduction);
}

double intra_loss(const Matrix& p, const Matrix& intra_thresholds, Reduction reduction) {
  return reduce(intra_hinge(p, intra_thresholds), reduction);
}

PairThresholds cl_baseline_thresholds(std::span<const int> targets) {
  const auto b = static_cast<Eigen::Index>(targets.size());
  Matrix same(b, b);
  for (Eigen::Index i = 0; i < b; ++i) {
    for (Eigen::Index j = 0; j < b; ++j) {
      same(i, j) = targets[static_cast<std::size_t>(i)] == targets[static_cast<std::size_t>(j)];
    }
  }
  return {same, same};
}

PairThresholds make_thresholds(const Matrix& s, std::span<const int> targets,
                               const BclConfig& config) {
  if (config.source == ThresholdSource::Traditional) {
    check_targets(targets, s.rows());
    return cl_baseline_thresholds(targets);
  }
  PairThresholds out;
  out.inter = batch_thresholds(s, targets, config.indexing);
  if (config.uses_intra()) {
    out.intra = batch_thresholds(self_similarity_matrix(s), targets, config.indexing);
  }
  return out;
}

ContrastiveTerms contrastive_terms(const Matrix& p, const PairThresholds& thresholds,
                                   const BclConfig& config) {
  ContrastiveTerms out;
  const Matrix hi = inter_hinge(p, thresholds.inter);
  const Eigen::ArrayXXd active_inter = (hi.array() > 0.0).cast<double>();
  Matrix ha;
  Eigen::ArrayXXd active_intra = Eigen::ArrayXXd::Zero(p.rows(), p.cols());
  if (config.uses_intra()) {
    ha = intra_hinge(p, thresholds.intra);
    active_intra = (ha.array() > 0.0).cast<double>();
  }

  double denom = static_cast<double>(p.size());
  if (config.base_reduction() == Reduction::Nonzero) {
    const auto active = config.uses_intra() ? (hi.array() + ha.array() > 0.0).count()
                                            : (hi.array() > 0.0).count();
    denom = static_cast<double>(active);
  }
  out.grad_p = Matrix::Zero(p.rows(), p.cols());
  if (denom == 0.0) return out;

  out.inter = hi.sum() / denom;
  if (config.uses_intra()) out.intra = ha.sum() / denom;
  // Hinge subgradient is 0 at the kink; Nonzero denominators are locally constant.
  out.grad_p = ((active_inter - active_intra) * (config.weight / denom)).matrix();
  return out;
}

CombinedLoss combined_loss(const BatchPredictions& batch, const SoftLabelMatrix& labels,
                           const Matrix& prototype, const std::optional<BclConfig>& bcl) {
  auto ce = soft_cross_entropy(batch.logits, batch.targets, labels);
  CombinedLoss out;
  out.cross_entropy = ce.loss;
  out.grad = std::move(ce.grad);
  if (bcl) {
    const Matrix p = pairwise_similarity(batch.logits, bcl->similarity);
    const auto thresholds = make_thresholds(prototype, batch.targets, *bcl);
    const auto terms = contrastive_terms(p, thresholds, *bcl);
    out.inter = terms.inter;
    out.intra = terms.intra;
    out.grad += pairwise_similarity_backward(batch.logits, p, terms.grad_p, bcl->similarity);
  }
  out.total = out.cross_entropy + (bcl ? bcl->weight : 0.0) * (out.inter + out.intra);
  return out;
}

}  // namespace simproto
