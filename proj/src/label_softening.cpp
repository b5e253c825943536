#include "simproto/label_softening.hpp"

#include <cmath>
#include <sstream>

#include "simproto/error.hpp"

namespace simproto {

namespace {

void require_square(const Matrix& s) {
  if (s.rows() != s.cols() || s.rows() < 1) {
    throw Error(ErrorCode::DimensionMismatch, "expected a non-empty square matrix");
  }
}

void require_confidence(double sigma) {
  if (!(sigma > 0.0 && sigma < 1.0)) {
    throw Error(ErrorCode::InvalidConfidence,
                "confidence " + std::to_string(sigma) + " is outside (0, 1)");
  }
}

}  // namespace

SoftLabelMatrix row_normalize(const Matrix& s) {
  require_square(s);
  SoftLabelMatrix out{s};
  for (Eigen::Index i = 0; i < s.rows(); ++i) {
    const double sum = s.row(i).sum();
    if (!(sum > 0.0) || !std::isfinite(sum)) {
      throw Error(ErrorCode::DegenerateRow, "row " + std::to_string(i + 1) + " sums to " +
                                                std::to_string(sum));
    }
    out.rows.row(i) /= sum;
  }
  return out;
}

double target_confidence(const Matrix& s, int c) {
  require_square(s);
  const double denom = s.col(c).sum();
  if (!(denom > 0.0)) {
    throw Error(ErrorCode::DegenerateRow, "column " + std::to_string(c + 1) + " sums to zero");
  }
  return s(c, c) / denom;
}

SoftLabelMatrix unify_confidence(const Matrix& s, double sigma_prime) {
  require_square(s);
  require_confidence(sigma_prime);
  Matrix rewritten = s;
  const double ratio = sigma_prime / (1.0 - sigma_prime);
  for (Eigen::Index c = 0; c < s.rows(); ++c) {
    const double off = s.row(c).sum() - s(c, c);
    if (!(off > 0.0)) {
      throw Error(ErrorCode::DegenerateRow, "class " + std::to_string(c + 1) +
                                                " has no similarity mass to other classes");
    }
    rewritten(c, c) = ratio * off;
  }
  return row_normalize(rewritten);
}

double sigma0_of(const Matrix& s) {
  const auto normalized = row_normalize(s);
  return normalized.rows.diagonal().maxCoeff();
}

SofteningSchedule SofteningSchedule::from_prototype(const Matrix& s, int step, double cap) {
  if (step < 1) throw Error(ErrorCode::Config, "STEP must be >= 1");
  require_confidence(cap);
  SofteningSchedule schedule{sigma0_of(s), step, cap};
  if (!(schedule.sigma0 < cap)) {
    throw Error(ErrorCode::InvalidConfidence,
                "initial confidence " + std::to_string(schedule.sigma0) +
                    " is not below the cap; the prototype carries no inter-class similarity");
  }
  return schedule;
}

double SofteningSchedule::sigma_at(int epoch) const {
  if (epoch < 1) throw Error(ErrorCode::InvalidEpoch, "epoch " + std::to_string(epoch) + " < 1");
  if (epoch - 1 == step) return cap;
  return sigma0 + (cap - sigma0) * static_cast<double>(epoch - 1) / static_cast<double>(step);
}

bool SofteningSchedule::is_hard(int epoch) const {
  if (epoch < 1) throw Error(ErrorCode::InvalidEpoch, "epoch " + std::to_string(epoch) + " < 1");
  return epoch - 1 > step;
}

SoftLabelMatrix epoch_labels(const Matrix& s, const SofteningSchedule& schedule, int epoch) {
  if (schedule.is_hard(epoch)) return hard_labels(static_cast<int>(s.rows()));
  return unify_confidence(s, schedule.sigma_at(epoch));
}

SoftLabelMatrix epoch_labels(const Matrix& s, int epoch, int step, double cap) {
  if (epoch < 1) throw Error(ErrorCode::InvalidEpoch, "epoch " + std::to_string(epoch) + " < 1");
  return epoch_labels(s, SofteningSchedule::from_prototype(s, step, cap), epoch);
}

SoftLabelMatrix hard_labels(int num_classes) {
  return SoftLabelMatrix{Matrix::Identity(num_classes, num_classes)};
}

SoftLabelMatrix lsr_labels(int num_classes, double epsilon) {
  if (num_classes < 2) throw Error(ErrorCode::DimensionMismatch, "LSR needs C >= 2");
  if (!(epsilon > 0.0 && epsilon < 1.0)) {
    throw Error(ErrorCode::InvalidConfidence,
                "smoothing weight " + std::to_string(epsilon) + " is outside (0, 1)");
  }
  const double off = epsilon / num_classes;
  SoftLabelMatrix out{Matrix::Constant(num_classes, num_classes, off)};
  out.rows.diagonal().setConstant(1.0 - epsilon + off);
  return out;
}

LossAndGrad soft_cross_entropy(const Matrix& logits, std::span<const int> targets,
                               const SoftLabelMatrix& labels) {
  const auto batch = logits.rows();
  const auto classes = logits.cols();
  if (static_cast<std::size_t>(batch) != targets.size() || batch == 0) {
    throw Error(ErrorCode::DimensionMismatch, "logit rows and target count differ");
  }
  if (labels.rows.rows() != classes) {
    throw Error(ErrorCode::DimensionMismatch, "label matrix does not match class count");
  }
  if (!logits.allFinite()) throw Error(ErrorCode::Numeric, "non-finite logits");

  LossAndGrad out;
  out.grad.resize(batch, classes);
  const double inv_b = 1.0 / static_cast<double>(batch);
  double total = 0.0;
  for (Eigen::Index i = 0; i < batch; ++i) {
    const int t = targets[static_cast<std::size_t>(i)];
    if (t < 0 || t >= classes) {
      throw Error(ErrorCode::OutOfRange, "target " + std::to_string(t + 1) + " outside [1, " +
                                             std::to_string(classes) + "]");
    }
    const auto z = logits.row(i);
    const double m = z.maxCoeff();
    const double lse = m + std::log((z.array() - m).exp().sum());
    double sample = 0.0;
    for (Eigen::Index j = 0; j < classes; ++j) {
      const double q = labels.rows(t, j);
      const double log_p = z(j) - lse;
      if (q != 0.0) sample -= q * log_p;
      out.grad(i, j) = (std::exp(log_p) - q) * inv_b;
    }
    total += sample;
  }
  out.loss = total * inv_b;
  return out;
}

std::string describe(const LabelStrategy& strategy) {
  std::ostringstream ss;
  std::visit(
      [&](const auto& s) {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, HardStrategy>) {
          ss << "hard";
        } else if constexpr (std::is_same_v<T, LsrStrategy>) {
          ss << "lsr(eps=" << s.epsilon << ")";
        } else {
          ss << "gls(step=" << s.step << ", cap=" << s.cap << ")";
        }
      },
      strategy);
  return ss.str();
}

}  // namespace simproto
