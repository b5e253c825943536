#pragma once

#include <span>
#include <string>
#include <variant>

#include "simproto/types.hpp"

namespace simproto {

// Row c is the training target distribution for class c.
struct SoftLabelMatrix {
  Matrix rows;

  int num_classes() const { return static_cast<int>(rows.rows()); }
  double confidence(int c) const { return rows(c, c); }
};

inline constexpr double kDefaultConfidenceCap = 0.99;
inline constexpr int kDefaultStep = 20;

// Divides each row by its own sum. Throws DegenerateRow on a non-positive sum.
SoftLabelMatrix row_normalize(const Matrix& s);

// S[c][c] / sum_i S[i][c] for 0-based class c.
double target_confidence(const Matrix& s, int c);

// Rewrites every diagonal to sigma/(1-sigma) times the row's off-diagonal mass, then
// row-normalizes, so each class keeps exactly sigma on itself and shares 1-sigma
// across the others in proportion to s.
SoftLabelMatrix unify_confidence(const Matrix& s, double sigma_prime);

// Largest target confidence of row_normalize(s).
double sigma0_of(const Matrix& s);

// Linear confidence ramp from sigma0 at epoch 1 to cap at epoch step+1; hard labels after.
struct SofteningSchedule {
  double sigma0 = 0.0;
  int step = kDefaultStep;
  double cap = kDefaultConfidenceCap;

  static SofteningSchedule from_prototype(const Matrix& s, int step,
                                          double cap = kDefaultConfidenceCap);

  // Throws InvalidEpoch for epoch < 1.
  double sigma_at(int epoch) const;
  // sigma_at(epoch) > cap, decided on the integer epoch count so rounding cannot flip it.
  bool is_hard(int epoch) const;
};

SoftLabelMatrix epoch_labels(const Matrix& s, const SofteningSchedule& schedule, int epoch);
SoftLabelMatrix epoch_labels(const Matrix& s, int epoch, int step,
                             double cap = kDefaultConfidenceCap);

SoftLabelMatrix hard_labels(int num_classes);

// 1 - eps + eps/C on the diagonal and eps/C elsewhere.
SoftLabelMatrix lsr_labels(int num_classes, double epsilon);

struct LossAndGrad {
  double loss = 0.0;
  Matrix grad;  // d loss / d logits, B x C
};

// Mean over the batch of -sum_j labels[target][j] * log softmax(logits)[j].
// targets are 0-based. Throws Numeric on non-finite logits.
LossAndGrad soft_cross_entropy(const Matrix& logits, std::span<const int> targets,
                               const SoftLabelMatrix& labels);

struct HardStrategy {};
struct LsrStrategy {
  double epsilon = 0.1;
};
struct GlsStrategy {
  int step = kDefaultStep;
  double cap = kDefaultConfidenceCap;
};
using LabelStrategy = std::variant<HardStrategy, LsrStrategy, GlsStrategy>;

std::string describe(const LabelStrategy& strategy);

}  // namespace simproto
