#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "simproto/label_softening.hpp"
#include "simproto/types.hpp"

namespace simproto {

// How a sample pair's threshold is read from the C x C prototype.
enum class ThresholdIndexing {
  EntryLookup,  // S[t_i][t_j]
  RowProduct,   // S[t_i] . S[t_j]
};

enum class PairSimilarity { CosineOnLogits, EuclideanExpOnLogits };

enum class BclReduction { MeanInter, NonzeroInterIntra, MeanInterIntra, NonzeroInter };

// Prototype-derived thresholds, or the classic contrastive targets (1 same class, 0 otherwise).
enum class ThresholdSource { Prototype, Traditional };

enum class Reduction { Mean, Nonzero };

struct BclConfig {
  ThresholdIndexing indexing = ThresholdIndexing::EntryLookup;
  PairSimilarity similarity = PairSimilarity::CosineOnLogits;
  BclReduction reduction = BclReduction::MeanInter;
  ThresholdSource source = ThresholdSource::Prototype;
  double weight = 1.0;

  bool uses_intra() const {
    return reduction == BclReduction::NonzeroInterIntra || reduction == BclReduction::MeanInterIntra;
  }
  Reduction base_reduction() const {
    return reduction == BclReduction::MeanInter || reduction == BclReduction::MeanInterIntra
               ? Reduction::Mean
               : Reduction::Nonzero;
  }
};

std::string_view to_string(ThresholdIndexing v);
std::string_view to_string(PairSimilarity v);
std::string_view to_string(BclReduction v);
std::string_view to_string(ThresholdSource v);
ThresholdIndexing parse_indexing(std::string_view text);
PairSimilarity parse_pair_similarity(std::string_view text);
BclReduction parse_reduction(std::string_view text);
ThresholdSource parse_threshold_source(std::string_view text);
std::string describe(const BclConfig& config);

// Logits plus 0-based targets.
struct BatchPredictions {
  Matrix logits;
  std::vector<int> targets;

  int batch_size() const { return static_cast<int>(logits.rows()); }
};

// Diagonal c = max_{k != c} S[c][k]; zero elsewhere.
Matrix self_similarity_matrix(const Matrix& s);

Matrix batch_thresholds(const Matrix& s, std::span<const int> targets, ThresholdIndexing indexing);

// B x B similarity of logit rows. Diagonal is exactly 1 in both modes.
// Throws DegenerateRow for a zero-norm row in cosine mode.
Matrix pairwise_similarity(const Matrix& logits, PairSimilarity mode);

// Chain rule through pairwise_similarity: given dL/dP, returns dL/dlogits.
Matrix pairwise_similarity_backward(const Matrix& logits, const Matrix& p_matrix,
                                    const Matrix& grad_p, PairSimilarity mode);

Matrix inter_hinge(const Matrix& p_matrix, const Matrix& thresholds);
Matrix intra_hinge(const Matrix& p_matrix, const Matrix& intra_thresholds);

// Mean: sum / B^2. Nonzero: sum / (number of strictly positive entries), 0 when none.
double reduce(const Matrix& hinge, Reduction reduction);

double inter_loss(const Matrix& p_matrix, const Matrix& thresholds, Reduction reduction);
double intra_loss(const Matrix& p_matrix, const Matrix& intra_thresholds, Reduction reduction);

struct PairThresholds {
  Matrix inter;
  Matrix intra;
};

PairThresholds cl_baseline_thresholds(std::span<const int> targets);

// Thresholds for one batch under the config's source and indexing.
PairThresholds make_thresholds(const Matrix& s, std::span<const int> targets,
                               const BclConfig& config);

struct ContrastiveTerms {
  double inter = 0.0;
  double intra = 0.0;
  Matrix grad_p;  // d(weight * (inter + intra)) / dP
};

// Reduced hinge terms. For NonzeroInterIntra both hinges share one denominator, the
// count of pairs violating either threshold; inter + intra is the reduced total.
ContrastiveTerms contrastive_terms(const Matrix& p_matrix, const PairThresholds& thresholds,
                                   const BclConfig& config);

struct CombinedLoss {
  double total = 0.0;
  double cross_entropy = 0.0;
  double inter = 0.0;
  double intra = 0.0;
  Matrix grad;  // d total / d logits
};

// Soft cross-entropy plus the weighted batch contrastive loss (omitted when bcl is empty).
CombinedLoss combined_loss(const BatchPredictions& batch, const SoftLabelMatrix& labels,
                           const Matrix& prototype, const std::optional<BclConfig>& bcl);

}  // namespace simproto
