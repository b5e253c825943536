#pragma once

#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "simproto/semantic_stats.hpp"
#include "simproto/types.hpp"

namespace simproto {

enum class CorrelationMetric { CosineSimilarity, EuclideanExp };

std::string_view to_string(CorrelationMetric metric);
CorrelationMetric parse_metric(std::string_view text);

// Symmetric inter-class correlation matrix with an exact unit diagonal.
struct SimilarityPrototype {
  std::vector<std::string> class_names;
  CorrelationMetric metric = CorrelationMetric::CosineSimilarity;
  Matrix matrix;

  int num_classes() const { return static_cast<int>(matrix.rows()); }
};

// (a . b) / (|a| |b|). Throws DegenerateRepresentation on a zero-norm input.
double cosine_correlation(std::span<const double> a, std::span<const double> b);

// exp(-|a - b|_2).
double euclidean_correlation(std::span<const double> a, std::span<const double> b);

double correlation(CorrelationMetric metric, std::span<const double> a, std::span<const double> b);

SimilarityPrototype build_prototype(const DatasetSemanticSummary& summary, CorrelationMetric metric);

// Same construction from bare vectors; used by oracles that have no summary.
SimilarityPrototype build_prototype(const std::vector<std::vector<double>>& representations,
                                    std::vector<std::string> class_names, CorrelationMetric metric);

// Throws unless the matrix is square, symmetric within tol, has a unit diagonal and entries in [0, 1].
void validate_prototype(const Matrix& matrix, double symmetry_tol = 1e-12);

}  // namespace simproto
