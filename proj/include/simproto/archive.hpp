#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include "simproto/prototype.hpp"
#include "simproto/semantic_stats.hpp"

namespace simproto {

inline constexpr std::string_view kToolVersion = "0.1.0";

// Per-class representation table: header `class,N,s1..sL`, one row per class.
std::string summary_csv(const DatasetSemanticSummary& summary);
void write_summary_csv(const std::filesystem::path& file, const DatasetSemanticSummary& summary);
DatasetSemanticSummary read_summary_csv(const std::filesystem::path& file);

// 64-bit FNV-1a, rendered as 16 lowercase hex digits.
std::string fnv1a_hex(std::string_view bytes);

// proto.csv holds the matrix, proto.json the metadata.
struct PrototypeArchive {
  SimilarityPrototype prototype;
  int num_labels = 0;
  std::string digest;  // fnv1a_hex of the summary CSV the matrix was built from
  std::string tool_version{kToolVersion};
};

PrototypeArchive make_archive(const DatasetSemanticSummary& summary, CorrelationMetric metric);
void save_archive(const std::filesystem::path& dir, const PrototypeArchive& archive);
// Checks that both files agree and that the matrix is a valid prototype.
PrototypeArchive load_archive(const std::filesystem::path& dir);

}  // namespace simproto
