#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace simproto {

struct Manifest;

// Per-pixel semantic labels, 1-based in [1, L], stored row-major (h * width + w).
struct LabelMap {
  int width = 0;
  int height = 0;
  std::vector<int> labels;

  LabelMap() = default;
  LabelMap(int w, int h, std::vector<int> pixels);

  // Builds from a list of rows, rows[h][w].
  static LabelMap from_rows(const std::vector<std::vector<int>>& rows);

  int at(int w, int h) const { return labels[static_cast<std::size_t>(h) * width + w]; }
  std::size_t pixel_count() const { return labels.size(); }
};

// Binary presence of each of the L semantic labels in one image. Slot l-1 holds label l.
struct InstanceSemanticVector {
  std::vector<std::uint8_t> values;

  std::size_t size() const { return values.size(); }
  std::size_t ones() const;
};

struct ClassSemanticRepresentation {
  int class_id = 0;  // 1-based
  std::string class_name;
  std::size_t instance_count = 0;
  std::vector<double> values;  // fraction of instances containing each label
};

struct DatasetSemanticSummary {
  int num_labels = 0;
  std::vector<ClassSemanticRepresentation> representations;

  int num_classes() const { return static_cast<int>(representations.size()); }
  std::vector<std::string> class_names() const;
};

// Throws OutOfRange naming the first pixel whose label is outside [1, L].
InstanceSemanticVector presence_vector(const LabelMap& map, int num_labels);

ClassSemanticRepresentation class_representation(int class_id, std::string class_name,
                                                 std::span<const InstanceSemanticVector> vectors);

// Integer presence counts for one class. Merging is commutative, so any
// partition of the instances produces the same representation bit-for-bit.
class PresenceAccumulator {
 public:
  explicit PresenceAccumulator(int num_labels);

  void add(const InstanceSemanticVector& v);
  void add(const LabelMap& map);
  void merge(const PresenceAccumulator& other);

  std::size_t instance_count() const { return count_; }
  const std::vector<std::uint64_t>& counts() const { return counts_; }

  // Divides once by N. Throws EmptyClass when nothing was added.
  ClassSemanticRepresentation finalize(int class_id, std::string class_name) const;

 private:
  int num_labels_;
  std::size_t count_ = 0;
  std::vector<std::uint64_t> counts_;
};

struct SummarizeOptions {
  // Worker threads for presence extraction; 1 is the sequential mode.
  unsigned threads = 1;
  // Restrict to the training prefix of each class when the manifest records one.
  bool train_only = false;
};

struct ClassMaps {
  std::string class_name;
  std::vector<LabelMap> maps;
};

DatasetSemanticSummary summarize_maps(std::span<const ClassMaps> classes, int num_labels,
                                      const SummarizeOptions& options = {});

// Reads every label map listed by the manifest under root. Ingestion errors carry the file path.
DatasetSemanticSummary summarize_dataset(const Manifest& manifest,
                                         const std::filesystem::path& root,
                                         const SummarizeOptions& options = {});

}  // namespace simproto
