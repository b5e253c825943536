#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "simproto/semantic_stats.hpp"
#include "simproto/types.hpp"

namespace simproto {

// Dataset layout on disk:
//   <root>/manifest             text; label count and class list
//   <root>/<class_name>/<k>.pgm label maps, k = 0 .. count-1
//   <root>/features_train.csv   label,f1..fD
//   <root>/features_test.csv
struct ManifestClass {
  std::string name;
  std::size_t count = 0;
  // Maps 0 .. train_count-1 are the training split.
  std::size_t train_count = 0;
};

struct Manifest {
  int num_labels = 0;
  std::vector<ManifestClass> classes;

  static Manifest read(const std::filesystem::path& file);
  void write(const std::filesystem::path& file) const;

  static std::filesystem::path map_path(const std::filesystem::path& root,
                                        const ManifestClass& cls, std::size_t index);
};

struct PgmImage {
  LabelMap map;
  int maxval = 0;
};

// Accepts P2 (ascii) and P5 (binary, 8- or 16-bit big-endian) with maxval <= 65535.
PgmImage read_pgm(const std::filesystem::path& file);
// Binary P5 unless ascii is set. maxval must cover every pixel.
void write_pgm(const std::filesystem::path& file, const LabelMap& map, int maxval,
               bool ascii = false);

// Feature rows with 0-based class labels in memory and 1-based labels on disk.
struct FeatureSet {
  Matrix features;
  std::vector<int> labels;

  std::size_t size() const { return labels.size(); }
};

FeatureSet read_features(const std::filesystem::path& file);
void write_features(const std::filesystem::path& file, const FeatureSet& set);

// 17 significant digits; parse_double recovers the identical value.
std::string format_double(double value);
double parse_double(std::string_view text, std::string_view context);

std::vector<std::string> split_csv_line(std::string_view line);

}  // namespace simproto
