#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "simproto/dataset_io.hpp"
#include "simproto/prototype.hpp"
#include "simproto/semantic_stats.hpp"
#include "simproto/types.hpp"

namespace simproto {

// Per-region object probabilities for one synthetic scene class.
struct ClassProfile {
  int class_id = 0;  // 1-based
  std::string class_name;
  std::vector<double> occurrence;  // length L, sums to 1
  int regions = 1;                 // K regions per map
};

// Designated confusable pair (0-based class indices). overlap is the total shared
// occurrence mass sum_l min(p_a[l], p_b[l]).
struct PairOverlap {
  int a = 0;
  int b = 1;
  double overlap = 0.0;
};

// Every class puts `background` mass on a block of labels common to all classes
// (walls, floors); designated pairs additionally share a private block so that their
// overlap reaches the requested value. All other pairs overlap by exactly `background`.
struct ConfusableSpec {
  std::vector<PairOverlap> pairs;
  double background = 0.0;

  // The default benchmark: pairs (1,2) and (3,4) at 0.8 overlap.
  static ConfusableSpec benchmark();
};

std::vector<ClassProfile> make_confusable_profiles(int num_classes, int num_labels,
                                                   const ConfusableSpec& spec, int regions,
                                                   std::uint64_t seed);

// Matrix of sum_l min(p_i[l], p_j[l]); the diagonal is 1.
Matrix profile_overlap(const std::vector<ClassProfile>& profiles);

// K contiguous raster-order regions, each filled with one label drawn from the profile.
LabelMap sample_label_map(const ClassProfile& profile, int width, int height, std::uint64_t seed);

// Probability that each label appears in a sampled map: 1 - (1 - p_l)^K.
std::vector<double> analytic_presence(const ClassProfile& profile, int regions);

SimilarityPrototype oracle_prototype(const std::vector<ClassProfile>& profiles, int regions,
                                     CorrelationMetric metric);

struct SampleOptions {
  int per_class = 300;
  int width = 12;
  int height = 12;
  double feature_noise = 0.1;     // Gaussian sigma added to the histogram features
  int distractors = 100;          // appended pure-noise dimensions
  double distractor_noise = 1.0;  // sigma of the distractor dimensions
  double split_fraction = 0.5;    // share of each class used for training
  std::uint64_t seed = 1;
};

struct SyntheticDataset {
  int num_labels = 0;
  std::vector<ClassProfile> profiles;
  std::vector<ClassMaps> maps;  // per class, instance order
  std::vector<std::size_t> train_counts;  // maps 0..train_count-1 are training
  FeatureSet train;
  FeatureSet test;
  std::uint64_t seed = 0;

  // Semantic summary over the training maps only.
  DatasetSemanticSummary train_summary() const;
};

// Features are the label histogram of each map (pixel fractions) plus noise, then the
// distractor dimensions. Deterministic per seed.
SyntheticDataset sample_dataset(const std::vector<ClassProfile>& profiles,
                                const SampleOptions& options);

// Writes the on-disk layout read by Manifest / summarize_dataset / read_features.
void write_dataset(const SyntheticDataset& dataset, const std::filesystem::path& root);

}  // namespace simproto
