#include "simproto/datagen.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "simproto/error.hpp"
#include "simproto/random.hpp"

namespace simproto {

ConfusableSpec ConfusableSpec::benchmark() {
  ConfusableSpec spec;
  spec.pairs = {{0, 1, 0.8}, {2, 3, 0.8}};
  spec.background = 0.2;
  return spec;
}

namespace {

std::vector<double> random_weights(std::size_t n, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> dist(0.5, 1.5);
  std::vector<double> w(n);
  double sum = 0.0;
  for (auto& v : w) sum += (v = dist(rng));
  for (auto& v : w) v /= sum;
  return w;
}

void validate_spec(int num_classes, const ConfusableSpec& spec) {
  if (!(spec.background >= 0.0 && spec.background <= 1.0)) {
    throw Error(ErrorCode::Spec, "background mass must be in [0, 1]");
  }
  std::set<std::pair<int, int>> seen;
  std::vector<double> shared(static_cast<std::size_t>(num_classes), spec.background);
  for (const auto& p : spec.pairs) {
    if (p.a < 0 || p.b < 0 || p.a >= num_classes || p.b >= num_classes || p.a == p.b) {
      throw Error(ErrorCode::Spec, "pair (" + std::to_string(p.a + 1) + ", " +
                                       std::to_string(p.b + 1) + ") is not a valid class pair");
    }
    if (!seen.insert({std::min(p.a, p.b), std::max(p.a, p.b)}).second) {
      throw Error(ErrorCode::Spec, "pair (" + std::to_string(p.a + 1) + ", " +
                                       std::to_string(p.b + 1) + ") listed twice");
    }
    if (!(p.overlap >= spec.background && p.overlap <= 1.0)) {
      throw Error(ErrorCode::Spec, "pair overlap must lie in [background, 1]");
    }
    shared[static_cast<std::size_t>(p.a)] += p.overlap - spec.background;
    shared[static_cast<std::size_t>(p.b)] += p.overlap - spec.background;
  }
  for (int c = 0; c < num_classes; ++c) {
    if (shared[static_cast<std::size_t>(c)] > 1.0 + 1e-12) {
      throw Error(ErrorCode::Spec, "class " + std::to_string(c + 1) + " shares mass " +
                                       std::to_string(shared[static_cast<std::size_t>(c)]) +
                                       " > 1");
    }
  }
}

}  // namespace

std::vector<ClassProfile> make_confusable_profiles(int num_classes, int num_labels,
                                                   const ConfusableSpec& spec, int regions,
                                                   std::uint64_t seed) {
  if (num_classes < 2) throw Error(ErrorCode::Spec, "need at least 2 classes");
  if (num_labels < num_classes) throw Error(ErrorCode::Spec, "need L >= C");
  if (regions < 1) throw Error(ErrorCode::Spec, "regions per map must be >= 1");
  validate_spec(num_classes, spec);

  // Label blocks: one private block per class, one per pair, one background block.
  const bool has_background = spec.background > 0.0;
  const auto blocks = static_cast<std::size_t>(num_classes) + spec.pairs.size() + (has_background ? 1 : 0);
  if (static_cast<std::size_t>(num_labels) < blocks) {
    throw Error(ErrorCode::Spec, "L=" + std::to_string(num_labels) + " cannot hold " +
                                     std::to_string(blocks) + " disjoint label blocks");
  }
  const std::size_t base = static_cast<std::size_t>(num_labels) / blocks;
  std::size_t extra = static_cast<std::size_t>(num_labels) % blocks;
  std::vector<std::pair<std::size_t, std::size_t>> ranges;  // [begin, end)
  std::size_t cursor = 0;
  for (std::size_t b = 0; b < blocks; ++b) {
    const std::size_t size = base + (extra > 0 ? 1 : 0);
    if (extra > 0) --extra;
    ranges.emplace_back(cursor, cursor + size);
    cursor += size;
  }

  auto rng = make_engine(seed, {stream::kProfile});
  std::vector<std::vector<double>> block_weights;
  for (const auto& [begin, end] : ranges) block_weights.push_back(random_weights(end - begin, rng));

  std::vector<ClassProfile> profiles(static_cast<std::size_t>(num_classes));
  for (int c = 0; c < num_classes; ++c) {
    auto& p = profiles[static_cast<std::size_t>(c)];
    p.class_id = c + 1;
    p.class_name = "class_" + std::to_string(c + 1);
    p.regions = regions;
    p.occurrence.assign(static_cast<std::size_t>(num_labels), 0.0);
  }
  auto spread = [&](ClassProfile& p, std::size_t block, double mass) {
    const auto [begin, end] = ranges[block];
    for (std::size_t l = begin; l < end; ++l) p.occurrence[l] += mass * block_weights[block][l - begin];
  };

  std::vector<double> used(static_cast<std::size_t>(num_classes), 0.0);
  const std::size_t pair_block0 = static_cast<std::size_t>(num_classes);
  for (std::size_t k = 0; k < spec.pairs.size(); ++k) {
    const auto& pair = spec.pairs[k];
    const double mass = pair.overlap - spec.background;
    for (int c : {pair.a, pair.b}) {
      spread(profiles[static_cast<std::size_t>(c)], pair_block0 + k, mass);
      used[static_cast<std::size_t>(c)] += mass;
    }
  }
  for (int c = 0; c < num_classes; ++c) {
    auto& p = profiles[static_cast<std::size_t>(c)];
    if (has_background) spread(p, blocks - 1, spec.background);
    const double own = std::max(0.0, 1.0 - spec.background - used[static_cast<std::size_t>(c)]);
    spread(p, static_cast<std::size_t>(c), own);
  }
  return profiles;
}

Matrix profile_overlap(const std::vector<ClassProfile>& profiles) {
  const auto c = static_cast<Eigen::Index>(profiles.size());
  Matrix out = Matrix::Identity(c, c);
  for (Eigen::Index i = 0; i < c; ++i) {
    for (Eigen::Index j = i + 1; j < c; ++j) {
      const auto& a = profiles[static_cast<std::size_t>(i)].occurrence;
      const auto& b = profiles[static_cast<std::size_t>(j)].occurrence;
      double shared = 0.0;
      for (std::size_t l = 0; l < a.size(); ++l) shared += std::min(a[l], b[l]);
      out(i, j) = out(j, i) = shared;
    }
  }
  return out;
}

LabelMap sample_label_map(const ClassProfile& profile, int width, int height, std::uint64_t seed) {
  if (width < 1 || height < 1) throw Error(ErrorCode::Geometry, "map must be at least 1x1");
  const std::size_t pixels = static_cast<std::size_t>(width) * static_cast<std::size_t>(height);
  const auto k = static_cast<std::size_t>(profile.regions);
  if (k < 1 || pixels % k != 0) {
    throw Error(ErrorCode::Geometry, std::to_string(width) + "x" + std::to_string(height) +
                                         " pixels do not split into " +
                                         std::to_string(profile.regions) + " equal regions");
  }
  auto rng = make_engine(seed, {stream::kMap});
  std::discrete_distribution<int> draw(profile.occurrence.begin(), profile.occurrence.end());
  const std::size_t region_size = pixels / k;
  std::vector<int> labels(pixels);
  for (std::size_t r = 0; r < k; ++r) {
    const int label = draw(rng) + 1;
    std::fill_n(labels.begin() + static_cast<std::ptrdiff_t>(r * region_size), region_size, label);
  }
  return LabelMap(width, height, std::move(labels));
}

std::vector<double> analytic_presence(const ClassProfile& profile, int regions) {
  std::vector<double> out(profile.occurrence.size());
  for (std::size_t l = 0; l < out.size(); ++l) {
    out[l] = 1.0 - std::pow(1.0 - profile.occurrence[l], regions);
  }
  return out;
}

SimilarityPrototype oracle_prototype(const std::vector<ClassProfile>& profiles, int regions,
                                     CorrelationMetric metric) {
  std::vector<std::vector<double>> reps;
  std::vector<std::string> names;
  for (const auto& p : profiles) {
    reps.push_back(analytic_presence(p, regions));
    names.push_back(p.class_name);
  }
  return build_prototype(reps, std::move(names), metric);
}

DatasetSemanticSummary SyntheticDataset::train_summary() const {
  std::vector<ClassMaps> train_maps;
  for (std::size_t c = 0; c < maps.size(); ++c) {
    ClassMaps cm{maps[c].class_name, {}};
    cm.maps.assign(maps[c].maps.begin(),
                   maps[c].maps.begin() + static_cast<std::ptrdiff_t>(train_counts[c]));
    train_maps.push_back(std::move(cm));
  }
  return summarize_maps(train_maps, num_labels);
}

SyntheticDataset sample_dataset(const std::vector<ClassProfile>& profiles,
                                const SampleOptions& options) {
  if (profiles.size() < 2) throw Error(ErrorCode::Spec, "need at least 2 class profiles");
  if (options.per_class < 2) throw Error(ErrorCode::Spec, "need at least 2 instances per class");
  if (!(options.split_fraction > 0.0 && options.split_fraction < 1.0)) {
    throw Error(ErrorCode::Spec, "split fraction must be in (0, 1)");
  }
  if (options.feature_noise < 0.0 || options.distractors < 0 || options.distractor_noise < 0.0) {
    throw Error(ErrorCode::Spec, "noise levels and distractor count must be non-negative");
  }
  SyntheticDataset ds;
  ds.num_labels = static_cast<int>(profiles.front().occurrence.size());
  ds.profiles = profiles;
  ds.seed = options.seed;

  const auto n = static_cast<std::size_t>(options.per_class);
  const auto n_train = std::clamp<std::size_t>(
      static_cast<std::size_t>(std::llround(options.split_fraction * static_cast<double>(n))), 1,
      n - 1);
  const int dim = ds.num_labels + options.distractors;
  const std::size_t classes = profiles.size();
  ds.train.features.resize(static_cast<Eigen::Index>(classes * n_train), dim);
  ds.test.features.resize(static_cast<Eigen::Index>(classes * (n - n_train)), dim);

  Eigen::Index train_row = 0;
  Eigen::Index test_row = 0;
  for (std::size_t c = 0; c < classes; ++c) {
    const auto& profile = profiles[c];
    if (static_cast<int>(profile.occurrence.size()) != ds.num_labels) {
      throw Error(ErrorCode::DimensionMismatch, "profiles disagree on L");
    }
    ClassMaps cm{profile.class_name, {}};
    for (std::size_t i = 0; i < n; ++i) {
      const auto map_seed = derive_seed(options.seed, {stream::kMap, c, i});
      LabelMap map = sample_label_map(profile, options.width, options.height, map_seed);

      auto rng = make_engine(options.seed, {stream::kFeature, c, i});
      std::normal_distribution<double> noise(0.0, 1.0);
      Vector f = Vector::Zero(dim);
      for (int label : map.labels) f(label - 1) += 1.0;
      f.head(ds.num_labels) /= static_cast<double>(map.pixel_count());
      for (int j = 0; j < ds.num_labels; ++j) f(j) += options.feature_noise * noise(rng);
      for (int j = ds.num_labels; j < dim; ++j) f(j) = options.distractor_noise * noise(rng);

      const bool is_train = i < n_train;
      auto& set = is_train ? ds.train : ds.test;
      auto& row = is_train ? train_row : test_row;
      set.features.row(row++) = f.transpose();
      set.labels.push_back(static_cast<int>(c));
      cm.maps.push_back(std::move(map));
    }
    ds.maps.push_back(std::move(cm));
    ds.train_counts.push_back(n_train);
  }
  return ds;
}

void write_dataset(const SyntheticDataset& ds, const std::filesystem::path& root) {
  namespace fs = std::filesystem;
  fs::create_directories(root);
  Manifest manifest;
  manifest.num_labels = ds.num_labels;
  for (std::size_t c = 0; c < ds.maps.size(); ++c) {
    const auto& cm = ds.maps[c];
    ManifestClass mc{cm.class_name, cm.maps.size(), ds.train_counts[c]};
    fs::create_directories(root / mc.name);
    for (std::size_t k = 0; k < cm.maps.size(); ++k) {
      write_pgm(Manifest::map_path(root, mc, k), cm.maps[k], std::max(ds.num_labels, 1));
    }
    manifest.classes.push_back(std::move(mc));
  }
  manifest.write(root / "manifest");
  write_features(root / "features_train.csv", ds.train);
  write_features(root / "features_test.csv", ds.test);
}

}  // namespace simproto
