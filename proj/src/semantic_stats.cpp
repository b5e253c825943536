#include "simproto/semantic_stats.hpp"

#include <algorithm>
#include <exception>
#include <thread>
#include <utility>

#include "simproto/dataset_io.hpp"
#include "simproto/error.hpp"

namespace simproto {

LabelMap::LabelMap(int w, int h, std::vector<int> pixels)
    : width(w), height(h), labels(std::move(pixels)) {
  if (w < 1 || h < 1) {
    throw Error(ErrorCode::Geometry, "label map must be at least 1x1, got " +
                                         std::to_string(w) + "x" + std::to_string(h));
  }
  if (labels.size() != static_cast<std::size_t>(w) * static_cast<std::size_t>(h)) {
    throw Error(ErrorCode::DimensionMismatch,
                "label map holds " + std::to_string(labels.size()) + " pixels, expected " +
                    std::to_string(w) + "x" + std::to_string(h));
  }
}

LabelMap LabelMap::from_rows(const std::vector<std::vector<int>>& rows) {
  if (rows.empty() || rows.front().empty()) {
    throw Error(ErrorCode::Geometry, "label map rows are empty");
  }
  const auto w = rows.front().size();
  std::vector<int> pixels;
  pixels.reserve(w * rows.size());
  for (const auto& row : rows) {
    if (row.size() != w) {
      throw Error(ErrorCode::DimensionMismatch, "ragged label map rows");
    }
    pixels.insert(pixels.end(), row.begin(), row.end());
  }
  return LabelMap(static_cast<int>(w), static_cast<int>(rows.size()), std::move(pixels));
}

std::size_t InstanceSemanticVector::ones() const {
  return static_cast<std::size_t>(std::count(values.begin(), values.end(), std::uint8_t{1}));
}

std::vector<std::string> DatasetSemanticSummary::class_names() const {
  std::vector<std::string> names;
  names.reserve(representations.size());
  for (const auto& r : representations) names.push_back(r.class_name);
  return names;
}

InstanceSemanticVector presence_vector(const LabelMap& map, int num_labels) {
  if (num_labels < 1) {
    throw Error(ErrorCode::OutOfRange, "label count must be positive");
  }
  InstanceSemanticVector out;
  out.values.assign(static_cast<std::size_t>(num_labels), 0);
  for (int h = 0; h < map.height; ++h) {
    for (int w = 0; w < map.width; ++w) {
      const int label = map.at(w, h);
      if (label < 1 || label > num_labels) {
        throw Error(ErrorCode::OutOfRange,
                    "pixel (w=" + std::to_string(w) + ", h=" + std::to_string(h) +
                        ") has label " + std::to_string(label) + " outside [1, " +
                        std::to_string(num_labels) + "]");
      }
      out.values[static_cast<std::size_t>(label - 1)] = 1;
    }
  }
  return out;
}

ClassSemanticRepresentation class_representation(int class_id, std::string class_name,
                                                 std::span<const InstanceSemanticVector> vectors) {
  if (vectors.empty()) {
    throw Error(ErrorCode::EmptyClass, "class '" + class_name + "' has no instances");
  }
  PresenceAccumulator acc(static_cast<int>(vectors.front().size()));
  for (const auto& v : vectors) acc.add(v);
  return acc.finalize(class_id, std::move(class_name));
}

PresenceAccumulator::PresenceAccumulator(int num_labels)
    : num_labels_(num_labels), counts_(static_cast<std::size_t>(num_labels), 0) {}

void PresenceAccumulator::add(const InstanceSemanticVector& v) {
  if (v.size() != counts_.size()) {
    throw Error(ErrorCode::DimensionMismatch, "instance vector of length " +
                                                  std::to_string(v.size()) + ", expected " +
                                                  std::to_string(counts_.size()));
  }
  for (std::size_t l = 0; l < counts_.size(); ++l) counts_[l] += v.values[l];
  ++count_;
}

void PresenceAccumulator::add(const LabelMap& map) { add(presence_vector(map, num_labels_)); }

void PresenceAccumulator::merge(const PresenceAccumulator& other) {
  if (other.counts_.size() != counts_.size()) {
    throw Error(ErrorCode::DimensionMismatch, "cannot merge accumulators of different L");
  }
  for (std::size_t l = 0; l < counts_.size(); ++l) counts_[l] += other.counts_[l];
  count_ += other.count_;
}

ClassSemanticRepresentation PresenceAccumulator::finalize(int class_id,
                                                          std::string class_name) const {
  if (count_ == 0) {
    throw Error(ErrorCode::EmptyClass, "class '" + class_name + "' has no instances");
  }
  ClassSemanticRepresentation rep;
  rep.class_id = class_id;
  rep.class_name = std::move(class_name);
  rep.instance_count = count_;
  rep.values.resize(counts_.size());
  const auto n = static_cast<double>(count_);
  for (std::size_t l = 0; l < counts_.size(); ++l) {
    rep.values[l] = static_cast<double>(counts_[l]) / n;
  }
  return rep;
}

namespace {

// Runs fn(begin, end, worker) over contiguous chunks. The first failing chunk's
// exception is rethrown after all workers join.
template <typename Fn>
void parallel_chunks(std::size_t n, unsigned threads, Fn&& fn) {
  threads = std::max(1u, threads);
  if (threads == 1 || n < 2) {
    fn(std::size_t{0}, n, 0u);
    return;
  }
  const std::size_t chunk = (n + threads - 1) / threads;
  std::vector<std::exception_ptr> errors(threads);
  {
    std::vector<std::jthread> workers;
    for (unsigned t = 0; t < threads; ++t) {
      const std::size_t begin = t * chunk;
      const std::size_t end = std::min(n, begin + chunk);
      if (begin >= end) break;
      workers.emplace_back([&fn, &errors, begin, end, t] {
        try {
          fn(begin, end, t);
        } catch (...) {
          errors[t] = std::current_exception();
        }
      });
    }
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

}  // namespace

DatasetSemanticSummary summarize_maps(std::span<const ClassMaps> classes, int num_labels,
                                      const SummarizeOptions& options) {
  if (classes.empty()) {
    throw Error(ErrorCode::EmptyDataset, "no classes to summarize");
  }
  DatasetSemanticSummary summary;
  summary.num_labels = num_labels;
  int class_id = 1;
  for (const auto& cls : classes) {
    if (cls.maps.empty()) {
      throw Error(ErrorCode::EmptyClass, "class '" + cls.class_name + "' has no label maps");
    }
    std::vector<PresenceAccumulator> partial(std::max(1u, options.threads),
                                             PresenceAccumulator(num_labels));
    parallel_chunks(cls.maps.size(), options.threads,
                    [&](std::size_t begin, std::size_t end, unsigned t) {
                      for (std::size_t i = begin; i < end; ++i) partial[t].add(cls.maps[i]);
                    });
    PresenceAccumulator total(num_labels);
    for (const auto& p : partial) total.merge(p);
    summary.representations.push_back(total.finalize(class_id++, cls.class_name));
  }
  return summary;
}

DatasetSemanticSummary summarize_dataset(const Manifest& manifest,
                                         const std::filesystem::path& root,
                                         const SummarizeOptions& options) {
  if (manifest.classes.empty()) {
    throw Error(ErrorCode::EmptyDataset, "manifest lists no classes");
  }
  const int num_labels = manifest.num_labels;
  DatasetSemanticSummary summary;
  summary.num_labels = num_labels;
  int class_id = 1;
  for (const auto& cls : manifest.classes) {
    const std::size_t n = options.train_only ? cls.train_count : cls.count;
    if (n == 0) {
      throw Error(ErrorCode::EmptyClass, "class '" + cls.name + "' lists no label maps");
    }
    std::vector<PresenceAccumulator> partial(std::max(1u, options.threads),
                                             PresenceAccumulator(num_labels));
    parallel_chunks(n, options.threads, [&](std::size_t begin, std::size_t end, unsigned t) {
      for (std::size_t k = begin; k < end; ++k) {
        const auto path = Manifest::map_path(root, cls, k);
        const PgmImage image = read_pgm(path);
        if (image.maxval < num_labels) {
          throw Error(ErrorCode::Ingestion, path.string() + ": maxval " +
                                                std::to_string(image.maxval) +
                                                " is below label count " +
                                                std::to_string(num_labels));
        }
        try {
          partial[t].add(image.map);
        } catch (const Error& e) {
          throw Error(e.code(), path.string() + ": " + e.detail());
        }
      }
    });
    PresenceAccumulator total(num_labels);
    for (const auto& p : partial) total.merge(p);
    summary.representations.push_back(total.finalize(class_id++, cls.name));
  }
  return summary;
}

}  // namespace simproto
