#include <doctest.h>

#include <algorithm>
#include <random>

#include "oracles.hpp"
#include "simproto/dataset_io.hpp"
#include "simproto/error.hpp"
#include "simproto/semantic_stats.hpp"
#include "test_support.hpp"

using namespace simproto;

namespace {

LabelMap random_map(std::mt19937_64& rng, int num_labels, int max_side) {
  std::uniform_int_distribution<int> side(1, max_side);
  std::uniform_int_distribution<int> label(1, num_labels);
  const int w = side(rng);
  const int h = side(rng);
  std::vector<int> px(static_cast<std::size_t>(w * h));
  for (auto& p : px) p = label(rng);
  return LabelMap(w, h, std::move(px));
}

std::vector<int> as_ints(const InstanceSemanticVector& v) {
  return {v.values.begin(), v.values.end()};
}

}  // namespace

TEST_CASE("presence vector marks labels that occur") {
  const auto map = LabelMap::from_rows({{1, 1}, {2, 1}});
  CHECK(as_ints(presence_vector(map, 3)) == std::vector<int>{1, 1, 0});

  const LabelMap constant(4, 4, std::vector<int>(16, 5));
  const auto v = presence_vector(constant, 150);
  CHECK(v.ones() == 1);
  CHECK(v.values[4] == 1);
}

TEST_CASE("presence vector rejects labels outside [1, L] and names the pixel") {
  const auto map = LabelMap::from_rows({{7}});
  try {
    presence_vector(map, 6);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::OutOfRange);
    CHECK(std::string(e.what()).find("w=0, h=0") != std::string::npos);
  }
  CHECK_THROWS_AS(presence_vector(LabelMap::from_rows({{1, 0}}), 3), Error);
}

TEST_CASE("class representation averages instance vectors") {
  const std::vector<InstanceSemanticVector> vecs{{{1, 1, 0}}, {{1, 0, 0}}};
  const auto rep = class_representation(1, "a", vecs);
  CHECK(rep.values == std::vector<double>{1.0, 0.5, 0.0});
  CHECK(rep.instance_count == 2);

  const std::vector<InstanceSemanticVector> one{{{0, 1, 1, 0}}};
  CHECK(class_representation(2, "b", one).values == std::vector<double>{0, 1, 1, 0});

  try {
    class_representation(3, "empty", std::span<const InstanceSemanticVector>{});
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::EmptyClass);
  }
  const std::vector<InstanceSemanticVector> mixed{{{1, 0}}, {{1, 0, 0}}};
  try {
    class_representation(1, "mixed", mixed);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::DimensionMismatch);
  }
}

TEST_CASE("presence vector has between 1 and min(L, W*H) ones") {
  std::mt19937_64 rng(11);
  for (int t = 0; t < 500; ++t) {
    const int num_labels = std::uniform_int_distribution<int>(1, 40)(rng);
    const auto map = random_map(rng, num_labels, 9);
    const auto v = presence_vector(map, num_labels);
    CHECK(v.ones() >= 1);
    CHECK(v.ones() <= std::min<std::size_t>(num_labels, map.pixel_count()));
    CHECK(as_ints(v) == oracle::presence(map, num_labels));
  }
}

TEST_CASE("representations are permutation invariant and duplication keeps values") {
  std::mt19937_64 rng(12);
  for (int t = 0; t < 100; ++t) {
    const int num_labels = std::uniform_int_distribution<int>(1, 20)(rng);
    const int n = std::uniform_int_distribution<int>(1, 15)(rng);
    std::vector<InstanceSemanticVector> vecs;
    for (int k = 0; k < n; ++k) vecs.push_back(presence_vector(random_map(rng, num_labels, 6), num_labels));
    const auto base = class_representation(1, "c", vecs);

    auto shuffled = vecs;
    std::shuffle(shuffled.begin(), shuffled.end(), rng);
    CHECK(class_representation(1, "c", shuffled).values == base.values);

    auto doubled = vecs;
    doubled.insert(doubled.end(), vecs.begin(), vecs.end());
    const auto twice = class_representation(1, "c", doubled);
    CHECK(twice.values == base.values);
    CHECK(twice.instance_count == 2 * base.instance_count);

    for (double v : base.values) {
      const double scaled = v * static_cast<double>(n);
      CHECK(std::abs(scaled - std::round(scaled)) < 1e-9);
    }
  }
}

TEST_CASE("summaries match the materialize-then-average oracle in both modes") {
  std::mt19937_64 rng(13);
  for (int t = 0; t < 50; ++t) {
    const int num_labels = std::uniform_int_distribution<int>(1, 20)(rng);
    const int classes = std::uniform_int_distribution<int>(1, 5)(rng);
    std::vector<ClassMaps> data;
    for (int c = 0; c < classes; ++c) {
      ClassMaps cm{"c" + std::to_string(c), {}};
      const int n = std::uniform_int_distribution<int>(1, 10)(rng);
      for (int k = 0; k < n; ++k) cm.maps.push_back(random_map(rng, num_labels, 8));
      data.push_back(std::move(cm));
    }
    const auto seq = summarize_maps(data, num_labels);
    const auto par = summarize_maps(data, num_labels, {.threads = 4});
    REQUIRE(seq.num_classes() == classes);
    for (int c = 0; c < classes; ++c) {
      const auto expected = oracle::class_mean(data[static_cast<std::size_t>(c)].maps, num_labels);
      CHECK(seq.representations[static_cast<std::size_t>(c)].values == expected);
      CHECK(par.representations[static_cast<std::size_t>(c)].values == expected);
      CHECK(seq.representations[static_cast<std::size_t>(c)].class_id == c + 1);
    }
  }
}

TEST_CASE("summarize_dataset reads the on-disk layout") {
  testing::TempDir dir("stats");
  Manifest m;
  m.num_labels = 3;
  m.classes = {{"kitchen", 2, 2}, {"bedroom", 2, 2}};
  std::filesystem::create_directories(dir / "kitchen");
  std::filesystem::create_directories(dir / "bedroom");
  write_pgm(Manifest::map_path(dir.path(), m.classes[0], 0), LabelMap::from_rows({{1, 1}, {2, 1}}), 3);
  write_pgm(Manifest::map_path(dir.path(), m.classes[0], 1), LabelMap::from_rows({{1, 1}, {1, 1}}), 3, true);
  write_pgm(Manifest::map_path(dir.path(), m.classes[1], 0), LabelMap::from_rows({{3}}), 255);
  write_pgm(Manifest::map_path(dir.path(), m.classes[1], 1), LabelMap::from_rows({{2, 3}}), 65535);
  m.write(dir / "manifest");

  const auto summary = summarize_dataset(Manifest::read(dir / "manifest"), dir.path());
  REQUIRE(summary.num_classes() == 2);
  CHECK(summary.representations[0].instance_count == 2);
  CHECK(summary.representations[0].values == std::vector<double>{1.0, 0.5, 0.0});
  CHECK(summary.representations[1].values == std::vector<double>{0.0, 0.5, 1.0});
  CHECK(summary.class_names() == std::vector<std::string>{"kitchen", "bedroom"});

  std::filesystem::remove(Manifest::map_path(dir.path(), m.classes[1], 1));
  try {
    summarize_dataset(Manifest::read(dir / "manifest"), dir.path());
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::Ingestion);
    CHECK(std::string(e.what()).find("1.pgm") != std::string::npos);
  }
}

TEST_CASE("single-class single-map manifest gives the unit presence vector") {
  testing::TempDir dir("stats1");
  Manifest m;
  m.num_labels = 4;
  m.classes = {{"only", 1, 1}};
  std::filesystem::create_directories(dir / "only");
  write_pgm(Manifest::map_path(dir.path(), m.classes[0], 0), LabelMap(2, 2, {2, 2, 2, 2}), 4);
  m.write(dir / "manifest");
  const auto summary = summarize_dataset(Manifest::read(dir / "manifest"), dir.path());
  CHECK(summary.representations[0].values == std::vector<double>{0, 1, 0, 0});
}

TEST_CASE("train_only restricts to the training prefix") {
  testing::TempDir dir("stats2");
  Manifest m;
  m.num_labels = 2;
  m.classes = {{"a", 2, 1}};
  std::filesystem::create_directories(dir / "a");
  write_pgm(Manifest::map_path(dir.path(), m.classes[0], 0), LabelMap::from_rows({{1}}), 2);
  write_pgm(Manifest::map_path(dir.path(), m.classes[0], 1), LabelMap::from_rows({{2}}), 2);
  m.write(dir / "manifest");
  const auto manifest = Manifest::read(dir / "manifest");
  CHECK(summarize_dataset(manifest, dir.path()).representations[0].values == std::vector<double>{0.5, 0.5});
  CHECK(summarize_dataset(manifest, dir.path(), {.train_only = true}).representations[0].values ==
        std::vector<double>{1.0, 0.0});
}
