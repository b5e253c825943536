// Acceptance gate: one PASS/FAIL line per criterion, nonzero exit when any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <functional>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <thread>

#include <json.hpp>

#include "oracles.hpp"
#include "simproto/commands.hpp"
#include "test_support.hpp"

using namespace simproto;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* pattern, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, pattern, args...);
  return buf;
}

Matrix random_prototype(std::mt19937_64& rng, int c, double lo = 0.0, double hi = 1.0) {
  std::uniform_real_distribution<double> off(lo, hi);
  Matrix s = Matrix::Identity(c, c);
  for (int i = 0; i < c; ++i) {
    for (int j = i + 1; j < c; ++j) s(i, j) = s(j, i) = off(rng);
  }
  return s;
}

Outcome statistics_oracle() {
  std::mt19937_64 rng(101);
  int mismatches = 0;
  for (int t = 0; t < 100; ++t) {
    const int c = 1 + static_cast<int>(rng() % 5);
    const int l = 1 + static_cast<int>(rng() % 20);
    std::vector<ClassMaps> classes;
    for (int k = 0; k < c; ++k) {
      ClassMaps cm{"c" + std::to_string(k), {}};
      const int n = 1 + static_cast<int>(rng() % 10);
      for (int i = 0; i < n; ++i) {
        const int w = 1 + static_cast<int>(rng() % 8);
        const int h = 1 + static_cast<int>(rng() % 8);
        std::vector<int> px(static_cast<std::size_t>(w * h));
        for (auto& p : px) p = 1 + static_cast<int>(rng() % l);
        cm.maps.emplace_back(w, h, std::move(px));
      }
      classes.push_back(std::move(cm));
    }
    for (unsigned threads : {1u, 4u}) {
      const auto summary = summarize_maps(classes, l, SummarizeOptions{threads, false});
      for (int k = 0; k < c; ++k) {
        if (summary.representations[k].values != oracle::class_mean(classes[k].maps, l)) ++mismatches;
      }
    }
  }
  return {mismatches == 0, fmt("%d class mismatches over 100 datasets, sequential and 4 threads", mismatches)};
}

Outcome prototype_invariants() {
  std::mt19937_64 rng(102);
  int violations = 0;
  double worst_scale = 0.0;
  for (int t = 0; t < 1000; ++t) {
    const int c = 2 + static_cast<int>(rng() % 7);
    const int l = 1 + static_cast<int>(rng() % 20);
    const int n = 1 + static_cast<int>(rng() % 50);
    std::vector<std::vector<double>> reps(static_cast<std::size_t>(c));
    std::vector<std::string> names;
    for (auto& r : reps) {
      do {
        r.clear();
        for (int i = 0; i < l; ++i) r.push_back(static_cast<double>(rng() % (n + 1)) / n);
      } while (*std::max_element(r.begin(), r.end()) == 0.0);
      names.push_back("c" + std::to_string(names.size()));
    }
    for (auto metric : {CorrelationMetric::CosineSimilarity, CorrelationMetric::EuclideanExp}) {
      const auto m = build_prototype(reps, names, metric).matrix;
      const bool ok = m == m.transpose() && (m.diagonal().array() == 1.0).all() &&
                      (m.array() >= 0.0).all() && (m.array() <= 1.0).all();
      violations += !ok;
    }
    auto scaled = reps;
    const double factor = std::uniform_real_distribution<double>(0.01, 100.0)(rng);
    for (auto& r : scaled) {
      for (auto& v : r) v *= factor;
    }
    const auto a = build_prototype(reps, names, CorrelationMetric::CosineSimilarity).matrix;
    const auto b = build_prototype(scaled, names, CorrelationMetric::CosineSimilarity).matrix;
    worst_scale = std::max(worst_scale, (a - b).cwiseAbs().maxCoeff());
  }
  return {violations == 0 && worst_scale <= 1e-12,
          fmt("%d invariant violations; cosine scale drift %.3g", violations, worst_scale)};
}

Outcome confidence_unification() {
  std::mt19937_64 rng(103);
  double worst_diag = 0.0, worst_sum = 0.0;
  int order_breaks = 0;
  for (int t = 0; t < 1000; ++t) {
    const int c = 2 + static_cast<int>(rng() % 9);
    const auto s = random_prototype(rng, c, 0.001, 1.0);
    const double sigma = std::uniform_real_distribution<double>(0.05, 0.95)(rng);
    const auto u = unify_confidence(s, sigma).rows;
    for (int i = 0; i < c; ++i) {
      worst_diag = std::max(worst_diag, std::abs(u(i, i) - sigma));
      worst_sum = std::max(worst_sum, std::abs(u.row(i).sum() - 1.0));
      for (int j = 0; j < c; ++j) {
        for (int k = 0; k < c; ++k) {
          if (j == i || k == i) continue;
          if (s(i, j) > s(i, k) && !(u(i, j) > u(i, k))) ++order_breaks;
        }
      }
    }
  }
  return {worst_diag <= 1e-9 && worst_sum <= 1e-9 && order_breaks == 0,
          fmt("diagonal error %.3g, row-sum error %.3g, %d ordering breaks", worst_diag, worst_sum,
              order_breaks)};
}

Outcome schedule_endpoints() {
  std::mt19937_64 rng(104);
  int failures = 0;
  for (int step : {1, 5, 20}) {
    for (int t = 0; t < 100; ++t) {
      const auto s = random_prototype(rng, 2 + static_cast<int>(rng() % 8), 0.05, 0.95);
      const auto schedule = SofteningSchedule::from_prototype(s, step);
      const double sigma0 = sigma0_of(s);
      failures += schedule.sigma_at(1) != sigma0;
      failures += epoch_labels(s, schedule, 1).rows.diagonal().maxCoeff() - sigma0 > 1e-12;
      double prev = -1.0;
      for (int e = 1; e <= step + 10; ++e) {
        const double sigma = schedule.sigma_at(e);
        failures += sigma < prev;
        prev = sigma;
        const bool identity = epoch_labels(s, schedule, e).rows == Matrix::Identity(s.rows(), s.cols());
        failures += (e <= step + 1) == identity;
      }
    }
  }
  return {failures == 0, fmt("%d failures over STEP in {1, 5, 20} x 100 prototypes", failures)};
}

Outcome gradient_verification() {
  GradCheckOptions opt;  // 32 trials enumerate every axis combination
  const auto r = gradient_check(opt);
  std::set<std::string> axes;
  for (const auto& c : r.cases) {
    axes.insert(c.labels + "/" + c.indexing + "/" + c.similarity + "/" + c.reduction + "/" +
                std::to_string(c.batch) + "/" + std::to_string(c.classes));
  }
  return {r.cases.size() >= 20 && r.worst_ce_only < 1e-6 && r.worst_composite < 1e-4,
          fmt("%zu cases, %zu distinct configurations; worst CE-only %.3g, worst composite %.3g",
              r.cases.size(), axes.size(), r.worst_ce_only, r.worst_composite)};
}

Outcome zero_loss_fixpoint() {
  std::mt19937_64 rng(106);
  int nonzero = 0;
  double worst_ce = 0.0;
  const BclReduction reductions[] = {BclReduction::MeanInter, BclReduction::NonzeroInterIntra,
                                     BclReduction::MeanInterIntra, BclReduction::NonzeroInter};
  for (int t = 0; t < 200; ++t) {
    const int c = 2 + static_cast<int>(rng() % 6);
    const int b = 2 + static_cast<int>(rng() % 12);
    const auto s = random_prototype(rng, c, 0.05, 0.95);
    BatchPredictions batch;
    for (int i = 0; i < b; ++i) batch.targets.push_back(static_cast<int>(rng() % c));

    // One-hot directions: cosine 1 within a class, 0 across.
    batch.logits = Matrix::Zero(b, c);
    for (int i = 0; i < b; ++i) batch.logits(i, batch.targets[i]) = 40.0;
    for (auto idx : {ThresholdIndexing::EntryLookup, ThresholdIndexing::RowProduct}) {
      for (auto sim : {PairSimilarity::CosineOnLogits, PairSimilarity::EuclideanExpOnLogits}) {
        for (auto red : reductions) {
          const auto r = combined_loss(batch, hard_labels(c), s, BclConfig{idx, sim, red});
          nonzero += r.inter != 0.0 || r.intra != 0.0;
          worst_ce = std::max(worst_ce, std::abs(r.cross_entropy));
        }
      }
    }

    // Logits whose softmax is the soft-label row: CE equals the row entropy.
    const auto labels = unify_confidence(s, std::uniform_real_distribution<double>(0.3, 0.95)(rng));
    for (int i = 0; i < b; ++i) batch.logits.row(i) = labels.rows.row(batch.targets[i]).array().log();
    double entropy = 0.0;
    for (int i = 0; i < b; ++i) {
      const auto row = labels.rows.row(batch.targets[i]);
      entropy += oracle::entropy(std::vector<double>(row.begin(), row.end()));
    }
    entropy /= b;
    const auto r = combined_loss(batch, labels, s, std::nullopt);
    worst_ce = std::max(worst_ce, std::abs(r.cross_entropy - entropy));
  }
  return {nonzero == 0 && worst_ce <= 1e-9,
          fmt("%d nonzero contrastive terms; worst |CE - entropy| %.3g", nonzero, worst_ce)};
}

Outcome same_class_immunity() {
  std::mt19937_64 rng(107);
  int leaks = 0;
  long checked = 0;
  const BclConfig cfg{ThresholdIndexing::EntryLookup, PairSimilarity::CosineOnLogits};
  for (int t = 0; t < 1000; ++t) {
    const int c = 2 + static_cast<int>(rng() % 7);
    const int b = 2 + static_cast<int>(rng() % 31);
    const auto s = random_prototype(rng, c);
    std::vector<int> targets;
    for (int i = 0; i < b; ++i) targets.push_back(static_cast<int>(rng() % c));
    Matrix z(b, c);
    std::normal_distribution<double> normal(0.0, 3.0);
    for (Eigen::Index i = 0; i < z.size(); ++i) z.data()[i] = normal(rng);
    const auto p = pairwise_similarity(z, cfg.similarity);
    const auto hinge = inter_hinge(p, make_thresholds(s, targets, cfg).inter);
    for (int i = 0; i < b; ++i) {
      for (int j = 0; j < b; ++j) {
        if (targets[i] != targets[j]) continue;
        ++checked;
        leaks += hinge(i, j) != 0.0;
      }
    }
  }
  return {leaks == 0 && checked > 0, fmt("%d nonzero of %ld same-class entries", leaks, checked)};
}

Outcome statistical_convergence() {
  const auto profiles = make_confusable_profiles(7, 30, ConfusableSpec::benchmark(), 12, 108);
  SampleOptions opt;
  opt.per_class = 4000;
  opt.split_fraction = 0.5;
  opt.distractors = 0;
  opt.seed = 108;
  const auto summary = sample_dataset(profiles, opt).train_summary();
  double worst_rep = 0.0, worst_proto = 0.0;
  for (std::size_t c = 0; c < profiles.size(); ++c) {
    const auto analytic = analytic_presence(profiles[c], 12);
    for (std::size_t l = 0; l < analytic.size(); ++l) {
      worst_rep = std::max(worst_rep, std::abs(summary.representations[c].values[l] - analytic[l]));
    }
  }
  for (auto metric : {CorrelationMetric::CosineSimilarity, CorrelationMetric::EuclideanExp}) {
    const auto diff = build_prototype(summary, metric).matrix - oracle_prototype(profiles, 12, metric).matrix;
    worst_proto = std::max(worst_proto, diff.cwiseAbs().maxCoeff());
  }
  return {summary.representations[0].instance_count == 2000 && worst_rep <= 0.03 && worst_proto <= 0.05,
          fmt("M=2000: representation deviation %.4f, prototype deviation %.4f", worst_rep, worst_proto)};
}

Outcome desk_benchmark() {
  RunConfig config;
  config.set("bench.strategies", "hard,lsr,gls,gls+bcl");
  config.set("bench.seeds", "1-10");
  BenchSetup setup;
  setup.strategies = config.bench_strategies();
  setup.seeds = config.bench_seeds();
  setup.train = config.train_config();
  setup.generator = config.data_spec();
  setup.threads = std::clamp(std::thread::hardware_concurrency(), 1u, 10u);
  const auto cpu_start = std::clock();
  const auto rows = summarize_bench(run_bench(setup), {"hard", "lsr", "gls", "gls+bcl"});
  const double cpu = static_cast<double>(std::clock() - cpu_start) / CLOCKS_PER_SEC;
  std::map<std::string, BenchRow> by;
  for (const auto& r : rows) by[r.strategy] = r;
  const auto& gls = by["gls"];
  const bool pass = gls.mean > by["hard"].mean && gls.sign_p < 0.05 && by["gls+bcl"].mean >= gls.mean &&
                    gls.mean >= by["lsr"].mean && cpu < 300.0;
  return {pass, fmt("mean accuracy hard %.4f, lsr %.4f, gls %.4f (W/L/T %d/%d/%d, p=%.4f), gls+bcl %.4f; "
                    "%.1f s CPU",
                    by["hard"].mean, by["lsr"].mean, gls.mean, gls.wins, gls.losses, gls.ties,
                    gls.sign_p, by["gls+bcl"].mean, cpu)};
}

Outcome reproducibility() {
  testing::TempDir dir("accept");
  std::vector<std::string> problems;
  RunConfig c;
  c.set("quiet", "true");
  c.set("gen.per_class", "40");
  c.set("train.epochs", "5");
  c.set("train.strategy", "gls");
  c.set("bcl.enabled", "true");
  for (const char* name : {"a", "b"}) {
    c.set("out", (dir / name).string());
    cmd_train(c, nullptr);
  }
  for (const char* file : {"report.csv", "metrics.json", "model.ckpt"}) {
    if (testing::slurp(dir / "a" / file) != testing::slurp(dir / "b" / file)) {
      problems.push_back(std::string(file) + " differs");
    }
  }

  const auto generated = generate_train_data(c.data_spec(), 5);
  for (auto metric : {CorrelationMetric::CosineSimilarity, CorrelationMetric::EuclideanExp}) {
    const auto archive = make_archive(generated.dataset.train_summary(), metric);
    save_archive(dir / "proto", archive);
    if (!testing::bitwise_equal(load_archive(dir / "proto").prototype.matrix, archive.prototype.matrix)) {
      problems.push_back("prototype round trip");
    }
  }

  c.set("out", (dir / "bench").string());
  c.set("bench.strategies", "hard,gls,gls+bcl");
  c.set("bench.seeds", "1-3");
  const auto rows = cmd_bench(c, nullptr);
  std::istringstream table(testing::slurp(dir / "bench" / "bench.csv"));
  std::string line;
  std::getline(table, line);
  for (const auto& row : rows) {
    std::getline(table, line);
    const auto cells = split_csv_line(line);
    double mean = 0.0;
    for (std::uint64_t seed = 1; seed <= 3; ++seed) {
      const auto j = nlohmann::json::parse(
          testing::slurp(dir / "bench" / "runs" / (run_file_stem(row.strategy, seed) + ".json")));
      mean += j["test_accuracy"].get<double>();
    }
    mean /= 3.0;
    if (cells[0] != row.strategy || parse_double(cells[2], "mean") != mean) {
      problems.push_back("bench row " + row.strategy + " disagrees with run files");
    }
  }
  std::string detail = problems.empty() ? "reports byte-identical, archive bitwise, bench table recomputed"
                                        : problems.front();
  return {problems.empty(), detail};
}

}  // namespace

int main() {
  const std::pair<const char*, std::function<Outcome()>> criteria[] = {
      {"statistics oracle", statistics_oracle},
      {"prototype invariants", prototype_invariants},
      {"confidence unification", confidence_unification},
      {"schedule endpoints", schedule_endpoints},
      {"gradient verification", gradient_verification},
      {"zero-loss fixpoint", zero_loss_fixpoint},
      {"same-class inter immunity", same_class_immunity},
      {"statistical convergence", statistical_convergence},
      {"desk-scale benchmark", desk_benchmark},
      {"reproducibility and round trips", reproducibility},
  };
  const double limits[] = {10, 30, 30, 5, 120, 60, 60, 60, 300, 120};
  int failed = 0;
  for (std::size_t i = 0; i < std::size(criteria); ++i) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (secs > limits[i]) {
      o.pass = false;
      o.detail += fmt("; over the %.0f s budget", limits[i]);
    }
    failed += !o.pass;
    std::printf("%s criterion %zu (%s): %s [%.2f s]\n", o.pass ? "PASS" : "FAIL", i + 1,
                criteria[i].first, o.detail.c_str(), secs);
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
