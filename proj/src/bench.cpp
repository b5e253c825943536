#include "simproto/bench.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <map>
#include <thread>

#include "simproto/error.hpp"

namespace simproto {

GeneratedData generate_train_data(const DataSpec& spec, std::uint64_t seed) {
  auto profiles = make_confusable_profiles(spec.classes, spec.labels, spec.confusable,
                                           spec.regions, seed);
  SampleOptions sample = spec.sample;
  sample.seed = seed;
  GeneratedData out{sample_dataset(profiles, sample), {}, {}};
  out.prototype = build_prototype(out.dataset.train_summary(), spec.metric);
  out.train_data = {out.dataset.train, out.dataset.test, out.prototype.matrix};
  return out;
}

StrategySpec parse_strategy(std::string_view token, const LsrStrategy& lsr, const GlsStrategy& gls,
                            const BclConfig& bcl) {
  StrategySpec spec;
  spec.name = std::string(token);
  std::string_view labels = token;
  std::string_view extra;
  if (const auto plus = token.find('+'); plus != std::string_view::npos) {
    labels = token.substr(0, plus);
    extra = token.substr(plus + 1);
  } else if (token == "bcl" || token == "cl") {
    labels = "hard";
    extra = token;
  }
  if (labels == "hard") {
    spec.labels = HardStrategy{};
  } else if (labels == "lsr") {
    spec.labels = lsr;
  } else if (labels == "gls") {
    spec.labels = gls;
  } else {
    throw Error(ErrorCode::Config, "unknown strategy '" + std::string(token) + "'");
  }
  if (extra == "bcl") {
    spec.bcl = bcl;
    spec.bcl->source = ThresholdSource::Prototype;
  } else if (extra == "cl") {
    spec.bcl = bcl;
    spec.bcl->source = ThresholdSource::Traditional;
  } else if (!extra.empty()) {
    throw Error(ErrorCode::Config, "unknown strategy suffix in '" + std::string(token) + "'");
  }
  return spec;
}

std::vector<BenchRun> run_bench(const BenchSetup& setup) {
  if (setup.strategies.empty() || setup.seeds.empty()) {
    throw Error(ErrorCode::Config, "bench needs at least one strategy and one seed");
  }
  if (!setup.generator && !setup.fixed) throw Error(ErrorCode::Config, "bench has no data source");

  const std::size_t per_seed = setup.strategies.size();
  std::vector<BenchRun> runs(setup.seeds.size() * per_seed);
  std::vector<std::exception_ptr> errors(setup.seeds.size());

  auto run_seed = [&](std::size_t si) {
    const auto seed = setup.seeds[si];
    std::optional<GeneratedData> generated;
    if (setup.generator) generated = generate_train_data(*setup.generator, seed);
    const TrainData& data = generated ? generated->train_data : *setup.fixed;
    const int input = static_cast<int>(data.train.features.cols());
    const int classes = static_cast<int>(data.prototype.rows());
    for (std::size_t k = 0; k < per_seed; ++k) {
      const auto& strategy = setup.strategies[k];
      TrainConfig cfg = setup.train;
      cfg.strategy = strategy.labels;
      cfg.bcl = strategy.bcl;
      cfg.seed = seed;
      std::vector<int> dims{input};
      dims.insert(dims.end(), cfg.hidden.begin(), cfg.hidden.end());
      dims.push_back(classes);
      auto model = MlpClassifier::initialized(dims, seed);
      runs[si * per_seed + k] = {strategy.name, seed, train(model, data, cfg)};
    }
  };

  const unsigned threads = std::max(1u, std::min<unsigned>(setup.threads, static_cast<unsigned>(setup.seeds.size())));
  if (threads == 1) {
    for (std::size_t si = 0; si < setup.seeds.size(); ++si) run_seed(si);
    return runs;
  }
  {
    std::vector<std::jthread> workers;
    for (unsigned t = 0; t < threads; ++t) {
      workers.emplace_back([&, t] {
        for (std::size_t si = t; si < setup.seeds.size(); si += threads) {
          try {
            run_seed(si);
          } catch (...) {
            errors[si] = std::current_exception();
          }
        }
      });
    }
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return runs;
}

double sign_test_p(int wins, int losses) {
  const int n = wins + losses;
  if (n == 0) return 1.0;
  const int k = std::min(wins, losses);
  // sum_{i<=k} C(n, i) / 2^n via log-gamma to stay exact enough for any n.
  double tail = 0.0;
  for (int i = 0; i <= k; ++i) {
    tail += std::exp(std::lgamma(n + 1.0) - std::lgamma(i + 1.0) - std::lgamma(n - i + 1.0) -
                     n * std::log(2.0));
  }
  return std::min(1.0, 2.0 * tail);
}

std::vector<BenchRow> summarize_bench(const std::vector<BenchRun>& runs,
                                      const std::vector<std::string>& order) {
  if (order.empty()) return {};
  std::map<std::string, std::map<std::uint64_t, double>> acc;
  for (const auto& r : runs) acc[r.strategy][r.seed] = r.report.test_accuracy;
  const std::string baseline =
      std::find(order.begin(), order.end(), "hard") != order.end() ? "hard" : order.front();
  const auto& base = acc[baseline];

  std::vector<BenchRow> rows;
  for (const auto& name : order) {
    const auto& by_seed = acc[name];
    BenchRow row;
    row.strategy = name;
    row.runs = by_seed.size();
    if (row.runs == 0) continue;
    for (const auto& [seed, a] : by_seed) row.mean += a;
    row.mean /= static_cast<double>(row.runs);
    if (row.runs > 1) {
      double ss = 0.0;
      for (const auto& [seed, a] : by_seed) ss += (a - row.mean) * (a - row.mean);
      row.stddev = std::sqrt(ss / static_cast<double>(row.runs - 1));
    }
    std::size_t paired = 0;
    for (const auto& [seed, a] : by_seed) {
      const auto it = base.find(seed);
      if (it == base.end()) continue;
      const double d = a - it->second;
      row.delta_mean += d;
      ++paired;
      if (d > 0) {
        ++row.wins;
      } else if (d < 0) {
        ++row.losses;
      } else {
        ++row.ties;
      }
    }
    if (paired > 0) row.delta_mean /= static_cast<double>(paired);
    row.sign_p = sign_test_p(row.wins, row.losses);
    rows.push_back(row);
  }
  return rows;
}

}  // namespace simproto
