#include "simproto/commands.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <map>
#include <ostream>

#include <json.hpp>

#include "simproto/dataset_io.hpp"
#include "simproto/error.hpp"

namespace simproto {

namespace {

using json = nlohmann::ordered_json;
namespace fs = std::filesystem;

void write_text(const fs::path& file, const std::string& text) {
  if (file.has_parent_path()) fs::create_directories(file.parent_path());
  std::ofstream out(file, std::ios::binary);
  if (!out) throw Error(ErrorCode::Ingestion, file.string() + ": cannot open for writing");
  out << text;
  if (!out) throw Error(ErrorCode::Ingestion, file.string() + ": write failed");
}

void write_json(const fs::path& file, const json& value) { write_text(file, value.dump(2) + "\n"); }

fs::path prepare_out(const RunConfig& config) {
  config.validate();
  const auto out = config.out_dir();
  if (out.empty()) throw Error(ErrorCode::Config, "out: output directory is empty");
  fs::create_directories(out);
  return out;
}

SummarizeOptions summarize_options(const RunConfig& config) {
  SummarizeOptions o;
  o.threads = static_cast<unsigned>(config.get_int("data.threads"));
  o.train_only = config.get_bool("data.train_only");
  return o;
}

fs::path require_data_dir(const RunConfig& config) {
  const auto& dir = config.get("data.dir");
  if (dir.empty()) throw Error(ErrorCode::Config, "data.dir: a dataset directory is required");
  return dir;
}

DatasetSemanticSummary summarize_dir(const RunConfig& config) {
  const auto dir = require_data_dir(config);
  const auto manifest = Manifest::read(dir / "manifest");
  return summarize_dataset(manifest, dir, summarize_options(config));
}

json confusion_json(const ConfusionMatrix& m) {
  json rows = json::array();
  for (int t = 0; t < m.num_classes; ++t) {
    json row = json::array();
    for (int p = 0; p < m.num_classes; ++p) row.push_back(m.at(t, p));
    rows.push_back(std::move(row));
  }
  return rows;
}

std::string confusion_csv(const ConfusionMatrix& m, const std::vector<std::string>& names) {
  std::string out = "true\\predicted";
  for (const auto& n : names) out += ',' + n;
  out += '\n';
  for (int t = 0; t < m.num_classes; ++t) {
    out += names[static_cast<std::size_t>(t)];
    for (int p = 0; p < m.num_classes; ++p) out += ',' + std::to_string(m.at(t, p));
    out += '\n';
  }
  return out;
}

json bcl_json(const std::optional<BclConfig>& bcl) {
  if (!bcl) return nullptr;
  json j;
  j["indexing"] = std::string(to_string(bcl->indexing));
  j["similarity"] = std::string(to_string(bcl->similarity));
  j["reduction"] = std::string(to_string(bcl->reduction));
  j["thresholds"] = std::string(to_string(bcl->source));
  j["weight"] = bcl->weight;
  return j;
}

json run_json(const TrainReport& report, bool timing) {
  json j;
  j["test_accuracy"] = report.test_accuracy;
  if (!report.epochs.empty()) {
    const auto& last = report.epochs.back();
    j["final_loss"] = last.loss;
    j["final_cross_entropy"] = last.cross_entropy;
    j["final_train_accuracy"] = last.train_accuracy;
  }
  j["confusion"] = confusion_json(report.confusion);
  if (timing) j["wall_seconds"] = report.wall_seconds;
  return j;
}

std::string matrix_csv(const Matrix& m, const std::vector<std::string>& names) {
  std::string out = "class";
  for (const auto& n : names) out += ',' + n;
  out += '\n';
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    out += names[static_cast<std::size_t>(i)];
    for (Eigen::Index j = 0; j < m.cols(); ++j) out += ',' + format_double(m(i, j));
    out += '\n';
  }
  return out;
}

std::vector<std::string> default_names(int classes) {
  std::vector<std::string> names;
  for (int c = 1; c <= classes; ++c) names.push_back("class_" + std::to_string(c));
  return names;
}

int max_label(const FeatureSet& set) {
  return set.labels.empty() ? -1 : *std::max_element(set.labels.begin(), set.labels.end());
}

std::vector<int> model_dims(const LoadedData& loaded, const std::vector<int>& hidden) {
  std::vector<int> dims{static_cast<int>(loaded.data.train.features.cols())};
  dims.insert(dims.end(), hidden.begin(), hidden.end());
  dims.push_back(loaded.num_classes);
  return dims;
}

}  // namespace

std::string report_csv(const TrainReport& report) {
  std::string out =
      "epoch,sigma,hard,loss,cross_entropy,inter,intra,train_accuracy,test_accuracy\n";
  for (const auto& r : report.epochs) {
    out += std::to_string(r.epoch) + ',' + format_double(r.sigma) + ',' + (r.hard ? "1" : "0") +
           ',' + format_double(r.loss) + ',' + format_double(r.cross_entropy) + ',' +
           format_double(r.inter) + ',' + format_double(r.intra) + ',' +
           format_double(r.train_accuracy) + ',' + format_double(r.test_accuracy) + '\n';
  }
  return out;
}

std::string bench_csv(const std::vector<BenchRow>& rows) {
  std::string out = "strategy,runs,mean,stddev,delta_mean,wins,losses,ties,sign_p\n";
  for (const auto& r : rows) {
    out += r.strategy + ',' + std::to_string(r.runs) + ',' + format_double(r.mean) + ',' +
           (r.stddev ? format_double(*r.stddev) : std::string()) + ',' +
           format_double(r.delta_mean) + ',' + std::to_string(r.wins) + ',' +
           std::to_string(r.losses) + ',' + std::to_string(r.ties) + ',' +
           format_double(r.sign_p) + '\n';
  }
  return out;
}

std::string run_file_stem(const std::string& strategy, std::uint64_t seed) {
  return strategy + "_seed" + std::to_string(seed);
}

LoadedData load_train_data(const RunConfig& config) {
  LoadedData out;
  const auto& dir_text = config.get("data.dir");
  if (dir_text.empty()) {
    auto generated = generate_train_data(config.data_spec(), config.seed());
    out.data = std::move(generated.train_data);
    out.class_names = generated.prototype.class_names;
  } else {
    const fs::path dir = dir_text;
    out.data.train = read_features(dir / "features_train.csv");
    out.data.test = read_features(dir / "features_test.csv");
    if (fs::exists(dir / "manifest")) {
      const auto manifest = Manifest::read(dir / "manifest");
      for (const auto& c : manifest.classes) out.class_names.push_back(c.name);
      if (config.get("prototype.in").empty()) {
        const auto summary = summarize_dataset(manifest, dir, summarize_options(config));
        out.data.prototype = build_prototype(summary, config.metric()).matrix;
      }
    }
  }
  if (const auto& in = config.get("prototype.in"); !in.empty()) {
    auto archive = load_archive(in);
    if (!out.class_names.empty() && out.class_names != archive.prototype.class_names) {
      throw Error(ErrorCode::DimensionMismatch,
                  in + ": prototype classes do not match the dataset classes");
    }
    out.class_names = archive.prototype.class_names;
    out.data.prototype = std::move(archive.prototype.matrix);
  }

  const auto& train = out.data.train;
  const auto& test = out.data.test;
  if (train.size() == 0) throw Error(ErrorCode::EmptyDataset, "training split is empty");
  if (test.size() > 0 && test.features.cols() != train.features.cols()) {
    throw Error(ErrorCode::DimensionMismatch,
                "train and test feature widths differ (" + std::to_string(train.features.cols()) +
                    " vs " + std::to_string(test.features.cols()) + ")");
  }
  if (!out.class_names.empty()) {
    out.num_classes = static_cast<int>(out.class_names.size());
  } else {
    out.num_classes = std::max(max_label(train), max_label(test)) + 1;
    out.class_names = default_names(out.num_classes);
  }
  if (std::max(max_label(train), max_label(test)) >= out.num_classes) {
    throw Error(ErrorCode::OutOfRange, "feature labels exceed the " +
                                           std::to_string(out.num_classes) + " known classes");
  }
  if (out.data.prototype.size() > 0 && out.data.prototype.rows() != out.num_classes) {
    throw Error(ErrorCode::DimensionMismatch, "prototype size does not match the class count");
  }
  return out;
}

DatasetSemanticSummary cmd_stats(const RunConfig& config, std::ostream* log) {
  const auto out = prepare_out(config);
  auto summary = summarize_dir(config);
  write_summary_csv(out / "stats.csv", summary);
  if (log) {
    *log << "stats: " << summary.num_classes() << " classes, " << summary.num_labels
         << " labels -> " << (out / "stats.csv").string() << "\n";
  }
  return summary;
}

PrototypeArchive cmd_prototype(const RunConfig& config, std::ostream* log) {
  const auto out = prepare_out(config);
  const auto& summary_file = config.get("prototype.summary");
  const auto summary = summary_file.empty() ? summarize_dir(config) : read_summary_csv(summary_file);
  auto archive = make_archive(summary, config.metric());
  save_archive(out, archive);
  if (log) {
    *log << "prototype: " << archive.prototype.num_classes() << " classes, metric "
         << to_string(archive.prototype.metric) << " -> " << (out / "proto.csv").string() << "\n";
  }
  return archive;
}

SyntheticDataset cmd_gen(const RunConfig& config, std::ostream* log) {
  const auto out = prepare_out(config);
  const auto spec = config.data_spec();
  const auto profiles = make_confusable_profiles(spec.classes, spec.labels, spec.confusable,
                                                 spec.regions, config.seed());
  auto dataset = sample_dataset(profiles, spec.sample);
  write_dataset(dataset, out);
  if (log) {
    *log << "gen: " << spec.classes << " classes x " << spec.sample.per_class << " maps, "
         << dataset.train.features.cols() << " features -> " << out.string() << "\n";
  }
  return dataset;
}

TrainReport cmd_train(const RunConfig& config, std::ostream* log) {
  const auto out = prepare_out(config);
  const auto cfg = config.train_config();
  const auto loaded = load_train_data(config);
  auto model = MlpClassifier::initialized(model_dims(loaded, cfg.hidden), cfg.seed);
  const auto report = train(model, loaded.data, cfg);

  write_text(out / "report.csv", report_csv(report));
  model.save(out / "model.ckpt");

  json metrics;
  metrics["strategy"] = describe(cfg.strategy);
  metrics["bcl"] = bcl_json(cfg.bcl);
  metrics["seed"] = cfg.seed;
  metrics["epochs"] = cfg.epochs;
  metrics["batch_size"] = cfg.batch_size;
  metrics["learning_rate"] = cfg.learning_rate;
  metrics["weight_decay"] = cfg.weight_decay;
  metrics["hidden"] = cfg.hidden;
  metrics["train_size"] = loaded.data.train.size();
  metrics["test_size"] = loaded.data.test.size();
  metrics["class_names"] = loaded.class_names;
  metrics.update(run_json(report, config.get_bool("timing")));
  write_json(out / "metrics.json", metrics);

  if (config.get_bool("train.export_embeddings")) {
    const auto emb = export_embeddings(model, loaded.data.test);
    write_features(out / "embeddings_test.csv", FeatureSet{emb.values, emb.labels});
  }
  if (config.get_bool("train.export_labels")) {
    for (int e = 1; e <= cfg.epochs; ++e) {
      const auto labels = strategy_labels(cfg.strategy, loaded.data.prototype, loaded.num_classes, e);
      write_text(out / "labels" / ("epoch_" + std::to_string(e) + ".csv"),
                 matrix_csv(labels.rows, loaded.class_names));
    }
  }
  if (log) {
    *log << "train: " << describe(cfg.strategy) << (cfg.bcl ? " + contrastive" : "")
         << ", test accuracy " << report.test_accuracy << " -> " << out.string() << "\n";
  }
  return report;
}

Evaluation cmd_eval(const RunConfig& config, std::ostream* log) {
  const auto out = prepare_out(config);
  fs::path checkpoint = config.get("eval.checkpoint");
  if (checkpoint.empty()) checkpoint = out / "model.ckpt";
  const auto model = MlpClassifier::load(checkpoint);
  const auto loaded = load_train_data(config);
  if (model.input_dim() != loaded.data.test.features.cols() ||
      model.num_classes() != loaded.num_classes) {
    throw Error(ErrorCode::DimensionMismatch,
                checkpoint.string() + ": model shape does not match the evaluation data");
  }
  const auto result = evaluate(model, loaded.data.test);

  json j;
  j["checkpoint"] = checkpoint.string();
  j["samples"] = result.confusion.total();
  j["correct"] = result.confusion.correct();
  j["accuracy"] = result.accuracy;
  j["class_names"] = loaded.class_names;
  j["confusion"] = confusion_json(result.confusion);
  write_json(out / "eval.json", j);
  write_text(out / "confusion.csv", confusion_csv(result.confusion, loaded.class_names));
  if (log) *log << "eval: accuracy " << result.accuracy << " on " << result.confusion.total() << " samples\n";
  return result;
}

std::vector<BenchRow> cmd_bench(const RunConfig& config, std::ostream* log) {
  const auto out = prepare_out(config);
  BenchSetup setup;
  setup.strategies = config.bench_strategies();
  setup.seeds = config.bench_seeds();
  setup.train = config.train_config();
  setup.threads = static_cast<unsigned>(config.get_int("bench.threads"));
  if (config.get("data.dir").empty() && config.get("prototype.in").empty()) {
    setup.generator = config.data_spec();
  } else {
    setup.fixed = load_train_data(config).data;
  }
  const auto runs = run_bench(setup);

  const bool timing = config.get_bool("timing");
  for (const auto& run : runs) {
    const auto stem = run_file_stem(run.strategy, run.seed);
    write_text(out / "runs" / (stem + ".csv"), report_csv(run.report));
    json j;
    j["strategy"] = run.strategy;
    j["seed"] = run.seed;
    j.update(run_json(run.report, timing));
    write_json(out / "runs" / (stem + ".json"), j);
  }

  std::vector<std::string> order;
  for (const auto& s : setup.strategies) order.push_back(s.name);
  auto rows = summarize_bench(runs, order);
  write_text(out / "bench.csv", bench_csv(rows));
  if (log) {
    char line[160];
    std::snprintf(line, sizeof line, "%-16s %5s %9s %9s %9s %7s %8s\n", "strategy", "runs", "mean",
                  "stddev", "delta", "W/L/T", "sign_p");
    *log << line;
    for (const auto& r : rows) {
      char sd[32] = "-";
      if (r.stddev) std::snprintf(sd, sizeof sd, "%.4f", *r.stddev);
      const auto wlt = std::to_string(r.wins) + "/" + std::to_string(r.losses) + "/" +
                       std::to_string(r.ties);
      std::snprintf(line, sizeof line, "%-16s %5zu %9.4f %9s %+9.4f %7s %8.4f\n", r.strategy.c_str(),
                    r.runs, r.mean,
                    sd,
                    r.delta_mean, wlt.c_str(), r.sign_p);
      *log << line;
    }
  }
  return rows;
}

GradCheckReport cmd_gradcheck(const RunConfig& config, std::ostream* log) {
  const auto out = prepare_out(config);
  const auto report = gradient_check(config.gradcheck_options());

  std::string csv = "description,labels,indexing,similarity,reduction,level,batch,classes,max_rel_error\n";
  std::map<std::string, std::map<std::string, double>> axes;
  for (const auto& c : report.cases) {
    csv += c.description + ',' + c.labels + ',' + c.indexing + ',' + c.similarity + ',' +
           c.reduction + ',' + c.level + ',' + std::to_string(c.batch) + ',' +
           std::to_string(c.classes) + ',' + format_double(c.max_rel_error) + '\n';
    const std::pair<const char*, const std::string*> keys[] = {
        {"labels", &c.labels},         {"indexing", &c.indexing}, {"similarity", &c.similarity},
        {"reduction", &c.reduction},   {"level", &c.level}};
    for (const auto& [axis, value] : keys) {
      auto& worst = axes[axis][*value];
      worst = std::max(worst, c.max_rel_error);
    }
  }
  write_text(out / "gradcheck.csv", csv);

  json j;
  j["cases"] = report.cases.size();
  j["worst_ce_only"] = report.worst_ce_only;
  j["worst_composite"] = report.worst_composite;
  json per_axis;
  for (const auto& [axis, values] : axes) {
    json a;
    for (const auto& [value, worst] : values) a[value] = worst;
    per_axis[axis] = std::move(a);
  }
  j["worst_by_axis"] = std::move(per_axis);
  write_json(out / "gradcheck.json", j);
  if (log) {
    *log << "gradcheck: " << report.cases.size() << " cases, worst CE-only "
         << report.worst_ce_only << ", worst composite " << report.worst_composite << "\n";
  }
  return report;
}

}  // namespace simproto
