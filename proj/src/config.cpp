#include "simproto/config.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "simproto/dataset_io.hpp"
#include "simproto/error.hpp"

namespace simproto {

namespace {

std::string trim(std::string_view s) {
  const auto* ws = " \t\r\n";
  const auto b = s.find_first_not_of(ws);
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(ws);
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split(std::string_view s, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = s.find(sep, start);
    auto piece = trim(s.substr(start, pos - start));
    if (!piece.empty()) out.push_back(std::move(piece));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

template <typename T>
T parse_integer(std::string_view text, std::string_view key) {
  T value{};
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (text.empty() || ec != std::errc() || ptr != text.data() + text.size()) {
    throw Error(ErrorCode::Config, std::string(key) + ": expected an integer, got '" +
                                       std::string(text) + "'");
  }
  return value;
}

std::string default_out() {
  const char* env = std::getenv(kOutputRootEnv);
  return env && *env ? env : "out";
}

}  // namespace

const std::vector<ConfigKey>& RunConfig::keys() {
  static const std::vector<ConfigKey> k = {
      {"seed", "1", "run seed (model init, shuffling, generator)"},
      {"out", "", "output directory (default $SIMPROTO_OUT or ./out)"},
      {"quiet", "false", "suppress progress output"},
      {"timing", "false", "record wall-clock seconds in metrics files"},
      {"data.dir", "", "dataset root (manifest, class folders, feature CSVs)"},
      {"data.threads", "1", "worker threads for label-map ingestion"},
      {"data.train_only", "true", "summarize only the training split of each class"},
      {"prototype.metric", "cosine", "cosine | euclidean"},
      {"prototype.in", "", "prototype archive directory (proto.csv + proto.json)"},
      {"prototype.summary", "", "stats CSV to build the prototype from"},
      {"gen.classes", "7", "scene classes"},
      {"gen.labels", "30", "semantic labels L"},
      {"gen.regions", "12", "regions K per label map"},
      {"gen.width", "12", "label map width"},
      {"gen.height", "12", "label map height"},
      {"gen.per_class", "300", "instances per class"},
      {"gen.pairs", "1-2:0.8,3-4:0.8", "confusable pairs a-b:overlap (1-based)"},
      {"gen.background", "0.2", "occurrence mass shared by every class"},
      {"gen.feature_noise", "0.1", "Gaussian sigma on histogram features"},
      {"gen.distractors", "100", "appended noise dimensions"},
      {"gen.distractor_noise", "1", "sigma of distractor dimensions"},
      {"gen.split", "0.5", "training share per class"},
      {"train.strategy", "hard", "hard | lsr | gls"},
      {"train.epsilon", "0.1", "LSR smoothing weight"},
      {"train.step", "20", "GLS STEP (epochs of soft labels)"},
      {"train.cap", "0.99", "GLS confidence ceiling"},
      {"train.epochs", "30", "training epochs"},
      {"train.batch_size", "32", "mini-batch size"},
      {"train.learning_rate", "0.001", "Adam learning rate"},
      {"train.weight_decay", "1e-05", "Adam L2 weight decay"},
      {"train.hidden", "64", "hidden layer widths, comma separated"},
      {"train.shuffle", "true", "reshuffle the training split each epoch"},
      {"train.export_embeddings", "false", "write penultimate activations of the test split"},
      {"train.export_labels", "false", "write the soft-label matrix of every epoch"},
      {"bcl.enabled", "false", "add the batch-level contrastive loss"},
      {"bcl.indexing", "entry", "entry | row_product"},
      {"bcl.similarity", "cosine", "cosine | euclidean (on logits)"},
      {"bcl.reduction", "mean_inter",
       "mean_inter | nonzero_inter_intra | mean_inter_intra | nonzero_inter"},
      {"bcl.thresholds", "prototype", "prototype | traditional"},
      {"bcl.weight", "1", "weight of the contrastive term"},
      {"eval.checkpoint", "", "checkpoint to evaluate"},
      {"bench.strategies", "hard,lsr,gls,gls+bcl", "strategies to compare"},
      {"bench.seeds", "1-10", "seeds, e.g. 1-10 or 1,3,5"},
      {"bench.threads", "1", "concurrent seeds"},
      {"gradcheck.trials", "32", "random instances"},
      {"gradcheck.step", "1e-05", "central difference step"},
      {"gradcheck.parameters", "true", "also check parameter gradients through an MLP"},
  };
  return k;
}

RunConfig::RunConfig() {
  for (const auto& key : keys()) values_[key.name] = key.default_value;
  values_["out"] = default_out();
}

void RunConfig::set(std::string_view key, std::string value) {
  const auto it = values_.find(key);
  if (it == values_.end()) throw Error(ErrorCode::Config, "unknown key '" + std::string(key) + "'");
  it->second = trim(value);
}

void RunConfig::load_file(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw Error(ErrorCode::Config, file.string() + ": cannot open config");
  std::string line;
  std::string section;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto context = file.string() + ":" + std::to_string(line_no);
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const auto text = trim(line);
    if (text.empty()) continue;
    if (text.front() == '[') {
      if (text.back() != ']') throw Error(ErrorCode::Config, context + ": malformed section");
      section = trim(std::string_view(text).substr(1, text.size() - 2));
      continue;
    }
    const auto eq = text.find('=');
    if (eq == std::string::npos) throw Error(ErrorCode::Config, context + ": expected key = value");
    auto key = trim(std::string_view(text).substr(0, eq));
    if (!section.empty()) key = section + "." + key;
    try {
      set(key, trim(std::string_view(text).substr(eq + 1)));
    } catch (const Error& e) {
      throw Error(e.code(), context + ": " + e.detail());
    }
  }
}

const std::string& RunConfig::get(std::string_view key) const {
  const auto it = values_.find(key);
  if (it == values_.end()) throw Error(ErrorCode::Config, "unknown key '" + std::string(key) + "'");
  return it->second;
}

bool RunConfig::get_bool(std::string_view key) const {
  const auto& v = get(key);
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw Error(ErrorCode::Config, std::string(key) + ": expected a boolean, got '" + v + "'");
}

int RunConfig::get_int(std::string_view key) const { return parse_integer<int>(get(key), key); }

std::uint64_t RunConfig::get_u64(std::string_view key) const {
  return parse_integer<std::uint64_t>(get(key), key);
}

double RunConfig::get_double(std::string_view key) const {
  const auto& v = get(key);
  try {
    return parse_double(v, key);
  } catch (const Error&) {
    throw Error(ErrorCode::Config, std::string(key) + ": expected a number, got '" + v + "'");
  }
}

std::vector<int> RunConfig::get_int_list(std::string_view key) const {
  std::vector<int> out;
  for (const auto& piece : split(get(key), ',')) out.push_back(parse_integer<int>(piece, key));
  return out;
}

std::vector<PairOverlap> parse_pairs(std::string_view text) {
  std::vector<PairOverlap> out;
  for (const auto& item : split(text, ',')) {
    const auto colon = item.find(':');
    const auto dash = item.find('-');
    if (colon == std::string::npos || dash == std::string::npos || dash > colon) {
      throw Error(ErrorCode::Config, "gen.pairs: expected a-b:overlap, got '" + item + "'");
    }
    PairOverlap p;
    p.a = parse_integer<int>(trim(item.substr(0, dash)), "gen.pairs") - 1;
    p.b = parse_integer<int>(trim(item.substr(dash + 1, colon - dash - 1)), "gen.pairs") - 1;
    p.overlap = parse_double(trim(item.substr(colon + 1)), "gen.pairs");
    out.push_back(p);
  }
  return out;
}

std::vector<std::uint64_t> parse_seed_list(std::string_view text) {
  std::vector<std::uint64_t> out;
  for (const auto& item : split(text, ',')) {
    if (const auto dash = item.find('-'); dash != std::string::npos) {
      const auto lo = parse_integer<std::uint64_t>(trim(item.substr(0, dash)), "bench.seeds");
      const auto hi = parse_integer<std::uint64_t>(trim(item.substr(dash + 1)), "bench.seeds");
      if (hi < lo || hi - lo > 100000) throw Error(ErrorCode::Config, "bench.seeds: bad range '" + item + "'");
      for (auto s = lo; s <= hi; ++s) out.push_back(s);
    } else {
      out.push_back(parse_integer<std::uint64_t>(item, "bench.seeds"));
    }
  }
  if (out.empty()) throw Error(ErrorCode::Config, "bench.seeds is empty");
  return out;
}

CorrelationMetric RunConfig::metric() const { return parse_metric(get("prototype.metric")); }

LsrStrategy RunConfig::lsr_settings() const {
  const double eps = get_double("train.epsilon");
  if (!(eps > 0.0 && eps < 1.0)) throw Error(ErrorCode::Config, "train.epsilon must be in (0, 1)");
  return LsrStrategy{eps};
}

GlsStrategy RunConfig::gls_settings() const {
  const int step = get_int("train.step");
  const double cap = get_double("train.cap");
  if (step < 1) throw Error(ErrorCode::Config, "train.step must be >= 1");
  if (!(cap > 0.0 && cap < 1.0)) throw Error(ErrorCode::Config, "train.cap must be in (0, 1)");
  return GlsStrategy{step, cap};
}

LabelStrategy RunConfig::strategy() const {
  const auto& name = get("train.strategy");
  if (name == "hard") return HardStrategy{};
  if (name == "lsr") return lsr_settings();
  if (name == "gls") return gls_settings();
  throw Error(ErrorCode::Config, "train.strategy: unknown strategy '" + name + "' (hard|lsr|gls)");
}

BclConfig RunConfig::bcl_settings() const {
  BclConfig c;
  c.indexing = parse_indexing(get("bcl.indexing"));
  c.similarity = parse_pair_similarity(get("bcl.similarity"));
  c.reduction = parse_reduction(get("bcl.reduction"));
  c.source = parse_threshold_source(get("bcl.thresholds"));
  c.weight = get_double("bcl.weight");
  if (!(c.weight >= 0.0)) throw Error(ErrorCode::Config, "bcl.weight must be >= 0");
  return c;
}

std::optional<BclConfig> RunConfig::bcl() const {
  if (!get_bool("bcl.enabled")) return std::nullopt;
  return bcl_settings();
}

TrainConfig RunConfig::train_config() const {
  TrainConfig c;
  c.strategy = strategy();
  c.bcl = bcl();
  c.epochs = get_int("train.epochs");
  c.batch_size = get_int("train.batch_size");
  c.learning_rate = get_double("train.learning_rate");
  c.weight_decay = get_double("train.weight_decay");
  c.seed = seed();
  c.shuffle = get_bool("train.shuffle");
  c.hidden = get_int_list("train.hidden");
  if (c.epochs < 0) throw Error(ErrorCode::Config, "train.epochs must be >= 0");
  if (c.batch_size < 1) throw Error(ErrorCode::Config, "train.batch_size must be >= 1");
  if (!(c.learning_rate > 0.0)) throw Error(ErrorCode::Config, "train.learning_rate must be > 0");
  if (!(c.weight_decay >= 0.0)) throw Error(ErrorCode::Config, "train.weight_decay must be >= 0");
  for (int h : c.hidden) {
    if (h < 1) throw Error(ErrorCode::Config, "train.hidden widths must be positive");
  }
  return c;
}

DataSpec RunConfig::data_spec() const {
  DataSpec d;
  d.classes = get_int("gen.classes");
  d.labels = get_int("gen.labels");
  d.regions = get_int("gen.regions");
  d.confusable.pairs = parse_pairs(get("gen.pairs"));
  d.confusable.background = get_double("gen.background");
  d.sample.per_class = get_int("gen.per_class");
  d.sample.width = get_int("gen.width");
  d.sample.height = get_int("gen.height");
  d.sample.feature_noise = get_double("gen.feature_noise");
  d.sample.distractors = get_int("gen.distractors");
  d.sample.distractor_noise = get_double("gen.distractor_noise");
  d.sample.split_fraction = get_double("gen.split");
  d.sample.seed = seed();
  d.metric = metric();
  return d;
}

std::vector<StrategySpec> RunConfig::bench_strategies() const {
  const auto lsr = lsr_settings();
  const auto gls = gls_settings();
  const auto bcl_cfg = bcl_settings();
  std::vector<StrategySpec> out;
  for (const auto& token : split(get("bench.strategies"), ',')) {
    out.push_back(parse_strategy(token, lsr, gls, bcl_cfg));
  }
  if (out.empty()) throw Error(ErrorCode::Config, "bench.strategies is empty");
  return out;
}

std::vector<std::uint64_t> RunConfig::bench_seeds() const { return parse_seed_list(get("bench.seeds")); }

GradCheckOptions RunConfig::gradcheck_options() const {
  GradCheckOptions o;
  o.trials = get_int("gradcheck.trials");
  o.step = get_double("gradcheck.step");
  o.seed = seed();
  o.parameters = get_bool("gradcheck.parameters");
  if (o.trials < 1) throw Error(ErrorCode::Config, "gradcheck.trials must be >= 1");
  if (!(o.step > 0.0)) throw Error(ErrorCode::Config, "gradcheck.step must be > 0");
  return o;
}

void RunConfig::validate() const {
  (void)seed();
  (void)quiet();
  (void)get_bool("timing");
  (void)get_int("data.threads");
  (void)train_config();
  (void)data_spec();
  (void)bench_strategies();
  (void)bench_seeds();
  (void)gradcheck_options();
  (void)get_bool("train.export_embeddings");
  (void)get_bool("train.export_labels");
  (void)get_bool("data.train_only");
  if (get_int("data.threads") < 1) throw Error(ErrorCode::Config, "data.threads must be >= 1");
  if (get_int("bench.threads") < 1) throw Error(ErrorCode::Config, "bench.threads must be >= 1");
}

std::string RunConfig::dump() const {
  std::ostringstream ss;
  for (const auto& [k, v] : values_) ss << k << " = " << v << "\n";
  return ss.str();
}

}  // namespace simproto
