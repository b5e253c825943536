#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "simproto/bench.hpp"
#include "simproto/contrastive.hpp"
#include "simproto/datagen.hpp"
#include "simproto/label_softening.hpp"
#include "simproto/model.hpp"
#include "simproto/prototype.hpp"

namespace simproto {

struct ConfigKey {
  std::string name;
  std::string default_value;
  std::string help;
};

// Environment variable consulted for the default of `out`.
inline constexpr const char* kOutputRootEnv = "SIMPROTO_OUT";

// Flat key/value configuration. Files use `key = value` lines; a `[section]` header
// prefixes the following keys with `section.`. Unknown keys are rejected.
class RunConfig {
 public:
  RunConfig();

  static const std::vector<ConfigKey>& keys();

  void set(std::string_view key, std::string value);
  void load_file(const std::filesystem::path& file);

  const std::string& get(std::string_view key) const;
  bool get_bool(std::string_view key) const;
  int get_int(std::string_view key) const;
  std::uint64_t get_u64(std::string_view key) const;
  double get_double(std::string_view key) const;
  std::vector<int> get_int_list(std::string_view key) const;

  // Parses every typed view once; throws Config naming the bad key.
  void validate() const;

  std::uint64_t seed() const { return get_u64("seed"); }
  std::filesystem::path out_dir() const { return get("out"); }
  bool quiet() const { return get_bool("quiet"); }

  CorrelationMetric metric() const;
  LabelStrategy strategy() const;
  LsrStrategy lsr_settings() const;  // train.epsilon regardless of train.strategy
  GlsStrategy gls_settings() const;  // train.step and train.cap regardless of train.strategy
  std::optional<BclConfig> bcl() const;
  BclConfig bcl_settings() const;  // bcl.* regardless of bcl.enabled
  TrainConfig train_config() const;
  DataSpec data_spec() const;
  std::vector<StrategySpec> bench_strategies() const;
  std::vector<std::uint64_t> bench_seeds() const;
  GradCheckOptions gradcheck_options() const;

  // Canonical `key = value` listing, sorted by key.
  std::string dump() const;
  const std::map<std::string, std::string, std::less<>>& values() const { return values_; }

 private:
  std::map<std::string, std::string, std::less<>> values_;
};

// "1-2:0.8,3-4:0.8" with 1-based class indices.
std::vector<PairOverlap> parse_pairs(std::string_view text);
// "1-10" or "1,2,5" or a mix.
std::vector<std::uint64_t> parse_seed_list(std::string_view text);

}  // namespace simproto
