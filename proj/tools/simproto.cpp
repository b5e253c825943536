// simproto: semantic similarity prototypes, soft-label schedules and contrastive
// training on synthetic scene datasets.

#include <iostream>
#include <map>
#include <string>

#include <CLI11.hpp>

#include "simproto/commands.hpp"

namespace {

using simproto::RunConfig;

bool is_boolean_key(const simproto::ConfigKey& key) {
  return key.default_value == "true" || key.default_value == "false";
}

struct Subcommand {
  const char* name;
  const char* help;
  void (*run)(const RunConfig&, std::ostream*);
};

const Subcommand kSubcommands[] = {
    {"stats", "class-level semantic representations of a dataset",
     [](const RunConfig& c, std::ostream* log) { simproto::cmd_stats(c, log); }},
    {"prototype", "build and save a similarity prototype",
     [](const RunConfig& c, std::ostream* log) { simproto::cmd_prototype(c, log); }},
    {"gen", "write a synthetic confusable dataset",
     [](const RunConfig& c, std::ostream* log) { simproto::cmd_gen(c, log); }},
    {"train", "train a classifier and write its report and checkpoint",
     [](const RunConfig& c, std::ostream* log) { simproto::cmd_train(c, log); }},
    {"eval", "evaluate a checkpoint on the test split",
     [](const RunConfig& c, std::ostream* log) { simproto::cmd_eval(c, log); }},
    {"bench", "compare strategies over several seeds",
     [](const RunConfig& c, std::ostream* log) { simproto::cmd_bench(c, log); }},
    {"gradcheck", "compare analytic gradients with central differences",
     [](const RunConfig& c, std::ostream* log) { simproto::cmd_gradcheck(c, log); }},
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"semantic similarity prototypes for scene recognition"};
  app.require_subcommand(1);
  app.fallthrough();
  app.set_help_all_flag("--help-all", "list every configuration flag");

  std::string config_file;
  app.add_option("--config", config_file, "key = value configuration file")->check(CLI::ExistingFile);

  // One flag per configuration key; values given on the command line win over the file.
  std::map<std::string, std::string> flag_values;
  std::map<std::string, CLI::Option*> flags;
  for (const auto& key : RunConfig::keys()) {
    auto& slot = flag_values[key.name];
    auto help = key.help + " [" + (key.default_value.empty() ? "-" : key.default_value) + "]";
    CLI::Option* opt = nullptr;
    if (is_boolean_key(key)) {
      opt = app.add_option("--" + key.name, slot, help)->expected(0, 1)->type_name("[BOOL]");
    } else {
      opt = app.add_option("--" + key.name, slot, help)->type_name("VALUE");
    }
    if (key.name != "seed" && key.name != "out" && key.name != "quiet") opt->group("Configuration");
    flags[key.name] = opt;
  }

  const Subcommand* chosen = nullptr;
  for (const auto& sub : kSubcommands) {
    app.add_subcommand(sub.name, sub.help)->callback([&chosen, &sub] { chosen = &sub; });
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    RunConfig config;
    if (!config_file.empty()) config.load_file(config_file);
    for (const auto& key : RunConfig::keys()) {
      const auto* opt = flags[key.name];
      if (opt->count() == 0) continue;
      auto value = flag_values[key.name];
      if (value.empty() && is_boolean_key(key)) value = "true";
      config.set(key.name, value);
    }
    chosen->run(config, config.quiet() ? nullptr : &std::cout);
  } catch (const std::exception& e) {
    std::cerr << "simproto: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
