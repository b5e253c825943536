#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "simproto/archive.hpp"
#include "simproto/bench.hpp"
#include "simproto/config.hpp"
#include "simproto/datagen.hpp"
#include "simproto/model.hpp"

namespace simproto {

// Every command validates the whole config first, writes under config.out_dir()
// and returns what it wrote. Progress lines go to log unless it is null.

// <out>/stats.csv
DatasetSemanticSummary cmd_stats(const RunConfig& config, std::ostream* log);
// <out>/proto.csv, <out>/proto.json. Input is prototype.summary when set, else data.dir.
PrototypeArchive cmd_prototype(const RunConfig& config, std::ostream* log);
// Dataset layout rooted at <out>.
SyntheticDataset cmd_gen(const RunConfig& config, std::ostream* log);
// <out>/report.csv, metrics.json, model.ckpt, plus optional embeddings and label exports.
TrainReport cmd_train(const RunConfig& config, std::ostream* log);
// <out>/eval.json, <out>/confusion.csv
Evaluation cmd_eval(const RunConfig& config, std::ostream* log);
// <out>/bench.csv and <out>/runs/<strategy>_seed<k>.{csv,json}
std::vector<BenchRow> cmd_bench(const RunConfig& config, std::ostream* log);
// <out>/gradcheck.csv, <out>/gradcheck.json
GradCheckReport cmd_gradcheck(const RunConfig& config, std::ostream* log);

struct LoadedData {
  TrainData data;
  std::vector<std::string> class_names;
  int num_classes = 0;
};

// Features and prototype for train/eval/bench: generated from gen.* when data.dir is
// empty, otherwise read from data.dir. prototype.in replaces the derived prototype.
LoadedData load_train_data(const RunConfig& config);

std::string report_csv(const TrainReport& report);
std::string bench_csv(const std::vector<BenchRow>& rows);
std::string run_file_stem(const std::string& strategy, std::uint64_t seed);

}  // namespace simproto
