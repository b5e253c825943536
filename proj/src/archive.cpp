#include "simproto/archive.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "simproto/dataset_io.hpp"
#include "simproto/error.hpp"

namespace simproto {

namespace {

using json = nlohmann::ordered_json;

std::ofstream open_out(const std::filesystem::path& file) {
  std::ofstream out(file, std::ios::binary);
  if (!out) throw Error(ErrorCode::Ingestion, file.string() + ": cannot open for writing");
  return out;
}

std::string read_text(const std::filesystem::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw Error(ErrorCode::Ingestion, file.string() + ": cannot open");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<std::string> lines_of(const std::string& text) {
  std::vector<std::string> lines;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) lines.push_back(line);
  }
  return lines;
}

}  // namespace

std::string summary_csv(const DatasetSemanticSummary& summary) {
  std::string out = "class,N";
  for (int l = 1; l <= summary.num_labels; ++l) out += ",s" + std::to_string(l);
  out += '\n';
  for (const auto& rep : summary.representations) {
    out += rep.class_name + ',' + std::to_string(rep.instance_count);
    for (double v : rep.values) out += ',' + format_double(v);
    out += '\n';
  }
  return out;
}

void write_summary_csv(const std::filesystem::path& file, const DatasetSemanticSummary& summary) {
  open_out(file) << summary_csv(summary);
}

DatasetSemanticSummary read_summary_csv(const std::filesystem::path& file) {
  const auto lines = lines_of(read_text(file));
  if (lines.empty()) throw Error(ErrorCode::Ingestion, file.string() + ": empty summary");
  const auto header = split_csv_line(lines[0]);
  if (header.size() < 3 || header[0] != "class" || header[1] != "N") {
    throw Error(ErrorCode::Ingestion, file.string() + ": expected header class,N,s1..sL");
  }
  DatasetSemanticSummary summary;
  summary.num_labels = static_cast<int>(header.size() - 2);
  for (std::size_t r = 1; r < lines.size(); ++r) {
    const auto context = file.string() + ":" + std::to_string(r + 1);
    const auto cells = split_csv_line(lines[r]);
    if (cells.size() != header.size()) {
      throw Error(ErrorCode::Ingestion, context + ": expected " + std::to_string(header.size()) +
                                            " fields");
    }
    ClassSemanticRepresentation rep;
    rep.class_id = static_cast<int>(r);
    rep.class_name = cells[0];
    const double n = parse_double(cells[1], context);
    if (!(n >= 1.0) || n != static_cast<double>(static_cast<std::size_t>(n))) {
      throw Error(ErrorCode::Ingestion, context + ": N must be a positive integer");
    }
    rep.instance_count = static_cast<std::size_t>(n);
    for (std::size_t k = 2; k < cells.size(); ++k) {
      const double v = parse_double(cells[k], context);
      if (!(v >= 0.0 && v <= 1.0)) {
        throw Error(ErrorCode::Ingestion, context + ": representation entries must be in [0, 1]");
      }
      rep.values.push_back(v);
    }
    summary.representations.push_back(std::move(rep));
  }
  return summary;
}

std::string fnv1a_hex(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

PrototypeArchive make_archive(const DatasetSemanticSummary& summary, CorrelationMetric metric) {
  PrototypeArchive a;
  a.prototype = build_prototype(summary, metric);
  a.num_labels = summary.num_labels;
  a.digest = fnv1a_hex(summary_csv(summary));
  return a;
}

void save_archive(const std::filesystem::path& dir, const PrototypeArchive& archive) {
  const auto& p = archive.prototype;
  const auto c = static_cast<std::size_t>(p.num_classes());
  if (p.class_names.size() != c) {
    throw Error(ErrorCode::DimensionMismatch, "prototype has " + std::to_string(c) +
                                                  " rows but " +
                                                  std::to_string(p.class_names.size()) + " names");
  }
  std::filesystem::create_directories(dir);
  {
    auto out = open_out(dir / "proto.csv");
    out << "class";
    for (const auto& name : p.class_names) out << ',' << name;
    out << '\n';
    for (std::size_t i = 0; i < c; ++i) {
      out << p.class_names[i];
      for (std::size_t j = 0; j < c; ++j) {
        out << ',' << format_double(p.matrix(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)));
      }
      out << '\n';
    }
  }
  json meta;
  meta["format"] = "simproto-prototype";
  meta["version"] = 1;
  meta["metric"] = std::string(to_string(p.metric));
  meta["classes"] = c;
  meta["labels"] = archive.num_labels;
  meta["class_names"] = p.class_names;
  meta["digest"] = archive.digest;
  meta["tool_version"] = archive.tool_version;
  open_out(dir / "proto.json") << meta.dump(2) << '\n';
}

PrototypeArchive load_archive(const std::filesystem::path& dir) {
  const auto json_file = dir / "proto.json";
  const auto csv_file = dir / "proto.csv";
  json meta;
  try {
    meta = json::parse(read_text(json_file));
  } catch (const json::exception& e) {
    throw Error(ErrorCode::Ingestion, json_file.string() + ": " + e.what());
  }
  PrototypeArchive a;
  try {
    if (meta.at("format") != "simproto-prototype" || meta.at("version") != 1) {
      throw Error(ErrorCode::Ingestion, json_file.string() + ": unsupported archive format");
    }
    a.prototype.metric = parse_metric(meta.at("metric").get<std::string>());
    a.num_labels = meta.at("labels").get<int>();
    a.digest = meta.at("digest").get<std::string>();
    a.tool_version = meta.at("tool_version").get<std::string>();
    a.prototype.class_names = meta.at("class_names").get<std::vector<std::string>>();
    if (meta.at("classes").get<std::size_t>() != a.prototype.class_names.size()) {
      throw Error(ErrorCode::Ingestion, json_file.string() + ": classes disagrees with class_names");
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::Ingestion, json_file.string() + ": " + e.what());
  }

  const auto lines = lines_of(read_text(csv_file));
  const auto c = a.prototype.class_names.size();
  if (lines.size() != c + 1) {
    throw Error(ErrorCode::Ingestion, csv_file.string() + ": expected " + std::to_string(c) +
                                          " matrix rows");
  }
  const auto header = split_csv_line(lines[0]);
  if (header.size() != c + 1 || header[0] != "class" ||
      !std::equal(header.begin() + 1, header.end(), a.prototype.class_names.begin())) {
    throw Error(ErrorCode::Ingestion, csv_file.string() + ": header does not match proto.json");
  }
  a.prototype.matrix.resize(static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(c));
  for (std::size_t i = 0; i < c; ++i) {
    const auto context = csv_file.string() + ":" + std::to_string(i + 2);
    const auto cells = split_csv_line(lines[i + 1]);
    if (cells.size() != c + 1 || cells[0] != a.prototype.class_names[i]) {
      throw Error(ErrorCode::Ingestion, context + ": malformed row");
    }
    for (std::size_t j = 0; j < c; ++j) {
      a.prototype.matrix(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          parse_double(cells[j + 1], context);
    }
  }
  try {
    validate_prototype(a.prototype.matrix);
  } catch (const Error& e) {
    throw Error(e.code(), csv_file.string() + ": " + e.detail());
  }
  return a;
}

}  // namespace simproto
