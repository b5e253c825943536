#include "simproto/dataset_io.hpp"

#include <cctype>
#include <cmath>
#include <charconv>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iterator>
#include <sstream>

#include "simproto/error.hpp"

namespace simproto {

namespace fs = std::filesystem;

namespace {

bool valid_class_name(const std::string& name) {
  if (name.empty() || name == "." || name == "..") return false;
  for (char ch : name) {
    if (std::isspace(static_cast<unsigned char>(ch)) || ch == '/' || ch == '\\' || ch == ',') {
      return false;
    }
  }
  return true;
}

std::size_t parse_count(const std::string& token, const std::string& context) {
  std::size_t value = 0;
  const auto* first = token.data();
  const auto* last = token.data() + token.size();
  auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc() || ptr != last) {
    throw Error(ErrorCode::Ingestion, context + ": expected a non-negative integer, got '" +
                                          token + "'");
  }
  return value;
}

}  // namespace

Manifest Manifest::read(const fs::path& file) {
  std::ifstream in(file);
  if (!in) throw Error(ErrorCode::Ingestion, file.string() + ": cannot open manifest");

  Manifest m;
  std::string line;
  int line_no = 0;
  bool saw_header = false;
  while (std::getline(in, line)) {
    ++line_no;
    const auto context = file.string() + ":" + std::to_string(line_no);
    std::istringstream ss(line);
    std::string key;
    if (!(ss >> key) || key.front() == '#') continue;
    if (!saw_header) {
      std::string version;
      if (key != "simproto-manifest" || !(ss >> version) || version != "v1") {
        throw Error(ErrorCode::Ingestion, context + ": missing 'simproto-manifest v1' header");
      }
      saw_header = true;
      continue;
    }
    std::vector<std::string> fields{std::istream_iterator<std::string>(ss),
                                    std::istream_iterator<std::string>()};
    if (key == "labels") {
      if (fields.size() != 1) throw Error(ErrorCode::Ingestion, context + ": 'labels <L>'");
      const auto l = parse_count(fields[0], context);
      if (l < 1 || l > 65535) {
        throw Error(ErrorCode::Ingestion, context + ": label count must be in [1, 65535]");
      }
      m.num_labels = static_cast<int>(l);
    } else if (key == "class") {
      if (fields.size() < 2 || fields.size() > 3) {
        throw Error(ErrorCode::Ingestion, context + ": 'class <name> <count> [<train_count>]'");
      }
      ManifestClass cls;
      cls.name = fields[0];
      if (!valid_class_name(cls.name)) {
        throw Error(ErrorCode::Ingestion, context + ": invalid class name '" + cls.name + "'");
      }
      cls.count = parse_count(fields[1], context);
      cls.train_count = fields.size() == 3 ? parse_count(fields[2], context) : cls.count;
      if (cls.train_count > cls.count) {
        throw Error(ErrorCode::Ingestion, context + ": train count exceeds map count");
      }
      m.classes.push_back(std::move(cls));
    } else {
      throw Error(ErrorCode::Ingestion, context + ": unknown manifest key '" + key + "'");
    }
  }
  if (!saw_header) throw Error(ErrorCode::Ingestion, file.string() + ": empty manifest");
  if (m.num_labels == 0) throw Error(ErrorCode::Ingestion, file.string() + ": missing 'labels'");
  if (m.classes.empty()) throw Error(ErrorCode::Ingestion, file.string() + ": no classes");
  return m;
}

void Manifest::write(const fs::path& file) const {
  std::ofstream out(file, std::ios::binary);
  if (!out) throw Error(ErrorCode::Ingestion, file.string() + ": cannot write manifest");
  out << "simproto-manifest v1\n";
  out << "labels " << num_labels << "\n";
  for (const auto& cls : classes) {
    out << "class " << cls.name << " " << cls.count << " " << cls.train_count << "\n";
  }
}

fs::path Manifest::map_path(const fs::path& root, const ManifestClass& cls, std::size_t index) {
  return root / cls.name / (std::to_string(index) + ".pgm");
}

namespace {

// Netpbm header tokens are whitespace separated; '#' starts a comment to end of line.
class PgmTokenizer {
 public:
  PgmTokenizer(const std::string& data, const fs::path& file) : data_(data), file_(file) {}

  std::string next() {
    skip();
    const std::size_t start = pos_;
    while (pos_ < data_.size() && !std::isspace(static_cast<unsigned char>(data_[pos_]))) ++pos_;
    if (start == pos_) throw Error(ErrorCode::Ingestion, file_.string() + ": truncated PGM");
    return data_.substr(start, pos_ - start);
  }

  int next_int(const char* what) {
    const auto token = next();
    int value = 0;
    auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), value);
    if (ec != std::errc() || ptr != token.data() + token.size()) {
      throw Error(ErrorCode::Ingestion,
                  file_.string() + ": malformed " + what + " '" + token + "'");
    }
    return value;
  }

  // Binary raster starts after exactly one whitespace byte following maxval.
  std::size_t raster_offset() {
    if (pos_ >= data_.size()) throw Error(ErrorCode::Ingestion, file_.string() + ": no raster");
    return pos_ + 1;
  }

 private:
  void skip() {
    while (pos_ < data_.size()) {
      const char ch = data_[pos_];
      if (ch == '#') {
        while (pos_ < data_.size() && data_[pos_] != '\n') ++pos_;
      } else if (std::isspace(static_cast<unsigned char>(ch))) {
        ++pos_;
      } else {
        break;
      }
    }
  }

  const std::string& data_;
  const fs::path& file_;
  std::size_t pos_ = 0;
};

}  // namespace

PgmImage read_pgm(const fs::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw Error(ErrorCode::Ingestion, file.string() + ": cannot open");
  const std::string data{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};

  PgmTokenizer tok(data, file);
  const auto magic = tok.next();
  if (magic != "P2" && magic != "P5") {
    throw Error(ErrorCode::Ingestion, file.string() + ": not a PGM (magic '" + magic + "')");
  }
  const int width = tok.next_int("width");
  const int height = tok.next_int("height");
  const int maxval = tok.next_int("maxval");
  if (width < 1 || height < 1) {
    throw Error(ErrorCode::Ingestion, file.string() + ": non-positive dimensions");
  }
  if (maxval < 1 || maxval > 65535) {
    throw Error(ErrorCode::Ingestion, file.string() + ": maxval must be in [1, 65535]");
  }

  const std::size_t n = static_cast<std::size_t>(width) * static_cast<std::size_t>(height);
  std::vector<int> pixels(n);
  if (magic == "P2") {
    for (std::size_t i = 0; i < n; ++i) pixels[i] = tok.next_int("pixel");
  } else {
    const std::size_t bytes = maxval < 256 ? 1 : 2;
    const std::size_t offset = tok.raster_offset();
    if (data.size() < offset + n * bytes) {
      throw Error(ErrorCode::Ingestion, file.string() + ": truncated raster");
    }
    const auto* raw = reinterpret_cast<const unsigned char*>(data.data() + offset);
    for (std::size_t i = 0; i < n; ++i) {
      pixels[i] = bytes == 1 ? raw[i] : (raw[2 * i] << 8) | raw[2 * i + 1];
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (pixels[i] < 0 || pixels[i] > maxval) {
      throw Error(ErrorCode::Ingestion, file.string() + ": pixel " + std::to_string(i) +
                                            " exceeds maxval");
    }
  }
  return {LabelMap(width, height, std::move(pixels)), maxval};
}

void write_pgm(const fs::path& file, const LabelMap& map, int maxval, bool ascii) {
  if (maxval < 1 || maxval > 65535) {
    throw Error(ErrorCode::Ingestion, file.string() + ": maxval must be in [1, 65535]");
  }
  for (int v : map.labels) {
    if (v < 0 || v > maxval) {
      throw Error(ErrorCode::Ingestion, file.string() + ": pixel value exceeds maxval");
    }
  }
  std::ofstream out(file, std::ios::binary);
  if (!out) throw Error(ErrorCode::Ingestion, file.string() + ": cannot write");
  out << (ascii ? "P2" : "P5") << "\n" << map.width << " " << map.height << "\n" << maxval << "\n";
  if (ascii) {
    for (int h = 0; h < map.height; ++h) {
      for (int w = 0; w < map.width; ++w) out << (w ? " " : "") << map.at(w, h);
      out << "\n";
    }
    return;
  }
  std::string raster;
  raster.reserve(map.labels.size() * 2);
  for (int v : map.labels) {
    if (maxval >= 256) raster.push_back(static_cast<char>((v >> 8) & 0xff));
    raster.push_back(static_cast<char>(v & 0xff));
  }
  out.write(raster.data(), static_cast<std::streamsize>(raster.size()));
}

std::string format_double(double value) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", value);
  return buf;
}

double parse_double(std::string_view text, std::string_view context) {
  const std::string s(text);
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (s.empty() || end != s.c_str() + s.size() || !std::isfinite(v)) {
    throw Error(ErrorCode::Ingestion,
                std::string(context) + ": malformed number '" + s + "'");
  }
  return v;
}

std::vector<std::string> split_csv_line(std::string_view line) {
  if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    out.emplace_back(line.substr(start, comma - start));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

FeatureSet read_features(const fs::path& file) {
  std::ifstream in(file);
  if (!in) throw Error(ErrorCode::Ingestion, file.string() + ": cannot open features");
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorCode::Ingestion, file.string() + ": empty file");
  const auto header = split_csv_line(line);
  if (header.size() < 2 || header[0] != "label") {
    throw Error(ErrorCode::Ingestion, file.string() + ": header must be 'label,f1..fD'");
  }
  for (std::size_t j = 1; j < header.size(); ++j) {
    if (header[j] != "f" + std::to_string(j)) {
      throw Error(ErrorCode::Ingestion, file.string() + ": unexpected column '" + header[j] + "'");
    }
  }
  const std::size_t dim = header.size() - 1;
  std::vector<int> labels;
  std::vector<double> values;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    const auto context = file.string() + ":" + std::to_string(line_no);
    const auto cells = split_csv_line(line);
    if (cells.size() != dim + 1) {
      throw Error(ErrorCode::Ingestion, context + ": expected " + std::to_string(dim + 1) +
                                            " columns, got " + std::to_string(cells.size()));
    }
    const auto label = parse_count(cells[0], context);
    if (label < 1) throw Error(ErrorCode::Ingestion, context + ": labels are 1-based");
    labels.push_back(static_cast<int>(label) - 1);
    for (std::size_t j = 1; j <= dim; ++j) values.push_back(parse_double(cells[j], context));
  }
  FeatureSet set;
  set.labels = std::move(labels);
  set.features = Eigen::Map<const Matrix>(values.data(), static_cast<Eigen::Index>(set.labels.size()),
                                          static_cast<Eigen::Index>(dim));
  return set;
}

void write_features(const fs::path& file, const FeatureSet& set) {
  std::ofstream out(file, std::ios::binary);
  if (!out) throw Error(ErrorCode::Ingestion, file.string() + ": cannot write features");
  out << "label";
  for (Eigen::Index j = 0; j < set.features.cols(); ++j) out << ",f" << (j + 1);
  out << "\n";
  for (std::size_t i = 0; i < set.size(); ++i) {
    out << (set.labels[i] + 1);
    for (Eigen::Index j = 0; j < set.features.cols(); ++j) {
      out << "," << format_double(set.features(static_cast<Eigen::Index>(i), j));
    }
    out << "\n";
  }
}

}  // namespace simproto
