#pragma once

#include <charconv>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "grami/hin/graph.hpp"
#include "grami/numeric/checkpoint.hpp"

// Dataset directory layout:
//   schema.json              {"node_types": [{name, count, attributed, feature_dim}],
//                             "relations":  [{relation, src, dst}]}
//   edges_<relation>.tsv     "src<TAB>dst" per line, 0-based
//   features_<type>.csv      n lines of d comma-separated decimals
//   features_<type>.f32      (alternative) n*d little-endian f32, row-major
//   labels_<type>.txt        optional, one integer per line

namespace grami {

namespace fs = std::filesystem;

namespace detail {

inline std::string located(const fs::path& file, std::size_t line) {
  return file.filename().string() + ":" + std::to_string(line);
}

inline std::string trim(std::string s) {
  const auto ws = " \t\r\n";
  s.erase(0, s.find_first_not_of(ws));
  s.erase(s.find_last_not_of(ws) + 1);
  return s;
}

template <class T>
bool parse_number(std::string_view text, T& out) {
  const char* first = text.data();
  const char* last = text.data() + text.size();
  while (first < last && (*first == ' ' || *first == '\t')) ++first;
  while (last > first && (last[-1] == ' ' || last[-1] == '\t' || last[-1] == '\r')) --last;
  if (first == last) return false;
  if constexpr (std::is_floating_point_v<T>) {
    if (*first == '+') ++first;
  }
  auto [ptr, ec] = std::from_chars(first, last, out);
  return ec == std::errc() && ptr == last;
}

inline std::ifstream open_or_fail(const fs::path& p) {
  std::ifstream in(p);
  require(static_cast<bool>(in), ErrorKind::MissingFile, p.string());
  return in;
}

inline std::vector<Pair> read_edges(const fs::path& file, index_t n_src, index_t n_dst) {
  auto in = open_or_fail(file);
  std::vector<Pair> pairs;
  std::set<Pair> seen;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    const auto tab = line.find('\t');
    index_t u = 0, v = 0;
    require(tab != std::string::npos && parse_number(std::string_view(line).substr(0, tab), u) &&
                parse_number(std::string_view(line).substr(tab + 1), v),
            ErrorKind::SchemaMismatch, located(file, lineno) + ": expected two tab-separated integers");
    require(u >= 0 && u < n_src && v >= 0 && v < n_dst, ErrorKind::IndexOutOfRange,
            located(file, lineno) + ": edge (" + std::to_string(u) + "," + std::to_string(v) + ") outside " +
                shape_str(n_src, n_dst));
    require(seen.insert({u, v}).second, ErrorKind::DuplicateEdge,
            located(file, lineno) + ": edge (" + std::to_string(u) + "," + std::to_string(v) + ") repeated");
    pairs.emplace_back(u, v);
  }
  return pairs;
}

inline MatF read_features_csv(const fs::path& file, index_t rows, index_t cols) {
  auto in = open_or_fail(file);
  MatF m(rows, cols);
  std::string line;
  std::size_t lineno = 0;
  index_t r = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    require(r < rows, ErrorKind::SchemaMismatch, located(file, lineno) + ": more than " + std::to_string(rows) + " rows");
    index_t c = 0;
    std::size_t start = 0;
    while (true) {
      const auto comma = line.find(',', start);
      const auto field = std::string_view(line).substr(start, comma == std::string::npos ? std::string::npos : comma - start);
      require(c < cols, ErrorKind::SchemaMismatch, located(file, lineno) + ": more than " + std::to_string(cols) + " values");
      float value = 0;
      require(parse_number(field, value), ErrorKind::SchemaMismatch,
              located(file, lineno) + ": cannot parse '" + std::string(field) + "'");
      require(std::isfinite(value), ErrorKind::NonFiniteFeature, located(file, lineno) + ": non-finite value");
      m(r, c++) = value;
      if (comma == std::string::npos) break;
      start = comma + 1;
    }
    require(c == cols, ErrorKind::SchemaMismatch,
            located(file, lineno) + ": " + std::to_string(c) + " values, expected " + std::to_string(cols));
    ++r;
  }
  require(r == rows, ErrorKind::SchemaMismatch,
          file.filename().string() + ": " + std::to_string(r) + " rows, expected " + std::to_string(rows));
  return m;
}

inline MatF read_features_f32(const fs::path& file, index_t rows, index_t cols) {
  const std::string bytes = read_file(file.string());
  require(bytes.size() == static_cast<std::size_t>(rows * cols) * 4, ErrorKind::SchemaMismatch,
          file.filename().string() + ": " + std::to_string(bytes.size()) + " bytes, expected " +
              std::to_string(rows * cols * 4));
  MatF m(rows, cols);
  for (index_t i = 0; i < rows * cols; ++i) {
    std::uint32_t bits = 0;
    for (int b = 0; b < 4; ++b) bits |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes[4 * i + b])) << (8 * b);
    const float v = std::bit_cast<float>(bits);
    require(std::isfinite(v), ErrorKind::NonFiniteFeature,
            file.filename().string() + ": non-finite value at row " + std::to_string(i / cols));
    m.data()[i] = v;
  }
  return m;
}

inline std::vector<int> read_labels(const fs::path& file, index_t rows) {
  auto in = open_or_fail(file);
  std::vector<int> labels;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    int v = 0;
    require(parse_number(std::string_view(line), v), ErrorKind::SchemaMismatch, located(file, lineno) + ": expected an integer");
    labels.push_back(v);
  }
  require(static_cast<index_t>(labels.size()) == rows, ErrorKind::SchemaMismatch,
          file.filename().string() + ": " + std::to_string(labels.size()) + " labels, expected " + std::to_string(rows));
  return labels;
}

inline std::string format_float(float v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

}  // namespace detail

inline HinGraph load_dataset(const fs::path& dir) {
  const fs::path schema_path = dir / "schema.json";
  require(fs::exists(schema_path), ErrorKind::MissingFile, schema_path.string());
  nlohmann::json schema;
  try {
    std::ifstream in(schema_path);
    schema = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::SchemaMismatch, "schema.json: " + std::string(e.what()));
  }

  HinGraph g;
  try {
    for (const auto& t : schema.at("node_types")) {
      NodeTypeSchema s;
      s.id = static_cast<int>(g.types.size());
      s.name = t.at("name").get<std::string>();
      s.count = t.at("count").get<index_t>();
      s.attributed = t.at("attributed").get<bool>();
      s.feature_dim = t.at("feature_dim").get<index_t>();
      require(s.count >= 1, ErrorKind::SchemaMismatch, "schema.json: type '" + s.name + "' has count < 1");
      require(s.attributed == (s.feature_dim >= 1), ErrorKind::SchemaMismatch,
              "schema.json: type '" + s.name + "' must have feature_dim >= 1 iff attributed");
      for (const auto& other : g.types)
        require(other.name != s.name, ErrorKind::SchemaMismatch, "schema.json: duplicate type '" + s.name + "'");
      g.types.push_back(s);
    }
    for (const auto& r : schema.at("relations")) {
      const auto name = r.at("relation").get<std::string>();
      const auto src = r.at("src").get<std::string>();
      const auto dst = r.at("dst").get<std::string>();
      int src_id = -1, dst_id = -1;
      for (const auto& t : g.types) {
        if (t.name == src) src_id = t.id;
        if (t.name == dst) dst_id = t.id;
      }
      require(src_id >= 0 && dst_id >= 0, ErrorKind::SchemaMismatch,
              "schema.json: relation '" + name + "' references unknown type");
      for (const auto& other : g.relations)
        require(other.name != name, ErrorKind::SchemaMismatch, "schema.json: duplicate relation '" + name + "'");
      const index_t n_src = g.type(src_id).count, n_dst = g.type(dst_id).count;
      auto pairs = detail::read_edges(dir / ("edges_" + name + ".tsv"), n_src, n_dst);
      g.relations.push_back(
          make_relation(static_cast<int>(g.relations.size()), name, src_id, dst_id, n_src, n_dst, std::move(pairs)));
    }
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::SchemaMismatch, "schema.json: " + std::string(e.what()));
  }

  g.labels.resize(g.types.size());
  for (const auto& t : g.types) {
    if (t.attributed) {
      const fs::path csv = dir / ("features_" + t.name + ".csv");
      const fs::path bin = dir / ("features_" + t.name + ".f32");
      MatF m;
      if (fs::exists(csv))
        m = detail::read_features_csv(csv, t.count, t.feature_dim);
      else if (fs::exists(bin))
        m = detail::read_features_f32(bin, t.count, t.feature_dim);
      else
        fail(ErrorKind::MissingFile, csv.string());
      g.features.push_back({t.id, std::move(m)});
    }
    const fs::path lab = dir / ("labels_" + t.name + ".txt");
    if (fs::exists(lab)) g.labels[t.id] = detail::read_labels(lab, t.count);
  }
  g.validate();
  return g;
}

// Writes a dense matrix in the features_<type>.csv format.
inline void write_matrix_csv(const MatF& m, const fs::path& file) {
  std::string out;
  for (index_t i = 0; i < m.rows(); ++i) {
    for (index_t j = 0; j < m.cols(); ++j) {
      if (j) out += ',';
      out += detail::format_float(m(i, j));
    }
    out += '\n';
  }
  write_file(file.string(), out);
}

// Canonical text serialization; load_dataset(write_dataset(g)) == g.
inline void write_dataset(const HinGraph& g, const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  require(!ec, ErrorKind::IoError, "cannot create " + dir.string());

  nlohmann::json schema;
  schema["node_types"] = nlohmann::json::array();
  for (const auto& t : g.types)
    schema["node_types"].push_back(
        {{"name", t.name}, {"count", t.count}, {"attributed", t.attributed}, {"feature_dim", t.feature_dim}});
  schema["relations"] = nlohmann::json::array();
  for (const auto& r : g.relations)
    schema["relations"].push_back({{"relation", r.name}, {"src", g.type(r.src_type).name}, {"dst", g.type(r.dst_type).name}});
  write_file((dir / "schema.json").string(), schema.dump(2) + "\n");

  for (const auto& r : g.relations) {
    std::string out;
    for (const auto& [u, v] : r.edge_pairs()) out += std::to_string(u) + "\t" + std::to_string(v) + "\n";
    write_file((dir / ("edges_" + r.name + ".tsv")).string(), out);
  }
  for (const auto& f : g.features)
    write_matrix_csv(f.matrix, dir / ("features_" + g.type(f.type_id).name + ".csv"));
  for (std::size_t t = 0; t < g.labels.size(); ++t) {
    if (!g.labels[t]) continue;
    std::string out;
    for (int l : *g.labels[t]) out += std::to_string(l) + "\n";
    write_file((dir / ("labels_" + g.types[t].name + ".txt")).string(), out);
  }
}

inline MatF read_matrix_csv(const fs::path& file, index_t rows, index_t cols) {
  return detail::read_features_csv(file, rows, cols);
}

}  // namespace grami
