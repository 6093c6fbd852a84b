#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "json.hpp"
#include "sbs/errors.hpp"
#include "sbs/frame.hpp"

namespace sbs {

namespace {

using ordered_json = nlohmann::ordered_json;

std::vector<std::string_view> split_csv_line(std::string_view line) {
  std::vector<std::string_view> cells;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    cells.push_back(line.substr(start, comma - start));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return cells;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r'))
    s.remove_suffix(1);
  return s;
}

double parse_cell(std::string_view cell, std::size_t line, std::string_view column) {
  cell = trim(cell);
  double value = 0.0;
  const char* first = cell.data();
  if (!cell.empty() && cell.front() == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, cell.data() + cell.size(), value);
  if (cell.empty() || ec != std::errc{} || ptr != cell.data() + cell.size() || !std::isfinite(value))
    throw SchemaError("row " + std::to_string(line) + ": column '" + std::string(column) +
                      "' has non-numeric value '" + std::string(cell) + "'");
  return value;
}

std::size_t parse_id(std::string_view cell, std::size_t line) {
  cell = trim(cell);
  std::size_t id = 0;
  auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), id);
  if (cell.empty() || ec != std::errc{} || ptr != cell.data() + cell.size())
    throw SchemaError("row " + std::to_string(line) + ": id '" + std::string(cell) +
                      "' is not a non-negative integer");
  return id;
}

void append_double(std::string& out, double v) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  out.append(buf, ptr);
}

// Rows may arrive in any order; ids must cover 0..N-1 exactly once.
Frame assemble(std::size_t dim, std::vector<std::size_t> ids, std::vector<std::size_t> lines,
               std::vector<double> coords, std::vector<std::string> names,
               std::vector<std::vector<double>> columns, const ReadOptions& options) {
  const std::size_t n = ids.size();
  std::vector<std::size_t> slot(n, n);
  for (std::size_t r = 0; r < n; ++r) {
    if (ids[r] >= n)
      throw SchemaError("row " + std::to_string(lines[r]) + ": id " + std::to_string(ids[r]) +
                        " outside 0.." + std::to_string(n == 0 ? 0 : n - 1) +
                        " (ids must be contiguous from 0)");
    if (slot[ids[r]] != n)
      throw SchemaError("row " + std::to_string(lines[r]) + ": duplicate id " +
                        std::to_string(ids[r]) + " (first seen on row " +
                        std::to_string(lines[slot[ids[r]]]) + ")");
    slot[ids[r]] = r;
  }
  std::vector<double> sorted_coords(coords.size());
  std::vector<OutcomeColumn> outcomes(names.size());
  for (std::size_t k = 0; k < names.size(); ++k) {
    outcomes[k].name = names[k];
    outcomes[k].values.resize(n);
  }
  for (std::size_t id = 0; id < n; ++id) {
    const std::size_t r = slot[id];
    std::copy_n(coords.begin() + r * dim, dim, sorted_coords.begin() + id * dim);
    for (std::size_t k = 0; k < names.size(); ++k) outcomes[k].values[id] = columns[k][r];
  }
  if (options.jitter) jitter_duplicates(dim, sorted_coords);
  Frame frame(dim, std::move(sorted_coords), std::move(outcomes));
  if (!options.jitter) {
    if (auto dup = find_duplicate(frame))
      throw DegenerateFrameError("units " + std::to_string(dup->first) + " and " +
                                 std::to_string(dup->second) +
                                 " share coordinates (pass --jitter to perturb duplicates)");
  }
  return frame;
}

}  // namespace

FrameFormat parse_frame_format(std::string_view text) {
  if (text == "csv") return FrameFormat::csv;
  if (text == "json") return FrameFormat::json;
  throw ParameterError("unknown frame format '" + std::string(text) + "' (csv or json)");
}

FrameFormat format_from_path(const std::filesystem::path& path) {
  return path.extension() == ".json" ? FrameFormat::json : FrameFormat::csv;
}

Frame read_frame_csv(std::istream& in, const ReadOptions& options) {
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!trim(line).empty() && line[0] != '#') break;
  }
  if (trim(line).empty() || line[0] == '#') throw SchemaError("csv frame: missing header");

  std::vector<std::string> header;
  for (auto cell : split_csv_line(line)) header.emplace_back(trim(cell));
  auto find_col = [&](std::string_view name) -> std::size_t {
    auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end())
      throw SchemaError("csv frame: missing required column '" + std::string(name) + "'");
    return static_cast<std::size_t>(it - header.begin());
  };
  const std::size_t id_col = find_col("id");
  const std::size_t x_col = find_col("x");
  const std::size_t y_col = find_col("y");

  std::vector<std::string> names;
  std::vector<std::size_t> outcome_cols;
  for (std::size_t c = 0; c < header.size(); ++c) {
    if (c == id_col || c == x_col || c == y_col) continue;
    if (header[c].empty()) throw SchemaError("csv frame: empty column name at position " +
                                             std::to_string(c + 1));
    names.push_back(header[c]);
    outcome_cols.push_back(c);
  }

  std::vector<std::size_t> ids, lines;
  std::vector<double> coords;
  std::vector<std::vector<double>> columns(names.size());
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty() || line[0] == '#') continue;
    const auto cells = split_csv_line(line);
    if (cells.size() != header.size())
      throw SchemaError("row " + std::to_string(line_no) + ": expected " +
                        std::to_string(header.size()) + " cells, found " +
                        std::to_string(cells.size()));
    ids.push_back(parse_id(cells[id_col], line_no));
    lines.push_back(line_no);
    coords.push_back(parse_cell(cells[x_col], line_no, "x"));
    coords.push_back(parse_cell(cells[y_col], line_no, "y"));
    for (std::size_t k = 0; k < names.size(); ++k)
      columns[k].push_back(parse_cell(cells[outcome_cols[k]], line_no, names[k]));
  }
  if (ids.empty()) throw SchemaError("csv frame: no data rows");
  return assemble(2, std::move(ids), std::move(lines), std::move(coords), std::move(names),
                  std::move(columns), options);
}

void write_frame_csv(std::ostream& out, const Frame& frame) {
  if (frame.dim() != 2)
    throw ParameterError("csv frames carry exactly two coordinates; use json for d = " +
                         std::to_string(frame.dim()));
  std::string buf = "id,x,y";
  for (const auto& col : frame.outcomes()) {
    if (col.name.find_first_of(",\n\"") != std::string::npos || col.name == "id" ||
        col.name == "x" || col.name == "y")
      throw ParameterError("outcome name '" + col.name + "' cannot be written to csv");
    buf += ',';
    buf += col.name;
  }
  buf += '\n';
  for (UnitId i = 0; i < frame.size(); ++i) {
    buf += std::to_string(i);
    for (double c : frame.coord(i)) {
      buf += ',';
      append_double(buf, c);
    }
    for (const auto& col : frame.outcomes()) {
      buf += ',';
      append_double(buf, col.values[i]);
    }
    buf += '\n';
  }
  out << buf;
}

Frame read_frame_json(std::istream& in, const ReadOptions& options) {
  ordered_json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(std::string("json frame: ") + e.what());
  }
  try {
    if (!doc.is_object() || !doc.contains("units"))
      throw SchemaError("json frame: missing required key 'units'");
    const std::size_t dim = doc.value("d", std::size_t{2});
    const auto& units = doc.at("units");
    if (!units.is_array() || units.empty()) throw SchemaError("json frame: 'units' is empty");

    std::vector<std::string> names;
    if (units[0].contains("outcomes"))
      for (const auto& [k, v] : units[0].at("outcomes").items()) names.push_back(k);

    std::vector<std::size_t> ids, lines;
    std::vector<double> coords;
    std::vector<std::vector<double>> columns(names.size());
    for (std::size_t r = 0; r < units.size(); ++r) {
      const auto& u = units[r];
      const std::size_t row = r + 1;
      if (!u.contains("id")) throw SchemaError("unit " + std::to_string(row) + ": missing 'id'");
      if (!u.contains("coords"))
        throw SchemaError("unit " + std::to_string(row) + ": missing 'coords'");
      if (!u.at("id").is_number_unsigned() && !u.at("id").is_number_integer())
        throw SchemaError("unit " + std::to_string(row) + ": id is not an integer");
      const auto id = u.at("id").get<long long>();
      if (id < 0) throw SchemaError("unit " + std::to_string(row) + ": negative id");
      ids.push_back(static_cast<std::size_t>(id));
      lines.push_back(row);
      const auto& c = u.at("coords");
      if (!c.is_array() || c.size() != dim)
        throw SchemaError("unit " + std::to_string(row) + ": expected " + std::to_string(dim) +
                          " coordinates");
      for (const auto& v : c) {
        if (!v.is_number())
          throw SchemaError("unit " + std::to_string(row) + ": non-numeric coordinate");
        coords.push_back(v.get<double>());
      }
      for (std::size_t k = 0; k < names.size(); ++k) {
        if (!u.contains("outcomes") || !u.at("outcomes").contains(names[k]))
          throw SchemaError("unit " + std::to_string(row) + ": missing outcome '" + names[k] + "'");
        const auto& v = u.at("outcomes").at(names[k]);
        if (!v.is_number())
          throw SchemaError("unit " + std::to_string(row) + ": outcome '" + names[k] +
                            "' is not numeric");
        columns[k].push_back(v.get<double>());
      }
    }
    return assemble(dim, std::move(ids), std::move(lines), std::move(coords), std::move(names),
                    std::move(columns), options);
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(std::string("json frame: ") + e.what());
  }
}

void write_frame_json(std::ostream& out, const Frame& frame) {
  ordered_json doc;
  doc["d"] = frame.dim();
  auto& units = doc["units"] = ordered_json::array();
  for (UnitId i = 0; i < frame.size(); ++i) {
    ordered_json u;
    u["id"] = i;
    auto c = frame.coord(i);
    u["coords"] = std::vector<double>(c.begin(), c.end());
    ordered_json o = ordered_json::object();
    for (const auto& col : frame.outcomes()) o[col.name] = col.values[i];
    u["outcomes"] = std::move(o);
    units.push_back(std::move(u));
  }
  out << doc.dump() << '\n';
}

Frame read_frame(const std::filesystem::path& path, FrameFormat format,
                 const ReadOptions& options) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open frame file '" + path.string() + "'");
  return format == FrameFormat::csv ? read_frame_csv(in, options) : read_frame_json(in, options);
}

void write_frame(const Frame& frame, const std::filesystem::path& path, FrameFormat format) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write frame file '" + path.string() + "'");
  if (format == FrameFormat::csv)
    write_frame_csv(out, frame);
  else
    write_frame_json(out, frame);
}

}  // namespace sbs
