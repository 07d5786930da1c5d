#include "starflow/io.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "starflow/error.hpp"
#include "starflow/numfmt.hpp"

namespace starflow {

namespace {

void emit(std::ostream& os, const Json& j, int depth) {
  const std::string pad(2 * (depth + 1), ' ');
  const std::string close(2 * depth, ' ');
  switch (j.type()) {
    case Json::value_t::object: {
      if (j.empty()) {
        os << "{}";
        return;
      }
      os << "{\n";
      bool first = true;
      for (const auto& [key, val] : j.items()) {
        if (!first) os << ",\n";
        first = false;
        os << pad << Json(key).dump() << ": ";
        emit(os, val, depth + 1);
      }
      os << "\n" << close << "}";
      return;
    }
    case Json::value_t::array: {
      if (j.empty()) {
        os << "[]";
        return;
      }
      // Arrays of scalars stay on one line.
      const bool flat = std::none_of(j.begin(), j.end(), [](const Json& e) {
        return e.is_object() || e.is_array();
      });
      os << (flat ? "[" : "[\n");
      bool first = true;
      for (const auto& e : j) {
        if (!first) os << (flat ? ", " : ",\n");
        first = false;
        if (!flat) os << pad;
        emit(os, e, depth + 1);
      }
      if (flat) {
        os << "]";
      } else {
        os << "\n" << close << "]";
      }
      return;
    }
    case Json::value_t::number_float: {
      const double v = j.get<double>();
      if (std::isfinite(v)) {
        os << format_double(v);
      } else {
        os << '"' << format_double(v) << '"';
      }
      return;
    }
    default:
      os << j.dump();
  }
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

}  // namespace

std::string dump_json(const Json& j) {
  std::ostringstream os;
  emit(os, j, 0);
  os << "\n";
  return os.str();
}

void write_json_file(const std::filesystem::path& path, const Json& j) {
  write_text_file(path, dump_json(j));
}

Json read_json_file(const std::filesystem::path& path) {
  const std::string text = read_text_file(path);
  try {
    return Json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorCode::kParseError, path.string() + ": " + e.what());
  }
}

double json_double(const Json& j) {
  if (j.is_number()) return j.get<double>();
  if (j.is_string()) {
    const auto s = j.get<std::string>();
    if (s == "inf" || s == "-inf" || s == "nan") return parse_double(s);
  }
  throw Error(ErrorCode::kParseError, "expected a number, got " + j.dump());
}

Json json_value(double v) {
  if (std::isfinite(v)) return v;
  return format_double(v);
}

void write_monitors_csv(std::ostream& os, const std::vector<StarMonitorRecord>& records) {
  os << kMonitorsHeader << "\n";
  for (const auto& r : records) {
    const double row[] = {r.t,
                          r.tau,
                          r.min_H,
                          r.max_H,
                          r.min_F,
                          r.min_support,
                          r.z_star_over_F_min,
                          r.z_sup_over_F_max,
                          r.alpha_int,
                          r.alpha_ext,
                          r.m[0], r.m[1], r.m[2], r.m[3],
                          r.G[0], r.G[1], r.G[2], r.G[3],
                          r.diameter,
                          r.extinction_margin};
    bool first = true;
    for (const double v : row) {
      if (!first) os << ",";
      first = false;
      os << format_double(v);
    }
    os << "\n";
  }
}

std::vector<StarMonitorRecord> read_monitors_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line) || line != kMonitorsHeader)
    throw Error(ErrorCode::kParseError, "monitors.csv header mismatch");
  std::vector<StarMonitorRecord> out;
  std::size_t row = 0;
  while (std::getline(is, line)) {
    ++row;
    if (line.empty()) continue;
    const auto cells = split_csv(line);
    if (cells.size() != 20)
      throw Error(ErrorCode::kParseError,
                  "monitors.csv row " + std::to_string(row) + ": expected 20 columns");
    double v[20];
    for (std::size_t i = 0; i < 20; ++i) v[i] = parse_double(cells[i]);
    StarMonitorRecord r;
    r.t = v[0];
    r.tau = v[1];
    r.min_H = v[2];
    r.max_H = v[3];
    r.min_F = v[4];
    r.min_support = v[5];
    r.z_star_over_F_min = v[6];
    r.z_sup_over_F_max = v[7];
    r.alpha_int = v[8];
    r.alpha_ext = v[9];
    for (std::size_t k = 0; k < 4; ++k) {
      r.m[k] = v[10 + k];
      r.G[k] = v[14 + k];
    }
    r.diameter = v[18];
    r.extinction_margin = v[19];
    out.push_back(r);
  }
  return out;
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kMissingArtifact, path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kValidationError, "output_dir: cannot write " + path.string());
  out << text;
}

}  // namespace starflow
