#include "pileup/io.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "pileup/error.hpp"

namespace pileup {

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void CsvTable::add_row(std::vector<std::string> row) {
  if (row.size() != header.size()) throw ConfigError("csv row width does not match the header");
  rows.push_back(std::move(row));
}

std::size_t CsvTable::column(const std::string& name) const {
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (header[i] == name) return i;
  }
  throw ConfigError("csv has no column '" + name + "'");
}

namespace {

void put_field(std::string& out, const std::string& f) {
  if (f.find_first_of(",\"\r\n") == std::string::npos) {
    out += f;
    return;
  }
  out += '"';
  for (char c : f) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
}

void put_record(std::string& out, const std::vector<std::string>& r) {
  for (std::size_t i = 0; i < r.size(); ++i) {
    if (i) out += ',';
    put_field(out, r[i]);
  }
  out += "\r\n";
}

}  // namespace

std::string to_csv(const CsvTable& t) {
  std::string out;
  put_record(out, t.header);
  for (const auto& r : t.rows) put_record(out, r);
  return out;
}

CsvTable parse_csv(const std::string& text) {
  std::vector<std::vector<std::string>> records;
  std::vector<std::string> rec;
  std::string field;
  bool quoted = false, any = false;
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        field += c;
      }
      continue;
    }
    if (c == '"') {
      quoted = true;
      any = true;
    } else if (c == ',') {
      rec.push_back(std::move(field));
      field.clear();
      any = true;
    } else if (c == '\r' || c == '\n') {
      if (c == '\r' && i + 1 < text.size() && text[i + 1] == '\n') ++i;
      rec.push_back(std::move(field));
      field.clear();
      records.push_back(std::move(rec));
      rec.clear();
      any = false;
    } else {
      field += c;
      any = true;
    }
  }
  if (quoted) throw ConfigError("csv ends inside a quoted field");
  if (any) {
    rec.push_back(std::move(field));
    records.push_back(std::move(rec));
  }
  CsvTable t;
  if (records.empty()) return t;
  t.header = std::move(records.front());
  for (std::size_t i = 1; i < records.size(); ++i) {
    if (records[i].size() != t.header.size()) {
      throw ConfigError("csv record " + std::to_string(i + 1) + " has " + std::to_string(records[i].size()) +
                        " fields, expected " + std::to_string(t.header.size()));
    }
    t.rows.push_back(std::move(records[i]));
  }
  return t;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream os(path, std::ios::binary);
  if (!os) throw ConfigError("cannot open '" + path.string() + "' for writing");
  os << text;
  if (!os) throw ConfigError("failed writing '" + path.string() + "'");
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ConfigError("missing file '" + path.string() + "'");
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

void write_csv(const std::filesystem::path& path, const CsvTable& t) { write_text(path, to_csv(t)); }

CsvTable read_csv(const std::filesystem::path& path) { return parse_csv(read_text(path)); }

void write_json(const std::filesystem::path& path, const nlohmann::json& j) { write_text(path, j.dump(2) + "\n"); }

nlohmann::json read_json(const std::filesystem::path& path) {
  const std::string text = read_text(path);
  try {
    return nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("'" + path.string() + "' is not valid JSON: " + e.what());
  }
}

CsvTable density_table(const GridDensity& rho) {
  CsvTable t;
  t.header = {"x_left", "x_right", "x_center", "density", "mass"};
  const Grid& g = rho.grid;
  int lo = 0, hi = static_cast<int>(rho.mass.size()) - 1;
  while (lo <= hi && rho.mass[lo] == 0.0) ++lo;
  while (hi >= lo && rho.mass[hi] == 0.0) --hi;
  for (int i = lo; i <= hi; ++i) {
    t.add_row({format_double(g.left(i)), format_double(g.left(i + 1)), format_double(g.center(i)),
               format_double(rho.density(i)), format_double(rho.mass[i])});
  }
  return t;
}

CsvTable particle_table(const Eigen::VectorXd& x, double alpha, const Eigen::VectorXd& quantiles) {
  CsvTable t;
  t.header = {"index", "x", "x_raw", "quantile"};
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const std::string q = i < quantiles.size() ? format_double(quantiles[i]) : "";
    t.add_row({std::to_string(i), format_double(x[i]), format_double(alpha * x[i]), q});
  }
  return t;
}

}  // namespace pileup
