#include "nsift/csv.hpp"

#include <cstdio>
#include <fstream>

namespace nsift {

std::string csv_number(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string csv_vector(const Vec& v) {
  std::string out;
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (i) out += ' ';
    out += csv_number(v(i));
  }
  return out;
}

std::string csv_escape(const std::string& field) {
  if (field.find_first_of(",\"\r\n") == std::string::npos) return field;
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::string csv_text(const std::vector<std::string>& header, const std::vector<std::vector<std::string>>& rows) {
  std::string out;
  auto line = [&out](const std::vector<std::string>& fields) {
    for (std::size_t i = 0; i < fields.size(); ++i) {
      if (i) out += ',';
      out += csv_escape(fields[i]);
    }
    out += "\r\n";
  };
  line(header);
  for (const auto& r : rows) line(r);
  return out;
}

std::string roots_csv(const RootSet& s) {
  std::vector<std::vector<std::string>> rows;
  for (const Root& r : s.roots) {
    rows.push_back({"root", csv_vector(s.y), csv_vector(r.x), csv_number(r.residual), csv_number(r.stationarity),
                    std::to_string(r.basin_count)});
  }
  for (const StationaryNonroot& r : s.stationary_nonroots) {
    rows.push_back({"stationary-nonroot", csv_vector(s.y), csv_vector(r.x), csv_number(r.residual), csv_number(r.stationarity),
                    std::to_string(r.basin_count)});
  }
  return csv_text({"kind", "y", "x", "residual", "stationarity", "basin_count"}, rows);
}

std::string atlas_csv(const Atlas& a) {
  std::vector<std::vector<std::string>> rows;
  for (const AtlasEntry& e : a.entries) {
    rows.push_back({csv_vector(e.y), csv_vector(e.root.x), csv_number(e.root.residual), csv_number(e.ratio),
                    e.break_flag ? "1" : "0"});
  }
  return csv_text({"y", "x", "residual", "ratio", "break"}, rows);
}

std::string profile_csv(const ConditionProfile& p) {
  std::vector<std::vector<std::string>> rows;
  for (std::size_t i = 0; i < p.t.size(); ++i) {
    rows.push_back({csv_number(p.t[i]), csv_number(p.value[i]), csv_number(p.integral[i])});
  }
  return csv_text({"t", p.quantity.empty() ? "value" : p.quantity, "integral"}, rows);
}

std::string path_csv(const std::vector<PathSample>& history) {
  std::vector<std::vector<std::string>> rows;
  for (const PathSample& h : history) {
    rows.push_back({std::to_string(h.iteration), std::to_string(h.bead), csv_vector(h.x), csv_number(h.value)});
  }
  return csv_text({"iteration", "bead", "x", "value"}, rows);
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open " + path + " for writing");
  f << text;
  if (!f) throw IoError("write to " + path + " failed");
}

void emit_plot_data(const RootSet& s, const std::string& path) { write_text_file(path, roots_csv(s)); }
void emit_plot_data(const Atlas& a, const std::string& path) { write_text_file(path, atlas_csv(a)); }
void emit_plot_data(const ConditionProfile& p, const std::string& path) { write_text_file(path, profile_csv(p)); }
void emit_plot_data(const std::vector<PathSample>& history, const std::string& path) {
  write_text_file(path, path_csv(history));
}

}  // namespace nsift
