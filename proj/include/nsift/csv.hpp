#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include "nsift/mpass.hpp"
#include "nsift/solve.hpp"
#include "nsift/theorems.hpp"

namespace nsift {

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// %.17g, so values survive a round trip.
std::string csv_number(double v);
/// Vector components joined by single spaces.
std::string csv_vector(const Vec& v);
/// Quotes a field when it holds a comma, quote, CR or LF (RFC 4180).
std::string csv_escape(const std::string& field);

/// Rows terminated by CRLF, header first.
std::string csv_text(const std::vector<std::string>& header, const std::vector<std::vector<std::string>>& rows);

// Column sets. Vector-valued columns hold space-separated components.
//   roots:   kind,y,x,residual,stationarity,basin_count
//   atlas:   y,x,residual,ratio,break
//   profile: t,<quantity>,integral
//   path:    iteration,bead,x,value
std::string roots_csv(const RootSet& s);
std::string atlas_csv(const Atlas& a);
std::string profile_csv(const ConditionProfile& p);
std::string path_csv(const std::vector<PathSample>& history);

void write_text_file(const std::string& path, const std::string& text);

void emit_plot_data(const RootSet& s, const std::string& path);
void emit_plot_data(const Atlas& a, const std::string& path);
void emit_plot_data(const ConditionProfile& p, const std::string& path);
void emit_plot_data(const std::vector<PathSample>& history, const std::string& path);

}  // namespace nsift
