#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "pmcmc/smc.hpp"

namespace pmcmc {

struct CheckRow {
  std::string check, instance;
  double value = 0.0, reference = 0.0, residual = 0.0, tolerance = 0.0;
  bool pass = false;
};

struct PlotSeries {
  std::string label;
  std::vector<double> x, y;
};

struct Report {
  std::string scenario;
  std::uint64_t seed = 0;
  std::string rng = Rng::algorithm();
  std::vector<CheckRow> rows;
  std::vector<PlotSeries> plots;

  // |value - reference| <= tolerance
  void add_close(std::string check, std::string instance, double value, double reference, double tolerance);
  // value <= bound + slack; residual is the excess over the bound
  void add_bound(std::string check, std::string instance, double value, double bound, double slack = 0.0);
  // lo <= value <= hi; reference is the midpoint
  void add_range(std::string check, std::string instance, double value, double lo, double hi);
  bool passed() const;
  std::size_t failures() const;
};

std::string format_double(double v);

// check,instance,value,reference,residual,tolerance,pass after a "# ..." line with the seed
void write_report_csv(std::ostream& os, const Report& r);
// log-log plot of every series
std::string render_svg(const std::string& title, const std::vector<PlotSeries>& series);

// scenario,check,instance,... sorted by (scenario, check, instance); the
// table ends with a PASS or FAIL banner.
void emit_summary(std::ostream& csv, std::ostream& table, const std::vector<Report>& reports);

}  // namespace pmcmc
