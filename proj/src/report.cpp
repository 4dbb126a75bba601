#include "pmcmc/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>
#include <sstream>
#include <tuple>

namespace pmcmc {

void Report::add_close(std::string check, std::string instance, double value, double reference, double tolerance) {
  CheckRow r{std::move(check), std::move(instance), value, reference, std::abs(value - reference), tolerance, false};
  r.pass = std::isfinite(r.residual) && r.residual <= tolerance;
  rows.push_back(std::move(r));
}

void Report::add_bound(std::string check, std::string instance, double value, double bound, double slack) {
  CheckRow r{std::move(check), std::move(instance), value, bound, std::max(0.0, value - bound), slack, false};
  r.pass = std::isfinite(value) && value <= bound + slack;
  rows.push_back(std::move(r));
}

void Report::add_range(std::string check, std::string instance, double value, double lo, double hi) {
  const double mid = 0.5 * (lo + hi);
  CheckRow r{std::move(check), std::move(instance), value, mid, std::abs(value - mid), 0.5 * (hi - lo), false};
  r.pass = std::isfinite(value) && value >= lo && value <= hi;
  rows.push_back(std::move(r));
}

bool Report::passed() const { return failures() == 0; }

std::size_t Report::failures() const {
  return static_cast<std::size_t>(std::count_if(rows.begin(), rows.end(), [](const CheckRow& r) { return !r.pass; }));
}

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

namespace {

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

void write_row(std::ostream& os, const CheckRow& r) {
  os << csv_field(r.check) << ',' << csv_field(r.instance) << ',' << format_double(r.value) << ',' << format_double(r.reference)
     << ',' << format_double(r.residual) << ',' << format_double(r.tolerance) << ',' << (r.pass ? "true" : "false") << '\n';
}

}  // namespace

void write_report_csv(std::ostream& os, const Report& r) {
  os << "# scenario=" << r.scenario << " rng=" << r.rng << " seed=" << r.seed << '\n';
  os << "check,instance,value,reference,residual,tolerance,pass\n";
  for (const auto& row : r.rows) write_row(os, row);
}

std::string render_svg(const std::string& title, const std::vector<PlotSeries>& series) {
  const double W = 640, H = 420, L = 70, R = 20, T = 40, B = 50;
  double xmin = std::numeric_limits<double>::infinity(), xmax = -xmin, ymin = xmin, ymax = -xmin;
  for (const auto& s : series)
    for (std::size_t i = 0; i < s.x.size() && i < s.y.size(); ++i) {
      if (!(s.x[i] > 0) || !(s.y[i] > 0)) continue;
      xmin = std::min(xmin, std::log10(s.x[i]));
      xmax = std::max(xmax, std::log10(s.x[i]));
      ymin = std::min(ymin, std::log10(s.y[i]));
      ymax = std::max(ymax, std::log10(s.y[i]));
    }
  if (!std::isfinite(xmin)) xmin = 0, xmax = 1, ymin = 0, ymax = 1;
  xmin = std::floor(xmin), xmax = std::max(std::ceil(xmax), xmin + 1);
  ymin = std::floor(ymin), ymax = std::max(std::ceil(ymax), ymin + 1);
  auto px = [&](double lx) { return L + (lx - xmin) / (xmax - xmin) * (W - L - R); };
  auto py = [&](double ly) { return H - B - (ly - ymin) / (ymax - ymin) * (H - T - B); };
  std::ostringstream os;
  os.precision(6);
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\" font-family=\"sans-serif\" font-size=\"11\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  os << "<text x=\"" << W / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">" << title << "</text>\n";
  os << "<line x1=\"" << L << "\" y1=\"" << H - B << "\" x2=\"" << W - R << "\" y2=\"" << H - B << "\" stroke=\"black\"/>\n";
  os << "<line x1=\"" << L << "\" y1=\"" << T << "\" x2=\"" << L << "\" y2=\"" << H - B << "\" stroke=\"black\"/>\n";
  for (int e = static_cast<int>(xmin); e <= static_cast<int>(xmax); ++e)
    os << "<text x=\"" << px(e) << "\" y=\"" << H - B + 16 << "\" text-anchor=\"middle\">1e" << e << "</text>\n";
  for (int e = static_cast<int>(ymin); e <= static_cast<int>(ymax); ++e)
    os << "<text x=\"" << L - 6 << "\" y=\"" << py(e) + 4 << "\" text-anchor=\"end\">1e" << e << "</text>\n";
  os << "<text x=\"" << W / 2 << "\" y=\"" << H - 12 << "\" text-anchor=\"middle\">N</text>\n";
  const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"};
  for (std::size_t s = 0; s < series.size(); ++s) {
    const char* c = colors[s % 6];
    os << "<polyline fill=\"none\" stroke=\"" << c << "\" stroke-width=\"1.5\" points=\"";
    for (std::size_t i = 0; i < series[s].x.size() && i < series[s].y.size(); ++i)
      if (series[s].x[i] > 0 && series[s].y[i] > 0) os << px(std::log10(series[s].x[i])) << ',' << py(std::log10(series[s].y[i])) << ' ';
    os << "\"/>\n";
    os << "<text x=\"" << L + 10 << "\" y=\"" << T + 14 * (s + 1) << "\" fill=\"" << c << "\">" << series[s].label << "</text>\n";
  }
  os << "</svg>\n";
  return os.str();
}

void emit_summary(std::ostream& csv, std::ostream& table, const std::vector<Report>& reports) {
  struct Entry {
    const std::string* scenario;
    const CheckRow* row;
  };
  std::vector<Entry> all;
  for (const auto& r : reports)
    for (const auto& row : r.rows) all.push_back({&r.scenario, &row});
  std::stable_sort(all.begin(), all.end(), [](const Entry& a, const Entry& b) {
    return std::tie(*a.scenario, a.row->check, a.row->instance) < std::tie(*b.scenario, b.row->check, b.row->instance);
  });
  csv << "scenario,check,instance,value,reference,residual,tolerance,pass\n";
  std::size_t fails = 0;
  for (const auto& e : all) {
    csv << csv_field(*e.scenario) << ',';
    write_row(csv, *e.row);
    if (!e.row->pass) ++fails;
  }
  char line[512];
  std::snprintf(line, sizeof line, "%-26s %-34s %-30s %-12s %-5s\n", "scenario", "check", "instance", "residual", "pass");
  table << line;
  for (const auto& e : all) {
    std::snprintf(line, sizeof line, "%-26s %-34s %-30s %-12.3e %-5s\n", e.scenario->c_str(), e.row->check.c_str(),
                  e.row->instance.c_str(), e.row->residual, e.row->pass ? "yes" : "NO");
    table << line;
  }
  if (fails == 0)
    table << "PASS: " << all.size() << " checks passed\n";
  else
    table << "FAIL: " << fails << " of " << all.size() << " checks failed\n";
}

}  // namespace pmcmc
