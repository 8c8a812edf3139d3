// Self-contained SVG rendering for the experiment outputs.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "loclab/experiments.hpp"
#include "loclab/numerics.hpp"
#include "loclab/risk_eval.hpp"
#include "loclab/synthetic_data.hpp"

namespace loclab {
namespace {

struct CsvTable {
  std::string path;
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  std::vector<std::size_t> line_numbers;

  std::size_t column(const std::string& name) const {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw DataError(path + ": missing column '" + name + "'");
    return static_cast<std::size_t>(it - header.begin());
  }
  bool has(const std::string& name) const { return std::find(header.begin(), header.end(), name) != header.end(); }

  double number(std::size_t row, const std::string& name) const {
    const std::string& text = rows[row][column(name)];
    char* end = nullptr;
    const double v = std::strtod(text.c_str(), &end);
    if (text.empty() || end != text.c_str() + text.size()) {
      throw DataError(path + ": row " + std::to_string(line_numbers[row]) + ": column '" + name +
                      "' is not a number: '" + text + "'");
    }
    return v;
  }
  const std::string& text(std::size_t row, const std::string& name) const { return rows[row][column(name)]; }
};

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::stringstream ss(line);
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

CsvTable read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot read " + path);
  CsvTable t;
  t.path = path;
  std::string line;
  if (!std::getline(in, line) || line.empty()) throw DataError(path + ": empty file or missing header");
  t.header = split(line);
  std::size_t number = 1;
  while (std::getline(in, line)) {
    ++number;
    if (line.empty()) continue;
    auto cells = split(line);
    if (cells.size() != t.header.size()) {
      throw DataError(path + ": row " + std::to_string(number) + " has " + std::to_string(cells.size()) +
                      " fields, expected " + std::to_string(t.header.size()));
    }
    t.rows.push_back(std::move(cells));
    t.line_numbers.push_back(number);
  }
  return t;
}

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string tick_label(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", v);
  return buf;
}

struct Axis {
  double lo = 0.0, hi = 1.0;
  bool log = false;
  double pixel_lo = 0.0, pixel_hi = 1.0;

  double map(double v) const {
    const double a = log ? std::log10(lo) : lo;
    const double b = log ? std::log10(hi) : hi;
    const double x = log ? std::log10(v) : v;
    return pixel_lo + (x - a) / (b - a) * (pixel_hi - pixel_lo);
  }

  std::vector<double> ticks() const {
    std::vector<double> out;
    if (log) {
      for (int e = static_cast<int>(std::floor(std::log10(lo))); e <= static_cast<int>(std::ceil(std::log10(hi))); ++e) {
        const double v = std::pow(10.0, e);
        if (v >= lo * (1 - 1e-9) && v <= hi * (1 + 1e-9)) out.push_back(v);
      }
      if (out.size() < 2) out = {lo, hi};
      return out;
    }
    const double raw = (hi - lo) / 5.0;
    const double mag = std::pow(10.0, std::floor(std::log10(raw)));
    double step = mag;
    for (double m : {1.0, 2.0, 5.0, 10.0}) {
      if (m * mag >= raw) {
        step = m * mag;
        break;
      }
    }
    for (double v = std::ceil(lo / step) * step; v <= hi + 1e-9 * step; v += step) out.push_back(std::abs(v) < 1e-12 ? 0.0 : v);
    return out;
  }
};

// Padded range; positive-only when `log`.
Axis make_axis(double lo, double hi, bool log, double pixel_lo, double pixel_hi) {
  if (!(hi > lo)) {
    const double pad = lo == 0.0 ? 1.0 : std::abs(lo) * 0.1;
    lo -= pad;
    hi += pad;
  }
  if (log) {
    lo /= 1.3;
    hi *= 1.3;
  } else {
    const double pad = 0.05 * (hi - lo);
    lo -= pad;
    hi += pad;
  }
  return Axis{lo, hi, log, pixel_lo, pixel_hi};
}

const char* const kColors[] = {"#d62728", "#1f77b4", "#2ca02c", "#9467bd"};

class Svg {
 public:
  static constexpr double kWidth = 640, kHeight = 440;
  static constexpr double kLeft = 70, kRight = 170, kTop = 40, kBottom = 60;

  Svg(const std::string& title, Axis x, Axis y, const std::string& x_label, const std::string& y_label)
      : x_(x), y_(y) {
    out_ << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\"" << kHeight
         << "\" viewBox=\"0 0 " << kWidth << ' ' << kHeight << "\" font-family=\"sans-serif\" font-size=\"12\">\n"
         << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
         << "<text x=\"" << num(kWidth / 2) << "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">" << title
         << "</text>\n";
    const double x0 = kLeft, x1 = kWidth - kRight, y0 = kHeight - kBottom, y1 = kTop;
    out_ << "<rect x=\"" << num(x0) << "\" y=\"" << num(y1) << "\" width=\"" << num(x1 - x0) << "\" height=\""
         << num(y0 - y1) << "\" fill=\"none\" stroke=\"black\"/>\n";
    for (double t : x_.ticks()) {
      const double px = x_.map(t);
      out_ << "<line x1=\"" << num(px) << "\" y1=\"" << num(y0) << "\" x2=\"" << num(px) << "\" y2=\"" << num(y0 + 5)
           << "\" stroke=\"black\"/>\n<text x=\"" << num(px) << "\" y=\"" << num(y0 + 19)
           << "\" text-anchor=\"middle\">" << tick_label(t) << "</text>\n";
    }
    for (double t : y_.ticks()) {
      const double py = y_.map(t);
      out_ << "<line x1=\"" << num(x0 - 5) << "\" y1=\"" << num(py) << "\" x2=\"" << num(x0) << "\" y2=\"" << num(py)
           << "\" stroke=\"black\"/>\n<text x=\"" << num(x0 - 8) << "\" y=\"" << num(py + 4)
           << "\" text-anchor=\"end\">" << tick_label(t) << "</text>\n";
    }
    out_ << "<text x=\"" << num((x0 + x1) / 2) << "\" y=\"" << num(kHeight - 18) << "\" text-anchor=\"middle\">"
         << x_label << "</text>\n"
         << "<text transform=\"translate(18," << num((y0 + y1) / 2) << ") rotate(-90)\" text-anchor=\"middle\">"
         << y_label << "</text>\n";
  }

  static Axis x_axis(double lo, double hi, bool log) { return make_axis(lo, hi, log, kLeft, kWidth - kRight); }
  static Axis y_axis(double lo, double hi, bool log) { return make_axis(lo, hi, log, kHeight - kBottom, kTop); }

  void polyline(const std::vector<std::pair<double, double>>& pts, const std::string& color, bool dashed = false,
                double width = 2.0) {
    out_ << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"" << num(width) << '"'
         << (dashed ? " stroke-dasharray=\"6,4\"" : "") << " points=\"";
    for (const auto& [x, y] : pts) out_ << num(x_.map(x)) << ',' << num(y_.map(y)) << ' ';
    out_ << "\"/>\n";
  }

  void band(const std::vector<double>& xs, const std::vector<double>& lo, const std::vector<double>& hi,
            const std::string& color) {
    out_ << "<polygon fill=\"" << color << "\" fill-opacity=\"0.2\" stroke=\"none\" points=\"";
    for (std::size_t i = 0; i < xs.size(); ++i) out_ << num(x_.map(xs[i])) << ',' << num(y_.map(hi[i])) << ' ';
    for (std::size_t i = xs.size(); i-- > 0;) out_ << num(x_.map(xs[i])) << ',' << num(y_.map(lo[i])) << ' ';
    out_ << "\"/>\n";
  }

  void point(double x, double y, const std::string& color, double r = 3.5) {
    out_ << "<circle cx=\"" << num(x_.map(x)) << "\" cy=\"" << num(y_.map(y)) << "\" r=\"" << num(r) << "\" fill=\""
         << color << "\"/>\n";
  }

  void legend(const std::string& label, const std::string& color, bool dashed = false) {
    const double x = kWidth - kRight + 12, y = kTop + 14 + 20.0 * static_cast<double>(legend_rows_++);
    out_ << "<line x1=\"" << num(x) << "\" y1=\"" << num(y - 4) << "\" x2=\"" << num(x + 22) << "\" y2=\""
         << num(y - 4) << "\" stroke=\"" << color << "\" stroke-width=\"2\""
         << (dashed ? " stroke-dasharray=\"6,4\"" : "") << "/>\n<text x=\"" << num(x + 28) << "\" y=\"" << num(y)
         << "\">" << label << "</text>\n";
  }

  std::string finish() { return out_.str() + "</svg>\n"; }

 private:
  Axis x_, y_;
  std::ostringstream out_;
  int legend_rows_ = 0;
};

std::vector<std::string> classifiers_of(const CsvTable& t) {
  std::vector<std::string> out;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const std::string& c = t.text(r, "classifier_id");
    if (std::find(out.begin(), out.end(), c) == out.end()) out.push_back(c);
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::string plot_acc(const CsvTable& t) {
  if (t.rows.empty()) throw DataError(t.path + ": no rows to plot");
  double k_lo = INFINITY, k_hi = -INFINITY, a_lo = INFINITY, a_hi = -INFINITY;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const double k = t.number(r, "k"), m = t.number(r, "mean_accuracy"), sd = t.number(r, "sd_accuracy");
    const double b = t.number(r, "bayes_accuracy");
    if (!(k > 0.0)) throw DataError(t.path + ": row " + std::to_string(t.line_numbers[r]) + ": k must be positive");
    k_lo = std::min(k_lo, k);
    k_hi = std::max(k_hi, k);
    a_lo = std::min({a_lo, m - 2 * sd, b});
    a_hi = std::max({a_hi, m + 2 * sd, b});
  }
  Svg svg("Test accuracy against k (mean and 2 SD)", Svg::x_axis(k_lo, k_hi, true), Svg::y_axis(a_lo, a_hi, false), "k",
          "test accuracy");
  std::map<double, double> bayes;
  std::size_t color = 0;
  for (const auto& cls : classifiers_of(t)) {
    std::vector<double> xs, lo, hi;
    std::vector<std::pair<double, double>> line;
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
      if (t.text(r, "classifier_id") != cls) continue;
      const double k = t.number(r, "k"), m = t.number(r, "mean_accuracy"), sd = t.number(r, "sd_accuracy");
      xs.push_back(k);
      lo.push_back(m - 2 * sd);
      hi.push_back(m + 2 * sd);
      line.emplace_back(k, m);
      bayes[k] = t.number(r, "bayes_accuracy");
    }
    const std::string c = kColors[color++ % 4];
    svg.band(xs, lo, hi, c);
    svg.polyline(line, c);
    for (const auto& [x, y] : line) svg.point(x, y, c);
    svg.legend(cls, c);
  }
  svg.polyline({bayes.begin(), bayes.end()}, "black", true, 1.5);
  svg.legend("Bayes", "black", true);
  return svg.finish();
}

std::string plot_rate(const CsvTable& t) {
  std::vector<SummaryRow> summary;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    SummaryRow s;
    s.classifier = t.text(r, "classifier_id");
    s.n_train = static_cast<std::size_t>(t.number(r, "n_train"));
    s.mean_excess = t.number(r, "mean_excess");
    s.replicates = static_cast<std::size_t>(t.number(r, "replicates"));
    s.below_noise_floor = t.number(r, "below_noise_floor") != 0.0 || !(s.mean_excess > 0.0);
    if (!(s.n_train > 0)) throw DataError(t.path + ": row " + std::to_string(t.line_numbers[r]) + ": n_train must be positive");
    summary.push_back(s);
  }
  double n_lo = INFINITY, n_hi = -INFINITY, e_lo = INFINITY, e_hi = -INFINITY;
  for (const auto& s : summary) {
    if (!(s.mean_excess > 0.0)) continue;
    n_lo = std::min(n_lo, static_cast<double>(s.n_train));
    n_hi = std::max(n_hi, static_cast<double>(s.n_train));
    e_lo = std::min(e_lo, s.mean_excess);
    e_hi = std::max(e_hi, s.mean_excess);
  }
  if (!(n_hi >= n_lo)) throw DataError(t.path + ": no positive excess risks to plot");
  Svg svg("Excess risk against n (log-log)", Svg::x_axis(n_lo, n_hi, true), Svg::y_axis(e_lo, e_hi, true),
          "training sample size n", "excess risk");
  const auto fits = fit_rates(summary);
  std::size_t color = 0;
  for (const auto& fit : fits) {
    const std::string c = kColors[color++ % 4];
    bool any = false;
    for (const auto& s : summary) {
      if (s.classifier != fit.classifier || !(s.mean_excess > 0.0)) continue;
      svg.point(static_cast<double>(s.n_train), s.mean_excess, c, s.below_noise_floor ? 2.0 : 3.5);
      any = true;
    }
    if (!any) continue;
    if (fit.valid) {
      const auto at = [&](double n) { return std::exp(fit.intercept + fit.slope * std::log(n)); };
      svg.polyline({{n_lo, at(n_lo)}, {n_hi, at(n_hi)}}, c);
      char label[96];
      std::snprintf(label, sizeof label, "%s (slope %.2f)", fit.classifier.c_str(), fit.slope);
      svg.legend(label, c);
    } else {
      svg.legend(fit.classifier + " (no fit)", c);
    }
  }
  return svg.finish();
}

std::string plot_scatter(const CsvTable& t) {
  Svg svg("Training sample", Svg::x_axis(0.0, 1.0, false), Svg::y_axis(0.0, 1.0, false), "x1", "x2");
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const double x1 = t.number(r, "x1"), x2 = t.number(r, "x2"), y = t.number(r, "y");
    if (y != 1.0 && y != -1.0) {
      throw DataError(t.path + ": row " + std::to_string(t.line_numbers[r]) + ": label must be -1 or 1");
    }
    svg.point(x1, x2, y > 0 ? kColors[0] : kColors[1], 1.8);
  }
  std::vector<std::pair<double, double>> curve;
  for (double x : linspace(0.0, 1.0, 301)) curve.emplace_back(x, boundary_value(x));
  svg.polyline(curve, "black", false, 2.0);
  svg.legend("y = +1", kColors[0]);
  svg.legend("y = -1", kColors[1]);
  svg.legend("boundary", "black");
  return svg.finish();
}

}  // namespace

int cmd_plot(const std::string& input_csv, const std::string& kind, const std::string& output_svg) {
  if (kind != "acc" && kind != "rate" && kind != "scatter") {
    throw ConfigError("plot kind must be acc, rate or scatter, got '" + kind + "'");
  }
  const CsvTable table = read_csv(input_csv);
  std::string svg;
  if (kind == "acc") svg = plot_acc(table);
  else if (kind == "rate") svg = plot_rate(table);
  else svg = plot_scatter(table);
  write_file_atomic(output_svg, svg);
  return kExitOk;
}

}  // namespace loclab
