#include "trgan/figures.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <optional>
#include <sstream>

#include "trgan/errors.hpp"

namespace trgan {

namespace {

namespace fs = std::filesystem;

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;

  std::vector<double> column(const std::string& name) const {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw ParseError(ParseError::Kind::kMalformedHeader, "missing column '" + name + "'");
    const auto k = static_cast<std::size_t>(it - header.begin());
    std::vector<double> out;
    for (const auto& r : rows) out.push_back(r[k]);
    return out;
  }
};

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string coord(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string tick_label(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", std::abs(v) < 1e-12 ? 0.0 : v);
  return buf;
}

void write_table(const fs::path& path, const Table& t) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  for (std::size_t i = 0; i < t.header.size(); ++i) out << (i ? "," : "") << t.header[i];
  out << '\n';
  for (const auto& r : t.rows) {
    for (std::size_t i = 0; i < r.size(); ++i) out << (i ? "," : "") << fmt(r[i]);
    out << '\n';
  }
  if (!out) throw ParseError(ParseError::Kind::kIo, "cannot write " + path.string());
}

Table read_table(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError(ParseError::Kind::kIo, "cannot open " + path.string());
  Table t;
  std::string line, cell;
  if (!std::getline(in, line)) throw ParseError(ParseError::Kind::kMalformedHeader, path.string() + ": empty file");
  std::stringstream hs(line);
  while (std::getline(hs, cell, ',')) t.header.push_back(cell);
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::vector<double> row;
    while (std::getline(ss, cell, ',')) row.push_back(std::strtod(cell.c_str(), nullptr));
    if (row.size() != t.header.size()) {
      throw ParseError(ParseError::Kind::kDimensionMismatch, path.string() + ": row width differs from header");
    }
    t.rows.push_back(std::move(row));
  }
  return t;
}

// --- SVG plotting ------------------------------------------------------------

struct Axis {
  double lo = 0.0, hi = 1.0;
  std::string label;
};

Axis fit_axis(const std::vector<double>& values, std::string label, double pad = 0.05) {
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (double v : values) {
    if (!std::isfinite(v)) continue;
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  if (!std::isfinite(lo)) return {0.0, 1.0, std::move(label)};
  if (hi - lo < 1e-12) {
    lo -= 0.5;
    hi += 0.5;
  }
  const double m = (hi - lo) * pad;
  return {lo - m, hi + m, std::move(label)};
}

constexpr const char* kColours[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd"};

class Svg {
 public:
  static constexpr double kW = 640, kH = 420, kLeft = 70, kRight = 70, kTop = 40, kBottom = 55;

  Svg(std::string title, Axis x, Axis y) : x_(std::move(x)), y_(std::move(y)) {
    body_ << "<rect x=\"0\" y=\"0\" width=\"" << kW << "\" height=\"" << kH << "\" fill=\"white\"/>\n";
    body_ << "<text x=\"" << kW / 2 << "\" y=\"24\" text-anchor=\"middle\" font-size=\"15\">" << title << "</text>\n";
    frame();
  }

  void secondary(Axis y2) {
    y2_ = std::move(y2);
    for (int i = 0; i <= 4; ++i) {
      const double v = y2_->lo + (y2_->hi - y2_->lo) * i / 4.0;
      const double py = py_of(v, *y2_);
      body_ << "<line x1=\"" << coord(kW - kRight) << "\" y1=\"" << coord(py) << "\" x2=\"" << coord(kW - kRight + 5)
            << "\" y2=\"" << coord(py) << "\" stroke=\"black\"/>\n";
      body_ << "<text x=\"" << coord(kW - kRight + 8) << "\" y=\"" << coord(py + 4)
            << "\" font-size=\"11\">" << tick_label(v) << "</text>\n";
    }
    body_ << "<text transform=\"translate(" << coord(kW - 14) << "," << coord(kTop + plot_h() / 2)
          << ") rotate(90)\" text-anchor=\"middle\" font-size=\"12\">" << y2_->label << "</text>\n";
  }

  void line(const std::vector<double>& xs, const std::vector<double>& ys, int colour, bool on_secondary = false,
            bool markers = true, bool dashed = false) {
    const Axis& ya = on_secondary ? *y2_ : y_;
    std::string path;
    bool pen = false;
    for (std::size_t i = 0; i < xs.size(); ++i) {
      if (!std::isfinite(xs[i]) || !std::isfinite(ys[i])) {
        pen = false;
        continue;
      }
      path += (pen ? " L" : " M") + coord(px_of(xs[i])) + "," + coord(py_of(ys[i], ya));
      pen = true;
      if (markers) {
        body_ << "<circle cx=\"" << coord(px_of(xs[i])) << "\" cy=\"" << coord(py_of(ys[i], ya))
              << "\" r=\"3\" fill=\"" << kColours[colour] << "\"/>\n";
      }
    }
    if (!path.empty()) {
      body_ << "<path d=\"" << path.substr(1) << "\" fill=\"none\" stroke=\"" << kColours[colour]
            << "\" stroke-width=\"1.5\"" << (dashed ? " stroke-dasharray=\"5,4\"" : "") << "/>\n";
    }
  }

  void bar(double x0, double x1, double h, int colour) {
    if (!(h > 0.0)) return;
    const double top = py_of(h, y_), base = py_of(std::max(y_.lo, 0.0), y_);
    body_ << "<rect x=\"" << coord(px_of(x0)) << "\" y=\"" << coord(top) << "\" width=\""
          << coord(px_of(x1) - px_of(x0)) << "\" height=\"" << coord(base - top) << "\" fill=\"" << kColours[colour]
          << "\" fill-opacity=\"0.5\" stroke=\"" << kColours[colour] << "\"/>\n";
  }

  void legend(const std::vector<std::string>& names) {
    for (std::size_t i = 0; i < names.size(); ++i) {
      const double y = kTop + 12 + 16.0 * static_cast<double>(i);
      body_ << "<rect x=\"" << coord(kLeft + 10) << "\" y=\"" << coord(y - 9) << "\" width=\"12\" height=\"10\" fill=\""
            << kColours[i] << "\"/>\n";
      body_ << "<text x=\"" << coord(kLeft + 28) << "\" y=\"" << coord(y) << "\" font-size=\"11\">" << names[i]
            << "</text>\n";
    }
  }

  std::string str() const {
    std::ostringstream s;
    s << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
      << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kW << "\" height=\"" << kH << "\" viewBox=\"0 0 "
      << kW << ' ' << kH << "\" font-family=\"sans-serif\">\n"
      << body_.str() << "</svg>\n";
    return s.str();
  }

 private:
  static double plot_w() { return kW - kLeft - kRight; }
  static double plot_h() { return kH - kTop - kBottom; }
  double px_of(double x) const { return kLeft + (x - x_.lo) / (x_.hi - x_.lo) * plot_w(); }
  static double py_of(double y, const Axis& a) { return kTop + plot_h() - (y - a.lo) / (a.hi - a.lo) * plot_h(); }

  void frame() {
    body_ << "<rect x=\"" << kLeft << "\" y=\"" << kTop << "\" width=\"" << plot_w() << "\" height=\"" << plot_h()
          << "\" fill=\"none\" stroke=\"black\"/>\n";
    for (int i = 0; i <= 4; ++i) {
      const double xv = x_.lo + (x_.hi - x_.lo) * i / 4.0;
      const double yv = y_.lo + (y_.hi - y_.lo) * i / 4.0;
      const double px = px_of(xv), py = py_of(yv, y_);
      body_ << "<line x1=\"" << coord(px) << "\" y1=\"" << coord(kTop + plot_h()) << "\" x2=\"" << coord(px)
            << "\" y2=\"" << coord(kTop + plot_h() + 5) << "\" stroke=\"black\"/>\n";
      body_ << "<text x=\"" << coord(px) << "\" y=\"" << coord(kTop + plot_h() + 18)
            << "\" text-anchor=\"middle\" font-size=\"11\">" << tick_label(xv) << "</text>\n";
      body_ << "<line x1=\"" << coord(kLeft - 5) << "\" y1=\"" << coord(py) << "\" x2=\"" << coord(kLeft)
            << "\" y2=\"" << coord(py) << "\" stroke=\"black\"/>\n";
      body_ << "<text x=\"" << coord(kLeft - 8) << "\" y=\"" << coord(py + 4)
            << "\" text-anchor=\"end\" font-size=\"11\">" << tick_label(yv) << "</text>\n";
    }
    body_ << "<text x=\"" << coord(kLeft + plot_w() / 2) << "\" y=\"" << coord(kH - 12)
          << "\" text-anchor=\"middle\" font-size=\"12\">" << x_.label << "</text>\n";
    body_ << "<text transform=\"translate(16," << coord(kTop + plot_h() / 2)
          << ") rotate(-90)\" text-anchor=\"middle\" font-size=\"12\">" << y_.label << "</text>\n";
  }

  Axis x_, y_;
  std::optional<Axis> y2_;
  std::ostringstream body_;
};

std::string render_histogram(const Table& t, const std::string& title) {
  const auto lo = t.column("bin_lo"), hi = t.column("bin_hi");
  const auto mem = t.column("members"), non = t.column("non_members");
  std::vector<double> xs = lo;
  xs.insert(xs.end(), hi.begin(), hi.end());
  std::vector<double> counts = mem;
  counts.insert(counts.end(), non.begin(), non.end());
  counts.push_back(0.0);
  Axis y = fit_axis(counts, "count");
  y.lo = 0.0;
  Svg svg(title, fit_axis(xs, "attack score", 0.0), y);
  for (std::size_t i = 0; i < lo.size(); ++i) {
    svg.bar(lo[i], hi[i], mem[i], 0);
    svg.bar(lo[i], hi[i], non[i], 1);
  }
  svg.legend({"members", "non-members"});
  return svg.str();
}

std::string render_roc(const Table& t, const std::string& title) {
  Svg svg(title, {0.0, 1.0, "false positive rate"}, {0.0, 1.0, "true positive rate"});
  svg.line({0.0, 1.0}, {0.0, 1.0}, 3, false, false, true);
  svg.line(t.column("fpr"), t.column("tpr"), 0, false, false);
  return svg.str();
}

std::string render_fidelity(const Table& t) {
  const auto step = t.column("step");
  const auto acc = t.column("correlation_accuracy");
  const auto mse = t.column("correlation_mse");
  Svg svg("Fidelity vs training step", fit_axis(step, "training step"), fit_axis(acc, "correlation accuracy"));
  svg.secondary(fit_axis(mse, "correlation MSE"));
  svg.line(step, acc, 0);
  svg.line(step, mse, 1, true);
  svg.legend({"correlation accuracy", "correlation MSE"});
  return svg.str();
}

std::string render_privacy_utility_step(const Table& t) {
  const auto step = t.column("step");
  const auto priv = t.column("privacy");
  const auto util = t.column("utility");
  std::vector<double> both = priv;
  both.insert(both.end(), util.begin(), util.end());
  Svg svg("Privacy and utility vs training step", fit_axis(step, "training step"), fit_axis(both, "value"));
  svg.line(step, priv, 0);
  svg.line(step, util, 1);
  svg.legend({"privacy protection", "utility (DSC)"});
  return svg.str();
}

std::string render_privacy_vs_utility(const Table& t) {
  const auto util = t.column("utility");
  const auto priv = t.column("privacy");
  Svg svg("Privacy vs utility", fit_axis(util, "utility (DSC)"), fit_axis(priv, "privacy protection"));
  svg.line(util, priv, 0);
  return svg.str();
}

std::string render(const std::string& name, const Table& t) {
  if (name == "hist_discriminator") return render_histogram(t, "Discriminator attack scores");
  if (name == "hist_generator") return render_histogram(t, "Generator attack scores");
  if (name == "roc_discriminator") return render_roc(t, "Discriminator attack ROC");
  if (name == "roc_generator") return render_roc(t, "Generator attack ROC");
  if (name == "fidelity_vs_step") return render_fidelity(t);
  if (name == "privacy_utility_vs_step") return render_privacy_utility_step(t);
  return render_privacy_vs_utility(t);
}

Table histogram_table(const AttackResult& r) {
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (const auto& rec : r.records) {
    lo = std::min(lo, rec.score);
    hi = std::max(hi, rec.score);
  }
  if (!(hi > lo)) {
    lo -= 0.5;
    hi += 0.5;
  }
  Table t{{"bin_lo", "bin_hi", "members", "non_members"}, {}};
  std::vector<double> mem(kHistogramBins, 0.0), non(kHistogramBins, 0.0);
  for (const auto& rec : r.records) {
    const int b = std::clamp(static_cast<int>(std::floor((rec.score - lo) / (hi - lo) * kHistogramBins)), 0,
                             kHistogramBins - 1);
    (rec.member ? mem : non)[static_cast<std::size_t>(b)] += 1.0;
  }
  const double w = (hi - lo) / kHistogramBins;
  for (int b = 0; b < kHistogramBins; ++b) {
    t.rows.push_back({lo + w * b, b + 1 == kHistogramBins ? hi : lo + w * (b + 1), mem[static_cast<std::size_t>(b)],
                      non[static_cast<std::size_t>(b)]});
  }
  return t;
}

Table roc_table(const AttackResult& r) {
  Table t{{"fpr", "tpr"}, {}};
  for (const auto& p : r.roc.points) t.rows.push_back({p.fpr, p.tpr});
  return t;
}

void write_svg(const fs::path& path, const std::string& svg) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << svg;
  if (!out) throw ParseError(ParseError::Kind::kIo, "cannot write " + path.string());
}

}  // namespace

std::vector<std::string> emit_figures(const Report& report, const fs::path& out_dir) {
  if (report.points.empty()) throw ConfigError("report lacks section \"points\"");
  if (!report.discriminator_attack) throw ConfigError("report lacks section \"discriminator_attack\"");
  if (!report.generator_attack) throw ConfigError("report lacks section \"generator_attack\"");
  fs::create_directories(out_dir);

  Table fid{{"step", "correlation_accuracy", "correlation_accuracy_sd", "correlation_mse", "correlation_mse_sd"}, {}};
  Table pus{{"step", "privacy", "utility"}, {}};
  Table pvu{{"step", "utility", "privacy"}, {}};
  for (const auto& p : report.points) {
    const double s = static_cast<double>(p.step);
    fid.rows.push_back({s, p.fidelity.accuracy_mean, p.fidelity.accuracy_sd, p.fidelity.mse_mean, p.fidelity.mse_sd});
    pus.rows.push_back({s, p.privacy, p.utility});
    pvu.rows.push_back({s, p.utility, p.privacy});
  }
  const Table tables[] = {histogram_table(*report.discriminator_attack), histogram_table(*report.generator_attack),
                          roc_table(*report.discriminator_attack),       roc_table(*report.generator_attack),
                          fid,                                           pus,
                          pvu};
  for (std::size_t i = 0; i < kFigureNames.size(); ++i) {
    write_table(out_dir / (std::string(kFigureNames[i]) + ".csv"), tables[i]);
  }
  std::vector<std::string> files;
  for (const char* name : kFigureNames) files.push_back(std::string(name) + ".csv");
  for (const auto& svg : render_figures(out_dir, out_dir)) files.push_back(svg);
  return files;
}

std::vector<std::string> render_figures(const fs::path& data_dir, const fs::path& out_dir) {
  fs::create_directories(out_dir);
  std::vector<std::string> files;
  for (const char* name : kFigureNames) {
    const Table t = read_table(data_dir / (std::string(name) + ".csv"));
    const std::string file = std::string(name) + ".svg";
    write_svg(out_dir / file, render(name, t));
    files.push_back(file);
  }
  return files;
}

}  // namespace trgan
