#pragma once

// Output layout: CSV tables with named columns, minimal SVG line plots and a
// manifest describing the run.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "../errors.hpp"

namespace swtaxis::cli {

inline constexpr const char* version = "1.0.0";

inline std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

class CsvWriter {
 public:
  CsvWriter(const std::filesystem::path& path, std::vector<std::string> columns) : columns_(std::move(columns)) {
    out_.open(path);
    if (!out_) throw Error("cannot write " + path.string());
    for (std::size_t i = 0; i < columns_.size(); ++i) out_ << (i ? "," : "") << columns_[i];
    out_ << '\n';
  }

  void row(const std::vector<double>& values) {
    if (values.size() != columns_.size()) throw Error("csv row width does not match header");
    for (std::size_t i = 0; i < values.size(); ++i) out_ << (i ? "," : "") << format_number(values[i]);
    out_ << '\n';
  }

  // Mixed rows with text cells.
  void row(const std::vector<std::string>& cells) {
    if (cells.size() != columns_.size()) throw Error("csv row width does not match header");
    for (std::size_t i = 0; i < cells.size(); ++i) out_ << (i ? "," : "") << cells[i];
    out_ << '\n';
  }

 private:
  std::vector<std::string> columns_;
  std::ofstream out_;
};

struct Series {
  std::string name;
  std::vector<double> x, y;
};

// Static line plot: axes, ticks at the range ends, one polyline per series and a legend.
inline void write_svg_plot(const std::filesystem::path& path, const std::string& title, const std::string& xlabel,
                           const std::string& ylabel, const std::vector<Series>& series, bool logx = false) {
  const double W = 640, H = 420, L = 70, R = 160, T = 40, B = 50;
  double x0 = std::numeric_limits<double>::infinity(), x1 = -x0, y0 = x0, y1 = -x0;
  auto tx = [&](double x) { return logx ? std::log10(x) : x; };
  for (const auto& s : series)
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      if (!std::isfinite(s.y[i]) || (logx && !(s.x[i] > 0))) continue;
      x0 = std::min(x0, tx(s.x[i]));
      x1 = std::max(x1, tx(s.x[i]));
      y0 = std::min(y0, s.y[i]);
      y1 = std::max(y1, s.y[i]);
    }
  if (!std::isfinite(x0)) x0 = 0, x1 = 1, y0 = 0, y1 = 1;
  if (x1 == x0) x1 = x0 + 1;
  if (y1 == y0) y1 = y0 + 1;
  auto px = [&](double x) { return L + (tx(x) - x0) / (x1 - x0) * (W - L - R); };
  auto py = [&](double y) { return H - B - (y - y0) / (y1 - y0) * (H - T - B); };
  static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf"};

  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  out << "<text x=\"" << W / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">" << title << "</text>\n";
  out << "<line x1=\"" << L << "\" y1=\"" << H - B << "\" x2=\"" << W - R << "\" y2=\"" << H - B << "\" stroke=\"black\"/>\n";
  out << "<line x1=\"" << L << "\" y1=\"" << T << "\" x2=\"" << L << "\" y2=\"" << H - B << "\" stroke=\"black\"/>\n";
  auto tick = [](double v) {
    char b[32];
    std::snprintf(b, sizeof b, "%.4g", v);
    return std::string(b);
  };
  const double xl = logx ? std::pow(10.0, x0) : x0, xr = logx ? std::pow(10.0, x1) : x1;
  out << "<text x=\"" << L << "\" y=\"" << H - B + 16 << "\" text-anchor=\"middle\">" << tick(xl) << "</text>\n";
  out << "<text x=\"" << W - R << "\" y=\"" << H - B + 16 << "\" text-anchor=\"middle\">" << tick(xr) << "</text>\n";
  out << "<text x=\"" << L - 6 << "\" y=\"" << H - B << "\" text-anchor=\"end\">" << tick(y0) << "</text>\n";
  out << "<text x=\"" << L - 6 << "\" y=\"" << T + 4 << "\" text-anchor=\"end\">" << tick(y1) << "</text>\n";
  out << "<text x=\"" << (L + W - R) / 2 << "\" y=\"" << H - 12 << "\" text-anchor=\"middle\">" << xlabel
      << (logx ? " (log)" : "") << "</text>\n";
  out << "<text x=\"16\" y=\"" << (T + H - B) / 2 << "\" text-anchor=\"middle\" transform=\"rotate(-90 16 " << (T + H - B) / 2
      << ")\">" << ylabel << "</text>\n";
  for (std::size_t k = 0; k < series.size(); ++k) {
    const auto& s = series[k];
    const char* c = colors[k % 7];
    out << "<polyline fill=\"none\" stroke=\"" << c << "\" stroke-width=\"1.5\" points=\"";
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      if (!std::isfinite(s.y[i]) || (logx && !(s.x[i] > 0))) continue;
      out << px(s.x[i]) << ',' << py(s.y[i]) << ' ';
    }
    out << "\"/>\n";
    const double ly = T + 16 * static_cast<double>(k);
    out << "<line x1=\"" << W - R + 12 << "\" y1=\"" << ly << "\" x2=\"" << W - R + 32 << "\" y2=\"" << ly << "\" stroke=\"" << c
        << "\" stroke-width=\"2\"/>\n";
    out << "<text x=\"" << W - R + 38 << "\" y=\"" << ly + 4 << "\">" << s.name << "</text>\n";
  }
  out << "</svg>\n";
}

inline std::string utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
  return buf;
}

// manifest.json: everything except the timestamp is reproducible.
inline void write_manifest(const std::filesystem::path& dir, const std::string& command, const nlohmann::json& config,
                           std::uint64_t hash, const nlohmann::json& extra, const std::vector<std::string>& files) {
  nlohmann::json m;
  m["command"] = command;
  m["version"] = version;
  char h[24];
  std::snprintf(h, sizeof h, "%016llx", static_cast<unsigned long long>(hash));
  m["config_hash"] = h;
  m["config"] = config;
  m["outputs"] = files;
  m["run"] = extra;
  m["timestamp"] = utc_timestamp();
  std::ofstream out(dir / "manifest.json");
  if (!out) throw Error("cannot write manifest in " + dir.string());
  out << m.dump(2) << '\n';
}

}  // namespace swtaxis::cli
