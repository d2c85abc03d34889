#include "rfedit/svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <vector>

#include "rfedit/csv.hpp"

namespace rfedit {

namespace {

constexpr double kWidth = 640.0;
constexpr double kHeight = 480.0;
constexpr double kMargin = 56.0;

const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                          "#ff7f0e", "#8c564b", "#e377c2", "#7f7f7f"};

double parse_number(const std::string& s, const std::string& col) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size() || !std::isfinite(v)) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw ConfigError("emit_svg: column '" + col + "' has non-numeric value '" + s + "'");
  }
}

std::string fmt(double v) {
  // Fixed precision for pixel coordinates keeps the file stable and compact.
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

}  // namespace

void emit_svg(const std::filesystem::path& csv_path, const std::string& x_col,
              const std::string& y_col, const std::optional<std::string>& group_col,
              const std::filesystem::path& out_path) {
  const CsvTable table = read_csv(csv_path);
  const int xi = table.column(x_col);
  const int yi = table.column(y_col);
  if (xi < 0) throw ConfigError("emit_svg: no column named '" + x_col + "'");
  if (yi < 0) throw ConfigError("emit_svg: no column named '" + y_col + "'");
  int gi = -1;
  if (group_col) {
    gi = table.column(*group_col);
    if (gi < 0) throw ConfigError("emit_svg: no column named '" + *group_col + "'");
  }
  if (table.rows.empty()) throw ConfigError("emit_svg: no data rows in " + csv_path.string());

  struct Point {
    double x, y;
  };
  std::vector<std::string> group_order;
  std::map<std::string, std::vector<Point>> groups;
  double x_min = 0, x_max = 0, y_min = 0, y_max = 0;
  bool first = true;
  for (const auto& row : table.rows) {
    const double x = parse_number(row.at(static_cast<std::size_t>(xi)), x_col);
    const double y = parse_number(row.at(static_cast<std::size_t>(yi)), y_col);
    const std::string key = gi >= 0 ? row.at(static_cast<std::size_t>(gi)) : std::string();
    if (groups.find(key) == groups.end()) group_order.push_back(key);
    groups[key].push_back({x, y});
    if (first) {
      x_min = x_max = x;
      y_min = y_max = y;
      first = false;
    } else {
      x_min = std::min(x_min, x);
      x_max = std::max(x_max, x);
      y_min = std::min(y_min, y);
      y_max = std::max(y_max, y);
    }
  }
  const double x_span = x_max > x_min ? x_max - x_min : 1.0;
  const double y_span = y_max > y_min ? y_max - y_min : 1.0;
  const auto px = [&](double x) { return kMargin + (x - x_min) / x_span * (kWidth - 2 * kMargin); };
  const auto py = [&](double y) {
    return kHeight - kMargin - (y - y_min) / y_span * (kHeight - 2 * kMargin);
  };

  std::ofstream out(out_path, std::ios::binary);
  if (!out) throw IoError("cannot open " + out_path.string() + " for writing");
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\""
      << kHeight << "\" viewBox=\"0 0 " << kWidth << " " << kHeight << "\">\n";
  out << "  <rect width=\"" << kWidth << "\" height=\"" << kHeight << "\" fill=\"white\"/>\n";
  // axes
  out << "  <line x1=\"" << fmt(kMargin) << "\" y1=\"" << fmt(kHeight - kMargin) << "\" x2=\""
      << fmt(kWidth - kMargin) << "\" y2=\"" << fmt(kHeight - kMargin)
      << "\" stroke=\"black\"/>\n";
  out << "  <line x1=\"" << fmt(kMargin) << "\" y1=\"" << fmt(kMargin) << "\" x2=\""
      << fmt(kMargin) << "\" y2=\"" << fmt(kHeight - kMargin) << "\" stroke=\"black\"/>\n";
  // range labels and axis names
  out << "  <text x=\"" << fmt(kMargin) << "\" y=\"" << fmt(kHeight - kMargin + 18)
      << "\" font-size=\"12\">" << format_double(x_min) << "</text>\n";
  out << "  <text x=\"" << fmt(kWidth - kMargin) << "\" y=\"" << fmt(kHeight - kMargin + 18)
      << "\" font-size=\"12\" text-anchor=\"end\">" << format_double(x_max) << "</text>\n";
  out << "  <text x=\"" << fmt(kMargin - 6) << "\" y=\"" << fmt(kHeight - kMargin)
      << "\" font-size=\"12\" text-anchor=\"end\">" << format_double(y_min) << "</text>\n";
  out << "  <text x=\"" << fmt(kMargin - 6) << "\" y=\"" << fmt(kMargin + 4)
      << "\" font-size=\"12\" text-anchor=\"end\">" << format_double(y_max) << "</text>\n";
  out << "  <text x=\"" << fmt(kWidth / 2) << "\" y=\"" << fmt(kHeight - 12)
      << "\" font-size=\"13\" text-anchor=\"middle\">" << x_col << "</text>\n";
  out << "  <text x=\"14\" y=\"" << fmt(kHeight / 2)
      << "\" font-size=\"13\" text-anchor=\"middle\" transform=\"rotate(-90 14 "
      << fmt(kHeight / 2) << ")\">" << y_col << "</text>\n";

  std::size_t color_idx = 0;
  double legend_y = kMargin;
  for (const auto& key : group_order) {
    const auto& pts = groups.at(key);
    const char* color = kPalette[color_idx % (sizeof(kPalette) / sizeof(kPalette[0]))];
    ++color_idx;
    out << "  <polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
    for (std::size_t i = 0; i < pts.size(); ++i) {
      if (i > 0) out << ' ';
      out << fmt(px(pts[i].x)) << ',' << fmt(py(pts[i].y));
    }
    out << "\"/>\n";
    if (gi >= 0) {
      out << "  <text x=\"" << fmt(kWidth - kMargin - 4) << "\" y=\"" << fmt(legend_y)
          << "\" font-size=\"12\" text-anchor=\"end\" fill=\"" << color << "\">" << *group_col
          << "=" << key << "</text>\n";
      legend_y += 16.0;
    }
  }
  out << "</svg>\n";
  if (!out) throw IoError("failed writing " + out_path.string());
}

}  // namespace rfedit
