#include "infext/plot.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace infext {

using Index = Eigen::Index;

namespace {

constexpr double kWidth = 800, kHeight = 300, kMargin = 50;
const char* kColours[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd"};

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

}  // namespace

void write_line_svg(const std::filesystem::path& path, const std::string& title,
                    const std::string& x_label, const std::string& y_label,
                    const std::vector<PlotSeries>& series) {
  double x0 = std::numeric_limits<double>::infinity(), x1 = -x0, y0 = x0, y1 = -x0;
  for (const auto& s : series) {
    for (double v : s.x) x0 = std::min(x0, v), x1 = std::max(x1, v);
    for (double v : s.y) y0 = std::min(y0, v), y1 = std::max(y1, v);
  }
  if (!(x1 > x0)) x1 = x0 + 1;
  if (!(y1 > y0)) y1 = y0 + 1;
  const double pw = kWidth - 2 * kMargin, ph = kHeight - 2 * kMargin;
  std::ostringstream svg;
  svg.precision(6);
  svg << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
      << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\"" << kHeight
      << "\" viewBox=\"0 0 " << kWidth << ' ' << kHeight << "\">\n"
      << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
      << "<text x=\"" << kWidth / 2 << "\" y=\"20\" text-anchor=\"middle\" font-size=\"14\">"
      << escape(title) << "</text>\n"
      << "<rect x=\"" << kMargin << "\" y=\"" << kMargin << "\" width=\"" << pw << "\" height=\""
      << ph << "\" fill=\"none\" stroke=\"black\"/>\n"
      << "<text x=\"" << kWidth / 2 << "\" y=\"" << kHeight - 10
      << "\" text-anchor=\"middle\" font-size=\"12\">" << escape(x_label) << "</text>\n"
      << "<text x=\"12\" y=\"" << kHeight / 2 << "\" font-size=\"12\" transform=\"rotate(-90 12 "
      << kHeight / 2 << ")\" text-anchor=\"middle\">" << escape(y_label) << "</text>\n"
      << "<text x=\"" << kMargin - 4 << "\" y=\"" << kMargin + 4
      << "\" text-anchor=\"end\" font-size=\"10\">" << y1 << "</text>\n"
      << "<text x=\"" << kMargin - 4 << "\" y=\"" << kMargin + ph
      << "\" text-anchor=\"end\" font-size=\"10\">" << y0 << "</text>\n"
      << "<text x=\"" << kMargin << "\" y=\"" << kMargin + ph + 14 << "\" font-size=\"10\">" << x0
      << "</text>\n"
      << "<text x=\"" << kMargin + pw << "\" y=\"" << kMargin + ph + 14
      << "\" text-anchor=\"end\" font-size=\"10\">" << x1 << "</text>\n";
  for (std::size_t k = 0; k < series.size(); ++k) {
    const auto& s = series[k];
    const std::size_t n = std::min(s.x.size(), s.y.size());
    const std::size_t stride = std::max<std::size_t>(1, n / 2000);
    svg << "<polyline fill=\"none\" stroke-width=\"1\" stroke=\"" << kColours[k % 5]
        << "\" points=\"";
    for (std::size_t i = 0; i < n; i += stride) {
      svg << kMargin + (s.x[i] - x0) / (x1 - x0) * pw << ','
          << kMargin + (1 - (s.y[i] - y0) / (y1 - y0)) * ph << ' ';
    }
    svg << "\"/>\n";
    svg << "<text x=\"" << kMargin + pw - 4 << "\" y=\"" << kMargin + 14 + 14 * k
        << "\" text-anchor=\"end\" font-size=\"11\" fill=\"" << kColours[k % 5] << "\">"
        << escape(s.label) << "</text>\n";
  }
  svg << "</svg>\n";
  write_file(path, svg.str());
}

void write_heatmap_svg(const std::filesystem::path& path, const std::string& title,
                       const Eigen::MatrixXd& values, int max_columns) {
  const Index rows = values.rows();
  const Index pool = std::max<Index>(1, (values.cols() + max_columns - 1) / max_columns);
  const Index cols = (values.cols() + pool - 1) / pool;
  Eigen::MatrixXd pooled = Eigen::MatrixXd::Zero(rows, cols);
  for (Index c = 0; c < cols; ++c) {
    const Index b = c * pool, e = std::min(values.cols(), b + pool);
    pooled.col(c) = values.middleCols(b, e - b).rowwise().maxCoeff();
  }
  const double vmax = rows * cols > 0 ? std::max(pooled.maxCoeff(), 1e-12) : 1.0;
  const double pw = kWidth - 2 * kMargin, ph = kHeight - 2 * kMargin;
  const double cw = cols > 0 ? pw / cols : pw, rh = rows > 0 ? ph / rows : ph;
  std::ostringstream svg;
  svg.precision(5);
  svg << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
      << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\"" << kHeight
      << "\" viewBox=\"0 0 " << kWidth << ' ' << kHeight << "\">\n"
      << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
      << "<text x=\"" << kWidth / 2 << "\" y=\"20\" text-anchor=\"middle\" font-size=\"14\">"
      << escape(title) << "</text>\n<g shape-rendering=\"crispEdges\">\n";
  for (Index r = 0; r < rows; ++r) {
    for (Index c = 0; c < cols; ++c) {
      const int level = static_cast<int>(std::lround(255.0 * (1.0 - pooled(r, c) / vmax)));
      svg << "<rect x=\"" << kMargin + c * cw << "\" y=\"" << kMargin + r * rh << "\" width=\""
          << cw << "\" height=\"" << rh << "\" fill=\"rgb(255," << level << ',' << level
          << ")\"/>\n";
    }
  }
  svg << "</g>\n<text x=\"" << kWidth / 2 << "\" y=\"" << kHeight - 10
      << "\" text-anchor=\"middle\" font-size=\"12\">frame (max " << vmax << ")</text>\n</svg>\n";
  write_file(path, svg.str());
}

}  // namespace infext
