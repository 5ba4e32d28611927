#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace infext {

struct PlotSeries {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
};

// Minimal standalone SVG renderings.
void write_line_svg(const std::filesystem::path& path, const std::string& title,
                    const std::string& x_label, const std::string& y_label,
                    const std::vector<PlotSeries>& series);
// Rows drawn top to bottom; columns are max-pooled down to max_columns.
void write_heatmap_svg(const std::filesystem::path& path, const std::string& title,
                       const Eigen::MatrixXd& values, int max_columns = 256);

}  // namespace infext
