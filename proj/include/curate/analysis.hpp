#pragma once

// Distribution analyses of the quality space: axis summaries, 2D grids
// (counts per task type, mean token length), correlations, and SVG scatter
// plots with optional selection overlays.

#include <array>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "curate/core.hpp"
#include "curate/ingest.hpp"
#include "curate/selection.hpp"

namespace curate {

struct AxisSummary {
  double min = 0.0;
  double max = 0.0;
  double mean = 0.0;
  double std = 0.0;  // population standard deviation
  std::map<int, double> percentiles;  // {1,5,25,50,75,95,99} -> nearest-rank value
};

struct AxisStats {
  std::size_t n = 0;
  AxisSummary similarity;
  AxisSummary loss;
};

inline constexpr std::array<int, 7> kSummaryPercentiles = {1, 5, 25, 50, 75, 95, 99};

AxisSummary summarize(const QualityIndex& index, Axis axis);
AxisStats axis_stats(const QualityIndex& index);
std::string render_stats_json(const AxisStats& stats);

enum class GridMetric { count, density, mean_token_length };
std::string_view to_string(GridMetric m);

/// Row-major grid: row = loss bin (y), column = similarity bin (x). Null
/// cells (no data for a mean) are nullopt.
struct Grid2D {
  std::vector<double> x_edges;
  std::vector<double> y_edges;
  std::vector<std::optional<double>> values;
  GridMetric metric = GridMetric::count;

  std::size_t bins_x() const { return x_edges.size() - 1; }
  std::size_t bins_y() const { return y_edges.size() - 1; }
  const std::optional<double>& at(std::size_t row, std::size_t col) const {
    return values.at(row * bins_x() + col);
  }
  std::vector<double> x_centers() const;
  std::vector<double> y_centers() const;
};

struct Bins {
  std::size_t x = 50;
  std::size_t y = 50;
};

/// bins+1 equally spaced edges over the full index range of the axis. A
/// constant axis gets the range [v - 0.5, v + 0.5].
std::vector<double> axis_edges(const QualityIndex& index, Axis axis, std::size_t bins);

/// Counts of the records whose task type matches `task_type` (all records
/// when nullopt) on edges spanning the full index. Throws
/// std::invalid_argument for an unknown task type name.
Grid2D density_grid(const QualityIndex& index,
                    std::optional<std::string_view> task_type = std::nullopt,
                    Bins bins = {});

/// Count grid rescaled so the cells integrate to one over the plane.
Grid2D to_density(const Grid2D& counts);

/// Mean token length per cell; empty cells are null.
Grid2D token_length_grid(const QualityIndex& index, Bins bins = {});

/// Count-weighted mean of the cell centers: {similarity, loss}.
std::array<double, 2> grid_centroid(const Grid2D& grid);

enum class Column { loss, clip_score, token_length };
std::optional<Column> parse_column(std::string_view s);

/// Pearson correlation. Throws DataError for n < 2 or a constant column.
double correlation(const QualityIndex& index, Column a, Column b);

enum class ColorBy { task_type, token_length, none };
std::optional<ColorBy> parse_color_by(std::string_view s);

struct Overlays {
  std::optional<Bounds2D> bounds;
  std::optional<RegionGrid> regions;
  /// (S_p, L_p) per curriculum phase.
  std::vector<std::array<double, 2>> thresholds;
};

/// Deterministic SVG scatter of (clip_score, loss): one <circle class="pt">
/// per record, overlay <line class="overlay"> elements, and a legend.
std::string render_scatter_svg(const QualityIndex& index, ColorBy color_by,
                               const Overlays& overlays = {});
void render_scatter(const QualityIndex& index, ColorBy color_by,
                    const Overlays& overlays, const fs::path& out);

/// Header row "", x centers...; then one row per y bin: center, values...
std::string render_grid_csv(const Grid2D& grid);
void export_grid_csv(const Grid2D& grid, const fs::path& out);

struct GridCsv {
  std::vector<double> x_centers;
  std::vector<double> y_centers;
  std::vector<std::optional<double>> values;
};
GridCsv parse_grid_csv(std::string_view text);

}  // namespace curate
