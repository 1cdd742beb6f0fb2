#pragma once

// Subset selection over the quality space.
//
// Interval selections keep the records whose clip score (DIS), loss (DIL) or
// both (DIQ) fall inside closed bounds. Top-fraction selections take the
// highest-ranked round(f * n) records. Regions split the space into a 3x3
// grid; sample_from and mix build derived subsets from existing manifests.

#include <array>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "curate/core.hpp"
#include "curate/ingest.hpp"

namespace curate {

/// 1-based nearest-rank position ceil(q * n), with q = 0 mapping to 1.
/// Throws std::invalid_argument for q outside [0, 1].
std::size_t nearest_rank(std::size_t n, double q);

/// Value at the nearest-rank position of the ascending axis.
double quantile(const QualityIndex& index, Axis axis, double q);

/// Bounds [quantile(lo), quantile(hi)] on one axis.
Bounds1D percentile_bounds(const QualityIndex& index, Axis axis, double lo,
                           double hi);

/// Records with clip_score in `bounds`, descending by clip_score.
SubsetManifest select_dis(const QualityIndex& index, const Bounds1D& bounds);
/// Records with loss in `bounds`, descending by loss.
SubsetManifest select_dil(const QualityIndex& index, const Bounds1D& bounds);
/// Records inside both intervals, descending by similarity rank + loss rank.
SubsetManifest select_diq(const QualityIndex& index, const Bounds2D& bounds);

enum class Strategy { dis, dil, diq };
std::string_view to_string(Strategy s);
std::optional<Strategy> parse_strategy(std::string_view s);

/// round(f * n), at least 1 and at most n. f must lie in (0, 1].
std::size_t top_fraction_size(std::size_t n, double fraction);

/// The top round(f * n) records. dis/dil rank by one axis. diq finds the
/// largest joint quantile q whose corner {s >= Q_s(q), l >= Q_l(q)} still
/// holds m records, then keeps the m with the highest rank sum.
SubsetManifest select_top_fraction(const QualityIndex& index, Strategy strategy,
                                   double fraction);

enum class Binning { quantile, equal_width };
std::string_view to_string(Binning b);
std::optional<Binning> parse_binning(std::string_view s);

/// 3x3 partition. Row r is the loss band, column c the similarity band, both
/// low to high. Cell (r, c) holds records with row_edges[r] <= loss <
/// row_edges[r+1] and col_edges[c] <= clip < col_edges[c+1]; the top edges
/// are inclusive.
struct RegionGrid {
  std::array<double, 4> row_edges{};
  std::array<double, 4> col_edges{};
  Binning binning = Binning::quantile;
  std::vector<SubsetManifest> cells;  // row-major, 9 entries

  const SubsetManifest& cell(int row, int col) const { return cells.at(row * 3 + col); }
  Bounds2D cell_bounds(int row, int col) const;
};

RegionGrid partition_regions(const QualityIndex& index,
                             Binning binning = Binning::quantile);

/// Seeded uniform sample of min(m, |manifest|) ids without replacement,
/// returned in ascending id order.
SubsetManifest sample_from(const SubsetManifest& manifest, std::size_t m,
                           std::uint64_t seed);

/// Union of the subsets, ascending by id. All must share source_count.
SubsetManifest mix(std::span<const SubsetManifest> subsets);

}  // namespace curate
