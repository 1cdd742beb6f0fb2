#pragma once

// Data-parallel scans over the columns of a quality index.
//
// Each kernel exists twice: `serial::` is the reference implementation kept
// for testing and benchmarking, `parallel::` is the OpenMP version. Both
// return identical results for identical input (outputs are integer counts
// or ascending position lists, so reduction order cannot leak in). The
// unqualified functions dispatch to the parallel version when OpenMP is
// available and the input is large enough to pay for the fork.

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "curate/core.hpp"

namespace curate::kernels {

using Position = std::uint32_t;

/// Bin of `v` among ascending `edges` (B+1 values, B bins): the b with
/// edges[b] <= v < edges[b+1], except that v == edges[B] falls into bin B-1.
/// Returns -1 outside [edges[0], edges[B]]. Repeated edges yield empty bins.
int locate(std::span<const double> edges, double v) noexcept;

/// Row-major (y, x) integer histogram. `weight_sum` is empty unless weights
/// were supplied.
struct Binned {
  std::size_t bins_x = 0;
  std::size_t bins_y = 0;
  std::vector<std::int64_t> count;
  std::vector<std::int64_t> weight_sum;
};

/// Inputs to a 2D binning pass. `keep` (optional) masks records out;
/// `weights` (optional) are summed per cell alongside the counts.
struct BinInput {
  std::span<const double> x;
  std::span<const double> y;
  std::span<const double> x_edges;
  std::span<const double> y_edges;
  std::span<const std::int64_t> weights = {};
  std::span<const std::uint8_t> keep = {};
};

namespace serial {
std::vector<Position> filter_box(std::span<const double> sim,
                                 std::span<const double> loss,
                                 const Bounds2D& box);
std::size_t count_box(std::span<const double> sim,
                      std::span<const double> loss, const Bounds2D& box);
std::vector<std::int8_t> assign_cells(std::span<const double> sim,
                                      std::span<const double> loss,
                                      std::span<const double> col_edges,
                                      std::span<const double> row_edges);
Binned bin2d(const BinInput& in);
}  // namespace serial

namespace parallel {
std::vector<Position> filter_box(std::span<const double> sim,
                                 std::span<const double> loss,
                                 const Bounds2D& box);
std::size_t count_box(std::span<const double> sim,
                      std::span<const double> loss, const Bounds2D& box);
std::vector<std::int8_t> assign_cells(std::span<const double> sim,
                                      std::span<const double> loss,
                                      std::span<const double> col_edges,
                                      std::span<const double> row_edges);
Binned bin2d(const BinInput& in);
}  // namespace parallel

/// True when the parallel versions were compiled with OpenMP.
bool parallel_enabled() noexcept;

/// Positions (ascending) whose (sim, loss) lies inside the closed box.
std::vector<Position> filter_box(std::span<const double> sim,
                                 std::span<const double> loss,
                                 const Bounds2D& box);
std::size_t count_box(std::span<const double> sim,
                      std::span<const double> loss, const Bounds2D& box);
/// Cell id row * C + col per record, or -1 when outside the edges.
std::vector<std::int8_t> assign_cells(std::span<const double> sim,
                                      std::span<const double> loss,
                                      std::span<const double> col_edges,
                                      std::span<const double> row_edges);
Binned bin2d(const BinInput& in);

}  // namespace curate::kernels
