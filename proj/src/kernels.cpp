#include "curate/kernels.hpp"

#include <algorithm>
#include <cassert>

#ifdef CURATE_HAVE_OPENMP
#include <omp.h>
#endif

namespace curate::kernels {
namespace {

constexpr std::size_t kParallelThreshold = 1 << 14;

std::int8_t cell_of(double s, double l, std::span<const double> col_edges,
                    std::span<const double> row_edges) {
  const int c = locate(col_edges, s);
  const int r = locate(row_edges, l);
  if (c < 0 || r < 0) return -1;
  return static_cast<std::int8_t>(r * static_cast<int>(col_edges.size() - 1) + c);
}

Binned empty_binned(const BinInput& in) {
  Binned out;
  out.bins_x = in.x_edges.size() - 1;
  out.bins_y = in.y_edges.size() - 1;
  out.count.assign(out.bins_x * out.bins_y, 0);
  if (!in.weights.empty()) out.weight_sum.assign(out.count.size(), 0);
  return out;
}

// Accumulates records [begin, end) into `out`.
void bin_range(const BinInput& in, std::size_t begin, std::size_t end,
               Binned& out) {
  for (std::size_t i = begin; i < end; ++i) {
    if (!in.keep.empty() && !in.keep[i]) continue;
    const int bx = locate(in.x_edges, in.x[i]);
    const int by = locate(in.y_edges, in.y[i]);
    if (bx < 0 || by < 0) continue;
    const std::size_t cell = static_cast<std::size_t>(by) * out.bins_x +
                             static_cast<std::size_t>(bx);
    ++out.count[cell];
    if (!in.weights.empty()) out.weight_sum[cell] += in.weights[i];
  }
}

}  // namespace

int locate(std::span<const double> edges, double v) noexcept {
  if (edges.size() < 2 || !(v >= edges.front()) || !(v <= edges.back())) {
    return -1;
  }
  const int bins = static_cast<int>(edges.size()) - 1;
  auto it = std::upper_bound(edges.begin(), edges.end(), v);
  const int b = static_cast<int>(it - edges.begin()) - 1;
  return std::min(b, bins - 1);
}

namespace serial {

std::vector<Position> filter_box(std::span<const double> sim,
                                 std::span<const double> loss,
                                 const Bounds2D& box) {
  std::vector<Position> out;
  for (std::size_t i = 0; i < sim.size(); ++i) {
    if (box.contains(sim[i], loss[i])) out.push_back(static_cast<Position>(i));
  }
  return out;
}

std::size_t count_box(std::span<const double> sim,
                      std::span<const double> loss, const Bounds2D& box) {
  std::size_t n = 0;
  for (std::size_t i = 0; i < sim.size(); ++i) {
    n += box.contains(sim[i], loss[i]) ? 1 : 0;
  }
  return n;
}

std::vector<std::int8_t> assign_cells(std::span<const double> sim,
                                      std::span<const double> loss,
                                      std::span<const double> col_edges,
                                      std::span<const double> row_edges) {
  std::vector<std::int8_t> out(sim.size());
  for (std::size_t i = 0; i < sim.size(); ++i) {
    out[i] = cell_of(sim[i], loss[i], col_edges, row_edges);
  }
  return out;
}

Binned bin2d(const BinInput& in) {
  Binned out = empty_binned(in);
  bin_range(in, 0, in.x.size(), out);
  return out;
}

}  // namespace serial

namespace parallel {

#ifdef CURATE_HAVE_OPENMP

std::vector<Position> filter_box(std::span<const double> sim,
                                 std::span<const double> loss,
                                 const Bounds2D& box) {
  const auto n = static_cast<std::int64_t>(sim.size());
  std::vector<std::vector<Position>> parts(
      static_cast<std::size_t>(omp_get_max_threads()));
#pragma omp parallel
  {
    auto& local = parts[static_cast<std::size_t>(omp_get_thread_num())];
    // schedule(static) hands each thread one contiguous ascending block, so
    // concatenating in thread order keeps positions ascending.
#pragma omp for schedule(static)
    for (std::int64_t i = 0; i < n; ++i) {
      if (box.contains(sim[i], loss[i])) local.push_back(static_cast<Position>(i));
    }
  }
  std::vector<Position> out;
  std::size_t total = 0;
  for (const auto& p : parts) total += p.size();
  out.reserve(total);
  for (const auto& p : parts) out.insert(out.end(), p.begin(), p.end());
  return out;
}

std::size_t count_box(std::span<const double> sim,
                      std::span<const double> loss, const Bounds2D& box) {
  const auto n = static_cast<std::int64_t>(sim.size());
  std::int64_t total = 0;
#pragma omp parallel for schedule(static) reduction(+ : total)
  for (std::int64_t i = 0; i < n; ++i) {
    total += box.contains(sim[i], loss[i]) ? 1 : 0;
  }
  return static_cast<std::size_t>(total);
}

std::vector<std::int8_t> assign_cells(std::span<const double> sim,
                                      std::span<const double> loss,
                                      std::span<const double> col_edges,
                                      std::span<const double> row_edges) {
  const auto n = static_cast<std::int64_t>(sim.size());
  std::vector<std::int8_t> out(sim.size());
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < n; ++i) {
    out[i] = cell_of(sim[i], loss[i], col_edges, row_edges);
  }
  return out;
}

Binned bin2d(const BinInput& in) {
  const std::size_t n = in.x.size();
  const auto threads = static_cast<std::size_t>(omp_get_max_threads());
  std::vector<Binned> locals(threads, empty_binned(in));
#pragma omp parallel
  {
    const auto t = static_cast<std::size_t>(omp_get_thread_num());
    const auto nt = static_cast<std::size_t>(omp_get_num_threads());
    const std::size_t chunk = (n + nt - 1) / nt;
    const std::size_t begin = std::min(n, t * chunk);
    const std::size_t end = std::min(n, begin + chunk);
    bin_range(in, begin, end, locals[t]);
  }
  Binned out = empty_binned(in);
  for (const auto& local : locals) {
    for (std::size_t c = 0; c < out.count.size(); ++c) {
      out.count[c] += local.count[c];
      if (!out.weight_sum.empty()) out.weight_sum[c] += local.weight_sum[c];
    }
  }
  return out;
}

#else

std::vector<Position> filter_box(std::span<const double> sim,
                                 std::span<const double> loss,
                                 const Bounds2D& box) {
  return serial::filter_box(sim, loss, box);
}
std::size_t count_box(std::span<const double> sim,
                      std::span<const double> loss, const Bounds2D& box) {
  return serial::count_box(sim, loss, box);
}
std::vector<std::int8_t> assign_cells(std::span<const double> sim,
                                      std::span<const double> loss,
                                      std::span<const double> col_edges,
                                      std::span<const double> row_edges) {
  return serial::assign_cells(sim, loss, col_edges, row_edges);
}
Binned bin2d(const BinInput& in) { return serial::bin2d(in); }

#endif

}  // namespace parallel

bool parallel_enabled() noexcept {
#ifdef CURATE_HAVE_OPENMP
  return true;
#else
  return false;
#endif
}

std::vector<Position> filter_box(std::span<const double> sim,
                                 std::span<const double> loss,
                                 const Bounds2D& box) {
  assert(sim.size() == loss.size());
  return sim.size() >= kParallelThreshold ? parallel::filter_box(sim, loss, box)
                                          : serial::filter_box(sim, loss, box);
}

std::size_t count_box(std::span<const double> sim,
                      std::span<const double> loss, const Bounds2D& box) {
  assert(sim.size() == loss.size());
  return sim.size() >= kParallelThreshold ? parallel::count_box(sim, loss, box)
                                          : serial::count_box(sim, loss, box);
}

std::vector<std::int8_t> assign_cells(std::span<const double> sim,
                                      std::span<const double> loss,
                                      std::span<const double> col_edges,
                                      std::span<const double> row_edges) {
  return sim.size() >= kParallelThreshold
             ? parallel::assign_cells(sim, loss, col_edges, row_edges)
             : serial::assign_cells(sim, loss, col_edges, row_edges);
}

Binned bin2d(const BinInput& in) {
  return in.x.size() >= kParallelThreshold ? parallel::bin2d(in)
                                           : serial::bin2d(in);
}

}  // namespace curate::kernels
