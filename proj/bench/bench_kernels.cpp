// Serial vs OpenMP timings for the scan kernels.
//
//   bench_kernels [n=2000000] [reps=15]
//
// Columns are synthetic uniform draws. Each kernel runs `reps` times per
// variant; the median wall time is reported along with the speedup and a
// check that both variants returned identical output.

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <random>
#include <string>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "curate/kernels.hpp"

namespace k = curate::kernels;

namespace {

double median_ms(int reps, const std::function<void()>& fn) {
  std::vector<double> t;
  for (int i = 0; i < reps; ++i) {
    const auto t0 = std::chrono::steady_clock::now();
    fn();
    t.push_back(std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count());
  }
  std::nth_element(t.begin(), t.begin() + reps / 2, t.end());
  return t[reps / 2];
}

bool all_identical = true;

template <typename Out>
void compare(const char* name, int reps, const std::function<Out()>& serial,
             const std::function<Out()>& parallel) {
  Out a, b;
  const double ts = median_ms(reps, [&] { a = serial(); });
  const double tp = median_ms(reps, [&] { b = parallel(); });
  all_identical = all_identical && a == b;
  std::printf("%-14s serial %9.3f ms   parallel %9.3f ms   speedup %5.2fx   %s\n", name, ts, tp, ts / tp,
              a == b ? "identical" : "MISMATCH");
}

bool operator==(const k::Binned& a, const k::Binned& b) {
  return a.bins_x == b.bins_x && a.bins_y == b.bins_y && a.count == b.count && a.weight_sum == b.weight_sum;
}

}  // namespace

int main(int argc, char** argv) {
  const std::size_t n = argc > 1 ? std::strtoull(argv[1], nullptr, 10) : 2'000'000;
  const int reps = argc > 2 ? std::max(1, std::atoi(argv[2])) : 15;

  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> s(0.1, 0.42), l(20, 420);
  std::uniform_int_distribution<std::int64_t> tok(30, 400);
  std::vector<double> sim(n), loss(n);
  std::vector<std::int64_t> tokens(n);
  for (std::size_t i = 0; i < n; ++i) {
    sim[i] = s(rng);
    loss[i] = l(rng);
    tokens[i] = tok(rng);
  }

  int threads = 1;
#ifdef _OPENMP
  threads = omp_get_max_threads();
#endif
  std::printf("n=%zu reps=%d openmp=%s threads=%d\n", n, reps, k::parallel_enabled() ? "yes" : "no", threads);

  const curate::Bounds2D box{{0.2, 0.35}, {100, 300}};
  compare<std::vector<k::Position>>(
      "filter_box", reps, [&] { return k::serial::filter_box(sim, loss, box); },
      [&] { return k::parallel::filter_box(sim, loss, box); });
  compare<std::size_t>(
      "count_box", reps, [&] { return k::serial::count_box(sim, loss, box); },
      [&] { return k::parallel::count_box(sim, loss, box); });

  const std::vector<double> cols{0.1, 0.2, 0.3, 0.42}, rows{20, 150, 280, 420};
  compare<std::vector<std::int8_t>>(
      "assign_cells", reps, [&] { return k::serial::assign_cells(sim, loss, cols, rows); },
      [&] { return k::parallel::assign_cells(sim, loss, cols, rows); });

  std::vector<double> xe(51), ye(51);
  for (int i = 0; i <= 50; ++i) {
    xe[i] = 0.1 + 0.32 * i / 50.0;
    ye[i] = 20 + 400.0 * i / 50.0;
  }
  const k::BinInput in{sim, loss, xe, ye, tokens, {}};
  compare<k::Binned>(
      "bin2d 50x50", reps, [&] { return k::serial::bin2d(in); }, [&] { return k::parallel::bin2d(in); });
  return all_identical ? 0 : 1;
}
