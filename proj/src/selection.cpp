#include "curate/selection.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "curate/kernels.hpp"
#include "curate/log.hpp"
#include "curate/random.hpp"
#include "detail.hpp"

namespace curate {
namespace {

using Position = QualityIndex::Position;

// Descending by `key`, ties by ascending position (= ascending id).
template <typename Key>
void sort_descending(std::vector<Position>& pos, Key key) {
  std::sort(pos.begin(), pos.end(), [&](Position a, Position b) {
    const auto ka = key(a), kb = key(b);
    if (ka != kb) return ka > kb;
    return a < b;
  });
}

Params bounds_params(const Bounds1D& b, const char* lo, const char* hi) {
  return {{lo, format_real(b.lower())}, {hi, format_real(b.upper())}};
}

}  // namespace

std::size_t nearest_rank(std::size_t n, double q) {
  if (!(q >= 0.0 && q <= 1.0)) {
    throw std::invalid_argument("quantile q=" + format_real(q) + " outside [0, 1]");
  }
  const double x = q * static_cast<double>(n);
  const double r = std::round(x);
  // q * n lands a hair above an integer for values like q = 1/3, n = 9.
  const double pos = std::abs(x - r) <= 1e-9 * std::max(1.0, x) ? r : std::ceil(x);
  return std::clamp<std::size_t>(static_cast<std::size_t>(pos), 1, n);
}

double quantile(const QualityIndex& index, Axis axis, double q) {
  const std::size_t k = nearest_rank(index.size(), q);
  return index.axis(axis)[index.sorted_by(axis)[k - 1]];
}

Bounds1D percentile_bounds(const QualityIndex& index, Axis axis, double lo,
                           double hi) {
  if (lo > hi) {
    throw std::invalid_argument("percentile bounds: lower " + format_real(lo) +
                                " exceeds upper " + format_real(hi));
  }
  return {quantile(index, axis, lo), quantile(index, axis, hi)};
}

SubsetManifest select_dis(const QualityIndex& index, const Bounds1D& bounds) {
  auto pos = kernels::filter_box(index.clip_scores(), index.losses(),
                                 {bounds, Bounds1D::everything()});
  const auto sim = index.clip_scores();
  sort_descending(pos, [&](Position p) { return sim[p]; });
  return detail::make_manifest(detail::ids_at(index, pos), "dis",
                               bounds_params(bounds, "S_min", "S_max"), index.size());
}

SubsetManifest select_dil(const QualityIndex& index, const Bounds1D& bounds) {
  auto pos = kernels::filter_box(index.clip_scores(), index.losses(),
                                 {Bounds1D::everything(), bounds});
  const auto loss = index.losses();
  sort_descending(pos, [&](Position p) { return loss[p]; });
  return detail::make_manifest(detail::ids_at(index, pos), "dil",
                               bounds_params(bounds, "L_min", "L_max"), index.size());
}

SubsetManifest select_diq(const QualityIndex& index, const Bounds2D& bounds) {
  auto pos = kernels::filter_box(index.clip_scores(), index.losses(), bounds);
  sort_descending(pos, [&](Position p) {
    return std::uint64_t{index.rank(Axis::similarity, p)} + index.rank(Axis::loss, p);
  });
  Params params = bounds_params(bounds.similarity, "S_min", "S_max");
  params.merge(bounds_params(bounds.loss, "L_min", "L_max"));
  return detail::make_manifest(detail::ids_at(index, pos), "diq", std::move(params),
                               index.size());
}

std::string_view to_string(Strategy s) {
  switch (s) {
    case Strategy::dis: return "dis";
    case Strategy::dil: return "dil";
    case Strategy::diq: return "diq";
  }
  return "";
}

std::optional<Strategy> parse_strategy(std::string_view s) {
  for (Strategy v : {Strategy::dis, Strategy::dil, Strategy::diq}) {
    if (to_string(v) == s) return v;
  }
  return std::nullopt;
}

std::size_t top_fraction_size(std::size_t n, double fraction) {
  if (!(fraction > 0.0 && fraction <= 1.0)) {
    throw std::invalid_argument("fraction " + format_real(fraction) +
                                " outside (0, 1]");
  }
  const auto m = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(n)));
  return std::clamp<std::size_t>(m, 1, n);
}

SubsetManifest select_top_fraction(const QualityIndex& index, Strategy strategy,
                                   double fraction) {
  const std::size_t n = index.size();
  const std::size_t m = top_fraction_size(n, fraction);
  Params params{{"fraction", format_real(fraction)}};
  const std::string tag = std::string(to_string(strategy)) + ":top";

  if (strategy != Strategy::diq) {
    const Axis axis = strategy == Strategy::dis ? Axis::similarity : Axis::loss;
    const auto values = index.axis(axis);
    std::vector<Position> pos(index.sorted_by(axis).begin(), index.sorted_by(axis).end());
    sort_descending(pos, [&](Position p) { return values[p]; });
    pos.resize(m);
    params[axis == Axis::similarity ? "S_p" : "L_p"] = format_real(values[pos.back()]);
    return detail::make_manifest(detail::ids_at(index, pos), tag, std::move(params), n);
  }

  // count(k) = |{s >= sorted_s[k-1] and l >= sorted_l[k-1]}| is non-increasing
  // in k and count(1) = n >= m: find the largest k with count(k) >= m.
  const auto sim = index.clip_scores();
  const auto loss = index.losses();
  auto corner = [&](std::size_t k) {
    return Bounds2D{Bounds1D::at_least(sim[index.sorted_by_similarity()[k - 1]]),
                    Bounds1D::at_least(loss[index.sorted_by_loss()[k - 1]])};
  };
  std::size_t lo = 1, hi = n;
  while (lo < hi) {
    const std::size_t mid = lo + (hi - lo + 1) / 2;
    if (kernels::count_box(sim, loss, corner(mid)) >= m) {
      lo = mid;
    } else {
      hi = mid - 1;
    }
  }
  const Bounds2D box = corner(lo);
  auto pos = kernels::filter_box(sim, loss, box);
  params["q"] = format_real(static_cast<double>(lo) / static_cast<double>(n));
  params["S_p"] = format_real(box.similarity.lower());
  params["L_p"] = format_real(box.loss.lower());
  params["candidates"] = std::to_string(pos.size());
  sort_descending(pos, [&](Position p) {
    return std::uint64_t{index.rank(Axis::similarity, p)} + index.rank(Axis::loss, p);
  });
  pos.resize(m);
  return detail::make_manifest(detail::ids_at(index, pos), tag, std::move(params), n);
}

std::string_view to_string(Binning b) {
  return b == Binning::quantile ? "quantile" : "equal_width";
}

std::optional<Binning> parse_binning(std::string_view s) {
  if (s == "quantile") return Binning::quantile;
  if (s == "equal_width") return Binning::equal_width;
  return std::nullopt;
}

Bounds2D RegionGrid::cell_bounds(int row, int col) const {
  return {{col_edges[col], col_edges[col + 1]}, {row_edges[row], row_edges[row + 1]}};
}

RegionGrid partition_regions(const QualityIndex& index, Binning binning) {
  if (index.size() < 9) {
    throw DataError("region partition needs at least 9 records, index has " +
                    std::to_string(index.size()));
  }
  RegionGrid grid;
  grid.binning = binning;
  for (Axis axis : {Axis::similarity, Axis::loss}) {
    auto& edges = axis == Axis::similarity ? grid.col_edges : grid.row_edges;
    const double lo = quantile(index, axis, 0.0);
    const double hi = quantile(index, axis, 1.0);
    if (binning == Binning::quantile) {
      if (lo == hi) {
        throw DataError(std::string(to_string(axis)) +
                        " axis is constant; quantile binning is degenerate, use "
                        "equal_width");
      }
      edges = {lo, quantile(index, axis, 1.0 / 3.0), quantile(index, axis, 2.0 / 3.0), hi};
    } else {
      const double w = (hi - lo) / 3.0;
      edges = {lo, lo + w, lo + 2.0 * w, hi};
    }
  }

  const auto cell_of = kernels::assign_cells(index.clip_scores(), index.losses(),
                                             grid.col_edges, grid.row_edges);
  std::array<std::vector<std::string>, 9> members;
  for (std::size_t p = 0; p < cell_of.size(); ++p) {
    members[static_cast<std::size_t>(cell_of[p])].push_back(index.ids()[p]);
  }
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) {
      const Bounds2D b = grid.cell_bounds(r, c);
      Params params{{"binning", std::string(to_string(binning))},
                    {"row", std::to_string(r)},
                    {"col", std::to_string(c)},
                    {"S_min", format_real(b.similarity.lower())},
                    {"S_max", format_real(b.similarity.upper())},
                    {"L_min", format_real(b.loss.lower())},
                    {"L_max", format_real(b.loss.upper())}};
      grid.cells.push_back(detail::make_manifest(
          std::move(members[r * 3 + c]),
          "region:r" + std::to_string(r) + "c" + std::to_string(c), std::move(params),
          index.size()));
    }
  }
  return grid;
}

SubsetManifest sample_from(const SubsetManifest& manifest, std::size_t m,
                           std::uint64_t seed) {
  if (m > manifest.size()) {
    log::warn("sample of " + std::to_string(m) + " requested from '" +
              manifest.strategy() + "' holding only " +
              std::to_string(manifest.size()) + " ids; taking all");
  }
  std::vector<std::string> pool = manifest.ids();
  std::sort(pool.begin(), pool.end());
  auto picked = sample_without_replacement(pool, m, seed);
  std::sort(picked.begin(), picked.end());
  Params params = manifest.params();
  params["sample_m"] = std::to_string(m);
  params["seed"] = std::to_string(seed);
  return detail::make_manifest(std::move(picked), manifest.strategy(), std::move(params),
                               manifest.source_count());
}

SubsetManifest mix(std::span<const SubsetManifest> subsets) {
  if (subsets.empty()) throw std::invalid_argument("mix needs at least one subset");
  const std::size_t source = subsets.front().source_count();
  std::set<std::string> all;
  std::size_t total = 0;
  std::string tag = "mix(";
  Params params;
  for (std::size_t i = 0; i < subsets.size(); ++i) {
    const auto& s = subsets[i];
    if (s.source_count() != source) {
      throw DataError("mix: subset " + std::to_string(i) + " ('" + s.strategy() +
                      "') has source_count " + std::to_string(s.source_count()) +
                      ", expected " + std::to_string(source));
    }
    all.insert(s.ids().begin(), s.ids().end());
    total += s.size();
    if (i) tag += '+';
    tag += s.strategy();
    const std::string key = "part" + std::to_string(i);
    params[key + ".strategy"] = s.strategy();
    params[key + ".size"] = std::to_string(s.size());
  }
  tag += ')';
  params["overlap"] = std::to_string(total - all.size());
  return detail::make_manifest({all.begin(), all.end()}, tag, std::move(params), source);
}

}  // namespace curate
