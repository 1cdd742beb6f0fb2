#include "curate/analysis.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>

#include <json.hpp>

#include "curate/kernels.hpp"

namespace curate {
namespace {

Grid2D grid_frame(const QualityIndex& index, Bins bins, GridMetric metric) {
  if (bins.x < 1 || bins.y < 1) throw std::invalid_argument("grid bins must be >= 1");
  Grid2D g;
  g.x_edges = axis_edges(index, Axis::similarity, bins.x);
  g.y_edges = axis_edges(index, Axis::loss, bins.y);
  g.metric = metric;
  return g;
}

std::vector<double> centers(const std::vector<double>& edges) {
  std::vector<double> c(edges.size() - 1);
  for (std::size_t i = 0; i + 1 < edges.size(); ++i) c[i] = 0.5 * (edges[i] + edges[i + 1]);
  return c;
}

std::string fixed(double v, int digits = 2) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

std::span<const double> numeric_column(const QualityIndex& index, Column c,
                                       std::vector<double>& scratch) {
  switch (c) {
    case Column::loss: return index.losses();
    case Column::clip_score: return index.clip_scores();
    case Column::token_length: break;
  }
  scratch.assign(index.token_lengths().begin(), index.token_lengths().end());
  return scratch;
}

constexpr const char* kTaskColors[] = {"#d62728", "#1f77b4", "#2ca02c", "#ff7f0e",
                                       "#7f7f7f"};

std::string gradient(double t) {
  // blue (short) -> red (long)
  t = std::clamp(t, 0.0, 1.0);
  const int r = static_cast<int>(std::lround(30 + 200 * t));
  const int b = static_cast<int>(std::lround(230 - 200 * t));
  char buf[16];
  std::snprintf(buf, sizeof buf, "#%02x%02x%02x", r, 60, b);
  return buf;
}

struct Frame {
  double s_lo, s_hi, l_lo, l_hi;
  static constexpr double kWidth = 800, kHeight = 600;
  static constexpr double kLeft = 70, kRight = 170, kTop = 30, kBottom = 60;

  double x(double s) const {
    return kLeft + (s - s_lo) / (s_hi - s_lo) * (kWidth - kLeft - kRight);
  }
  double y(double l) const {
    return kHeight - kBottom - (l - l_lo) / (l_hi - l_lo) * (kHeight - kTop - kBottom);
  }
};

std::pair<double, double> padded(double lo, double hi) {
  if (lo == hi) return {lo - 0.5, hi + 0.5};
  const double pad = 0.02 * (hi - lo);
  return {lo - pad, hi + pad};
}

void line(std::ostringstream& os, const Frame& f, double s0, double l0, double s1,
          double l1, const char* what) {
  os << "<line class=\"overlay\" data-kind=\"" << what << "\" x1=\"" << fixed(f.x(s0))
     << "\" y1=\"" << fixed(f.y(l0)) << "\" x2=\"" << fixed(f.x(s1)) << "\" y2=\""
     << fixed(f.y(l1)) << "\"/>\n";
}

}  // namespace

AxisSummary summarize(const QualityIndex& index, Axis axis) {
  const auto v = index.axis(axis);
  AxisSummary s;
  s.min = quantile(index, axis, 0.0);
  s.max = quantile(index, axis, 1.0);
  long double sum = 0;
  for (double x : v) sum += x;
  const long double mean = sum / static_cast<long double>(v.size());
  long double ss = 0;
  for (double x : v) ss += (x - mean) * (x - mean);
  s.mean = static_cast<double>(mean);
  s.std = static_cast<double>(std::sqrt(ss / static_cast<long double>(v.size())));
  for (int p : kSummaryPercentiles) s.percentiles[p] = quantile(index, axis, p / 100.0);
  return s;
}

AxisStats axis_stats(const QualityIndex& index) {
  return {index.size(), summarize(index, Axis::similarity), summarize(index, Axis::loss)};
}

std::string render_stats_json(const AxisStats& stats) {
  nlohmann::ordered_json j;
  j["n"] = stats.n;
  for (auto [name, s] : {std::pair{"clip_score", &stats.similarity},
                         std::pair{"loss", &stats.loss}}) {
    nlohmann::ordered_json a;
    a["min"] = s->min;
    a["max"] = s->max;
    a["mean"] = s->mean;
    a["std"] = s->std;
    for (const auto& [p, v] : s->percentiles) a["p" + std::to_string(p)] = v;
    j[name] = std::move(a);
  }
  return j.dump(2) + "\n";
}

std::string_view to_string(GridMetric m) {
  switch (m) {
    case GridMetric::count: return "count";
    case GridMetric::density: return "density";
    case GridMetric::mean_token_length: return "mean_token_length";
  }
  return "";
}

std::vector<double> Grid2D::x_centers() const { return centers(x_edges); }
std::vector<double> Grid2D::y_centers() const { return centers(y_edges); }

std::vector<double> axis_edges(const QualityIndex& index, Axis axis, std::size_t bins) {
  double lo = quantile(index, axis, 0.0);
  double hi = quantile(index, axis, 1.0);
  if (lo == hi) {
    lo -= 0.5;
    hi += 0.5;
  }
  std::vector<double> edges(bins + 1);
  for (std::size_t i = 0; i < bins; ++i) {
    edges[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(bins);
  }
  edges[bins] = hi;
  return edges;
}

Grid2D density_grid(const QualityIndex& index, std::optional<std::string_view> task_type,
                    Bins bins) {
  Grid2D g = grid_frame(index, bins, GridMetric::count);
  std::vector<std::uint8_t> keep;
  if (task_type) {
    auto t = parse_task_type(*task_type);
    if (!t) throw std::invalid_argument("unknown task type \"" + std::string(*task_type) + '"');
    keep.resize(index.size());
    for (std::size_t i = 0; i < index.size(); ++i) keep[i] = index.task_types()[i] == *t;
  }
  const auto binned = kernels::bin2d(
      {index.clip_scores(), index.losses(), g.x_edges, g.y_edges, {}, keep});
  g.values.assign(binned.count.begin(), binned.count.end());
  return g;
}

Grid2D to_density(const Grid2D& counts) {
  Grid2D g = counts;
  g.metric = GridMetric::density;
  double total = 0;
  for (const auto& v : counts.values) total += v.value_or(0.0);
  if (total == 0) return g;
  for (std::size_t r = 0; r < g.bins_y(); ++r) {
    for (std::size_t c = 0; c < g.bins_x(); ++c) {
      const double area = (g.x_edges[c + 1] - g.x_edges[c]) * (g.y_edges[r + 1] - g.y_edges[r]);
      auto& v = g.values[r * g.bins_x() + c];
      if (v) *v = *v / (total * area);
    }
  }
  return g;
}

Grid2D token_length_grid(const QualityIndex& index, Bins bins) {
  Grid2D g = grid_frame(index, bins, GridMetric::mean_token_length);
  const auto binned = kernels::bin2d({index.clip_scores(), index.losses(), g.x_edges,
                                      g.y_edges, index.token_lengths(), {}});
  g.values.resize(binned.count.size());
  for (std::size_t i = 0; i < binned.count.size(); ++i) {
    if (binned.count[i] > 0) {
      g.values[i] = static_cast<double>(binned.weight_sum[i]) / static_cast<double>(binned.count[i]);
    }
  }
  return g;
}

std::array<double, 2> grid_centroid(const Grid2D& grid) {
  const auto xc = grid.x_centers();
  const auto yc = grid.y_centers();
  double mass = 0, sx = 0, sy = 0;
  for (std::size_t r = 0; r < grid.bins_y(); ++r) {
    for (std::size_t c = 0; c < grid.bins_x(); ++c) {
      const double w = grid.at(r, c).value_or(0.0);
      mass += w;
      sx += w * xc[c];
      sy += w * yc[r];
    }
  }
  if (mass == 0) throw DataError("centroid of an empty grid");
  return {sx / mass, sy / mass};
}

std::optional<Column> parse_column(std::string_view s) {
  if (s == "loss") return Column::loss;
  if (s == "clip_score") return Column::clip_score;
  if (s == "token_length") return Column::token_length;
  return std::nullopt;
}

double correlation(const QualityIndex& index, Column a, Column b) {
  if (index.size() < 2) throw DataError("correlation needs at least 2 records");
  std::vector<double> sa, sb;
  const auto x = numeric_column(index, a, sa);
  const auto y = numeric_column(index, b, sb);
  const auto n = static_cast<long double>(x.size());
  long double mx = 0, my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  long double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const long double dx = x[i] - mx, dy = y[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0 || syy == 0) throw DataError("correlation of a constant column");
  const double r = static_cast<double>(sxy / std::sqrt(sxx * syy));
  return std::clamp(r, -1.0, 1.0);
}

std::optional<ColorBy> parse_color_by(std::string_view s) {
  if (s == "task_type") return ColorBy::task_type;
  if (s == "token_length") return ColorBy::token_length;
  if (s == "none") return ColorBy::none;
  return std::nullopt;
}

std::string render_scatter_svg(const QualityIndex& index, ColorBy color_by,
                               const Overlays& overlays) {
  const auto sim = index.clip_scores();
  const auto loss = index.losses();
  const auto [s_lo, s_hi] = padded(quantile(index, Axis::similarity, 0.0),
                                   quantile(index, Axis::similarity, 1.0));
  const auto [l_lo, l_hi] = padded(quantile(index, Axis::loss, 0.0),
                                   quantile(index, Axis::loss, 1.0));
  const Frame f{s_lo, s_hi, l_lo, l_hi};

  std::int64_t t_min = 0, t_max = 0;
  if (color_by == ColorBy::token_length) {
    const auto [lo, hi] = std::minmax_element(index.token_lengths().begin(),
                                              index.token_lengths().end());
    t_min = *lo;
    t_max = *hi;
  }

  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << Frame::kWidth
     << "\" height=\"" << Frame::kHeight << "\" viewBox=\"0 0 " << Frame::kWidth << ' '
     << Frame::kHeight << "\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  const double x0 = f.x(s_lo), x1 = f.x(s_hi), y0 = f.y(l_lo), y1 = f.y(l_hi);
  os << "<g class=\"axes\" stroke=\"black\">\n"
     << "<path d=\"M" << fixed(x0) << ' ' << fixed(y1) << " V" << fixed(y0) << " H"
     << fixed(x1) << "\" fill=\"none\"/>\n"
     << "</g>\n";
  os << "<text class=\"axis-label\" x=\"" << fixed((x0 + x1) / 2) << "\" y=\""
     << fixed(Frame::kHeight - 20) << "\" text-anchor=\"middle\">clip score</text>\n";
  os << "<text class=\"axis-label\" x=\"20\" y=\"" << fixed((y0 + y1) / 2)
     << "\" text-anchor=\"middle\" transform=\"rotate(-90 20 " << fixed((y0 + y1) / 2)
     << ")\">loss</text>\n";
  for (double s : {s_lo, s_hi}) {
    os << "<text class=\"tick\" x=\"" << fixed(f.x(s)) << "\" y=\"" << fixed(y0 + 16)
       << "\" text-anchor=\"middle\">" << fixed(s, 3) << "</text>\n";
  }
  for (double l : {l_lo, l_hi}) {
    os << "<text class=\"tick\" x=\"" << fixed(x0 - 6) << "\" y=\"" << fixed(f.y(l))
       << "\" text-anchor=\"end\">" << fixed(l, 3) << "</text>\n";
  }

  os << "<g class=\"points\" stroke=\"none\">\n";
  for (std::size_t i = 0; i < index.size(); ++i) {
    std::string color = "#1f77b4";
    if (color_by == ColorBy::task_type) {
      color = kTaskColors[static_cast<int>(index.task_types()[i])];
    } else if (color_by == ColorBy::token_length) {
      const double span = static_cast<double>(t_max - t_min);
      color = gradient(span > 0 ? static_cast<double>(index.token_lengths()[i] - t_min) / span : 0.0);
    }
    os << "<circle class=\"pt\" cx=\"" << fixed(f.x(sim[i])) << "\" cy=\""
       << fixed(f.y(loss[i])) << "\" r=\"1.5\" fill=\"" << color << "\"/>\n";
  }
  os << "</g>\n";

  os << "<g class=\"overlays\" stroke=\"black\" stroke-width=\"1.5\">\n";
  if (overlays.bounds) {
    const auto& b = *overlays.bounds;
    for (double s : {b.similarity.lower(), b.similarity.upper()}) {
      if (std::isfinite(s)) line(os, f, s, l_lo, s, l_hi, "bounds");
    }
    for (double l : {b.loss.lower(), b.loss.upper()}) {
      if (std::isfinite(l)) line(os, f, s_lo, l, s_hi, l, "bounds");
    }
  }
  if (overlays.regions) {
    const auto& g = *overlays.regions;
    for (int i = 1; i <= 2; ++i) line(os, f, g.col_edges[i], l_lo, g.col_edges[i], l_hi, "region");
    for (int i = 1; i <= 2; ++i) line(os, f, s_lo, g.row_edges[i], s_hi, g.row_edges[i], "region");
  }
  for (const auto& [s, l] : overlays.thresholds) {
    line(os, f, s, l, s, l_hi, "curriculum");
    line(os, f, s, l, s_hi, l, "curriculum");
  }
  os << "</g>\n";

  if (color_by != ColorBy::none) {
    const double lx = Frame::kWidth - Frame::kRight + 20;
    os << "<g class=\"legend\">\n";
    if (color_by == ColorBy::task_type) {
      std::array<bool, std::size(kAllTaskTypes)> present{};
      for (TaskType t : index.task_types()) present[static_cast<int>(t)] = true;
      double ly = Frame::kTop + 10;
      for (TaskType t : kAllTaskTypes) {
        if (!present[static_cast<int>(t)]) continue;
        os << "<circle cx=\"" << fixed(lx) << "\" cy=\"" << fixed(ly) << "\" r=\"4\" fill=\""
           << kTaskColors[static_cast<int>(t)] << "\"/><text x=\"" << fixed(lx + 10)
           << "\" y=\"" << fixed(ly + 4) << "\">" << to_string(t) << "</text>\n";
        ly += 18;
      }
    } else {
      os << "<text x=\"" << fixed(lx) << "\" y=\"" << fixed(Frame::kTop + 10)
         << "\">token length</text>\n";
      for (int i = 0; i <= 1; ++i) {
        const double ly = Frame::kTop + 28 + 18 * i;
        os << "<circle cx=\"" << fixed(lx) << "\" cy=\"" << fixed(ly) << "\" r=\"4\" fill=\""
           << gradient(i) << "\"/><text x=\"" << fixed(lx + 10) << "\" y=\"" << fixed(ly + 4)
           << "\">" << (i ? t_max : t_min) << "</text>\n";
      }
    }
    os << "</g>\n";
  }
  os << "</svg>\n";
  return os.str();
}

void render_scatter(const QualityIndex& index, ColorBy color_by, const Overlays& overlays,
                    const fs::path& out) {
  AtomicFile file(out);
  file.stream() << render_scatter_svg(index, color_by, overlays);
  file.commit();
}

std::string render_grid_csv(const Grid2D& grid) {
  auto cell = [&](const std::optional<double>& v) -> std::string {
    if (!v) return "";
    if (grid.metric == GridMetric::count) return std::to_string(std::llround(*v));
    return format_real(*v);
  };
  std::string out;
  for (double c : grid.x_centers()) out += "," + format_real(c);
  out += '\n';
  const auto yc = grid.y_centers();
  for (std::size_t r = 0; r < grid.bins_y(); ++r) {
    out += format_real(yc[r]);
    for (std::size_t c = 0; c < grid.bins_x(); ++c) out += "," + cell(grid.at(r, c));
    out += '\n';
  }
  return out;
}

void export_grid_csv(const Grid2D& grid, const fs::path& out) {
  AtomicFile file(out);
  file.stream() << render_grid_csv(grid);
  file.commit();
}

GridCsv parse_grid_csv(std::string_view text) {
  auto split = [](std::string_view line) {
    std::vector<std::string_view> fields;
    std::size_t start = 0;
    while (true) {
      const auto comma = line.find(',', start);
      fields.push_back(line.substr(start, comma - start));
      if (comma == std::string_view::npos) break;
      start = comma + 1;
    }
    return fields;
  };
  GridCsv g;
  bool header = true;
  std::size_t start = 0;
  while (start < text.size()) {
    auto end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    const auto fields = split(text.substr(start, end - start));
    start = end + 1;
    if (header) {
      for (std::size_t i = 1; i < fields.size(); ++i) g.x_centers.push_back(parse_real(fields[i]));
      header = false;
      continue;
    }
    if (fields.size() != g.x_centers.size() + 1) {
      throw DataError("grid CSV row " + std::to_string(g.y_centers.size() + 2) +
                      " has the wrong number of fields");
    }
    g.y_centers.push_back(parse_real(fields[0]));
    for (std::size_t i = 1; i < fields.size(); ++i) {
      if (fields[i].empty()) {
        g.values.emplace_back();
      } else {
        g.values.emplace_back(parse_real(fields[i]));
      }
    }
  }
  return g;
}

}  // namespace curate
