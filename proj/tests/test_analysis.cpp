#include <doctest.h>

#include <random>

#include "curate/analysis.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

using namespace curate;
using curate::testing::score;
using curate::testing::slurp;
using curate::testing::TempDir;

namespace {
std::size_t count_of(const std::string& hay, const std::string& needle) {
  std::size_t n = 0;
  for (auto p = hay.find(needle); p != std::string::npos; p = hay.find(needle, p + 1)) ++n;
  return n;
}

QualityIndex corners() {
  return QualityIndex::build({score("a", 0, 0, 10, TaskType::referring_qa),
                              score("b", 1, 0, 20, TaskType::referring_qa),
                              score("c", 0, 1, 30, TaskType::detail_description),
                              score("d", 1, 1, 40, TaskType::detail_description)});
}
}  // namespace

TEST_CASE("axis_stats") {
  auto flat = QualityIndex::build({score("a", 5, 5), score("b", 5, 5), score("c", 5, 5)});
  const auto s = summarize(flat, Axis::similarity);
  CHECK(s.min == 5);
  CHECK(s.max == 5);
  CHECK(s.mean == 5);
  CHECK(s.std == 0);

  auto four = QualityIndex::build({score("a", 1, 1), score("b", 2, 2), score("c", 3, 3), score("d", 4, 4)});
  CHECK(summarize(four, Axis::loss).percentiles.at(50) == 2);
  CHECK(summarize(four, Axis::loss).std == doctest::Approx(std::sqrt(1.25)));

  std::mt19937_64 rng(6);
  for (int t = 0; t < 50; ++t) {
    const auto idx = QualityIndex::build(curate::testing::random_scores(rng, 1 + rng() % 100));
    const auto st = axis_stats(idx);
    CHECK(st.loss.max == quantile(idx, Axis::loss, 1.0));
    CHECK(st.similarity.percentiles.at(25) == quantile(idx, Axis::similarity, 0.25));
  }
  const auto json = render_stats_json(axis_stats(four));
  CHECK(json.find("\"p99\"") != std::string::npos);
}

TEST_CASE("density_grid") {
  const auto idx = corners();
  const auto g = density_grid(idx, std::nullopt, {2, 2});
  for (std::size_t r = 0; r < 2; ++r) {
    for (std::size_t c = 0; c < 2; ++c) CHECK(g.at(r, c) == 1.0);
  }
  const auto none = density_grid(idx, "complex_reasoning", {2, 2});
  for (const auto& v : none.values) CHECK(v == 0.0);
  CHECK_THROWS_AS(density_grid(idx, "poetry", {2, 2}), std::invalid_argument);

  // Filtered grids keep the full-index frame.
  const auto referring = density_grid(idx, "referring_qa", {2, 2});
  CHECK(referring.x_edges == g.x_edges);
  CHECK(referring.at(0, 0) == 1.0);
  CHECK(referring.at(1, 1) == 0.0);
  CHECK_THROWS_AS(density_grid(idx, std::nullopt, {0, 2}), std::invalid_argument);
}

TEST_CASE("density grids are additive over task types") {
  std::mt19937_64 rng(44);
  for (int t = 0; t < 30; ++t) {
    const auto idx = QualityIndex::build(curate::testing::random_scores(rng, 1 + rng() % 400));
    const Bins bins{1 + rng() % 12, 1 + rng() % 12};
    const auto all = density_grid(idx, std::nullopt, bins);
    std::vector<double> sum(all.values.size(), 0.0);
    for (TaskType tt : kAllTaskTypes) {
      const auto g = density_grid(idx, to_string(tt), bins);
      for (std::size_t i = 0; i < sum.size(); ++i) sum[i] += *g.values[i];
    }
    double total = 0;
    for (std::size_t i = 0; i < sum.size(); ++i) {
      CHECK(sum[i] == *all.values[i]);
      total += *all.values[i];
    }
    CHECK(total == idx.size());
    const auto tl = token_length_grid(idx, bins);
    CHECK(tl.x_edges == all.x_edges);
    CHECK(tl.y_edges == all.y_edges);
  }
}

TEST_CASE("token_length_grid") {
  const auto one = QualityIndex::build({score("a", 0.3, 2.0, 57)});
  const auto g = token_length_grid(one, {3, 3});
  std::size_t filled = 0;
  for (const auto& v : g.values) {
    if (v) {
      ++filled;
      CHECK(*v == 57);
    }
  }
  CHECK(filled == 1);

  std::mt19937_64 rng(3);
  auto scores = curate::testing::random_scores(rng, 300);
  for (auto& s : scores) s.token_length = 10;
  for (const auto& v : token_length_grid(QualityIndex::build(scores), {7, 7}).values) {
    if (v) CHECK(*v == 10);
  }
}

TEST_CASE("token-length heatmap trends upward along the loss axis") {
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> s(-1, 1), l(0.5, 30);
  std::vector<ScoreRecord> pts;
  for (int i = 0; i < 5000; ++i) {
    const double loss = l(rng);
    pts.push_back(score("t" + std::to_string(i), s(rng), loss, std::lround(10 * loss)));
  }
  const auto g = token_length_grid(QualityIndex::build(pts), {10, 10});
  double prev = -1;
  for (std::size_t r = 0; r < g.bins_y(); ++r) {
    double sum = 0;
    int n = 0;
    for (std::size_t c = 0; c < g.bins_x(); ++c) {
      if (g.at(r, c)) {
        sum += *g.at(r, c);
        ++n;
      }
    }
    REQUIRE(n > 0);
    CHECK(sum / n > prev);
    prev = sum / n;
  }
}

TEST_CASE("correlation") {
  const auto idx = QualityIndex::build({score("a", 0.1, 3, 1), score("b", 0.2, 2, 2), score("c", 0.3, 1, 3)});
  CHECK(correlation(idx, Column::loss, Column::loss) == doctest::Approx(1.0));
  CHECK(correlation(idx, Column::token_length, Column::loss) == doctest::Approx(-1.0));

  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> loss(0, 10), noise(0, 1);
  std::vector<ScoreRecord> pts;
  std::vector<double> x, y;
  for (int i = 0; i < 1000; ++i) {
    const double l = loss(rng);
    const auto t = static_cast<std::int64_t>(10 * l + noise(rng)) + 1;
    pts.push_back(score("n" + std::to_string(i), 0.5 * noise(rng), l, t));
    x.push_back(static_cast<double>(t));
    y.push_back(l);
  }
  const auto big = QualityIndex::build(pts);
  const double r = correlation(big, Column::token_length, Column::loss);
  CHECK(r > 0.95);
  CHECK(r == doctest::Approx(oracle::pearson(x, y)).epsilon(1e-9));
  CHECK(correlation(big, Column::loss, Column::token_length) == doctest::Approx(r).epsilon(1e-12));
  const double rs = correlation(big, Column::clip_score, Column::loss);
  CHECK(std::abs(rs) <= 1.0);

  const auto flat = QualityIndex::build({score("a", 0.5, 1), score("b", 0.5, 2)});
  CHECK_THROWS_AS(correlation(flat, Column::clip_score, Column::loss), DataError);
  CHECK_THROWS_AS(correlation(QualityIndex::build({score("a", 0.5, 1)}), Column::loss, Column::loss),
                  DataError);
}

TEST_CASE("render_scatter") {
  const auto idx = QualityIndex::build({score("a", 0.1, 1, 5, TaskType::referring_qa),
                                        score("b", 0.5, 3, 50, TaskType::detail_description),
                                        score("c", 0.9, 2, 20, TaskType::conversation_qa)});
  const auto svg = render_scatter_svg(idx, ColorBy::none);
  CHECK(count_of(svg, "class=\"pt\"") == 3);
  CHECK(count_of(svg, "class=\"overlay\"") == 0);
  CHECK(svg.find(">clip score<") != std::string::npos);
  CHECK(svg.find(">loss<") != std::string::npos);
  CHECK(svg.find("class=\"legend\"") == std::string::npos);

  Overlays ov;
  ov.bounds = Bounds2D{{0.2, 0.8}, {1.5, 2.5}};
  const auto with_bounds = render_scatter_svg(idx, ColorBy::task_type, ov);
  CHECK(count_of(with_bounds, "data-kind=\"bounds\"") == 4);
  CHECK(with_bounds.find("class=\"legend\"") != std::string::npos);
  CHECK(with_bounds.find(">detail_description<") != std::string::npos);
  CHECK(with_bounds.find(">complex_reasoning<") == std::string::npos);

  Overlays thresholds;
  thresholds.thresholds = {{0.1, 1.0}, {0.3, 1.5}};
  CHECK(count_of(render_scatter_svg(idx, ColorBy::token_length, thresholds), "data-kind=\"curriculum\"") == 4);

  TempDir dir("svg");
  render_scatter(idx, ColorBy::task_type, ov, dir / "a.svg");
  render_scatter(idx, ColorBy::task_type, ov, dir / "b.svg");
  CHECK(slurp(dir / "a.svg") == slurp(dir / "b.svg"));
  CHECK(slurp(dir / "a.svg") == with_bounds);
}

TEST_CASE("grid CSV") {
  const auto g = density_grid(corners(), std::nullopt, {2, 2});
  const auto csv = render_grid_csv(g);
  CHECK(count_of(csv, "\n") == 3);
  CHECK(csv.starts_with(",0.25,0.75\n"));

  const auto tl = token_length_grid(QualityIndex::build({score("a", 0, 0, 7), score("b", 1, 1, 9)}), {2, 2});
  const auto tl_csv = render_grid_csv(tl);
  CHECK(tl_csv.find("0.25,7,\n") != std::string::npos);  // null cell is an empty field

  for (const Grid2D* grid : {&g, &tl}) {
    const auto back = parse_grid_csv(render_grid_csv(*grid));
    CHECK(back.x_centers == grid->x_centers());
    CHECK(back.y_centers == grid->y_centers());
    CHECK(back.values == grid->values);
  }

  TempDir dir("csv");
  export_grid_csv(g, dir / "g.csv");
  CHECK(slurp(dir / "g.csv") == csv);
}

TEST_CASE("density normalization integrates to one") {
  std::mt19937_64 rng(2);
  const auto idx = QualityIndex::build(curate::testing::random_scores(rng, 500));
  const auto d = to_density(density_grid(idx, std::nullopt, {5, 4}));
  double integral = 0;
  for (std::size_t r = 0; r < d.bins_y(); ++r) {
    for (std::size_t c = 0; c < d.bins_x(); ++c) {
      integral += *d.at(r, c) * (d.x_edges[c + 1] - d.x_edges[c]) * (d.y_edges[r + 1] - d.y_edges[r]);
    }
  }
  CHECK(integral == doctest::Approx(1.0));
  CHECK(d.metric == GridMetric::density);
}
