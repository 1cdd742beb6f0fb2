// Acceptance suite. Runs every end-to-end criterion against the full-size
// mock corpus and prints one PASS/FAIL line per criterion.
//
//   acceptance <fixture-dir>
//
// The fixture dir must hold dataset.jsonl and scores.jsonl as written by
// mockgen. Exit status is 0 only when every criterion passes.

#include <sys/resource.h>

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <functional>
#include <iostream>
#include <random>
#include <set>
#include <sstream>

#include <json.hpp>

#include "curate/analysis.hpp"
#include "curate/cli.hpp"
#include "curate/curriculum.hpp"
#include "curate/ingest.hpp"
#include "curate/selection.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

using namespace curate;
namespace fs = std::filesystem;
using curate::testing::slurp;
using IdSet = std::set<std::string>;

namespace {

constexpr std::size_t kCorpusSize = 157712;

struct Outcome {
  bool pass = true;
  std::string detail;
};

// Collects failure messages; the first few end up in the detail column.
class Checker {
 public:
  void expect(bool ok, const std::string& what) {
    if (!ok) {
      ++failures_;
      if (failures_ <= 3) messages_ += (messages_.empty() ? "" : "; ") + what;
    }
  }
  Outcome done(std::string detail) const {
    if (failures_ == 0) return {true, std::move(detail)};
    return {false, messages_ + (failures_ > 3 ? " (+" + std::to_string(failures_ - 3) + " more)" : "")};
  }

 private:
  std::size_t failures_ = 0;
  std::string messages_;
};

struct Env {
  fs::path fixture;
  fs::path work;
  std::string scores() const { return (fixture / "scores.jsonl").string(); }
  std::string dataset() const { return (fixture / "dataset.jsonl").string(); }
};

// Runs the CLI in-process with its stderr chatter discarded.
int curate_cli(std::vector<std::string> args) {
  args.insert(args.begin(), "curate");
  std::ostringstream sink;
  auto* old = std::cerr.rdbuf(sink.rdbuf());
  const int rc = cli::run(args);
  std::cerr.rdbuf(old);
  if (rc != 0) std::cout << "  curate exited " << rc << ": " << sink.str();
  return rc;
}

IdSet as_set(const SubsetManifest& m) { return {m.ids().begin(), m.ids().end()}; }

double peak_rss_mb() {
  rusage u{};
  getrusage(RUSAGE_SELF, &u);
  return static_cast<double>(u.ru_maxrss) / 1024.0;  // Linux reports KiB
}

// ---------------------------------------------------------------------------

Outcome scale(const Env& env) {
  Checker check;
  QualityIndex index = load_index(env.scores(), fs::path(env.dataset()));
  check.expect(index.size() == kCorpusSize, "joined " + std::to_string(index.size()) + " records");
  const auto m = select_diq(index, {percentile_bounds(index, Axis::similarity, 0.25, 0.75),
                                    percentile_bounds(index, Axis::loss, 0.25, 0.75)});
  check.expect(m.size() > 0, "empty DIQ selection");
  const double rss = peak_rss_mb();
  check.expect(rss < 1024.0, "peak RSS " + std::to_string(rss) + " MiB");
  char buf[96];
  std::snprintf(buf, sizeof buf, "n=%zu diq=%zu peak_rss=%.0fMiB", index.size(), m.size(), rss);
  return check.done(buf);
}

Outcome set_oracle(const Env&) {
  Checker check;
  std::mt19937_64 rng(2024);
  std::size_t compared = 0;
  for (int t = 0; t < 1000; ++t) {
    const std::size_t n = 1 + rng() % 500;
    const auto scores = curate::testing::random_scores(rng, n);
    const auto index = QualityIndex::build(scores);
    // Bounds come from data values (exercising closed edges), random reals
    // or infinities.
    auto pick = [&](bool sim) {
      switch (rng() % 4) {
        case 0: {
          const auto& r = scores[rng() % n];
          return sim ? r.clip_score : r.loss;
        }
        case 1: return sim ? std::uniform_real_distribution<double>(-1.2, 1.2)(rng)
                           : std::uniform_real_distribution<double>(-1, 21)(rng);
        case 2: return -kUnbounded;
        default: return kUnbounded;
      }
    };
    auto ordered = [&](bool sim) {
      double a = pick(sim), b = pick(sim);
      if (a > b) std::swap(a, b);
      return Bounds1D(a, b);
    };
    const Bounds1D bs = ordered(true), bl = ordered(false);
    const auto dis = select_dis(index, bs);
    const auto dil = select_dil(index, bl);
    const auto diq = select_diq(index, {bs, bl});
    const std::string ctx = " (trial " + std::to_string(t) + ", n=" + std::to_string(n) + ")";
    check.expect(as_set(dis) == oracle::dis(scores, bs.lower(), bs.upper()), "DIS mismatch" + ctx);
    check.expect(as_set(dil) == oracle::dil(scores, bl.lower(), bl.upper()), "DIL mismatch" + ctx);
    check.expect(as_set(diq) == oracle::diq(scores, bs.lower(), bs.upper(), bl.lower(), bl.upper()),
                 "DIQ mismatch" + ctx);
    check.expect(dis.size() == as_set(dis).size(), "DIS duplicates" + ctx);
    compared += 3;
  }
  return check.done(std::to_string(compared) + " selections equal to brute force");
}

Outcome intersection_law(const Env&) {
  Checker check;
  std::mt19937_64 rng(77);
  int trials = 0;
  for (; trials < 500; ++trials) {
    const auto index = QualityIndex::build(curate::testing::random_scores(rng, 1 + rng() % 800));
    auto q = [&](Axis a) {
      std::uniform_real_distribution<double> u(0, 1);
      double lo = u(rng), hi = u(rng);
      if (lo > hi) std::swap(lo, hi);
      return percentile_bounds(index, a, lo, hi);
    };
    const Bounds2D b{q(Axis::similarity), q(Axis::loss)};
    const auto diq = as_set(select_diq(index, b));
    check.expect(diq == oracle::intersect(as_set(select_dis(index, b.similarity)),
                                          as_set(select_dil(index, b.loss))),
                 "trial " + std::to_string(trials));
  }
  return check.done(std::to_string(trials) + " random bound pairs");
}

Outcome nine_regions(const Env& env) {
  Checker check;
  const fs::path dir = env.work / "regions";
  check.expect(curate_cli({"regions", "--scores", env.scores(), "--sample", "7000", "--seed", "1",
                           "--out-dir", dir.string()}) == 0,
               "regions command failed");
  const auto index = load_index(env.scores());
  const auto grid = partition_regions(index, Binning::quantile);
  IdSet all;
  std::size_t total = 0, min_population = kCorpusSize;
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) {
      const std::string cell = "r" + std::to_string(r) + "c" + std::to_string(c);
      const fs::path file = dir / ("region_" + cell + ".manifest");
      if (!fs::exists(file)) {
        check.expect(false, "missing " + file.filename().string());
        continue;
      }
      const auto m = read_manifest(file);
      min_population = std::min(min_population, grid.cell(r, c).size());
      check.expect(m.size() == 7000, cell + " holds " + std::to_string(m.size()));
      const Bounds2D b = grid.cell_bounds(r, c);
      const auto members = as_set(grid.cell(r, c));
      for (const auto& id : m.ids()) {
        const auto p = index.find(id);
        check.expect(p.has_value() && b.similarity.contains(index.clip_scores()[*p]) &&
                         b.loss.contains(index.losses()[*p]) && members.contains(id),
                     cell + ": " + id + " outside its cell");
      }
      all.insert(m.ids().begin(), m.ids().end());
      total += m.size();
    }
  }
  check.expect(all.size() == total, "regions overlap");
  return check.done("9 x 7000, disjoint, smallest cell " + std::to_string(min_population));
}

Outcome top_five_percent(const Env& env) {
  Checker check;
  const std::size_t expected = static_cast<std::size_t>(std::llround(0.05 * kCorpusSize));
  check.expect(expected == 7886, "round(0.05 n) = " + std::to_string(expected));
  std::string sizes;
  for (const char* s : {"dis", "dil", "diq"}) {
    const fs::path out = env.work / (std::string("top_") + s + ".manifest");
    check.expect(curate_cli({"select", "--scores", env.scores(), "--strategy", s, "--fraction", "0.05",
                             "--out", out.string()}) == 0,
                 std::string("select ") + s + " failed");
    if (!fs::exists(out)) continue;
    const auto m = read_manifest(out);
    check.expect(m.size() == expected, std::string(s) + " holds " + std::to_string(m.size()));
    check.expect(as_set(m).size() == m.size(), std::string(s) + " has duplicates");
    sizes += std::string(sizes.empty() ? "" : " ") + s + "=" + std::to_string(m.size());
  }
  return check.done(sizes + " (" + std::to_string(expected - 7000) + " above the rounded 7000)");
}

Outcome curriculum_structure(const Env& env) {
  Checker check;
  const fs::path out = env.work / "curriculum", mdir = env.work / "curriculum_manifests";
  check.expect(curate_cli({"curriculum", "--scores", env.scores(), "--dataset", env.dataset(), "--phases", "3",
                           "--per-phase", "2400", "--seed", "1", "--out-dir", out.string(), "--manifest-dir",
                           mdir.string()}) == 0,
               "curriculum command failed");
  const auto index = load_index(env.scores());
  CurriculumOptions opts;
  opts.phases = 3;
  opts.per_phase = 2400;
  opts.seed = 1;
  const auto plan = plan_curriculum(index, opts);

  const auto schedule = nlohmann::json::parse(slurp(out / "schedule.json"));
  IdSet seen;
  std::vector<IdSet> regions;
  double prev_min_s = -kUnbounded, prev_min_l = -kUnbounded;
  std::string minima;
  for (int k = 0; k < 3; ++k) {
    const auto& ph = schedule["phases"][k];
    const double sp = ph["S_p"].get<double>(), lp = ph["L_p"].get<double>();
    check.expect(sp == plan.phases[k].s_threshold && lp == plan.phases[k].l_threshold,
                 "schedule thresholds differ from the plan at phase " + std::to_string(k));
    const auto m = read_manifest(mdir / ("phase_" + std::to_string(k) + ".manifest"));
    check.expect(m.size() == 2400, "phase " + std::to_string(k) + " holds " + std::to_string(m.size()));
    double min_s = kUnbounded, min_l = kUnbounded;
    for (const auto& id : m.ids()) {
      check.expect(seen.insert(id).second, "phase " + std::to_string(k) + " repeats " + id);
      const auto p = index.find(id);
      if (!p) {
        check.expect(false, "unknown id " + id);
        continue;
      }
      const double s = index.clip_scores()[*p], l = index.losses()[*p];
      check.expect(s >= sp && l >= lp, id + " below phase " + std::to_string(k) + " thresholds");
      min_s = std::min(min_s, s);
      min_l = std::min(min_l, l);
    }
    check.expect(min_s >= prev_min_s && min_l >= prev_min_l,
                 "minima decrease at phase " + std::to_string(k));
    prev_min_s = min_s;
    prev_min_l = min_l;
    char buf[64];
    std::snprintf(buf, sizeof buf, " [%.3f,%.1f]", min_s, min_l);
    minima += buf;
    regions.push_back(as_set(phase_region(index, plan, k)));

    // The emitted training file carries the same ids in the same order.
    DatasetReader phase_file(out / ph["file"].get<std::string>());
    std::size_t i = 0;
    while (auto rec = phase_file.next()) {
      check.expect(i < m.size() && rec->id.str() == m.ids()[i], "phase file order differs");
      ++i;
    }
    check.expect(i == m.size(), "phase file length differs");
  }
  for (int k = 1; k < 3; ++k) {
    check.expect(std::includes(regions[k - 1].begin(), regions[k - 1].end(), regions[k].begin(), regions[k].end()),
                 "C_" + std::to_string(k) + " not inside C_" + std::to_string(k - 1));
  }
  return check.done("3 x 2400 disjoint, regions " + std::to_string(regions[0].size()) + " >= " +
                    std::to_string(regions[1].size()) + " >= " + std::to_string(regions[2].size()) +
                    ", minima" + minima);
}

Outcome mix_union(const Env& env) {
  Checker check;
  std::vector<std::string> args{"mix", "--out", (env.work / "mix.manifest").string()};
  IdSet brute;
  std::size_t parts = 0;
  for (const char* s : {"dis", "dil", "diq"}) {
    const fs::path in = env.work / (std::string("top_") + s + ".manifest");
    if (!fs::exists(in)) {
      check.expect(curate_cli({"select", "--scores", env.scores(), "--strategy", s, "--fraction", "0.05",
                               "--out", in.string()}) == 0,
                   "select failed");
    }
    args.push_back("--in");
    args.push_back(in.string());
    const auto part = read_manifest(in);
    brute.insert(part.ids().begin(), part.ids().end());
    parts += part.size();
  }
  check.expect(curate_cli(args) == 0, "mix command failed");
  const auto m = read_manifest(env.work / "mix.manifest");
  check.expect(as_set(m).size() == m.size(), "mix has duplicates");
  check.expect(as_set(m) == brute, "mix differs from brute-force union");
  check.expect(m.params().at("overlap") == std::to_string(parts - brute.size()), "overlap misreported");
  return check.done("union=" + std::to_string(m.size()) + " overlap=" + m.params().at("overlap"));
}

void run_pipeline(const Env& env, const fs::path& dir, Checker& check) {
  fs::create_directories(dir);
  const std::string joined = (dir / "joined.jsonl").string();
  auto ok = [&](std::vector<std::string> args) {
    const std::string what = args.front();
    check.expect(curate_cli(std::move(args)) == 0, what + " failed in " + dir.filename().string());
  };
  ok({"join", "--scores", env.scores(), "--dataset", env.dataset(), "--out", joined});
  for (const char* s : {"dis", "dil", "diq"}) {
    ok({"select", "--scores", joined, "--strategy", s, "--fraction", "0.05", "--seed", "11", "--out",
        (dir / (std::string(s) + ".manifest")).string()});
  }
  ok({"select", "--scores", joined, "--strategy", "diq", "--s-pct", "0.2:0.8", "--l-pct", "0.2:0.8", "--out",
      (dir / "diq_pct.manifest").string()});
  ok({"regions", "--scores", joined, "--sample", "500", "--seed", "11", "--out-dir", (dir / "regions").string()});
  ok({"mix", "--in", (dir / "dis.manifest").string(), "--in", (dir / "dil.manifest").string(), "--in",
      (dir / "diq.manifest").string(), "--out", (dir / "mix.manifest").string()});
  ok({"curriculum", "--scores", joined, "--dataset", env.dataset(), "--per-phase", "2400", "--seed", "11",
      "--out-dir", (dir / "schedule").string(), "--manifest-dir", (dir / "schedule_manifests").string()});
  ok({"export", "--manifest", (dir / "mix.manifest").string(), "--dataset", env.dataset(), "--out",
      (dir / "mix.jsonl").string()});
  ok({"analyze", "stats", "--scores", joined, "--out", (dir / "stats.json").string()});
  ok({"analyze", "grid", "--scores", joined, "--out", (dir / "grid.csv").string()});
  ok({"analyze", "grid", "--scores", joined, "--density", "--task-type", "detail_description", "--out",
      (dir / "grid_detail.csv").string()});
  ok({"analyze", "heatmap", "--scores", joined, "--out", (dir / "heatmap.csv").string()});
  ok({"analyze", "scatter", "--scores", joined, "--overlay-regions", "quantile", "--overlay-bounds",
      "0.2:0.3:100:200", "--out", (dir / "scatter.svg").string()});
  ok({"analyze", "corr", "--scores", joined, "--out", (dir / "corr.json").string()});
}

Outcome determinism(const Env& env) {
  Checker check;
  const fs::path a = env.work / "pipeline_a", b = env.work / "pipeline_b";
  run_pipeline(env, a, check);
  run_pipeline(env, b, check);
  std::size_t files = 0, bytes = 0;
  for (const auto& entry : fs::recursive_directory_iterator(a)) {
    if (!entry.is_regular_file()) continue;
    const auto rel = fs::relative(entry.path(), a);
    const auto left = slurp(entry.path());
    check.expect(fs::exists(b / rel) && left == slurp(b / rel), rel.string() + " differs");
    ++files;
    bytes += left.size();
  }
  for (const auto& entry : fs::recursive_directory_iterator(b)) {
    if (entry.is_regular_file()) check.expect(fs::exists(a / fs::relative(entry.path(), b)), "extra file in rerun");
  }
  check.expect(files >= 20, "only " + std::to_string(files) + " outputs");
  return check.done(std::to_string(files) + " files, " + std::to_string(bytes / 1024) + " KiB byte-identical");
}

Outcome analysis_trends(const Env& env) {
  Checker check;
  const auto index = load_index(env.scores());
  const double r = correlation(index, Column::token_length, Column::loss);
  check.expect(r > 0.5, "pearson(token_length, loss) = " + format_real(r));
  const auto detail = grid_centroid(density_grid(index, "detail_description"));
  const auto referring = grid_centroid(density_grid(index, "referring_qa"));
  check.expect(detail[0] > referring[0], "detail_description centroid not right of referring_qa");
  check.expect(detail[1] > referring[1], "detail_description centroid not above referring_qa");
  char buf[160];
  std::snprintf(buf, sizeof buf, "r=%.3f detail=(%.3f,%.1f) referring=(%.3f,%.1f)", r, detail[0], detail[1],
                referring[0], referring[1]);
  return check.done(buf);
}

struct Criterion {
  int number;
  const char* name;
  double limit_s;
  std::function<Outcome(const Env&)> body;
};

}  // namespace

int main(int argc, char** argv) {
  if (argc != 2) {
    std::cerr << "usage: acceptance <fixture-dir>\n";
    return 2;
  }
  Env env;
  env.fixture = argv[1];
  if (!fs::exists(env.fixture / "scores.jsonl") || !fs::exists(env.fixture / "dataset.jsonl")) {
    std::cerr << "acceptance: fixture missing under " << env.fixture << " (run mockgen)\n";
    return 2;
  }
  curate::testing::TempDir work("acceptance");
  env.work = work.path();

  // Scale runs first so the peak RSS reading reflects join + DIQ alone.
  const std::vector<Criterion> criteria = {
      {9, "scale: join + DIQ over 157,712 records", 10, scale},
      {1, "set-definition oracle", 30, set_oracle},
      {2, "DIQ intersection law", 10, intersection_law},
      {3, "nine-region reproduction", 60, nine_regions},
      {4, "top-5% reproduction", 30, top_five_percent},
      {5, "curriculum structure", 60, curriculum_structure},
      {6, "mix reproduction", 30, mix_union},
      {7, "pipeline determinism", 300, determinism},
      {8, "analysis trends", 60, analysis_trends},
  };

  std::vector<std::pair<int, std::string>> lines;
  bool all = true;
  for (const auto& c : criteria) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.body(env);
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (secs >= c.limit_s) {
      o.pass = false;
      o.detail += "; over the " + std::to_string(static_cast<int>(c.limit_s)) + " s limit";
    }
    all = all && o.pass;
    char head[160];
    std::snprintf(head, sizeof head, "AC%d %s  %-40s %7.2fs  ", c.number, o.pass ? "PASS" : "FAIL", c.name, secs);
    lines.emplace_back(c.number, head + o.detail);
    std::cout << lines.back().second << std::endl;
  }

  std::sort(lines.begin(), lines.end());
  std::cout << "\nsummary (criterion order):\n";
  for (const auto& [n, line] : lines) std::cout << line << '\n';
  std::cout << (all ? "acceptance: all criteria passed\n" : "acceptance: FAILED\n");
  return all ? 0 : 1;
}
