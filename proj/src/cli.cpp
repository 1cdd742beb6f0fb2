#include "curate/cli.hpp"

#include <iostream>

#include <CLI11.hpp>
#include <json.hpp>

#include "curate/analysis.hpp"
#include "curate/curriculum.hpp"
#include "curate/ingest.hpp"
#include "curate/log.hpp"
#include "curate/random.hpp"
#include "curate/selection.hpp"

namespace curate::cli {
namespace {

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Inputs {
  std::string scores;
  std::string dataset;
  bool lenient = false;
};

struct Common {
  std::string log_level = "warn";
  std::uint64_t seed = 0;
};

void add_inputs(CLI::App* app, Inputs& in, bool need_scores, bool need_dataset) {
  auto* s = app->add_option("--scores", in.scores, "Score file (JSONL)")->envname("CURATE_SCORES");
  auto* d = app->add_option("--dataset", in.dataset, "Dataset file (JSONL)")->envname("CURATE_DATASET");
  if (need_scores) s->required();
  if (need_dataset) d->required();
  app->add_flag("--lenient", in.lenient, "Skip bad lines and unmatched ids instead of failing");
}

void add_seed(CLI::App* app, Common& common) {
  app->add_option("--seed", common.seed, "Seed for every randomized step")->capture_default_str();
}

QualityIndex open_index(const Inputs& in) {
  LoadOptions opts{in.lenient};
  std::optional<fs::path> dataset;
  if (!in.dataset.empty()) dataset = in.dataset;
  return load_index(in.scores, dataset, in.lenient ? JoinMode::lenient : JoinMode::strict, opts);
}

std::array<double, 2> parse_pair(const std::string& text, const char* flag) {
  const auto colon = text.find(':');
  if (colon == std::string::npos) {
    throw UsageError(std::string(flag) + " expects LO:HI, got '" + text + "'");
  }
  try {
    return {parse_real(text.substr(0, colon)), parse_real(text.substr(colon + 1))};
  } catch (const std::invalid_argument&) {
    throw UsageError(std::string(flag) + " expects LO:HI, got '" + text + "'");
  }
}

Bins parse_bins(const std::string& text) {
  try {
    const auto x = text.find('x');
    if (x == std::string::npos) {
      const auto b = std::stoul(text);
      return {b, b};
    }
    return {std::stoul(text.substr(0, x)), std::stoul(text.substr(x + 1))};
  } catch (const std::exception&) {
    throw UsageError("--bins expects N or NXxNY, got '" + text + "'");
  }
}

SubsetManifest with_seed(const SubsetManifest& m, std::uint64_t seed) {
  if (m.params().contains("seed")) return m;
  Params p = m.params();
  p["seed"] = std::to_string(seed);
  return SubsetManifest(m.ids(), m.strategy(), std::move(p), m.source_count());
}

void summary(const std::string& line) { std::cerr << "curate: " << line << '\n'; }

std::string thresholds_of(const SubsetManifest& m) {
  std::string out;
  for (const char* key : {"S_min", "S_max", "L_min", "L_max", "S_p", "L_p"}) {
    auto it = m.params().find(key);
    if (it != m.params().end()) out += std::string(" ") + key + "=" + it->second;
  }
  return out;
}

// ---- subcommands ---------------------------------------------------------

struct SelectArgs {
  std::string strategy;
  std::optional<double> s_min, s_max, l_min, l_max;
  std::string s_pct, l_pct;
  std::optional<double> fraction;
  std::string out;
};

int do_join(const Inputs& in, const std::string& out) {
  QualityIndex index = open_index(in);
  std::vector<ScoreRecord> joined;
  joined.reserve(index.size());
  for (QualityIndex::Position p = 0; p < index.size(); ++p) joined.push_back(index.record(p));
  write_scores(joined, out);
  const auto& rep = index.join_report();
  summary("join: " + std::to_string(index.size()) + " records joined, dropped " +
          std::to_string(rep.dropped_scores) + " score-only / " +
          std::to_string(rep.dropped_samples) + " dataset-only -> " + out);
  return kExitOk;
}

int do_select(const Inputs& in, const SelectArgs& a, const Common& common) {
  const auto strategy = parse_strategy(a.strategy);
  if (!strategy) throw UsageError("--strategy must be dis, dil or diq");
  const bool explicit_mode = a.s_min || a.s_max || a.l_min || a.l_max;
  const bool pct_mode = !a.s_pct.empty() || !a.l_pct.empty();
  const bool frac_mode = a.fraction.has_value();
  if (explicit_mode + pct_mode + frac_mode != 1) {
    throw UsageError("choose exactly one bound mode: explicit (--s-min/--s-max/--l-min/--l-max), "
                     "percentile (--s-pct/--l-pct) or --fraction");
  }
  const bool uses_s = a.s_min || a.s_max || !a.s_pct.empty();
  const bool uses_l = a.l_min || a.l_max || !a.l_pct.empty();
  if ((*strategy == Strategy::dis && uses_l) || (*strategy == Strategy::dil && uses_s)) {
    throw UsageError("bounds on the other axis do not apply to strategy " + a.strategy);
  }

  QualityIndex index = open_index(in);
  auto axis_bounds = [&](Axis axis) {
    const bool sim = axis == Axis::similarity;
    const std::string& pct = sim ? a.s_pct : a.l_pct;
    if (!pct.empty()) {
      const auto [lo, hi] = parse_pair(pct, sim ? "--s-pct" : "--l-pct");
      return percentile_bounds(index, axis, lo, hi);
    }
    if (pct_mode) return Bounds1D::everything();
    const auto& lo = sim ? a.s_min : a.l_min;
    const auto& hi = sim ? a.s_max : a.l_max;
    return Bounds1D(lo.value_or(-kUnbounded), hi.value_or(kUnbounded));
  };

  std::optional<SubsetManifest> result;
  if (frac_mode) {
    result = select_top_fraction(index, *strategy, *a.fraction);
  } else if (*strategy == Strategy::dis) {
    result = select_dis(index, axis_bounds(Axis::similarity));
  } else if (*strategy == Strategy::dil) {
    result = select_dil(index, axis_bounds(Axis::loss));
  } else {
    result = select_diq(index, {axis_bounds(Axis::similarity), axis_bounds(Axis::loss)});
  }
  if (pct_mode) {
    Params p = result->params();
    if (!a.s_pct.empty()) p["s_pct"] = a.s_pct;
    if (!a.l_pct.empty()) p["l_pct"] = a.l_pct;
    result = SubsetManifest(result->ids(), result->strategy(), std::move(p), result->source_count());
  }
  const SubsetManifest out = with_seed(*result, common.seed);
  write_manifest(out, a.out);
  summary("select: " + std::to_string(index.size()) + " records, strategy=" + out.strategy() +
          ", m=" + std::to_string(out.size()) + thresholds_of(out) + " -> " + a.out);
  return kExitOk;
}

int do_regions(const Inputs& in, const std::string& binning_name,
               std::optional<std::size_t> sample, const std::string& out_dir,
               const Common& common) {
  const auto binning = parse_binning(binning_name);
  if (!binning) throw UsageError("--binning must be quantile or equal_width");
  QualityIndex index = open_index(in);
  const RegionGrid grid = partition_regions(index, *binning);

  fs::create_directories(out_dir);
  nlohmann::ordered_json meta;
  meta["version"] = 1;
  meta["binning"] = std::string(to_string(*binning));
  meta["col_edges"] = grid.col_edges;
  meta["row_edges"] = grid.row_edges;
  meta["seed"] = common.seed;
  meta["cells"] = nlohmann::ordered_json::array();

  std::vector<std::pair<SubsetManifest, std::string>> outputs;
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) {
      const SubsetManifest& cell = grid.cell(r, c);
      SubsetManifest m = sample ? sample_from(cell, *sample, derive_seed(common.seed, r * 3 + c))
                                : with_seed(cell, common.seed);
      const std::string file = "region_r" + std::to_string(r) + "c" + std::to_string(c) + ".manifest";
      nlohmann::ordered_json entry;
      entry["row"] = r;
      entry["col"] = c;
      entry["population"] = cell.size();
      entry["selected"] = m.size();
      entry["file"] = file;
      meta["cells"].push_back(std::move(entry));
      outputs.emplace_back(std::move(m), file);
    }
  }
  std::vector<AtomicFile> files;
  for (const auto& [m, file] : outputs) {
    files.emplace_back(fs::path(out_dir) / file);
    files.back().stream() << render_manifest(m);
  }
  files.emplace_back(fs::path(out_dir) / "regions.json");
  files.back().stream() << meta.dump(2) << '\n';
  for (auto& f : files) f.commit();

  std::string counts;
  for (const auto& [m, file] : outputs) counts += (counts.empty() ? "" : ",") + std::to_string(m.size());
  summary("regions: " + std::to_string(index.size()) + " records, binning=" + binning_name +
          ", per-cell [" + counts + "] -> " + out_dir);
  return kExitOk;
}

struct CurriculumArgs {
  int phases = 3;
  std::size_t per_phase = 0;
  std::string base_pct = "0:0";
  std::optional<double> delta_s, delta_l;
  std::string out_dir;
  std::string manifest_dir;
};

int do_curriculum(const Inputs& in, const CurriculumArgs& a, const Common& common) {
  if (a.delta_s.has_value() != a.delta_l.has_value()) {
    throw UsageError("--delta-s and --delta-l go together (omit both for auto deltas)");
  }
  const auto [qs, ql] = parse_pair(a.base_pct, "--base-pct");
  QualityIndex index = open_index(in);
  CurriculumOptions opts;
  opts.phases = a.phases;
  opts.base_q_s = qs;
  opts.base_q_l = ql;
  if (a.delta_s) opts.deltas = Deltas{*a.delta_s, *a.delta_l};
  opts.per_phase = a.per_phase;
  opts.seed = common.seed;
  const CurriculumPlan plan = plan_curriculum(index, opts);
  const auto manifests = materialize(index, plan);

  DatasetReader reader(in.dataset, {in.lenient});
  emit_training_schedule(plan, manifests, reader, a.out_dir);
  if (!a.manifest_dir.empty()) {
    fs::create_directories(a.manifest_dir);
    for (const auto& m : manifests) {
      write_manifest(m, fs::path(a.manifest_dir) / ("phase_" + m.params().at("k") + ".manifest"));
    }
  }
  std::string th;
  for (const auto& p : plan.phases) {
    th += " [k=" + std::to_string(p.k) + " S_p=" + format_real(p.s_threshold) +
          " L_p=" + format_real(p.l_threshold) + "]";
  }
  summary("curriculum: " + std::to_string(index.size()) + " records, " +
          std::to_string(plan.phases.size()) + " phases x " + std::to_string(a.per_phase) +
          ", seed=" + std::to_string(common.seed) + th + " -> " + a.out_dir);
  return kExitOk;
}

int do_mix(const std::vector<std::string>& inputs, const std::string& out, const Common& common) {
  std::vector<SubsetManifest> parts;
  for (const auto& path : inputs) parts.push_back(read_manifest(path));
  const SubsetManifest m = with_seed(mix(parts), common.seed);
  write_manifest(m, out);
  summary("mix: " + std::to_string(parts.size()) + " subsets, union=" + std::to_string(m.size()) +
          ", overlap=" + m.params().at("overlap") + " -> " + out);
  return kExitOk;
}

int do_export(const std::string& manifest_path, const Inputs& in, const std::string& out) {
  const SubsetManifest m = read_manifest(manifest_path);
  DatasetReader reader(in.dataset, {in.lenient});
  export_subset_dataset(m, reader, out);
  summary("export: " + std::to_string(m.size()) + " records -> " + out);
  return kExitOk;
}

struct AnalyzeArgs {
  std::string out;
  std::string bins = "50x50";
  std::string task_type;
  bool density = false;
  std::string color_by = "task_type";
  std::string overlay_bounds;
  std::string overlay_regions;
  std::vector<std::string> overlay_thresholds;
  std::string corr_a = "token_length";
  std::string corr_b = "loss";
};

void write_text(const std::string& path, const std::string& text) {
  AtomicFile f(path);
  f.stream() << text;
  f.commit();
}

int do_analyze(const std::string& what, const Inputs& in, const AnalyzeArgs& a) {
  QualityIndex index = open_index(in);
  const std::string n = std::to_string(index.size()) + " records";
  if (what == "stats") {
    write_text(a.out, render_stats_json(axis_stats(index)));
    summary("analyze stats: " + n + " -> " + a.out);
  } else if (what == "grid") {
    std::optional<std::string_view> filter;
    if (!a.task_type.empty()) {
      if (!parse_task_type(a.task_type)) throw UsageError("unknown --task-type '" + a.task_type + "'");
      filter = a.task_type;
    }
    Grid2D g = density_grid(index, filter, parse_bins(a.bins));
    if (a.density) g = to_density(g);
    export_grid_csv(g, a.out);
    summary("analyze grid: " + n + ", metric=" + std::string(to_string(g.metric)) + " -> " + a.out);
  } else if (what == "heatmap") {
    export_grid_csv(token_length_grid(index, parse_bins(a.bins)), a.out);
    summary("analyze heatmap: " + n + " -> " + a.out);
  } else if (what == "scatter") {
    const auto color = parse_color_by(a.color_by);
    if (!color) throw UsageError("--color-by must be task_type, token_length or none");
    Overlays ov;
    if (!a.overlay_bounds.empty()) {
      std::vector<double> v;
      std::stringstream ss(a.overlay_bounds);
      for (std::string tok; std::getline(ss, tok, ':');) v.push_back(parse_real(tok));
      if (v.size() != 4) throw UsageError("--overlay-bounds expects SMIN:SMAX:LMIN:LMAX");
      ov.bounds = Bounds2D{{v[0], v[1]}, {v[2], v[3]}};
    }
    if (!a.overlay_regions.empty()) {
      const auto b = parse_binning(a.overlay_regions);
      if (!b) throw UsageError("--overlay-regions must be quantile or equal_width");
      ov.regions = partition_regions(index, *b);
    }
    for (const auto& t : a.overlay_thresholds) ov.thresholds.push_back(parse_pair(t, "--overlay-threshold"));
    render_scatter(index, *color, ov, a.out);
    summary("analyze scatter: " + n + " -> " + a.out);
  } else if (what == "corr") {
    const auto ca = parse_column(a.corr_a), cb = parse_column(a.corr_b);
    if (!ca || !cb) throw UsageError("--a/--b must be loss, clip_score or token_length");
    const double r = correlation(index, *ca, *cb);
    nlohmann::ordered_json j;
    j["a"] = a.corr_a;
    j["b"] = a.corr_b;
    j["n"] = index.size();
    j["pearson"] = r;
    write_text(a.out, j.dump(2) + "\n");
    summary("analyze corr: " + n + ", pearson(" + a.corr_a + ", " + a.corr_b + ")=" + format_real(r) +
            " -> " + a.out);
  }
  return kExitOk;
}

log::Level parse_level(const std::string& s) {
  if (s == "debug") return log::Level::debug;
  if (s == "info") return log::Level::info;
  if (s == "warn") return log::Level::warn;
  if (s == "error") return log::Level::error;
  if (s == "off") return log::Level::off;
  throw UsageError("--log-level must be debug, info, warn, error or off");
}

}  // namespace

int run(int argc, const char* const* argv) {
  CLI::App app{"Quality-space curation of multimodal instruction-tuning data", "curate"};
  app.require_subcommand(1);
  app.fallthrough();
  Common common;
  app.add_option("--log-level", common.log_level, "debug|info|warn|error|off")->capture_default_str();

  Inputs in;
  std::string out;

  auto* join = app.add_subcommand("join", "Join dataset and scores into a validated score file");
  add_inputs(join, in, true, true);
  join->add_option("--out", out, "Joined score file")->required();

  SelectArgs sel;
  auto* select = app.add_subcommand("select", "Select a DIS/DIL/DIQ subset");
  add_inputs(select, in, true, false);
  add_seed(select, common);
  select->add_option("--strategy", sel.strategy, "dis|dil|diq")->required();
  select->add_option("--s-min", sel.s_min, "Explicit lower clip-score bound");
  select->add_option("--s-max", sel.s_max, "Explicit upper clip-score bound");
  select->add_option("--l-min", sel.l_min, "Explicit lower loss bound");
  select->add_option("--l-max", sel.l_max, "Explicit upper loss bound");
  select->add_option("--s-pct", sel.s_pct, "Clip-score percentile bounds LO:HI in [0,1]");
  select->add_option("--l-pct", sel.l_pct, "Loss percentile bounds LO:HI in [0,1]");
  select->add_option("--fraction", sel.fraction, "Top fraction in (0,1]");
  select->add_option("--out", sel.out, "Output manifest")->required();

  std::string binning = "quantile";
  std::optional<std::size_t> sample;
  std::string out_dir;
  auto* regions = app.add_subcommand("regions", "Partition into 3x3 regions, optionally sampling each");
  add_inputs(regions, in, true, false);
  add_seed(regions, common);
  regions->add_option("--binning", binning, "quantile|equal_width")->capture_default_str();
  regions->add_option("--sample", sample, "Ids to sample per region");
  regions->add_option("--out-dir", out_dir, "Directory for region manifests")->required();

  CurriculumArgs cur;
  auto* curriculum = app.add_subcommand("curriculum", "Plan, draw and emit a phased curriculum");
  add_inputs(curriculum, in, true, true);
  add_seed(curriculum, common);
  curriculum->add_option("--phases", cur.phases, "Number of phases K")->capture_default_str();
  curriculum->add_option("--per-phase", cur.per_phase, "Samples drawn per phase")->required();
  curriculum->add_option("--base-pct", cur.base_pct, "Percentiles QS:QL of S_min and L_min")->capture_default_str();
  curriculum->add_option("--delta-s", cur.delta_s, "Clip-score step per phase (default: auto)");
  curriculum->add_option("--delta-l", cur.delta_l, "Loss step per phase (default: auto)");
  curriculum->add_option("--out-dir", cur.out_dir, "Directory for phase files and schedule.json")->required();
  curriculum->add_option("--manifest-dir", cur.manifest_dir, "Also write per-phase manifests here");

  std::vector<std::string> mix_inputs;
  auto* mixc = app.add_subcommand("mix", "Union of manifests");
  add_seed(mixc, common);
  mixc->add_option("--in", mix_inputs, "Input manifest (repeatable)")->required();
  mixc->add_option("--out", out, "Output manifest")->required();

  AnalyzeArgs an;
  auto* analyze = app.add_subcommand("analyze", "Distribution analyses");
  analyze->require_subcommand(1);
  std::string analyze_what;
  for (const char* name : {"stats", "grid", "heatmap", "scatter", "corr"}) {
    auto* sub = analyze->add_subcommand(name);
    add_inputs(sub, in, true, false);
    sub->add_option("--out", an.out, "Output file")->required();
    sub->callback([&analyze_what, name] { analyze_what = name; });
    const std::string w = name;
    if (w == "grid" || w == "heatmap") sub->add_option("--bins", an.bins, "N or NXxNY")->capture_default_str();
    if (w == "grid") {
      sub->add_option("--task-type", an.task_type, "Only count this task type");
      sub->add_flag("--density", an.density, "Normalize counts to a density");
    }
    if (w == "scatter") {
      sub->add_option("--color-by", an.color_by, "task_type|token_length|none")->capture_default_str();
      sub->add_option("--overlay-bounds", an.overlay_bounds, "SMIN:SMAX:LMIN:LMAX");
      sub->add_option("--overlay-regions", an.overlay_regions, "quantile|equal_width");
      sub->add_option("--overlay-threshold", an.overlay_thresholds, "S_P:L_P (repeatable)");
    }
    if (w == "corr") {
      sub->add_option("--a", an.corr_a, "loss|clip_score|token_length")->capture_default_str();
      sub->add_option("--b", an.corr_b, "loss|clip_score|token_length")->capture_default_str();
    }
  }

  std::string manifest_path;
  auto* exportc = app.add_subcommand("export", "Write the dataset records of a manifest");
  add_inputs(exportc, in, false, true);
  exportc->add_option("--manifest", manifest_path, "Manifest to export")->required();
  exportc->add_option("--out", out, "Output dataset file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    std::cerr << app.help();
    return kExitUsage;
  }

  try {
    log::set_level(parse_level(common.log_level));
    if (join->parsed()) return do_join(in, out);
    if (select->parsed()) return do_select(in, sel, common);
    if (regions->parsed()) return do_regions(in, binning, sample, out_dir, common);
    if (curriculum->parsed()) return do_curriculum(in, cur, common);
    if (mixc->parsed()) return do_mix(mix_inputs, out, common);
    if (exportc->parsed()) return do_export(manifest_path, in, out);
    if (analyze->parsed()) return do_analyze(analyze_what, in, an);
  } catch (const UsageError& e) {
    std::cerr << "curate: usage error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::invalid_argument& e) {
    std::cerr << "curate: usage error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const DataError& e) {
    std::cerr << "curate: error: " << e.what() << '\n';
    return kExitData;
  } catch (const std::exception& e) {
    std::cerr << "curate: error: " << e.what() << '\n';
    return kExitData;
  }
  return kExitUsage;
}

int run(const std::vector<std::string>& args) {
  std::vector<const char*> argv;
  argv.reserve(args.size());
  for (const auto& a : args) argv.push_back(a.c_str());
  return run(static_cast<int>(argv.size()), argv.data());
}

}  // namespace curate::cli
