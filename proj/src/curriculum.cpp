#include "curate/curriculum.hpp"

#include <algorithm>
#include <unordered_map>

#include <json.hpp>

#include "curate/kernels.hpp"
#include "curate/random.hpp"
#include "curate/selection.hpp"
#include "detail.hpp"

namespace curate {
namespace {

Bounds2D phase_box(const PhaseSpec& phase) {
  return {Bounds1D::at_least(phase.s_threshold), Bounds1D::at_least(phase.l_threshold)};
}

const PhaseSpec& phase_at(const CurriculumPlan& plan, int k) {
  if (k < 0 || k >= static_cast<int>(plan.phases.size())) {
    throw std::out_of_range("phase " + std::to_string(k) + " outside plan of " +
                            std::to_string(plan.phases.size()));
  }
  return plan.phases[static_cast<std::size_t>(k)];
}

std::string phase_file(int k) { return "phase_" + std::to_string(k) + ".jsonl"; }

}  // namespace

std::string phase_label(int k) {
  switch (k) {
    case 0: return "initialization";
    case 1: return "intermediate";
    case 2: return "advanced";
    default: return "phase-" + std::to_string(k);
  }
}

CurriculumPlan plan_curriculum(const QualityIndex& index,
                               const CurriculumOptions& options) {
  if (options.phases < 1) {
    throw std::invalid_argument("curriculum needs at least one phase");
  }
  CurriculumPlan plan;
  plan.seed = options.seed;
  plan.s_min = quantile(index, Axis::similarity, options.base_q_s);
  plan.l_min = quantile(index, Axis::loss, options.base_q_l);
  if (options.deltas) {
    if (!(options.deltas->s >= 0.0) || !(options.deltas->l >= 0.0)) {
      throw std::invalid_argument("curriculum deltas must be non-negative");
    }
    plan.delta_s = options.deltas->s;
    plan.delta_l = options.deltas->l;
  } else {
    const double k = options.phases;
    plan.delta_s = (quantile(index, Axis::similarity, 1.0) - plan.s_min) / k;
    plan.delta_l = (quantile(index, Axis::loss, 1.0) - plan.l_min) / k;
  }

  for (int k = 0; k < options.phases; ++k) {
    PhaseSpec phase{k, plan.s_min + k * plan.delta_s, plan.l_min + k * plan.delta_l,
                    options.per_phase, phase_label(k)};
    if (kernels::count_box(index.clip_scores(), index.losses(), phase_box(phase)) == 0) {
      throw DataError("curriculum phase " + std::to_string(k) +
                      " region is empty (S_p=" + format_real(phase.s_threshold) +
                      ", L_p=" + format_real(phase.l_threshold) + "); reduce the deltas");
    }
    plan.phases.push_back(std::move(phase));
  }
  return plan;
}

SubsetManifest phase_region(const QualityIndex& index, const CurriculumPlan& plan,
                            int k) {
  const PhaseSpec& phase = phase_at(plan, k);
  const auto pos = kernels::filter_box(index.clip_scores(), index.losses(), phase_box(phase));
  return detail::make_manifest(
      detail::ids_at(index, pos), "curriculum:region" + std::to_string(k),
      {{"k", std::to_string(k)},
       {"S_p", format_real(phase.s_threshold)},
       {"L_p", format_real(phase.l_threshold)}},
      index.size());
}

std::vector<SubsetManifest> materialize(const QualityIndex& index,
                                        const CurriculumPlan& plan) {
  std::vector<std::uint8_t> taken(index.size(), 0);
  std::vector<SubsetManifest> out;
  out.reserve(plan.phases.size());
  for (const PhaseSpec& phase : plan.phases) {
    const auto region =
        kernels::filter_box(index.clip_scores(), index.losses(), phase_box(phase));
    std::vector<std::string> pool;
    pool.reserve(region.size());
    for (auto p : region) {
      if (!taken[p]) pool.push_back(index.ids()[p]);
    }
    if (pool.size() < phase.m) {
      throw DataError("curriculum phase " + std::to_string(phase.k) + ": eligible pool of " +
                      std::to_string(pool.size()) + " is smaller than m_k=" +
                      std::to_string(phase.m));
    }
    const std::uint64_t phase_seed = derive_seed(plan.seed, static_cast<std::uint64_t>(phase.k));
    auto drawn = sample_without_replacement(pool, phase.m, phase_seed);
    std::sort(drawn.begin(), drawn.end());
    for (const auto& id : drawn) taken[*index.find(id)] = 1;

    out.push_back(detail::make_manifest(
        std::move(drawn), "curriculum:phase" + std::to_string(phase.k),
        {{"k", std::to_string(phase.k)},
         {"label", phase.label},
         {"S_p", format_real(phase.s_threshold)},
         {"L_p", format_real(phase.l_threshold)},
         {"pool", std::to_string(pool.size())},
         {"seed", std::to_string(plan.seed)},
         {"phase_seed", std::to_string(phase_seed)}},
        index.size()));
  }
  return out;
}

std::string render_schedule(const CurriculumPlan& plan,
                            std::span<const SubsetManifest> manifests) {
  nlohmann::ordered_json j;
  j["version"] = 1;
  j["seed"] = plan.seed;
  j["phases"] = nlohmann::ordered_json::array();
  for (std::size_t i = 0; i < plan.phases.size(); ++i) {
    const PhaseSpec& p = plan.phases[i];
    nlohmann::ordered_json phase;
    phase["k"] = p.k;
    phase["label"] = p.label;
    phase["S_p"] = p.s_threshold;
    phase["L_p"] = p.l_threshold;
    phase["m"] = i < manifests.size() ? manifests[i].size() : p.m;
    phase["file"] = phase_file(p.k);
    j["phases"].push_back(std::move(phase));
  }
  return j.dump(2) + "\n";
}

void emit_training_schedule(const CurriculumPlan& plan,
                            std::span<const SubsetManifest> manifests,
                            DatasetReader& samples, const fs::path& out_dir) {
  if (manifests.size() != plan.phases.size()) {
    throw std::invalid_argument("schedule: " + std::to_string(manifests.size()) +
                                " manifests for " + std::to_string(plan.phases.size()) +
                                " phases");
  }
  struct Slot {
    std::size_t phase;
    std::size_t index;
  };
  std::unordered_map<std::string_view, Slot> where;
  std::vector<std::vector<std::optional<SampleRecord>>> picked(manifests.size());
  for (std::size_t k = 0; k < manifests.size(); ++k) {
    picked[k].resize(manifests[k].size());
    for (std::size_t i = 0; i < manifests[k].size(); ++i) {
      where.emplace(manifests[k].ids()[i], Slot{k, i});
    }
  }
  while (auto rec = samples.next()) {
    auto it = where.find(rec->id.str());
    if (it == where.end()) continue;
    auto& slot = picked[it->second.phase][it->second.index];
    if (!slot) slot = std::move(*rec);
  }
  for (std::size_t k = 0; k < picked.size(); ++k) {
    for (std::size_t i = 0; i < picked[k].size(); ++i) {
      if (!picked[k][i]) {
        throw DataError("schedule: id \"" + manifests[k].ids()[i] + "\" of phase " +
                        std::to_string(k) + " missing from dataset");
      }
    }
  }

  fs::create_directories(out_dir);
  std::vector<AtomicFile> files;
  for (std::size_t k = 0; k < picked.size(); ++k) {
    files.emplace_back(out_dir / phase_file(plan.phases[k].k));
    for (const auto& rec : picked[k]) files.back().stream() << dump_sample_line(*rec) << '\n';
  }
  files.emplace_back(out_dir / "schedule.json");
  files.back().stream() << render_schedule(plan, manifests);
  for (auto& f : files) f.commit();
}

}  // namespace curate
