#pragma once

// Multi-phase curricula with linearly advancing quality thresholds.
//
// Phase k admits the records with clip_score >= S_min + k * dS and
// loss >= L_min + k * dL. Phases 0, 1 and 2 are the initialization,
// intermediate and advanced phases. Materialized phases are disjoint: each
// draws only from records not taken by an earlier phase.

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "curate/core.hpp"
#include "curate/ingest.hpp"

namespace curate {

struct PhaseSpec {
  int k = 0;
  double s_threshold = 0.0;  // S_p
  double l_threshold = 0.0;  // L_p
  std::size_t m = 0;
  std::string label;
};

struct CurriculumPlan {
  std::vector<PhaseSpec> phases;
  std::uint64_t seed = 0;
  double s_min = 0.0;
  double l_min = 0.0;
  double delta_s = 0.0;
  double delta_l = 0.0;
};

struct Deltas {
  double s = 0.0;
  double l = 0.0;
};

struct CurriculumOptions {
  int phases = 3;
  double base_q_s = 0.0;  // percentile of S_min on the similarity axis
  double base_q_l = 0.0;  // percentile of L_min on the loss axis
  std::optional<Deltas> deltas;  // nullopt: split [base, axis max] into K blocks
  std::size_t per_phase = 0;
  std::uint64_t seed = 0;
};

/// "initialization", "intermediate", "advanced", then "phase-k".
std::string phase_label(int k);

/// Throws std::invalid_argument on bad options and DataError when the plan
/// leaves some phase region empty (naming the first such phase).
CurriculumPlan plan_curriculum(const QualityIndex& index,
                               const CurriculumOptions& options);

/// Records of phase k's candidate region, ascending by id.
SubsetManifest phase_region(const QualityIndex& index, const CurriculumPlan& plan,
                            int k);

/// Draws m_k ids per phase from phase_region(k) minus earlier draws. Each
/// phase uses its own seed derived from (plan.seed, k).
std::vector<SubsetManifest> materialize(const QualityIndex& index,
                                        const CurriculumPlan& plan);

/// Writes phase_<k>.jsonl for every phase plus schedule.json into `out_dir`.
void emit_training_schedule(const CurriculumPlan& plan,
                            std::span<const SubsetManifest> manifests,
                            DatasetReader& samples, const fs::path& out_dir);

/// schedule.json contents for the plan.
std::string render_schedule(const CurriculumPlan& plan,
                            std::span<const SubsetManifest> manifests);

}  // namespace curate
