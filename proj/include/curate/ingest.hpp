#pragma once

// Line-delimited JSON I/O and the joined quality index.
//
// Dataset line:  {"id", "image", "conversations": [{"from", "value"}...],
//                 optional "task_type"}   ("gpt" means the assistant)
// Score line:    {"id", "clip_score", "loss", "token_length", "task_type"}
// Manifest file: header {"params", "source_count", "strategy", "version": 1}
//                followed by one id per line.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "curate/core.hpp"

namespace curate {

namespace fs = std::filesystem;

struct LoadOptions {
  /// Skip malformed or invalid lines with a warning instead of failing.
  bool lenient = false;
};

/// Parse one dataset line. Throws DataError (without line information) on
/// malformed JSON, missing fields or invariant violations.
SampleRecord parse_sample_line(std::string_view line);
/// Parse one score line. Range violations name the id and the field.
ScoreRecord parse_score_line(std::string_view line);

std::string dump_sample_line(const SampleRecord& record);
std::string dump_score_line(const ScoreRecord& record);

/// Streams SampleRecords from a dataset file in file order.
class DatasetReader {
 public:
  explicit DatasetReader(const fs::path& path, LoadOptions options = {});

  /// Next valid record, or nullopt at end of file. In strict mode the first
  /// bad line throws a DataError naming the file and line number.
  std::optional<SampleRecord> next();

  std::size_t line_number() const noexcept { return line_no_; }
  std::size_t skipped() const noexcept { return skipped_; }

 private:
  fs::path path_;
  std::ifstream in_;
  LoadOptions options_;
  std::size_t line_no_ = 0;
  std::size_t skipped_ = 0;
};

/// Whole-file loads. Lines are parsed in parallel; errors still report the
/// lowest offending line number.
std::vector<SampleRecord> load_dataset(const fs::path& path,
                                       LoadOptions options = {});
std::vector<ScoreRecord> load_scores(const fs::path& path,
                                     LoadOptions options = {});

void write_scores(std::span<const ScoreRecord> scores, const fs::path& path);
void write_dataset(std::span<const SampleRecord> samples, const fs::path& path);

enum class Axis { similarity, loss };
std::string_view to_string(Axis a);

enum class JoinMode { strict, lenient };

struct JoinReport {
  std::size_t dropped_scores = 0;   // score ids without a sample
  std::size_t dropped_samples = 0;  // sample ids without a score
};

/// The quality space: every sample's (clip_score, loss) plus token length and
/// task type, stored column-wise. Records are held in ascending id order, so
/// a record's position doubles as its id tie-break rank. Immutable.
class QualityIndex {
 public:
  using Position = std::uint32_t;

  /// Throws DataError on empty input or duplicate ids (listing up to 10).
  static QualityIndex build(std::vector<ScoreRecord> scores);
  /// Joins scores with samples. Strict mode throws a DataError listing up to
  /// 10 unmatched ids; lenient mode drops them and records a JoinReport.
  static QualityIndex build(std::vector<ScoreRecord> scores,
                            std::vector<SampleRecord> samples,
                            JoinMode mode = JoinMode::strict);

  std::size_t size() const noexcept { return ids_.size(); }

  std::span<const std::string> ids() const noexcept { return ids_; }
  std::span<const double> clip_scores() const noexcept { return sim_; }
  std::span<const double> losses() const noexcept { return loss_; }
  std::span<const std::int64_t> token_lengths() const noexcept { return tokens_; }
  std::span<const TaskType> task_types() const noexcept { return tasks_; }
  std::span<const double> axis(Axis a) const noexcept {
    return a == Axis::similarity ? clip_scores() : losses();
  }

  /// Positions ascending by the axis value, ties by ascending id.
  std::span<const Position> sorted_by(Axis a) const noexcept {
    return a == Axis::similarity ? by_sim_ : by_loss_;
  }
  std::span<const Position> sorted_by_similarity() const noexcept { return by_sim_; }
  std::span<const Position> sorted_by_loss() const noexcept { return by_loss_; }

  /// 1-based rank of a record in sorted_by(a).
  std::uint32_t rank(Axis a, Position p) const noexcept {
    return a == Axis::similarity ? sim_rank_[p] : loss_rank_[p];
  }

  std::optional<Position> find(std::string_view id) const;
  ScoreRecord record(Position p) const;
  /// The joined dataset record, when the index was built with samples.
  const SampleRecord* sample(Position p) const noexcept;
  bool has_samples() const noexcept { return !samples_.empty(); }
  const JoinReport& join_report() const noexcept { return report_; }

 private:
  QualityIndex() = default;
  void finish();

  std::vector<std::string> ids_;
  std::vector<double> sim_;
  std::vector<double> loss_;
  std::vector<std::int64_t> tokens_;
  std::vector<TaskType> tasks_;
  std::vector<SampleRecord> samples_;
  std::vector<Position> by_sim_;
  std::vector<Position> by_loss_;
  std::vector<std::uint32_t> sim_rank_;
  std::vector<std::uint32_t> loss_rank_;
  JoinReport report_;
};

/// Loads scores (and the dataset when given) and builds the index.
QualityIndex load_index(const fs::path& scores,
                        const std::optional<fs::path>& dataset = std::nullopt,
                        JoinMode mode = JoinMode::strict,
                        LoadOptions options = {});

inline constexpr int kManifestVersion = 1;

void write_manifest(const SubsetManifest& manifest, const fs::path& path);
SubsetManifest read_manifest(const fs::path& path);
/// The manifest file contents as written by write_manifest.
std::string render_manifest(const SubsetManifest& manifest);

/// Writes the selected dataset records in manifest order. Every manifest id
/// must appear in `samples`.
void export_subset_dataset(const SubsetManifest& manifest,
                           DatasetReader& samples, const fs::path& out);

/// Writes to "<path>.partial" and renames onto `path` on commit(). An
/// uncommitted file is removed on destruction, so failures leave no output.
class AtomicFile {
 public:
  explicit AtomicFile(fs::path path);
  AtomicFile(const AtomicFile&) = delete;
  AtomicFile& operator=(const AtomicFile&) = delete;
  AtomicFile(AtomicFile&&) noexcept;
  ~AtomicFile();

  std::ostream& stream() { return out_; }
  void commit();

 private:
  fs::path path_;
  fs::path tmp_;
  std::ofstream out_;
  bool done_ = false;
};

}  // namespace curate
