#pragma once

// Domain types shared by every stage of the curation pipeline.
//
// A sample lives at a point (clip_score, loss) of the quality space. All
// types here are immutable once constructed and may be read from any thread.

#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace curate {

/// Bad input data: malformed lines, range violations, join mismatches, I/O.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class TaskType : std::uint8_t {
  detail_description,
  referring_qa,
  complex_reasoning,
  conversation_qa,
  unknown,
};

inline constexpr TaskType kAllTaskTypes[] = {
    TaskType::detail_description, TaskType::referring_qa,
    TaskType::complex_reasoning, TaskType::conversation_qa, TaskType::unknown};

std::string_view to_string(TaskType t);
std::optional<TaskType> parse_task_type(std::string_view s);

enum class Speaker : std::uint8_t { human, assistant };

/// Identifier of one sample. Non-empty and free of line breaks, so that a
/// manifest can store one id per line.
class SampleId {
 public:
  explicit SampleId(std::string value);

  const std::string& str() const noexcept { return value_; }

  friend bool operator==(const SampleId&, const SampleId&) = default;
  friend auto operator<=>(const SampleId&, const SampleId&) = default;

 private:
  std::string value_;
};

struct Turn {
  Speaker speaker = Speaker::human;
  std::string text;

  friend bool operator==(const Turn&, const Turn&) = default;
};

struct SampleRecord {
  SampleId id;
  std::string image;
  std::vector<Turn> conversations;
  std::optional<TaskType> task_type;

  friend bool operator==(const SampleRecord&, const SampleRecord&) = default;
};

/// Dual attributes of one sample. `loss` is the summed (not averaged)
/// negative log-likelihood over `token_length` target tokens.
struct ScoreRecord {
  SampleId id;
  double clip_score = 0.0;
  double loss = 0.0;
  std::int64_t token_length = 1;
  TaskType task_type = TaskType::unknown;

  friend bool operator==(const ScoreRecord&, const ScoreRecord&) = default;
};

/// Returns every invariant violation of the record; empty means valid.
std::vector<std::string> validate_sample(const SampleRecord& record);

/// Returns every range violation, each prefixed by the offending field name.
std::vector<std::string> validate_score(const ScoreRecord& record);

inline constexpr double kUnbounded = std::numeric_limits<double>::infinity();

/// Closed interval [lower, upper]. Either end may be infinite.
class Bounds1D {
 public:
  Bounds1D(double lower, double upper);

  static Bounds1D at_least(double lower) { return {lower, kUnbounded}; }
  static Bounds1D everything() { return {-kUnbounded, kUnbounded}; }

  double lower() const noexcept { return lower_; }
  double upper() const noexcept { return upper_; }
  bool contains(double v) const noexcept { return lower_ <= v && v <= upper_; }

  friend bool operator==(const Bounds1D&, const Bounds1D&) = default;

 private:
  double lower_;
  double upper_;
};

struct Bounds2D {
  Bounds1D similarity;
  Bounds1D loss;

  bool contains(double clip_score, double loss_value) const noexcept {
    return similarity.contains(clip_score) && loss.contains(loss_value);
  }
  friend bool operator==(const Bounds2D&, const Bounds2D&) = default;
};

using Params = std::map<std::string, std::string>;

/// Ordered, duplicate-free list of selected ids plus the parameters that
/// produced it. Construction throws std::logic_error if either invariant
/// (no duplicates, size <= source_count) is broken.
class SubsetManifest {
 public:
  SubsetManifest(std::vector<std::string> ids, std::string strategy,
                 Params params, std::size_t source_count);

  const std::vector<std::string>& ids() const noexcept { return ids_; }
  const std::string& strategy() const noexcept { return strategy_; }
  const Params& params() const noexcept { return params_; }
  std::size_t source_count() const noexcept { return source_count_; }
  std::size_t size() const noexcept { return ids_.size(); }
  bool empty() const noexcept { return ids_.empty(); }

  friend bool operator==(const SubsetManifest&, const SubsetManifest&) =
      default;

 private:
  std::vector<std::string> ids_;
  std::string strategy_;
  Params params_;
  std::size_t source_count_;
};

/// Shortest decimal form that parses back to the same double; "inf"/"-inf"
/// for infinities. Used for every real written into params and files.
std::string format_real(double v);
double parse_real(std::string_view s);

}  // namespace curate
