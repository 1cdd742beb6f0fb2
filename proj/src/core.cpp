#include "curate/core.hpp"

#include <charconv>
#include <cmath>
#include <unordered_set>

namespace curate {

std::string_view to_string(TaskType t) {
  switch (t) {
    case TaskType::detail_description: return "detail_description";
    case TaskType::referring_qa: return "referring_qa";
    case TaskType::complex_reasoning: return "complex_reasoning";
    case TaskType::conversation_qa: return "conversation_qa";
    case TaskType::unknown: return "unknown";
  }
  return "unknown";
}

std::optional<TaskType> parse_task_type(std::string_view s) {
  for (TaskType t : kAllTaskTypes) {
    if (to_string(t) == s) return t;
  }
  return std::nullopt;
}

SampleId::SampleId(std::string value) : value_(std::move(value)) {
  if (value_.empty()) throw DataError("sample id must be non-empty");
  if (value_.find_first_of("\r\n") != std::string::npos) {
    throw DataError("sample id must not contain line breaks");
  }
}

std::vector<std::string> validate_sample(const SampleRecord& record) {
  std::vector<std::string> out;
  if (record.image.empty()) out.emplace_back("image path empty");
  if (record.conversations.empty()) {
    out.emplace_back("conversations empty");
    return out;
  }
  if (record.conversations.front().speaker != Speaker::human) {
    out.emplace_back("first speaker must be human");
  }
  for (std::size_t i = 1; i < record.conversations.size(); ++i) {
    if (record.conversations[i].speaker == record.conversations[i - 1].speaker) {
      out.push_back("speakers must alternate (turn " + std::to_string(i) + ")");
    }
  }
  return out;
}

std::vector<std::string> validate_score(const ScoreRecord& r) {
  std::vector<std::string> out;
  if (!std::isfinite(r.clip_score)) {
    out.emplace_back("clip_score: not finite");
  } else if (r.clip_score < -1.0 || r.clip_score > 1.0) {
    out.push_back("clip_score: " + format_real(r.clip_score) +
                  " outside [-1, 1]; expected the cosine of "
                  "unit-normalized embeddings, not a raw dot product");
  }
  if (!std::isfinite(r.loss)) {
    out.emplace_back("loss: not finite");
  } else if (r.loss < 0.0) {
    out.push_back("loss: " + format_real(r.loss) + " is negative");
  }
  if (r.token_length < 1) {
    out.push_back("token_length: " + std::to_string(r.token_length) +
                  " is below 1");
  }
  return out;
}

Bounds1D::Bounds1D(double lower, double upper) : lower_(lower), upper_(upper) {
  if (std::isnan(lower) || std::isnan(upper)) {
    throw std::invalid_argument("bounds must not be NaN");
  }
  if (lower > upper) {
    throw std::invalid_argument("bounds: lower " + format_real(lower) +
                                " exceeds upper " + format_real(upper));
  }
}

SubsetManifest::SubsetManifest(std::vector<std::string> ids,
                               std::string strategy, Params params,
                               std::size_t source_count)
    : ids_(std::move(ids)),
      strategy_(std::move(strategy)),
      params_(std::move(params)),
      source_count_(source_count) {
  if (ids_.size() > source_count_) {
    throw std::logic_error("manifest holds " + std::to_string(ids_.size()) +
                           " ids but source has only " +
                           std::to_string(source_count_));
  }
  std::unordered_set<std::string_view> seen;
  seen.reserve(ids_.size());
  for (const auto& id : ids_) {
    if (!seen.insert(id).second) {
      throw std::logic_error("manifest contains duplicate id '" + id + "'");
    }
  }
}

std::string format_real(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  if (std::isnan(v)) return "nan";
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

double parse_real(std::string_view s) {
  if (s == "inf" || s == "+inf") return kUnbounded;
  if (s == "-inf") return -kUnbounded;
  double v = 0.0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
    throw std::invalid_argument("not a real number: '" + std::string(s) + "'");
  }
  return v;
}

}  // namespace curate
