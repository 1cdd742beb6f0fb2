#include "mock_corpus.hpp"

#include <algorithm>
#include <cmath>
#include <string_view>

#include "curate/ingest.hpp"
#include "curate/random.hpp"

namespace curate::testing {
namespace {

std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

// Stream of uniform doubles in [0, 1) keyed by (seed, key).
class KeyedStream {
 public:
  KeyedStream(std::uint64_t seed, std::uint64_t key) : state_(splitmix64(seed ^ key)) {}
  double uniform() {
    state_ = splitmix64(state_);
    return static_cast<double>(state_ >> 11) * 0x1.0p-53;
  }
  // Irwin-Hall(2) shifted to [-1, 1): a cheap bell shape.
  double bell() { return uniform() + uniform() - 1.0; }

 private:
  std::uint64_t state_;
};

constexpr std::string_view kWords[] = {
    "the", "image", "shows", "a", "person", "standing", "near", "red", "car",
    "on", "street", "with", "trees", "in", "background", "and", "sky", "is", "clear"};

std::string filler(KeyedStream& rng, std::size_t chars) {
  std::string out;
  while (out.size() < chars) {
    if (!out.empty()) out += ' ';
    out += kWords[static_cast<std::size_t>(rng.uniform() * std::size(kWords))];
  }
  out.resize(chars);
  return out;
}

struct TaskShape {
  TaskType type;
  double clip_center;
  double clip_spread;
  std::size_t min_chars;
  std::size_t max_chars;
  double nll_base;
};

constexpr TaskShape kShapes[] = {
    {TaskType::detail_description, 0.29, 0.10, 500, 1300, 0.95},
    {TaskType::referring_qa, 0.23, 0.10, 120, 700, 0.80},
    {TaskType::complex_reasoning, 0.26, 0.16, 200, 1200, 0.85},
    {TaskType::conversation_qa, 0.26, 0.10, 200, 900, 0.85},
};

const TaskShape& shape_of(TaskType t) {
  for (const auto& s : kShapes) {
    if (s.type == t) return s;
  }
  return kShapes[3];
}

}  // namespace

SampleRecord mock_sample(std::size_t i, std::uint64_t seed) {
  char id[32];
  std::snprintf(id, sizeof id, "svit-%07zu", i);
  KeyedStream rng(seed, fnv1a(id) ^ 0x5a5a);
  const TaskShape& shape = kShapes[static_cast<std::size_t>(rng.uniform() * std::size(kShapes))];
  const auto total = shape.min_chars +
                     static_cast<std::size_t>(rng.uniform() * static_cast<double>(shape.max_chars - shape.min_chars));
  const std::size_t question = std::min<std::size_t>(60, total / 4);
  SampleRecord rec{SampleId(id), std::string("coco/train2017/") + id + ".jpg",
                   {{Speaker::human, filler(rng, question)},
                    {Speaker::assistant, filler(rng, total - question)}},
                   shape.type};
  return rec;
}

ScoreRecord mock_score(const SampleRecord& sample, std::uint64_t seed) {
  KeyedStream rng(seed, fnv1a(sample.id.str()));
  const TaskType type = sample.task_type.value_or(TaskType::unknown);
  const TaskShape& shape = shape_of(type);
  std::size_t chars = 0;
  for (const auto& t : sample.conversations) chars += t.text.size();
  const auto tokens = static_cast<std::int64_t>((chars + 3) / 4);
  const double clip = std::clamp(shape.clip_center + shape.clip_spread * rng.bell(), -1.0, 1.0);
  const double nll = shape.nll_base + 0.35 * rng.uniform();
  return {sample.id, clip, nll * static_cast<double>(tokens), tokens, type};
}

MockCorpus make_mock_corpus(std::size_t n, std::uint64_t seed) {
  MockCorpus c;
  c.samples.reserve(n);
  c.scores.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    c.samples.push_back(mock_sample(i, seed));
    c.scores.push_back(mock_score(c.samples.back(), seed));
  }
  return c;
}

void write_mock_corpus(const MockCorpus& corpus, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  write_dataset(corpus.samples, dir / "dataset.jsonl");
  write_scores(corpus.scores, dir / "scores.jsonl");
}

}  // namespace curate::testing
