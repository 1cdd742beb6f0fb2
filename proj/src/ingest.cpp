#include "curate/ingest.hpp"

#include <algorithm>
#include <numeric>
#include <sstream>
#include <unordered_map>

#include <json.hpp>

#include "curate/log.hpp"

namespace curate {
namespace {

using nlohmann::json;
using nlohmann::ordered_json;

constexpr std::size_t kMaxListedIds = 10;
constexpr std::string_view kNonFinite = "__non_finite__";

std::string join_ids(const std::vector<std::string>& ids) {
  std::string out;
  for (std::size_t i = 0; i < ids.size() && i < kMaxListedIds; ++i) {
    if (i) out += ", ";
    out += '"' + ids[i] + '"';
  }
  if (ids.size() > kMaxListedIds) {
    out += " (+" + std::to_string(ids.size() - kMaxListedIds) + " more)";
  }
  return out;
}

bool blank(std::string_view line) {
  return line.find_first_not_of(" \t\r") == std::string_view::npos;
}

// Python's json module writes NaN/Infinity as bare tokens, which are not
// JSON. Rewrite them (outside string literals) to a marker string so the
// field check can report which field was non-finite.
std::string quote_non_finite(std::string_view line) {
  std::string out;
  out.reserve(line.size());
  bool in_string = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (in_string) {
      out += c;
      if (c == '\\' && i + 1 < line.size()) {
        out += line[++i];
      } else if (c == '"') {
        in_string = false;
      }
      continue;
    }
    if (c == '"') {
      in_string = true;
      out += c;
      continue;
    }
    bool replaced = false;
    for (std::string_view tok : {"-Infinity", "Infinity", "NaN"}) {
      if (line.substr(i, tok.size()) == tok) {
        out += '"';
        out += kNonFinite;
        out += '"';
        i += tok.size() - 1;
        replaced = true;
        break;
      }
    }
    if (!replaced) out += c;
  }
  return out;
}

json parse_object(std::string_view line) {
  json j = json::parse(line.begin(), line.end(), nullptr, false);
  if (j.is_discarded()) {
    j = json::parse(quote_non_finite(line), nullptr, false);
  }
  if (j.is_discarded()) throw DataError("malformed JSON");
  if (!j.is_object()) throw DataError("line is not a JSON object");
  return j;
}

const json& field(const json& j, const char* name) {
  auto it = j.find(name);
  if (it == j.end()) throw DataError(std::string("missing field \"") + name + '"');
  return *it;
}

std::string string_field(const json& j, const char* name) {
  const json& v = field(j, name);
  if (!v.is_string()) {
    throw DataError(std::string("field \"") + name + "\" must be a string");
  }
  return v.get<std::string>();
}

double real_field(const json& j, const char* name, const std::string& id) {
  const json& v = field(j, name);
  if (v.is_number()) return v.get<double>();
  if (v.is_null() || (v.is_string() && v.get<std::string>() == kNonFinite)) {
    throw DataError("id \"" + id + "\": " + name + ": not finite");
  }
  throw DataError("id \"" + id + "\": " + name + ": must be a number");
}

TaskType task_field(const json& j, const std::string& id) {
  auto it = j.find("task_type");
  if (it == j.end() || it->is_null()) return TaskType::unknown;
  if (!it->is_string()) {
    throw DataError("id \"" + id + "\": task_type: must be a string");
  }
  auto t = parse_task_type(it->get<std::string>());
  if (!t) {
    throw DataError("id \"" + id + "\": task_type: unknown value \"" +
                    it->get<std::string>() + '"');
  }
  return *t;
}

std::vector<std::string> read_lines(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) lines.push_back(std::move(line));
  if (in.bad()) throw DataError("read failure on " + path.string());
  return lines;
}

// Parses every line with `parse` in parallel and gathers results in file
// order. Strict mode reports the lowest failing line.
template <typename Record, typename Parse>
std::vector<Record> parse_lines(const fs::path& path, LoadOptions options,
                                Parse parse) {
  const std::vector<std::string> lines = read_lines(path);
  const auto n = static_cast<std::int64_t>(lines.size());
  std::vector<std::optional<Record>> parsed(lines.size());
  std::vector<std::string> errors(lines.size());

#ifdef CURATE_HAVE_OPENMP
#pragma omp parallel for schedule(dynamic, 1024)
#endif
  for (std::int64_t i = 0; i < n; ++i) {
    if (blank(lines[i])) continue;
    try {
      parsed[i].emplace(parse(lines[i]));
    } catch (const std::exception& e) {
      errors[i] = e.what();
    }
  }

  std::vector<Record> out;
  out.reserve(lines.size());
  std::size_t skipped = 0;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (!errors[i].empty()) {
      const std::string msg =
          path.string() + ":" + std::to_string(i + 1) + ": " + errors[i];
      if (!options.lenient) throw DataError(msg);
      log::warn("skipping " + msg);
      ++skipped;
      continue;
    }
    if (parsed[i]) out.push_back(std::move(*parsed[i]));
  }
  if (skipped) {
    log::warn(path.string() + ": skipped " + std::to_string(skipped) +
              " bad line(s)");
  }
  return out;
}

void write_lines_atomically(const fs::path& path, auto&& emit) {
  AtomicFile file(path);
  emit(file.stream());
  file.commit();
}

}  // namespace

SampleRecord parse_sample_line(std::string_view line) {
  const json j = parse_object(line);
  SampleId id(string_field(j, "id"));
  SampleRecord rec{std::move(id), string_field(j, "image"), {}, std::nullopt};

  const json& conv = field(j, "conversations");
  if (!conv.is_array()) throw DataError("field \"conversations\" must be an array");
  for (const json& turn : conv) {
    if (!turn.is_object()) throw DataError("conversation turn must be an object");
    const std::string from = string_field(turn, "from");
    Speaker who;
    if (from == "human") {
      who = Speaker::human;
    } else if (from == "gpt" || from == "assistant") {
      who = Speaker::assistant;
    } else {
      throw DataError("unknown speaker \"" + from + '"');
    }
    rec.conversations.push_back({who, string_field(turn, "value")});
  }
  if (j.contains("task_type") && !j.at("task_type").is_null()) {
    rec.task_type = task_field(j, rec.id.str());
  }

  auto violations = validate_sample(rec);
  if (!violations.empty()) {
    std::string msg = "id \"" + rec.id.str() + "\": ";
    for (std::size_t i = 0; i < violations.size(); ++i) {
      if (i) msg += "; ";
      msg += violations[i];
    }
    throw DataError(msg);
  }
  return rec;
}

ScoreRecord parse_score_line(std::string_view line) {
  const json j = parse_object(line);
  const std::string id = string_field(j, "id");
  const json& tl = field(j, "token_length");
  if (!tl.is_number_integer()) {
    throw DataError("id \"" + id + "\": token_length: must be an integer");
  }
  ScoreRecord rec{SampleId(id), real_field(j, "clip_score", id),
                  real_field(j, "loss", id), tl.get<std::int64_t>(),
                  task_field(j, id)};
  auto violations = validate_score(rec);
  if (!violations.empty()) {
    throw DataError("id \"" + id + "\": " + violations.front());
  }
  return rec;
}

std::string dump_sample_line(const SampleRecord& r) {
  ordered_json j;
  j["id"] = r.id.str();
  j["image"] = r.image;
  ordered_json conv = ordered_json::array();
  for (const Turn& t : r.conversations) {
    conv.push_back({{"from", t.speaker == Speaker::human ? "human" : "gpt"},
                    {"value", t.text}});
  }
  j["conversations"] = std::move(conv);
  if (r.task_type) j["task_type"] = std::string(to_string(*r.task_type));
  return j.dump();
}

std::string dump_score_line(const ScoreRecord& r) {
  ordered_json j;
  j["id"] = r.id.str();
  j["clip_score"] = r.clip_score;
  j["loss"] = r.loss;
  j["token_length"] = r.token_length;
  j["task_type"] = std::string(to_string(r.task_type));
  return j.dump();
}

DatasetReader::DatasetReader(const fs::path& path, LoadOptions options)
    : path_(path), in_(path, std::ios::binary), options_(options) {
  if (!in_) throw DataError("cannot open " + path.string());
}

std::optional<SampleRecord> DatasetReader::next() {
  std::string line;
  while (std::getline(in_, line)) {
    ++line_no_;
    if (blank(line)) continue;
    try {
      return parse_sample_line(line);
    } catch (const DataError& e) {
      const std::string msg =
          path_.string() + ":" + std::to_string(line_no_) + ": " + e.what();
      if (!options_.lenient) throw DataError(msg);
      log::warn("skipping " + msg);
      ++skipped_;
    }
  }
  return std::nullopt;
}

std::vector<SampleRecord> load_dataset(const fs::path& path,
                                       LoadOptions options) {
  return parse_lines<SampleRecord>(path, options, parse_sample_line);
}

std::vector<ScoreRecord> load_scores(const fs::path& path, LoadOptions options) {
  return parse_lines<ScoreRecord>(path, options, parse_score_line);
}

void write_scores(std::span<const ScoreRecord> scores, const fs::path& path) {
  write_lines_atomically(path, [&](std::ostream& out) {
    for (const auto& s : scores) out << dump_score_line(s) << '\n';
  });
}

void write_dataset(std::span<const SampleRecord> samples, const fs::path& path) {
  write_lines_atomically(path, [&](std::ostream& out) {
    for (const auto& s : samples) out << dump_sample_line(s) << '\n';
  });
}

std::string_view to_string(Axis a) {
  return a == Axis::similarity ? "similarity" : "loss";
}

QualityIndex QualityIndex::build(std::vector<ScoreRecord> scores) {
  return build(std::move(scores), {}, JoinMode::strict);
}

QualityIndex QualityIndex::build(std::vector<ScoreRecord> scores,
                                 std::vector<SampleRecord> samples,
                                 JoinMode mode) {
  const bool joined = !samples.empty();
  if (scores.empty()) throw DataError("score list is empty");

  auto by_id = [](const auto& a, const auto& b) { return a.id < b.id; };
  std::sort(scores.begin(), scores.end(), by_id);
  std::vector<std::string> dups;
  for (std::size_t i = 1; i < scores.size(); ++i) {
    if (scores[i].id == scores[i - 1].id &&
        (dups.empty() || dups.back() != scores[i].id.str())) {
      dups.push_back(scores[i].id.str());
    }
  }
  if (!dups.empty()) throw DataError("duplicate id(s) in scores: " + join_ids(dups));

  QualityIndex idx;
  if (joined) {
    std::sort(samples.begin(), samples.end(), by_id);
    for (std::size_t i = 1; i < samples.size(); ++i) {
      if (samples[i].id == samples[i - 1].id &&
          (dups.empty() || dups.back() != samples[i].id.str())) {
        dups.push_back(samples[i].id.str());
      }
    }
    if (!dups.empty()) {
      throw DataError("duplicate id(s) in dataset: " + join_ids(dups));
    }

    std::vector<std::string> score_only, sample_only;
    std::vector<ScoreRecord> kept_scores;
    std::vector<SampleRecord> kept_samples;
    kept_scores.reserve(scores.size());
    kept_samples.reserve(samples.size());
    std::size_t i = 0, k = 0;
    while (i < scores.size() || k < samples.size()) {
      if (k == samples.size() || (i < scores.size() && scores[i].id < samples[k].id)) {
        score_only.push_back(scores[i++].id.str());
      } else if (i == scores.size() || samples[k].id < scores[i].id) {
        sample_only.push_back(samples[k++].id.str());
      } else {
        kept_scores.push_back(std::move(scores[i++]));
        kept_samples.push_back(std::move(samples[k++]));
      }
    }
    if (mode == JoinMode::strict && (!score_only.empty() || !sample_only.empty())) {
      std::string msg = "join mismatch:";
      if (!score_only.empty()) msg += " ids in scores but not in dataset: " + join_ids(score_only) + ";";
      if (!sample_only.empty()) msg += " ids in dataset but not in scores: " + join_ids(sample_only) + ";";
      msg.pop_back();
      throw DataError(msg);
    }
    idx.report_ = {score_only.size(), sample_only.size()};
    if (!score_only.empty() || !sample_only.empty()) {
      log::warn("lenient join dropped " + std::to_string(score_only.size()) +
                " score-only and " + std::to_string(sample_only.size()) +
                " dataset-only id(s)");
    }
    if (kept_scores.empty()) throw DataError("join left no records");
    scores = std::move(kept_scores);
    idx.samples_ = std::move(kept_samples);
  }

  const std::size_t n = scores.size();
  if (n > std::numeric_limits<Position>::max()) {
    throw DataError("index too large: " + std::to_string(n) + " records");
  }
  idx.ids_.reserve(n);
  idx.sim_.reserve(n);
  idx.loss_.reserve(n);
  idx.tokens_.reserve(n);
  idx.tasks_.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    ScoreRecord& s = scores[i];
    TaskType task = s.task_type;
    if (task == TaskType::unknown && joined && idx.samples_[i].task_type) {
      task = *idx.samples_[i].task_type;
    }
    idx.ids_.push_back(s.id.str());
    idx.sim_.push_back(s.clip_score);
    idx.loss_.push_back(s.loss);
    idx.tokens_.push_back(s.token_length);
    idx.tasks_.push_back(task);
  }
  idx.finish();
  return idx;
}

void QualityIndex::finish() {
  const std::size_t n = ids_.size();
  auto order = [n](const std::vector<double>& values) {
    std::vector<Position> pos(n);
    std::iota(pos.begin(), pos.end(), Position{0});
    // Positions are already in id order, so a stable sort breaks ties by id.
    std::stable_sort(pos.begin(), pos.end(), [&](Position a, Position b) {
      return values[a] < values[b];
    });
    return pos;
  };
  auto ranks = [n](const std::vector<Position>& sorted) {
    std::vector<std::uint32_t> r(n);
    for (std::size_t i = 0; i < n; ++i) r[sorted[i]] = static_cast<std::uint32_t>(i + 1);
    return r;
  };
  by_sim_ = order(sim_);
  by_loss_ = order(loss_);
  sim_rank_ = ranks(by_sim_);
  loss_rank_ = ranks(by_loss_);
}

std::optional<QualityIndex::Position> QualityIndex::find(std::string_view id) const {
  auto it = std::lower_bound(ids_.begin(), ids_.end(), id,
                             [](const std::string& a, std::string_view b) { return a < b; });
  if (it == ids_.end() || *it != id) return std::nullopt;
  return static_cast<Position>(it - ids_.begin());
}

ScoreRecord QualityIndex::record(Position p) const {
  return {SampleId(ids_[p]), sim_[p], loss_[p], tokens_[p], tasks_[p]};
}

const SampleRecord* QualityIndex::sample(Position p) const noexcept {
  return samples_.empty() ? nullptr : &samples_[p];
}

QualityIndex load_index(const fs::path& scores,
                        const std::optional<fs::path>& dataset, JoinMode mode,
                        LoadOptions options) {
  auto score_records = load_scores(scores, options);
  if (!dataset) return QualityIndex::build(std::move(score_records));
  auto samples = load_dataset(*dataset, options);
  if (samples.empty()) throw DataError(dataset->string() + ": no records");
  return QualityIndex::build(std::move(score_records), std::move(samples), mode);
}

std::string render_manifest(const SubsetManifest& m) {
  json header;
  header["version"] = kManifestVersion;
  header["strategy"] = m.strategy();
  header["params"] = json::object();
  for (const auto& [k, v] : m.params()) header["params"][k] = v;
  header["source_count"] = m.source_count();
  std::string out = header.dump();
  out += '\n';
  for (const auto& id : m.ids()) {
    out += id;
    out += '\n';
  }
  return out;
}

void write_manifest(const SubsetManifest& manifest, const fs::path& path) {
  write_lines_atomically(path, [&](std::ostream& out) {
    out << render_manifest(manifest);
  });
}

SubsetManifest read_manifest(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::string line;
  std::getline(in, line);
  const json header = json::parse(line, nullptr, false);
  if (header.is_discarded() || !header.is_object() || !header.contains("version")) {
    throw DataError(path.string() + ": missing manifest header (version tag)");
  }
  if (header["version"] != kManifestVersion) {
    throw DataError(path.string() + ": unknown manifest version " +
                    header["version"].dump());
  }
  try {
    Params params;
    for (const auto& [k, v] : header.at("params").items()) {
      params[k] = v.get<std::string>();
    }
    const std::string strategy = header.at("strategy").get<std::string>();
    const auto source_count = header.at("source_count").get<std::size_t>();
    std::vector<std::string> ids;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      ids.push_back(std::move(line));
    }
    return SubsetManifest(std::move(ids), strategy, std::move(params), source_count);
  } catch (const json::exception& e) {
    throw DataError(path.string() + ": bad manifest header: " + e.what());
  } catch (const std::logic_error& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

void export_subset_dataset(const SubsetManifest& manifest,
                           DatasetReader& samples, const fs::path& out) {
  std::unordered_map<std::string_view, std::size_t> slot;
  slot.reserve(manifest.size());
  for (std::size_t i = 0; i < manifest.size(); ++i) slot.emplace(manifest.ids()[i], i);

  std::vector<std::optional<SampleRecord>> picked(manifest.size());
  while (auto rec = samples.next()) {
    auto it = slot.find(rec->id.str());
    if (it != slot.end() && !picked[it->second]) picked[it->second] = std::move(*rec);
  }
  std::vector<std::string> missing;
  for (std::size_t i = 0; i < picked.size(); ++i) {
    if (!picked[i]) missing.push_back(manifest.ids()[i]);
  }
  if (!missing.empty()) {
    throw DataError("manifest id(s) missing from dataset: " + join_ids(missing));
  }
  write_lines_atomically(out, [&](std::ostream& os) {
    for (const auto& rec : picked) os << dump_sample_line(*rec) << '\n';
  });
}

AtomicFile::AtomicFile(fs::path path)
    : path_(std::move(path)), tmp_(path_.string() + ".partial") {
  out_.open(tmp_, std::ios::binary | std::ios::trunc);
  if (!out_) throw DataError("cannot write " + path_.string());
}

AtomicFile::AtomicFile(AtomicFile&& other) noexcept
    : path_(std::move(other.path_)),
      tmp_(std::move(other.tmp_)),
      out_(std::move(other.out_)),
      done_(other.done_) {
  other.done_ = true;
}

AtomicFile::~AtomicFile() {
  if (done_) return;
  out_.close();
  std::error_code ec;
  fs::remove(tmp_, ec);
}

void AtomicFile::commit() {
  out_.flush();
  if (!out_) throw DataError("write failure on " + path_.string());
  out_.close();
  std::error_code ec;
  fs::rename(tmp_, path_, ec);
  if (ec) throw DataError("cannot rename onto " + path_.string() + ": " + ec.message());
  done_ = true;
}

}  // namespace curate
