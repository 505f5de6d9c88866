#include "phonodiverge/corpus.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <exception>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <tuple>

#include <json.hpp>

#include "phonodiverge/error.hpp"

namespace phonodiverge::corpus {
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string upper(std::string_view s) {
  std::string out(s);
  for (char& c : out) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  return out;
}

void put_u32(std::string& out, uint32_t v) {
  for (int k = 0; k < 4; ++k) out.push_back(static_cast<char>((v >> (8 * k)) & 0xFF));
}

uint32_t get_u32(std::string_view bytes, size_t offset) {
  uint32_t v = 0;
  for (int k = 0; k < 4; ++k) {
    v |= static_cast<uint32_t>(static_cast<unsigned char>(bytes[offset + k])) << (8 * k);
  }
  return v;
}

void put_f32(std::string& out, float f) { put_u32(out, std::bit_cast<uint32_t>(f)); }
float get_f32(std::string_view bytes, size_t offset) {
  return std::bit_cast<float>(get_u32(bytes, offset));
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  if (in.bad()) throw IoError("read failure on '" + path + "'");
  return buf.str();
}

std::string resolve(const std::string& base_dir, const std::string& p) {
  if (p.empty() || base_dir.empty() || fs::path(p).is_absolute()) return p;
  return (fs::path(base_dir) / p).lexically_normal().string();
}

}  // namespace

std::string_view to_string(Label v) { return v == Label::kReal ? "REAL" : "FAKE"; }

std::string_view to_string(System v) {
  switch (v) {
    case System::kNone: return "NONE";
    case System::kEvc1: return "EVC1";
    case System::kEvc2: return "EVC2";
  }
  return "?";
}

std::string_view to_string(Emotion v) {
  switch (v) {
    case Emotion::kAngry: return "ANGRY";
    case Emotion::kHappy: return "HAPPY";
    case Emotion::kSad: return "SAD";
    case Emotion::kSurprise: return "SURPRISE";
  }
  return "?";
}

std::string_view display_name(Emotion v) {
  switch (v) {
    case Emotion::kAngry: return "Angry";
    case Emotion::kHappy: return "Happy";
    case Emotion::kSad: return "Sad";
    case Emotion::kSurprise: return "Surprise";
  }
  return "?";
}

Label parse_label(std::string_view s) {
  const std::string u = upper(s);
  if (u == "REAL") return Label::kReal;
  if (u == "FAKE") return Label::kFake;
  throw ValidationError("unknown label '" + std::string(s) + "'");
}

System parse_system(std::string_view s) {
  const std::string u = upper(s);
  if (u == "NONE") return System::kNone;
  if (u == "EVC1") return System::kEvc1;
  if (u == "EVC2") return System::kEvc2;
  throw ValidationError("unknown system '" + std::string(s) + "'");
}

Emotion parse_emotion(std::string_view s) {
  const std::string u = upper(s);
  for (Emotion e : kAllEmotions) {
    if (u == to_string(e)) return e;
  }
  throw ValidationError("unknown emotion '" + std::string(s) + "'");
}

std::vector<UtteranceRecord> parse_manifest(std::string_view text, const std::string& base_dir) {
  static const std::set<std::string> kFields = {"utt_id",   "audio_path", "textgrid_path",
                                                "emb_path", "label",      "system",
                                                "emotion",  "speaker"};
  std::vector<UtteranceRecord> records;
  std::set<std::tuple<std::string, Label, System, Emotion>> seen;
  std::istringstream in{std::string(text)};
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    auto fail = [&](const std::string& msg) -> ParseError { return ParseError(msg, line_no); };

    json obj;
    try {
      obj = json::parse(line);
    } catch (const json::parse_error& e) {
      throw fail(std::string("invalid JSON: ") + e.what());
    }
    if (!obj.is_object()) throw fail("manifest record must be a JSON object");
    for (const auto& [key, value] : obj.items()) {
      if (!kFields.count(key)) throw fail("unknown field '" + key + "'");
      if (!value.is_string()) throw fail("field '" + key + "' must be a string");
    }
    for (const auto& field : kFields) {
      if (!obj.contains(field)) throw fail("missing field '" + field + "'");
    }

    UtteranceRecord r;
    try {
      r.utt_id = obj["utt_id"].get<std::string>();
      r.audio_path = resolve(base_dir, obj["audio_path"].get<std::string>());
      r.textgrid_path = resolve(base_dir, obj["textgrid_path"].get<std::string>());
      r.emb_path = resolve(base_dir, obj["emb_path"].get<std::string>());
      r.label = parse_label(obj["label"].get<std::string>());
      r.system = parse_system(obj["system"].get<std::string>());
      r.emotion = parse_emotion(obj["emotion"].get<std::string>());
      r.speaker = obj["speaker"].get<std::string>();
    } catch (const ParseError&) {
      throw;
    } catch (const ValidationError& e) {
      throw fail(e.what());
    }
    if (r.utt_id.empty()) throw fail("empty utt_id");
    if ((r.label == Label::kReal) != (r.system == System::kNone)) {
      throw fail("label " + std::string(to_string(r.label)) + " is inconsistent with system " +
                 std::string(to_string(r.system)) + " (REAL requires NONE)");
    }
    if (!seen.emplace(r.utt_id, r.label, r.system, r.emotion).second) {
      throw fail("duplicate utt_id '" + r.utt_id + "' within the same label/system/emotion");
    }
    records.push_back(std::move(r));
  }
  return records;
}

std::vector<UtteranceRecord> read_manifest(const std::string& path) {
  const std::string text = read_file(path);
  try {
    return parse_manifest(text, fs::path(path).parent_path().string());
  } catch (const ParseError& e) {
    throw e.in(path);
  }
}

void write_manifest(const std::vector<UtteranceRecord>& records, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write manifest '" + path + "'");
  for (const auto& r : records) {
    json obj = {{"utt_id", r.utt_id},
                {"audio_path", r.audio_path},
                {"textgrid_path", r.textgrid_path},
                {"emb_path", r.emb_path},
                {"label", to_string(r.label)},
                {"system", to_string(r.system)},
                {"emotion", to_string(r.emotion)},
                {"speaker", r.speaker}};
    out << obj.dump() << '\n';
  }
  if (!out) throw IoError("write failure on '" + path + "'");
}

// ---------------------------------------------------------------------------

FrameMatrix::FrameMatrix(uint32_t frames, uint32_t dim, float stride, std::vector<float> values,
                         std::string utt_id)
    : frames_(frames), dim_(dim), stride_(stride), values_(std::move(values)),
      utt_id_(std::move(utt_id)) {
  if (frames_ < 1) throw ValidationError("frame matrix needs T >= 1");
  if (dim_ < 1) throw ValidationError("frame matrix needs d >= 1");
  if (!(stride_ > 0.0f) || !std::isfinite(stride_)) {
    throw ValidationError("frame stride must be positive and finite");
  }
  if (values_.size() != static_cast<size_t>(frames_) * dim_) {
    throw ValidationError("frame matrix payload size does not match T*d");
  }
  for (float v : values_) {
    if (!std::isfinite(v)) throw ValidationError("non-finite value in frame matrix");
  }
}

std::string encode_frame_matrix(const FrameMatrix& fm) {
  std::string out;
  out.reserve(kFembHeaderBytes + fm.values().size() * 4);
  out.append("FEMB", 4);
  put_u32(out, kFembVersion);
  put_u32(out, fm.frames());
  put_u32(out, fm.dim());
  put_f32(out, fm.stride());
  for (float v : fm.values()) put_f32(out, v);
  return out;
}

FrameMatrix decode_frame_matrix(std::string_view bytes, std::string utt_id) {
  if (bytes.size() < kFembHeaderBytes) throw ValidationError("FEMB: truncated header");
  if (bytes.substr(0, 4) != "FEMB") throw ValidationError("FEMB: bad magic");
  const uint32_t version = get_u32(bytes, 4);
  if (version != kFembVersion) {
    throw ValidationError("FEMB: unsupported version " + std::to_string(version));
  }
  const uint32_t frames = get_u32(bytes, 8);
  const uint32_t dim = get_u32(bytes, 12);
  const float stride = get_f32(bytes, 16);
  const uint64_t payload = static_cast<uint64_t>(frames) * dim * 4;
  const uint64_t available = bytes.size() - kFembHeaderBytes;
  if (available < payload) {
    throw ValidationError("FEMB: truncated payload (" + std::to_string(available) + " of " +
                          std::to_string(payload) + " bytes)");
  }
  if (available > payload) throw ValidationError("FEMB: trailing bytes after payload");

  std::vector<float> values(static_cast<size_t>(frames) * dim);
  for (size_t k = 0; k < values.size(); ++k) {
    values[k] = get_f32(bytes, kFembHeaderBytes + 4 * k);
  }
  try {
    return FrameMatrix(frames, dim, stride, std::move(values), std::move(utt_id));
  } catch (const ValidationError& e) {
    throw ValidationError(std::string("FEMB: ") + e.what());
  }
}

FrameMatrix read_frame_matrix(const std::string& path, std::string utt_id) {
  const std::string bytes = read_file(path);
  try {
    return decode_frame_matrix(bytes, std::move(utt_id));
  } catch (const ValidationError& e) {
    throw ValidationError(path + ": " + e.what());
  }
}

void write_frame_matrix(const FrameMatrix& fm, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write '" + path + "'");
  const std::string bytes = encode_frame_matrix(fm);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failure on '" + path + "'");
}

// ---------------------------------------------------------------------------

FrameRange frames_for_interval(const textgrid::Interval& interval, double stride,
                               uint32_t frames) {
  const int64_t last = static_cast<int64_t>(frames) - 1;
  const double xmin = interval.xmin;
  const double xmax = interval.xmax;
  auto overlaps = [&](int64_t f) {
    return static_cast<double>(f) * stride < xmax && static_cast<double>(f + 1) * stride > xmin;
  };
  auto clamp_index = [&](double v, int64_t lo, int64_t hi) {
    if (!(v >= static_cast<double>(lo))) return lo;
    if (v >= static_cast<double>(hi)) return hi;
    return static_cast<int64_t>(v);
  };

  // Division gives the candidate bounds; the predicate fixes rounding.
  int64_t lo = clamp_index(std::floor(xmin / stride), 0, last + 1);
  int64_t hi = clamp_index(std::ceil(xmax / stride) - 1.0, -1, last);
  while (lo > 0 && overlaps(lo - 1)) --lo;
  while (lo <= hi && !overlaps(lo)) ++lo;
  while (hi < last && overlaps(hi + 1)) ++hi;
  while (hi >= lo && !overlaps(hi)) --hi;
  if (lo <= hi) return {static_cast<uint32_t>(lo), static_cast<uint32_t>(hi + 1)};

  const double mid = 0.5 * (xmin + xmax);
  const int64_t nearest = clamp_index(std::floor(mid / stride), 0, last);
  return {static_cast<uint32_t>(nearest), static_cast<uint32_t>(nearest + 1)};
}

std::vector<double> pool_segment(const FrameMatrix& fm, FrameRange range) {
  if (range.empty()) throw ValidationError("pool_segment: empty frame range");
  if (range.end > fm.frames()) throw ValidationError("pool_segment: frame range exceeds T");
  std::vector<double> z(fm.dim(), 0.0);
  for (uint32_t t = range.begin; t < range.end; ++t) {
    const auto row = fm.row(t);
    for (uint32_t k = 0; k < fm.dim(); ++k) z[k] += row[k];
  }
  const double n = range.size();
  for (double& v : z) v /= n;
  return z;
}

std::string describe(const CellKey& key) {
  std::string s = std::string(to_string(key.system)) + "-" +
                  std::string(display_name(key.emotion)) + "/" + key.phoneme;
  if (!key.speaker.empty()) s += "@" + key.speaker;
  return s;
}

std::vector<SegmentEmbedding> extract_segments(const UtteranceRecord& record,
                                               const CellOptions& options) {
  try {
    const auto tiers = textgrid::read_textgrid(record.textgrid_path);
    const FrameMatrix fm = read_frame_matrix(record.emb_path, record.utt_id);
    const auto phones = textgrid::phone_intervals(tiers, options.tier_name, options.silence);

    std::vector<SegmentEmbedding> out;
    out.reserve(phones.size());
    for (size_t k = 0; k < phones.size(); ++k) {
      const auto& [label, iv] = phones[k];
      const FrameRange range = frames_for_interval(iv, fm.stride(), fm.frames());
      SegmentEmbedding seg;
      seg.phoneme = label;
      seg.z = pool_segment(fm, range);
      seg.utt_id = record.utt_id;
      seg.interval_index = k;
      seg.emotion = record.emotion;
      seg.label = record.label;
      seg.system = record.system;
      seg.speaker = record.speaker;
      seg.duration = iv.xmax - iv.xmin;
      out.push_back(std::move(seg));
    }
    return out;
  } catch (const IoError& e) {
    throw IoError("utterance '" + record.utt_id + "': " + e.what());
  } catch (const ValidationError& e) {
    throw ValidationError("utterance '" + record.utt_id + "': " + e.what());
  }
}

std::vector<std::vector<SegmentEmbedding>> extract_all_segments_serial(
    std::span<const UtteranceRecord> records, const CellOptions& options) {
  std::vector<std::vector<SegmentEmbedding>> out;
  out.reserve(records.size());
  for (const auto& r : records) out.push_back(extract_segments(r, options));
  return out;
}

std::vector<std::vector<SegmentEmbedding>> extract_all_segments(
    std::span<const UtteranceRecord> records, const CellOptions& options) {
  const auto n = static_cast<int64_t>(records.size());
  std::vector<std::vector<SegmentEmbedding>> out(records.size());
  std::vector<std::exception_ptr> errors(records.size());
  const int jobs = std::max(1, options.jobs);

#pragma omp parallel for schedule(dynamic) num_threads(jobs)
  for (int64_t i = 0; i < n; ++i) {
    try {
      out[i] = extract_segments(records[i], options);
    } catch (...) {
      errors[i] = std::current_exception();
    }
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return out;
}

CellSet build_cells(std::vector<UtteranceRecord> records, const CellOptions& options) {
  std::sort(records.begin(), records.end(), [](const auto& a, const auto& b) {
    return std::tie(a.utt_id, a.label, a.system, a.emotion) <
           std::tie(b.utt_id, b.label, b.system, b.emotion);
  });
  const auto per_utt = options.jobs > 1 ? extract_all_segments(records, options)
                                        : extract_all_segments_serial(records, options);

  using RealKey = std::tuple<std::string, Emotion, std::string>;
  std::map<RealKey, std::vector<std::vector<double>>> real;
  std::map<CellKey, std::vector<std::vector<double>>> fake;
  std::set<System> systems;
  CellSet result;
  size_t dim = 0;

  for (size_t i = 0; i < records.size(); ++i) {
    if (records[i].label == Label::kFake) systems.insert(records[i].system);
    for (const auto& seg : per_utt[i]) {
      if (dim == 0) dim = seg.z.size();
      if (seg.z.size() != dim) {
        throw ValidationError("utterance '" + seg.utt_id + "': embedding dimension " +
                              std::to_string(seg.z.size()) + " differs from corpus dimension " +
                              std::to_string(dim));
      }
      const std::string speaker = options.per_speaker ? seg.speaker : std::string();
      if (seg.label == Label::kReal) {
        real[{seg.phoneme.value, seg.emotion, speaker}].push_back(seg.z);
      } else {
        fake[CellKey{seg.phoneme.value, seg.emotion, seg.system, speaker}].push_back(seg.z);
      }
      ++result.total_segments;
    }
  }
  if (systems.empty()) systems = {System::kEvc1, System::kEvc2};

  std::set<CellKey> keys;
  for (const auto& [key, _] : fake) keys.insert(key);
  for (const auto& [rk, _] : real) {
    for (System s : systems) {
      keys.insert(CellKey{std::get<0>(rk), std::get<1>(rk), s, std::get<2>(rk)});
    }
  }

  for (const auto& key : keys) {
    auto r_it = real.find({key.phoneme, key.emotion, key.speaker});
    auto f_it = fake.find(key);
    const size_t n_real = r_it == real.end() ? 0 : r_it->second.size();
    const size_t n_fake = f_it == fake.end() ? 0 : f_it->second.size();
    if (std::min(n_real, n_fake) < options.min_count || n_real == 0 || n_fake == 0) {
      result.excluded.push_back({key, n_real, n_fake});
      continue;
    }
    Cell cell{key, r_it->second, f_it->second};
    result.cells.emplace(key, std::move(cell));
  }
  return result;
}

}  // namespace phonodiverge::corpus
