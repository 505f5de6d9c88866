#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "phonodiverge/textgrid.hpp"

namespace phonodiverge::corpus {

enum class Label { kReal, kFake };
enum class System { kNone, kEvc1, kEvc2 };
enum class Emotion { kAngry, kHappy, kSad, kSurprise };

inline constexpr Emotion kAllEmotions[] = {Emotion::kAngry, Emotion::kHappy, Emotion::kSad,
                                           Emotion::kSurprise};
inline constexpr System kFakeSystems[] = {System::kEvc1, System::kEvc2};

std::string_view to_string(Label v);
std::string_view to_string(System v);
std::string_view to_string(Emotion v);
/// Display form used in table headers: "Angry", "Surprise".
std::string_view display_name(Emotion v);
Label parse_label(std::string_view s);
System parse_system(std::string_view s);
Emotion parse_emotion(std::string_view s);

struct UtteranceRecord {
  std::string utt_id;
  std::string audio_path;
  std::string textgrid_path;
  std::string emb_path;
  Label label = Label::kReal;
  System system = System::kNone;
  Emotion emotion = Emotion::kAngry;
  std::string speaker;
};

/// Line-delimited JSON manifest. Relative paths are resolved against the
/// manifest's directory. Blank lines are skipped.
std::vector<UtteranceRecord> read_manifest(const std::string& path);
std::vector<UtteranceRecord> parse_manifest(std::string_view text, const std::string& base_dir);
void write_manifest(const std::vector<UtteranceRecord>& records, const std::string& path);

// ---------------------------------------------------------------------------
// FEMB frame-embedding files: "FEMB", u32 version, u32 T, u32 d, f32 stride,
// then T*d little-endian f32 values row-major.

inline constexpr uint32_t kFembVersion = 1;
inline constexpr size_t kFembHeaderBytes = 20;

class FrameMatrix {
 public:
  FrameMatrix() = default;
  FrameMatrix(uint32_t frames, uint32_t dim, float stride, std::vector<float> values,
              std::string utt_id = {});

  uint32_t frames() const { return frames_; }
  uint32_t dim() const { return dim_; }
  float stride() const { return stride_; }
  const std::string& utt_id() const { return utt_id_; }
  const std::vector<float>& values() const { return values_; }

  std::span<const float> row(uint32_t t) const {
    return {values_.data() + static_cast<size_t>(t) * dim_, dim_};
  }

  bool operator==(const FrameMatrix&) const = default;

 private:
  uint32_t frames_ = 0;
  uint32_t dim_ = 0;
  float stride_ = 0.0f;
  std::vector<float> values_;
  std::string utt_id_;
};

std::string encode_frame_matrix(const FrameMatrix& fm);
FrameMatrix decode_frame_matrix(std::string_view bytes, std::string utt_id = {});
FrameMatrix read_frame_matrix(const std::string& path, std::string utt_id = {});
void write_frame_matrix(const FrameMatrix& fm, const std::string& path);

// ---------------------------------------------------------------------------

/// Half-open frame index range [begin, end).
struct FrameRange {
  uint32_t begin = 0;
  uint32_t end = 0;

  uint32_t size() const { return end - begin; }
  bool empty() const { return end <= begin; }
  bool operator==(const FrameRange&) const = default;
};

/// Frames whose span [f*stride, (f+1)*stride) overlaps [xmin, xmax), clipped
/// to [0, frames). Falls back to the single in-range frame nearest the
/// interval midpoint when nothing overlaps.
FrameRange frames_for_interval(const textgrid::Interval& interval, double stride, uint32_t frames);

/// Arithmetic mean of the selected rows, accumulated in double.
std::vector<double> pool_segment(const FrameMatrix& fm, FrameRange range);

struct SegmentEmbedding {
  textgrid::PhonemeLabel phoneme;
  std::vector<double> z;
  std::string utt_id;
  size_t interval_index = 0;
  Emotion emotion = Emotion::kAngry;
  Label label = Label::kReal;
  System system = System::kNone;
  std::string speaker;
  double duration = 0.0;
};

struct CellKey {
  std::string phoneme;
  Emotion emotion = Emotion::kAngry;
  System system = System::kEvc1;
  /// Empty when speakers are pooled.
  std::string speaker;

  auto operator<=>(const CellKey&) const = default;
  bool operator==(const CellKey&) const = default;
};

/// "EVC1-Angry/AA", with "@speaker" appended when set.
std::string describe(const CellKey& key);

struct Cell {
  CellKey key;
  std::vector<std::vector<double>> real;
  std::vector<std::vector<double>> fake;
};

struct Exclusion {
  CellKey key;
  size_t n_real = 0;
  size_t n_fake = 0;
};

struct CellOptions {
  std::string tier_name = "phones";
  textgrid::SilenceSet silence = textgrid::default_silence_labels();
  size_t min_count = 20;
  bool per_speaker = false;
  int jobs = 1;
};

struct CellSet {
  std::map<CellKey, Cell> cells;
  std::vector<Exclusion> excluded;
  size_t total_segments = 0;
};

/// Segments of one utterance, in interval order.
std::vector<SegmentEmbedding> extract_segments(const UtteranceRecord& record,
                                               const CellOptions& options);

/// Per-utterance segment extraction, OpenMP-parallel over utterances. Output
/// order follows the input order regardless of thread count.
std::vector<std::vector<SegmentEmbedding>> extract_all_segments(
    std::span<const UtteranceRecord> records, const CellOptions& options);
std::vector<std::vector<SegmentEmbedding>> extract_all_segments_serial(
    std::span<const UtteranceRecord> records, const CellOptions& options);

/// Groups segments into (phoneme, emotion, system) cells. REAL segments of an
/// emotion feed the cells of every fake system. Cells with fewer than
/// min_count samples on either side are moved to the exclusion list.
CellSet build_cells(std::vector<UtteranceRecord> records, const CellOptions& options);

}  // namespace phonodiverge::corpus
