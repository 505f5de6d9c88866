#pragma once

#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace phonodiverge::textgrid {

struct Interval {
  std::string label;
  double xmin = 0.0;
  double xmax = 0.0;

  bool operator==(const Interval&) const = default;
};

struct Tier {
  std::string name;
  double tmin = 0.0;
  double tmax = 0.0;
  std::vector<Interval> intervals;

  bool operator==(const Tier&) const = default;
};

/// Stress-free uppercase ARPAbet symbol. Silence is the empty value, which
/// keeps normalize_label idempotent on `value`.
struct PhonemeLabel {
  std::string value;

  bool is_silence() const { return value.empty(); }
  bool operator==(const PhonemeLabel&) const = default;
  auto operator<=>(const PhonemeLabel&) const = default;
};

/// Labels mapped to silence, compared case-insensitively.
using SilenceSet = std::set<std::string>;
SilenceSet default_silence_labels();

/// Max allowed overlap between consecutive intervals before the tier is
/// rejected as non-monotone.
inline constexpr double kBoundaryTolerance = 1e-6;

/// Parses a Praat TextGrid in long or short text format. Accepts UTF-8 (with
/// or without BOM) and BOM-marked UTF-16 in either byte order. Point tiers are
/// skipped; binary TextGrids are rejected. Throws ParseError with the line.
std::vector<Tier> parse_textgrid(std::string_view bytes);

/// Reads and parses a file; I/O failures throw IoError.
std::vector<Tier> read_textgrid(const std::string& path);

/// Converts UTF-16 (BOM required) to UTF-8; UTF-8 input is returned with any
/// BOM stripped.
std::string decode_text(std::string_view bytes);

PhonemeLabel normalize_label(std::string_view raw,
                             const SilenceSet& silence = default_silence_labels());

/// Non-silence intervals of `tier_name` with normalized labels, file order.
std::vector<std::pair<PhonemeLabel, Interval>> phone_intervals(
    const std::vector<Tier>& tiers, std::string_view tier_name,
    const SilenceSet& silence = default_silence_labels());

}  // namespace phonodiverge::textgrid
