#pragma once

#include <span>
#include <string>
#include <vector>

namespace phonodiverge::pitch {

struct F0Frame {
  double time = 0.0;      // frame center, seconds
  double f0 = 0.0;        // Hz; 0 when unvoiced
  bool voiced = false;
  double confidence = 0.0;

  bool operator==(const F0Frame&) const = default;
};

struct YinConfig {
  double f0_min = 60.0;
  double f0_max = 400.0;
  double window = 0.040;  // integration window, seconds
  double hop = 0.010;
  double threshold = 0.1;
};

/// YIN: difference function, cumulative mean normalized difference, first
/// dip below threshold (followed to its local minimum), parabolic lag
/// refinement. Frame k is centered on sample k*hop; samples outside the signal
/// read as zero. Parallel over frames.
std::vector<F0Frame> extract_f0(std::span<const double> samples, double sample_rate,
                                const YinConfig& cfg = {});
std::vector<F0Frame> extract_f0_serial(std::span<const double> samples, double sample_rate,
                                       const YinConfig& cfg = {});

struct Wave {
  int sample_rate = 16000;
  std::vector<double> samples;  // mono, scaled to [-1, 1)
};

/// RIFF/WAVE reader, 16-bit PCM mono only.
Wave read_wav(const std::string& path);
Wave decode_wav(std::string_view bytes);
void write_wav(const Wave& wave, const std::string& path);

/// "time,f0,confidence" rows; unvoiced frames carry f0 = 0.
std::string format_contour(const std::vector<F0Frame>& frames);

}  // namespace phonodiverge::pitch
