#include "phonodiverge/pitch.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "phonodiverge/error.hpp"

namespace phonodiverge::pitch {
namespace {

struct YinPlan {
  long window = 0;
  long hop = 0;
  long tau_min = 0;
  long tau_max = 0;
  long span = 0;
  long frames = 0;
};

YinPlan plan_frames(size_t n_samples, double sample_rate, const YinConfig& cfg) {
  if (n_samples == 0) throw ValidationError("extract_f0: empty signal");
  if (!(sample_rate >= 8000.0)) throw ValidationError("extract_f0: sample rate must be >= 8000 Hz");
  if (!(cfg.f0_min > 0.0) || !(cfg.f0_min < cfg.f0_max)) {
    throw ValidationError("extract_f0: need 0 < f0_min < f0_max");
  }
  if (!(cfg.window > 0.0) || !(cfg.hop > 0.0)) {
    throw ValidationError("extract_f0: window and hop must be positive");
  }
  if (!(cfg.threshold > 0.0 && cfg.threshold < 1.0)) {
    throw ValidationError("extract_f0: threshold must lie in (0, 1)");
  }
  YinPlan p;
  p.window = std::max(1L, std::lround(cfg.window * sample_rate));
  p.hop = std::max(1L, std::lround(cfg.hop * sample_rate));
  p.tau_min = std::max(2L, static_cast<long>(std::floor(sample_rate / cfg.f0_max)));
  p.tau_max = static_cast<long>(std::ceil(sample_rate / cfg.f0_min));
  // One extra lag so the parabola around tau_max has a right neighbour.
  p.span = p.window + p.tau_max + 1;
  p.frames = static_cast<long>(n_samples) / p.hop + 1;
  return p;
}

F0Frame analyze_frame(std::span<const double> x, double sample_rate, const YinConfig& cfg,
                      const YinPlan& p, long k, std::vector<double>& buf,
                      std::vector<double>& cmnd) {
  const long n = static_cast<long>(x.size());
  const long start = k * p.hop - p.span / 2;
  buf.assign(static_cast<size_t>(p.span), 0.0);
  for (long j = 0; j < p.span; ++j) {
    const long s = start + j;
    if (s >= 0 && s < n) buf[static_cast<size_t>(j)] = x[static_cast<size_t>(s)];
  }

  cmnd.assign(static_cast<size_t>(p.tau_max + 2), 1.0);
  double running = 0.0;
  for (long tau = 1; tau <= p.tau_max + 1; ++tau) {
    double d = 0.0;
    for (long j = 0; j < p.window; ++j) {
      const double diff = buf[static_cast<size_t>(j)] - buf[static_cast<size_t>(j + tau)];
      d += diff * diff;
    }
    running += d;
    cmnd[static_cast<size_t>(tau)] = running > 0.0 ? d * static_cast<double>(tau) / running : 1.0;
  }

  F0Frame frame;
  frame.time = static_cast<double>(k * p.hop) / sample_rate;
  long best = -1;
  for (long tau = p.tau_min; tau <= p.tau_max; ++tau) {
    if (cmnd[static_cast<size_t>(tau)] < cfg.threshold) {
      while (tau + 1 <= p.tau_max &&
             cmnd[static_cast<size_t>(tau + 1)] < cmnd[static_cast<size_t>(tau)]) {
        ++tau;
      }
      best = tau;
      break;
    }
  }
  if (best < 0) {
    double lowest = 1.0;
    for (long tau = p.tau_min; tau <= p.tau_max; ++tau) {
      lowest = std::min(lowest, cmnd[static_cast<size_t>(tau)]);
    }
    frame.confidence = std::clamp(1.0 - lowest, 0.0, 1.0);
    return frame;
  }

  const double a = cmnd[static_cast<size_t>(best - 1)];
  const double b = cmnd[static_cast<size_t>(best)];
  const double c = cmnd[static_cast<size_t>(best + 1)];
  double refined = static_cast<double>(best);
  const double denom = a - 2.0 * b + c;
  if (denom > 0.0) {
    const double shift = 0.5 * (a - c) / denom;
    if (std::fabs(shift) < 1.0) refined += shift;
  }
  const double f0 = sample_rate / refined;
  frame.confidence = std::clamp(1.0 - b, 0.0, 1.0);
  if (f0 < cfg.f0_min || f0 > cfg.f0_max) return frame;
  frame.f0 = f0;
  frame.voiced = true;
  return frame;
}

void check_finite(std::span<const double> samples) {
  for (double s : samples) {
    if (!std::isfinite(s)) throw ValidationError("extract_f0: non-finite sample");
  }
}

}  // namespace

std::vector<F0Frame> extract_f0_serial(std::span<const double> samples, double sample_rate,
                                       const YinConfig& cfg) {
  const YinPlan p = plan_frames(samples.size(), sample_rate, cfg);
  check_finite(samples);
  std::vector<F0Frame> out(static_cast<size_t>(p.frames));
  std::vector<double> buf;
  std::vector<double> cmnd;
  for (long k = 0; k < p.frames; ++k) {
    out[static_cast<size_t>(k)] = analyze_frame(samples, sample_rate, cfg, p, k, buf, cmnd);
  }
  return out;
}

std::vector<F0Frame> extract_f0(std::span<const double> samples, double sample_rate,
                                const YinConfig& cfg) {
  const YinPlan p = plan_frames(samples.size(), sample_rate, cfg);
  check_finite(samples);
  std::vector<F0Frame> out(static_cast<size_t>(p.frames));
#pragma omp parallel
  {
    std::vector<double> buf;
    std::vector<double> cmnd;
#pragma omp for schedule(static)
    for (long k = 0; k < p.frames; ++k) {
      out[static_cast<size_t>(k)] = analyze_frame(samples, sample_rate, cfg, p, k, buf, cmnd);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------

namespace {

uint32_t le32(std::string_view b, size_t off) {
  return static_cast<uint32_t>(static_cast<unsigned char>(b[off])) |
         static_cast<uint32_t>(static_cast<unsigned char>(b[off + 1])) << 8 |
         static_cast<uint32_t>(static_cast<unsigned char>(b[off + 2])) << 16 |
         static_cast<uint32_t>(static_cast<unsigned char>(b[off + 3])) << 24;
}

uint16_t le16(std::string_view b, size_t off) {
  return static_cast<uint16_t>(static_cast<unsigned char>(b[off]) |
                               static_cast<unsigned char>(b[off + 1]) << 8);
}

void put32(std::string& s, uint32_t v) {
  for (int k = 0; k < 4; ++k) s.push_back(static_cast<char>((v >> (8 * k)) & 0xFF));
}

void put16(std::string& s, uint16_t v) {
  s.push_back(static_cast<char>(v & 0xFF));
  s.push_back(static_cast<char>(v >> 8));
}

}  // namespace

Wave decode_wav(std::string_view bytes) {
  if (bytes.size() < 12 || bytes.substr(0, 4) != "RIFF" || bytes.substr(8, 4) != "WAVE") {
    throw ValidationError("not a RIFF/WAVE file");
  }
  Wave wave;
  bool have_fmt = false;
  size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const std::string_view id = bytes.substr(pos, 4);
    const uint32_t size = le32(bytes, pos + 4);
    const size_t body = pos + 8;
    if (id == "fmt ") {
      if (size < 16 || body + size > bytes.size()) throw ValidationError("WAV: malformed fmt chunk");
      const uint16_t format = le16(bytes, body);
      const uint16_t channels = le16(bytes, body + 2);
      wave.sample_rate = static_cast<int>(le32(bytes, body + 4));
      const uint16_t bits = le16(bytes, body + 14);
      if (format != 1 && format != 0xFFFE) throw ValidationError("WAV: only PCM is supported");
      if (channels != 1) throw ValidationError("WAV: only mono is supported");
      if (bits != 16) throw ValidationError("WAV: only 16-bit samples are supported");
      have_fmt = true;
    } else if (id == "data") {
      if (!have_fmt) throw ValidationError("WAV: data chunk before fmt chunk");
      if (body + size > bytes.size()) throw ValidationError("WAV: truncated data chunk");
      wave.samples.resize(size / 2);
      for (size_t k = 0; k < wave.samples.size(); ++k) {
        wave.samples[k] = static_cast<int16_t>(le16(bytes, body + 2 * k)) / 32768.0;
      }
      return wave;
    }
    pos = body + size + (size & 1);
  }
  throw ValidationError("WAV: no data chunk");
}

Wave read_wav(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  try {
    return decode_wav(buf.str());
  } catch (const ValidationError& e) {
    throw ValidationError(path + ": " + e.what());
  }
}

void write_wav(const Wave& wave, const std::string& path) {
  const auto n = static_cast<uint32_t>(wave.samples.size());
  std::string out;
  out.append("RIFF");
  put32(out, 36 + 2 * n);
  out.append("WAVEfmt ");
  put32(out, 16);
  put16(out, 1);
  put16(out, 1);
  put32(out, static_cast<uint32_t>(wave.sample_rate));
  put32(out, static_cast<uint32_t>(wave.sample_rate) * 2);
  put16(out, 2);
  put16(out, 16);
  out.append("data");
  put32(out, 2 * n);
  for (double s : wave.samples) {
    const long v = std::clamp(std::lround(s * 32768.0), -32768L, 32767L);
    put16(out, static_cast<uint16_t>(static_cast<int16_t>(v)));
  }
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot write '" + path + "'");
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!f) throw IoError("write failure on '" + path + "'");
}

std::string format_contour(const std::vector<F0Frame>& frames) {
  std::string out = "time,f0,confidence\n";
  char line[96];
  for (const auto& f : frames) {
    std::snprintf(line, sizeof line, "%.4f,%.3f,%.4f\n", f.time, f.voiced ? f.f0 : 0.0,
                  f.confidence);
    out += line;
  }
  return out;
}

}  // namespace phonodiverge::pitch
