#include "phonodiverge/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <limits>

#include <Eigen/Cholesky>
#include <Eigen/QR>
#include <json.hpp>

#include "phonodiverge/error.hpp"
#include "phonodiverge/phoneset.hpp"
#include "phonodiverge/rng.hpp"

namespace phonodiverge::synth {
namespace fs = std::filesystem;
using nlohmann::json;

ClassDistribution ClassDistribution::isotropic(Eigen::Index dim, double mean, double stddev) {
  return {Eigen::VectorXd::Constant(dim, mean),
          Eigen::MatrixXd::Identity(dim, dim) * (stddev * stddev)};
}

void validate(const SynthSpec& spec) {
  if (spec.phonemes.empty()) throw ValidationError("synth spec has no phonemes");
  if (spec.dim == 0) throw ValidationError("synth spec dim must be >= 1");
  if (!(spec.stride > 0.0f)) throw ValidationError("synth spec stride must be positive");
  if (spec.emotions.empty() || spec.systems.empty() || spec.speakers.empty()) {
    throw ValidationError("synth spec needs at least one emotion, system and speaker");
  }
  for (auto s : spec.systems) {
    if (s == corpus::System::kNone) throw ValidationError("synth spec systems must be EVC1/EVC2");
  }
  if (spec.segments_per_utterance == 0 || spec.frames_per_segment == 0) {
    throw ValidationError("synth spec segment layout counts must be >= 1");
  }
  for (const auto& p : spec.phonemes) {
    if (p.label.empty()) throw ValidationError("synth spec phoneme with empty label");
    if (p.per_class == 0) throw ValidationError("synth spec phoneme '" + p.label + "' has zero count");
    for (const auto* dist : {&p.real, &p.fake}) {
      if (dist->mean.size() != spec.dim || dist->cov.rows() != spec.dim ||
          dist->cov.cols() != spec.dim) {
        throw ValidationError("synth spec phoneme '" + p.label + "' has wrong dimension");
      }
      Eigen::LLT<Eigen::MatrixXd> llt(dist->cov);
      if (llt.info() != Eigen::Success || !dist->cov.isApprox(dist->cov.transpose())) {
        throw ValidationError("synth spec phoneme '" + p.label +
                              "' covariance is not symmetric positive-definite");
      }
    }
  }
}

namespace {

ClassDistribution parse_distribution(const json& j, uint32_t dim, const std::string& where) {
  ClassDistribution d;
  const json& mean = j.at("mean");
  if (mean.is_number()) {
    d.mean = Eigen::VectorXd::Constant(dim, mean.get<double>());
  } else {
    const auto v = mean.get<std::vector<double>>();
    if (v.size() != dim) throw ValidationError(where + ": mean has wrong length");
    d.mean = Eigen::Map<const Eigen::VectorXd>(v.data(), dim);
  }
  if (j.contains("cov")) {
    const auto rows = j.at("cov").get<std::vector<std::vector<double>>>();
    if (rows.size() != dim) throw ValidationError(where + ": cov has wrong shape");
    d.cov.resize(dim, dim);
    for (uint32_t r = 0; r < dim; ++r) {
      if (rows[r].size() != dim) throw ValidationError(where + ": cov has wrong shape");
      for (uint32_t c = 0; c < dim; ++c) d.cov(r, c) = rows[r][c];
    }
  } else {
    const double sd = j.value("std", 1.0);
    d.cov = Eigen::MatrixXd::Identity(dim, dim) * (sd * sd);
  }
  return d;
}

}  // namespace

SynthSpec parse_spec(std::string_view json_text) {
  SynthSpec spec;
  try {
    const json j = json::parse(json_text);
    spec.dim = j.value("dim", 8u);
    spec.stride = j.value("stride", 0.02f);
    spec.seed = j.value("seed", uint64_t{0});
    spec.segments_per_utterance = j.value("segments_per_utterance", size_t{12});
    spec.frames_per_segment = j.value("frames_per_segment", 3u);
    if (j.contains("emotions")) {
      spec.emotions.clear();
      for (const auto& e : j["emotions"]) spec.emotions.push_back(corpus::parse_emotion(e.get<std::string>()));
    }
    if (j.contains("systems")) {
      spec.systems.clear();
      for (const auto& s : j["systems"]) spec.systems.push_back(corpus::parse_system(s.get<std::string>()));
    }
    if (j.contains("speakers")) spec.speakers = j["speakers"].get<std::vector<std::string>>();
    for (const auto& p : j.at("phonemes")) {
      PhonemePlan plan;
      plan.label = p.at("label").get<std::string>();
      plan.per_class = p.at("per_class").get<size_t>();
      plan.real = parse_distribution(p.at("real"), spec.dim, plan.label + ".real");
      plan.fake = parse_distribution(p.at("fake"), spec.dim, plan.label + ".fake");
      spec.phonemes.push_back(std::move(plan));
    }
  } catch (const json::exception& e) {
    throw ValidationError(std::string("synth spec: ") + e.what());
  }
  validate(spec);
  return spec;
}

SynthSpec graded_spec(size_t n_phonemes, uint32_t dim, size_t per_class, double max_gap,
                      uint64_t seed) {
  if (n_phonemes < 2) throw ValidationError("graded spec needs at least 2 phonemes");
  if (n_phonemes > kVowels.size() + kConsonants.size()) {
    throw ValidationError("graded spec supports at most 38 phonemes");
  }
  SynthSpec spec;
  spec.dim = dim;
  spec.seed = seed;
  for (size_t k = 0; k < n_phonemes; ++k) {
    const std::string_view label =
        k < kConsonants.size() ? kConsonants[k] : kVowels[k - kConsonants.size()];
    const double gap = max_gap * static_cast<double>(k) / static_cast<double>(n_phonemes - 1);
    spec.phonemes.push_back({std::string(label), ClassDistribution::isotropic(dim, 0.0, 1.0),
                             ClassDistribution::isotropic(dim, gap, 1.0), per_class});
  }
  return spec;
}

SynthSpec archetype_spec(uint32_t dim, size_t per_class, double moderate_gap, uint64_t seed) {
  SynthSpec spec;
  spec.dim = dim;
  spec.seed = seed;
  const auto base = ClassDistribution::isotropic(dim, 0.0, 1.0);
  spec.phonemes = {
      {"AA", base, base, per_class},
      {"EH", base, ClassDistribution::isotropic(dim, moderate_gap, 1.0), per_class},
      {"SH", base, ClassDistribution::isotropic(dim, 6.0, 1.0), per_class},
  };
  return spec;
}

namespace {

struct UtterancePlan {
  corpus::UtteranceRecord record;
  std::vector<size_t> phonemes;  // indices into spec.phonemes
};

std::string fmt_time(double t) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", t);
  return buf;
}

struct Span {
  double xmin;
  double xmax;
  std::string text;
};

void append_tier(std::string& out, int index, const std::string& name, double xmax,
                 const std::vector<Span>& spans) {
  out += "    item [" + std::to_string(index) + "]:\n";
  out += "        class = \"IntervalTier\"\n";
  out += "        name = \"" + name + "\"\n";
  out += "        xmin = 0\n";
  out += "        xmax = " + fmt_time(xmax) + "\n";
  out += "        intervals: size = " + std::to_string(spans.size()) + "\n";
  for (size_t k = 0; k < spans.size(); ++k) {
    out += "        intervals [" + std::to_string(k + 1) + "]:\n";
    out += "            xmin = " + fmt_time(spans[k].xmin) + "\n";
    out += "            xmax = " + fmt_time(spans[k].xmax) + "\n";
    out += "            text = \"" + spans[k].text + "\"\n";
  }
}

constexpr uint32_t kLeadFrames = 2;
constexpr uint32_t kTailFrames = 2;

void emit_utterance(const SynthSpec& spec, const std::vector<Eigen::MatrixXd>& real_chol,
                    const std::vector<Eigen::MatrixXd>& fake_chol, const UtterancePlan& plan,
                    const std::string& out_dir) {
  Rng rng(stable_hash(plan.record.utt_id, spec.seed));
  const uint32_t d = spec.dim;
  const uint32_t n_frames = kLeadFrames + kTailFrames +
                            static_cast<uint32_t>(plan.phonemes.size()) * spec.frames_per_segment;
  std::vector<float> values(static_cast<size_t>(n_frames) * d);
  auto noise_frame = [&](uint32_t f) {
    for (uint32_t k = 0; k < d; ++k) values[static_cast<size_t>(f) * d + k] = static_cast<float>(rng.normal());
  };

  const double stride = spec.stride;
  std::vector<Span> phones;
  phones.push_back({0.0, kLeadFrames * stride, "sil"});
  for (uint32_t f = 0; f < kLeadFrames; ++f) noise_frame(f);

  const bool is_real = plan.record.label == corpus::Label::kReal;
  uint32_t frame = kLeadFrames;
  for (size_t s = 0; s < plan.phonemes.size(); ++s) {
    const PhonemePlan& ph = spec.phonemes[plan.phonemes[s]];
    const ClassDistribution& dist = is_real ? ph.real : ph.fake;
    const Eigen::MatrixXd& L = is_real ? real_chol[plan.phonemes[s]] : fake_chol[plan.phonemes[s]];
    Eigen::VectorXd z(d);
    for (uint32_t k = 0; k < d; ++k) z[k] = rng.normal();
    const Eigen::VectorXd draw = dist.mean + L * z;
    for (uint32_t f = 0; f < spec.frames_per_segment; ++f) {
      for (uint32_t k = 0; k < d; ++k) {
        values[static_cast<size_t>(frame + f) * d + k] = static_cast<float>(draw[k]);
      }
    }
    std::string label = ph.label;
    if (is_vowel(label)) label += static_cast<char>('0' + s % 3);
    phones.push_back({frame * stride, (frame + spec.frames_per_segment) * stride, label});
    frame += spec.frames_per_segment;
  }
  const double speech_end = frame * stride;
  for (uint32_t f = frame; f < n_frames; ++f) noise_frame(f);
  const double total = n_frames * stride;
  phones.push_back({speech_end, total, ""});

  const std::vector<Span> words = {{0.0, kLeadFrames * stride, ""},
                                   {kLeadFrames * stride, speech_end, "synthetic"},
                                   {speech_end, total, ""}};
  std::string tg = "File type = \"ooTextFile\"\nObject class = \"TextGrid\"\n\n";
  tg += "xmin = 0\nxmax = " + fmt_time(total) + "\ntiers? <exists>\nsize = 2\nitem []:\n";
  append_tier(tg, 1, "words", total, words);
  append_tier(tg, 2, "phones", total, phones);

  const std::string tg_path = (fs::path(out_dir) / plan.record.textgrid_path).string();
  std::ofstream out(tg_path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write '" + tg_path + "'");
  out << tg;
  if (!out) throw IoError("write failure on '" + tg_path + "'");

  corpus::write_frame_matrix(corpus::FrameMatrix(n_frames, d, spec.stride, std::move(values)),
                             (fs::path(out_dir) / plan.record.emb_path).string());
}

std::vector<UtterancePlan> layout(const SynthSpec& spec) {
  std::vector<UtterancePlan> plans;
  // Round-robin over phonemes so every utterance mixes labels.
  std::vector<size_t> order;
  size_t max_count = 0;
  for (const auto& p : spec.phonemes) max_count = std::max(max_count, p.per_class);
  for (size_t k = 0; k < max_count; ++k) {
    for (size_t p = 0; p < spec.phonemes.size(); ++p) {
      if (k < spec.phonemes[p].per_class) order.push_back(p);
    }
  }

  auto emit_stream = [&](corpus::Label label, corpus::System system, corpus::Emotion emotion) {
    std::string prefix = label == corpus::Label::kReal
                             ? "real_"
                             : "fake_" + std::string(corpus::to_string(system)) + "_";
    prefix += corpus::to_string(emotion);
    size_t index = 0;
    for (size_t pos = 0; pos < order.size(); pos += spec.segments_per_utterance, ++index) {
      char id[96];
      std::snprintf(id, sizeof id, "%s_%05zu", prefix.c_str(), index);
      UtterancePlan plan;
      plan.record.utt_id = id;
      plan.record.audio_path = "audio/" + plan.record.utt_id + ".wav";
      plan.record.textgrid_path = "textgrids/" + plan.record.utt_id + ".TextGrid";
      plan.record.emb_path = "embeddings/" + plan.record.utt_id + ".femb";
      plan.record.label = label;
      plan.record.system = system;
      plan.record.emotion = emotion;
      plan.record.speaker = spec.speakers[index % spec.speakers.size()];
      const size_t end = std::min(order.size(), pos + spec.segments_per_utterance);
      plan.phonemes.assign(order.begin() + static_cast<std::ptrdiff_t>(pos),
                           order.begin() + static_cast<std::ptrdiff_t>(end));
      plans.push_back(std::move(plan));
    }
  };
  for (auto emotion : spec.emotions) {
    emit_stream(corpus::Label::kReal, corpus::System::kNone, emotion);
    for (auto system : spec.systems) emit_stream(corpus::Label::kFake, system, emotion);
  }
  return plans;
}

}  // namespace

std::string gen_synthetic_corpus(const SynthSpec& spec, const std::string& out_dir) {
  validate(spec);
  std::error_code ec;
  for (const char* sub : {"textgrids", "embeddings"}) {
    fs::create_directories(fs::path(out_dir) / sub, ec);
    if (ec) throw IoError("cannot create '" + (fs::path(out_dir) / sub).string() + "': " + ec.message());
  }

  std::vector<Eigen::MatrixXd> real_chol;
  std::vector<Eigen::MatrixXd> fake_chol;
  for (const auto& p : spec.phonemes) {
    real_chol.push_back(Eigen::LLT<Eigen::MatrixXd>(p.real.cov).matrixL());
    fake_chol.push_back(Eigen::LLT<Eigen::MatrixXd>(p.fake.cov).matrixL());
  }

  const auto plans = layout(spec);
  std::vector<std::exception_ptr> errors(plans.size());
  const auto n = static_cast<long>(plans.size());
#pragma omp parallel for schedule(dynamic)
  for (long i = 0; i < n; ++i) {
    try {
      emit_utterance(spec, real_chol, fake_chol, plans[static_cast<size_t>(i)], out_dir);
    } catch (...) {
      errors[static_cast<size_t>(i)] = std::current_exception();
    }
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }

  std::vector<corpus::UtteranceRecord> records;
  records.reserve(plans.size());
  for (const auto& p : plans) records.push_back(p.record);
  const std::string manifest = (fs::path(out_dir) / "manifest.jsonl").string();
  corpus::write_manifest(records, manifest);
  return manifest;
}

McEstimate mc_kl_oracle(const stats::GaussianModel& p, const stats::GaussianModel& q,
                        size_t n_samples, uint64_t seed) {
  if (p.dim() != q.dim()) throw ValidationError("mc_kl_oracle: dimension mismatch");
  if (n_samples < 2) throw ValidationError("mc_kl_oracle: need at least 2 samples");
  Rng rng(seed);
  const Eigen::MatrixXd L = p.cholesky().matrixL();
  Eigen::VectorXd z(p.dim());
  double mean = 0.0;
  double m2 = 0.0;
  for (size_t i = 0; i < n_samples; ++i) {
    for (Eigen::Index k = 0; k < z.size(); ++k) z[k] = rng.normal();
    const Eigen::VectorXd x = p.mean() + L * z;
    const double v = p.log_pdf(x) - q.log_pdf(x);
    // Welford update.
    const double delta = v - mean;
    mean += delta / static_cast<double>(i + 1);
    m2 += delta * (v - mean);
  }
  const double var = m2 / static_cast<double>(n_samples - 1);
  return {mean, std::sqrt(var / static_cast<double>(n_samples))};
}

namespace {

// Euclidean projection onto {0 <= a <= C, y'a = 0}: a = clip(v - lambda y),
// with lambda the root of the monotone map lambda -> y'clip(v - lambda y).
Eigen::VectorXd project(const Eigen::VectorXd& v, const Eigen::VectorXd& y, double C) {
  auto at = [&](double lambda) {
    return (v - lambda * y).cwiseMax(0.0).cwiseMin(C).eval();
  };
  double lo = -(v.cwiseAbs().maxCoeff() + C + 1.0);
  double hi = -lo;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (y.dot(at(mid)) > 0.0) lo = mid;
    else hi = mid;
  }
  double lambda = 0.5 * (lo + hi);
  // Solve exactly on the active set found by bisection.
  const Eigen::VectorXd a = at(lambda);
  double numer = 0.0;
  int n_free = 0;
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    const double u = v[i] - lambda * y[i];
    if (u > 0.0 && u < C) {
      numer += y[i] * v[i];
      ++n_free;
    } else {
      numer += y[i] * a[i];
    }
  }
  if (n_free > 0) {
    const double exact = numer / n_free;
    const Eigen::VectorXd b = at(exact);
    if (std::fabs(y.dot(b)) <= std::fabs(y.dot(a))) return b;
  }
  return a;
}

}  // namespace

QpSolution qp_oracle_svm(const Eigen::MatrixXd& X, const std::vector<int>& y, double C,
                         double gamma) {
  const Eigen::Index n = X.rows();
  if (n > 10) throw ValidationError("qp_oracle_svm: n > 10 is not supported");
  if (static_cast<size_t>(n) != y.size() || n < 2) throw ValidationError("qp_oracle_svm: bad shapes");
  if (!(C > 0.0)) throw ValidationError("qp_oracle_svm: C must be positive");
  bool pos = false;
  bool neg = false;
  Eigen::VectorXd yv(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    yv[i] = y[static_cast<size_t>(i)];
    pos |= y[static_cast<size_t>(i)] == 1;
    neg |= y[static_cast<size_t>(i)] == -1;
  }
  if (!pos || !neg) throw ValidationError("qp_oracle_svm: single-class input");

  Eigen::MatrixXd Q(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      Q(i, j) = yv[i] * yv[j] * std::exp(-gamma * (X.row(i) - X.row(j)).squaredNorm());
    }
  }
  auto objective = [&](const Eigen::VectorXd& a) { return a.sum() - 0.5 * a.dot(Q * a); };

  // Every alpha_i sits at 0, at C, or is free. For each of the 3^n patterns,
  // solve the equality-constrained stationarity system on the free set and
  // keep the best feasible point. The concave optimum is the stationary point
  // of its own face, so the maximum over patterns is exact.
  constexpr double kBoundTol = 1e-10;
  size_t patterns = 1;
  for (Eigen::Index i = 0; i < n; ++i) patterns *= 3;

  QpSolution sol;
  double best = -std::numeric_limits<double>::infinity();
  std::vector<int> state(static_cast<size_t>(n));
  std::vector<Eigen::Index> free_idx;
  for (size_t code = 0; code < patterns; ++code) {
    size_t c = code;
    free_idx.clear();
    Eigen::VectorXd alpha = Eigen::VectorXd::Zero(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      state[static_cast<size_t>(i)] = static_cast<int>(c % 3);
      c /= 3;
      if (state[static_cast<size_t>(i)] == 1) alpha[i] = C;
      if (state[static_cast<size_t>(i)] == 2) free_idx.push_back(i);
    }
    const double fixed_balance = yv.dot(alpha);
    const auto m = static_cast<Eigen::Index>(free_idx.size());
    if (m == 0) {
      if (std::fabs(fixed_balance) > kBoundTol) continue;
    } else {
      Eigen::MatrixXd kkt = Eigen::MatrixXd::Zero(m + 1, m + 1);
      Eigen::VectorXd rhs(m + 1);
      for (Eigen::Index a = 0; a < m; ++a) {
        const Eigen::Index i = free_idx[static_cast<size_t>(a)];
        for (Eigen::Index b = 0; b < m; ++b) kkt(a, b) = Q(i, free_idx[static_cast<size_t>(b)]);
        kkt(a, m) = yv[i];
        kkt(m, a) = yv[i];
        rhs[a] = 1.0 - Q.row(i).dot(alpha);
      }
      rhs[m] = -fixed_balance;
      const Eigen::VectorXd z = kkt.completeOrthogonalDecomposition().solve(rhs);
      if ((kkt * z - rhs).norm() > 1e-9 * (1.0 + rhs.norm())) continue;
      bool feasible = true;
      for (Eigen::Index a = 0; a < m && feasible; ++a) {
        const double v = z[a];
        if (v < -kBoundTol || v > C + kBoundTol) feasible = false;
        alpha[free_idx[static_cast<size_t>(a)]] = std::clamp(v, 0.0, C);
      }
      if (!feasible) continue;
    }
    ++sol.iterations;
    const double obj = objective(alpha);
    if (obj > best) {
      best = obj;
      sol.alpha = alpha;
    }
  }
  if (sol.alpha.size() == 0) throw NumericError("qp_oracle_svm: no feasible stationary point");
  sol.dual_objective = best;
  const Eigen::VectorXd grad = Eigen::VectorXd::Ones(n) - Q * sol.alpha;
  sol.gradient_norm = (project(sol.alpha + grad, yv, C) - sol.alpha).norm();
  return sol;
}

}  // namespace phonodiverge::synth
