#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "phonodiverge/corpus.hpp"
#include "phonodiverge/stats.hpp"

namespace phonodiverge::synth {

struct ClassDistribution {
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;

  static ClassDistribution isotropic(Eigen::Index dim, double mean, double stddev);
};

struct PhonemePlan {
  std::string label;
  ClassDistribution real;
  ClassDistribution fake;
  size_t per_class = 0;
};

struct SynthSpec {
  std::vector<PhonemePlan> phonemes;
  uint32_t dim = 8;
  float stride = 0.02f;
  std::vector<corpus::Emotion> emotions = {corpus::Emotion::kAngry};
  std::vector<corpus::System> systems = {corpus::System::kEvc1};
  std::vector<std::string> speakers = {"0011"};
  size_t segments_per_utterance = 12;
  uint32_t frames_per_segment = 3;
  uint64_t seed = 0;
};

/// Throws ValidationError on empty plans, zero counts, shape mismatches or
/// covariances that are not positive-definite.
void validate(const SynthSpec& spec);

/// Parses the JSON form of a spec. `mean` may be a scalar (broadcast) or a
/// vector; spread is either `std` (isotropic) or a full `cov` matrix.
SynthSpec parse_spec(std::string_view json_text);

/// n phonemes whose fake mean is shifted by gap_k = max_gap * k / (n-1) on
/// every axis; real and fake both have identity covariance.
SynthSpec graded_spec(size_t n_phonemes, uint32_t dim, size_t per_class, double max_gap,
                      uint64_t seed);

/// Three archetypes: AA identical, EH shifted by `moderate_gap` per axis, SH
/// shifted by 6 per axis (6 sigma).
SynthSpec archetype_spec(uint32_t dim, size_t per_class, double moderate_gap, uint64_t seed);

/// Writes FEMB files, TextGrids and manifest.jsonl under out_dir and returns
/// the manifest path. Every frame of a segment holds the segment's draw, so
/// pooling recovers it exactly; silence frames hold unit noise. Each file is
/// seeded from (spec.seed, utt_id).
std::string gen_synthetic_corpus(const SynthSpec& spec, const std::string& out_dir);

struct McEstimate {
  double estimate = 0.0;
  double standard_error = 0.0;
};

/// Monte-Carlo KL(P||Q): mean of log p_P(x) - log p_Q(x) over draws x ~ P.
McEstimate mc_kl_oracle(const stats::GaussianModel& p, const stats::GaussianModel& q,
                        size_t n_samples, uint64_t seed);

struct QpSolution {
  Eigen::VectorXd alpha;
  double dual_objective = 0.0;
  /// Norm of the projected-gradient step at alpha; ~0 at the optimum.
  double gradient_norm = 0.0;
  /// Feasible active-set patterns examined.
  size_t iterations = 0;
};

QpSolution qp_oracle_svm(const Eigen::MatrixXd& X, const std::vector<int>& y, double C,
                         double gamma);

}  // namespace phonodiverge::synth
