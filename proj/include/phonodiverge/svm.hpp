#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "phonodiverge/corpus.hpp"

namespace phonodiverge::svm {

struct ConfusionCounts {
  size_t tp = 0;
  size_t tn = 0;
  size_t fp = 0;
  size_t fn = 0;

  size_t total() const { return tp + tn + fp + fn; }
  bool operator==(const ConfusionCounts&) const = default;
};

/// (TP + TN) / (TP + TN + FP + FN). Throws on an empty table.
double accuracy(const ConfusionCounts& c);

struct SvmParams {
  double C = 1.0;
  /// <= 0 selects 1/d on the standardized features.
  double gamma = 0.0;
  double tol = 1e-3;
  int max_passes = 10;
  /// Hard cap on pair updates; guards against cycling on degenerate input.
  size_t max_updates = 10'000'000;
};

class SvmModel {
 public:
  std::vector<Eigen::VectorXd> support_vectors;  // standardized space
  std::vector<double> coeffs;                    // alpha_i * y_i
  double bias = 0.0;
  double gamma = 1.0;
  double C = 1.0;
  Eigen::VectorXd feature_means;
  Eigen::VectorXd feature_stds;

  // Training diagnostics.
  double dual_objective = 0.0;
  double kkt_gap = 0.0;
  size_t updates = 0;
  bool converged = false;

  Eigen::Index dim() const { return feature_means.size(); }
  Eigen::VectorXd standardize(const Eigen::VectorXd& x) const;
  /// sum coeffs_i K(sv_i, standardize(x)) + bias.
  double decision(const Eigen::VectorXd& x) const;
  /// +1 or -1; an exact zero decision maps to +1.
  int predict(const Eigen::VectorXd& x) const;
};

double rbf_kernel(const Eigen::VectorXd& x, const Eigen::VectorXd& y, double gamma);

/// Dense Gram matrix K_ij = rbf(x_i, x_j) over the rows of X.
Eigen::MatrixXd kernel_matrix(const Eigen::MatrixXd& X, double gamma);

/// Dual objective sum(alpha) - 1/2 sum_ij alpha_i alpha_j y_i y_j K_ij.
double dual_objective(const Eigen::VectorXd& alpha, const Eigen::VectorXd& y,
                      const Eigen::MatrixXd& K);

/// Trains on the rows of X with labels +-1. Features are z-scored internally
/// (zero-variance features keep std 1). Pairs are chosen as simplified SMO:
/// sweep the first index over KKT violators, draw the second uniformly from
/// the partners it violates with, seeded. Stops once the maximal violation is
/// within tol, or after max_passes sweeps without progress.
SvmModel train_smo(const Eigen::MatrixXd& X, const std::vector<int>& y, const SvmParams& params,
                   uint64_t seed);

/// Writes gamma, C, bias, standardization vectors and support-vector rows as
/// JSON. Debug aid; the layout is not a stable interface.
std::string dump_model(const SvmModel& model);

struct SplitPlan {
  std::vector<size_t> real_train;
  std::vector<size_t> real_test;
  std::vector<size_t> fake_train;
  std::vector<size_t> fake_test;
  uint64_t seed = 0;
};

/// Downsamples the majority class to the minority count m, then splits each
/// class round(m * ratio) train / rest test. Index lists are sorted.
SplitPlan make_split(size_t n_real, size_t n_fake, double ratio, uint64_t seed,
                     size_t min_count = 1);

/// k stratified folds over the balanced subsample; fold f's test set is every
/// k-th shuffled index starting at f.
std::vector<SplitPlan> make_kfold(size_t n_real, size_t n_fake, int k, uint64_t seed,
                                  size_t min_count = 1);

struct EvalConfig {
  SvmParams svm;
  double split_ratio = 0.8;
  /// 0 for a single hold-out split, otherwise k-fold cross-validation.
  int kfold = 0;
  size_t min_count = 20;
};

struct CellEvaluation {
  double accuracy = 0.0;
  ConfusionCounts confusion;
  /// One trained model per split (one for hold-out, k for k-fold).
  std::vector<SvmModel> models;
};

/// Stable per-cell seed from the cell key and the run's global seed.
uint64_t cell_seed(const corpus::CellKey& key, uint64_t global_seed);

/// Hold-out (or k-fold) accuracy with FAKE as the positive class.
CellEvaluation evaluate_cell(const corpus::Cell& cell, const EvalConfig& config, uint64_t seed);

}  // namespace phonodiverge::svm
