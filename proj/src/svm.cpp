#include "phonodiverge/svm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <json.hpp>

#include "phonodiverge/error.hpp"
#include "phonodiverge/rng.hpp"

namespace phonodiverge::svm {

double accuracy(const ConfusionCounts& c) {
  if (c.total() == 0) throw ValidationError("accuracy of an empty confusion table");
  return static_cast<double>(c.tp + c.tn) / static_cast<double>(c.total());
}

double rbf_kernel(const Eigen::VectorXd& x, const Eigen::VectorXd& y, double gamma) {
  return std::exp(-gamma * (x - y).squaredNorm());
}

Eigen::MatrixXd kernel_matrix(const Eigen::MatrixXd& X, double gamma) {
  const Eigen::Index n = X.rows();
  Eigen::MatrixXd K(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    K(i, i) = 1.0;
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const double k = std::exp(-gamma * (X.row(i) - X.row(j)).squaredNorm());
      K(i, j) = k;
      K(j, i) = k;
    }
  }
  return K;
}

double dual_objective(const Eigen::VectorXd& alpha, const Eigen::VectorXd& y,
                      const Eigen::MatrixXd& K) {
  const Eigen::VectorXd ay = alpha.cwiseProduct(y);
  return alpha.sum() - 0.5 * ay.dot(K * ay);
}

Eigen::VectorXd SvmModel::standardize(const Eigen::VectorXd& x) const {
  if (x.size() != feature_means.size()) {
    throw ValidationError("predict: dimension " + std::to_string(x.size()) +
                          " does not match model dimension " +
                          std::to_string(feature_means.size()));
  }
  return (x - feature_means).cwiseQuotient(feature_stds);
}

double SvmModel::decision(const Eigen::VectorXd& x) const {
  const Eigen::VectorXd z = standardize(x);
  double sum = bias;
  for (size_t i = 0; i < support_vectors.size(); ++i) {
    sum += coeffs[i] * rbf_kernel(support_vectors[i], z, gamma);
  }
  return sum;
}

int SvmModel::predict(const Eigen::VectorXd& x) const { return decision(x) >= 0.0 ? 1 : -1; }

namespace {

constexpr double kTau = 1e-12;

class SmoSolver {
 public:
  SmoSolver(const Eigen::MatrixXd& K, const Eigen::VectorXd& y, double C)
      : K_(K), y_(y), C_(C), n_(y.size()), alpha_(Eigen::VectorXd::Zero(n_)),
        grad_(Eigen::VectorXd::Constant(n_, -1.0)) {}

  bool in_up(Eigen::Index t) const {
    return (y_[t] > 0 && alpha_[t] < C_) || (y_[t] < 0 && alpha_[t] > 0);
  }
  bool in_low(Eigen::Index t) const {
    return (y_[t] > 0 && alpha_[t] > 0) || (y_[t] < 0 && alpha_[t] < C_);
  }
  double score(Eigen::Index t) const { return -y_[t] * grad_[t]; }

  // max over I_up minus min over I_low of -y G; <= tol means KKT holds.
  double kkt_gap() const {
    double up = -std::numeric_limits<double>::infinity();
    double low = std::numeric_limits<double>::infinity();
    for (Eigen::Index t = 0; t < n_; ++t) {
      if (in_up(t)) up = std::max(up, score(t));
      if (in_low(t)) low = std::min(low, score(t));
    }
    if (!std::isfinite(up) || !std::isfinite(low)) return 0.0;
    return up - low;
  }

  // Analytic minimization along the feasible direction of pair (i, j).
  bool update(Eigen::Index i, Eigen::Index j) {
    const double old_i = alpha_[i];
    const double old_j = alpha_[j];
    double& ai = alpha_[i];
    double& aj = alpha_[j];
    const double kij = K_(i, j);
    if (y_[i] != y_[j]) {
      double quad = K_(i, i) + K_(j, j) - 2.0 * kij;
      if (quad <= 0) quad = kTau;
      const double delta = (-grad_[i] - grad_[j]) / quad;
      const double diff = ai - aj;
      ai += delta;
      aj += delta;
      if (diff > 0) {
        if (aj < 0) {
          aj = 0;
          ai = diff;
        }
      } else if (ai < 0) {
        ai = 0;
        aj = -diff;
      }
      if (diff > 0) {
        if (ai > C_) {
          ai = C_;
          aj = C_ - diff;
        }
      } else if (aj > C_) {
        aj = C_;
        ai = C_ + diff;
      }
    } else {
      double quad = K_(i, i) + K_(j, j) - 2.0 * kij;
      if (quad <= 0) quad = kTau;
      const double delta = (grad_[i] - grad_[j]) / quad;
      const double sum = ai + aj;
      ai -= delta;
      aj += delta;
      if (sum > C_) {
        if (ai > C_) {
          ai = C_;
          aj = sum - C_;
        }
      } else if (aj < 0) {
        aj = 0;
        ai = sum;
      }
      if (sum > C_) {
        if (aj > C_) {
          aj = C_;
          ai = sum - C_;
        }
      } else if (ai < 0) {
        ai = 0;
        aj = sum;
      }
    }
    const double di = ai - old_i;
    const double dj = aj - old_j;
    if (di == 0.0 && dj == 0.0) return false;
    // G += Q_i di + Q_j dj with Q_ik = y_i y_k K_ik.
    grad_ += (y_[i] * di) * y_.cwiseProduct(K_.col(i)) + (y_[j] * dj) * y_.cwiseProduct(K_.col(j));
    return true;
  }

  double bias() const {
    double ub = std::numeric_limits<double>::infinity();
    double lb = -std::numeric_limits<double>::infinity();
    double sum_free = 0.0;
    int n_free = 0;
    for (Eigen::Index t = 0; t < n_; ++t) {
      const double yg = y_[t] * grad_[t];
      if (alpha_[t] >= C_) {
        if (y_[t] < 0) ub = std::min(ub, yg);
        else lb = std::max(lb, yg);
      } else if (alpha_[t] <= 0) {
        if (y_[t] > 0) ub = std::min(ub, yg);
        else lb = std::max(lb, yg);
      } else {
        ++n_free;
        sum_free += yg;
      }
    }
    const double rho = n_free > 0 ? sum_free / n_free : 0.5 * (ub + lb);
    return -rho;
  }

  const Eigen::VectorXd& alpha() const { return alpha_; }

 private:
  const Eigen::MatrixXd& K_;
  const Eigen::VectorXd& y_;
  double C_;
  Eigen::Index n_;
  Eigen::VectorXd alpha_;
  Eigen::VectorXd grad_;
};

}  // namespace

SvmModel train_smo(const Eigen::MatrixXd& X, const std::vector<int>& y, const SvmParams& params,
                   uint64_t seed) {
  const Eigen::Index n = X.rows();
  const Eigen::Index d = X.cols();
  if (static_cast<size_t>(n) != y.size()) throw ValidationError("train_smo: X and y differ in length");
  if (n < 2 || d < 1) throw ValidationError("train_smo: need n >= 2 samples of dimension >= 1");
  if (!X.allFinite()) throw ValidationError("train_smo: non-finite features");
  if (!(params.C > 0.0)) throw ValidationError("train_smo: C must be positive");
  if (!(params.tol > 0.0)) throw ValidationError("train_smo: tol must be positive");
  bool has_pos = false;
  bool has_neg = false;
  for (int label : y) {
    if (label == 1) has_pos = true;
    else if (label == -1) has_neg = true;
    else throw ValidationError("train_smo: labels must be +1 or -1");
  }
  if (!has_pos || !has_neg) throw ValidationError("train_smo: single-class input");

  SvmModel model;
  model.C = params.C;
  model.gamma = params.gamma > 0.0 ? params.gamma : 1.0 / static_cast<double>(d);
  model.feature_means = X.colwise().mean().transpose();
  model.feature_stds.resize(d);
  for (Eigen::Index k = 0; k < d; ++k) {
    const double var = (X.col(k).array() - model.feature_means[k]).square().mean();
    const double sd = std::sqrt(var);
    model.feature_stds[k] = sd > 0.0 ? sd : 1.0;
  }
  const Eigen::MatrixXd Z =
      (X.rowwise() - model.feature_means.transpose()).array().rowwise() /
      model.feature_stds.transpose().array();

  const Eigen::MatrixXd K = kernel_matrix(Z, model.gamma);
  Eigen::VectorXd yv(n);
  for (Eigen::Index t = 0; t < n; ++t) yv[t] = y[static_cast<size_t>(t)];

  SmoSolver solver(K, yv, params.C);
  Rng rng(seed);
  std::vector<Eigen::Index> partners;
  partners.reserve(static_cast<size_t>(n));
  int idle_passes = 0;
  size_t updates = 0;
  bool converged = false;

  while (updates < params.max_updates) {
    if (solver.kkt_gap() <= params.tol) {
      converged = true;
      break;
    }
    if (idle_passes >= params.max_passes) break;
    size_t changed = 0;
    for (Eigen::Index i = 0; i < n && updates < params.max_updates; ++i) {
      const double s = solver.score(i);
      partners.clear();
      bool i_is_up = false;
      if (solver.in_up(i)) {
        for (Eigen::Index j = 0; j < n; ++j) {
          if (j != i && solver.in_low(j) && solver.score(j) < s - params.tol) partners.push_back(j);
        }
        i_is_up = !partners.empty();
      }
      if (partners.empty() && solver.in_low(i)) {
        for (Eigen::Index j = 0; j < n; ++j) {
          if (j != i && solver.in_up(j) && solver.score(j) > s + params.tol) partners.push_back(j);
        }
      }
      if (partners.empty()) continue;
      const Eigen::Index j = partners[rng.below(partners.size())];
      const bool moved = i_is_up ? solver.update(i, j) : solver.update(j, i);
      ++updates;
      if (moved) ++changed;
    }
    idle_passes = changed == 0 ? idle_passes + 1 : 0;
  }

  const Eigen::VectorXd& alpha = solver.alpha();
  model.bias = solver.bias();
  model.kkt_gap = solver.kkt_gap();
  model.updates = updates;
  model.converged = converged;
  model.dual_objective = dual_objective(alpha, yv, K);
  for (Eigen::Index t = 0; t < n; ++t) {
    if (alpha[t] > 0.0) {
      model.support_vectors.push_back(Z.row(t).transpose());
      model.coeffs.push_back(alpha[t] * yv[t]);
    }
  }
  return model;
}

std::string dump_model(const SvmModel& model) {
  using nlohmann::json;
  auto vec = [](const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); };
  json sv = json::array();
  for (const auto& s : model.support_vectors) sv.push_back(vec(s));
  json out = {{"gamma", model.gamma},
              {"C", model.C},
              {"bias", model.bias},
              {"feature_means", vec(model.feature_means)},
              {"feature_stds", vec(model.feature_stds)},
              {"coeffs", model.coeffs},
              {"support_vectors", sv},
              {"dual_objective", model.dual_objective},
              {"kkt_gap", model.kkt_gap},
              {"converged", model.converged}};
  return out.dump(2);
}

namespace {

void check_counts(size_t n_real, size_t n_fake, size_t min_count, size_t floor) {
  const size_t m = std::min(n_real, n_fake);
  if (m < std::max(min_count, floor)) {
    throw ValidationError("split: class counts (" + std::to_string(n_real) + " real, " +
                          std::to_string(n_fake) + " fake) below the minimum of " +
                          std::to_string(std::max(min_count, floor)));
  }
}

std::vector<size_t> shuffled_subset(size_t n, size_t m, Rng& rng) {
  std::vector<size_t> idx(n);
  std::iota(idx.begin(), idx.end(), size_t{0});
  rng.shuffle(idx.begin(), idx.end());
  idx.resize(m);
  return idx;
}

}  // namespace

SplitPlan make_split(size_t n_real, size_t n_fake, double ratio, uint64_t seed, size_t min_count) {
  if (!(ratio > 0.0 && ratio < 1.0)) throw ValidationError("split ratio must lie in (0, 1)");
  check_counts(n_real, n_fake, min_count, 2);
  const size_t m = std::min(n_real, n_fake);
  const auto n_train = static_cast<size_t>(
      std::clamp<long long>(std::llround(static_cast<double>(m) * ratio), 1,
                            static_cast<long long>(m) - 1));

  Rng rng(seed);
  SplitPlan plan;
  plan.seed = seed;
  auto split = [&](size_t n, std::vector<size_t>& train, std::vector<size_t>& test) {
    const auto idx = shuffled_subset(n, m, rng);
    train.assign(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n_train));
    test.assign(idx.begin() + static_cast<std::ptrdiff_t>(n_train), idx.end());
    std::sort(train.begin(), train.end());
    std::sort(test.begin(), test.end());
  };
  split(n_real, plan.real_train, plan.real_test);
  split(n_fake, plan.fake_train, plan.fake_test);
  return plan;
}

std::vector<SplitPlan> make_kfold(size_t n_real, size_t n_fake, int k, uint64_t seed,
                                  size_t min_count) {
  if (k < 2) throw ValidationError("k-fold needs k >= 2");
  check_counts(n_real, n_fake, min_count, static_cast<size_t>(k));
  const size_t m = std::min(n_real, n_fake);
  Rng rng(seed);
  const auto real_idx = shuffled_subset(n_real, m, rng);
  const auto fake_idx = shuffled_subset(n_fake, m, rng);

  std::vector<SplitPlan> folds(static_cast<size_t>(k));
  for (int f = 0; f < k; ++f) {
    SplitPlan& plan = folds[static_cast<size_t>(f)];
    plan.seed = seed;
    for (size_t p = 0; p < m; ++p) {
      const bool test = p % static_cast<size_t>(k) == static_cast<size_t>(f);
      (test ? plan.real_test : plan.real_train).push_back(real_idx[p]);
      (test ? plan.fake_test : plan.fake_train).push_back(fake_idx[p]);
    }
    for (auto* v : {&plan.real_train, &plan.real_test, &plan.fake_train, &plan.fake_test}) {
      std::sort(v->begin(), v->end());
    }
  }
  return folds;
}

uint64_t cell_seed(const corpus::CellKey& key, uint64_t global_seed) {
  std::string s = key.phoneme;
  s += '\x1f';
  s += corpus::to_string(key.emotion);
  s += '\x1f';
  s += corpus::to_string(key.system);
  s += '\x1f';
  s += key.speaker;
  return stable_hash(s, global_seed);
}

namespace {

Eigen::VectorXd to_eigen(const std::vector<double>& v) {
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

SvmModel train_and_score(const corpus::Cell& cell, const SplitPlan& plan, const SvmParams& params,
                         uint64_t seed, ConfusionCounts& confusion) {
  const size_t d = cell.real.front().size();
  const size_t n_train = plan.real_train.size() + plan.fake_train.size();
  Eigen::MatrixXd X(static_cast<Eigen::Index>(n_train), static_cast<Eigen::Index>(d));
  std::vector<int> y;
  y.reserve(n_train);
  Eigen::Index row = 0;
  for (size_t i : plan.real_train) {
    X.row(row++) = to_eigen(cell.real[i]).transpose();
    y.push_back(-1);
  }
  for (size_t i : plan.fake_train) {
    X.row(row++) = to_eigen(cell.fake[i]).transpose();
    y.push_back(1);
  }
  SvmModel model = train_smo(X, y, params, splitmix64(seed));
  for (size_t i : plan.real_test) {
    if (model.predict(to_eigen(cell.real[i])) < 0) ++confusion.tn;
    else ++confusion.fp;
  }
  for (size_t i : plan.fake_test) {
    if (model.predict(to_eigen(cell.fake[i])) > 0) ++confusion.tp;
    else ++confusion.fn;
  }
  return model;
}

}  // namespace

CellEvaluation evaluate_cell(const corpus::Cell& cell, const EvalConfig& config, uint64_t seed) {
  CellEvaluation eval;
  if (config.kfold > 0) {
    const auto folds = make_kfold(cell.real.size(), cell.fake.size(), config.kfold, seed,
                                  config.min_count);
    for (size_t f = 0; f < folds.size(); ++f) {
      eval.models.push_back(
          train_and_score(cell, folds[f], config.svm, seed + f + 1, eval.confusion));
    }
  } else {
    const SplitPlan plan = make_split(cell.real.size(), cell.fake.size(), config.split_ratio, seed,
                                      config.min_count);
    eval.models.push_back(train_and_score(cell, plan, config.svm, seed, eval.confusion));
  }
  eval.accuracy = accuracy(eval.confusion);
  return eval;
}

}  // namespace phonodiverge::svm
