#include "phonodiverge/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "phonodiverge/error.hpp"

namespace phonodiverge::stats {

std::string_view to_string(CovarianceMode mode) {
  return mode == CovarianceMode::kDiagonal ? "diagonal" : "full_shrinkage";
}

CovarianceMode parse_covariance_mode(std::string_view s) {
  if (s == "full_shrinkage" || s == "full") return CovarianceMode::kFullShrinkage;
  if (s == "diagonal" || s == "diag") return CovarianceMode::kDiagonal;
  throw ValidationError("unknown covariance mode '" + std::string(s) + "'");
}

GaussianModel::GaussianModel(Eigen::VectorXd mean, Eigen::MatrixXd cov, size_t n, double alpha,
                             double ridge)
    : mean_(std::move(mean)), cov_(std::move(cov)), n_(n), alpha_(alpha), ridge_(ridge) {
  if (mean_.size() == 0) throw ValidationError("Gaussian of dimension 0");
  if (cov_.rows() != mean_.size() || cov_.cols() != mean_.size()) {
    throw ValidationError("covariance shape does not match mean dimension");
  }
  llt_.compute(cov_);
  if (llt_.info() != Eigen::Success) {
    throw NumericError("covariance is not positive-definite (Cholesky failed)");
  }
  const Eigen::VectorXd diag = llt_.matrixLLT().diagonal();
  for (Eigen::Index k = 0; k < diag.size(); ++k) {
    if (!(diag[k] > 0.0) || !std::isfinite(diag[k])) {
      throw NumericError("covariance is not positive-definite (degenerate Cholesky factor)");
    }
  }
}

double GaussianModel::log_det() const {
  return 2.0 * llt_.matrixLLT().diagonal().array().log().sum();
}

double GaussianModel::log_pdf(const Eigen::VectorXd& x) const {
  const Eigen::VectorXd u = llt_.matrixL().solve(x - mean_);
  const double d = static_cast<double>(dim());
  return -0.5 * (d * std::log(2.0 * std::numbers::pi) + log_det() + u.squaredNorm());
}

Eigen::MatrixXd stack_rows(std::span<const std::vector<double>> samples) {
  if (samples.empty()) return {};
  const size_t d = samples.front().size();
  Eigen::MatrixXd X(static_cast<Eigen::Index>(samples.size()), static_cast<Eigen::Index>(d));
  for (size_t i = 0; i < samples.size(); ++i) {
    if (samples[i].size() != d) throw ValidationError("samples have inconsistent dimension");
    for (size_t k = 0; k < d; ++k) {
      if (!std::isfinite(samples[i][k])) throw ValidationError("non-finite sample value");
      X(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = samples[i][k];
    }
  }
  return X;
}

Eigen::MatrixXd sample_covariance(const Eigen::MatrixXd& X) {
  const Eigen::RowVectorXd mean = X.colwise().mean();
  const Eigen::MatrixXd centered = X.rowwise() - mean;
  return (centered.transpose() * centered) / static_cast<double>(X.rows() - 1);
}

GaussianModel fit_gaussian(const Eigen::MatrixXd& X, CovarianceMode mode, double alpha) {
  const Eigen::Index n = X.rows();
  const Eigen::Index d = X.cols();
  if (n < 2) throw ValidationError("fit_gaussian needs at least 2 samples");
  if (d == 0) throw ValidationError("fit_gaussian needs dimension >= 1");
  if (!X.allFinite()) throw ValidationError("fit_gaussian: non-finite input");
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw ValidationError("shrinkage alpha must be in [0, 1]");

  Eigen::VectorXd mean = X.colwise().mean().transpose();
  const Eigen::MatrixXd S = sample_covariance(X);
  Eigen::MatrixXd cov;
  if (mode == CovarianceMode::kDiagonal) {
    cov = S.diagonal().asDiagonal();
  } else {
    const double target = S.trace() / static_cast<double>(d);
    cov = (1.0 - alpha) * S;
    cov.diagonal().array() += alpha * target;
  }
  const double scale = cov.trace() / static_cast<double>(d);
  const double ridge = kRidgeEpsilon * (scale > 0.0 ? scale : 1.0);
  cov.diagonal().array() += ridge;
  return GaussianModel(std::move(mean), std::move(cov), static_cast<size_t>(n), alpha, ridge);
}

GaussianModel fit_gaussian(std::span<const std::vector<double>> samples, CovarianceMode mode,
                           double alpha) {
  if (samples.size() < 2) throw ValidationError("fit_gaussian needs at least 2 samples");
  return fit_gaussian(stack_rows(samples), mode, alpha);
}

double kl_gaussian(const GaussianModel& p, const GaussianModel& q) {
  if (p.dim() != q.dim()) {
    throw ValidationError("kl_gaussian: dimension mismatch (" + std::to_string(p.dim()) + " vs " +
                          std::to_string(q.dim()) + ")");
  }
  const auto lq = q.cholesky().matrixL();
  // tr(Sq^-1 Sp) = ||Lq^-1 Lp||_F^2
  const Eigen::MatrixXd lp = p.cholesky().matrixL();
  const double trace_term = lq.solve(lp).squaredNorm();
  const double mahalanobis = lq.solve(q.mean() - p.mean()).squaredNorm();
  const double d = static_cast<double>(p.dim());
  const double kl = 0.5 * (trace_term + mahalanobis - d + q.log_det() - p.log_det());
  if (!std::isfinite(kl)) throw NumericError("kl_gaussian: non-finite result");
  if (kl < 0.0) {
    if (kl < -kKlClampTolerance) {
      throw NumericError("kl_gaussian: negative divergence " + std::to_string(kl));
    }
    return 0.0;
  }
  return kl;
}

double sym_kld(const GaussianModel& p, const GaussianModel& q) {
  return 0.5 * (kl_gaussian(p, q) + kl_gaussian(q, p));
}

namespace {

// Modified Lentz evaluation of the continued fraction for I_x(a, b).
double beta_continued_fraction(double a, double b, double x) {
  constexpr int kMaxIter = 10000;
  constexpr double kEps = 1e-16;
  constexpr double kTiny = 1e-300;
  const double qab = a + b;
  const double qap = a + 1.0;
  const double qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::fabs(d) < kTiny) d = kTiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= kMaxIter; ++m) {
    const double m2 = 2.0 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::fabs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::fabs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::fabs(del - 1.0) < kEps) return h;
  }
  throw NumericError("reg_inc_beta: continued fraction did not converge");
}

}  // namespace

double reg_inc_beta(double a, double b, double x) {
  if (!(a > 0.0) || !(b > 0.0) || !std::isfinite(a) || !std::isfinite(b)) {
    throw ValidationError("reg_inc_beta: a and b must be positive");
  }
  if (!(x >= 0.0 && x <= 1.0)) throw ValidationError("reg_inc_beta: x must lie in [0, 1]");
  if (x == 0.0) return 0.0;
  if (x == 1.0) return 1.0;
  const double log_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                           a * std::log(x) + b * std::log1p(-x);
  const double front = std::exp(log_front);
  // The fraction converges fast on this side of the mean; use symmetry otherwise.
  if (x < (a + 1.0) / (a + b + 2.0)) return front * beta_continued_fraction(a, b, x) / a;
  return 1.0 - front * beta_continued_fraction(b, a, 1.0 - x) / b;
}

double two_sided_t_pvalue(double t, double df) {
  if (!(df > 0.0)) throw ValidationError("t-test needs positive degrees of freedom");
  if (std::isinf(t)) return 0.0;
  return reg_inc_beta(0.5 * df, 0.5, df / (df + t * t));
}

double student_t_cdf(double t, double df) {
  const double tail = 0.5 * two_sided_t_pvalue(t, df);
  return t > 0.0 ? 1.0 - tail : tail;
}

PearsonResult pearson(std::span<const double> xs, std::span<const double> ys) {
  if (xs.size() != ys.size()) throw ValidationError("pearson: series lengths differ");
  const size_t n = xs.size();
  if (n < 3) throw ValidationError("pearson: need at least 3 pairs");
  double mx = 0.0;
  double my = 0.0;
  for (size_t i = 0; i < n; ++i) {
    if (!std::isfinite(xs[i]) || !std::isfinite(ys[i])) {
      throw ValidationError("pearson: non-finite value");
    }
    mx += xs[i];
    my += ys[i];
  }
  mx /= static_cast<double>(n);
  my /= static_cast<double>(n);
  double sxx = 0.0;
  double syy = 0.0;
  double sxy = 0.0;
  for (size_t i = 0; i < n; ++i) {
    const double dx = xs[i] - mx;
    const double dy = ys[i] - my;
    sxx += dx * dx;
    syy += dy * dy;
    sxy += dx * dy;
  }
  if (sxx == 0.0 || syy == 0.0) throw ValidationError("pearson: constant series");

  return pearson_test(std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0), n);
}

PearsonResult pearson_test(double r, size_t n) {
  if (n < 3) throw ValidationError("pearson: need at least 3 pairs");
  if (!(std::fabs(r) <= 1.0)) throw ValidationError("pearson: r outside [-1, 1]");
  PearsonResult res;
  res.n = n;
  res.r = r;
  const double df = static_cast<double>(n - 2);
  if (std::fabs(r) == 1.0) {
    res.t = std::copysign(std::numeric_limits<double>::infinity(), r);
    res.p = 0.0;
    return res;
  }
  res.t = r * std::sqrt(df) / std::sqrt(1.0 - r * r);
  res.p = two_sided_t_pvalue(res.t, df);
  return res;
}

}  // namespace phonodiverge::stats
