#pragma once

#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Core>

namespace phonodiverge::stats {

enum class CovarianceMode { kFullShrinkage, kDiagonal };

std::string_view to_string(CovarianceMode mode);
CovarianceMode parse_covariance_mode(std::string_view s);

/// Relative ridge added to every fitted covariance: eps * (tr(Sigma)/d) * I.
inline constexpr double kRidgeEpsilon = 1e-8;
/// Directed KLD values in [-kKlClampTolerance, 0) are clamped to zero.
inline constexpr double kKlClampTolerance = 1e-9;

class GaussianModel {
 public:
  /// Factorizes `cov`; throws NumericError if it is not positive-definite.
  GaussianModel(Eigen::VectorXd mean, Eigen::MatrixXd cov, size_t n = 0, double alpha = 0.0,
                double ridge = 0.0);

  const Eigen::VectorXd& mean() const { return mean_; }
  const Eigen::MatrixXd& cov() const { return cov_; }
  const Eigen::LLT<Eigen::MatrixXd>& cholesky() const { return llt_; }
  Eigen::Index dim() const { return mean_.size(); }
  size_t n() const { return n_; }
  double alpha() const { return alpha_; }
  /// Multiple of the identity added as the ridge floor.
  double ridge() const { return ridge_; }
  double log_det() const;
  /// Log density at x.
  double log_pdf(const Eigen::VectorXd& x) const;

 private:
  Eigen::VectorXd mean_;
  Eigen::MatrixXd cov_;
  Eigen::LLT<Eigen::MatrixXd> llt_;
  size_t n_;
  double alpha_;
  double ridge_;
};

/// Rows of `samples` as an n x d matrix. Throws on ragged or non-finite input.
Eigen::MatrixXd stack_rows(std::span<const std::vector<double>> samples);

/// Unbiased (n-1 divisor) sample covariance of the rows of X.
Eigen::MatrixXd sample_covariance(const Eigen::MatrixXd& X);

/// Mean and shrunk covariance:
///   FULL_SHRINKAGE: (1-alpha) S + alpha (tr(S)/d) I
///   DIAGONAL:       diag(S)
/// then the ridge floor. A zero-trace covariance gets eps * I.
GaussianModel fit_gaussian(std::span<const std::vector<double>> samples, CovarianceMode mode,
                           double alpha);
GaussianModel fit_gaussian(const Eigen::MatrixXd& X, CovarianceMode mode, double alpha);

/// KL(P || Q) from Cholesky factors; no explicit inverse.
double kl_gaussian(const GaussianModel& p, const GaussianModel& q);

/// (KL(P||Q) + KL(Q||P)) / 2.
double sym_kld(const GaussianModel& p, const GaussianModel& q);

struct PearsonResult {
  double r = 0.0;
  double p = 1.0;
  double t = 0.0;
  size_t n = 0;
};

/// Pearson r with the two-sided t-test p-value (df = n - 2).
PearsonResult pearson(std::span<const double> xs, std::span<const double> ys);

/// t = r sqrt(n-2) / sqrt(1-r^2) and its two-sided p-value for a given r.
PearsonResult pearson_test(double r, size_t n);

/// Regularized incomplete beta I_x(a, b) by Lentz continued fraction.
double reg_inc_beta(double a, double b, double x);

/// Student-t CDF with `df` degrees of freedom.
double student_t_cdf(double t, double df);

/// 2 * (1 - F_t(|t|; df)).
double two_sided_t_pvalue(double t, double df);

}  // namespace phonodiverge::stats
