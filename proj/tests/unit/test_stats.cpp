#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "phonodiverge/error.hpp"
#include "phonodiverge/rng.hpp"
#include "phonodiverge/stats.hpp"
#include "phonodiverge/synth.hpp"

using namespace phonodiverge;
using namespace phonodiverge::stats;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

GaussianModel gauss1(double mu, double var) {
  return GaussianModel(VectorXd::Constant(1, mu), MatrixXd::Constant(1, 1, var));
}

// KL between diagonal Gaussians, dimension by dimension.
double diag_kl(const VectorXd& mp, const VectorXd& vp, const VectorXd& mq, const VectorXd& vq) {
  double kl = 0.0;
  for (Eigen::Index i = 0; i < mp.size(); ++i) {
    const double dm = mp[i] - mq[i];
    kl += 0.5 * (vp[i] / vq[i] + dm * dm / vq[i] - 1.0 + std::log(vq[i] / vp[i]));
  }
  return kl;
}

MatrixXd random_spd(Rng& rng, int d) {
  MatrixXd a(d, d);
  for (int i = 0; i < d; ++i) {
    for (int j = 0; j < d; ++j) a(i, j) = rng.normal();
  }
  return a * a.transpose() + 0.5 * MatrixXd::Identity(d, d);
}

VectorXd random_vec(Rng& rng, int d, double scale) {
  VectorXd v(d);
  for (int i = 0; i < d; ++i) v[i] = scale * rng.normal();
  return v;
}

}  // namespace

TEST(FitGaussian, DiagonalSquareExample) {
  const std::vector<std::vector<double>> xs = {{0, 0}, {2, 0}, {0, 2}, {2, 2}};
  const auto g = fit_gaussian(xs, CovarianceMode::kDiagonal, 0.1);
  EXPECT_NEAR(g.mean()[0], 1.0, 1e-15);
  EXPECT_NEAR(g.mean()[1], 1.0, 1e-15);
  const MatrixXd before_ridge = g.cov() - g.ridge() * MatrixXd::Identity(2, 2);
  EXPECT_NEAR(before_ridge(0, 0), 4.0 / 3.0, 1e-12);
  EXPECT_NEAR(before_ridge(1, 1), 4.0 / 3.0, 1e-12);
  EXPECT_EQ(before_ridge(0, 1), 0.0);
  EXPECT_NEAR(g.ridge(), kRidgeEpsilon * 4.0 / 3.0, 1e-20);
}

TEST(FitGaussian, IdenticalSamplesStillPositiveDefinite) {
  const std::vector<std::vector<double>> xs(10, std::vector<double>{1.5, -2.0, 0.25});
  const auto g = fit_gaussian(xs, CovarianceMode::kFullShrinkage, 0.1);
  EXPECT_EQ(g.mean(), (VectorXd(3) << 1.5, -2.0, 0.25).finished());
  EXPECT_TRUE(g.cov().isApprox(g.ridge() * MatrixXd::Identity(3, 3)));
  EXPECT_GT(g.ridge(), 0.0);
  EXPECT_EQ(g.cholesky().info(), Eigen::Success);
}

TEST(FitGaussian, TwoPointsOneDim) {
  const std::vector<std::vector<double>> xs = {{0.0}, {2.0}};
  const auto g = fit_gaussian(xs, CovarianceMode::kFullShrinkage, 0.0);
  EXPECT_DOUBLE_EQ(g.mean()[0], 1.0);
  EXPECT_NEAR(g.cov()(0, 0) - g.ridge(), 2.0, 1e-12);
}

TEST(FitGaussian, AlphaZeroReproducesSampleCovariance) {
  Rng rng(21);
  for (int trial = 0; trial < 20; ++trial) {
    const int d = 1 + static_cast<int>(rng.below(5));
    const int n = d + 2 + static_cast<int>(rng.below(30));
    MatrixXd x(n, d);
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < d; ++j) x(i, j) = rng.normal() * (j + 1) + j;
    }
    const MatrixXd centered = x.rowwise() - x.colwise().mean();
    const MatrixXd s = centered.transpose() * centered / (n - 1);
    const auto g = fit_gaussian(x, CovarianceMode::kFullShrinkage, 0.0);
    EXPECT_LE((g.cov() - g.ridge() * MatrixXd::Identity(d, d) - s).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_LE((sample_covariance(x) - s).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(FitGaussian, ShrinkageFormula) {
  Rng rng(22);
  MatrixXd x(30, 4);
  for (int i = 0; i < 30; ++i) {
    for (int j = 0; j < 4; ++j) x(i, j) = rng.normal();
  }
  const MatrixXd s = sample_covariance(x);
  const double alpha = 0.3;
  const MatrixXd target = (1 - alpha) * s + alpha * s.trace() / 4.0 * MatrixXd::Identity(4, 4);
  const auto g = fit_gaussian(x, CovarianceMode::kFullShrinkage, alpha);
  EXPECT_LE((g.cov() - g.ridge() * MatrixXd::Identity(4, 4) - target).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(FitGaussian, RejectsBadInput) {
  EXPECT_THROW(fit_gaussian(std::vector<std::vector<double>>{{1.0}}, CovarianceMode::kDiagonal, 0.1),
               ValidationError);
  EXPECT_THROW(fit_gaussian(std::vector<std::vector<double>>{{1.0, 2.0}, {1.0}},
                            CovarianceMode::kDiagonal, 0.1),
               ValidationError);
  EXPECT_THROW(fit_gaussian(std::vector<std::vector<double>>{{1.0}, {std::nan("")}},
                            CovarianceMode::kDiagonal, 0.1),
               ValidationError);
}

TEST(GaussianModel, NonPositiveDefiniteRejected) {
  MatrixXd c(2, 2);
  c << 1, 2, 2, 1;
  EXPECT_THROW(GaussianModel(VectorXd::Zero(2), c), NumericError);
}

TEST(KlGaussian, IdentityIsZero) {
  Rng rng(23);
  const GaussianModel p(random_vec(rng, 3, 1.0), random_spd(rng, 3));
  EXPECT_EQ(kl_gaussian(p, p), 0.0);
  EXPECT_EQ(sym_kld(p, p), 0.0);
}

TEST(KlGaussian, OneDimClosedForms) {
  EXPECT_NEAR(kl_gaussian(gauss1(0, 1), gauss1(1, 1)), 0.5, 1e-12);
  EXPECT_NEAR(kl_gaussian(gauss1(0, 1), gauss1(0, 4)), 0.3181, 1e-4);
  EXPECT_NEAR(kl_gaussian(gauss1(0, 4), gauss1(0, 1)), 0.8069, 1e-4);
  EXPECT_NEAR(kl_gaussian(gauss1(0, 1), gauss1(0, 4)), 0.5 * (0.25 - 1 + std::log(4.0)), 1e-12);
}

TEST(SymKld, OneDimLogTermsCancel) {
  EXPECT_NEAR(sym_kld(gauss1(0, 1), gauss1(0, 4)), 0.5625, 1e-12);
}

TEST(KlGaussian, DiagonalClosedForm) {
  Rng rng(24);
  for (int trial = 0; trial < 100; ++trial) {
    const int d = 1 + static_cast<int>(rng.below(8));
    VectorXd mp = random_vec(rng, d, 2.0);
    VectorXd mq = random_vec(rng, d, 2.0);
    VectorXd vp(d);
    VectorXd vq(d);
    for (int i = 0; i < d; ++i) {
      vp[i] = 0.1 + 3 * rng.uniform();
      vq[i] = 0.1 + 3 * rng.uniform();
    }
    const GaussianModel p(mp, vp.asDiagonal().toDenseMatrix());
    const GaussianModel q(mq, vq.asDiagonal().toDenseMatrix());
    EXPECT_NEAR(kl_gaussian(p, q), diag_kl(mp, vp, mq, vq), 1e-9);
  }
}

TEST(KlGaussian, NonNegativeOnRandomPairs) {
  Rng rng(25);
  for (int trial = 0; trial < 300; ++trial) {
    const int d = 1 + static_cast<int>(rng.below(6));
    const GaussianModel p(random_vec(rng, d, 1.0), random_spd(rng, d));
    const GaussianModel q(random_vec(rng, d, 1.0), random_spd(rng, d));
    EXPECT_GE(kl_gaussian(p, q), 0.0);
  }
}

TEST(KlGaussian, DimensionMismatchRejected) {
  EXPECT_THROW(kl_gaussian(gauss1(0, 1), GaussianModel(VectorXd::Zero(2), MatrixXd::Identity(2, 2))),
               ValidationError);
}

TEST(SymKld, SymmetricBitForBit) {
  Rng rng(26);
  for (int trial = 0; trial < 100; ++trial) {
    const int d = 1 + static_cast<int>(rng.below(6));
    const GaussianModel p(random_vec(rng, d, 1.0), random_spd(rng, d));
    const GaussianModel q(random_vec(rng, d, 1.0), random_spd(rng, d));
    EXPECT_EQ(sym_kld(p, q), sym_kld(q, p));
  }
}

TEST(KlGaussian, MonteCarloAgreement) {
  Rng rng(27);
  for (int trial = 0; trial < 5; ++trial) {
    const int d = 1 + static_cast<int>(rng.below(4));
    const GaussianModel p(random_vec(rng, d, 0.5), random_spd(rng, d));
    const GaussianModel q(random_vec(rng, d, 0.5), random_spd(rng, d));
    const auto mc = synth::mc_kl_oracle(p, q, 200000, 1000 + trial);
    EXPECT_LE(std::fabs(mc.estimate - kl_gaussian(p, q)), 3 * mc.standard_error)
        << "trial " << trial;
  }
}

TEST(McOracle, IdenticalAndShiftedOneDim) {
  const auto same = synth::mc_kl_oracle(gauss1(0, 1), gauss1(0, 1), 1000, 1);
  EXPECT_LE(std::fabs(same.estimate), 3 * same.standard_error + 1e-15);
  const auto shifted = synth::mc_kl_oracle(gauss1(0, 1), gauss1(1, 1), 200000, 2);
  EXPECT_LE(std::fabs(shifted.estimate - 0.5), 3 * shifted.standard_error);
}

TEST(Pearson, ExactLinear) {
  const std::vector<double> xs = {1, 2, 3};
  const std::vector<double> ys = {2, 4, 6};
  const auto r = pearson(xs, ys);
  EXPECT_DOUBLE_EQ(r.r, 1.0);
  EXPECT_EQ(r.p, 0.0);
  EXPECT_EQ(r.n, 3u);
}

TEST(Pearson, AffineAccuracyGivesUnitR) {
  const std::vector<double> kld = {3.1, 7.4, 1.2, 9.9, 5.5};
  std::vector<double> acc;
  for (double k : kld) acc.push_back(0.5 + 0.03 * k);
  EXPECT_NEAR(pearson(kld, acc).r, 1.0, 1e-12);
}

TEST(Pearson, PublishedPValues) {
  EXPECT_NEAR(two_sided_t_pvalue(0.75 * std::sqrt(13.0 / (1 - 0.75 * 0.75)), 13), 0.0012, 1e-4);
  EXPECT_NEAR(two_sided_t_pvalue(0.69 * std::sqrt(21.0 / (1 - 0.69 * 0.69)), 21), 0.0002, 1e-4);
}

TEST(Pearson, AffineInvariance) {
  Rng rng(28);
  for (int trial = 0; trial < 50; ++trial) {
    const size_t n = 3 + rng.below(30);
    std::vector<double> xs(n);
    std::vector<double> ys(n);
    for (size_t i = 0; i < n; ++i) {
      xs[i] = rng.normal();
      ys[i] = 0.5 * xs[i] + rng.normal();
    }
    const double a = rng.below(2) ? 0.1 + 5 * rng.uniform() : -(0.1 + 5 * rng.uniform());
    const double b = 10 * rng.normal();
    std::vector<double> zs(n);
    for (size_t i = 0; i < n; ++i) zs[i] = a * xs[i] + b;
    const auto base = pearson(xs, ys);
    const auto moved = pearson(zs, ys);
    EXPECT_NEAR(moved.r, a > 0 ? base.r : -base.r, 1e-12);
    EXPECT_NEAR(moved.p, base.p, 1e-12);
  }
}

TEST(Pearson, RejectsDegenerateInput) {
  const std::vector<double> two = {1, 2};
  EXPECT_THROW(pearson(two, two), ValidationError);
  const std::vector<double> flat = {1, 1, 1};
  const std::vector<double> ys = {1, 2, 3};
  EXPECT_THROW(pearson(flat, ys), ValidationError);
  const std::vector<double> longer = {1, 2, 3, 4};
  EXPECT_THROW(pearson(longer, ys), ValidationError);
}

TEST(RegIncBeta, Boundaries) {
  EXPECT_EQ(reg_inc_beta(2.5, 3.0, 0.0), 0.0);
  EXPECT_EQ(reg_inc_beta(2.5, 3.0, 1.0), 1.0);
  EXPECT_NEAR(reg_inc_beta(1, 1, 0.5), 0.5, 1e-15);
  EXPECT_NEAR(reg_inc_beta(1, 2, 0.5), 0.75, 1e-15);
}

TEST(RegIncBeta, ClosedFormAEqualsOne) {
  for (double b : {0.5, 1.0, 2.0, 7.5}) {
    for (double x : {0.01, 0.2, 0.5, 0.9, 0.999}) {
      EXPECT_NEAR(reg_inc_beta(1.0, b, x), 1 - std::pow(1 - x, b), 1e-13) << b << " " << x;
    }
  }
}

TEST(RegIncBeta, SymmetryRelation) {
  for (double a : {0.5, 2.0, 6.5}) {
    for (double b : {0.5, 3.0, 11.0}) {
      for (double x : {0.05, 0.4, 0.77}) {
        EXPECT_NEAR(reg_inc_beta(a, b, x) + reg_inc_beta(b, a, 1 - x), 1.0, 1e-13);
      }
    }
  }
}

TEST(RegIncBeta, DomainErrors) {
  EXPECT_THROW(reg_inc_beta(0.0, 1.0, 0.5), ValidationError);
  EXPECT_THROW(reg_inc_beta(1.0, 1.0, 1.5), ValidationError);
}

TEST(StudentT, KnownClosedForms) {
  for (double t : {-3.0, -0.5, 0.0, 0.7, 2.0, 10.0}) {
    EXPECT_NEAR(student_t_cdf(t, 1), 0.5 + std::atan(t) / std::numbers::pi, 1e-13);
    EXPECT_NEAR(student_t_cdf(t, 2), 0.5 + t / (2 * std::sqrt(2 + t * t)), 1e-13);
  }
  EXPECT_NEAR(two_sided_t_pvalue(0.0, 5), 1.0, 1e-15);
}
