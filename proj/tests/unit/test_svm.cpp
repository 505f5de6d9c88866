#include <gtest/gtest.h>

#include <cmath>
#include <set>

#include <Eigen/Eigenvalues>

#include "phonodiverge/error.hpp"
#include "phonodiverge/rng.hpp"
#include "phonodiverge/svm.hpp"
#include "phonodiverge/synth.hpp"

using namespace phonodiverge;
using namespace phonodiverge::svm;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

MatrixXd rows(std::initializer_list<std::initializer_list<double>> r) {
  MatrixXd m(r.size(), r.begin()->size());
  Eigen::Index i = 0;
  for (const auto& row : r) {
    Eigen::Index j = 0;
    for (double v : row) m(i, j++) = v;
    ++i;
  }
  return m;
}

MatrixXd standardized(const SvmModel& m, const MatrixXd& x) {
  MatrixXd z(x.rows(), x.cols());
  for (Eigen::Index i = 0; i < x.rows(); ++i) z.row(i) = m.standardize(x.row(i).transpose()).transpose();
  return z;
}

corpus::Cell gaussian_cell(Rng& rng, size_t n, int d, double gap) {
  corpus::Cell cell;
  cell.key = {"AA", corpus::Emotion::kAngry, corpus::System::kEvc1, ""};
  for (size_t i = 0; i < n; ++i) {
    std::vector<double> r(d);
    std::vector<double> f(d);
    for (int j = 0; j < d; ++j) {
      r[j] = rng.normal();
      f[j] = gap + rng.normal();
    }
    cell.real.push_back(r);
    cell.fake.push_back(f);
  }
  return cell;
}

struct Problem {
  MatrixXd x;
  std::vector<int> y;
};

Problem random_problem(Rng& rng, int n, int d) {
  Problem p{MatrixXd(n, d), std::vector<int>(n)};
  for (int i = 0; i < n; ++i) {
    p.y[i] = i < 1 ? 1 : i < 2 ? -1 : (rng.below(2) ? 1 : -1);
    for (int j = 0; j < d; ++j) p.x(i, j) = rng.normal() + 0.7 * p.y[i];
  }
  return p;
}

}  // namespace

TEST(Accuracy, ConfusionArithmetic) {
  EXPECT_DOUBLE_EQ(accuracy({8, 7, 2, 3}), 0.75);
  EXPECT_THROW(accuracy({}), ValidationError);
}

TEST(MakeSplit, Balanced) {
  const auto s = make_split(100, 100, 0.8, 1);
  EXPECT_EQ(s.real_train.size(), 80u);
  EXPECT_EQ(s.real_test.size(), 20u);
  EXPECT_EQ(s.fake_train.size(), 80u);
  EXPECT_EQ(s.fake_test.size(), 20u);
}

TEST(MakeSplit, MajorityDownsampled) {
  const auto s = make_split(150, 100, 0.8, 2);
  EXPECT_EQ(s.real_train.size() + s.real_test.size(), 100u);
  EXPECT_EQ(s.fake_train.size() + s.fake_test.size(), 100u);
  EXPECT_EQ(s.real_train.size(), 80u);
  std::set<size_t> real(s.real_train.begin(), s.real_train.end());
  real.insert(s.real_test.begin(), s.real_test.end());
  EXPECT_EQ(real.size(), 100u);
  EXPECT_LT(*real.rbegin(), 150u);
  EXPECT_TRUE(std::is_sorted(s.real_train.begin(), s.real_train.end()));
}

TEST(MakeSplit, Deterministic) {
  const auto a = make_split(150, 90, 0.7, 3);
  const auto b = make_split(150, 90, 0.7, 3);
  EXPECT_EQ(a.real_train, b.real_train);
  EXPECT_EQ(a.real_test, b.real_test);
  EXPECT_EQ(a.fake_train, b.fake_train);
  EXPECT_EQ(a.fake_test, b.fake_test);
  const auto c = make_split(150, 90, 0.7, 4);
  EXPECT_NE(a.real_train, c.real_train);
}

TEST(MakeSplit, BelowMinCountRejected) {
  EXPECT_THROW(make_split(10, 100, 0.8, 1, 20), ValidationError);
}

TEST(MakeKfold, FoldsPartitionTheSample) {
  const auto folds = make_kfold(50, 40, 5, 9);
  ASSERT_EQ(folds.size(), 5u);
  std::set<size_t> seen;
  for (const auto& f : folds) {
    EXPECT_EQ(f.real_test.size(), 8u);
    EXPECT_EQ(f.real_train.size(), 32u);
    for (auto i : f.real_test) EXPECT_TRUE(seen.insert(i).second);
  }
  EXPECT_EQ(seen.size(), 40u);
}

TEST(RbfKernel, Examples) {
  const VectorXd x = (VectorXd(2) << 0.3, -1).finished();
  EXPECT_DOUBLE_EQ(rbf_kernel(x, x, 2.0), 1.0);
  const VectorXd a = VectorXd::Zero(1);
  const VectorXd b = VectorXd::Ones(1);
  EXPECT_NEAR(rbf_kernel(a, b, 1.0), 0.367879, 1e-6);
  EXPECT_GT(rbf_kernel(a, b, 0.5), rbf_kernel(a, b, 1.0));
  EXPECT_GT(rbf_kernel(a, b, 1.0), rbf_kernel(a, b, 2.0));
}

TEST(KernelMatrix, PositiveSemiDefinite) {
  Rng rng(31);
  for (int trial = 0; trial < 30; ++trial) {
    const int n = 2 + static_cast<int>(rng.below(19));
    const int d = 1 + static_cast<int>(rng.below(5));
    MatrixXd x(n, d);
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < d; ++j) x(i, j) = rng.normal();
    }
    const MatrixXd k = kernel_matrix(x, 0.1 + 2 * rng.uniform());
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(k);
    EXPECT_GE(es.eigenvalues().minCoeff(), -1e-8);
  }
}

TEST(TrainSmo, TwoPoints) {
  const MatrixXd x = rows({{0}, {1}});
  const std::vector<int> y = {-1, 1};
  SvmParams params;
  params.C = 10;
  params.gamma = 1;
  const auto m = train_smo(x, y, params, 1);
  EXPECT_EQ(m.predict(x.row(0).transpose()), -1);
  EXPECT_EQ(m.predict(x.row(1).transpose()), 1);
  ASSERT_EQ(m.coeffs.size(), 2u);
  EXPECT_NEAR(std::fabs(m.coeffs[0]), std::fabs(m.coeffs[1]), 1e-12);
}

TEST(TrainSmo, Xor) {
  const MatrixXd x = rows({{0, 0}, {1, 1}, {0, 1}, {1, 0}});
  const std::vector<int> y = {-1, -1, 1, 1};
  SvmParams params;
  params.C = 10;
  params.gamma = 1;
  const auto m = train_smo(x, y, params, 2);
  for (int i = 0; i < 4; ++i) EXPECT_EQ(m.predict(x.row(i).transpose()), y[i]) << i;
}

TEST(TrainSmo, FarPointFollowsBias) {
  const MatrixXd x = rows({{0, 0}, {1, 1}, {0, 1}, {1, 0}, {2, 2}});
  const std::vector<int> y = {-1, -1, 1, 1, 1};
  SvmParams params;
  params.gamma = 1;
  const auto m = train_smo(x, y, params, 3);
  const VectorXd far = VectorXd::Constant(2, 1e3);
  EXPECT_NEAR(m.decision(far), m.bias, 1e-12);
  EXPECT_EQ(m.predict(far), m.bias >= 0 ? 1 : -1);
}

TEST(TrainSmo, ZeroCoefficientSupportVectorIsInert) {
  const MatrixXd x = rows({{0, 0}, {1, 1}, {0, 1}, {1, 0}});
  const std::vector<int> y = {-1, -1, 1, 1};
  SvmParams params;
  params.gamma = 1;
  const auto m = train_smo(x, y, params, 4);
  auto padded = m;
  padded.support_vectors.push_back(m.support_vectors.front());
  padded.coeffs.push_back(0.0);
  Rng rng(5);
  for (int t = 0; t < 50; ++t) {
    const VectorXd q = (VectorXd(2) << 2 * rng.normal(), 2 * rng.normal()).finished();
    EXPECT_EQ(padded.predict(q), m.predict(q));
  }
}

TEST(TrainSmo, SingleClassRejected) {
  EXPECT_THROW(train_smo(rows({{0}, {1}}), {1, 1}, {}, 1), ValidationError);
}

TEST(TrainSmo, MatchesQpOracleSmallProblems) {
  Rng rng(32);
  for (int trial = 0; trial < 40; ++trial) {
    const int n = 2 + static_cast<int>(rng.below(9));
    const int d = 1 + static_cast<int>(rng.below(4));
    const auto p = random_problem(rng, n, d);
    SvmParams params;
    params.C = 0.5 + 4 * rng.uniform();
    params.tol = 1e-6;  // run to convergence; the default tol leaves ~1e-6 of objective
    const auto m = train_smo(p.x, p.y, params, trial);
    const auto qp = synth::qp_oracle_svm(standardized(m, p.x), p.y, m.C, m.gamma);
    EXPECT_NEAR(m.dual_objective, qp.dual_objective, 1e-6) << "trial " << trial;
    EXPECT_GE(qp.dual_objective, m.dual_objective - 1e-6);
  }
}

TEST(TrainSmo, DualFeasibility) {
  Rng rng(33);
  for (int trial = 0; trial < 20; ++trial) {
    const auto p = random_problem(rng, 40, 3);
    SvmParams params;
    params.C = 2.0;
    const auto m = train_smo(p.x, p.y, params, trial);
    double eq = 0.0;
    for (double c : m.coeffs) {
      const double alpha = std::fabs(c);
      EXPECT_GE(alpha, -1e-9);
      EXPECT_LE(alpha, m.C + 1e-9);
      eq += c;  // coeffs are alpha_i y_i
    }
    EXPECT_LE(std::fabs(eq), 1e-6);
    EXPECT_TRUE(m.converged);
    EXPECT_LE(m.kkt_gap, params.tol);
  }
}

TEST(TrainSmo, LabelFlipFlipsPredictions) {
  Rng rng(34);
  const auto p = random_problem(rng, 30, 2);
  std::vector<int> flipped(p.y.size());
  for (size_t i = 0; i < p.y.size(); ++i) flipped[i] = -p.y[i];
  const auto a = train_smo(p.x, p.y, {}, 7);
  const auto b = train_smo(p.x, flipped, {}, 7);
  for (int t = 0; t < 100; ++t) {
    const VectorXd q = (VectorXd(2) << 2 * rng.normal(), 2 * rng.normal()).finished();
    if (std::fabs(a.decision(q)) < 1e-6) continue;  // tie-break side is asymmetric
    EXPECT_EQ(a.predict(q), -b.predict(q));
  }
}

TEST(TrainSmo, Deterministic) {
  Rng rng(35);
  const auto p = random_problem(rng, 50, 3);
  const auto a = train_smo(p.x, p.y, {}, 11);
  const auto b = train_smo(p.x, p.y, {}, 11);
  EXPECT_EQ(a.coeffs, b.coeffs);
  EXPECT_EQ(a.bias, b.bias);
  EXPECT_EQ(dump_model(a), dump_model(b));
}

TEST(TrainSmo, ConstantFeatureKeepsUnitStd) {
  const MatrixXd x = rows({{0, 5}, {1, 5}, {2, 5}, {3, 5}});
  const auto m = train_smo(x, {-1, -1, 1, 1}, {}, 1);
  EXPECT_EQ(m.feature_stds[1], 1.0);
  EXPECT_NEAR(m.gamma, 0.5, 1e-15);
}

TEST(EvaluateCell, SameDistributionNearChance) {
  Rng rng(36);
  const auto cell = gaussian_cell(rng, 200, 8, 0.0);
  const auto eval = evaluate_cell(cell, {}, 5);
  EXPECT_GE(eval.accuracy, 0.35);
  EXPECT_LE(eval.accuracy, 0.65);
  EXPECT_EQ(eval.confusion.total(), 80u);
  EXPECT_DOUBLE_EQ(eval.accuracy, accuracy(eval.confusion));
}

TEST(EvaluateCell, SixSigmaSeparated) {
  Rng rng(37);
  const auto cell = gaussian_cell(rng, 200, 2, 6.0);
  EXPECT_GE(evaluate_cell(cell, {}, 6).accuracy, 0.99);
}

TEST(EvaluateCell, KFoldCoversBalancedSample) {
  Rng rng(38);
  const auto cell = gaussian_cell(rng, 60, 3, 1.0);
  EvalConfig cfg;
  cfg.kfold = 5;
  const auto eval = evaluate_cell(cell, cfg, 7);
  EXPECT_EQ(eval.models.size(), 5u);
  EXPECT_EQ(eval.confusion.total(), 120u);
}

TEST(EvaluateCell, SeedDeterminism) {
  Rng rng(39);
  const auto cell = gaussian_cell(rng, 80, 4, 0.5);
  const auto a = evaluate_cell(cell, {}, 3);
  const auto b = evaluate_cell(cell, {}, 3);
  EXPECT_EQ(a.confusion, b.confusion);
}

TEST(CellSeed, DependsOnKey) {
  const corpus::CellKey a{"AA", corpus::Emotion::kAngry, corpus::System::kEvc1, ""};
  corpus::CellKey b = a;
  b.phoneme = "AE";
  EXPECT_EQ(cell_seed(a, 1), cell_seed(a, 1));
  EXPECT_NE(cell_seed(a, 1), cell_seed(b, 1));
  EXPECT_NE(cell_seed(a, 1), cell_seed(a, 2));
}

TEST(QpOracle, TwoPointAlphasEqual) {
  const auto qp = synth::qp_oracle_svm(rows({{0}, {1}}), {-1, 1}, 10, 1);
  EXPECT_NEAR(qp.alpha[0], qp.alpha[1], 1e-9);
}

TEST(QpOracle, SingleClassRejected) {
  EXPECT_THROW(synth::qp_oracle_svm(rows({{0}, {1}}), {1, 1}, 1, 1), ValidationError);
}

TEST(QpOracle, XorMatchesSmo) {
  const MatrixXd x = rows({{0, 0}, {1, 1}, {0, 1}, {1, 0}});
  const std::vector<int> y = {-1, -1, 1, 1};
  SvmParams params;
  params.C = 10;
  params.gamma = 1;
  params.tol = 1e-6;
  const auto m = train_smo(x, y, params, 1);
  const auto qp = synth::qp_oracle_svm(standardized(m, x), y, m.C, m.gamma);
  EXPECT_NEAR(m.dual_objective, qp.dual_objective, 1e-6);
}
