#include "h2sls/diagnostics.hpp"
#include "h2sls/estimators.hpp"
#include "oracles.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <string>

using namespace h2sls;

TEST(LambdaRules, FirstStage) {
  EXPECT_NEAR(lambda1_rule(100, 47, 0.4), 0.1252, 5e-5);
  EXPECT_NEAR(lambda1_rule(100, 4700, 0.4), 0.01252, 5e-6);
  EXPECT_NEAR(lambda1_rule(100, 4700, 0.4) * 10.0, lambda1_rule(100, 47, 0.4), 1e-15);
  EXPECT_THROW(lambda1_rule(1, 47, 0.4), Error);
  EXPECT_THROW(lambda1_rule(100, 0, 0.4), Error);
}

TEST(LambdaRules, SecondStage) {
  // 0.1 * 5 * sqrt(4 * 4.605170 / 47) = 0.5 * 0.626043
  EXPECT_NEAR(lambda2_rule(4, 5, 100, 50, 47, 0.1), 0.313021, 5e-6);
  EXPECT_NEAR(lambda2_rule(4, 5, 100, 50, 47, 0.001), 0.00313021, 5e-8);
  // k1 log d = log p: both branches agree.
  EXPECT_NEAR(lambda2_rule(1, 3, 20, 20, 30, 0.5), 0.5 * 3 * std::sqrt(std::log(20.0) / 30.0), 1e-15);
  // log p branch dominates when p is huge relative to d^k1.
  EXPECT_NEAR(lambda2_rule(1, 2, 2, 1000, 10, 1.0), 2.0 * std::sqrt(std::log(1000.0) / 10.0), 1e-15);
}

TEST(FirstStage, NoiselessOlsRecoversPi) {
  ModelSpec s = make_sparse_spec(4, 6, 3, 2, 1.0, 0.4, 0.0, 1.0, 0.0, 0.0);
  s.pi_star(1, 2) = -0.7;
  const Dataset d = generate(s, 30, {1, 1});
  const FirstStage ols = fit_first_stage(d, StageMethod::Ols, LassoConfig{});
  EXPECT_LT((ols.pi_hat - s.pi_star).cwiseAbs().maxCoeff(), 1e-12);
  LassoConfig cfg;
  cfg.tol = 1e-14;
  cfg.max_iters = 100000;
  const FirstStage lasso = fit_first_stage(d, StageMethod::Lasso, cfg);
  EXPECT_LT((lasso.pi_hat - s.pi_star).cwiseAbs().maxCoeff(), 1e-9);
  for (Index j = 0; j < s.p; ++j)
    EXPECT_LT((lasso.x_hat.col(j) - d.z[static_cast<std::size_t>(j)] * lasso.pi_hat.row(j).transpose()).norm(), 1e-12);
}

TEST(FirstStage, OracleNeedsSupports) {
  const ExperimentDesign e = experiment_spec(2);
  const Dataset d = generate(e.spec, 20, {2, 1});
  EXPECT_THROW(fit_first_stage(d, StageMethod::OracleOls, LassoConfig{}), Error);
}

TEST(FirstStage, ErrorsNameTheEquation) {
  const ExperimentDesign e = experiment_spec(4);
  const Dataset d = generate(e.spec, 47, {3, 1});  // d = 100 > n: OLS is singular
  try {
    fit_first_stage(d, StageMethod::Ols, LassoConfig{});
    FAIL();
  } catch (const Error& err) {
    EXPECT_EQ(err.kind(), ErrorKind::SingularGram);
    EXPECT_NE(std::string(err.what()).find("first-stage equation 1"), std::string::npos);
  }
}

TEST(FirstStage, Exp1LargeSampleError) {
  // averaged stage-1 l2 error at n = 4700 is about 0.028
  const ExperimentDesign e = experiment_spec(1);
  const TuningRule rules = default_tuning(e);
  double total = 0.0;
  const int reps = 4;
  for (int r = 1; r <= reps; ++r) {
    const Dataset d = generate(e.spec, 4700, {4, static_cast<std::uint64_t>(r)});
    const FitResult f = fit_design(d, e, rules);
    total += replication_metrics(f, e.spec).stage1_l2_avg;
  }
  EXPECT_NEAR(total / reps, 0.028, 0.004);
}

TEST(FirstStage, Exp2OracleOlsError) {
  // averaged stage-1 l2 error of classical first stages at n = 47 is about 0.115
  const ExperimentDesign e = experiment_spec(2);
  double total = 0.0;
  const int reps = 200;
  for (int r = 1; r <= reps; ++r) {
    const Dataset d = generate(e.spec, 47, {5, static_cast<std::uint64_t>(r)});
    total += replication_metrics(fit_design(d, e, default_tuning(e)), e.spec).stage1_l2_avg;
  }
  EXPECT_NEAR(total / reps, 0.115, 0.012);
}

TEST(TwoStage, LargeLambdaZeroesSecondStage) {
  const ExperimentDesign e = experiment_spec(1);
  const Dataset d = generate(e.spec, 47, {6, 1});
  TuningRule rules = default_tuning(e);
  rules.standardize = false;
  const FirstStage fs = fit_first_stage(d, StageMethod::Lasso, rules.lasso_config(resolve_lambda1(rules, e.spec, 47)));
  rules.override_lambda2 = (fs.x_hat.transpose() * d.y / 47.0).cwiseAbs().maxCoeff();
  const FitResult f = fit_h2sls(d, rules, StageMethod::Lasso, StageMethod::Lasso, e.spec);
  EXPECT_TRUE(f.beta_hat.isZero(0.0));
  EXPECT_NEAR(l2_error(f.beta_hat, e.spec.beta_star), std::sqrt(5.0), 1e-15);
}

TEST(TwoStage, SecondStageSatisfiesKkt) {
  const ExperimentDesign e = experiment_spec(1);
  const Dataset d = generate(e.spec, 47, {7, 1});
  TuningRule rules = default_tuning(e);
  rules.tol = 1e-12;
  const FitResult f = fit_design(d, e, rules);
  ASSERT_TRUE(f.x_hat.has_value());
  std::vector<double> w;
  for (Index j = 0; j < f.x_hat->cols(); ++j) w.push_back(std::sqrt(f.x_hat->col(j).squaredNorm() / 47.0));
  EXPECT_LT(oracle::kkt_violation(*f.x_hat, d.y, f.beta_hat, f.lambda2, w), 1e-8);
  EXPECT_NEAR(f.lambda1, lambda1_rule(100, 47, 0.4), 1e-15);
  EXPECT_NEAR(f.lambda2, lambda2_rule(4, 5, 100, 50, 47, 0.1), 1e-15);
  EXPECT_TRUE(f.converged());
}

TEST(TwoStage, OlsStagesRecordZeroLambda) {
  const ExperimentDesign e = experiment_spec(2);
  const Dataset d = generate(e.spec, 47, {8, 1});
  const FitResult f = fit_design(d, e, default_tuning(e));
  EXPECT_EQ(f.lambda1, 0.0);
  EXPECT_EQ(f.lambda2, 0.0);
  EXPECT_EQ(f.stage1_method, StageMethod::OracleOls);
}

TEST(OneStep, IgnoresInstruments) {
  const ExperimentDesign e = experiment_spec(3);
  GenerateOptions o;
  o.keep_instruments = false;
  const Dataset d = generate(e.spec, 47, {9, 1}, o);
  const FitResult f = fit_design(d, e, default_tuning(e));
  EXPECT_FALSE(f.pi_hat.has_value());
  EXPECT_FALSE(f.x_hat.has_value());
  EXPECT_EQ(f.beta_hat.size(), 50);
  EXPECT_NEAR(f.lambda2, lambda2_rule(4, 5, 100, 50, 47, 0.1), 1e-15);
}

TEST(TwoStage, MissingInstrumentsRejected) {
  const ExperimentDesign e = experiment_spec(1);
  GenerateOptions o;
  o.keep_instruments = false;
  const Dataset d = generate(e.spec, 47, {10, 1}, o);
  try {
    fit_design(d, e, default_tuning(e));
    FAIL();
  } catch (const Error& err) {
    EXPECT_EQ(err.kind(), ErrorKind::LengthMismatch);
  }
}
