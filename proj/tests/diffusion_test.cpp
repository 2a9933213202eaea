#include "prisampler/diffusion.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "prisampler/errors.hpp"
#include "prisampler/optimizer.hpp"

namespace prisampler {
namespace {

TEST(PerturbVp, ZeroStepReturnsTheData) {
  const NoiseSchedule s = NoiseSchedule::vp_discrete(1000);
  RngStream rng(1, 0);
  const Eigen::MatrixXd x0 = rng.normal_matrix(6, 3);
  const Eigen::MatrixXd eps = rng.normal_matrix(6, 3);
  const Eigen::MatrixXd x_t =
      perturb_vp(x0, Eigen::VectorXd::Zero(6), eps, s);
  EXPECT_NEAR((x_t - x0).cwiseAbs().maxCoeff(), 0.0, 1e-15);
}

TEST(PerturbVp, FinalStepIsAlmostPureNoise) {
  const NoiseSchedule s = NoiseSchedule::vp_discrete(1000);
  RngStream rng(2, 0);
  const Eigen::MatrixXd x0 = rng.normal_matrix(6, 3);
  const Eigen::MatrixXd eps = rng.normal_matrix(6, 3);
  const Eigen::MatrixXd x_t =
      perturb_vp(x0, Eigen::VectorXd::Constant(6, 1000.0), eps, s);
  EXPECT_LT((x_t - eps).cwiseAbs().maxCoeff(), 0.05);
}

TEST(PerturbVp, MonteCarloVarianceMatchesKernelMoments) {
  const NoiseSchedule s = NoiseSchedule::vp_discrete(1000);
  RngStream rng(3, 0);
  const int n = 100000;
  const double t = 500.0;
  const double alpha = s.signal_coeff(t);
  const double x0_var = 4.0;

  const Eigen::MatrixXd x0 = 2.0 * rng.normal_matrix(n, 1);
  const Eigen::MatrixXd eps = rng.normal_matrix(n, 1);
  const Eigen::MatrixXd x_t =
      perturb_vp(x0, Eigen::VectorXd::Constant(n, t), eps, s);

  const double mean = x_t.col(0).mean();
  const double var = (x_t.col(0).array() - mean).square().mean();
  const double expected = alpha * x0_var + (1.0 - alpha);
  EXPECT_NEAR(var, expected, 0.02 * expected);
}

TEST(PerturbVe, ZeroNoiseLevelIsIdentity) {
  const NoiseSchedule s = NoiseSchedule::ve_discrete(1000);
  RngStream rng(4, 0);
  const Eigen::MatrixXd x0 = rng.normal_matrix(5, 2);
  const Eigen::MatrixXd eps = rng.normal_matrix(5, 2);
  const Eigen::MatrixXd x_t =
      perturb_ve(x0, Eigen::VectorXd::Zero(5), eps, s);
  EXPECT_NEAR((x_t - x0).cwiseAbs().maxCoeff(), 0.0, 1e-15);
}

TEST(PerturbVe, MeanIsPreservedAndVarianceGrowsBySigmaSquared) {
  const NoiseSchedule s = NoiseSchedule::ve_discrete(1000, 0.01, 10.0);
  RngStream rng(5, 0);
  const int n = 100000;
  const double t = 700.0;
  const double sigma = s.sigma(t);
  const double x0_mean = 3.0;
  const double x0_var = 4.0;

  const Eigen::MatrixXd x0 =
      (2.0 * rng.normal_matrix(n, 1)).array() + x0_mean;
  const Eigen::MatrixXd eps = rng.normal_matrix(n, 1);
  const Eigen::MatrixXd x_t =
      perturb_ve(x0, Eigen::VectorXd::Constant(n, t), eps, s);

  const double mean = x_t.col(0).mean();
  const double var = (x_t.col(0).array() - mean).square().mean();
  const double mean_se = std::sqrt((x0_var + sigma * sigma) / n);
  EXPECT_NEAR(mean, x0_mean, 3.0 * mean_se);
  EXPECT_NEAR(var, x0_var + sigma * sigma, 0.02 * (x0_var + sigma * sigma));
}

TEST(DdpmLoss, OracleNoisePredictorScoresZero) {
  const NoiseSchedule s = NoiseSchedule::vp_discrete(1000);
  RngStream rng(6, 0);
  const Eigen::MatrixXd x0 = rng.normal_matrix(32, 2);

  // The oracle inverts the perturbation using the captured clean batch.
  const PredictFn oracle = [&](const Eigen::MatrixXd& x_t,
                               const Eigen::VectorXd& t) {
    Eigen::MatrixXd eps_hat(x_t.rows(), x_t.cols());
    for (Eigen::Index i = 0; i < x_t.rows(); ++i) {
      const double alpha = s.signal_coeff(t[i]);
      eps_hat.row(i) = (x_t.row(i) - std::sqrt(alpha) * x0.row(i)) /
                       std::sqrt(1.0 - alpha);
    }
    return eps_hat;
  };
  EXPECT_NEAR(ddpm_loss(oracle, x0, s, rng), 0.0, 1e-12);
}

TEST(DdpmLoss, ZeroPredictorScoresTheDataDimension) {
  const NoiseSchedule s = NoiseSchedule::vp_discrete(1000);
  RngStream rng(7, 0);
  const Eigen::MatrixXd x0 = rng.normal_matrix(10000, 2);
  const PredictFn zero = [](const Eigen::MatrixXd& x_t,
                            const Eigen::VectorXd&) {
    return Eigen::MatrixXd::Zero(x_t.rows(), x_t.cols()).eval();
  };
  EXPECT_NEAR(ddpm_loss(zero, x0, s, rng), 2.0, 0.05 * 2.0);
}

TEST(DdpmLoss, GradientsMatchFiniteDifferences) {
  const NoiseSchedule s = NoiseSchedule::vp_discrete(100);
  RngStream init(8, 0);
  DenoiserNet net(2, {8}, 4, 100.0, PredictionTarget::kNoise, init);
  RngStream data_rng(8, 1);
  const Eigen::MatrixXd x0 = data_rng.normal_matrix(8, 2);

  RngStream loss_rng(8, 2);
  const LossResult result = ddpm_loss(net, x0, s, loss_rng);

  const double h = 1e-5;
  for (int l = 0; l < net.mlp.num_layers(); ++l) {
    for (Eigen::Index i = 0; i < net.mlp.weights[l].size(); i += 7) {
      double* p = net.mlp.weights[l].data() + i;
      const double saved = *p;
      *p = saved + h;
      RngStream up_rng(8, 2);
      const double up = ddpm_loss(net, x0, s, up_rng).loss;
      *p = saved - h;
      RngStream down_rng(8, 2);
      const double down = ddpm_loss(net, x0, s, down_rng).loss;
      *p = saved;
      const double fd = (up - down) / (2.0 * h);
      const double an = result.grads.w[l].data()[i];
      ASSERT_NEAR(an, fd, 1e-5 * std::max(1.0, std::abs(an)))
          << "layer " << l << " entry " << i;
    }
  }
}

TEST(DdpmLoss, TrainingOnGaussianDataHalvesTheLoss) {
  const NoiseSchedule s = NoiseSchedule::vp_discrete(1000);
  RngStream init(9, 0);
  DenoiserNet net(2, {64, 64}, 16, 1000.0, PredictionTarget::kNoise, init);
  RngStream data_rng(9, 1);
  Eigen::MatrixXd x0 = data_rng.normal_matrix(256, 2);
  x0.col(0) = 0.5 * x0.col(0).array() + 1.0;
  x0.col(1) = 2.0 * x0.col(1).array() - 1.0;

  AdamOptimizer opt(net.mlp, {});
  RngStream loss_rng(9, 2);
  double initial = 0.0;
  double final = 0.0;
  for (int step = 0; step < 500; ++step) {
    const LossResult r = ddpm_loss(net, x0, s, loss_rng);
    if (step == 0) initial = r.loss;
    final = r.loss;
    opt.step(net.mlp, r.grads);
  }
  EXPECT_LT(final, 0.5 * initial);
}

TEST(SmldLoss, OracleScoreScoresZeroAndZeroNetScoresDimension) {
  const NoiseSchedule s = NoiseSchedule::ve_discrete(1000);
  RngStream rng(10, 0);
  const Eigen::MatrixXd x0 = rng.normal_matrix(10000, 3);

  const PredictFn oracle = [&](const Eigen::MatrixXd& x_t,
                               const Eigen::VectorXd& t) {
    Eigen::MatrixXd score(x_t.rows(), x_t.cols());
    for (Eigen::Index i = 0; i < x_t.rows(); ++i) {
      const double sigma = s.sigma(t[i]);
      score.row(i) = -(x_t.row(i) - x0.row(i)) / (sigma * sigma);
    }
    return score;
  };
  RngStream rng_a(11, 0);
  RngStream rng_b(11, 0);
  EXPECT_NEAR(smld_loss(oracle, x0, s, rng_a), 0.0, 1e-10);

  const PredictFn zero = [](const Eigen::MatrixXd& x_t,
                            const Eigen::VectorXd&) {
    return Eigen::MatrixXd::Zero(x_t.rows(), x_t.cols()).eval();
  };
  EXPECT_NEAR(smld_loss(zero, x0, s, rng_b), 3.0, 0.05 * 3.0);
}

TEST(SmldLoss, RandomInitGivesFinitePositiveLossAndCleanGradients) {
  const NoiseSchedule s = NoiseSchedule::ve_discrete(100);
  RngStream init(12, 0);
  DenoiserNet net(2, {16}, 4, 100.0, PredictionTarget::kScore, init);
  RngStream data_rng(12, 1);
  const Eigen::MatrixXd x0 = data_rng.normal_matrix(16, 2);
  RngStream loss_rng(12, 2);
  const LossResult r = smld_loss(net, x0, s, loss_rng);
  EXPECT_TRUE(std::isfinite(r.loss));
  EXPECT_GT(r.loss, 0.0);
  for (const auto& g : r.grads.w) {
    EXPECT_TRUE(g.allFinite());
  }
}

TEST(SmldLoss, RejectsWrongScheduleOrTarget) {
  RngStream init(13, 0);
  DenoiserNet score_net(2, {8}, 4, 100.0, PredictionTarget::kScore, init);
  DenoiserNet noise_net(2, {8}, 4, 100.0, PredictionTarget::kNoise, init);
  RngStream rng(13, 1);
  const Eigen::MatrixXd x0 = Eigen::MatrixXd::Zero(4, 2);
  EXPECT_THROW(smld_loss(score_net, x0, NoiseSchedule::vp_discrete(100), rng),
               ConfigError);
  EXPECT_THROW(smld_loss(noise_net, x0, NoiseSchedule::ve_discrete(100), rng),
               ConfigError);
  EXPECT_THROW(ddpm_loss(score_net, x0, NoiseSchedule::vp_discrete(100), rng),
               ConfigError);
}

TEST(SsdeLoss, OracleScoresZeroForBothContinuousKinds) {
  RngStream rng(14, 0);
  const Eigen::MatrixXd x0 = rng.normal_matrix(64, 2);
  for (const NoiseSchedule& s :
       {NoiseSchedule::vp_continuous(), NoiseSchedule::ve_continuous()}) {
    const PredictFn oracle = [&](const Eigen::MatrixXd& x_t,
                                 const Eigen::VectorXd& t) {
      Eigen::MatrixXd score(x_t.rows(), x_t.cols());
      for (Eigen::Index i = 0; i < x_t.rows(); ++i) {
        const double alpha = s.signal_coeff(t[i]);
        const double std_t = s.marginal_std(t[i]);
        score.row(i) = -(x_t.row(i) - std::sqrt(alpha) * x0.row(i)) /
                       (std_t * std_t);
      }
      return score;
    };
    RngStream loss_rng(14, 1);
    EXPECT_NEAR(ssde_loss(oracle, x0, s, loss_rng), 0.0, 1e-10);
  }
}

TEST(SsdeLoss, TrainingOnTwoModeMixtureHalvesTheLoss) {
  const NoiseSchedule s = NoiseSchedule::vp_continuous();
  RngStream init(15, 0);
  DenoiserNet net(2, {64, 64}, 16, 1.0, PredictionTarget::kScore, init);

  RngStream data_rng(15, 1);
  Eigen::MatrixXd x0(256, 2);
  for (int i = 0; i < 256; ++i) {
    const double cx = i % 2 == 0 ? 2.0 : -2.0;
    x0(i, 0) = cx + data_rng.normal();
    x0(i, 1) = data_rng.normal();
  }

  AdamOptimizer opt(net.mlp, {});
  RngStream loss_rng(15, 2);
  double initial = 0.0;
  double final = 0.0;
  for (int step = 0; step < 2000; ++step) {
    const LossResult r = ssde_loss(net, x0, s, loss_rng);
    if (step == 0) initial = r.loss;
    final = r.loss;
    opt.step(net.mlp, r.grads);
  }
  EXPECT_LE(final, 0.5 * initial);
}

TEST(ScoreFromNet, AgreesAcrossParameterizations) {
  const NoiseSchedule s = NoiseSchedule::vp_discrete(100);
  RngStream init(16, 0);
  DenoiserNet noise_net(2, {8}, 4, 100.0, PredictionTarget::kNoise, init);
  DenoiserNet score_net = noise_net;
  score_net.target = PredictionTarget::kScore;

  RngStream rng(16, 1);
  const Eigen::MatrixXd x = rng.normal_matrix(5, 2);
  const double t = 40.0;
  const Eigen::MatrixXd s_noise = score_from_net(noise_net, s, x, t);
  const Eigen::MatrixXd s_score = score_from_net(score_net, s, x, t);
  EXPECT_NEAR((s_noise + s_score).cwiseAbs().maxCoeff(), 0.0, 1e-12);

  const Eigen::MatrixXd e_noise = noise_from_net(noise_net, x, t);
  const Eigen::MatrixXd e_score = noise_from_net(score_net, x, t);
  EXPECT_NEAR((e_noise + e_score).cwiseAbs().maxCoeff(), 0.0, 1e-12);

  EXPECT_THROW(score_from_net(noise_net, s, x, 0.0), InputError);
}

TEST(MultinomialPerturb, NoCorruptionKeepsTheCategory) {
  const NoiseSchedule s = NoiseSchedule::vp_discrete(100);
  RngStream rng(17, 0);
  Eigen::VectorXd onehot = Eigen::VectorXd::Zero(4);
  onehot[2] = 1.0;
  for (int i = 0; i < 1000; ++i) {
    ASSERT_EQ(multinomial_perturb(onehot, 0, s, rng), 2);
  }
}

TEST(MultinomialPerturb, FullCorruptionIsUniform) {
  const NoiseSchedule s = NoiseSchedule::vp_discrete(1000);
  RngStream rng(18, 0);
  Eigen::VectorXd onehot = Eigen::VectorXd::Zero(4);
  onehot[1] = 1.0;
  const int n = 100000;
  std::vector<int> counts(4, 0);
  for (int i = 0; i < n; ++i) {
    ++counts[multinomial_perturb(onehot, 1000, s, rng)];
  }
  double chi2 = 0.0;
  for (int k = 0; k < 4; ++k) {
    const double expected = n / 4.0;
    chi2 += (counts[k] - expected) * (counts[k] - expected) / expected;
  }
  // 99th percentile of chi-square with 3 degrees of freedom.
  EXPECT_LT(chi2, 11.345);
}

TEST(MultinomialPerturb, HalfCorruptionOnBinaryGivesThreeQuarters) {
  const NoiseSchedule s = NoiseSchedule::vp_discrete(1000);
  int t_half = 1;
  double best = 1.0;
  for (int t = 1; t <= 1000; ++t) {
    const double gap = std::abs(s.signal_coeff(t) - 0.5);
    if (gap < best) {
      best = gap;
      t_half = t;
    }
  }
  const double alpha_bar = s.signal_coeff(t_half);
  const double expected = alpha_bar + (1.0 - alpha_bar) / 2.0;

  Eigen::VectorXd onehot(2);
  onehot << 1.0, 0.0;
  RngStream rng(19, 0);
  const int n = 100000;
  int hits = 0;
  for (int i = 0; i < n; ++i) {
    hits += multinomial_perturb(onehot, t_half, s, rng) == 0 ? 1 : 0;
  }
  const double freq = static_cast<double>(hits) / n;
  EXPECT_NEAR(freq, 0.75, 0.01);
  EXPECT_NEAR(freq, expected, 0.005);
}

TEST(MultinomialPerturb, RejectsInvalidOneHot) {
  const NoiseSchedule s = NoiseSchedule::vp_discrete(100);
  RngStream rng(20, 0);
  Eigen::VectorXd two_hot(3);
  two_hot << 1.0, 1.0, 0.0;
  Eigen::VectorXd fractional(3);
  fractional << 0.5, 0.5, 0.0;
  EXPECT_THROW(multinomial_perturb(two_hot, 1, s, rng), InputError);
  EXPECT_THROW(multinomial_perturb(fractional, 1, s, rng), InputError);
}

TEST(MultinomialPosterior, IsADistributionAndOracleLossIsZero) {
  const NoiseSchedule s = NoiseSchedule::vp_discrete(100);
  Eigen::VectorXd x0 = Eigen::VectorXd::Zero(5);
  x0[3] = 1.0;
  Eigen::VectorXd x_t = Eigen::VectorXd::Zero(5);
  x_t[1] = 1.0;
  for (int t : {1, 2, 50, 100}) {
    const Eigen::VectorXd post = multinomial_posterior(x_t, x0, t, s);
    ASSERT_NEAR(post.sum(), 1.0, 1e-12);
    ASSERT_GE(post.minCoeff(), 0.0);
    ASSERT_NEAR(multinomial_step_loss(x_t, x0, x0, t, s), 0.0, 1e-12);
  }
}

TEST(MultinomialPosterior, FirstStepReducesToCrossEntropy) {
  const NoiseSchedule s = NoiseSchedule::vp_discrete(100);
  Eigen::VectorXd x0 = Eigen::VectorXd::Zero(3);
  x0[0] = 1.0;
  Eigen::VectorXd x_t = Eigen::VectorXd::Zero(3);
  x_t[2] = 1.0;
  Eigen::VectorXd model(3);
  model << 0.2, 0.3, 0.5;

  const Eigen::VectorXd p = multinomial_posterior(x_t, model, 1, s);
  const double loss = multinomial_step_loss(x_t, x0, model, 1, s);
  EXPECT_NEAR(loss, -std::log(p[0]), 1e-12);
}

TEST(MultinomialStepLoss, GradientMatchesFiniteDifferences) {
  const NoiseSchedule s = NoiseSchedule::vp_discrete(100);
  Eigen::VectorXd x0 = Eigen::VectorXd::Zero(4);
  x0[1] = 1.0;
  Eigen::VectorXd x_t = Eigen::VectorXd::Zero(4);
  x_t[2] = 1.0;
  Eigen::VectorXd logits(4);
  logits << 0.3, -0.7, 1.1, 0.2;

  for (int t : {1, 2, 10, 60}) {
    const Eigen::VectorXd probs = softmax(logits);
    const Eigen::VectorXd grad =
        multinomial_step_loss_grad(x_t, x0, probs, t, s);
    const double h = 1e-6;
    for (int m = 0; m < 4; ++m) {
      Eigen::VectorXd up = logits;
      up[m] += h;
      Eigen::VectorXd down = logits;
      down[m] -= h;
      const double fd = (multinomial_step_loss(x_t, x0, softmax(up), t, s) -
                         multinomial_step_loss(x_t, x0, softmax(down), t, s)) /
                        (2.0 * h);
      ASSERT_NEAR(grad[m], fd, 1e-6 * std::max(1.0, std::abs(grad[m])))
          << "t=" << t << " m=" << m;
    }
  }
}

TEST(TabddpmLoss, CombinesNumericAndAveragedCategoricalTerms) {
  EXPECT_DOUBLE_EQ(tabddpm_loss(1.5, {}, 0), 1.5);
  EXPECT_DOUBLE_EQ(tabddpm_loss(1.0, {2.0, 4.0}, 2), 4.0);
  EXPECT_THROW(tabddpm_loss(1.0, {2.0}, 0), InputError);
  EXPECT_THROW(tabddpm_loss(1.0, {2.0, 3.0}, 3), InputError);
}

TEST(KlDivergence, ZeroForIdenticalAndPositiveOtherwise) {
  Eigen::VectorXd q(3);
  q << 0.2, 0.3, 0.5;
  Eigen::VectorXd p(3);
  p << 0.5, 0.3, 0.2;
  EXPECT_DOUBLE_EQ(kl_divergence(q, q), 0.0);
  EXPECT_GT(kl_divergence(q, p), 0.0);
}

TEST(SampleCategorical, MatchesProbabilitiesOverManyDraws) {
  RngStream rng(21, 0);
  Eigen::VectorXd probs(3);
  probs << 0.2, 0.5, 0.3;
  const int n = 100000;
  std::vector<int> counts(3, 0);
  for (int i = 0; i < n; ++i) {
    ++counts[sample_categorical(probs, rng)];
  }
  for (int k = 0; k < 3; ++k) {
    EXPECT_NEAR(counts[k] / static_cast<double>(n), probs[k], 0.01);
  }
}

}  // namespace
}  // namespace prisampler
