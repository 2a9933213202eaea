#include "prisampler/attack.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <cstdint>

#include "prisampler/errors.hpp"

namespace prisampler {
namespace {

TabularSchema flag_schema() {
  TabularSchema schema;
  schema.columns = {{"flag", ColumnKind::kCategorical, {"no", "yes"}}};
  return schema;
}

TabularDataset bernoulli_flags(int n, double p, std::uint64_t seed,
                               std::uint64_t stream) {
  RngStream rng(seed, stream);
  TabularDataset data;
  data.schema = flag_schema();
  data.raw.resize(n, 1);
  for (int i = 0; i < n; ++i) {
    data.raw(i, 0) = rng.uniform() < p ? 1.0 : 0.0;
  }
  data.split.assign(n, SplitTag::kTrain);
  return data;
}

TabularSchema mixed_schema() {
  TabularSchema schema;
  schema.columns = {
      {"age", ColumnKind::kNumeric, {}},
      {"group", ColumnKind::kCategorical, {"a", "b", "c"}},
  };
  return schema;
}

TabularDataset mixed_rows() {
  TabularDataset data;
  data.schema = mixed_schema();
  data.raw.resize(6, 2);
  data.raw << 10.0, 0, 20.0, 1, 30.0, 2, 40.0, 0, 50.0, 1, 60.0, 2;
  data.split.assign(6, SplitTag::kTrain);
  return data;
}

PropertyClassifier constant_classifier(double bias) {
  RngStream rng(900, 0);
  PropertyClassifier clf;
  clf.mlp = Mlp({2, 1}, Activation::kSilu, rng);
  for (auto& w : clf.mlp.weights) {
    w.setZero();
  }
  for (auto& b : clf.mlp.biases) {
    b.setZero();
  }
  clf.mlp.biases.back()[0] = bias;
  return clf;
}

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

TEST(PropertyPredicate, ValidatesItsParameters) {
  PropertyPredicate pred = PropertyPredicate::categorical_equals("group", "a");
  EXPECT_NO_THROW(pred.validate());
  EXPECT_FALSE(pred.id.empty());
  EXPECT_EQ(pred.arity, 2);

  pred.arity = 1;
  EXPECT_THROW(pred.validate(), InputError);

  EXPECT_THROW(PropertyPredicate::numeric_less_than(
                   "age", std::numeric_limits<double>::infinity())
                   .validate(),
               InputError);
  EXPECT_THROW(PropertyPredicate::numeric_range("age", 2.0, 2.0).validate(),
               InputError);
  EXPECT_THROW(PropertyPredicate::numeric_range("age", 3.0, 1.0).validate(),
               InputError);
  EXPECT_THROW(PropertyPredicate::categorical_equals("", "a").validate(),
               InputError);

  PropertyPredicate clf_pred;
  clf_pred.kind = PredicateKind::kClassifierBased;
  EXPECT_THROW(clf_pred.validate(), InputError);

  const PropertyPredicate ovr =
      PropertyPredicate::categorical_one_vs_rest("group", "b", 3);
  EXPECT_NO_THROW(ovr.validate());
  EXPECT_EQ(ovr.arity, 3);
}

TEST(PropertyPredicate, CategoricalEqualsReadsTheColumn) {
  const TabularDataset data = mixed_rows();
  const Eigen::VectorXi hits =
      PropertyPredicate::categorical_equals("group", "b").evaluate(data);
  ASSERT_EQ(hits.size(), 6);
  for (int i = 0; i < 6; ++i) {
    EXPECT_EQ(hits[i], i % 3 == 1 ? 1 : 0);
  }

  EXPECT_THROW(
      PropertyPredicate::categorical_equals("absent", "a").evaluate(data),
      InputError);
  EXPECT_THROW(
      PropertyPredicate::categorical_equals("group", "zz").evaluate(data),
      InputError);
  EXPECT_THROW(
      PropertyPredicate::categorical_equals("age", "a").evaluate(data),
      InputError);
  EXPECT_THROW(
      PropertyPredicate::numeric_less_than("group", 1.0).evaluate(data),
      InputError);
  EXPECT_THROW(PropertyPredicate::categorical_one_vs_rest("group", "b", 4)
                   .evaluate(data),
               InputError);
}

TEST(PropertyPredicate, NumericPredicatesAreHalfOpen) {
  const TabularDataset data = mixed_rows();

  const Eigen::VectorXi below =
      PropertyPredicate::numeric_less_than("age", 30.0).evaluate(data);
  EXPECT_EQ(below.sum(), 2);

  const Eigen::VectorXi range =
      PropertyPredicate::numeric_range("age", 20.0, 50.0).evaluate(data);
  ASSERT_EQ(range.size(), 6);
  EXPECT_EQ(range[0], 0);
  EXPECT_EQ(range[1], 1);
  EXPECT_EQ(range[2], 1);
  EXPECT_EQ(range[3], 1);
  EXPECT_EQ(range[4], 0);
  EXPECT_EQ(range[5], 0);
}

TEST(PropertyPredicate, ClassifierTiesCountAsComplement) {
  const PropertyClassifier tied = constant_classifier(0.0);
  const PropertyPredicate pred = PropertyPredicate::classifier_based(tied);
  const Eigen::MatrixXd points = Eigen::MatrixXd::Random(50, 2);

  const Eigen::VectorXi hits = pred.evaluate(points);
  EXPECT_EQ(hits.sum(), 0);

  const PropertyClassifier positive = constant_classifier(10.0);
  EXPECT_EQ(PropertyPredicate::classifier_based(positive)
                .evaluate(points)
                .sum(),
            50);

  EXPECT_THROW(pred.evaluate(mixed_rows()), InputError);
  EXPECT_THROW(
      PropertyPredicate::categorical_equals("group", "a").evaluate(points),
      InputError);
}

TEST(PropertyPredicate, OneVsRestFractionsArePartitionOfUnity) {
  const TabularDataset data = mixed_rows();
  double total = 0.0;
  for (const char* cat : {"a", "b", "c"}) {
    const Eigen::VectorXi hits =
        PropertyPredicate::categorical_one_vs_rest("group", cat, 3)
            .evaluate(data);
    for (int i = 0; i < hits.size(); ++i) {
      EXPECT_TRUE(hits[i] == 0 || hits[i] == 1);
    }
    total += infer_proportion(data, PropertyPredicate::categorical_one_vs_rest(
                                        "group", cat, 3));
  }
  EXPECT_DOUBLE_EQ(total, 1.0);
}

TEST(InferProportion, MatchesBruteForceEnumeration) {
  TabularDataset data;
  data.schema = flag_schema();
  const int n = 2000;
  data.raw.resize(n, 1);
  for (int i = 0; i < n; ++i) {
    data.raw(i, 0) = i % 10 < 3 ? 1.0 : 0.0;
  }
  data.split.assign(n, SplitTag::kTrain);

  const PropertyPredicate pred =
      PropertyPredicate::categorical_equals("flag", "yes");
  int brute_force = 0;
  for (int i = 0; i < n; ++i) {
    brute_force += data.raw(i, 0) == 1.0 ? 1 : 0;
  }
  EXPECT_DOUBLE_EQ(infer_proportion(data, pred),
                   static_cast<double>(brute_force) / n);
  EXPECT_EQ(brute_force, 600);

  TabularDataset all_yes = data;
  all_yes.raw.setOnes();
  EXPECT_DOUBLE_EQ(infer_proportion(all_yes, pred), 1.0);

  TabularDataset empty;
  empty.schema = flag_schema();
  empty.raw.resize(0, 1);
  EXPECT_THROW(infer_proportion(empty, pred), InputError);
  EXPECT_THROW(infer_proportion(Eigen::MatrixXd(0, 2),
                                PropertyPredicate::classifier_based(
                                    constant_classifier(1.0))),
               InputError);
}

TEST(AbsDifference, MatchesPinnedCases) {
  EXPECT_DOUBLE_EQ(abs_difference(0.5, 0.5), 0.0);
  EXPECT_NEAR(abs_difference(0.6743, 0.6705), 0.0038, 1e-12);

  RngStream rng(901, 0);
  for (int i = 0; i < 100; ++i) {
    const double a = rng.uniform();
    const double b = rng.uniform();
    EXPECT_DOUBLE_EQ(abs_difference(a, b), abs_difference(b, a));
  }

  EXPECT_THROW(abs_difference(-0.01, 0.5), InputError);
  EXPECT_THROW(abs_difference(0.5, 1.01), InputError);
}

TEST(AttackReport, CarriesTheDifferenceWhenRealIsKnown) {
  const TabularDataset data = bernoulli_flags(400, 0.25, 902, 0);
  const PropertyPredicate pred =
      PropertyPredicate::categorical_equals("flag", "yes");

  const AttackReport with_real =
      run_attack(data, pred, 0.25, "toy-model", "tabular-ancestral");
  EXPECT_EQ(with_real.predicate_id, pred.id);
  EXPECT_EQ(with_real.model_id, "toy-model");
  EXPECT_EQ(with_real.sampler_id, "tabular-ancestral");
  EXPECT_EQ(with_real.sample_count, 400);
  EXPECT_GE(with_real.inferred, 0.0);
  EXPECT_LE(with_real.inferred, 1.0);
  ASSERT_TRUE(with_real.real_proportion.has_value());
  ASSERT_TRUE(with_real.difference.has_value());
  EXPECT_DOUBLE_EQ(*with_real.difference,
                   std::abs(with_real.inferred - 0.25));

  const AttackReport blind =
      run_attack(data, pred, std::nullopt, "toy-model", "tabular-ancestral");
  EXPECT_FALSE(blind.real_proportion.has_value());
  EXPECT_FALSE(blind.difference.has_value());
}

TEST(InferProportion, UnbiasedOverDisjointBatches) {
  const double p = 0.37;
  const int batches = 100;
  const int batch_size = 500;
  const PropertyPredicate pred =
      PropertyPredicate::categorical_equals("flag", "yes");

  double sum = 0.0;
  for (int b = 0; b < batches; ++b) {
    sum += infer_proportion(
        bernoulli_flags(batch_size, p, 903, static_cast<std::uint64_t>(b)),
        pred);
  }
  const double mean = sum / batches;
  const double se = std::sqrt(p * (1.0 - p) / (batches * batch_size));
  EXPECT_NEAR(mean, p, 3.0 * se);
}

TEST(EstimatorStatistics, StdAcrossSeedsMatchesBinomialOracle) {
  const int seeds = 20;
  const int m = 500;
  const PropertyPredicate pred =
      PropertyPredicate::categorical_equals("flag", "yes");

  Eigen::VectorXd estimates(seeds);
  for (int s = 0; s < seeds; ++s) {
    estimates[s] = infer_proportion(
        bernoulli_flags(m, 0.5, 904, static_cast<std::uint64_t>(s)), pred);
  }
  const double mean = estimates.mean();
  const double sd =
      std::sqrt((estimates.array() - mean).square().sum() / (seeds - 1));
  EXPECT_NEAR(sd, std::sqrt(0.25 / m), 0.005);
}

TEST(EstimatorStatistics, FluctuationsShrinkAsRootM) {
  const std::vector<int> counts = {500, 1000, 2000, 4000, 8000, 16000, 32000};
  const int streams = 100;
  const double p = 0.5;

  Eigen::VectorXd mean_abs_dev = Eigen::VectorXd::Zero(counts.size());
  for (int s = 0; s < streams; ++s) {
    RngStream rng(905, static_cast<std::uint64_t>(s));
    int hits = 0;
    int drawn = 0;
    for (std::size_t k = 0; k < counts.size(); ++k) {
      for (; drawn < counts[k]; ++drawn) {
        hits += rng.uniform() < p ? 1 : 0;
      }
      mean_abs_dev[k] +=
          std::abs(static_cast<double>(hits) / counts[k] - p) / streams;
    }
  }

  double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
  const int k = static_cast<int>(counts.size());
  for (int i = 0; i < k; ++i) {
    const double x = std::log(static_cast<double>(counts[i]));
    const double y = std::log(mean_abs_dev[i]);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  const double slope = (k * sxy - sx * sy) / (k * sxx - sx * sx);
  EXPECT_NEAR(slope, -0.5, 0.15);
}

TEST(StabilityCurve, AllPositiveGeneratorIsFlatAtOne) {
  RngStream net_rng(906, 0);
  ContinuousModel model;
  model.schedule = NoiseSchedule::vp_discrete(100);
  model.net = DenoiserNet(2, {8}, 4, 100.0, PredictionTarget::kNoise, net_rng);
  const PropertyClassifier positive = constant_classifier(10.0);
  const PropertyPredicate pred = PropertyPredicate::classifier_based(positive);

  RngStream rng(906, 1);
  const std::vector<StabilityPoint> curve = stability_curve(
      model, SamplerConfig::ancestral(100), pred, {5, 10}, rng);
  ASSERT_EQ(curve.size(), 2u);
  EXPECT_EQ(curve[0].m, 5);
  EXPECT_EQ(curve[1].m, 10);
  EXPECT_DOUBLE_EQ(curve[0].inferred, 1.0);
  EXPECT_DOUBLE_EQ(curve[1].inferred, 1.0);

  RngStream rng2(906, 2);
  EXPECT_THROW(stability_curve(model, SamplerConfig::ancestral(100), pred,
                               {10, 5}, rng2),
               InputError);
  EXPECT_THROW(stability_curve(model, SamplerConfig::ancestral(100), pred,
                               {0, 5}, rng2),
               InputError);
  EXPECT_TRUE(stability_curve(model, SamplerConfig::ancestral(100), pred, {},
                              rng2)
                  .empty());
}

TEST(StabilityCurve, SameSeedReproducesTheCurve) {
  RngStream net_rng(907, 0);
  ContinuousModel model;
  model.schedule = NoiseSchedule::vp_discrete(100);
  model.net = DenoiserNet(2, {8}, 4, 100.0, PredictionTarget::kScore, net_rng);
  const PropertyClassifier clf = constant_classifier(0.3);
  const PropertyPredicate pred = PropertyPredicate::classifier_based(clf);

  RngStream rng_a(907, 1);
  RngStream rng_b(907, 1);
  const auto a = stability_curve(model, SamplerConfig::ancestral(100), pred,
                                 {20, 40}, rng_a);
  const auto b = stability_curve(model, SamplerConfig::ancestral(100), pred,
                                 {20, 40}, rng_b);
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].m, b[i].m);
    EXPECT_DOUBLE_EQ(a[i].inferred, b[i].inferred);
  }
}

TEST(PlantedProportion, MatchesClosedFormsAndMonteCarlo) {
  TabularGenSpec spec;
  spec.schema.columns = {
      {"age", ColumnKind::kNumeric, {}},
      {"score", ColumnKind::kNumeric, {}},
      {"group", ColumnKind::kCategorical, {"a", "b"}},
  };
  spec.label_column = "group";
  spec.label_probs = {0.3, 0.7};
  spec.num_given_label["age"] = {{1.0, 1.0}, {-1.0, 1.0}};
  spec.num_given_label["score"] = {{0.5, 0.5}, {-0.5, 0.5}};

  EXPECT_DOUBLE_EQ(
      planted_proportion(spec,
                         PropertyPredicate::categorical_equals("group", "a")),
      0.3);
  EXPECT_DOUBLE_EQ(planted_proportion(spec,
                                      PropertyPredicate::categorical_one_vs_rest(
                                          "group", "b", 2)),
                   0.7);

  const double expect_age =
      0.3 * normal_cdf((0.0 - 1.0) / 1.0) + 0.7 * normal_cdf((0.0 + 1.0) / 1.0);
  EXPECT_NEAR(planted_proportion(
                  spec, PropertyPredicate::numeric_less_than("age", 0.0)),
              expect_age, 1e-12);

  const PropertyPredicate range =
      PropertyPredicate::numeric_range("score", -0.25, 0.75);
  const double expect_range =
      0.3 * (normal_cdf((0.75 - 0.5) / 0.5) - normal_cdf((-0.25 - 0.5) / 0.5)) +
      0.7 * (normal_cdf((0.75 + 0.5) / 0.5) - normal_cdf((-0.25 + 0.5) / 0.5));
  EXPECT_NEAR(planted_proportion(spec, range), expect_range, 1e-12);

  RngStream rng(908, 0);
  const TabularDataset draws = generate_tabular(spec, 200000, rng);
  for (const PropertyPredicate& pred :
       {PropertyPredicate::categorical_equals("group", "a"),
        PropertyPredicate::numeric_less_than("age", 0.0), range}) {
    const double planted = planted_proportion(spec, pred);
    const double se = std::sqrt(planted * (1.0 - planted) / draws.rows());
    EXPECT_NEAR(infer_proportion(draws, pred), planted, 4.0 * se) << pred.id;
  }

  EXPECT_THROW(planted_proportion(
                   spec, PropertyPredicate::classifier_based(
                             constant_classifier(1.0))),
               InputError);
}

TEST(StabilityCurve, FlattensOnATrainedToyModel) {
  TabularGenSpec spec;
  spec.schema.columns = {
      {"age", ColumnKind::kNumeric, {}},
      {"sex", ColumnKind::kCategorical, {"female", "male"}},
  };
  spec.label_column = "sex";
  spec.label_probs = {0.3295, 0.6705};
  spec.num_given_label["age"] = {{1.0, 1.0}, {-1.0, 1.0}};

  RngStream data_rng(909, 0);
  const TabularDataset train = generate_tabular(spec, 4000, data_rng);

  TabTrainConfig config;
  config.hidden_dims = {64};
  config.time_embed_dim = 16;
  RngStream train_rng(909, 1);
  const TabularModel model = train_tabddpm(
      train, config, NoiseSchedule::vp_discrete(100), 40, train_rng);

  const PropertyPredicate pred =
      PropertyPredicate::categorical_equals("sex", "male");
  RngStream sample_rng(909, 2);
  const std::vector<StabilityPoint> curve =
      stability_curve(model, pred, {5000, 50000}, sample_rng);
  ASSERT_EQ(curve.size(), 2u);
  EXPECT_LT(std::abs(curve[0].inferred - curve[1].inferred), 0.01);
  EXPECT_NEAR(curve[1].inferred, 0.6705, 0.03);
}

}  // namespace
}  // namespace prisampler
