#include <gtest/gtest.h>

#include <nlohmann/json.hpp>

#include "pcs/metrics.h"
#include "test_util.h"

namespace {

using pcs::Outcome;
using pcs::ScoredPair;

TEST(PredictOutcome, UsesStrictMargin) {
  EXPECT_EQ(pcs::predict_outcome(1.0, 0.0, 0.5), Outcome::kLeft);
  EXPECT_EQ(pcs::predict_outcome(0.0, 1.0, 0.5), Outcome::kRight);
  EXPECT_EQ(pcs::predict_outcome(0.5, 0.0, 0.5), Outcome::kTie);
  EXPECT_EQ(pcs::predict_outcome(0.2, 0.2, 0.0), Outcome::kTie);
}

TEST(Accuracy2, IgnoresTiesAndCountsEqualScoresWrong) {
  const std::vector<ScoredPair> p{{1, 0, Outcome::kLeft},
                                  {1, 0, Outcome::kRight},
                                  {0, 1, Outcome::kRight},
                                  {3, 3, Outcome::kLeft},
                                  {5, 0, Outcome::kTie}};
  EXPECT_DOUBLE_EQ(pcs::accuracy_2class(p), 0.5);
}

TEST(Accuracy2, ThrowsWithoutNonTies) {
  const std::vector<ScoredPair> p{{1, 0, Outcome::kTie}};
  EXPECT_THROW(pcs::accuracy_2class(p), pcs::Error);
}

TEST(Accuracy3, HandValues) {
  const std::vector<ScoredPair> p{{1, 0, Outcome::kLeft},
                                  {0.1, 0, Outcome::kTie},
                                  {0.1, 0, Outcome::kLeft},
                                  {0, 2, Outcome::kTie}};
  EXPECT_DOUBLE_EQ(pcs::accuracy_3class(p, 0.5), 0.5);
  EXPECT_DOUBLE_EQ(pcs::accuracy_3class(p, 0.0), 0.5);
  EXPECT_DOUBLE_EQ(pcs::accuracy_3class(p, 5.0), 0.5);
}

// Property: at gamma 0 with no ties in the data, 3-class accuracy equals
// 2-class accuracy whenever no scores are equal.
TEST(Accuracy3, ReducesToAccuracy2WithoutTies) {
  std::vector<ScoredPair> p;
  for (int k = 0; k < 50; ++k) {
    p.push_back({std::sin(k * 1.3), std::cos(k * 0.7), k % 2 ? Outcome::kLeft : Outcome::kRight});
  }
  EXPECT_DOUBLE_EQ(pcs::accuracy_3class(p, 0.0), pcs::accuracy_2class(p));
}

TEST(MisclassifiedLoss, AveragesOnlyMistakes) {
  const std::vector<ScoredPair> p{{1, 0, Outcome::kLeft},    // right
                                  {0, 1, Outcome::kLeft},    // hinge 0.5 + 1
                                  {0, 2, Outcome::kTie},     // tie 2 - 0.5
                                  {0.1, 0, Outcome::kTie}};  // right
  const auto m = pcs::misclassified_loss(p, 0.5);
  EXPECT_EQ(m.count, 2u);
  ASSERT_TRUE(m.mean.has_value());
  EXPECT_DOUBLE_EQ(*m.mean, (1.5 + 1.5) / 2);
  EXPECT_FALSE(pcs::misclassified_loss(std::span(p).first(1), 0.5).mean.has_value());
}

TEST(Histogram, BinsSignedDifferencePerClass) {
  const std::vector<ScoredPair> p{{0.25, 0, Outcome::kLeft},
                                  {0, 0.25, Outcome::kLeft},
                                  {0.05, 0, Outcome::kTie},
                                  {1.0, 0, Outcome::kRight}};
  const auto h = pcs::rank_diff_histogram(p, 0.1);
  EXPECT_EQ(h.counts[0], 2u);
  EXPECT_EQ(h.counts[1], 1u);
  EXPECT_EQ(h.counts[2], 1u);
  EXPECT_EQ(h.bins[0].at(2), 1u);
  EXPECT_EQ(h.bins[0].at(-3), 1u);
  EXPECT_EQ(h.bins[1].at(0), 1u);
  EXPECT_DOUBLE_EQ(*h.mean_abs_diff[0], 0.25);
  EXPECT_FALSE(pcs::rank_diff_histogram({}, 0.1).mean_abs_diff[1].has_value());
  EXPECT_THROW(pcs::rank_diff_histogram(p, 0.0), pcs::Error);
  const auto csv = pcs::histogram_to_csv(h);
  EXPECT_NE(csv.find('\n'), std::string::npos);
}

TEST(Evaluate, ConfusionAndTieRecall) {
  const std::vector<ScoredPair> p{{1, 0, Outcome::kLeft},
                                  {0, 0, Outcome::kTie},
                                  {2, 0, Outcome::kTie},
                                  {0, 1, Outcome::kRight}};
  const auto r = pcs::evaluate(p, 0.5);
  EXPECT_EQ(r.confusion[0][0], 1u);
  EXPECT_EQ(r.confusion[1][1], 1u);
  EXPECT_EQ(r.confusion[1][0], 1u);
  EXPECT_EQ(r.confusion[2][2], 1u);
  EXPECT_DOUBLE_EQ(*r.tie_recall, 0.5);
  EXPECT_DOUBLE_EQ(*r.accuracy2, 1.0);
  EXPECT_DOUBLE_EQ(r.accuracy3, 0.75);
  EXPECT_EQ(r.n_misclassified, 1u);
  const auto j = nlohmann::json::parse(pcs::report_to_json(r));
  EXPECT_DOUBLE_EQ(j.at("accuracy3").get<double>(), 0.75);
  EXPECT_DOUBLE_EQ(j.at("gamma").get<double>(), 0.5);
}

TEST(Evaluate, AllTiesHasNoAccuracy2) {
  const std::vector<ScoredPair> p{{0, 0, Outcome::kTie}};
  const auto r = pcs::evaluate(p, 0.1);
  EXPECT_FALSE(r.accuracy2.has_value());
  EXPECT_DOUBLE_EQ(r.accuracy3, 1.0);
}

TEST(ScorePairs, TableUsesDefaultForUnknownItems) {
  pcs::ScoreTable t;
  t.scores = {{"a", 2.0}};
  t.default_score = -1.0;
  const std::vector cs{testutil::cmp("a", "zz", Outcome::kLeft)};
  const auto p = pcs::score_pairs(t, cs);
  ASSERT_EQ(p.size(), 1u);
  EXPECT_EQ(p[0].f_left, 2.0);
  EXPECT_EQ(p[0].f_right, -1.0);
  EXPECT_EQ(p[0].y, Outcome::kLeft);
}

TEST(ScorePairs, ModelPathAgreesWithScoreTable) {
  pcs::Architecture arch;
  arch.input_dim = 2;
  arch.trunk_widths = {4};
  const auto params = pcs::init_params(arch, 6);
  pcs::ItemCatalog cat({testutil::item("a", {1, 2}), testutil::item("b", {-1, 0.5}),
                        testutil::item("c", {0, 3})});
  const std::vector cs{testutil::cmp("a", "b", Outcome::kLeft),
                       testutil::cmp("c", "a", Outcome::kTie)};
  const auto direct = pcs::score_pairs(params, cat, cs);
  const auto table = pcs::model_score_table(params, cat);
  EXPECT_EQ(table.method, "model");
  const auto via = pcs::score_pairs(table, cs);
  for (std::size_t k = 0; k < cs.size(); ++k) {
    EXPECT_EQ(direct[k].f_left, via[k].f_left);
    EXPECT_EQ(direct[k].f_right, via[k].f_right);
  }
}

}  // namespace
