#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "plagdet/evaluation.hpp"
#include "plagdet/pipeline.hpp"
#include "plagdet/synthetic.hpp"
#include "test_util.hpp"

namespace plagdet {
namespace {

RankedList list_of(std::size_t n) {
  RankedList rl;
  rl.query_id = "q";
  for (std::size_t i = 0; i < n; ++i)
    rl.entries.push_back({"d" + std::to_string(i), 1.0 - 0.01 * double(i), i});
  return rl;
}

Dataset labeled_db(const std::vector<Label>& labels) {
  std::vector<ImageRecord> recs;
  std::vector<float> vals;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    recs.push_back({"r" + std::to_string(i), labels[i], Split::train, ""});
    vals.push_back(1.0f + float(i));
  }
  return Dataset(recs, EmbeddingSet(1, vals));
}

TEST(Positives, PolicyRules) {
  const PositivePolicy policy;
  const auto db = labeled_db({Label::van_gogh, Label::other, Label::van_gogh});
  EXPECT_EQ(positives_for(Label::plagiarized, db, policy), (std::vector<bool>{true, false, true}));
  EXPECT_EQ(positives_for(Label::other, labeled_db({Label::van_gogh, Label::other}), policy),
            (std::vector<bool>{false, true}));
  EXPECT_EQ(positives_for(Label::van_gogh, labeled_db({Label::other, Label::other}), policy),
            (std::vector<bool>{false, false}));

  const auto with_plag = labeled_db({Label::plagiarized, Label::van_gogh, Label::other});
  for (Label q : kAllLabels) EXPECT_FALSE(positives_for(q, with_plag, policy)[0]);

  PositivePolicy alt;
  alt.plagiarized_matches_van_gogh = true;
  EXPECT_TRUE(positives_for(Label::plagiarized, with_plag, alt)[0]);
  EXPECT_TRUE(positives_for(Label::van_gogh, with_plag, alt)[0]);
  EXPECT_FALSE(positives_for(Label::other, with_plag, alt)[0]);
}

TEST(AveragePrecision, Examples) {
  EXPECT_DOUBLE_EQ(average_precision(list_of(5), {true, true, false, false, false}).ap, 1.0);
  // positives at ranks 1 and 3: (1/2)(1/1) + (1/2)(2/3)
  const auto r = average_precision(list_of(5), {true, false, true, false, false});
  EXPECT_NEAR(r.ap, 0.5 + 1.0 / 3.0, 1e-15);
  EXPECT_NEAR(r.ap, oracle::pr_staircase_ap({true, false, true, false, false}), 1e-15);
  EXPECT_DOUBLE_EQ(average_precision(list_of(7), {false, false, false, false, false, false, true}).ap,
                   1.0 / 7.0);
}

TEST(AveragePrecision, PrPoints) {
  const auto r = average_precision(list_of(4), {false, true, false, true});
  ASSERT_EQ(r.pr_points.size(), 4u);
  double total_dr = 0.0;
  for (const auto& p : r.pr_points) total_dr += p.delta_recall;
  EXPECT_DOUBLE_EQ(total_dr, 1.0);
  EXPECT_EQ(r.pr_points[1].k, 2u);
  EXPECT_DOUBLE_EQ(r.pr_points[1].precision, 0.5);
  EXPECT_DOUBLE_EQ(r.pr_points[1].delta_recall, 0.5);
  EXPECT_DOUBLE_EQ(r.pr_points[2].delta_recall, 0.0);
}

TEST(AveragePrecision, Errors) {
  EXPECT_THROW(average_precision(list_of(3), {false, false, false}), NoPositivesError);
  EXPECT_THROW(average_precision(list_of(3), {true}), UsageError);
}

TEST(AveragePrecision, OracleEquivalenceAndProperties) {
  std::mt19937_64 rng(31337);
  for (int t = 0; t < 1000; ++t) {
    const std::size_t n = 1 + rng() % 20;
    std::vector<bool> mask(n);
    bool any = false;
    for (std::size_t i = 0; i < n; ++i) any |= (mask[i] = rng() % 3 == 0);
    if (!any) mask[rng() % n] = true;

    const double ap = average_precision(list_of(n), mask).ap;
    EXPECT_NEAR(ap, oracle::pr_staircase_ap(mask), 1e-9);
    EXPECT_NEAR(ap, oracle::closed_form_ap(mask), 1e-9);
    EXPECT_GE(ap, 0.0);
    EXPECT_LE(ap, 1.0 + 1e-15);

    // AP == 1 exactly when every positive outranks every negative
    std::size_t first_neg = n, last_pos = 0;
    for (std::size_t i = 0; i < n; ++i) {
      if (!mask[i] && first_neg == n) first_neg = i;
      if (mask[i]) last_pos = i;
    }
    EXPECT_EQ(std::abs(ap - 1.0) < 1e-12, first_neg == n || last_pos < first_neg);

    // promoting a positive past an adjacent negative never lowers AP
    for (std::size_t i = 0; i + 1 < n; ++i) {
      if (!mask[i] && mask[i + 1]) {
        auto swapped = mask;
        swapped[i] = true;
        swapped[i + 1] = false;
        EXPECT_GE(average_precision(list_of(n), swapped).ap, ap - 1e-15);
      }
    }
  }
}

TEST(MeanAp, Examples) {
  const std::vector<APResult> two = {{"a", 1.0, {}}, {"b", 0.5, {}}};
  EXPECT_DOUBLE_EQ(mean_ap(two), 0.75);
  const std::vector<APResult> one = {{"a", 0.3, {}}};
  EXPECT_DOUBLE_EQ(mean_ap(one), 0.3);
  EXPECT_THROW(mean_ap(std::vector<APResult>{}), UsageError);
}

TEST(MeanAp, MatchesIndependentSummation) {
  std::mt19937_64 rng(8);
  std::vector<APResult> results;
  long double sum = 0;
  for (int i = 0; i < 300; ++i) {
    const double ap = std::uniform_real_distribution<double>(0, 1)(rng);
    results.push_back({"q" + std::to_string(i), ap, {}});
    sum += ap;
  }
  EXPECT_NEAR(mean_ap(results), static_cast<double>(sum / 300), 1e-12);
}

std::vector<Prediction> group_predictions(Label truth, std::size_t total, std::size_t correct) {
  std::vector<Prediction> out;
  const auto right = to_binary(truth);
  const auto wrong = right == BinaryLabel::authentic ? BinaryLabel::plagiarized : BinaryLabel::authentic;
  for (std::size_t i = 0; i < total; ++i) out.push_back({truth, i < correct ? right : wrong});
  return out;
}

TEST(AccuracyBreakdown, TableOneArithmetic) {
  // 98.0 / 96.0 / 97.5 over equal groups of 200
  std::vector<Prediction> preds;
  for (auto [l, c] : {std::pair{Label::van_gogh, 196}, {Label::plagiarized, 192}, {Label::other, 195}}) {
    auto g = group_predictions(l, 200, c);
    preds.insert(preds.end(), g.begin(), g.end());
  }
  const auto b = accuracy_breakdown(preds);
  EXPECT_DOUBLE_EQ(*b.van_gogh, 0.98);
  EXPECT_DOUBLE_EQ(*b.plagiarized, 0.96);
  EXPECT_DOUBLE_EQ(*b.other, 0.975);
  EXPECT_NEAR(b.overall, 0.972, 0.0005);
  EXPECT_EQ(format_percent(b.overall), "97.2%");
}

TEST(AccuracyBreakdown, AllCorrectAndAbsentGroup) {
  auto preds = group_predictions(Label::van_gogh, 5, 5);
  auto plag = group_predictions(Label::plagiarized, 3, 3);
  preds.insert(preds.end(), plag.begin(), plag.end());
  auto b = accuracy_breakdown(preds);
  EXPECT_EQ(*b.van_gogh, 1.0);
  EXPECT_EQ(*b.plagiarized, 1.0);
  EXPECT_FALSE(b.other.has_value());
  EXPECT_EQ(b.overall, 1.0);

  preds.push_back({Label::van_gogh, BinaryLabel::plagiarized});
  b = accuracy_breakdown(preds);
  EXPECT_NEAR(b.overall, 8.0 / 9.0, 1e-15);
  EXPECT_THROW(accuracy_breakdown(std::vector<Prediction>{}), UsageError);
}

TEST(AccuracyBreakdown, OverallIsWeightedMean) {
  std::mt19937_64 rng(6);
  for (int t = 0; t < 200; ++t) {
    std::vector<Prediction> preds;
    for (Label l : kAllLabels) {
      const std::size_t n = rng() % 30;
      auto g = group_predictions(l, n, n == 0 ? 0 : rng() % (n + 1));
      preds.insert(preds.end(), g.begin(), g.end());
    }
    if (preds.empty()) continue;
    const auto b = accuracy_breakdown(preds);
    double weighted = 0.0;
    for (Label l : kAllLabels)
      if (auto acc = b.for_label(l)) weighted += *acc * double(b.group_sizes[std::size_t(l)]);
    EXPECT_NEAR(b.overall, weighted / double(preds.size()), 1e-12);
  }
}

TEST(Report, MarkdownSchema) {
  EvalReport r;
  r.method = "baseline";
  r.accuracy.van_gogh = 0.98;
  r.accuracy.plagiarized = 0.96;
  r.accuracy.other = std::nullopt;
  r.accuracy.overall = 0.97;
  r.map = 0.29;
  EXPECT_EQ(markdown_table_header(),
            "| method | Van Gogh | Plagiarized | Other | Accuracy | mAP |\n|---|---|---|---|---|---|\n");
  EXPECT_EQ(markdown_row(r), "| baseline | 98.0% | 96.0% | n/a | 97.0% | 29.0% |\n");

  const auto back = eval_report_from_json(nlohmann::json::parse(to_json(r).dump()));
  EXPECT_EQ(markdown_row(back), markdown_row(r));
}

TEST(Pipeline, NoPositiveQueriesAreExcluded) {
  // database has no "other" items, so other-artist queries have nothing to find
  std::vector<ImageRecord> recs = {{"vg", Label::van_gogh, Split::train, ""},
                                   {"q_vg", Label::van_gogh, Split::test, ""},
                                   {"q_other", Label::other, Split::test, ""}};
  const Dataset ds(recs, EmbeddingSet(2, {1, 0, 1, 0.1f, 0, 1}));
  const auto r = evaluate_retrieval(ds, PositivePolicy{});
  ASSERT_EQ(r.per_query.size(), 1u);
  EXPECT_EQ(r.excluded, std::vector<std::string>{"q_other"});
  EXPECT_DOUBLE_EQ(*r.map, 1.0);
}

TEST(Pipeline, DatabaseVariantAddsOnlyPlagiarizedRows) {
  const auto ds = synthetic::generate(synthetic::separable_spec(3, 16, {20, 5, 5}));
  PositivePolicy without, with;
  with.include_plagiarized_in_db = true;
  const auto a = subset(ds, Split::train, without.database_labels());
  const auto b = subset(ds, Split::train, with.database_labels());
  EXPECT_EQ(b.size() - a.size(), 20u);
  for (const auto& r : b.records())
    if (r.label != Label::plagiarized) {
      EXPECT_NE(std::find(a.records().begin(), a.records().end(), r), a.records().end());
    }
}

TEST(Pipeline, SeparableBaselineIsEasy) {
  const auto ds = synthetic::generate(synthetic::separable_spec(17, 16, {100, 40, 40}));
  const auto report = evaluate_baseline(ds, EvalOptions{});
  EXPECT_GE(report.accuracy.overall, 0.99);
  EXPECT_GE(*report.map, 0.99);
}

}  // namespace
}  // namespace plagdet
