#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>
#include <random>
#include <set>
#include <vector>

#include "cads/eval.hpp"

using namespace cads;

namespace {

const ConfusionMatrix kReferenceMatrix{528, 6, 38, 446};  // tn, fp, fn, tp

FeatureFrame frame(std::string subject, std::string record, int label, int index = 0) {
  FeatureFrame f;
  f.features.assign(kFeatureCount, 0.0);
  f.subject_id = std::move(subject);
  f.record_id = std::move(record);
  f.label = label;
  f.frame_index = index;
  return f;
}

// 20 normal + 20 arrhythmia subjects, one record each, a few frames per record.
std::vector<FeatureFrame> forty_subjects() {
  std::vector<FeatureFrame> out;
  for (int s = 0; s < 40; ++s) {
    const int label = s < 20 ? 0 : 1;
    const auto id = (label ? "arr_" : "nor_") + std::to_string(s);
    for (int k = 0; k < 3 + s % 4; ++k) out.push_back(frame("subj_" + id, "rec_" + id, label, k));
  }
  return out;
}

}  // namespace

TEST(SplitSizes, RoundingRule) {
  EXPECT_EQ(split_sizes(1018, {0.70, 0.15, 0.15}), (std::array<std::size_t, 3>{713, 153, 152}));
  EXPECT_EQ(split_sizes(100, {0.70, 0.15, 0.15}), (std::array<std::size_t, 3>{70, 15, 15}));
  EXPECT_EQ(split_sizes(3, {0.70, 0.15, 0.15}), (std::array<std::size_t, 3>{2, 0, 1}));
  EXPECT_THROW(split_sizes(2, {0.70, 0.15, 0.15}), TooFewFrames);
  EXPECT_THROW(split_sizes(100, {0.70, 0.15, 0.16}), InvalidParams);
}

TEST(SplitSizesProperty, ExhaustiveForAnyN) {
  for (std::size_t n = 3; n < 3000; n += 7) {
    const auto s = split_sizes(n, {0.70, 0.15, 0.15});
    EXPECT_EQ(s[0] + s[1] + s[2], n);
    EXPECT_EQ(s[0], static_cast<std::size_t>(std::llround(0.7 * static_cast<double>(n))));
  }
}

TEST(SplitFrames, DisjointExhaustiveDeterministic) {
  std::vector<int> items(1018);
  std::iota(items.begin(), items.end(), 0);
  const auto a = split_frames(items, {0.70, 0.15, 0.15}, 5);
  const auto b = split_frames(items, {0.70, 0.15, 0.15}, 5);
  EXPECT_EQ(a.train, b.train);
  EXPECT_EQ(a.validation, b.validation);
  EXPECT_EQ(a.test, b.test);
  EXPECT_EQ(a.train.size(), 713u);
  EXPECT_EQ(a.validation.size(), 153u);
  EXPECT_EQ(a.test.size(), 152u);
  std::vector<int> all = a.train;
  all.insert(all.end(), a.validation.begin(), a.validation.end());
  all.insert(all.end(), a.test.begin(), a.test.end());
  std::sort(all.begin(), all.end());
  EXPECT_EQ(all, items);
  EXPECT_NE(split_frames(items, {0.70, 0.15, 0.15}, 6).train, a.train);
}

TEST(SplitSubjectDisjoint, FortySubjectsHalfAndHalf) {
  const auto frames = forty_subjects();
  const auto s = split_subject_disjoint(frames, 0.5, 1);
  ASSERT_EQ(s.train_subjects.size(), 20u);
  ASSERT_EQ(s.test_subjects.size(), 20u);
  auto count_arr = [](const std::vector<std::string>& v) {
    return std::count_if(v.begin(), v.end(), [](const std::string& x) { return x.find("arr_") != std::string::npos; });
  };
  EXPECT_EQ(count_arr(s.train_subjects), 10);
  EXPECT_EQ(count_arr(s.test_subjects), 10);
}

TEST(SplitSubjectDisjointProperty, NoSubjectOnBothSides) {
  const auto frames = forty_subjects();
  for (std::uint64_t seed = 1; seed <= 30; ++seed) {
    const double fraction = 0.2 + 0.02 * static_cast<double>(seed);
    const auto s = split_subject_disjoint(frames, fraction, seed);
    std::vector<std::string> both;
    std::set_intersection(s.train_subjects.begin(), s.train_subjects.end(), s.test_subjects.begin(), s.test_subjects.end(),
                          std::back_inserter(both));
    EXPECT_TRUE(both.empty());
    EXPECT_EQ(s.train_subjects.size() + s.test_subjects.size(), 40u);
    const auto [train, test] = partition_by_subject(frames, s);
    EXPECT_EQ(train.size() + test.size(), frames.size());
    std::set<std::string> train_ids;
    for (const auto& f : train) train_ids.insert(f.subject_id);
    for (const auto& f : test) EXPECT_FALSE(train_ids.count(f.subject_id));
  }
}

TEST(SplitSubjectDisjoint, Errors) {
  const std::vector<FeatureFrame> one_each{frame("a", "ra", 0), frame("b", "rb", 1), frame("c", "rc", 1)};
  EXPECT_THROW(split_subject_disjoint(one_each), TooFewSubjects);
  const std::vector<FeatureFrame> mixed{frame("a", "r1", 0), frame("a", "r2", 1)};
  EXPECT_THROW(split_subject_disjoint(mixed), ShapeError);
  const std::vector<FeatureFrame> unknown{frame("a", "r1", -1)};
  EXPECT_THROW(split_subject_disjoint(unknown), ShapeError);
  EXPECT_THROW(split_subject_disjoint(forty_subjects(), 1.0), InvalidParams);
}

TEST(Confusion, HandCount) {
  const std::vector<int> p{1, 0, 1, 0}, y{1, 0, 0, 0};
  const auto m = confusion(p, y);
  EXPECT_EQ(m, (ConfusionMatrix{2, 1, 0, 1}));
  EXPECT_EQ(kReferenceMatrix.total(), 1018u);
  EXPECT_THROW(confusion(std::vector<int>{1}, std::vector<int>{1, 0}), ShapeError);
}

TEST(ConfusionProperty, CountsSumAndPerfectPredictions) {
  std::mt19937_64 rng(3);
  std::bernoulli_distribution coin(0.4);
  for (int t = 0; t < 100; ++t) {
    std::vector<int> p(rng() % 200), y(p.size());
    for (std::size_t i = 0; i < p.size(); ++i) {
      p[i] = coin(rng);
      y[i] = coin(rng);
    }
    EXPECT_EQ(confusion(p, y).total(), p.size());
    const auto self = confusion(y, y);
    EXPECT_EQ(self.fp + self.fn, 0u);
  }
}

TEST(Metrics, ReferenceMatrixPercentages) {
  const auto m = metrics(kReferenceMatrix);
  // Printed values, one decimal.
  EXPECT_NEAR(100 * m.tn_fraction, 51.9, 0.05);
  EXPECT_NEAR(100 * m.fn_fraction, 3.7, 0.05);
  EXPECT_NEAR(100 * m.fp_fraction, 0.6, 0.05);
  EXPECT_NEAR(100 * m.tp_fraction, 43.8, 0.05);
  EXPECT_NEAR(100 * *m.npv, 93.3, 0.05);
  EXPECT_NEAR(100 * *m.ppv, 98.7, 0.05);
  EXPECT_NEAR(100 * *m.specificity, 98.9, 0.05);
  EXPECT_NEAR(100 * *m.sensitivity, 92.1, 0.05);
  EXPECT_NEAR(100 * m.accuracy, 95.7, 0.05);
  EXPECT_EQ(m.accuracy, (528.0 + 446.0) / 1018.0);
}

TEST(Metrics, DegenerateAndPerfect) {
  const auto all = metrics({5, 0, 0, 7});
  EXPECT_EQ(all.accuracy, 1.0);
  EXPECT_EQ(*all.sensitivity, 1.0);
  EXPECT_EQ(*all.specificity, 1.0);
  EXPECT_EQ(*all.ppv, 1.0);
  EXPECT_EQ(*all.npv, 1.0);
  const auto none_positive = metrics({9, 0, 3, 0});
  EXPECT_FALSE(none_positive.ppv.has_value());
  EXPECT_EQ(*none_positive.sensitivity, 0.0);
  EXPECT_EQ(*none_positive.npv, 0.75);
  EXPECT_THROW(metrics({}), EmptyMatrix);
}

TEST(MetricsProperty, RatesInUnitInterval) {
  std::mt19937_64 rng(8);
  for (int t = 0; t < 200; ++t) {
    const ConfusionMatrix c{rng() % 50, rng() % 50, rng() % 50, rng() % 50 + 1};
    const auto m = metrics(c);
    for (const auto& r : {m.sensitivity, m.specificity, m.ppv, m.npv}) {
      if (r) {
        EXPECT_GE(*r, 0.0);
        EXPECT_LE(*r, 1.0);
      }
    }
    EXPECT_NEAR(m.tn_fraction + m.fp_fraction + m.fn_fraction + m.tp_fraction, 1.0, 1e-12);
  }
}

TEST(RenderConfusionTable, ReferenceMatrixLayout) {
  const auto text = render_confusion_table(kReferenceMatrix, "1018 sliced pieces (40 persons)");
  for (const char* s : {"528 (51.9%)", "38 (3.7%)", "6 (0.6%)", "446 (43.8%)", "93.3% 6.7%", "98.7% 1.3%",
                        "98.9% 1.1%", "92.1% 7.9%", "95.7% 4.3%", "Predicted ECG data", "Actual ECG data"}) {
    EXPECT_NE(text.find(s), std::string::npos) << s;
  }
  // Row order: the Normal row comes before the Arrhythmia row, corner last.
  EXPECT_LT(text.find("528 (51.9%)"), text.find("6 (0.6%)"));
  EXPECT_GT(text.rfind("95.7% 4.3%"), text.find("98.7% 1.3%"));
  const auto undefined = render_confusion_table({9, 0, 3, 0}, "x");
  EXPECT_NE(undefined.find("n/a n/a"), std::string::npos);
}

TEST(Vote, Majority) {
  EXPECT_EQ(vote(std::vector<int>{1, 1, 0}), 1);
  EXPECT_EQ(vote(std::vector<int>{1, 0}), 1);
  EXPECT_EQ(vote(std::vector<int>{0, 0, 0, 1}), 0);
  EXPECT_THROW(vote(std::vector<int>{}), EmptyRecord);
}

TEST(VoteProperty, InvariantUnderReordering) {
  std::mt19937_64 rng(4);
  for (int t = 0; t < 200; ++t) {
    std::vector<int> v(1 + rng() % 30);
    for (auto& x : v) x = static_cast<int>(rng() % 2);
    const int before = vote(v);
    std::shuffle(v.begin(), v.end(), rng);
    EXPECT_EQ(vote(v), before);
    const auto ones = static_cast<std::size_t>(std::count(v.begin(), v.end(), 1));
    EXPECT_EQ(before, 2 * ones >= v.size() ? 1 : 0);
  }
}

TEST(VotePerRecord, GroupsAndSorts) {
  const std::vector<FeatureFrame> frames{frame("s2", "r2", 1, 0), frame("s1", "r1", 0, 0), frame("s2", "r2", 1, 1),
                                         frame("s1", "r1", 0, 1), frame("s1", "r1", 0, 2)};
  const std::vector<int> preds{0, 0, 1, 1, 0};
  const auto d = vote_per_record(frames, preds);
  ASSERT_EQ(d.size(), 2u);
  EXPECT_EQ(d[0], (RecordDecision{"r1", "s1", 0, 1, 3, 0}));
  EXPECT_EQ(d[1], (RecordDecision{"r2", "s2", 1, 1, 2, 1}));
}

TEST(EvaluationReport, BuildAndJsonRoundTrip) {
  const auto frames = forty_subjects();
  std::vector<int> preds;
  for (std::size_t i = 0; i < frames.size(); ++i) preds.push_back(i % 5 == 0 ? 1 - frames[i].label : frames[i].label);
  SplitDescription split{"subject-disjoint", 7, {0.5, 0.5}, {10, 20}, {"a"}, {"b"}};
  TrainTelemetry t;
  t.iterations = 5;
  t.loss_history = {{0.5, 0.6}};
  const auto r = build_report(frames, preds, split, t);
  const std::vector<int> labels = [&] {
    std::vector<int> y;
    for (const auto& f : frames) y.push_back(f.label);
    return y;
  }();
  EXPECT_EQ(r.confusion, confusion(preds, labels));
  EXPECT_EQ(r.metrics.accuracy, static_cast<double>(r.confusion.tn + r.confusion.tp) / static_cast<double>(frames.size()));
  EXPECT_EQ(r.records.size(), 40u);
  EXPECT_EQ(r.subject_count, 40u);
  ASSERT_TRUE(r.record_confusion.has_value());
  EXPECT_EQ(r.record_confusion->total(), 40u);
  EXPECT_EQ(report_from_json(report_to_json(r)), r);
  EXPECT_EQ(report_from_json(ordered_json::parse(report_to_json(r).dump())), r);
  const auto text = render_text(r);
  EXPECT_NE(text.find(std::to_string(frames.size()) + " sliced pieces (40 persons)"), std::string::npos);
  EXPECT_NE(text.find("record accuracy"), std::string::npos);
  EXPECT_THROW(report_from_json(ordered_json::parse("{}")), FormatError);
}

TEST(PredictionsCsv, OneRowPerFrame) {
  const std::vector<FeatureFrame> frames{frame("s", "r", 1, 0), frame("s", "r", 1, 3)};
  const std::vector<double> p{0.25, 0.5};
  EXPECT_EQ(write_predictions_csv(frames, p), "record_id,frame_index,label,probability,class\nr,0,1,0.25,0\nr,3,1,0.5,1\n");
  EXPECT_THROW(write_predictions_csv(frames, std::vector<double>{0.1}), ShapeError);
}
