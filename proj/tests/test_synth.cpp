#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <vector>

#include "cads/synth.hpp"

using namespace cads;

namespace {

double rr_cv(const std::vector<std::int64_t>& peaks) {
  std::vector<double> rr;
  for (std::size_t i = 1; i < peaks.size(); ++i) rr.push_back(static_cast<double>(peaks[i] - peaks[i - 1]));
  const double mean = std::accumulate(rr.begin(), rr.end(), 0.0) / static_cast<double>(rr.size());
  double ss = 0.0;
  for (double v : rr) ss += (v - mean) * (v - mean);
  return std::sqrt(ss / static_cast<double>(rr.size())) / mean;
}

}  // namespace

TEST(GenerateEcg, TenSecondNormalRecord) {
  auto p = SynthParams::normal(7, 10.0);
  const auto ecg = generate_ecg(p);
  EXPECT_EQ(ecg.record.n_samples, 3600u);
  EXPECT_EQ(ecg.record.leads.size(), 1u);
  EXPECT_EQ(ecg.record.leads[0].size(), 3600u);
  // duration / mean_rr = 12.5 beats; jitter moves that by at most a couple.
  EXPECT_GE(ecg.rpeaks.size(), 10u);
  EXPECT_LE(ecg.rpeaks.size(), 15u);
  EXPECT_EQ(ecg.record.label_hint, Label::normal);
}

TEST(GenerateEcg, ZeroJitterGivesExactIntervals) {
  auto p = SynthParams::normal(3, 20.0);
  p.rr_jitter_cv = 0.0;
  const auto ecg = generate_ecg(p);
  const auto step = std::llround(p.mean_rr * p.sampling_frequency);
  ASSERT_GE(ecg.rpeaks.size(), 2u);
  for (std::size_t i = 1; i < ecg.rpeaks.size(); ++i) EXPECT_EQ(ecg.rpeaks[i] - ecg.rpeaks[i - 1], step);
}

TEST(GenerateEcg, DeterministicPerSeed) {
  auto p = SynthParams::arrhythmia(42, 30.0);
  p.noise_amplitude = 0.05;
  p.morphology_jitter = 0.1;
  const auto a = generate_ecg(p);
  const auto b = generate_ecg(p);
  EXPECT_EQ(write_csv_record(a.record), write_csv_record(b.record));
  EXPECT_EQ(a.rpeaks, b.rpeaks);
  p.seed = 43;
  EXPECT_NE(generate_ecg(p).record.leads, a.record.leads);
}

TEST(GenerateEcg, InvalidParams) {
  auto p = SynthParams::normal(1, 10.0);
  p.duration = 0;
  EXPECT_THROW(generate_ecg(p), InvalidParams);
  p = SynthParams::normal(1, 10.0);
  p.sampling_frequency = -1;
  EXPECT_THROW(generate_ecg(p), InvalidParams);
  p = SynthParams::normal(1, 1.0);  // shorter than two mean RR intervals
  EXPECT_THROW(generate_ecg(p), InvalidParams);
  p = SynthParams::normal(1, 10.0);
  p.rr_jitter_cv = 0.1;
  EXPECT_THROW(generate_ecg(p), InvalidParams);
  p = SynthParams::normal(1, 10.0);
  p.ectopic_rate = 0.1;
  EXPECT_THROW(generate_ecg(p), InvalidParams);
  p = SynthParams::arrhythmia(1, 10.0);
  p.rr_jitter_cv = 0.1;
  p.ectopic_rate = 0.1;
  EXPECT_THROW(generate_ecg(p), InvalidParams);
}

TEST(GenerateEcgProperty, NormalModeRrVariationBounded) {
  for (std::uint64_t seed = 1; seed <= 40; ++seed) {
    auto p = SynthParams::normal(seed, 60.0);
    p.rr_jitter_cv = 0.05;
    const auto ecg = generate_ecg(p);
    EXPECT_LE(rr_cv(ecg.rpeaks), 0.05) << "seed " << seed;
    EXPECT_TRUE(std::none_of(ecg.ectopic.begin(), ecg.ectopic.end(), [](bool e) { return e; }));
  }
}

TEST(GenerateEcgProperty, ArrhythmiaModeIsIrregularOrEctopic) {
  for (std::uint64_t seed = 1; seed <= 40; ++seed) {
    auto p = SynthParams::arrhythmia(seed, 60.0);
    if (seed % 2) {
      p.ectopic_rate = 0.0;  // rhythm irregularity alone
    } else {
      p.rr_jitter_cv = 0.0;  // ectopic beats alone
      p.ectopic_rate = 0.15;
    }
    const auto ecg = generate_ecg(p);
    const auto ectopic = static_cast<double>(std::count(ecg.ectopic.begin(), ecg.ectopic.end(), true));
    const bool irregular = rr_cv(ecg.rpeaks) >= 0.20;
    const bool enough_ectopic = ectopic / static_cast<double>(ecg.rpeaks.size()) >= 0.15;
    EXPECT_TRUE(irregular || enough_ectopic) << "seed " << seed;
  }
}

TEST(GenerateEcgProperty, RPeaksAreBeatMaxima) {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    auto p = seed % 2 ? SynthParams::normal(seed, 30.0) : SynthParams::arrhythmia(seed, 30.0);
    p.morphology_jitter = 0.1;
    const auto ecg = generate_ecg(p);
    const auto& x = ecg.record.leads[0];
    for (std::size_t i = 0; i < ecg.rpeaks.size(); ++i) {
      // The beat's span: halfway to each neighbour.
      const auto lo = i == 0 ? 0 : (ecg.rpeaks[i - 1] + ecg.rpeaks[i]) / 2;
      const auto hi = i + 1 == ecg.rpeaks.size() ? static_cast<std::int64_t>(x.size()) - 1
                                                 : (ecg.rpeaks[i] + ecg.rpeaks[i + 1]) / 2;
      const auto it = std::max_element(x.begin() + lo, x.begin() + hi + 1);
      EXPECT_LE(std::abs((it - x.begin()) - ecg.rpeaks[i]), 1) << "seed " << seed << " beat " << i;
    }
  }
}

TEST(GenerateEcgProperty, PeaksInsideRecordAndIncreasing) {
  for (std::uint64_t seed = 1; seed <= 30; ++seed) {
    const auto ecg = generate_ecg(SynthParams::arrhythmia(seed, 15.0));
    ASSERT_GE(ecg.rpeaks.size(), 2u);
    EXPECT_TRUE(std::is_sorted(ecg.rpeaks.begin(), ecg.rpeaks.end(), std::less_equal<>{}) &&
                std::adjacent_find(ecg.rpeaks.begin(), ecg.rpeaks.end()) == ecg.rpeaks.end());
    EXPECT_GE(ecg.rpeaks.front(), 0);
    EXPECT_LT(ecg.rpeaks.back(), static_cast<std::int64_t>(ecg.record.n_samples));
  }
}

TEST(Annotations, CodesFollowBeatKind) {
  const auto ecg = generate_ecg(SynthParams::arrhythmia(5, 30.0));
  const auto set = annotations_from(ecg);
  ASSERT_EQ(set.entries.size(), ecg.rpeaks.size());
  for (std::size_t i = 0; i < set.entries.size(); ++i) {
    EXPECT_EQ(set.entries[i].sample, ecg.rpeaks[i]);
    EXPECT_EQ(set.entries[i].type_code, ecg.ectopic[i] ? annotation_code::kPvc : annotation_code::kNormal);
  }
}

TEST(GenerateCorpus, TwentyPlusTwenty) {
  const auto corpus = generate_corpus(20, 20, 1, 60.0);
  ASSERT_EQ(corpus.size(), 40u);
  std::set<std::string> subjects;
  int normal = 0, arrhythmia = 0;
  for (const auto& e : corpus) {
    subjects.insert(e.record.subject_id);
    normal += e.record.label_hint == Label::normal;
    arrhythmia += e.record.label_hint == Label::arrhythmia;
    EXPECT_FALSE(e.annotations.entries.empty());
  }
  EXPECT_EQ(normal, 20);
  EXPECT_EQ(arrhythmia, 20);
  EXPECT_EQ(subjects.size(), 40u);
  EXPECT_EQ(corpus.front().record.record_id, "normal_000");
  EXPECT_EQ(corpus.back().record.record_id, "arrhythmia_019");
}

TEST(GenerateCorpus, EmptyAndDeterministic) {
  EXPECT_TRUE(generate_corpus(0, 0, 1, 60.0).empty());
  const auto a = generate_corpus(1, 1, 9, 20.0);
  const auto b = generate_corpus(1, 1, 9, 20.0);
  ASSERT_EQ(a.size(), 2u);
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].record, b[i].record);
    EXPECT_EQ(a[i].annotations, b[i].annotations);
  }
  EXPECT_THROW(generate_corpus(-1, 0, 1, 10.0), InvalidParams);
}

TEST(GenerateCorpus, SeedsDeriveFromBase) {
  // Record i uses base_seed + i, so shifting the base by one shifts records.
  const auto a = generate_corpus(3, 0, 10, 10.0);
  const auto b = generate_corpus(2, 0, 11, 10.0);
  EXPECT_EQ(a[1].record.leads, b[0].record.leads);
  EXPECT_EQ(a[2].record.leads, b[1].record.leads);
}
