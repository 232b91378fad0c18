#pragma once

// Dataset splits, confusion matrices, per-record voting and the evaluation
// report (text table + JSON).

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <map>
#include <numeric>
#include <optional>
#include <random>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "cads/error.hpp"
#include "cads/model_io.hpp"
#include "cads/rrif.hpp"
#include "cads/train.hpp"

namespace cads {

// ---------------------------------------------------------------------------
// Splits

template <typename T>
struct Split3 {
  std::vector<T> train;
  std::vector<T> validation;
  std::vector<T> test;
};

inline std::array<std::size_t, 3> split_sizes(std::size_t n, const std::array<double, 3>& fractions) {
  const double sum = fractions[0] + fractions[1] + fractions[2];
  if (std::abs(sum - 1.0) > 1e-9) throw InvalidParams("split fractions must sum to 1");
  for (double f : fractions) {
    if (f < 0) throw InvalidParams("split fractions must be non-negative");
  }
  if (n < 3) throw TooFewFrames("need at least 3 frames to split, got " + std::to_string(n));
  const auto n_train = static_cast<std::size_t>(std::llround(fractions[0] * static_cast<double>(n)));
  const auto n_val = std::min(n - n_train, static_cast<std::size_t>(std::llround(fractions[1] * static_cast<double>(n))));
  return {n_train, n_val, n - n_train - n_val};
}

// Seeded shuffle, then round(f0*N) train, round(f1*N) validation, rest test.
template <typename T>
Split3<T> split_frames(std::vector<T> items, const std::array<double, 3>& fractions = {0.70, 0.15, 0.15},
                       std::uint64_t seed = 1) {
  const auto sizes = split_sizes(items.size(), fractions);
  std::mt19937_64 rng(seed);
  std::shuffle(items.begin(), items.end(), rng);
  Split3<T> out;
  auto first = std::make_move_iterator(items.begin());
  out.train.assign(first, first + static_cast<std::ptrdiff_t>(sizes[0]));
  out.validation.assign(first + static_cast<std::ptrdiff_t>(sizes[0]),
                        first + static_cast<std::ptrdiff_t>(sizes[0] + sizes[1]));
  out.test.assign(first + static_cast<std::ptrdiff_t>(sizes[0] + sizes[1]), std::make_move_iterator(items.end()));
  return out;
}

struct SubjectSplit {
  std::vector<std::string> train_subjects;  // sorted
  std::vector<std::string> test_subjects;   // sorted
};

// Subjects are split per class: round(train_fraction * n_class) of each class
// go to training, the rest to test, after a seeded shuffle. Every subject needs
// a single label in {0, 1}; each class needs at least two subjects.
template <typename T, typename SubjectOf, typename LabelOf>
SubjectSplit split_subject_disjoint(const std::vector<T>& items, double train_fraction, std::uint64_t seed,
                                    SubjectOf subject_of, LabelOf label_of) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) throw InvalidParams("train fraction must lie in (0, 1)");
  std::map<std::string, int> subject_label;
  for (const auto& item : items) {
    const std::string subject = subject_of(item);
    const int label = label_of(item);
    if (label != 0 && label != 1) throw ShapeError("subject '" + subject + "' has no usable label");
    auto [it, inserted] = subject_label.emplace(subject, label);
    if (!inserted && it->second != label) throw ShapeError("subject '" + subject + "' has mixed labels");
  }
  std::array<std::vector<std::string>, 2> by_class;
  for (const auto& [subject, label] : subject_label) by_class[static_cast<std::size_t>(label)].push_back(subject);
  for (int c = 0; c < 2; ++c) {
    if (by_class[static_cast<std::size_t>(c)].size() < 2) {
      throw TooFewSubjects("class " + std::to_string(c) + " has " + std::to_string(by_class[static_cast<std::size_t>(c)].size()) +
                           " subjects, need at least 2");
    }
  }
  std::mt19937_64 rng(seed);
  SubjectSplit out;
  for (auto& subjects : by_class) {
    std::shuffle(subjects.begin(), subjects.end(), rng);
    auto n_train = static_cast<std::size_t>(std::llround(train_fraction * static_cast<double>(subjects.size())));
    n_train = std::clamp<std::size_t>(n_train, 1, subjects.size() - 1);
    out.train_subjects.insert(out.train_subjects.end(), subjects.begin(), subjects.begin() + static_cast<std::ptrdiff_t>(n_train));
    out.test_subjects.insert(out.test_subjects.end(), subjects.begin() + static_cast<std::ptrdiff_t>(n_train), subjects.end());
  }
  std::sort(out.train_subjects.begin(), out.train_subjects.end());
  std::sort(out.test_subjects.begin(), out.test_subjects.end());
  return out;
}

inline SubjectSplit split_subject_disjoint(const std::vector<FeatureFrame>& frames, double train_fraction = 0.5,
                                           std::uint64_t seed = 1) {
  return split_subject_disjoint(
      frames, train_fraction, seed, [](const FeatureFrame& f) { return f.subject_id; },
      [](const FeatureFrame& f) { return f.label; });
}

// Partitions frames by the subject sets of a SubjectSplit; frames of subjects
// on neither side are dropped.
inline std::pair<std::vector<FeatureFrame>, std::vector<FeatureFrame>> partition_by_subject(
    const std::vector<FeatureFrame>& frames, const SubjectSplit& split) {
  const std::set<std::string> train(split.train_subjects.begin(), split.train_subjects.end());
  const std::set<std::string> test(split.test_subjects.begin(), split.test_subjects.end());
  std::pair<std::vector<FeatureFrame>, std::vector<FeatureFrame>> out;
  for (const auto& f : frames) {
    if (train.count(f.subject_id)) {
      out.first.push_back(f);
    } else if (test.count(f.subject_id)) {
      out.second.push_back(f);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Confusion matrix and metrics (positive class = arrhythmia = 1)

struct ConfusionMatrix {
  std::uint64_t tn = 0;
  std::uint64_t fp = 0;
  std::uint64_t fn = 0;
  std::uint64_t tp = 0;

  std::uint64_t total() const { return tn + fp + fn + tp; }
  bool operator==(const ConfusionMatrix&) const = default;
};

inline ConfusionMatrix confusion(std::span<const int> predictions, std::span<const int> labels) {
  if (predictions.size() != labels.size()) {
    throw ShapeError(std::to_string(predictions.size()) + " predictions for " + std::to_string(labels.size()) + " labels");
  }
  ConfusionMatrix m;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    const int p = predictions[i];
    const int y = labels[i];
    if ((p != 0 && p != 1) || (y != 0 && y != 1)) throw ShapeError("predictions and labels must be 0 or 1");
    if (p == 1) {
      ++(y == 1 ? m.tp : m.fp);
    } else {
      ++(y == 1 ? m.fn : m.tn);
    }
  }
  return m;
}

// nullopt marks a rate whose denominator is zero.
using Rate = std::optional<double>;

struct Metrics {
  double accuracy = 0.0;
  Rate sensitivity;
  Rate specificity;
  Rate ppv;
  Rate npv;
  // Cell counts as fractions of the total.
  double tn_fraction = 0.0;
  double fp_fraction = 0.0;
  double fn_fraction = 0.0;
  double tp_fraction = 0.0;

  bool operator==(const Metrics&) const = default;
};

inline Metrics metrics(const ConfusionMatrix& m) {
  const auto total = m.total();
  if (total == 0) throw EmptyMatrix("confusion matrix is empty");
  auto ratio = [](std::uint64_t num, std::uint64_t den) -> Rate {
    if (den == 0) return std::nullopt;
    return static_cast<double>(num) / static_cast<double>(den);
  };
  const auto t = static_cast<double>(total);
  Metrics out;
  out.accuracy = static_cast<double>(m.tp + m.tn) / t;
  out.sensitivity = ratio(m.tp, m.tp + m.fn);
  out.specificity = ratio(m.tn, m.tn + m.fp);
  out.ppv = ratio(m.tp, m.tp + m.fp);
  out.npv = ratio(m.tn, m.tn + m.fn);
  out.tn_fraction = static_cast<double>(m.tn) / t;
  out.fp_fraction = static_cast<double>(m.fp) / t;
  out.fn_fraction = static_cast<double>(m.fn) / t;
  out.tp_fraction = static_cast<double>(m.tp) / t;
  return out;
}

// ---------------------------------------------------------------------------
// Per-record voting

// Majority of frame classes; a tie counts as arrhythmia.
inline int vote(std::span<const int> frame_classes) {
  if (frame_classes.empty()) throw EmptyRecord("record has no frames to vote on");
  std::size_t positive = 0;
  for (int c : frame_classes) positive += c == 1 ? 1 : 0;
  return 2 * positive >= frame_classes.size() ? 1 : 0;
}

struct RecordDecision {
  std::string record_id;
  std::string subject_id;
  int label = kLabelUnknown;
  std::size_t frames_positive = 0;
  std::size_t frames_total = 0;
  int vote = 0;

  bool operator==(const RecordDecision&) const = default;
};

// Groups frame predictions by record id (sorted) and votes each group.
inline std::vector<RecordDecision> vote_per_record(const std::vector<FeatureFrame>& frames, std::span<const int> predictions) {
  if (frames.size() != predictions.size()) throw ShapeError("one prediction per frame required");
  std::map<std::string, RecordDecision> groups;
  std::map<std::string, std::vector<int>> classes;
  for (std::size_t i = 0; i < frames.size(); ++i) {
    auto& d = groups[frames[i].record_id];
    d.record_id = frames[i].record_id;
    d.subject_id = frames[i].subject_id;
    d.label = frames[i].label;
    classes[frames[i].record_id].push_back(predictions[i]);
  }
  std::vector<RecordDecision> out;
  for (auto& [id, d] : groups) {
    const auto& c = classes[id];
    d.frames_total = c.size();
    d.frames_positive = static_cast<std::size_t>(std::count(c.begin(), c.end(), 1));
    d.vote = vote(c);
    out.push_back(std::move(d));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Report

struct SplitDescription {
  std::string protocol;  // "frame-split" or "subject-disjoint"
  std::uint64_t seed = 0;
  std::vector<double> fractions;
  std::vector<std::size_t> sizes;  // frames per part
  std::vector<std::string> train_subjects;
  std::vector<std::string> test_subjects;

  bool operator==(const SplitDescription&) const = default;
};

struct EvaluationReport {
  ConfusionMatrix confusion;
  Metrics metrics;
  std::vector<RecordDecision> records;
  std::optional<ConfusionMatrix> record_confusion;  // from votes, when every record is labelled
  SplitDescription split;
  std::optional<TrainTelemetry> telemetry;
  std::size_t subject_count = 0;

  bool operator==(const EvaluationReport&) const = default;
};

inline EvaluationReport build_report(const std::vector<FeatureFrame>& frames, std::span<const int> predictions,
                                     SplitDescription split = {}, std::optional<TrainTelemetry> telemetry = std::nullopt) {
  if (frames.size() != predictions.size()) throw ShapeError("one prediction per frame required");
  std::vector<int> labels;
  labels.reserve(frames.size());
  for (const auto& f : frames) labels.push_back(f.label);
  EvaluationReport r;
  // Frame-level counts need labels; unlabeled frames cannot be scored.
  r.confusion = confusion(predictions, labels);
  r.metrics = metrics(r.confusion);
  r.records = vote_per_record(frames, predictions);
  std::vector<int> votes;
  std::vector<int> record_labels;
  for (const auto& d : r.records) {
    votes.push_back(d.vote);
    record_labels.push_back(d.label);
  }
  const bool all_labelled =
      std::all_of(record_labels.begin(), record_labels.end(), [](int y) { return y == 0 || y == 1; });
  if (all_labelled) r.record_confusion = confusion(votes, record_labels);
  std::set<std::string> subjects;
  for (const auto& f : frames) subjects.insert(f.subject_id);
  r.subject_count = subjects.size();
  r.split = std::move(split);
  r.telemetry = std::move(telemetry);
  return r;
}

namespace detail {

inline std::string percent(double fraction) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.1f%%", 100.0 * fraction);
  return buf;
}

inline std::string rate_pair(const Rate& r) {
  if (!r) return "n/a n/a";
  return percent(*r) + " " + percent(1.0 - *r);
}

inline std::string cell(std::uint64_t count, double fraction) {
  return std::to_string(count) + " (" + percent(fraction) + ")";
}

inline std::string pad_right(std::string s, std::size_t width) {
  if (s.size() < width) s.append(width - s.size(), ' ');
  return s;
}

inline ordered_json rate_json(const Rate& r) { return r ? ordered_json(*r) : ordered_json(nullptr); }

inline Rate rate_from_json(const ordered_json& j) {
  if (j.is_null()) return std::nullopt;
  return j.get<double>();
}

inline ordered_json confusion_json(const ConfusionMatrix& m) {
  return {{"tn", m.tn}, {"fp", m.fp}, {"fn", m.fn}, {"tp", m.tp}};
}

inline ConfusionMatrix confusion_from_json(const ordered_json& j) {
  return {j.at("tn").get<std::uint64_t>(), j.at("fp").get<std::uint64_t>(), j.at("fn").get<std::uint64_t>(),
          j.at("tp").get<std::uint64_t>()};
}

}  // namespace detail

// Confusion table laid out with predicted classes as rows and actual classes
// as columns. Each row ends with NPV / PPV and its complement, each column
// with specificity / sensitivity and its complement, the corner with accuracy
// and error rate. Percentages carry one decimal.
inline std::string render_confusion_table(const ConfusionMatrix& m, std::string_view caption) {
  const Metrics x = metrics(m);
  using detail::cell;
  using detail::pad_right;
  constexpr std::size_t w0 = 20, w1 = 12, w = 15;
  std::string out;
  out += pad_right(std::string(caption) + " ", w0 + w1) + "Actual ECG data\n";
  out += pad_right("", w0 + w1) + pad_right("Normal", w) + pad_right("Arrhythmia", w) + "\n";
  out += pad_right("Predicted ECG data", w0) + pad_right("Normal", w1) + pad_right(cell(m.tn, x.tn_fraction), w) +
         pad_right(cell(m.fn, x.fn_fraction), w) + detail::rate_pair(x.npv) + "\n";
  out += pad_right("", w0) + pad_right("Arrhythmia", w1) + pad_right(cell(m.fp, x.fp_fraction), w) +
         pad_right(cell(m.tp, x.tp_fraction), w) + detail::rate_pair(x.ppv) + "\n";
  out += pad_right("", w0 + w1) + pad_right(detail::rate_pair(x.specificity), w) +
         pad_right(detail::rate_pair(x.sensitivity), w) + detail::rate_pair(Rate{x.accuracy}) + "\n";
  return out;
}

inline std::string render_text(const EvaluationReport& r) {
  std::string out;
  const std::string caption = std::to_string(r.confusion.total()) + " sliced pieces (" + std::to_string(r.subject_count) +
                              (r.subject_count == 1 ? " person)" : " persons)");
  out += render_confusion_table(r.confusion, caption);
  out += "\n";
  if (!r.split.protocol.empty()) out += "protocol: " + r.split.protocol + "\n";
  out += "frame accuracy: " + detail::percent(r.metrics.accuracy) + "\n";
  if (r.record_confusion && r.record_confusion->total() > 0) {
    const auto& rc = *r.record_confusion;
    out += "record accuracy (majority vote): " + std::to_string(rc.tp + rc.tn) + "/" + std::to_string(rc.total()) + " (" +
           detail::percent(static_cast<double>(rc.tp + rc.tn) / static_cast<double>(rc.total())) + ")\n";
  }
  if (r.telemetry) {
    const auto& t = *r.telemetry;
    char buf[160];
    std::snprintf(buf, sizeof buf, "training: %d iterations, %d epochs, loss %.4g, gradient %.3g, validation checks %d\n",
                  t.iterations, t.epochs, t.final_train_loss, t.final_gradient_norm, t.validation_check_count);
    out += buf;
  }
  return out;
}

inline ordered_json report_to_json(const EvaluationReport& r) {
  ordered_json j;
  j["confusion"] = detail::confusion_json(r.confusion);
  j["metrics"] = {{"accuracy", r.metrics.accuracy},
                  {"sensitivity", detail::rate_json(r.metrics.sensitivity)},
                  {"specificity", detail::rate_json(r.metrics.specificity)},
                  {"ppv", detail::rate_json(r.metrics.ppv)},
                  {"npv", detail::rate_json(r.metrics.npv)},
                  {"cells", {{"tn", r.metrics.tn_fraction}, {"fp", r.metrics.fp_fraction},
                             {"fn", r.metrics.fn_fraction}, {"tp", r.metrics.tp_fraction}}}};
  j["subject_count"] = r.subject_count;
  j["records"] = ordered_json::array();
  for (const auto& d : r.records) {
    j["records"].push_back({{"record_id", d.record_id},
                            {"subject_id", d.subject_id},
                            {"label", d.label},
                            {"frames_positive", d.frames_positive},
                            {"frames_total", d.frames_total},
                            {"vote", d.vote}});
  }
  j["record_confusion"] = r.record_confusion ? detail::confusion_json(*r.record_confusion) : ordered_json(nullptr);
  j["split"] = {{"protocol", r.split.protocol},         {"seed", r.split.seed},
                {"fractions", r.split.fractions},       {"sizes", r.split.sizes},
                {"train_subjects", r.split.train_subjects}, {"test_subjects", r.split.test_subjects}};
  j["telemetry"] = r.telemetry ? telemetry_to_json(*r.telemetry) : ordered_json(nullptr);
  return j;
}

inline EvaluationReport report_from_json(const ordered_json& j) {
  try {
    EvaluationReport r;
    r.confusion = detail::confusion_from_json(j.at("confusion"));
    const auto& m = j.at("metrics");
    r.metrics.accuracy = m.at("accuracy").get<double>();
    r.metrics.sensitivity = detail::rate_from_json(m.at("sensitivity"));
    r.metrics.specificity = detail::rate_from_json(m.at("specificity"));
    r.metrics.ppv = detail::rate_from_json(m.at("ppv"));
    r.metrics.npv = detail::rate_from_json(m.at("npv"));
    const auto& c = m.at("cells");
    r.metrics.tn_fraction = c.at("tn").get<double>();
    r.metrics.fp_fraction = c.at("fp").get<double>();
    r.metrics.fn_fraction = c.at("fn").get<double>();
    r.metrics.tp_fraction = c.at("tp").get<double>();
    r.subject_count = j.at("subject_count").get<std::size_t>();
    for (const auto& d : j.at("records")) {
      r.records.push_back({d.at("record_id").get<std::string>(), d.at("subject_id").get<std::string>(),
                           d.at("label").get<int>(), d.at("frames_positive").get<std::size_t>(),
                           d.at("frames_total").get<std::size_t>(), d.at("vote").get<int>()});
    }
    if (!j.at("record_confusion").is_null()) r.record_confusion = detail::confusion_from_json(j["record_confusion"]);
    const auto& s = j.at("split");
    r.split.protocol = s.at("protocol").get<std::string>();
    r.split.seed = s.at("seed").get<std::uint64_t>();
    r.split.fractions = s.at("fractions").get<std::vector<double>>();
    r.split.sizes = s.at("sizes").get<std::vector<std::size_t>>();
    r.split.train_subjects = s.at("train_subjects").get<std::vector<std::string>>();
    r.split.test_subjects = s.at("test_subjects").get<std::vector<std::string>>();
    if (!j.at("telemetry").is_null()) r.telemetry = telemetry_from_json(j["telemetry"]);
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("bad report: ") + e.what());
  }
}

// One row per frame: record_id,frame_index,label,probability,class
inline std::string write_predictions_csv(const std::vector<FeatureFrame>& frames, std::span<const double> probabilities) {
  if (frames.size() != probabilities.size()) throw ShapeError("one probability per frame required");
  std::string out = "record_id,frame_index,label,probability,class\n";
  for (std::size_t i = 0; i < frames.size(); ++i) {
    out += frames[i].record_id + "," + std::to_string(frames[i].frame_index) + "," + std::to_string(frames[i].label) + "," +
           detail::format_double(probabilities[i]) + "," + std::to_string(classify(probabilities[i])) + "\n";
  }
  return out;
}

}  // namespace cads
