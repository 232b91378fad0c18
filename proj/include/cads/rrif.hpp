#pragma once

// RR-interval framing: cut the ECG at consecutive R peaks, drop poor-quality
// frames, resample each frame to a fixed 220 samples and build the 222-element
// feature vector:
//
//   [0..219]  resampled frame, shifted so its minimum is 0 and scaled so its
//             maximum is 1 (all zeros for a constant frame)
//   [220]     the frame minimum before the shift, in mV
//   [221]     average RR interval in seconds (record mean over accepted
//             frames by default, or the frame's own RR)
//
// Feature CSV layout (header row then one row per frame):
//
//   f0,...,f221,label,subject_id,record_id,frame_index
//
// `label` is 0 (normal), 1 (arrhythmia) or -1 (unknown).

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "cads/error.hpp"
#include "cads/rpeak.hpp"
#include "cads/signal_io.hpp"

namespace cads {

inline constexpr std::size_t kFrameLength = 220;
inline constexpr std::size_t kFeatureCount = 222;
inline constexpr std::size_t kMinFeatureIndex = 220;
inline constexpr std::size_t kRrFeatureIndex = 221;

struct RawFrame {
  std::vector<double> samples;  // [R_i, R_{i+1})
  double rr_seconds = 0.0;
  std::int64_t start_index = 0;
  std::string record_id;
  std::string subject_id;
};

inline constexpr int kLabelUnknown = -1;

struct FeatureFrame {
  std::vector<double> features;  // kFeatureCount values
  int label = kLabelUnknown;     // 0 normal, 1 arrhythmia
  std::string subject_id;
  std::string record_id;
  int frame_index = 0;

  bool operator==(const FeatureFrame&) const = default;
};

inline int label_value(Label label) {
  switch (label) {
    case Label::normal: return 0;
    case Label::arrhythmia: return 1;
    case Label::unknown: break;
  }
  return kLabelUnknown;
}

enum class RrFeature { record_mean, frame_rr };

enum class RejectReason { rr_out_of_range, non_finite, flat, clipping };

inline std::string to_string(RejectReason reason) {
  switch (reason) {
    case RejectReason::rr_out_of_range: return "rr_out_of_range";
    case RejectReason::non_finite: return "non_finite";
    case RejectReason::flat: return "flat";
    case RejectReason::clipping: return "clipping";
  }
  return "unknown";
}

struct QualityConfig {
  double min_rr_seconds = 0.24;  // 250 bpm
  double max_rr_seconds = 2.0;   // 30 bpm
  double min_peak_to_peak = 0.05;  // mV
  std::size_t clip_run = 5;        // consecutive samples at the frame extreme
};

struct FrameConfig {
  QualityConfig quality;
  RrFeature rr_feature = RrFeature::record_mean;
  std::size_t lead_index = 0;
};

struct RejectedFrame {
  std::size_t frame_index = 0;  // position in the sliced sequence
  RejectReason reason = RejectReason::flat;
};

struct FilteredFrames {
  std::vector<RawFrame> accepted;
  std::vector<std::size_t> accepted_index;  // position of each accepted frame in the input
  std::vector<RejectedFrame> rejected;
};

inline std::vector<RawFrame> slice_frames(const EcgRecord& record, const RPeakList& peaks, std::size_t lead_index = 0) {
  const auto& lead = record.lead(lead_index);
  const auto& idx = peaks.indices;
  if (idx.size() < 2) {
    throw NotEnoughPeaks("record '" + record.record_id + "' has " + std::to_string(idx.size()) +
                         " R peaks, at least 2 required");
  }
  std::vector<RawFrame> frames;
  frames.reserve(idx.size() - 1);
  for (std::size_t i = 0; i + 1 < idx.size(); ++i) {
    const auto start = idx[i];
    const auto end = idx[i + 1];
    if (start < 0 || end <= start || static_cast<std::size_t>(end) > lead.size()) {
      throw ShapeError("record '" + record.record_id + "': R peaks must be strictly increasing and inside the record");
    }
    RawFrame f;
    f.samples.assign(lead.begin() + start, lead.begin() + end);
    f.rr_seconds = static_cast<double>(end - start) / record.sampling_frequency;
    f.start_index = start;
    f.record_id = record.record_id;
    f.subject_id = record.subject_id;
    frames.push_back(std::move(f));
  }
  return frames;
}

inline std::optional<RejectReason> check_quality(const RawFrame& frame, const QualityConfig& config = {}) {
  if (frame.rr_seconds < config.min_rr_seconds || frame.rr_seconds > config.max_rr_seconds) {
    return RejectReason::rr_out_of_range;
  }
  for (double v : frame.samples) {
    if (!std::isfinite(v)) return RejectReason::non_finite;
  }
  if (frame.samples.empty()) return RejectReason::flat;
  const auto [lo, hi] = std::minmax_element(frame.samples.begin(), frame.samples.end());
  if (*hi - *lo < config.min_peak_to_peak) return RejectReason::flat;
  // Runs of identical samples pinned at the frame's maximum or minimum.
  for (double extreme : {*hi, *lo}) {
    std::size_t run = 0;
    for (double v : frame.samples) {
      run = v == extreme ? run + 1 : 0;
      if (run >= config.clip_run) return RejectReason::clipping;
    }
  }
  return std::nullopt;
}

inline FilteredFrames quality_filter(const std::vector<RawFrame>& frames, const QualityConfig& config = {}) {
  FilteredFrames out;
  for (std::size_t i = 0; i < frames.size(); ++i) {
    if (auto reason = check_quality(frames[i], config)) {
      out.rejected.push_back({i, *reason});
    } else {
      out.accepted.push_back(frames[i]);
      out.accepted_index.push_back(i);
    }
  }
  return out;
}

// Linear interpolation at t_k = k (N-1) / (L-1); both endpoints are kept exactly.
inline std::vector<double> resample_frame(std::span<const double> samples, std::size_t target_len = kFrameLength) {
  const std::size_t n = samples.size();
  if (n < 2) throw FrameTooShort("frame has " + std::to_string(n) + " samples, at least 2 required");
  if (target_len < 2) throw FrameTooShort("target length must be at least 2");
  std::vector<double> out(target_len);
  const auto span_in = static_cast<double>(n - 1);
  const auto span_out = static_cast<double>(target_len - 1);
  for (std::size_t k = 0; k < target_len; ++k) {
    const double t = static_cast<double>(k) * span_in / span_out;
    auto i = static_cast<std::size_t>(t);
    if (i >= n - 1) {
      out[k] = samples[n - 1];
      continue;
    }
    const double frac = t - static_cast<double>(i);
    out[k] = samples[i] + frac * (samples[i + 1] - samples[i]);
  }
  return out;
}

inline FeatureFrame build_feature_vector(const RawFrame& frame, double average_rr_seconds, int label = kLabelUnknown,
                                         int frame_index = 0) {
  const auto r = resample_frame(frame.samples, kFrameLength);
  const auto [lo, hi] = std::minmax_element(r.begin(), r.end());
  const double min = *lo;
  const double range = *hi - min;
  FeatureFrame out;
  out.features.resize(kFeatureCount);
  for (std::size_t k = 0; k < kFrameLength; ++k) {
    out.features[k] = range > 0 ? (r[k] - min) / range : 0.0;
  }
  out.features[kMinFeatureIndex] = min;
  out.features[kRrFeatureIndex] = average_rr_seconds;
  out.label = label;
  out.subject_id = frame.subject_id;
  out.record_id = frame.record_id;
  out.frame_index = frame_index;
  return out;
}

struct RecordFrames {
  std::vector<FeatureFrame> frames;
  std::vector<RejectedFrame> rejected;
};

// Slices, filters and featurises one record. frame_index is the position in
// the sliced sequence, so rejected frames leave gaps.
inline RecordFrames frame_record(const EcgRecord& record, const RPeakList& peaks, const FrameConfig& config = {}) {
  RecordFrames out;
  if (peaks.indices.size() < 2) return out;
  const auto sliced = slice_frames(record, peaks, config.lead_index);
  auto filtered = quality_filter(sliced, config.quality);
  out.rejected = std::move(filtered.rejected);
  if (filtered.accepted.empty()) return out;

  double mean_rr = 0.0;
  for (const auto& f : filtered.accepted) mean_rr += f.rr_seconds;
  mean_rr /= static_cast<double>(filtered.accepted.size());

  const int label = label_value(record.label_hint);
  for (std::size_t i = 0; i < filtered.accepted.size(); ++i) {
    const auto& f = filtered.accepted[i];
    const double rr = config.rr_feature == RrFeature::record_mean ? mean_rr : f.rr_seconds;
    out.frames.push_back(build_feature_vector(f, rr, label, static_cast<int>(filtered.accepted_index[i])));
  }
  return out;
}

struct CorpusRejection {
  std::string record_id;
  RejectedFrame frame;
};

struct FramedCorpus {
  std::vector<FeatureFrame> frames;
  std::vector<CorpusRejection> rejected;
};

struct RecordWithPeaks {
  const EcgRecord* record;
  RPeakList peaks;
};

inline FramedCorpus frame_corpus(const std::vector<RecordWithPeaks>& inputs, const FrameConfig& config = {}) {
  FramedCorpus out;
  for (const auto& in : inputs) {
    auto rf = frame_record(*in.record, in.peaks, config);
    for (auto& f : rf.frames) out.frames.push_back(std::move(f));
    for (const auto& r : rf.rejected) out.rejected.push_back({in.record->record_id, r});
  }
  return out;
}

// ---------------------------------------------------------------------------
// Feature CSV

inline std::string feature_csv_header() {
  std::string out;
  for (std::size_t k = 0; k < kFeatureCount; ++k) out += "f" + std::to_string(k) + ",";
  out += "label,subject_id,record_id,frame_index\n";
  return out;
}

inline std::string write_feature_csv(const std::vector<FeatureFrame>& frames) {
  std::string out = feature_csv_header();
  for (const auto& f : frames) {
    for (double v : f.features) {
      out += detail::format_double(v);
      out += ',';
    }
    out += std::to_string(f.label) + "," + f.subject_id + "," + f.record_id + "," + std::to_string(f.frame_index) + "\n";
  }
  return out;
}

// Throws ShapeError when the feature column count is not 222 and ParseError on
// malformed rows.
inline std::vector<FeatureFrame> parse_feature_csv(std::string_view text) {
  std::vector<FeatureFrame> frames;
  const auto lines = detail::split_lines(text);
  std::size_t line_no = 0;
  bool have_header = false;
  std::size_t n_features = 0;
  for (auto raw : lines) {
    ++line_no;
    auto line = detail::trim(raw);
    if (line.empty() || line.front() == '#') continue;
    std::vector<std::string_view> cells;
    std::size_t start = 0;
    for (;;) {
      auto comma = line.find(',', start);
      cells.push_back(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start));
      if (comma == std::string_view::npos) break;
      start = comma + 1;
    }
    if (!have_header) {
      if (cells.size() < 5 || cells[cells.size() - 4] != "label") {
        throw ParseError("line " + std::to_string(line_no) + ": not a feature CSV header");
      }
      n_features = cells.size() - 4;
      if (n_features != kFeatureCount) {
        throw ShapeError("feature CSV has " + std::to_string(n_features) + " feature columns, expected " +
                         std::to_string(kFeatureCount));
      }
      have_header = true;
      continue;
    }
    if (cells.size() != n_features + 4) {
      throw ParseError("line " + std::to_string(line_no) + ": expected " + std::to_string(n_features + 4) +
                       " columns, found " + std::to_string(cells.size()));
    }
    FeatureFrame f;
    f.features.reserve(n_features);
    for (std::size_t k = 0; k < n_features; ++k) {
      auto v = detail::parse_number<double>(cells[k]);
      if (!v || !std::isfinite(*v)) throw ParseError("line " + std::to_string(line_no) + ": bad feature value");
      f.features.push_back(*v);
    }
    auto label = detail::parse_number<int>(cells[n_features]);
    auto index = detail::parse_number<int>(cells[n_features + 3]);
    if (!label || *label < -1 || *label > 1 || !index) {
      throw ParseError("line " + std::to_string(line_no) + ": bad label or frame index");
    }
    f.label = *label;
    f.subject_id = std::string(cells[n_features + 1]);
    f.record_id = std::string(cells[n_features + 2]);
    f.frame_index = *index;
    frames.push_back(std::move(f));
  }
  if (!have_header) throw ParseError("feature CSV is empty");
  return frames;
}

}  // namespace cads
