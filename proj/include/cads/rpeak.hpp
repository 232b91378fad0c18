#pragma once

// R-peak detection (Pan-Tompkins style) and scoring against reference beats.
//
// Pipeline: 5-15 Hz band-pass -> 5-point derivative -> squaring -> 150 ms
// moving-window integration -> dual adaptive thresholds with a 200 ms
// refractory period, T-wave rejection and search-back -> refinement to the
// raw-signal maximum within +-50 ms. All windows are given in seconds and
// converted with the record's sampling frequency. Every threshold is relative
// to running signal/noise peak estimates, so detection does not depend on the
// amplitude scale of the input.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <deque>
#include <limits>
#include <numbers>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "cads/error.hpp"
#include "cads/signal_io.hpp"

namespace cads {

enum class RPeakSource { detected, annotated };

struct RPeakList {
  std::vector<std::int64_t> indices;
  RPeakSource source = RPeakSource::detected;

  bool operator==(const RPeakList&) const = default;
};

inline constexpr double kRefractorySeconds = 0.200;

// Second-order section, normalised so a0 == 1:
//   y[n] = b0 x[n] + b1 x[n-1] + b2 x[n-2] - a1 y[n-1] - a2 y[n-2]
struct Biquad {
  double b0, b1, b2, a1, a2;
};

inline Biquad butterworth_lowpass(double cutoff_hz, double fs) {
  const double w0 = 2 * std::numbers::pi * cutoff_hz / fs;
  const double cw = std::cos(w0);
  const double alpha = std::sin(w0) / (2 * std::numbers::sqrt2 / 2);  // Q = 1/sqrt(2)
  const double a0 = 1 + alpha;
  return {(1 - cw) / 2 / a0, (1 - cw) / a0, (1 - cw) / 2 / a0, -2 * cw / a0, (1 - alpha) / a0};
}

inline Biquad butterworth_highpass(double cutoff_hz, double fs) {
  const double w0 = 2 * std::numbers::pi * cutoff_hz / fs;
  const double cw = std::cos(w0);
  const double alpha = std::sin(w0) / (2 * std::numbers::sqrt2 / 2);
  const double a0 = 1 + alpha;
  return {(1 + cw) / 2 / a0, -(1 + cw) / a0, (1 + cw) / 2 / a0, -2 * cw / a0, (1 - alpha) / a0};
}

// High-pass at 5 Hz cascaded with low-pass at 15 Hz.
inline std::vector<Biquad> bandpass_design(double fs) {
  return {butterworth_highpass(5.0, fs), butterworth_lowpass(15.0, fs)};
}

inline std::vector<double> apply_biquad(std::span<const double> x, const Biquad& f) {
  std::vector<double> y(x.size());
  double s1 = 0.0, s2 = 0.0;  // transposed direct form II state
  for (std::size_t n = 0; n < x.size(); ++n) {
    const double out = f.b0 * x[n] + s1;
    s1 = f.b1 * x[n] - f.a1 * out + s2;
    s2 = f.b2 * x[n] - f.a2 * out;
    y[n] = out;
  }
  return y;
}

// The filters start in the steady state for the first sample (the first
// sample is removed before filtering), so a record's DC offset does not
// produce a start-up transient. Output length equals input length.
inline std::vector<double> bandpass_filter(std::span<const double> signal, double fs) {
  if (!(fs > 0)) throw InvalidParams("sampling frequency must be positive");
  if (signal.empty()) return {};
  std::vector<double> y(signal.begin(), signal.end());
  const double x0 = y.front();
  for (double& v : y) v -= x0;
  for (const auto& section : bandpass_design(fs)) y = apply_biquad(y, section);
  return y;
}

namespace detail {

// Group delay of the band-pass cascade (in samples) at `hz`, from the phase
// slope of its frequency response.
inline double bandpass_group_delay(double fs, double hz = 10.0) {
  auto phase = [&](double f) {
    const std::complex<double> z1 = std::polar(1.0, -2 * std::numbers::pi * f / fs);
    std::complex<double> h = 1.0;
    for (const auto& s : bandpass_design(fs)) {
      h *= (s.b0 + s.b1 * z1 + s.b2 * z1 * z1) / (1.0 + s.a1 * z1 + s.a2 * z1 * z1);
    }
    return std::arg(h);
  };
  const double df = 1e-3;
  double dphi = phase(hz + df) - phase(hz - df);
  if (dphi > std::numbers::pi) dphi -= 2 * std::numbers::pi;
  if (dphi < -std::numbers::pi) dphi += 2 * std::numbers::pi;
  return -dphi / (2 * std::numbers::pi * 2 * df / fs);
}

inline std::int64_t seconds_to_samples(double seconds, double fs) {
  return std::max<std::int64_t>(1, static_cast<std::int64_t>(std::llround(seconds * fs)));
}

}  // namespace detail

struct DetectorStages {
  std::vector<double> filtered;
  std::vector<double> derivative;
  std::vector<double> integrated;
};

inline DetectorStages detector_stages(std::span<const double> signal, double fs) {
  DetectorStages st;
  st.filtered = bandpass_filter(signal, fs);
  const auto& y = st.filtered;
  const std::size_t n = y.size();
  st.derivative.assign(n, 0.0);
  auto at = [&](std::int64_t i) { return i < 0 ? 0.0 : y[static_cast<std::size_t>(i)]; };
  for (std::size_t k = 0; k < n; ++k) {
    const auto i = static_cast<std::int64_t>(k);
    st.derivative[k] = (2 * at(i) + at(i - 1) - at(i - 3) - 2 * at(i - 4)) / 8.0;
  }
  const auto window = static_cast<std::size_t>(detail::seconds_to_samples(0.150, fs));
  st.integrated.assign(n, 0.0);
  double running = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    running += st.derivative[k] * st.derivative[k];
    if (k >= window) running -= st.derivative[k - window] * st.derivative[k - window];
    st.integrated[k] = std::max(running, 0.0) / static_cast<double>(window);
  }
  return st;
}

inline RPeakList detect_rpeaks(const EcgRecord& record, std::size_t lead_index = 0) {
  const double fs = record.sampling_frequency;
  if (record.duration_seconds() < 2.0) {
    throw TooShort("record '" + record.record_id + "' has " + std::to_string(record.duration_seconds()) +
                   " s of signal, at least 2 s required");
  }
  const auto& raw = record.lead(lead_index);
  const auto st = detector_stages(raw, fs);
  const auto& m = st.integrated;
  const auto n = static_cast<std::int64_t>(m.size());

  const auto refractory = detail::seconds_to_samples(kRefractorySeconds, fs);
  const auto t_wave_window = detail::seconds_to_samples(0.360, fs);
  const auto window = detail::seconds_to_samples(0.150, fs);
  const auto refine = detail::seconds_to_samples(0.050, fs);
  const auto learn = std::min<std::int64_t>(n, detail::seconds_to_samples(2.0, fs));

  double spk = 0.0, npk = 0.0;
  {
    double mx = 0.0, sum = 0.0;
    for (std::int64_t i = 0; i < learn; ++i) {
      mx = std::max(mx, m[static_cast<std::size_t>(i)]);
      sum += m[static_cast<std::size_t>(i)];
    }
    spk = mx / 3.0;
    npk = sum / static_cast<double>(learn) / 2.0;
  }
  auto threshold1 = [&] { return npk + 0.25 * (spk - npk); };

  auto slope_at = [&](std::int64_t peak) {
    double s = 0.0;
    for (auto i = std::max<std::int64_t>(0, peak - window); i <= peak; ++i) {
      s = std::max(s, std::abs(st.derivative[static_cast<std::size_t>(i)]));
    }
    return s;
  };

  struct Candidate {
    std::int64_t index;
    double value;
  };
  std::vector<std::int64_t> qrs;  // integrated-signal peak positions
  double last_slope = 0.0;
  std::deque<std::int64_t> recent_rr;
  std::vector<Candidate> noise_since_last;

  auto rr_average = [&] {
    double s = 0.0;
    for (auto v : recent_rr) s += static_cast<double>(v);
    return s / static_cast<double>(recent_rr.size());
  };
  auto accept = [&](const Candidate& c, double weight) {
    if (!qrs.empty()) {
      recent_rr.push_back(c.index - qrs.back());
      if (recent_rr.size() > 8) recent_rr.pop_front();
    }
    qrs.push_back(c.index);
    last_slope = slope_at(c.index);
    spk = weight * c.value + (1 - weight) * spk;
    noise_since_last.clear();
  };
  auto is_t_wave = [&](const Candidate& c) {
    return !qrs.empty() && c.index - qrs.back() < t_wave_window && slope_at(c.index) < 0.5 * last_slope;
  };
  auto search_back = [&](std::int64_t now) {
    while (recent_rr.size() >= 1 && !qrs.empty() &&
           static_cast<double>(now - qrs.back()) > 1.66 * rr_average()) {
      const double threshold2 = 0.5 * threshold1();
      const Candidate* best = nullptr;
      for (const auto& c : noise_since_last) {
        if (c.index - qrs.back() < refractory || c.value <= threshold2 || is_t_wave(c)) continue;
        if (!best || c.value > best->value) best = &c;
      }
      if (!best) break;
      const Candidate found = *best;
      std::erase_if(noise_since_last, [&](const Candidate& c) { return c.index <= found.index; });
      auto later = std::move(noise_since_last);
      accept(found, 0.25);
      noise_since_last = std::move(later);
    }
  };

  for (std::int64_t i = 1; i < n; ++i) {
    const double v = m[static_cast<std::size_t>(i)];
    // The last sample counts as a peak while the integrator is still rising.
    const bool falls_next = i + 1 == n || v >= m[static_cast<std::size_t>(i + 1)];
    if (!(v > m[static_cast<std::size_t>(i - 1)] && falls_next)) continue;
    const Candidate c{i, v};
    search_back(i);
    if (!qrs.empty() && i - qrs.back() < refractory) continue;
    if (v > threshold1() && !is_t_wave(c)) {
      accept(c, 0.125);
    } else {
      npk = 0.125 * v + 0.875 * npk;
      noise_since_last.push_back(c);
    }
  }
  search_back(n);

  // Map integrated-signal peaks back to R positions. The integrator's peak
  // for a complex lies within one window of its threshold crossing, and its
  // window (shifted back by the band-pass delay) spans the QRS. The raw
  // maximum there is the candidate, then refined within +-50 ms.
  const auto delay = static_cast<std::int64_t>(std::llround(detail::bandpass_group_delay(fs)));
  auto raw_argmax = [&](std::int64_t lo, std::int64_t hi) {
    lo = std::clamp<std::int64_t>(lo, 0, n - 1);
    hi = std::clamp<std::int64_t>(hi, lo, n - 1);
    std::int64_t best = lo;
    for (auto i = lo; i <= hi; ++i) {
      if (raw[static_cast<std::size_t>(i)] > raw[static_cast<std::size_t>(best)]) best = i;
    }
    return best;
  };
  std::vector<std::int64_t> refined;
  refined.reserve(qrs.size());
  for (auto p : qrs) {
    auto peak = p;
    for (auto i = p; i < std::min(n, p + window); ++i) {
      if (m[static_cast<std::size_t>(i)] > m[static_cast<std::size_t>(peak)]) peak = i;
    }
    const auto candidate = raw_argmax(peak - window - delay, peak - delay);
    const auto r = raw_argmax(candidate - refine, candidate + refine);
    refined.push_back(r);
  }

  // Refinement can pull neighbours together; keep the taller of any pair
  // closer than the refractory period.
  RPeakList out;
  out.source = RPeakSource::detected;
  for (auto r : refined) {
    if (!out.indices.empty() && r - out.indices.back() < refractory) {
      if (raw[static_cast<std::size_t>(r)] > raw[static_cast<std::size_t>(out.indices.back())]) out.indices.back() = r;
      continue;
    }
    out.indices.push_back(r);
  }
  return out;
}

// Beats (WFDB QRS codes) from an annotation set, as a strictly increasing list
// of indices inside the record.
inline RPeakList rpeaks_from_annotations(const AnnotationSet& annotations, std::size_t n_samples) {
  RPeakList out;
  out.source = RPeakSource::annotated;
  for (const auto& a : annotations.entries) {
    if (!is_beat_code(a.type_code)) continue;
    if (a.sample < 0 || static_cast<std::size_t>(a.sample) >= n_samples) continue;
    if (!out.indices.empty() && a.sample <= out.indices.back()) continue;
    out.indices.push_back(a.sample);
  }
  return out;
}

struct RPeakScore {
  std::size_t true_positive = 0;
  std::size_t false_positive = 0;
  std::size_t false_negative = 0;
  double sensitivity = 0.0;            // NaN when the reference is empty
  double positive_predictivity = 0.0;  // NaN when nothing was detected
};

// Greedy one-to-one matching in time order within the tolerance.
inline RPeakScore score_rpeaks(const RPeakList& detected, const RPeakList& reference, double tolerance_ms, double fs) {
  const double tol = tolerance_ms * fs / 1000.0 + 1e-9;
  RPeakScore s;
  std::size_t i = 0, j = 0;
  const auto& d = detected.indices;
  const auto& r = reference.indices;
  while (i < d.size() && j < r.size()) {
    const auto diff = static_cast<double>(d[i] - r[j]);
    if (std::abs(diff) <= tol) {
      ++s.true_positive;
      ++i;
      ++j;
    } else if (diff < 0) {
      ++s.false_positive;
      ++i;
    } else {
      ++s.false_negative;
      ++j;
    }
  }
  s.false_positive += d.size() - i;
  s.false_negative += r.size() - j;
  const auto nan = std::numeric_limits<double>::quiet_NaN();
  const auto tp = static_cast<double>(s.true_positive);
  s.sensitivity = r.empty() ? nan : tp / static_cast<double>(s.true_positive + s.false_negative);
  s.positive_predictivity = d.empty() ? nan : tp / static_cast<double>(s.true_positive + s.false_positive);
  return s;
}

inline std::string write_rpeak_text(const RPeakList& peaks) {
  std::string out;
  for (auto i : peaks.indices) out += std::to_string(i) + "\n";
  return out;
}

inline RPeakList parse_rpeak_text(std::string_view text, RPeakSource source = RPeakSource::detected) {
  RPeakList out;
  out.source = source;
  int line_no = 0;
  for (auto raw : detail::split_lines(text)) {
    ++line_no;
    auto line = detail::trim(raw);
    if (line.empty()) continue;
    auto v = detail::parse_number<std::int64_t>(line);
    if (!v) throw ParseError("R-peak line " + std::to_string(line_no) + ": expected an integer index");
    if (!out.indices.empty() && *v <= out.indices.back()) {
      throw ParseError("R-peak line " + std::to_string(line_no) + ": indices must be strictly increasing");
    }
    out.indices.push_back(*v);
  }
  return out;
}

}  // namespace cads
