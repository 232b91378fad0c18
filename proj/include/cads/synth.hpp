#pragma once

// Deterministic synthetic ECG with known R-peak positions and class.
//
// Each beat is a sum of five Gaussian waves (P, Q, R, S, T) centred relative
// to the R wave. RR intervals are log-normal around `mean_rr`; ectopic beats
// arrive early (shortened preceding RR, compensatory pause after) and use a
// wide QRS with an inverted T wave.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "cads/error.hpp"
#include "cads/signal_io.hpp"

namespace cads {

enum class SynthMode { normal, arrhythmia };

struct SynthParams {
  std::uint64_t seed = 0;
  double duration = 60.0;             // s
  double sampling_frequency = 360.0;  // Hz
  double mean_rr = 0.8;               // s
  double rr_jitter_cv = 0.02;
  double ectopic_rate = 0.0;
  double noise_amplitude = 0.0;       // mV, white-noise standard deviation
  SynthMode mode = SynthMode::normal;
  // Per-record random scaling of wave amplitudes and widths, as a fraction.
  double morphology_jitter = 0.0;

  static SynthParams normal(std::uint64_t seed, double duration) {
    SynthParams p;
    p.seed = seed;
    p.duration = duration;
    p.rr_jitter_cv = 0.02;
    p.mode = SynthMode::normal;
    return p;
  }

  static SynthParams arrhythmia(std::uint64_t seed, double duration) {
    SynthParams p;
    p.seed = seed;
    p.duration = duration;
    p.rr_jitter_cv = 0.25;
    p.ectopic_rate = 0.20;
    p.mode = SynthMode::arrhythmia;
    return p;
  }
};

struct GaussianWave {
  double amplitude;  // mV
  double center;     // s relative to the R wave
  double width;      // s, standard deviation
};

struct BeatTemplate {
  GaussianWave p, q, r, s, t;
};

inline BeatTemplate normal_beat_template() {
  return {{0.15, -0.200, 0.025},
          {-0.12, -0.035, 0.010},
          {1.00, 0.000, 0.010},
          {-0.25, 0.035, 0.010},
          {0.30, 0.250, 0.040}};
}

// Premature ventricular beat: no P wave, wide QRS, deep S, inverted T.
inline BeatTemplate ectopic_beat_template() {
  return {{0.0, -0.200, 0.025},
          {-0.10, -0.050, 0.015},
          {1.30, 0.000, 0.020},
          {-0.45, 0.070, 0.020},
          {-0.35, 0.300, 0.060}};
}

struct SyntheticEcg {
  EcgRecord record;
  std::vector<std::int64_t> rpeaks;  // exact R-wave centre indices
  std::vector<bool> ectopic;         // parallel to rpeaks
};

namespace detail {

inline void add_gaussian(std::vector<double>& signal, double fs, std::int64_t r_index, const GaussianWave& w) {
  if (w.amplitude == 0.0) return;
  const double center = static_cast<double>(r_index) + w.center * fs;
  const double sigma = w.width * fs;
  const auto lo = std::max<std::int64_t>(0, static_cast<std::int64_t>(std::floor(center - 6 * sigma)));
  const auto hi = std::min<std::int64_t>(static_cast<std::int64_t>(signal.size()) - 1,
                                         static_cast<std::int64_t>(std::ceil(center + 6 * sigma)));
  for (auto k = lo; k <= hi; ++k) {
    const double z = (static_cast<double>(k) - center) / sigma;
    signal[static_cast<std::size_t>(k)] += w.amplitude * std::exp(-0.5 * z * z);
  }
}

inline void add_beat(std::vector<double>& signal, double fs, std::int64_t r_index, const BeatTemplate& b) {
  for (const auto* w : {&b.p, &b.q, &b.r, &b.s, &b.t}) add_gaussian(signal, fs, r_index, *w);
}

inline BeatTemplate jitter_template(BeatTemplate b, double fraction, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-fraction, fraction);
  for (auto* w : {&b.p, &b.q, &b.r, &b.s, &b.t}) {
    w->amplitude *= 1.0 + u(rng);
    w->width *= 1.0 + u(rng);
  }
  return b;
}

// Rescales deviations around the sample mean so the sample CV equals `target`.
// The sum (and so the position of the last beat) is unchanged.
inline void set_sample_cv(std::vector<double>& rr, double target) {
  if (rr.size() < 2) return;
  const double mean = std::accumulate(rr.begin(), rr.end(), 0.0) / static_cast<double>(rr.size());
  double ss = 0.0;
  for (double v : rr) ss += (v - mean) * (v - mean);
  const double sd = std::sqrt(ss / static_cast<double>(rr.size()));
  if (sd == 0.0) return;
  const double scale = target * mean / sd;
  for (double& v : rr) v = mean + (v - mean) * scale;
}

}  // namespace detail

inline void validate(const SynthParams& p) {
  auto fail = [](const std::string& why) { throw InvalidParams(why); };
  if (!(p.duration > 0) || !std::isfinite(p.duration)) fail("duration must be positive");
  if (!(p.sampling_frequency > 0) || !std::isfinite(p.sampling_frequency)) fail("sampling frequency must be positive");
  if (!(p.mean_rr > 0)) fail("mean_rr must be positive");
  if (p.rr_jitter_cv < 0) fail("rr_jitter_cv must be non-negative");
  if (p.ectopic_rate < 0 || p.ectopic_rate > 1) fail("ectopic_rate must lie in [0, 1]");
  if (p.noise_amplitude < 0) fail("noise_amplitude must be non-negative");
  if (p.morphology_jitter < 0 || p.morphology_jitter >= 1) fail("morphology_jitter must lie in [0, 1)");
  if (p.duration < 2 * p.mean_rr) fail("duration must cover at least two mean RR intervals");
  if (p.mode == SynthMode::normal && (p.rr_jitter_cv > 0.05 || p.ectopic_rate != 0)) {
    fail("normal mode requires rr_jitter_cv <= 0.05 and ectopic_rate == 0");
  }
  if (p.mode == SynthMode::arrhythmia && !(p.rr_jitter_cv >= 0.20 || p.ectopic_rate >= 0.15)) {
    fail("arrhythmia mode requires rr_jitter_cv >= 0.20 or ectopic_rate >= 0.15");
  }
}

inline SyntheticEcg generate_ecg(const SynthParams& params) {
  validate(params);
  const double fs = params.sampling_frequency;
  const auto n_samples = static_cast<std::int64_t>(std::llround(params.duration * fs));
  std::mt19937_64 rng(params.seed);

  const auto normal_tpl = detail::jitter_template(normal_beat_template(), params.morphology_jitter, rng);
  const auto ectopic_tpl = detail::jitter_template(ectopic_beat_template(), params.morphology_jitter, rng);

  constexpr double kMinRr = 0.30;
  constexpr double kMaxRr = 2.00;
  const double sigma_ln = std::sqrt(std::log1p(params.rr_jitter_cv * params.rr_jitter_cv));
  std::lognormal_distribution<double> rr_dist(std::log(params.mean_rr) - 0.5 * sigma_ln * sigma_ln, sigma_ln);
  auto draw_rr = [&] {
    if (params.rr_jitter_cv == 0.0) return params.mean_rr;
    return std::clamp(rr_dist(rng), kMinRr, kMaxRr);
  };

  const auto first = static_cast<std::int64_t>(std::llround(0.5 * params.mean_rr * fs));
  // Beats are kept only when their QRS complex ends inside the record.
  const auto last_allowed = n_samples - static_cast<std::int64_t>(std::llround(0.1 * fs));
  std::vector<double> rr;  // seconds, between consecutive kept beats
  {
    std::int64_t pos = first;
    for (;;) {
      const double next = draw_rr();
      const auto step = static_cast<std::int64_t>(std::llround(next * fs));
      if (pos + step >= last_allowed) break;
      rr.push_back(next);
      pos += step;
    }
  }

  if (params.rr_jitter_cv > 0 && rr.size() >= 2) {
    double mean = std::accumulate(rr.begin(), rr.end(), 0.0) / static_cast<double>(rr.size());
    double ss = 0.0;
    for (double v : rr) ss += (v - mean) * (v - mean);
    const double cv = std::sqrt(ss / static_cast<double>(rr.size())) / mean;
    // Margins absorb the rounding of intervals to whole samples.
    if (params.mode == SynthMode::normal && cv > 0.97 * params.rr_jitter_cv) {
      detail::set_sample_cv(rr, 0.97 * params.rr_jitter_cv);
    } else if (params.mode == SynthMode::arrhythmia && cv < 1.03 * params.rr_jitter_cv) {
      detail::set_sample_cv(rr, 1.03 * params.rr_jitter_cv);
      for (double& v : rr) v = std::clamp(v, kMinRr, kMaxRr);
    }
  }

  std::vector<std::int64_t> peaks{first};
  for (double v : rr) {
    const auto next = peaks.back() + static_cast<std::int64_t>(std::llround(v * fs));
    if (next >= last_allowed) break;
    peaks.push_back(next);
  }

  std::vector<bool> ectopic(peaks.size(), false);
  if (params.ectopic_rate > 0 && peaks.size() >= 2) {
    const auto wanted = static_cast<std::size_t>(std::ceil(params.ectopic_rate * static_cast<double>(peaks.size())));
    std::vector<std::size_t> candidates(peaks.size() - 1);
    std::iota(candidates.begin(), candidates.end(), std::size_t{1});
    std::shuffle(candidates.begin(), candidates.end(), rng);
    std::size_t chosen = 0;
    for (auto i : candidates) {
      if (chosen == wanted) break;
      if (ectopic[i - 1] || (i + 1 < peaks.size() && ectopic[i + 1])) continue;
      ectopic[i] = true;
      ++chosen;
    }
    // Premature arrival: the beat moves earlier, later beats keep their timing.
    const auto min_coupling = static_cast<std::int64_t>(std::llround(0.36 * fs));
    for (std::size_t i = 1; i < peaks.size(); ++i) {
      if (!ectopic[i]) continue;
      const auto prev_rr = peaks[i] - peaks[i - 1];
      auto coupling = static_cast<std::int64_t>(std::llround(0.65 * static_cast<double>(prev_rr)));
      coupling = std::min(std::max(coupling, min_coupling), prev_rr);
      peaks[i] = peaks[i - 1] + coupling;
    }
  }

  std::vector<double> signal(static_cast<std::size_t>(n_samples), 0.0);
  for (std::size_t i = 0; i < peaks.size(); ++i) {
    detail::add_beat(signal, fs, peaks[i], ectopic[i] ? ectopic_tpl : normal_tpl);
  }
  if (params.noise_amplitude > 0) {
    std::normal_distribution<double> noise(0.0, params.noise_amplitude);
    for (double& v : signal) v += noise(rng);
  }

  SyntheticEcg out;
  out.record.record_id = "synth_" + std::to_string(params.seed);
  out.record.subject_id = out.record.record_id;
  out.record.sampling_frequency = fs;
  out.record.n_samples = static_cast<std::size_t>(n_samples);
  out.record.leads.push_back(std::move(signal));
  out.record.label_hint = params.mode == SynthMode::normal ? Label::normal : Label::arrhythmia;
  out.rpeaks = std::move(peaks);
  out.ectopic = std::move(ectopic);
  return out;
}

inline AnnotationSet annotations_from(const SyntheticEcg& ecg) {
  AnnotationSet set;
  for (std::size_t i = 0; i < ecg.rpeaks.size(); ++i) {
    set.entries.push_back({ecg.rpeaks[i], ecg.ectopic[i] ? annotation_code::kPvc : annotation_code::kNormal, {}});
  }
  return set;
}

struct CorpusOptions {
  double sampling_frequency = 360.0;
  double mean_rr = 0.8;
  // Each subject's mean RR is mean_rr * (1 + u), u uniform in [-spread, spread].
  double mean_rr_spread = 0.05;
  double normal_cv = 0.02;
  double arrhythmia_cv = 0.25;
  double arrhythmia_ectopic_rate = 0.20;
  double noise_amplitude = 0.02;
  double morphology_jitter = 0.10;
};

struct CorpusEntry {
  EcgRecord record;
  AnnotationSet annotations;
};

// Normal records come first, then arrhythmia records. Record i (over the
// whole corpus) uses seed base_seed + i and subject "subject_<i>".
inline std::vector<CorpusEntry> generate_corpus(int n_normal, int n_arrhythmia, std::uint64_t base_seed,
                                                double duration, const CorpusOptions& options = {}) {
  if (n_normal < 0 || n_arrhythmia < 0) throw InvalidParams("record counts must be non-negative");
  std::vector<CorpusEntry> corpus;
  corpus.reserve(static_cast<std::size_t>(n_normal + n_arrhythmia));
  auto pad = [](int i) {
    auto s = std::to_string(i);
    return s.size() < 3 ? std::string(3 - s.size(), '0') + s : s;
  };
  for (int i = 0; i < n_normal + n_arrhythmia; ++i) {
    const bool normal = i < n_normal;
    const std::uint64_t seed = base_seed + static_cast<std::uint64_t>(i);
    SynthParams p = normal ? SynthParams::normal(seed, duration) : SynthParams::arrhythmia(seed, duration);
    p.sampling_frequency = options.sampling_frequency;
    p.rr_jitter_cv = normal ? options.normal_cv : options.arrhythmia_cv;
    p.ectopic_rate = normal ? 0.0 : options.arrhythmia_ectopic_rate;
    p.noise_amplitude = options.noise_amplitude;
    p.morphology_jitter = options.morphology_jitter;
    std::mt19937_64 subject_rng(seed ^ 0x9E3779B97F4A7C15ull);
    std::uniform_real_distribution<double> spread(-options.mean_rr_spread, options.mean_rr_spread);
    p.mean_rr = options.mean_rr * (1.0 + (options.mean_rr_spread > 0 ? spread(subject_rng) : 0.0));

    auto ecg = generate_ecg(p);
    const int class_index = normal ? i : i - n_normal;
    ecg.record.record_id = (normal ? "normal_" : "arrhythmia_") + pad(class_index);
    ecg.record.subject_id = "subject_" + pad(i);
    auto annotations = annotations_from(ecg);
    corpus.push_back({std::move(ecg.record), std::move(annotations)});
  }
  return corpus;
}

}  // namespace cads
