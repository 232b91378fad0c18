#pragma once

// Command-line front end:
//
//   cads synth     --out DIR [--normal N] [--arrhythmia N] [--duration S] [--seed S]
//   cads frame     --input PATH... --out features.csv [--rpeaks detect|annotated]
//   cads train     --features F --model M [--telemetry T] [--split S] [--protocol P]
//   cads evaluate  --model M --features F [--split S] [--telemetry T] [--report R]
//   cads predict   --model M --features F [--out CSV]
//   cads plot      --record R --out DIR [--frame K] [--telemetry T]
//   cads pipeline  --out DIR [synth and train options]
//
// Every command accepts --config FILE (JSON, see RunConfig); flags override
// the file. The default seed comes from CADS_SEED when set.
//
// Exit codes: 0 success, 1 usage or config error, 2 I/O or unreadable input,
// 3 nothing left after framing, 4 training failure, 5 model/feature schema
// mismatch.

#include <algorithm>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "cads/error.hpp"
#include "cads/eval.hpp"
#include "cads/model_io.hpp"
#include "cads/network.hpp"
#include "cads/rpeak.hpp"
#include "cads/rrif.hpp"
#include "cads/signal_io.hpp"
#include "cads/synth.hpp"
#include "cads/train.hpp"

namespace cads::cli {

namespace fs = std::filesystem;

enum ExitCode : int { kOk = 0, kUsage = 1, kIo = 2, kEmpty = 3, kTraining = 4, kSchema = 5 };

inline int exit_code_for(const Error& e) {
  const auto& k = e.kind();
  if (k == "IoError" || k == "ParseError" || k == "UnsupportedFormat") return kIo;
  if (k == "ShapeError" || k == "FormatError") return kSchema;
  if (k == "Diverged" || k == "EmptyDataset" || k == "TooFewFrames" || k == "TooFewSubjects" || k == "EmptyBatch") {
    return kTraining;
  }
  if (k == "NotEnoughPeaks" || k == "EmptyMatrix" || k == "EmptyRecord") return kEmpty;
  return kUsage;
}

// Raised by the commands to leave with a specific exit code.
class Exit : public std::runtime_error {
 public:
  Exit(int code, const std::string& what) : std::runtime_error(what), code_(code) {}
  int code() const noexcept { return code_; }

 private:
  int code_;
};

// ---------------------------------------------------------------------------
// Run configuration

struct RunConfig {
  std::uint64_t seed = 1;
  // synth
  int n_normal = 20;
  int n_arrhythmia = 20;
  double duration = 60.0;
  CorpusOptions corpus;
  // frame
  std::string rpeaks = "detect";  // detect | annotated
  FrameConfig frame;
  // train / evaluate
  NetworkConfig network;
  std::string protocol = "frame-split";  // frame-split | subject-disjoint
  std::array<double, 3> fractions{0.70, 0.15, 0.15};
  double subject_train_fraction = 0.5;
};

inline std::uint64_t default_seed() {
  if (const char* env = std::getenv("CADS_SEED")) {
    auto v = detail::parse_number<std::uint64_t>(env);
    if (!v) throw ConfigError(std::string("CADS_SEED is not an unsigned integer: '") + env + "'");
    return *v;
  }
  return 1;
}

// Keys: seed, normal, arrhythmia, duration, corpus{...}, rpeaks, rr_feature,
// lead, quality{min_rr_seconds, max_rr_seconds, min_peak_to_peak, clip_run},
// network{...}, protocol, fractions[3], subject_train_fraction.
inline void apply_config_json(RunConfig& rc, const ordered_json& j) {
  try {
    if (!j.is_object()) throw ConfigError("config must be a JSON object");
    if (j.contains("seed")) rc.seed = j["seed"].get<std::uint64_t>();
    if (j.contains("normal")) rc.n_normal = j["normal"].get<int>();
    if (j.contains("arrhythmia")) rc.n_arrhythmia = j["arrhythmia"].get<int>();
    if (j.contains("duration")) rc.duration = j["duration"].get<double>();
    if (j.contains("corpus")) {
      const auto& c = j["corpus"];
      auto& o = rc.corpus;
      o.sampling_frequency = c.value("sampling_frequency", o.sampling_frequency);
      o.mean_rr = c.value("mean_rr", o.mean_rr);
      o.mean_rr_spread = c.value("mean_rr_spread", o.mean_rr_spread);
      o.normal_cv = c.value("normal_cv", o.normal_cv);
      o.arrhythmia_cv = c.value("arrhythmia_cv", o.arrhythmia_cv);
      o.arrhythmia_ectopic_rate = c.value("arrhythmia_ectopic_rate", o.arrhythmia_ectopic_rate);
      o.noise_amplitude = c.value("noise_amplitude", o.noise_amplitude);
      o.morphology_jitter = c.value("morphology_jitter", o.morphology_jitter);
    }
    if (j.contains("rpeaks")) rc.rpeaks = j["rpeaks"].get<std::string>();
    if (j.contains("rr_feature")) {
      const auto v = j["rr_feature"].get<std::string>();
      if (v == "record_mean") {
        rc.frame.rr_feature = RrFeature::record_mean;
      } else if (v == "frame_rr") {
        rc.frame.rr_feature = RrFeature::frame_rr;
      } else {
        throw ConfigError("rr_feature must be record_mean or frame_rr");
      }
    }
    if (j.contains("lead")) rc.frame.lead_index = j["lead"].get<std::size_t>();
    if (j.contains("quality")) {
      const auto& q = j["quality"];
      auto& o = rc.frame.quality;
      o.min_rr_seconds = q.value("min_rr_seconds", o.min_rr_seconds);
      o.max_rr_seconds = q.value("max_rr_seconds", o.max_rr_seconds);
      o.min_peak_to_peak = q.value("min_peak_to_peak", o.min_peak_to_peak);
      o.clip_run = q.value("clip_run", o.clip_run);
    }
    if (j.contains("network")) rc.network = config_from_json(j["network"], rc.network);
    if (j.contains("protocol")) rc.protocol = j["protocol"].get<std::string>();
    if (j.contains("fractions")) {
      const auto f = j["fractions"].get<std::vector<double>>();
      if (f.size() != 3) throw ConfigError("fractions needs three values");
      rc.fractions = {f[0], f[1], f[2]};
    }
    if (j.contains("subject_train_fraction")) rc.subject_train_fraction = j["subject_train_fraction"].get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("bad config: ") + e.what());
  }
}

inline void load_config_file(RunConfig& rc, const std::string& path) {
  if (path.empty()) return;
  const auto text = read_text_file(path);
  ordered_json j;
  try {
    j = ordered_json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(path + ": " + e.what());
  }
  apply_config_json(rc, j);
}

// ---------------------------------------------------------------------------
// Input discovery

struct InputRecord {
  fs::path path;
  std::optional<Label> label;           // from a manifest
  std::optional<std::string> subject;   // from a manifest
  std::optional<fs::path> annotations;  // explicit annotation file
};

inline std::vector<InputRecord> read_manifest(const fs::path& manifest) {
  const auto text = read_text_file(manifest);
  std::vector<InputRecord> out;
  try {
    const auto j = ordered_json::parse(text);
    const auto base = manifest.parent_path();
    for (const auto& e : j.at("records")) {
      InputRecord r;
      r.path = base / e.at("path").get<std::string>();
      if (e.contains("label")) {
        r.label = label_from_string(e["label"].get<std::string>());
        if (!r.label) throw ParseError(manifest.string() + ": unknown label " + e["label"].dump());
      }
      if (e.contains("subject_id")) r.subject = e["subject_id"].get<std::string>();
      if (e.contains("annotations") && !e["annotations"].is_null()) r.annotations = base / e["annotations"].get<std::string>();
      out.push_back(std::move(r));
    }
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(manifest.string() + ": " + e.what());
  }
  return out;
}

inline std::vector<InputRecord> discover_inputs(const std::vector<std::string>& inputs) {
  std::vector<InputRecord> out;
  for (const auto& in : inputs) {
    const fs::path p(in);
    if (!fs::exists(p)) throw IoError(in + ": no such file or directory");
    if (fs::is_directory(p)) {
      if (fs::exists(p / "manifest.json")) {
        auto m = read_manifest(p / "manifest.json");
        out.insert(out.end(), m.begin(), m.end());
        continue;
      }
      std::vector<fs::path> files;
      for (const auto& entry : fs::directory_iterator(p)) {
        const auto ext = entry.path().extension();
        if (ext == ".csv" || ext == ".hea") files.push_back(entry.path());
      }
      std::sort(files.begin(), files.end());
      for (auto& f : files) out.push_back({f, std::nullopt, std::nullopt, std::nullopt});
    } else if (p.extension() == ".json") {
      auto m = read_manifest(p);
      out.insert(out.end(), m.begin(), m.end());
    } else {
      out.push_back({p, std::nullopt, std::nullopt, std::nullopt});
    }
  }
  return out;
}

// Annotation file for a record: the manifest entry, else a sibling `.ann`
// (text) or `.atr` (WFDB) file.
inline std::optional<AnnotationSet> find_annotations(const InputRecord& in) {
  auto load = [](const fs::path& p) {
    return p.extension() == ".ann" ? parse_annotation_text(read_text_file(p)) : load_wfdb_annotations(p);
  };
  if (in.annotations) return load(*in.annotations);
  for (const char* ext : {".ann", ".atr"}) {
    auto candidate = in.path;
    candidate.replace_extension(ext);
    if (fs::exists(candidate)) return load(candidate);
  }
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// Small file helpers

inline std::string dump_json(const ordered_json& j) { return j.dump(2) + "\n"; }

inline void ensure_parent(const fs::path& file) {
  std::error_code ec;
  if (file.has_parent_path()) fs::create_directories(file.parent_path(), ec);
  if (ec) throw IoError(file.parent_path().string() + ": " + ec.message());
}

inline void write_file(const fs::path& path, std::string_view text) {
  ensure_parent(path);
  write_text_file(path, text);
}

inline ordered_json read_json_file(const fs::path& path) {
  const auto text = read_text_file(path);
  try {
    return ordered_json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

inline std::string frame_key(const FeatureFrame& f) { return f.record_id + "#" + std::to_string(f.frame_index); }

inline std::vector<FeatureFrame> load_features(const fs::path& path) {
  try {
    return parse_feature_csv(read_text_file(path));
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": " + e.what());
  } catch (const ShapeError& e) {
    throw ShapeError(path.string() + ": " + e.what());
  }
}

inline Network load_model_file(const fs::path& path) {
  try {
    return load_model(read_text_file(path));
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

inline std::vector<Example> to_examples(const std::vector<FeatureFrame>& frames) {
  std::vector<Example> out;
  out.reserve(frames.size());
  for (const auto& f : frames) out.push_back({f.features, f.label});
  return out;
}

inline std::vector<FeatureFrame> labelled_only(const std::vector<FeatureFrame>& frames) {
  std::vector<FeatureFrame> out;
  for (const auto& f : frames) {
    if (f.label == 0 || f.label == 1) out.push_back(f);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Commands

struct SynthOutcome {
  std::size_t records = 0;
};

inline SynthOutcome cmd_synth(const RunConfig& rc, const fs::path& out_dir, std::ostream& err) {
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec || !fs::is_directory(out_dir)) throw IoError(out_dir.string() + ": cannot create output directory");
  const auto corpus = generate_corpus(rc.n_normal, rc.n_arrhythmia, rc.seed, rc.duration, rc.corpus);
  ordered_json manifest;
  manifest["seed"] = rc.seed;
  manifest["records"] = ordered_json::array();
  for (const auto& e : corpus) {
    const auto csv = e.record.record_id + ".csv";
    const auto ann = e.record.record_id + ".ann";
    write_file(out_dir / csv, write_csv_record(e.record));
    write_file(out_dir / ann, write_annotation_text(e.annotations));
    manifest["records"].push_back(
        {{"path", csv}, {"subject_id", e.record.subject_id}, {"label", to_string(e.record.label_hint)}, {"annotations", ann}});
  }
  write_file(out_dir / "manifest.json", dump_json(manifest));
  err << "synth: wrote " << corpus.size() << " records to " << out_dir.string() << "\n";
  return {corpus.size()};
}

struct FrameOutcome {
  std::size_t frames = 0;
  std::size_t rejected = 0;
};

inline FrameOutcome cmd_frame(const RunConfig& rc, const std::vector<std::string>& inputs, const fs::path& out,
                              fs::path rejections, std::ostream& err) {
  if (rc.rpeaks != "detect" && rc.rpeaks != "annotated") throw ConfigError("--rpeaks must be detect or annotated");
  const auto records = discover_inputs(inputs);
  std::vector<FeatureFrame> frames;
  std::string log = "record_id,frame_index,reason\n";
  std::size_t n_rejected = 0;
  for (const auto& in : records) {
    EcgRecord record;
    try {
      record = load_record(in.path);
    } catch (const Error& e) {
      throw ParseError(in.path.string() + ": " + e.what());
    }
    if (in.label) record.label_hint = *in.label;
    if (in.subject) record.subject_id = *in.subject;

    RPeakList peaks;
    if (rc.rpeaks == "annotated") {
      auto ann = find_annotations(in);
      if (!ann) throw IoError(in.path.string() + ": no annotation file for --rpeaks annotated");
      peaks = rpeaks_from_annotations(*ann, record.n_samples);
    } else {
      try {
        peaks = detect_rpeaks(record, rc.frame.lead_index);
      } catch (const TooShort& e) {
        err << "frame: skipping " << in.path.string() << ": " << e.what() << "\n";
        continue;
      }
    }
    auto rf = frame_record(record, peaks, rc.frame);
    for (const auto& r : rf.rejected) {
      log += record.record_id + "," + std::to_string(r.frame_index) + "," + to_string(r.reason) + "\n";
      ++n_rejected;
    }
    for (auto& f : rf.frames) frames.push_back(std::move(f));
  }
  if (rejections.empty()) {
    rejections = out;
    rejections.replace_extension(".rejections.csv");
  }
  write_file(rejections, log);
  if (frames.empty()) throw Exit(kEmpty, "frame: no frames survived filtering");
  write_file(out, write_feature_csv(frames));
  err << "frame: " << frames.size() << " frames from " << records.size() << " records, " << n_rejected << " rejected\n";
  return {frames.size(), n_rejected};
}

struct TrainOutcome {
  TrainTelemetry telemetry;
  ordered_json split;
};

inline TrainOutcome cmd_train(const RunConfig& rc, const fs::path& features_path, const fs::path& model_path,
                              const fs::path& telemetry_path, const fs::path& split_path, std::ostream& err) {
  const auto all = labelled_only(load_features(features_path));
  if (all.empty()) throw Exit(kEmpty, "train: " + features_path.string() + " has no labelled frames");

  ordered_json split;
  split["protocol"] = rc.protocol;
  split["seed"] = rc.seed;
  std::vector<FeatureFrame> train_set, validation_set, test_set;
  if (rc.protocol == "frame-split") {
    auto parts = split_frames(all, rc.fractions, rc.seed);
    train_set = std::move(parts.train);
    validation_set = std::move(parts.validation);
    test_set = std::move(parts.test);
    split["fractions"] = rc.fractions;
    split["train_subjects"] = ordered_json::array();
    split["test_subjects"] = ordered_json::array();
  } else if (rc.protocol == "subject-disjoint") {
    const auto subjects = split_subject_disjoint(all, rc.subject_train_fraction, rc.seed);
    auto [train_side, test_side] = partition_by_subject(all, subjects);
    // Validation frames come from the training subjects only.
    const double val_share = rc.fractions[1] / (rc.fractions[0] + rc.fractions[1]);
    auto parts = split_frames(std::move(train_side), {1.0 - val_share, val_share, 0.0}, rc.seed);
    train_set = std::move(parts.train);
    validation_set = std::move(parts.validation);
    test_set = std::move(test_side);
    split["fractions"] = {rc.subject_train_fraction, 1.0 - rc.subject_train_fraction};
    split["train_subjects"] = subjects.train_subjects;
    split["test_subjects"] = subjects.test_subjects;
  } else {
    throw ConfigError("--protocol must be frame-split or subject-disjoint");
  }
  auto keys = [](const std::vector<FeatureFrame>& frames) {
    std::vector<std::string> k;
    for (const auto& f : frames) k.push_back(frame_key(f));
    return k;
  };
  split["train"] = keys(train_set);
  split["validation"] = keys(validation_set);
  split["test"] = keys(test_set);

  NetworkConfig config = rc.network;
  config.init_seed = rc.seed;
  const auto train_examples = to_examples(train_set);
  const auto validation_examples = to_examples(validation_set);
  const auto result = train(init_network(config), train_examples, validation_examples, config);

  write_file(model_path, save_model(result.network));
  if (!telemetry_path.empty()) write_file(telemetry_path, dump_json(telemetry_to_json(result.telemetry)));
  if (!split_path.empty()) write_file(split_path, dump_json(split));
  const auto& t = result.telemetry;
  err << "train: " << train_set.size() << "/" << validation_set.size() << "/" << test_set.size() << " frames, " << t.epochs
      << " epochs, best " << t.best_epoch << ", stop " << to_string(t.stop_reason) << "\n";
  return {t, split};
}

// Frames named by the split's "test" list, in file order.
inline std::vector<FeatureFrame> select_split_part(const std::vector<FeatureFrame>& frames, const ordered_json& split,
                                                   const std::string& part) {
  std::set<std::string> wanted;
  try {
    for (const auto& k : split.at(part)) wanted.insert(k.get<std::string>());
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("bad split file: ") + e.what());
  }
  std::vector<FeatureFrame> out;
  for (const auto& f : frames) {
    if (wanted.count(frame_key(f))) out.push_back(f);
  }
  if (out.size() != wanted.size()) {
    throw ShapeError("split names " + std::to_string(wanted.size()) + " " + part + " frames, features file matches " +
                     std::to_string(out.size()));
  }
  return out;
}

inline void check_schema(const Network& net) {
  if (net.config.input_len != static_cast<int>(kFeatureCount)) {
    throw ShapeError("model expects " + std::to_string(net.config.input_len) + " inputs, features have " +
                     std::to_string(kFeatureCount));
  }
}

inline std::vector<double> predict_all(const Network& net, const std::vector<FeatureFrame>& frames) {
  std::vector<double> p;
  p.reserve(frames.size());
  for (const auto& f : frames) p.push_back(forward(net, f.features));
  return p;
}

inline EvaluationReport cmd_evaluate(const fs::path& model_path, const fs::path& features_path, const fs::path& split_path,
                                     const fs::path& telemetry_path, const fs::path& report_path, std::ostream& out) {
  const Network net = load_model_file(model_path);
  check_schema(net);
  auto frames = labelled_only(load_features(features_path));
  SplitDescription desc;
  if (!split_path.empty()) {
    const auto split = read_json_file(split_path);
    const auto train_size = split.contains("train") ? split["train"].size() : 0;
    const auto val_size = split.contains("validation") ? split["validation"].size() : 0;
    frames = select_split_part(frames, split, "test");
    try {
      desc.protocol = split.at("protocol").get<std::string>();
      desc.seed = split.at("seed").get<std::uint64_t>();
      desc.fractions = split.at("fractions").get<std::vector<double>>();
      desc.train_subjects = split.at("train_subjects").get<std::vector<std::string>>();
      desc.test_subjects = split.at("test_subjects").get<std::vector<std::string>>();
    } catch (const nlohmann::json::exception& e) {
      throw FormatError(split_path.string() + ": " + e.what());
    }
    desc.sizes = {train_size, val_size, frames.size()};
  } else {
    desc.protocol = "all-frames";
    desc.sizes = {0, 0, frames.size()};
  }
  if (frames.empty()) throw Exit(kEmpty, "evaluate: no labelled frames to evaluate");
  std::optional<TrainTelemetry> telemetry;
  if (!telemetry_path.empty()) telemetry = telemetry_from_json(read_json_file(telemetry_path));

  const auto probabilities = predict_all(net, frames);
  std::vector<int> classes;
  for (double p : probabilities) classes.push_back(classify(p));
  auto report = build_report(frames, classes, desc, telemetry);
  out << render_text(report);
  if (!report_path.empty()) write_file(report_path, dump_json(report_to_json(report)));
  return report;
}

inline void cmd_predict(const fs::path& model_path, const fs::path& features_path, const fs::path& out_path,
                        std::ostream& out) {
  const Network net = load_model_file(model_path);
  check_schema(net);
  const auto frames = load_features(features_path);
  const auto csv = write_predictions_csv(frames, predict_all(net, frames));
  if (out_path.empty()) {
    out << csv;
  } else {
    write_file(out_path, csv);
  }
}

struct PlotOutcome {
  std::size_t samples = 0;
  std::size_t peaks = 0;
};

// lead.csv: t,mv; rpeaks.csv: sample,t,mv; frame.csv: index,value (one
// resampled frame); loss.csv: epoch,train,validation.
inline PlotOutcome cmd_plot(const RunConfig& rc, const fs::path& record_path, const fs::path& out_dir, int frame_number,
                            const fs::path& telemetry_path, std::ostream& err) {
  EcgRecord record;
  try {
    record = load_record(record_path);
  } catch (const Error& e) {
    throw ParseError(record_path.string() + ": " + e.what());
  }
  RPeakList peaks;
  if (rc.rpeaks == "annotated") {
    auto ann = find_annotations({record_path, std::nullopt, std::nullopt, std::nullopt});
    if (!ann) throw IoError(record_path.string() + ": no annotation file for --rpeaks annotated");
    peaks = rpeaks_from_annotations(*ann, record.n_samples);
  } else {
    peaks = detect_rpeaks(record, rc.frame.lead_index);
  }
  const auto& lead = record.lead(rc.frame.lead_index);
  const double fs_hz = record.sampling_frequency;

  std::string lead_csv = "t,mv\n";
  for (std::size_t k = 0; k < lead.size(); ++k) {
    lead_csv += detail::format_double(static_cast<double>(k) / fs_hz) + "," + detail::format_double(lead[k]) + "\n";
  }
  std::string peaks_csv = "sample,t,mv\n";
  for (auto i : peaks.indices) {
    peaks_csv += std::to_string(i) + "," + detail::format_double(static_cast<double>(i) / fs_hz) + "," +
                 detail::format_double(lead[static_cast<std::size_t>(i)]) + "\n";
  }
  write_file(out_dir / "lead.csv", lead_csv);
  write_file(out_dir / "rpeaks.csv", peaks_csv);

  const auto rf = frame_record(record, peaks, rc.frame);
  if (!rf.frames.empty()) {
    const auto& f = rf.frames[static_cast<std::size_t>(std::clamp<int>(frame_number, 0, static_cast<int>(rf.frames.size()) - 1))];
    std::string frame_csv = "index,value\n";
    for (std::size_t k = 0; k < kFrameLength; ++k) {
      frame_csv += std::to_string(k) + "," + detail::format_double(f.features[k]) + "\n";
    }
    write_file(out_dir / "frame.csv", frame_csv);
  }
  if (!telemetry_path.empty()) {
    const auto t = telemetry_from_json(read_json_file(telemetry_path));
    std::string loss_csv = "epoch,train,validation\n";
    for (std::size_t e = 0; e < t.loss_history.size(); ++e) {
      loss_csv += std::to_string(e + 1) + "," + detail::format_double(t.loss_history[e].train) + "," +
                  detail::format_double(t.loss_history[e].validation) + "\n";
    }
    write_file(out_dir / "loss.csv", loss_csv);
  }
  err << "plot: " << lead.size() << " samples, " << peaks.indices.size() << " peaks written to " << out_dir.string() << "\n";
  return {lead.size(), peaks.indices.size()};
}

// ---------------------------------------------------------------------------
// Argument parsing

inline int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Arrhythmia detection from RR-interval framed ECG", "cads"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Expand all help");

  RunConfig rc;
  std::string config_path;
  std::optional<std::uint64_t> seed;

  auto common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "JSON run configuration");
    sub->add_option("--seed", seed, "Seed (default: CADS_SEED or 1)");
  };

  // synth
  auto* synth = app.add_subcommand("synth", "Generate a synthetic labelled corpus");
  std::string synth_out;
  std::optional<int> n_normal, n_arrhythmia;
  std::optional<double> duration, noise;
  common(synth);
  synth->add_option("--out", synth_out, "Output directory")->required();
  synth->add_option("--normal", n_normal, "Number of normal records");
  synth->add_option("--arrhythmia", n_arrhythmia, "Number of arrhythmia records");
  synth->add_option("--duration", duration, "Record length in seconds");
  synth->add_option("--noise", noise, "Additive noise standard deviation (mV)");

  // frame
  auto* frame = app.add_subcommand("frame", "Detect R-peaks and build RR-interval frames");
  std::vector<std::string> frame_inputs;
  std::string frame_out, frame_rejections;
  std::optional<std::string> rpeaks_mode;
  common(frame);
  frame->add_option("--input", frame_inputs, "Record files, directories or manifest.json")->required();
  frame->add_option("--out", frame_out, "Feature CSV")->required();
  frame->add_option("--rejections", frame_rejections, "Rejection log (default: <out stem>.rejections.csv)");
  frame->add_option("--rpeaks", rpeaks_mode, "detect or annotated");

  // train
  auto* trn = app.add_subcommand("train", "Train the network on a feature CSV");
  std::string train_features, train_model, train_telemetry, train_split;
  std::optional<std::string> protocol;
  std::optional<double> learning_rate;
  std::optional<int> max_epochs, batch_size, patience;
  common(trn);
  trn->add_option("--features", train_features, "Feature CSV")->required();
  trn->add_option("--model", train_model, "Model output file")->required();
  trn->add_option("--telemetry", train_telemetry, "Telemetry JSON output");
  trn->add_option("--split", train_split, "Split membership JSON output");
  trn->add_option("--protocol", protocol, "frame-split or subject-disjoint");
  trn->add_option("--learning-rate", learning_rate, "SGD learning rate");
  trn->add_option("--max-epochs", max_epochs, "Epoch limit");
  trn->add_option("--batch-size", batch_size, "Mini-batch size");
  trn->add_option("--patience", patience, "Validation checks before stopping");

  // evaluate
  auto* evaluate = app.add_subcommand("evaluate", "Score a model and print the confusion report");
  std::string eval_model, eval_features, eval_split, eval_telemetry, eval_report;
  common(evaluate);
  evaluate->add_option("--model", eval_model, "Model file")->required();
  evaluate->add_option("--features", eval_features, "Feature CSV")->required();
  evaluate->add_option("--split", eval_split, "Split JSON from train; evaluates its test part");
  evaluate->add_option("--telemetry", eval_telemetry, "Telemetry JSON to include in the report");
  evaluate->add_option("--report", eval_report, "Report JSON output");

  // predict
  auto* predict = app.add_subcommand("predict", "Per-frame probabilities and classes");
  std::string pred_model, pred_features, pred_out;
  common(predict);
  predict->add_option("--model", pred_model, "Model file")->required();
  predict->add_option("--features", pred_features, "Feature CSV")->required();
  predict->add_option("--out", pred_out, "Output CSV (default: stdout)");

  // plot
  auto* plot = app.add_subcommand("plot", "Write CSV series for plotting");
  std::string plot_record, plot_out, plot_telemetry;
  int plot_frame = 0;
  common(plot);
  plot->add_option("--record", plot_record, "Record file")->required();
  plot->add_option("--out", plot_out, "Output directory")->required();
  plot->add_option("--frame", plot_frame, "Frame to emit");
  plot->add_option("--telemetry", plot_telemetry, "Telemetry JSON for loss curves");
  plot->add_option("--rpeaks", rpeaks_mode, "detect or annotated");

  // pipeline
  auto* pipeline = app.add_subcommand("pipeline", "synth, frame, train and evaluate in one go");
  std::string pipe_out;
  common(pipeline);
  pipeline->add_option("--out", pipe_out, "Output directory")->required();
  pipeline->add_option("--normal", n_normal, "Number of normal records");
  pipeline->add_option("--arrhythmia", n_arrhythmia, "Number of arrhythmia records");
  pipeline->add_option("--duration", duration, "Record length in seconds");
  pipeline->add_option("--noise", noise, "Additive noise standard deviation (mV)");
  pipeline->add_option("--rpeaks", rpeaks_mode, "detect or annotated");
  pipeline->add_option("--protocol", protocol, "frame-split or subject-disjoint");
  pipeline->add_option("--learning-rate", learning_rate, "SGD learning rate");
  pipeline->add_option("--max-epochs", max_epochs, "Epoch limit");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "cads: " << e.what() << "\n";
    return kUsage;
  }

  try {
    rc.seed = default_seed();
    load_config_file(rc, config_path);
    if (seed) rc.seed = *seed;
    if (n_normal) rc.n_normal = *n_normal;
    if (n_arrhythmia) rc.n_arrhythmia = *n_arrhythmia;
    if (duration) rc.duration = *duration;
    if (noise) rc.corpus.noise_amplitude = *noise;
    if (rpeaks_mode) rc.rpeaks = *rpeaks_mode;
    if (protocol) rc.protocol = *protocol;
    if (learning_rate) rc.network.learning_rate = *learning_rate;
    if (max_epochs) rc.network.max_epochs = *max_epochs;
    if (batch_size) rc.network.batch_size = *batch_size;
    if (patience) rc.network.patience = *patience;
    layer_shapes(rc.network);

    if (*synth) {
      cmd_synth(rc, synth_out, err);
    } else if (*frame) {
      cmd_frame(rc, frame_inputs, frame_out, frame_rejections, err);
    } else if (*trn) {
      cmd_train(rc, train_features, train_model, train_telemetry, train_split, err);
    } else if (*evaluate) {
      cmd_evaluate(eval_model, eval_features, eval_split, eval_telemetry, eval_report, out);
    } else if (*predict) {
      cmd_predict(pred_model, pred_features, pred_out, out);
    } else if (*plot) {
      cmd_plot(rc, plot_record, plot_out, plot_frame, plot_telemetry, err);
    } else if (*pipeline) {
      const fs::path dir(pipe_out);
      cmd_synth(rc, dir / "corpus", err);
      cmd_frame(rc, {(dir / "corpus" / "manifest.json").string()}, dir / "features.csv", {}, err);
      cmd_train(rc, dir / "features.csv", dir / "model.json", dir / "telemetry.json", dir / "split.json", err);
      std::ostringstream text;
      cmd_evaluate(dir / "model.json", dir / "features.csv", dir / "split.json", dir / "telemetry.json",
                   dir / "report.json", text);
      write_file(dir / "report.txt", text.str());
      out << text.str();
    }
    return kOk;
  } catch (const Exit& e) {
    err << "cads: " << e.what() << "\n";
    return e.code();
  } catch (const Error& e) {
    err << "cads: " << e.what() << "\n";
    return exit_code_for(e);
  } catch (const std::exception& e) {
    err << "cads: " << e.what() << "\n";
    return kIo;
  }
}

}  // namespace cads::cli
