#pragma once

// ECG record and beat-annotation I/O.
//
// Two sources are understood:
//   * a WFDB subset: text header (.hea), format 212 / format 16 signal files
//     (.dat) and MIT-format annotation streams (.atr and friends);
//   * a CSV interchange format with `#key=value` metadata lines.
//
// CSV grammar (one record per file):
//
//   # record_id=<text>          optional, defaults to the file stem
//   # subject_id=<text>         optional, defaults to record_id
//   # fs=<real>                 required, Hz
//   # label=normal|arrhythmia|unknown   optional, defaults to unknown
//   t,lead1[,lead2...]          header row, first non-comment line
//   <t>,<mV>[,<mV>...]          one row per sample
//
// Comment lines may appear anywhere; unknown keys are ignored. The `t` column
// is informational (written as index/fs) and is not read back.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "cads/error.hpp"

namespace cads {

enum class Label { normal, arrhythmia, unknown };

inline std::string to_string(Label label) {
  switch (label) {
    case Label::normal: return "normal";
    case Label::arrhythmia: return "arrhythmia";
    case Label::unknown: break;
  }
  return "unknown";
}

inline std::optional<Label> label_from_string(std::string_view text) {
  if (text == "normal") return Label::normal;
  if (text == "arrhythmia") return Label::arrhythmia;
  if (text == "unknown") return Label::unknown;
  return std::nullopt;
}

struct EcgRecord {
  std::string record_id;
  std::string subject_id;
  double sampling_frequency = 0.0;  // Hz
  std::vector<std::vector<double>> leads;  // millivolts
  std::size_t n_samples = 0;
  Label label_hint = Label::unknown;

  double duration_seconds() const {
    return sampling_frequency > 0 ? static_cast<double>(n_samples) / sampling_frequency : 0.0;
  }

  const std::vector<double>& lead(std::size_t index) const {
    if (index >= leads.size()) {
      throw ShapeError("record '" + record_id + "' has " + std::to_string(leads.size()) +
                       " leads, lead " + std::to_string(index) + " requested");
    }
    return leads[index];
  }

  bool operator==(const EcgRecord&) const = default;
};

// Throws ParseError when the record violates its structural invariants.
inline void validate(const EcgRecord& record) {
  if (!(record.sampling_frequency > 0) || !std::isfinite(record.sampling_frequency)) {
    throw ParseError("record '" + record.record_id + "': sampling frequency must be positive");
  }
  for (std::size_t i = 0; i < record.leads.size(); ++i) {
    const auto& lead = record.leads[i];
    if (lead.size() != record.n_samples) {
      throw ParseError("record '" + record.record_id + "': lead " + std::to_string(i) + " has " +
                       std::to_string(lead.size()) + " samples, expected " +
                       std::to_string(record.n_samples));
    }
    for (std::size_t k = 0; k < lead.size(); ++k) {
      if (!std::isfinite(lead[k])) {
        throw ParseError("record '" + record.record_id + "': non-finite sample at lead " +
                         std::to_string(i) + " index " + std::to_string(k));
      }
    }
  }
}

// ---------------------------------------------------------------------------
// Annotations

struct Annotation {
  std::int64_t sample = 0;
  int type_code = 0;  // 0..63
  std::string aux;

  bool operator==(const Annotation&) const = default;
};

struct AnnotationSet {
  std::vector<Annotation> entries;

  bool operator==(const AnnotationSet&) const = default;
};

namespace annotation_code {
inline constexpr int kNormal = 1;
inline constexpr int kPvc = 5;
inline constexpr int kSkip = 59;
inline constexpr int kNum = 60;
inline constexpr int kSub = 61;
inline constexpr int kChn = 62;
inline constexpr int kAux = 63;
}  // namespace annotation_code

// True for the codes WFDB counts as QRS complexes (its `isqrs` table).
inline bool is_beat_code(int code) {
  switch (code) {
    case 1: case 2: case 3: case 4: case 5: case 6: case 7:
    case 8: case 9: case 10: case 11: case 12: case 13:
    case 25: case 30: case 34: case 35: case 37: case 38: case 41:
      return true;
    default:
      return false;
  }
}

// ---------------------------------------------------------------------------
// Small parsing helpers

namespace detail {

inline std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

inline std::vector<std::string_view> split_whitespace(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && (s[i] == ' ' || s[i] == '\t' || s[i] == '\r')) ++i;
    if (i >= s.size()) break;
    std::size_t j = i;
    while (j < s.size() && s[j] != ' ' && s[j] != '\t' && s[j] != '\r') ++j;
    out.push_back(s.substr(i, j - i));
    i = j;
  }
  return out;
}

inline std::vector<std::string_view> split_lines(std::string_view text) {
  std::vector<std::string_view> lines;
  std::size_t start = 0;
  while (start <= text.size()) {
    auto end = text.find('\n', start);
    if (end == std::string_view::npos) {
      if (start < text.size()) lines.push_back(text.substr(start));
      break;
    }
    lines.push_back(text.substr(start, end - start));
    start = end + 1;
  }
  return lines;
}

template <typename T>
std::optional<T> parse_number(std::string_view token) {
  token = trim(token);
  if (token.empty()) return std::nullopt;
  if (token.front() == '+') token.remove_prefix(1);
  T value{};
  const auto* end = token.data() + token.size();
  auto [ptr, ec] = std::from_chars(token.data(), end, value);
  if (ec != std::errc{} || ptr != end) return std::nullopt;
  return value;
}

// Shortest decimal form that reads back to the identical double.
inline std::string format_double(double value) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, value);
  if (ec != std::errc{}) return "nan";
  return std::string(buf, ptr);
}

}  // namespace detail

// ---------------------------------------------------------------------------
// File helpers

inline std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return bytes;
}

inline std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_text_file(const std::filesystem::path& path, std::string_view text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) throw IoError("write failed for '" + path.string() + "'");
}

// ---------------------------------------------------------------------------
// WFDB header

inline constexpr double kDefaultGain = 200.0;  // ADC units per mV

struct WfdbSignalSpec {
  std::string file_name;
  int format = 0;
  double gain = kDefaultGain;
  int baseline = 0;
  int adc_zero = 0;
  int initial_value = 0;
  std::string description;
};

struct WfdbHeader {
  std::string record_id;
  int n_signals = 0;
  double sampling_frequency = 250.0;
  std::int64_t n_samples = 0;
  std::vector<WfdbSignalSpec> signals;
};

inline WfdbHeader parse_wfdb_header(std::string_view text) {
  using detail::parse_number;
  WfdbHeader header;
  bool have_record_line = false;
  int line_no = 0;
  for (auto raw : detail::split_lines(text)) {
    ++line_no;
    auto line = detail::trim(raw);
    if (line.empty() || line.front() == '#') continue;
    auto tokens = detail::split_whitespace(line);
    const auto where = "line " + std::to_string(line_no);

    if (!have_record_line) {
      if (tokens.size() < 2) throw ParseError(where + ": record line needs at least a name and a signal count");
      if (tokens[0].find('/') != std::string_view::npos) {
        throw UnsupportedFormat(where + ": multi-segment records are not supported");
      }
      header.record_id = std::string(tokens[0]);
      auto n_signals = parse_number<int>(tokens[1]);
      if (!n_signals || *n_signals < 0) {
        throw ParseError(where + ": bad signal count '" + std::string(tokens[1]) + "'");
      }
      header.n_signals = *n_signals;
      if (tokens.size() > 2) {
        // fs may carry a counter frequency and base counter: 360/1(0)
        auto fs_token = tokens[2].substr(0, tokens[2].find_first_of("/("));
        auto fs = parse_number<double>(fs_token);
        if (!fs || !(*fs > 0)) throw ParseError(where + ": bad sampling frequency '" + std::string(tokens[2]) + "'");
        header.sampling_frequency = *fs;
      }
      if (tokens.size() > 3) {
        auto n = parse_number<std::int64_t>(tokens[3]);
        if (!n || *n < 0) throw ParseError(where + ": bad sample count '" + std::string(tokens[3]) + "'");
        header.n_samples = *n;
      }
      have_record_line = true;
      continue;
    }

    if (static_cast<int>(header.signals.size()) >= header.n_signals) continue;  // info lines
    if (tokens.size() < 2) throw ParseError(where + ": signal line needs a file name and a format");

    WfdbSignalSpec spec;
    spec.file_name = std::string(tokens[0]);
    // format[xSPF][:skew][+offset]
    auto fmt_token = tokens[1].substr(0, tokens[1].find_first_of("x:+"));
    auto fmt = parse_number<int>(fmt_token);
    if (!fmt) throw ParseError(where + ": bad format '" + std::string(tokens[1]) + "'");
    if (*fmt != 212 && *fmt != 16) {
      throw UnsupportedFormat(where + ": signal format " + std::to_string(*fmt) + " (only 212 and 16)");
    }
    if (tokens[1].find_first_of("x:+") != std::string_view::npos) {
      throw UnsupportedFormat(where + ": samples-per-frame, skew and byte offset are not supported");
    }
    spec.format = *fmt;

    std::optional<int> explicit_baseline;
    if (tokens.size() > 2) {
      // gain[(baseline)][/units]
      auto g = tokens[2];
      auto gain = parse_number<double>(g.substr(0, g.find_first_of("(/")));
      if (!gain) throw ParseError(where + ": bad gain '" + std::string(g) + "'");
      spec.gain = *gain == 0.0 ? kDefaultGain : *gain;
      if (auto open = g.find('('); open != std::string_view::npos) {
        auto close = g.find(')', open);
        if (close == std::string_view::npos) throw ParseError(where + ": unterminated baseline in '" + std::string(g) + "'");
        auto b = parse_number<int>(g.substr(open + 1, close - open - 1));
        if (!b) throw ParseError(where + ": bad baseline in '" + std::string(g) + "'");
        explicit_baseline = *b;
      }
      if (auto slash = g.find('/'); slash != std::string_view::npos && g.substr(slash + 1) != "mV") {
        throw UnsupportedFormat(where + ": physical units '" + std::string(g.substr(slash + 1)) + "' (only mV)");
      }
    }
    auto int_field = [&](std::size_t idx, const char* name) -> std::optional<int> {
      if (tokens.size() <= idx) return std::nullopt;
      auto v = parse_number<int>(tokens[idx]);
      if (!v) throw ParseError(where + ": bad " + name + " '" + std::string(tokens[idx]) + "'");
      return v;
    };
    int_field(3, "ADC resolution");
    spec.adc_zero = int_field(4, "ADC zero").value_or(0);
    spec.initial_value = int_field(5, "initial value").value_or(spec.adc_zero);
    // WFDB: an omitted baseline equals the ADC zero, which itself defaults to 0.
    spec.baseline = explicit_baseline.value_or(spec.adc_zero);
    if (tokens.size() > 8) {
      auto pos = tokens[8].data() - line.data();
      spec.description = std::string(detail::trim(line.substr(static_cast<std::size_t>(pos))));
    }
    header.signals.push_back(std::move(spec));
  }
  if (!have_record_line) throw ParseError("line " + std::to_string(line_no == 0 ? 1 : line_no) + ": missing record line");
  if (static_cast<int>(header.signals.size()) != header.n_signals) {
    throw ParseError("header declares " + std::to_string(header.n_signals) + " signals but describes " +
                     std::to_string(header.signals.size()));
  }
  return header;
}

// ---------------------------------------------------------------------------
// Signal files

// Format 212: pairs of 12-bit two's-complement samples packed in 3 bytes.
//   s0 = byte0 | (byte1 & 0x0F) << 8
//   s1 = byte2 | (byte1 & 0xF0) << 4
// Samples are interleaved across signals; the result is indexed [signal][sample].
inline std::vector<std::vector<int>> parse_wfdb_signal_212(std::span<const std::uint8_t> bytes,
                                                           int n_signals, std::int64_t n_samples) {
  if (n_signals <= 0 || n_samples < 0) throw ParseError("format 212: bad signal or sample count");
  const auto total = static_cast<std::size_t>(n_signals) * static_cast<std::size_t>(n_samples);
  const std::size_t needed = (total * 3 + 1) / 2;
  if (bytes.size() < needed) {
    throw ParseError("format 212: stream truncated at byte offset " + std::to_string(bytes.size()) +
                     " (need " + std::to_string(needed) + " bytes)");
  }
  auto sign_extend = [](unsigned v) { return (v & 0x800u) ? static_cast<int>(v) - 0x1000 : static_cast<int>(v); };

  std::vector<std::vector<int>> out(static_cast<std::size_t>(n_signals),
                                    std::vector<int>(static_cast<std::size_t>(n_samples)));
  for (std::size_t v = 0; v < total; ++v) {
    const std::size_t base = (v / 2) * 3;
    unsigned raw;
    if (v % 2 == 0) {
      raw = bytes[base] | ((bytes[base + 1] & 0x0Fu) << 8);
    } else {
      raw = bytes[base + 2] | ((bytes[base + 1] & 0xF0u) << 4);
    }
    out[v % static_cast<std::size_t>(n_signals)][v / static_cast<std::size_t>(n_signals)] = sign_extend(raw);
  }
  return out;
}

// Inverse of parse_wfdb_signal_212. Values must lie in [-2048, 2047].
inline std::vector<std::uint8_t> encode_format_212(const std::vector<std::vector<int>>& signals) {
  if (signals.empty()) return {};
  const std::size_t n_samples = signals.front().size();
  std::vector<int> interleaved;
  interleaved.reserve(signals.size() * n_samples);
  for (std::size_t k = 0; k < n_samples; ++k) {
    for (const auto& s : signals) {
      if (s.size() != n_samples) throw ShapeError("format 212: signals differ in length");
      if (s[k] < -2048 || s[k] > 2047) throw ShapeError("format 212: sample " + std::to_string(s[k]) + " out of 12-bit range");
      interleaved.push_back(s[k]);
    }
  }
  std::vector<std::uint8_t> bytes((interleaved.size() * 3 + 1) / 2, 0);
  for (std::size_t v = 0; v < interleaved.size(); ++v) {
    const unsigned u = static_cast<unsigned>(interleaved[v]) & 0xFFFu;
    const std::size_t base = (v / 2) * 3;
    if (v % 2 == 0) {
      bytes[base] = static_cast<std::uint8_t>(u & 0xFFu);
      bytes[base + 1] = static_cast<std::uint8_t>((bytes[base + 1] & 0xF0u) | (u >> 8));
    } else {
      bytes[base + 1] = static_cast<std::uint8_t>((bytes[base + 1] & 0x0Fu) | ((u >> 8) << 4));
      bytes[base + 2] = static_cast<std::uint8_t>(u & 0xFFu);
    }
  }
  return bytes;
}

// Format 16: little-endian 16-bit two's-complement samples, interleaved.
inline std::vector<std::vector<int>> parse_wfdb_signal_16(std::span<const std::uint8_t> bytes,
                                                          int n_signals, std::int64_t n_samples) {
  if (n_signals <= 0 || n_samples < 0) throw ParseError("format 16: bad signal or sample count");
  const auto total = static_cast<std::size_t>(n_signals) * static_cast<std::size_t>(n_samples);
  if (bytes.size() < total * 2) {
    throw ParseError("format 16: stream truncated at byte offset " + std::to_string(bytes.size()) +
                     " (need " + std::to_string(total * 2) + " bytes)");
  }
  std::vector<std::vector<int>> out(static_cast<std::size_t>(n_signals),
                                    std::vector<int>(static_cast<std::size_t>(n_samples)));
  for (std::size_t v = 0; v < total; ++v) {
    const auto word = static_cast<std::uint16_t>(bytes[2 * v] | (bytes[2 * v + 1] << 8));
    out[v % static_cast<std::size_t>(n_signals)][v / static_cast<std::size_t>(n_signals)] = static_cast<std::int16_t>(word);
  }
  return out;
}

inline double adc_to_mv(int adc, double gain, int baseline) {
  return (static_cast<double>(adc) - baseline) / gain;
}

inline int mv_to_adc(double mv, double gain, int baseline) {
  return static_cast<int>(std::lround(mv * gain + baseline));
}

// ---------------------------------------------------------------------------
// MIT annotation stream

inline AnnotationSet parse_wfdb_annotations(std::span<const std::uint8_t> bytes) {
  namespace code = annotation_code;
  AnnotationSet set;
  std::int64_t time = 0;
  std::size_t pos = 0;
  auto read_word = [&](const char* what) -> unsigned {
    if (pos + 2 > bytes.size()) {
      throw ParseError(std::string("annotation stream ends at byte offset ") + std::to_string(pos) +
                       " while reading " + what);
    }
    const unsigned w = bytes[pos] | (bytes[pos + 1] << 8);
    pos += 2;
    return w;
  };

  for (;;) {
    const unsigned word = read_word("an annotation word (no terminator)");
    const int type = static_cast<int>(word >> 10);
    const unsigned data = word & 0x3FFu;
    if (type == 0 && data == 0) break;

    switch (type) {
      case code::kSkip: {
        // PDP-11 long: high 16-bit word first, each word little-endian.
        const unsigned high = read_word("a SKIP interval");
        const unsigned low = read_word("a SKIP interval");
        time += static_cast<std::int32_t>((high << 16) | low);
        break;
      }
      case code::kNum:
      case code::kSub:
      case code::kChn:
        break;
      case code::kAux: {
        const std::size_t len = data;
        if (pos + len > bytes.size()) {
          throw ParseError("AUX field of " + std::to_string(len) + " bytes at byte offset " +
                           std::to_string(pos) + " runs past end of stream");
        }
        std::string aux(reinterpret_cast<const char*>(bytes.data() + pos), len);
        if (auto nul = aux.find('\0'); nul != std::string::npos) aux.resize(nul);
        pos += len + (len & 1u);
        if (!set.entries.empty()) set.entries.back().aux = std::move(aux);
        break;
      }
      default:
        time += data;
        if (type >= 1 && type <= 49) set.entries.push_back({time, type, {}});
        break;
    }
  }
  return set;
}

// Plain-text annotation sidecar: one `sample,type_code` pair per line.
inline std::string write_annotation_text(const AnnotationSet& set) {
  std::string out;
  for (const auto& a : set.entries) {
    out += std::to_string(a.sample) + "," + std::to_string(a.type_code) + "\n";
  }
  return out;
}

inline AnnotationSet parse_annotation_text(std::string_view text) {
  AnnotationSet set;
  int line_no = 0;
  for (auto raw : detail::split_lines(text)) {
    ++line_no;
    auto line = detail::trim(raw);
    if (line.empty() || line.front() == '#') continue;
    auto comma = line.find(',');
    auto sample = detail::parse_number<std::int64_t>(line.substr(0, comma));
    auto type = comma == std::string_view::npos ? std::optional<int>(annotation_code::kNormal)
                                                : detail::parse_number<int>(line.substr(comma + 1));
    if (!sample || !type || *type < 0 || *type > 63) {
      throw ParseError("annotation line " + std::to_string(line_no) + ": expected 'sample,type'");
    }
    if (!set.entries.empty() && *sample < set.entries.back().sample) {
      throw ParseError("annotation line " + std::to_string(line_no) + ": sample indices must be non-decreasing");
    }
    set.entries.push_back({*sample, *type, {}});
  }
  return set;
}

// ---------------------------------------------------------------------------
// WFDB record loading

inline EcgRecord load_wfdb_record(const std::filesystem::path& header_path) {
  const auto header = parse_wfdb_header(read_text_file(header_path));
  EcgRecord record;
  record.record_id = header.record_id;
  record.subject_id = header.record_id;
  record.sampling_frequency = header.sampling_frequency;
  record.n_samples = static_cast<std::size_t>(header.n_samples);
  record.leads.resize(static_cast<std::size_t>(header.n_signals));

  // Signals sharing a file are interleaved within it, in header order.
  std::vector<std::string> files;
  for (const auto& s : header.signals) {
    if (std::find(files.begin(), files.end(), s.file_name) == files.end()) files.push_back(s.file_name);
  }
  for (const auto& file : files) {
    std::vector<std::size_t> members;
    for (std::size_t i = 0; i < header.signals.size(); ++i) {
      if (header.signals[i].file_name == file) members.push_back(i);
    }
    const int format = header.signals[members.front()].format;
    for (auto i : members) {
      if (header.signals[i].format != format) throw UnsupportedFormat("mixed formats within '" + file + "'");
    }
    const auto bytes = read_file_bytes(header_path.parent_path() / file);
    const int group = static_cast<int>(members.size());
    auto raw = format == 212 ? parse_wfdb_signal_212(bytes, group, header.n_samples)
                             : parse_wfdb_signal_16(bytes, group, header.n_samples);
    for (std::size_t m = 0; m < members.size(); ++m) {
      const auto& spec = header.signals[members[m]];
      auto& lead = record.leads[members[m]];
      lead.reserve(raw[m].size());
      for (int adc : raw[m]) lead.push_back(adc_to_mv(adc, spec.gain, spec.baseline));
    }
  }
  validate(record);
  return record;
}

inline AnnotationSet load_wfdb_annotations(const std::filesystem::path& path) {
  return parse_wfdb_annotations(read_file_bytes(path));
}

// ---------------------------------------------------------------------------
// CSV interchange

inline EcgRecord parse_csv_record(std::string_view text) {
  EcgRecord record;
  std::optional<double> fs;
  std::optional<std::size_t> n_leads;
  int line_no = 0;
  for (auto raw : detail::split_lines(text)) {
    ++line_no;
    auto line = detail::trim(raw);
    if (line.empty()) continue;
    if (line.front() == '#') {
      auto body = detail::trim(line.substr(1));
      auto eq = body.find('=');
      if (eq == std::string_view::npos) continue;
      auto key = detail::trim(body.substr(0, eq));
      auto value = detail::trim(body.substr(eq + 1));
      if (key == "fs") {
        fs = detail::parse_number<double>(value);
        if (!fs || !(*fs > 0)) throw ParseError("line " + std::to_string(line_no) + ": bad fs '" + std::string(value) + "'");
      } else if (key == "record_id") {
        record.record_id = std::string(value);
      } else if (key == "subject_id") {
        record.subject_id = std::string(value);
      } else if (key == "label") {
        auto label = label_from_string(value);
        if (!label) throw ParseError("line " + std::to_string(line_no) + ": unknown label '" + std::string(value) + "'");
        record.label_hint = *label;
      }
      continue;
    }

    // Split on commas.
    std::vector<std::string_view> cells;
    std::size_t start = 0;
    for (;;) {
      auto comma = line.find(',', start);
      cells.push_back(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start));
      if (comma == std::string_view::npos) break;
      start = comma + 1;
    }

    if (!n_leads) {
      if (cells.size() < 2 || detail::trim(cells[0]) != "t") {
        throw ParseError("line " + std::to_string(line_no) + ": header row must be 't,lead1[,lead2...]'");
      }
      n_leads = cells.size() - 1;
      record.leads.assign(*n_leads, {});
      continue;
    }
    if (cells.size() != *n_leads + 1) {
      throw ParseError("line " + std::to_string(line_no) + ": row has " + std::to_string(cells.size()) +
                       " columns, header has " + std::to_string(*n_leads + 1));
    }
    for (std::size_t c = 1; c < cells.size(); ++c) {
      auto v = detail::parse_number<double>(cells[c]);
      if (!v || !std::isfinite(*v)) {
        throw ParseError("line " + std::to_string(line_no) + ": bad amplitude '" + std::string(cells[c]) + "'");
      }
      record.leads[c - 1].push_back(*v);
    }
  }
  if (!fs) throw ParseError("missing '# fs=' metadata line");
  if (!n_leads) throw ParseError("missing header row");
  record.sampling_frequency = *fs;
  record.n_samples = record.leads.empty() ? 0 : record.leads.front().size();
  if (record.subject_id.empty()) record.subject_id = record.record_id;
  validate(record);
  return record;
}

inline std::string write_csv_record(const EcgRecord& record) {
  std::string out;
  out.reserve(record.n_samples * (record.leads.size() + 1) * 12 + 128);
  out += "# record_id=" + record.record_id + "\n";
  out += "# subject_id=" + record.subject_id + "\n";
  out += "# fs=" + detail::format_double(record.sampling_frequency) + "\n";
  out += "# label=" + to_string(record.label_hint) + "\n";
  out += "t";
  for (std::size_t i = 0; i < record.leads.size(); ++i) out += ",lead" + std::to_string(i + 1);
  out += "\n";
  for (std::size_t k = 0; k < record.n_samples; ++k) {
    out += detail::format_double(static_cast<double>(k) / record.sampling_frequency);
    for (const auto& lead : record.leads) {
      out += ',';
      out += detail::format_double(lead[k]);
    }
    out += '\n';
  }
  return out;
}

// Loads a record by extension: `.hea` goes through WFDB, anything else is CSV.
// CSV records without a record_id take the file stem.
inline EcgRecord load_record(const std::filesystem::path& path) {
  if (path.extension() == ".hea") return load_wfdb_record(path);
  auto record = parse_csv_record(read_text_file(path));
  if (record.record_id.empty()) record.record_id = path.stem().string();
  if (record.subject_id.empty()) record.subject_id = record.record_id;
  return record;
}

}  // namespace cads
