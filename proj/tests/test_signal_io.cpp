#include <gtest/gtest.h>

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <random>
#include <vector>

#include "cads/signal_io.hpp"

using namespace cads;

namespace {

const char* kRecord100Header =
    "100 2 360 650000\n"
    "100.dat 212 200 11 1024 995 -22131 0 MLII\n"
    "100.dat 212 200 11 1024 1011 20052 0 V5\n"
    "# 69 M 1085 1629 x1\n"
    "# Aldomet, Inderal\n";

// Independent packer written from the byte layout: for samples a, b the three
// bytes are a_lo, (b_hi << 4 | a_hi), b_lo.
std::vector<std::uint8_t> pack_pair(int a, int b) {
  const unsigned ua = static_cast<unsigned>(a) & 0xFFF;
  const unsigned ub = static_cast<unsigned>(b) & 0xFFF;
  return {static_cast<std::uint8_t>(ua & 0xFF), static_cast<std::uint8_t>(((ub >> 8) << 4) | (ua >> 8)),
          static_cast<std::uint8_t>(ub & 0xFF)};
}

void put_word(std::vector<std::uint8_t>& out, unsigned type, unsigned data) {
  const unsigned w = (type << 10) | (data & 0x3FF);
  out.push_back(static_cast<std::uint8_t>(w & 0xFF));
  out.push_back(static_cast<std::uint8_t>(w >> 8));
}

std::filesystem::path temp_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("cads_test_signal_io_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace

TEST(WfdbHeader, Record100Fields) {
  const auto h = parse_wfdb_header(kRecord100Header);
  EXPECT_EQ(h.record_id, "100");
  EXPECT_EQ(h.n_signals, 2);
  EXPECT_DOUBLE_EQ(h.sampling_frequency, 360.0);
  EXPECT_EQ(h.n_samples, 650000);
  ASSERT_EQ(h.signals.size(), 2u);
  EXPECT_EQ(h.signals[0].file_name, "100.dat");
  EXPECT_EQ(h.signals[0].format, 212);
  EXPECT_DOUBLE_EQ(h.signals[0].gain, 200.0);
  EXPECT_EQ(h.signals[0].adc_zero, 1024);
  EXPECT_EQ(h.signals[0].baseline, 1024);
  EXPECT_EQ(h.signals[0].initial_value, 995);
  EXPECT_EQ(h.signals[0].description, "MLII");
  EXPECT_EQ(h.signals[1].description, "V5");
}

TEST(WfdbHeader, ExplicitBaselineAndUnits) {
  const auto h = parse_wfdb_header("r 1 250 10\nr.dat 16 100(-5)/mV 16 0 0 0 0 lead\n");
  EXPECT_DOUBLE_EQ(h.signals[0].gain, 100.0);
  EXPECT_EQ(h.signals[0].baseline, -5);
}

TEST(WfdbHeader, ZeroGainMeansDefault) {
  const auto h = parse_wfdb_header("r 1 250 10\nr.dat 212 0 12 0\n");
  EXPECT_DOUBLE_EQ(h.signals[0].gain, kDefaultGain);
}

TEST(WfdbHeader, DefaultsWhenFieldsOmitted) {
  const auto h = parse_wfdb_header("r 1\nr.dat 212\n");
  EXPECT_DOUBLE_EQ(h.sampling_frequency, 250.0);
  EXPECT_DOUBLE_EQ(h.signals[0].gain, kDefaultGain);
  EXPECT_EQ(h.signals[0].baseline, 0);
}

TEST(WfdbHeader, RejectsUnsupportedFormat) {
  EXPECT_THROW(parse_wfdb_header("r 1 360 10\nr.dat 311 200\n"), UnsupportedFormat);
  EXPECT_THROW(parse_wfdb_header("r 1 360 10\nr.dat 212x2 200\n"), UnsupportedFormat);
  EXPECT_THROW(parse_wfdb_header("r/2 1 360 10\n"), UnsupportedFormat);
  EXPECT_THROW(parse_wfdb_header("r 1 360 10\nr.dat 212 200/uV\n"), UnsupportedFormat);
}

TEST(WfdbHeader, MalformedNamesLine) {
  try {
    parse_wfdb_header("# comment\nr x 360\n");
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos) << e.what();
  }
  EXPECT_THROW(parse_wfdb_header(""), ParseError);
  EXPECT_THROW(parse_wfdb_header("r 2 360 10\nr.dat 212\n"), ParseError);
}

TEST(Format212, HandPackedBytes) {
  // 0x123 and 0x456 -> 23 41 56
  const std::vector<std::uint8_t> bytes{0x23, 0x41, 0x56};
  const auto s = parse_wfdb_signal_212(bytes, 1, 2);
  EXPECT_EQ(s[0][0], 0x123);
  EXPECT_EQ(s[0][1], 0x456);
  // -1 and -2048 -> FF 8F 00
  const std::vector<std::uint8_t> neg{0xFF, 0x8F, 0x00};
  const auto n = parse_wfdb_signal_212(neg, 1, 2);
  EXPECT_EQ(n[0][0], -1);
  EXPECT_EQ(n[0][1], -2048);
}

TEST(Format212, InterleavesSignals) {
  std::vector<std::uint8_t> bytes;
  for (auto [a, b] : {std::pair{1, -1}, {2, -2}, {3, -3}}) {
    auto p = pack_pair(a, b);
    bytes.insert(bytes.end(), p.begin(), p.end());
  }
  const auto s = parse_wfdb_signal_212(bytes, 2, 3);
  EXPECT_EQ(s[0], (std::vector<int>{1, 2, 3}));
  EXPECT_EQ(s[1], (std::vector<int>{-1, -2, -3}));
}

TEST(Format212, EncoderMatchesIndependentPacker) {
  std::mt19937_64 rng(11);
  std::uniform_int_distribution<int> d(-2048, 2047);
  for (int trial = 0; trial < 200; ++trial) {
    const int a = d(rng), b = d(rng);
    EXPECT_EQ(encode_format_212({{a, b}}), pack_pair(a, b));
  }
}

TEST(Format212, RandomRoundTrip) {
  std::mt19937_64 rng(2024);
  std::uniform_int_distribution<int> value(-2048, 2047);
  std::uniform_int_distribution<int> n_signals(1, 3);
  std::uniform_int_distribution<int> n_samples(0, 257);
  for (int trial = 0; trial < 300; ++trial) {
    const int ns = n_signals(rng);
    const int n = n_samples(rng);
    std::vector<std::vector<int>> signals(static_cast<std::size_t>(ns), std::vector<int>(static_cast<std::size_t>(n)));
    for (auto& s : signals) {
      for (auto& v : s) v = value(rng);
    }
    // Extremes always included when there is room.
    if (n >= 2) {
      signals[0][0] = -2048;
      signals[0][1] = 2047;
    }
    const auto bytes = encode_format_212(signals);
    EXPECT_EQ(bytes.size(), (static_cast<std::size_t>(ns * n) * 3 + 1) / 2);
    EXPECT_EQ(parse_wfdb_signal_212(bytes, ns, n), signals) << "trial " << trial;
  }
}

TEST(Format212, TruncatedStreamNamesOffset) {
  const auto bytes = encode_format_212({{1, 2, 3, 4}});
  std::vector<std::uint8_t> cut(bytes.begin(), bytes.end() - 2);
  try {
    parse_wfdb_signal_212(cut, 1, 4);
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_NE(std::string(e.what()).find("byte offset 4"), std::string::npos) << e.what();
  }
}

TEST(Format212, RejectsOutOfRangeSamples) {
  EXPECT_THROW(encode_format_212({{2048}}), ShapeError);
  EXPECT_THROW(encode_format_212({{-2049}}), ShapeError);
}

TEST(Format16, LittleEndianSigned) {
  const std::vector<std::uint8_t> bytes{0x34, 0x12, 0xFF, 0xFF, 0x00, 0x80};
  const auto s = parse_wfdb_signal_16(bytes, 1, 3);
  EXPECT_EQ(s[0], (std::vector<int>{0x1234, -1, -32768}));
  EXPECT_THROW(parse_wfdb_signal_16(bytes, 1, 4), ParseError);
}

TEST(AdcConversion, BaselineAndGain) {
  EXPECT_DOUBLE_EQ(adc_to_mv(1224, 200.0, 1024), 1.0);
  EXPECT_DOUBLE_EQ(adc_to_mv(924, 200.0, 1024), -0.5);
  EXPECT_EQ(mv_to_adc(1.0, 200.0, 1024), 1224);
  std::mt19937_64 rng(5);
  std::uniform_int_distribution<int> d(-2048, 2047);
  for (int i = 0; i < 1000; ++i) {
    const int adc = d(rng);
    EXPECT_EQ(mv_to_adc(adc_to_mv(adc, 200.0, 1024), 200.0, 1024), adc);
  }
}

TEST(Annotations, CumulativeIndicesWithSkip) {
  std::vector<std::uint8_t> s;
  put_word(s, 1, 18);    // N at 18
  put_word(s, 59, 0);    // SKIP 100000 = 0x000186A0
  s.insert(s.end(), {0x01, 0x00, 0xA0, 0x86});
  put_word(s, 5, 5);     // V at 18 + 100000 + 5
  put_word(s, 1, 1023);  // N at 100023 + 1023
  put_word(s, 0, 0);
  const auto set = parse_wfdb_annotations(s);
  ASSERT_EQ(set.entries.size(), 3u);
  EXPECT_EQ(set.entries[0].sample, 18);
  EXPECT_EQ(set.entries[0].type_code, 1);
  EXPECT_EQ(set.entries[1].sample, 100023);
  EXPECT_EQ(set.entries[1].type_code, 5);
  EXPECT_EQ(set.entries[2].sample, 101046);
}

TEST(Annotations, NegativeSkip) {
  std::vector<std::uint8_t> s;
  put_word(s, 1, 500);
  put_word(s, 59, 0);  // SKIP -100 = 0xFFFFFF9C
  s.insert(s.end(), {0xFF, 0xFF, 0x9C, 0xFF});
  put_word(s, 1, 10);
  put_word(s, 0, 0);
  const auto set = parse_wfdb_annotations(s);
  ASSERT_EQ(set.entries.size(), 2u);
  EXPECT_EQ(set.entries[1].sample, 410);
}

TEST(Annotations, AuxAttachesToPrecedingEntryAndIsPadded) {
  std::vector<std::uint8_t> s;
  put_word(s, 28, 7);  // rhythm change
  put_word(s, 63, 3);
  s.insert(s.end(), {'(', 'N', 'X', 0x00});  // odd length padded
  put_word(s, 60, 2);  // NUM, SUB, CHN carry no time
  put_word(s, 61, 1);
  put_word(s, 62, 0);
  put_word(s, 1, 3);
  put_word(s, 0, 0);
  const auto set = parse_wfdb_annotations(s);
  ASSERT_EQ(set.entries.size(), 2u);
  EXPECT_EQ(set.entries[0].aux, "(NX");
  EXPECT_EQ(set.entries[0].sample, 7);
  EXPECT_EQ(set.entries[1].sample, 10);
}

TEST(Annotations, TruncatedStreams) {
  std::vector<std::uint8_t> s;
  put_word(s, 1, 18);
  EXPECT_THROW(parse_wfdb_annotations(s), ParseError);  // no terminator
  put_word(s, 59, 0);
  s.push_back(0x01);
  EXPECT_THROW(parse_wfdb_annotations(s), ParseError);
  std::vector<std::uint8_t> aux;
  put_word(aux, 1, 1);
  put_word(aux, 63, 10);
  aux.push_back('x');
  EXPECT_THROW(parse_wfdb_annotations(aux), ParseError);
}

TEST(Annotations, TextSidecarRoundTrip) {
  AnnotationSet set{{{10, 1, {}}, {300, 5, {}}, {612, 1, {}}}};
  EXPECT_EQ(parse_annotation_text(write_annotation_text(set)), set);
  EXPECT_THROW(parse_annotation_text("10,1\n5,1\n"), ParseError);
  EXPECT_THROW(parse_annotation_text("abc\n"), ParseError);
}

TEST(BeatCodes, WfdbQrsTable) {
  for (int c : {1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12, 13, 25, 30, 34, 35, 37, 38, 41}) EXPECT_TRUE(is_beat_code(c)) << c;
  for (int c : {0, 14, 16, 27, 28, 29, 32, 33, 36, 39, 40, 42, 59, 63}) EXPECT_FALSE(is_beat_code(c)) << c;
}

TEST(CsvRecord, RoundTripIsLossless) {
  std::mt19937_64 rng(99);
  std::normal_distribution<double> d(0.0, 1.0);
  for (int trial = 0; trial < 20; ++trial) {
    EcgRecord r;
    r.record_id = "rec" + std::to_string(trial);
    r.subject_id = "subj";
    r.sampling_frequency = trial % 2 ? 360.0 : 250.5;
    r.label_hint = trial % 3 == 0 ? Label::arrhythmia : Label::normal;
    r.leads.assign(1 + trial % 2, {});
    r.n_samples = 50 + static_cast<std::size_t>(trial);
    for (auto& lead : r.leads) {
      for (std::size_t k = 0; k < r.n_samples; ++k) lead.push_back(d(rng) * std::pow(10.0, trial % 7 - 3));
    }
    const auto back = parse_csv_record(write_csv_record(r));
    ASSERT_EQ(back.n_samples, r.n_samples);
    for (std::size_t l = 0; l < r.leads.size(); ++l) {
      for (std::size_t k = 0; k < r.n_samples; ++k) {
        const double a = r.leads[l][k], b = back.leads[l][k];
        EXPECT_LE(std::abs(a - b), 1e-9 * std::max(std::abs(a), 1e-300));
      }
    }
    EXPECT_EQ(back, r);  // shortest round-trip formatting is exact
  }
}

TEST(CsvRecord, MissingSamplingFrequency) {
  EXPECT_THROW(parse_csv_record("t,lead1\n0,1\n"), ParseError);
}

TEST(CsvRecord, RaggedRowNamesLine) {
  try {
    parse_csv_record("# fs=360\nt,lead1\n0,1\n0.1,2,3\n");
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_NE(std::string(e.what()).find("line 4"), std::string::npos) << e.what();
  }
}

TEST(CsvRecord, UnknownLabelRejected) {
  EXPECT_THROW(parse_csv_record("# fs=360\n# label=maybe\nt,lead1\n0,1\n"), ParseError);
}

TEST(Record, LeadOutOfRange) {
  EcgRecord r;
  r.sampling_frequency = 360;
  r.leads = {{1.0, 2.0}};
  r.n_samples = 2;
  EXPECT_THROW(r.lead(1), ShapeError);
}

TEST(LoadRecord, WfdbFromDisk) {
  const auto dir = temp_dir("wfdb");
  const std::vector<int> a{995, 1000, 1224, 824, 1024};
  const std::vector<int> b{1011, 1011, 1012, 1010, 1024};
  std::string h = "100 2 360 5\n100.dat 212 200 11 1024 995 0 0 MLII\n100.dat 212 200 11 1024 1011 0 0 V5\n";
  write_text_file(dir / "100.hea", h);
  auto bytes = encode_format_212({a, b});
  write_text_file(dir / "100.dat", std::string(bytes.begin(), bytes.end()));
  const auto r = load_record(dir / "100.hea");
  EXPECT_EQ(r.record_id, "100");
  ASSERT_EQ(r.leads.size(), 2u);
  EXPECT_EQ(r.n_samples, 5u);
  EXPECT_DOUBLE_EQ(r.leads[0][2], 1.0);
  EXPECT_DOUBLE_EQ(r.leads[0][3], -1.0);
  EXPECT_DOUBLE_EQ(r.leads[1][4], 0.0);
}

TEST(LoadRecord, CsvTakesStemAsId) {
  const auto dir = temp_dir("csv");
  write_text_file(dir / "abc.csv", "# fs=100\nt,lead1\n0,0.5\n0.01,0.25\n");
  const auto r = load_record(dir / "abc.csv");
  EXPECT_EQ(r.record_id, "abc");
  EXPECT_EQ(r.subject_id, "abc");
  EXPECT_EQ(r.n_samples, 2u);
}

TEST(LoadRecord, MissingFileIsIoError) {
  EXPECT_THROW(load_record("/nonexistent/definitely/missing.csv"), IoError);
}
