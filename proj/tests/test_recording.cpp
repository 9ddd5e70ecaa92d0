#include <fstream>
#include <sstream>

#include <gtest/gtest.h>

#include "demoforge/base64.hpp"
#include "demoforge/crc64.hpp"
#include "demoforge/recording.hpp"
#include "test_util.hpp"

using namespace demoforge;
using testutil::TempDir;
namespace fs = std::filesystem;

namespace {

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no demoforge::Error thrown";
  return ErrorCode::InvalidArgument;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

void spit(const fs::path& p, const std::string& s) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  out << s;
}

// Replaces line `lineno` (0 = header) of a text file.
void replace_line(const fs::path& p, std::size_t lineno, const std::string& line) {
  std::istringstream in(slurp(p));
  std::string l, out;
  for (std::size_t i = 0; std::getline(in, l); ++i) out += (i == lineno ? line : l) + "\n";
  spit(p, out);
}

}  // namespace

TEST(Checksum, Crc64XzCheckValue) {
  const std::string s = "123456789";
  EXPECT_EQ(crc64(std::as_bytes(std::span(s.data(), s.size()))), 0x995DC9BBDF1939FAull);
  Crc64 split;
  split.update(s.data(), 4);
  split.update(s.data() + 4, 5);
  EXPECT_EQ(split.value(), 0x995DC9BBDF1939FAull);
}

TEST(Text, DoubleRoundTripIsExact) {
  Rng rng(3);
  for (int i = 0; i < 1000; ++i) {
    const double v = rng.normal() * std::pow(10.0, rng.uniform(-12, 12));
    EXPECT_EQ(parse_double(format_double(v)).value(), v);
  }
  EXPECT_FALSE(parse_double("1.0x"));
  EXPECT_FALSE(parse_double(""));
  EXPECT_EQ(parse_double(" +2.5\r").value(), 2.5);
  EXPECT_EQ(split_csv_line("a,,b\r").size(), 3u);
}

TEST(Base64, RoundTrip) {
  for (std::size_t n : {0u, 1u, 2u, 3u, 4u, 100u}) {
    std::vector<std::uint8_t> v(n);
    for (std::size_t i = 0; i < n; ++i) v[i] = static_cast<std::uint8_t>(i * 37 + 5);
    EXPECT_EQ(base64_decode(base64_encode(v)), v);
  }
  const std::string hello = "hello";
  EXPECT_EQ(base64_encode({reinterpret_cast<const std::uint8_t*>(hello.data()), hello.size()}), "aGVsbG8=");
}

TEST(Errors, DataErrorClassification) {
  EXPECT_TRUE(is_data_error(ErrorCode::ChecksumMismatch));
  EXPECT_TRUE(is_data_error(ErrorCode::MalformedQuaternion));
  EXPECT_FALSE(is_data_error(ErrorCode::InvalidArgument));
  EXPECT_FALSE(is_data_error(ErrorCode::NonFiniteLoss));
  const Error e(ErrorCode::MissingShard, "x");
  EXPECT_EQ(std::string(e.what()), "MissingShard: x");
}

TEST(Image, BilinearHalvingAveragesBlocks) {
  Rng rng(4);
  ImageU8 src(8, 6, 3);
  for (auto& p : src.data) p = static_cast<std::uint8_t>(rng.below(256));
  const ImageU8 dst = resize_bilinear(src, 4, 3);
  for (int y = 0; y < 3; ++y) {
    for (int x = 0; x < 4; ++x) {
      for (int c = 0; c < 3; ++c) {
        const double mean = (src.at(2 * x, 2 * y, c) + src.at(2 * x + 1, 2 * y, c) + src.at(2 * x, 2 * y + 1, c) +
                             src.at(2 * x + 1, 2 * y + 1, c)) / 4.0;
        EXPECT_LE(std::abs(dst.at(x, y, c) - mean), 0.5 + 1e-9);
      }
    }
  }
  const ImageU8 flat(13, 7, 3, 77);
  for (auto p : resize_bilinear(flat, 256, 256).data) ASSERT_EQ(p, 77);
}

TEST(Image, DepthNearestConvertsAndKeepsInvalid) {
  DepthMm src(4, 2);
  for (int i = 0; i < 8; ++i) src.data[static_cast<std::size_t>(i)] = static_cast<std::uint16_t>(i * 250);
  const DepthMap dst = resize_depth_nearest(src, 8, 4);
  for (int y = 0; y < 4; ++y) {
    for (int x = 0; x < 8; ++x) EXPECT_FLOAT_EQ(dst.at(x, y), src.at(x / 2, y / 2) / 1000.0f);
  }
  EXPECT_EQ(dst.at(0, 0), 0.0f);
}

TEST(Image, PngRoundTrip) {
  TempDir tmp;
  Rng rng(5);
  ImageU8 img(33, 17, 3);
  for (auto& p : img.data) p = static_cast<std::uint8_t>(rng.below(256));
  write_png_rgb(tmp / "a.png", img);
  EXPECT_EQ(read_png_rgb(tmp / "a.png"), img);
  spit(tmp / "bad.png", "not a png");
  EXPECT_EQ(code_of([&] { read_png_rgb(tmp / "bad.png"); }), ErrorCode::CorruptImage);
}

TEST(Image, DepthRawSizeIsChecked) {
  TempDir tmp;
  DepthMm d(4, 3, 1234);
  d.at(1, 2) = 65535;
  write_depth_raw(tmp / "d.raw", d);
  EXPECT_EQ(fs::file_size(tmp / "d.raw"), 24u);
  const std::string bytes = slurp(tmp / "d.raw");
  EXPECT_EQ(static_cast<unsigned char>(bytes[0]), 1234 & 0xff);  // little-endian
  EXPECT_EQ(read_depth_raw(tmp / "d.raw", 4, 3).data, d.data);
  EXPECT_EQ(code_of([&] { read_depth_raw(tmp / "d.raw", 4, 4); }), ErrorCode::CorruptImage);
  EXPECT_EQ(code_of([&] { read_depth_raw(tmp / "d.raw", 3, 3); }), ErrorCode::CorruptImage);
}

TEST(Bundle, ParsesWhatWasWritten) {
  TempDir tmp;
  const auto dir = testutil::write_small_bundle(tmp / "b0", 10);
  const RecordingBundle b = parse_bundle(dir);
  EXPECT_EQ(b.id(), "b0");
  EXPECT_EQ(b.frame_count, 10u);
  EXPECT_EQ(b.meta, testutil::small_meta());
  EXPECT_EQ(b.annotations.size(), 10u);
  EXPECT_DOUBLE_EQ(b.pose_rows[3].ts, 0.1);
  EXPECT_DOUBLE_EQ(b.pose_rows[3].position.x(), 0.03);
}

TEST(Bundle, WriteParseIsIdempotent) {
  TempDir tmp;
  const auto b0 = parse_bundle(testutil::write_small_bundle(tmp / "orig", 6));
  save_bundle(b0, tmp / "copy1");
  const auto b1 = parse_bundle(tmp / "copy1");
  EXPECT_EQ(b1.meta, b0.meta);
  EXPECT_EQ(b1.pose_rows, b0.pose_rows);
  EXPECT_EQ(b1.annotations, b0.annotations);
  save_bundle(b1, tmp / "copy2");
  for (const char* f : {"meta.json", "poses.csv", "annotations.csv"}) {
    EXPECT_EQ(slurp(tmp / "copy1" / f), slurp(tmp / "copy2" / f)) << f;
    EXPECT_EQ(slurp(tmp / "orig" / f), slurp(tmp / "copy1" / f)) << f;
  }
}

TEST(Bundle, SlightlyOffUnitQuaternionIsRenormalized) {
  TempDir tmp;
  const auto dir = testutil::write_small_bundle(tmp / "b", 4);
  replace_line(dir / "poses.csv", 2, "0.0333,0,0,0.3,1.0005,0,0,0");
  const auto b = parse_bundle(dir);
  EXPECT_DOUBLE_EQ(b.pose_rows[1].q.w, 1.0);
}

TEST(Bundle, ErrorPaths) {
  TempDir tmp;
  auto fresh = [&](const std::string& name) { return testutil::write_small_bundle(tmp / name, 5); };

  EXPECT_EQ(code_of([&] { parse_bundle(tmp / "absent"); }), ErrorCode::MissingFile);

  auto d = fresh("no_meta");
  fs::remove(d / "meta.json");
  EXPECT_EQ(code_of([&] { parse_bundle(d); }), ErrorCode::MissingFile);

  d = fresh("no_depth_dir");
  fs::remove_all(d / "depth");
  EXPECT_EQ(code_of([&] { parse_bundle(d); }), ErrorCode::MissingFile);

  d = fresh("missing_frame");
  fs::remove(d / "rgb" / frame_file_name(2, "png"));
  EXPECT_EQ(code_of([&] { parse_bundle(d); }), ErrorCode::MissingFile);

  d = fresh("extra_frame");
  fs::copy_file(d / "depth" / frame_file_name(0, "raw"), d / "depth" / frame_file_name(9, "raw"));
  EXPECT_EQ(code_of([&] { parse_bundle(d); }), ErrorCode::CountMismatch);

  d = fresh("bad_quat");
  replace_line(d / "poses.csv", 3, "0.0666,0,0,0.3,1.01,0,0,0");
  EXPECT_EQ(code_of([&] { parse_bundle(d); }), ErrorCode::MalformedQuaternion);

  d = fresh("nonmono");
  replace_line(d / "poses.csv", 3, "0.01,0,0,0.3,1,0,0,0");
  EXPECT_EQ(code_of([&] { parse_bundle(d); }), ErrorCode::NonMonotonicTimestamps);

  d = fresh("dup_ts");
  replace_line(d / "poses.csv", 2, "0,0,0,0.3,1,0,0,0");
  EXPECT_EQ(code_of([&] { parse_bundle(d); }), ErrorCode::NonMonotonicTimestamps);

  d = fresh("bad_json");
  spit(d / "meta.json", "{ not json");
  EXPECT_EQ(code_of([&] { parse_bundle(d); }), ErrorCode::MalformedMeta);

  d = fresh("missing_key");
  auto j = meta_to_json(testutil::small_meta());
  j.erase("nominal_fps");
  spit(d / "meta.json", j.dump());
  EXPECT_EQ(code_of([&] { parse_bundle(d); }), ErrorCode::MalformedMeta);

  d = fresh("bad_header");
  replace_line(d / "poses.csv", 0, "t,x,y,z,qw,qx,qy,qz");
  EXPECT_EQ(code_of([&] { parse_bundle(d); }), ErrorCode::MalformedMeta);
}

TEST(Decode, FramesHaveModelResolution) {
  TempDir tmp;
  const auto b = parse_bundle(testutil::write_small_bundle(tmp / "b", 3));
  const FrameRecord f = decode_frame(b, 1);
  EXPECT_EQ(f.rgb.width, kFrameSize);
  EXPECT_EQ(f.rgb.height, kFrameSize);
  EXPECT_EQ(f.rgb.channels, 3);
  EXPECT_EQ(f.depth.width, kFrameSize);
  EXPECT_EQ(f.depth.height, kFrameSize);
  EXPECT_EQ(f.index, 1u);
  EXPECT_DOUBLE_EQ(f.timestamp, b.pose_rows[1].ts);

  const DepthMm raw = read_depth_raw(b.depth_path(1), b.meta.depth_width, b.meta.depth_height);
  const DepthMap expect = resize_depth_nearest(raw, kFrameSize, kFrameSize);
  EXPECT_EQ(f.depth, expect);
  for (float v : f.depth.data) {
    ASSERT_GE(v, 0.0f);
    ASSERT_LT(v, 3.0f);
  }
  EXPECT_EQ(code_of([&] { decode_frame(b, 3); }), ErrorCode::IndexOutOfRange);
}

TEST(Decode, DimensionMismatchIsCorrupt) {
  TempDir tmp;
  const auto dir = testutil::write_small_bundle(tmp / "b", 3);
  write_png_rgb(dir / "rgb" / frame_file_name(0, "png"), ImageU8(10, 10, 3));
  const auto b = parse_bundle(dir);
  EXPECT_EQ(code_of([&] { decode_frame(b, 0); }), ErrorCode::CorruptImage);
  spit(dir / "depth" / frame_file_name(1, "raw"), "abc");
  EXPECT_EQ(code_of([&] { decode_frame(b, 1); }), ErrorCode::CorruptImage);
}

TEST(QC, PassingBundle) {
  TempDir tmp;
  const auto b = parse_bundle(testutil::write_small_bundle(tmp / "b", 70));  // 2.33 s
  const auto r = validate_bundle(b);
  EXPECT_TRUE(r.passed());
  EXPECT_TRUE(r.offending_frames.empty());
  EXPECT_EQ(qc_to_json(r).at("verdict"), "pass");
}

TEST(QC, ShortBundleFailsLength) {
  TempDir tmp;
  const auto b = parse_bundle(testutil::write_small_bundle(tmp / "b", 30));
  EXPECT_EQ(validate_bundle(b).failed_checks(), std::vector<std::string>{"length"});
}

TEST(QC, WrongRateFailsFps) {
  TempDir tmp;
  const auto b = parse_bundle(testutil::write_small_bundle(tmp / "b", 70, 1, testutil::small_meta(), 15.0));
  const auto r = validate_bundle(b);
  EXPECT_EQ(r.failed_checks(), std::vector<std::string>{"fps"});
  EXPECT_EQ(r.offending_frames.size(), 69u);
}

TEST(QC, PortraitFailsOrientation) {
  TempDir tmp;
  auto meta = testutil::small_meta();
  std::swap(meta.rgb_width, meta.rgb_height);
  const auto b = parse_bundle(testutil::write_small_bundle(tmp / "b", 70, 1, meta));
  EXPECT_EQ(validate_bundle(b).failed_checks(), std::vector<std::string>{"orientation"});
}

TEST(QC, DroppedFrameIsReported) {
  TempDir tmp;
  auto b = parse_bundle(testutil::write_small_bundle(tmp / "b", 70));
  for (std::size_t i = 40; i < b.pose_rows.size(); ++i) b.pose_rows[i].ts += 1.0 / 30.0;
  const auto r = validate_bundle(b);
  EXPECT_TRUE(r.passed());
  EXPECT_EQ(r.offending_frames, std::vector<std::size_t>{40});
}
