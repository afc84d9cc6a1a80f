#include <filesystem>
#include <random>

#include <gtest/gtest.h>

#include "objguide/io.hpp"

namespace og = objguide;
namespace io = objguide::io;
using og::Vec2;

namespace {

// Runs `fn` and returns the diagnostic of the kParse error it throws.
template <typename Fn>
std::string parse_error(Fn&& fn) {
  try {
    fn();
  } catch (const og::Error& e) {
    EXPECT_EQ(e.code(), og::ErrorCode::kParse);
    return e.what();
  }
  ADD_FAILURE() << "no error thrown";
  return {};
}

og::Homography sample_h() {
  og::Mat3 m;
  m << 0.1, -2.5e-3, 300.125, 1.0 / 3.0, 0.9, -7, 1e-5, 2e-4, 1;
  return og::Homography(m);
}

}  // namespace

TEST(FormatReal, ShortestRoundTrip) {
  EXPECT_EQ(io::format_real(0.1), "0.1");
  EXPECT_EQ(io::format_real(2.0), "2");
  EXPECT_EQ(io::format_real(-0.0), "-0");
  EXPECT_EQ(io::format_real(1e300), "1e+300");
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-1e6, 1e6);
  for (int k = 0; k < 1000; ++k) {
    const double v = u(rng) / 7.0;
    EXPECT_EQ(std::stod(io::format_real(v)), v);
  }
}

TEST(Io, BoxesExample) {
  const auto b = io::read_boxes("10 20 110 220 0.9\n\n  5 5 6 7 1\n");
  ASSERT_EQ(b.size(), 2u);
  EXPECT_EQ(b[0], og::DetBox::make(10, 20, 110, 220, 0.9));
  EXPECT_EQ(io::write_boxes(b), "10 20 110 220 0.9\n5 5 6 7 1\n");
}

TEST(Io, RoundTrips) {
  const std::vector<og::LineSegment> segs = {og::LineSegment(Vec2(0.5, 1), Vec2(3, 4.25))};
  EXPECT_EQ(io::read_segments(io::write_segments(segs)), segs);

  const std::vector<og::TaggedQuad> quads = {
      {og::QuadBox(og::DetBox::make(1, 2, 30, 40, 0.5)), og::FrameTag{}},
      {og::QuadBox({Vec2(0, 0), Vec2(10, 1), Vec2(11, 12), Vec2(-1, 9)}, 0.25), og::FrameTag{2}}};
  const std::string qt = io::write_quads(quads);
  EXPECT_NE(qt.find("rect:2"), std::string::npos);
  EXPECT_NE(qt.find("original"), std::string::npos);
  EXPECT_EQ(io::read_quads(qt), quads);

  std::vector<og::Feature> feats;
  for (int k = 0; k < 3; ++k) {
    og::Descriptor d(4);
    d << k, 0.5, -0.25, 1.0 / 3.0;
    feats.push_back({k, Vec2(k * 1.5, 2), d});
  }
  const std::string ft = io::write_features(feats, 4);
  EXPECT_EQ(ft.substr(0, 4), "D 4\n");
  EXPECT_EQ(io::read_features(ft), feats);
  EXPECT_EQ(io::read_features(io::write_features({}, 8)).size(), 0u);

  const std::vector<og::Match> matches = {{0, 5, 0.75, 1}, {3, 2, -0.5, -1}};
  EXPECT_EQ(io::read_matches(io::write_matches(matches)), matches);

  const std::vector<io::GroupRecord> groups = {{0, sample_h(), {{1, 2}, {3, 4}}},
                                               {1, og::Homography::identity(), {}}};
  EXPECT_EQ(io::read_groups(io::write_groups(groups)), groups);

  const std::vector<io::PlaneHomography> hs = {{0, sample_h()}, {3, og::Homography::identity()}};
  EXPECT_EQ(io::read_plane_homographies(io::write_plane_homographies(hs)), hs);

  const std::vector<og::VanishingPoint> vps = {
      {og::HomPoint(0, 1, 0), {1, 4, 9}, og::Orientation::kVertical},
      {og::HomPoint(-3000.5, 400, 1), {}, og::Orientation::kHorizontal},
      {og::HomPoint(1, 2, 3), {0}, og::Orientation::kUnknown}};
  EXPECT_EQ(io::read_vps(io::write_vps(vps)), vps);

  const std::vector<og::ColumnInterval> cols = {{0, 480, 1}, {480, 1000, 0}};
  EXPECT_EQ(io::read_columns(io::write_columns(cols)), cols);

  const std::vector<og::BoxPair> pairs = {{0, 3}, {2, 1}};
  EXPECT_EQ(io::read_box_pairs(io::write_box_pairs(pairs)), pairs);

  const std::vector<io::FeatureTruthRecord> truth = {{0, 4, Vec2(1.5, 2)}, {-1, -1, std::nullopt}};
  EXPECT_EQ(io::read_feature_truth(io::write_feature_truth(truth)), truth);

  EXPECT_EQ(io::read_image_size(io::write_image_size({1920, 1080})), (og::ImageSize{1920, 1080}));
}

TEST(Io, GroupConversion) {
  og::ObjectGroup g{og::Homography::identity(), sample_h(), {{0, 1}, {2, 3}}, true};
  const auto recs = io::group_records(std::vector<og::ObjectGroup>{g});
  ASSERT_EQ(recs.size(), 1u);
  EXPECT_EQ(recs[0].group_id, 0);
  EXPECT_EQ(recs[0].h, sample_h());
  const auto back = io::to_groups(recs);
  EXPECT_EQ(back[0].hypothesis, sample_h());
  EXPECT_FALSE(back[0].refined);
}

TEST(Io, ParseErrorsCarrySourceAndLine) {
  EXPECT_EQ(parse_error([] { io::read_boxes("1 2 3 4 1\n1 2 3\n"); }),
            "boxes.txt:2: expected 5 fields, got 3");
  EXPECT_EQ(parse_error([] { io::read_boxes("1 2 x 4 1\n", "v/boxes.txt"); }),
            "v/boxes.txt:1: bad number 'x'");
  EXPECT_NE(parse_error([] { io::read_boxes("\n\n5 5 1 1 1\n"); }).find("boxes.txt:3:"),
            std::string::npos);
  EXPECT_NE(parse_error([] { io::read_boxes("1 2 3 4 nan\n"); }).find(":1:"), std::string::npos);
  EXPECT_NE(parse_error([] { io::read_segments("1 1 1 1\n"); }).find("zero-length"),
            std::string::npos);
  EXPECT_NE(parse_error([] { io::read_features("1 2 3\n"); }).find("features.txt:1:"),
            std::string::npos);
  EXPECT_NE(parse_error([] { io::read_features("D 2\n1 2 3\n"); }).find("features.txt:2:"),
            std::string::npos);
  EXPECT_NE(parse_error([] { io::read_quads("0 0 10 0 10 10 0 10 1 rect\n"); }).find("frame tag"),
            std::string::npos);
  EXPECT_NE(parse_error([] { io::read_quads("0 0 0 10 10 10 10 0 1 original\n"); }).find("convex"),
            std::string::npos);
  EXPECT_NE(parse_error([] { io::read_vps("0 0 0 vertical 0\n"); }).find("zero"),
            std::string::npos);
  EXPECT_NE(parse_error([] { io::read_vps("1 0 0 sideways 0\n"); }).find("orientation"),
            std::string::npos);
  EXPECT_NE(parse_error([] { io::read_groups("0 1 0 0 0 1 0 0 0 1 2\n0 0\n"); }).find("more pairs"),
            std::string::npos);
  EXPECT_NE(parse_error([] { io::read_matches("0 -1 0.5 0\n"); }).find("range"), std::string::npos);
  EXPECT_NE(parse_error([] { io::read_columns("10 5 0\n"); }).find("hi < lo"), std::string::npos);
  EXPECT_NE(parse_error([] { io::read_image_size("10 5\r\n"); }).find("non-printable"),
            std::string::npos);
  EXPECT_EQ(parse_error([] { io::read_quads("0 0 10 0 10 10 0 10 1 rect:x\n"); }),
            "quads.txt:1: bad integer 'x'");
  EXPECT_NE(parse_error([] { io::read_image_size(""); }).find("image.txt:1:"), std::string::npos);
}

TEST(Io, ImageDirRoundTripAndMissingFile) {
  const auto dir = std::filesystem::temp_directory_path() / "objguide_test_io";
  std::filesystem::remove_all(dir);
  og::ImageInputs in;
  in.size = {640, 480};
  in.segments = {og::LineSegment(Vec2(1, 2), Vec2(30, 4))};
  in.boxes = {og::DetBox::make(10, 10, 50, 80, 0.75)};
  in.quads = {{og::QuadBox(og::DetBox::make(3, 3, 9, 9, 0.5)), og::FrameTag{0}}};
  og::Descriptor d(2);
  d << 0.6, 0.8;
  in.features = {{0, Vec2(12, 15), d}};
  io::write_image_dir(dir, in);
  const auto out = io::read_image_dir(dir);
  EXPECT_EQ(out.size, in.size);
  EXPECT_EQ(out.segments, in.segments);
  EXPECT_EQ(out.boxes, in.boxes);
  EXPECT_EQ(out.quads, in.quads);
  EXPECT_EQ(out.features, in.features);

  std::filesystem::remove(dir / "quads.txt");
  EXPECT_TRUE(io::read_image_dir(dir).quads.empty());
  std::filesystem::remove(dir / "features.txt");
  EXPECT_NE(parse_error([&] { io::read_image_dir(dir); }).find("features.txt"), std::string::npos);
  std::filesystem::remove_all(dir);
}
