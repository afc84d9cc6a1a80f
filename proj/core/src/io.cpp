#include "objguide/io.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <system_error>

namespace objguide::io {

namespace {

// Non-empty lines of a text, with 1-based line numbers, split into tokens.
struct Record {
  std::size_t line = 0;
  std::vector<std::string_view> tokens;
};

class Reader {
 public:
  Reader(std::string_view text, std::string_view source) : source_(source) {
    std::size_t line = 0;
    std::size_t pos = 0;
    while (pos < text.size()) {
      const std::size_t end = std::min(text.find('\n', pos), text.size());
      ++line;
      Record r{line, split(text.substr(pos, end - pos), line)};
      if (!r.tokens.empty()) records_.push_back(std::move(r));
      pos = end + 1;
    }
  }

  const std::vector<Record>& records() const { return records_; }

  [[noreturn]] void fail(std::size_t line, std::string_view msg) const {
    std::ostringstream os;
    os << source_ << ':' << line << ": " << msg;
    throw Error(ErrorCode::kParse, os.str());
  }

  void expect_count(const Record& r, std::size_t n) const {
    if (r.tokens.size() != n) {
      fail(r.line, "expected " + std::to_string(n) + " fields, got " +
                       std::to_string(r.tokens.size()));
    }
  }

  double real(const Record& r, std::size_t k) const {
    const std::string_view t = r.tokens[k];
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
    if (ec != std::errc() || ptr != t.data() + t.size() || !std::isfinite(v)) {
      fail(r.line, "bad number '" + std::string(t) + "'");
    }
    return v;
  }

  long long integer(const Record& r, std::size_t k) const {
    const std::string_view t = r.tokens[k];
    long long v = 0;
    const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
    if (ec != std::errc() || ptr != t.data() + t.size()) {
      fail(r.line, "bad integer '" + std::string(t) + "'");
    }
    return v;
  }

  int int32(const Record& r, std::size_t k, long long lo) const {
    const long long v = integer(r, k);
    if (v < lo || v > std::numeric_limits<int>::max()) {
      fail(r.line, "integer out of range '" + std::string(r.tokens[k]) + "'");
    }
    return static_cast<int>(v);
  }

  std::size_t index(const Record& r, std::size_t k) const {
    return static_cast<std::size_t>(int32(r, k, 0));
  }

  Mat3 matrix(const Record& r, std::size_t first) const {
    Mat3 m;
    for (int e = 0; e < 9; ++e) m(e / 3, e % 3) = real(r, first + static_cast<std::size_t>(e));
    return m;
  }

  Homography homography(const Record& r, std::size_t first) const {
    try {
      return Homography(matrix(r, first));
    } catch (const Error& e) {
      if (e.code() == ErrorCode::kParse) throw;
      fail(r.line, std::string("invalid homography: ") + e.what());
    }
  }

 private:
  std::vector<std::string_view> split(std::string_view s, std::size_t line) const {
    std::vector<std::string_view> out;
    std::size_t i = 0;
    while (i < s.size()) {
      if (s[i] == ' ' || s[i] == '\t') {
        ++i;
        continue;
      }
      const std::size_t start = i;
      for (; i < s.size() && s[i] != ' ' && s[i] != '\t'; ++i) {
        const auto c = static_cast<unsigned char>(s[i]);
        if (c < 0x20 || c > 0x7e) fail(line, "non-printable or non-ASCII character");
      }
      out.push_back(s.substr(start, i - start));
    }
    return out;
  }

  std::string source_;
  std::vector<Record> records_;
};

class Writer {
 public:
  Writer& real(double v) {
    sep();
    out_ += format_real(v);
    return *this;
  }
  Writer& integer(long long v) {
    sep();
    out_ += std::to_string(v);
    return *this;
  }
  Writer& word(std::string_view w) {
    sep();
    out_ += w;
    return *this;
  }
  Writer& matrix(const Mat3& m) {
    for (int e = 0; e < 9; ++e) real(m(e / 3, e % 3));
    return *this;
  }
  Writer& end() {
    out_ += '\n';
    fresh_ = true;
    return *this;
  }
  std::string str() && { return std::move(out_); }

 private:
  void sep() {
    if (!fresh_) out_ += ' ';
    fresh_ = false;
  }

  std::string out_;
  bool fresh_ = true;
};

std::string frame_tag(const FrameTag& f) {
  return f.rect_plane ? "rect:" + std::to_string(*f.rect_plane) : "original";
}

Orientation parse_orientation(const Reader& rd, const Record& r, std::string_view t) {
  if (t == "vertical") return Orientation::kVertical;
  if (t == "horizontal") return Orientation::kHorizontal;
  if (t == "unknown") return Orientation::kUnknown;
  rd.fail(r.line, "bad orientation '" + std::string(t) + "'");
}

}  // namespace

std::string format_real(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  if (ec != std::errc()) throw Error(ErrorCode::kParse, "format_real: conversion failed");
  return std::string(buf, ptr);
}

std::vector<GroupRecord> group_records(std::span<const ObjectGroup> groups) {
  std::vector<GroupRecord> out;
  out.reserve(groups.size());
  for (std::size_t g = 0; g < groups.size(); ++g) {
    out.push_back({static_cast<int>(g), groups[g].h, groups[g].pairs});
  }
  return out;
}

std::vector<ObjectGroup> to_groups(std::span<const GroupRecord> records) {
  std::vector<ObjectGroup> out;
  out.reserve(records.size());
  for (const auto& r : records) out.push_back({r.h, r.h, r.pairs, false});
  return out;
}

std::string write_image_size(const ImageSize& size) {
  Writer w;
  w.integer(size.width).integer(size.height).end();
  return std::move(w).str();
}

ImageSize read_image_size(std::string_view text, std::string_view source) {
  const Reader rd(text, source);
  if (rd.records().size() != 1) rd.fail(rd.records().empty() ? 1 : rd.records()[1].line,
                                         "expected exactly one line 'W H'");
  const Record& r = rd.records().front();
  rd.expect_count(r, 2);
  ImageSize s{rd.int32(r, 0, 1), rd.int32(r, 1, 1)};
  return s;
}

std::string write_segments(std::span<const LineSegment> segments) {
  Writer w;
  for (const auto& s : segments) w.real(s.p.x()).real(s.p.y()).real(s.q.x()).real(s.q.y()).end();
  return std::move(w).str();
}

std::vector<LineSegment> read_segments(std::string_view text, std::string_view source) {
  const Reader rd(text, source);
  std::vector<LineSegment> out;
  out.reserve(rd.records().size());
  for (const auto& r : rd.records()) {
    rd.expect_count(r, 4);
    const Vec2 p(rd.real(r, 0), rd.real(r, 1));
    const Vec2 q(rd.real(r, 2), rd.real(r, 3));
    if (p == q) rd.fail(r.line, "zero-length segment");
    out.emplace_back(p, q);
  }
  return out;
}

std::string write_boxes(std::span<const DetBox> boxes) {
  Writer w;
  for (const auto& b : boxes) w.real(b.xmin).real(b.ymin).real(b.xmax).real(b.ymax).real(b.score).end();
  return std::move(w).str();
}

std::vector<DetBox> read_boxes(std::string_view text, std::string_view source) {
  const Reader rd(text, source);
  std::vector<DetBox> out;
  out.reserve(rd.records().size());
  for (const auto& r : rd.records()) {
    rd.expect_count(r, 5);
    const DetBox b{rd.real(r, 0), rd.real(r, 1), rd.real(r, 2), rd.real(r, 3), rd.real(r, 4)};
    if (!(b.xmin < b.xmax && b.ymin < b.ymax)) rd.fail(r.line, "empty box");
    out.push_back(b);
  }
  return out;
}

std::string write_quads(std::span<const TaggedQuad> quads) {
  Writer w;
  for (const auto& tq : quads) {
    for (const auto& c : tq.quad.corners()) w.real(c.x()).real(c.y());
    w.real(tq.quad.score()).word(frame_tag(tq.frame)).end();
  }
  return std::move(w).str();
}

std::string write_quads(std::span<const QuadBox> quads) {
  std::vector<TaggedQuad> tagged;
  tagged.reserve(quads.size());
  for (const auto& q : quads) tagged.push_back({q, {}});
  return write_quads(tagged);
}

std::vector<TaggedQuad> read_quads(std::string_view text, std::string_view source) {
  const Reader rd(text, source);
  std::vector<TaggedQuad> out;
  out.reserve(rd.records().size());
  for (const auto& r : rd.records()) {
    rd.expect_count(r, 10);
    QuadBox::Corners c;
    for (std::size_t k = 0; k < 4; ++k) c[k] = Vec2(rd.real(r, 2 * k), rd.real(r, 2 * k + 1));
    const auto q = QuadBox::try_make(c, rd.real(r, 8));
    if (!q) rd.fail(r.line, "corners are not a convex quad in TL, TR, BR, BL order");
    FrameTag tag;
    const std::string_view t = r.tokens[9];
    if (t.starts_with("rect:")) {
      Record sub{r.line, {t.substr(5)}};
      tag.rect_plane = rd.int32(sub, 0, 0);
    } else if (t != "original") {
      rd.fail(r.line, "bad frame tag '" + std::string(t) + "'");
    }
    out.push_back({*q, tag});
  }
  return out;
}

std::string write_features(std::span<const Feature> features, int dim) {
  Writer w;
  w.word("D").integer(dim).end();
  for (std::size_t n = 0; n < features.size(); ++n) {
    const Feature& f = features[n];
    if (f.id != static_cast<int>(n)) {
      throw Error(ErrorCode::kParse, "write_features: feature ids must equal record order");
    }
    if (f.desc.size() != dim) {
      throw Error(ErrorCode::kDimensionMismatch, "write_features: descriptor dimension differs");
    }
    w.real(f.pos.x()).real(f.pos.y());
    for (Eigen::Index c = 0; c < f.desc.size(); ++c) w.real(f.desc(c));
    w.end();
  }
  return std::move(w).str();
}

std::vector<Feature> read_features(std::string_view text, std::string_view source) {
  const Reader rd(text, source);
  if (rd.records().empty()) rd.fail(1, "missing header 'D <dim>'");
  const Record& head = rd.records().front();
  if (head.tokens.size() != 2 || head.tokens[0] != "D") rd.fail(head.line, "expected header 'D <dim>'");
  const int dim = rd.int32(head, 1, 0);
  std::vector<Feature> out;
  out.reserve(rd.records().size() - 1);
  for (std::size_t n = 1; n < rd.records().size(); ++n) {
    const Record& r = rd.records()[n];
    rd.expect_count(r, 2 + static_cast<std::size_t>(dim));
    Feature f;
    f.id = static_cast<int>(n - 1);
    f.pos = Vec2(rd.real(r, 0), rd.real(r, 1));
    f.desc.resize(dim);
    for (int c = 0; c < dim; ++c) f.desc(c) = rd.real(r, 2 + static_cast<std::size_t>(c));
    out.push_back(std::move(f));
  }
  return out;
}

std::string write_matches(std::span<const Match> matches) {
  Writer w;
  for (const auto& m : matches) w.integer(m.i).integer(m.j).real(m.sim).integer(m.group_id).end();
  return std::move(w).str();
}

std::vector<Match> read_matches(std::string_view text, std::string_view source) {
  const Reader rd(text, source);
  std::vector<Match> out;
  out.reserve(rd.records().size());
  for (const auto& r : rd.records()) {
    rd.expect_count(r, 4);
    out.push_back({rd.int32(r, 0, 0), rd.int32(r, 1, 0), rd.real(r, 2), rd.int32(r, 3, -1)});
  }
  return out;
}

std::string write_groups(std::span<const GroupRecord> groups) {
  Writer w;
  for (const auto& g : groups) {
    w.integer(g.group_id).matrix(g.h.matrix()).integer(static_cast<long long>(g.pairs.size())).end();
    for (const auto& p : g.pairs) {
      w.integer(static_cast<long long>(p.i)).integer(static_cast<long long>(p.j)).end();
    }
  }
  return std::move(w).str();
}

std::vector<GroupRecord> read_groups(std::string_view text, std::string_view source) {
  const Reader rd(text, source);
  const auto& recs = rd.records();
  std::vector<GroupRecord> out;
  std::size_t n = 0;
  while (n < recs.size()) {
    const Record& r = recs[n++];
    rd.expect_count(r, 11);
    GroupRecord g{rd.int32(r, 0, 0), rd.homography(r, 1), {}};
    const std::size_t npairs = rd.index(r, 10);
    for (std::size_t k = 0; k < npairs; ++k) {
      if (n >= recs.size()) rd.fail(r.line, "group declares more pairs than follow");
      const Record& pr = recs[n++];
      rd.expect_count(pr, 2);
      g.pairs.push_back({rd.index(pr, 0), rd.index(pr, 1)});
    }
    out.push_back(std::move(g));
  }
  return out;
}

std::string write_plane_homographies(std::span<const PlaneHomography> hs) {
  Writer w;
  for (const auto& p : hs) w.integer(p.plane_id).matrix(p.h.matrix()).end();
  return std::move(w).str();
}

std::vector<PlaneHomography> read_plane_homographies(std::string_view text,
                                                     std::string_view source) {
  const Reader rd(text, source);
  std::vector<PlaneHomography> out;
  for (const auto& r : rd.records()) {
    rd.expect_count(r, 10);
    out.push_back({rd.int32(r, 0, 0), rd.homography(r, 1)});
  }
  return out;
}

std::string write_vps(std::span<const VanishingPoint> vps) {
  Writer w;
  for (const auto& v : vps) {
    const Vec3& h = v.point.vec();
    w.real(h.x()).real(h.y()).real(h.z()).word(to_string(v.orientation));
    w.integer(static_cast<long long>(v.inliers.size()));
    for (auto id : v.inliers) w.integer(static_cast<long long>(id));
    w.end();
  }
  return std::move(w).str();
}

std::vector<VanishingPoint> read_vps(std::string_view text, std::string_view source) {
  const Reader rd(text, source);
  std::vector<VanishingPoint> out;
  for (const auto& r : rd.records()) {
    if (r.tokens.size() < 5) rd.expect_count(r, 5);
    const Vec3 h(rd.real(r, 0), rd.real(r, 1), rd.real(r, 2));
    if (!(h.squaredNorm() > 0.0)) rd.fail(r.line, "zero vanishing point");
    VanishingPoint v;
    v.point = HomPoint(h);
    v.orientation = parse_orientation(rd, r, r.tokens[3]);
    const std::size_t n = rd.index(r, 4);
    rd.expect_count(r, 5 + n);
    for (std::size_t k = 0; k < n; ++k) v.inliers.push_back(rd.index(r, 5 + k));
    out.push_back(std::move(v));
  }
  return out;
}

std::string write_columns(std::span<const ColumnInterval> columns) {
  Writer w;
  for (const auto& c : columns) w.integer(c.lo).integer(c.hi).integer(c.plane_id).end();
  return std::move(w).str();
}

std::vector<ColumnInterval> read_columns(std::string_view text, std::string_view source) {
  const Reader rd(text, source);
  std::vector<ColumnInterval> out;
  for (const auto& r : rd.records()) {
    rd.expect_count(r, 3);
    const ColumnInterval c{rd.int32(r, 0, 0), rd.int32(r, 1, 0), rd.int32(r, 2, 0)};
    if (c.hi < c.lo) rd.fail(r.line, "interval with hi < lo");
    out.push_back(c);
  }
  return out;
}

std::string write_box_pairs(std::span<const BoxPair> pairs) {
  Writer w;
  for (const auto& p : pairs) {
    w.integer(static_cast<long long>(p.i)).integer(static_cast<long long>(p.j)).end();
  }
  return std::move(w).str();
}

std::vector<BoxPair> read_box_pairs(std::string_view text, std::string_view source) {
  const Reader rd(text, source);
  std::vector<BoxPair> out;
  for (const auto& r : rd.records()) {
    rd.expect_count(r, 2);
    out.push_back({rd.index(r, 0), rd.index(r, 1)});
  }
  return out;
}

std::string write_feature_truth(std::span<const FeatureTruthRecord> truth) {
  Writer w;
  for (const auto& t : truth) {
    w.integer(t.plane).integer(t.counterpart);
    if (t.position2) w.real(t.position2->x()).real(t.position2->y());
    w.end();
  }
  return std::move(w).str();
}

std::vector<FeatureTruthRecord> read_feature_truth(std::string_view text,
                                                   std::string_view source) {
  const Reader rd(text, source);
  std::vector<FeatureTruthRecord> out;
  for (const auto& r : rd.records()) {
    if (r.tokens.size() != 2) rd.expect_count(r, 4);
    FeatureTruthRecord t{rd.int32(r, 0, -1), rd.int32(r, 1, -1), std::nullopt};
    if (r.tokens.size() == 4) t.position2 = Vec2(rd.real(r, 2), rd.real(r, 3));
    out.push_back(t);
  }
  return out;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kParse, path.string() + ":0: cannot open file");
  std::ostringstream os;
  os << in.rdbuf();
  if (in.bad()) throw Error(ErrorCode::kParse, path.string() + ":0: read error");
  return os.str();
}

void write_file(const std::filesystem::path& path, std::string_view content) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
  if (!out) throw std::runtime_error("cannot write " + path.string());
}

ImageInputs read_image_dir(const std::filesystem::path& dir) {
  const auto load = [&](const char* name) { return read_file(dir / name); };
  const auto src = [&](const char* name) { return (dir / name).string(); };
  ImageInputs in;
  in.size = read_image_size(load("image.txt"), src("image.txt"));
  in.segments = read_segments(load("segments.txt"), src("segments.txt"));
  in.boxes = read_boxes(load("boxes.txt"), src("boxes.txt"));
  if (std::filesystem::exists(dir / "quads.txt")) {
    in.quads = read_quads(load("quads.txt"), src("quads.txt"));
  }
  in.features = read_features(load("features.txt"), src("features.txt"));
  return in;
}

void write_image_dir(const std::filesystem::path& dir, const ImageInputs& in) {
  const int dim = in.features.empty() ? 0 : static_cast<int>(in.features.front().desc.size());
  write_file(dir / "image.txt", write_image_size(in.size));
  write_file(dir / "segments.txt", write_segments(in.segments));
  write_file(dir / "boxes.txt", write_boxes(in.boxes));
  write_file(dir / "quads.txt", write_quads(in.quads));
  write_file(dir / "features.txt", write_features(in.features, dim));
}

}  // namespace objguide::io
