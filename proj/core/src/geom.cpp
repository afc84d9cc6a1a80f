#include "objguide/geom.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include <Eigen/Dense>
#include <Eigen/SVD>

namespace objguide {

const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kDegenerateInput: return "degenerate input";
    case ErrorCode::kEstimation: return "estimation error";
    case ErrorCode::kMissingVertical: return "missing vertical vanishing point";
    case ErrorCode::kMissingHorizontal: return "missing horizontal vanishing point";
    case ErrorCode::kAdjustmentFailed: return "box adjustment failed";
    case ErrorCode::kRectifierDegenerate: return "degenerate rectifier";
    case ErrorCode::kBackprojection: return "backprojection error";
    case ErrorCode::kNoDescriptor: return "no descriptor";
    case ErrorCode::kGeneration: return "scene generation error";
    case ErrorCode::kParse: return "parse error";
    case ErrorCode::kDimensionMismatch: return "dimension mismatch";
  }
  return "unknown error";
}

bool is_at_infinity(const Vec3& h) {
  return std::abs(h.z()) < 1e-9 * h.head<2>().norm();
}

HomPoint::HomPoint(const Vec3& h) : h_(h) {
  if (!(h.squaredNorm() > 0.0) || !h.allFinite()) {
    throw Error(ErrorCode::kDegenerateInput, "homogeneous point is the zero vector");
  }
}

std::optional<Vec2> HomPoint::pixel() const {
  if (at_infinity()) return std::nullopt;
  return Vec2(h_.x() / h_.z(), h_.y() / h_.z());
}

HomLine::HomLine(const Vec3& l) : l_(l) {
  if (!(l.squaredNorm() > 0.0) || !l.allFinite()) {
    throw Error(ErrorCode::kDegenerateInput, "homogeneous line is the zero vector");
  }
}

bool same_up_to_scale(const Vec3& a, const Vec3& b, double tol) {
  const double na = a.norm();
  const double nb = b.norm();
  if (na == 0.0 || nb == 0.0) return na == nb;
  return (a / na).cross(b / nb).norm() <= tol;
}

HomLine line_through(const HomPoint& p, const HomPoint& q) {
  if (same_up_to_scale(p.vec(), q.vec())) {
    throw Error(ErrorCode::kDegenerateInput, "line_through: coincident points");
  }
  return HomLine(p.vec().cross(q.vec()));
}

HomPoint intersect(const HomLine& a, const HomLine& b) {
  if (same_up_to_scale(a.vec(), b.vec())) {
    throw Error(ErrorCode::kDegenerateInput, "intersect: identical lines");
  }
  return HomPoint(a.vec().cross(b.vec()));
}

LineSegment::LineSegment(const Vec2& p_, const Vec2& q_) : p(p_), q(q_) {
  if (!((q - p).norm() > 0.0)) {
    throw Error(ErrorCode::kDegenerateInput, "line segment has zero length");
  }
}

HomLine LineSegment::supporting_line() const {
  return HomLine(Vec3(p.x(), p.y(), 1.0).cross(Vec3(q.x(), q.y(), 1.0)));
}

std::vector<LineSegment> filter_short_segments(std::span<const LineSegment> segments,
                                               double min_length) {
  std::vector<LineSegment> kept;
  kept.reserve(segments.size());
  for (const auto& s : segments) {
    if (s.length() >= min_length) kept.push_back(s);
  }
  return kept;
}

namespace {

Mat3 canonicalize(const Mat3& m) {
  const double n = m.norm();
  if (!(n > 0.0) || !m.allFinite()) {
    throw Error(ErrorCode::kEstimation, "homography matrix is zero or non-finite");
  }
  // Already unit norm: keep the bits so canonical forms are fixed points.
  Mat3 out = std::abs(n - 1.0) <= 4.0 * std::numeric_limits<double>::epsilon() ? m : Mat3(m / n);
  Eigen::Index r = 0;
  Eigen::Index c = 0;
  out.cwiseAbs().maxCoeff(&r, &c);
  if (out(r, c) < 0.0) out = -out;
  return out;
}

}  // namespace

Homography::Homography(const Mat3& m) : m_(canonicalize(m)) {
  if (!(std::abs(m_.determinant()) > 1e-12)) {
    throw Error(ErrorCode::kEstimation, "homography is singular");
  }
}

std::optional<Vec2> Homography::map(const Vec2& p) const {
  return HomPoint(m_ * Vec3(p.x(), p.y(), 1.0)).pixel();
}

Homography Homography::inverse() const { return Homography(m_.inverse()); }

Homography Homography::then(const Homography& next) const {
  return Homography(next.m_ * m_);
}

double frobenius_distance(const Homography& a, const Homography& b) {
  return (a.matrix() - b.matrix()).norm();
}

namespace {

// Isotropic conditioning transform computed from the finite points.
Mat3 normalizing_transform(std::span<const PointCorrespondence> corrs, bool use_src) {
  Vec2 centroid = Vec2::Zero();
  double wsum = 0.0;
  std::vector<Vec2> finite;
  for (const auto& c : corrs) {
    if (c.vanishing) continue;
    const auto px = (use_src ? c.src : c.dst).pixel();
    if (!px) continue;
    finite.push_back(*px);
    centroid += *px;
    wsum += 1.0;
  }
  Mat3 t = Mat3::Identity();
  if (finite.empty()) return t;
  centroid /= wsum;
  double mean_dist = 0.0;
  for (const auto& p : finite) mean_dist += (p - centroid).norm();
  mean_dist /= wsum;
  const double s = mean_dist > 0.0 ? std::sqrt(2.0) / mean_dist : 1.0;
  t << s, 0.0, -s * centroid.x(), 0.0, s, -s * centroid.y(), 0.0, 0.0, 1.0;
  return t;
}

// Finite points are dehomogenized (w = 1) so the system is the plain
// algebraic least squares; directions are scaled to unit length.
Vec3 conditioned(const Mat3& t, const HomPoint& p) {
  const Vec3 v = t * p.vec();
  if (is_at_infinity(v)) return v.normalized();
  return v / v.z();
}

bool collinear(const Vec2& a, const Vec2& b, const Vec2& c) {
  const Vec2 u = b - a;
  const Vec2 v = c - a;
  const double scale = std::max(u.squaredNorm(), v.squaredNorm());
  return std::abs(u.x() * v.y() - u.y() * v.x()) <= 1e-10 * scale;
}

bool has_collinear_triple(std::span<const PointCorrespondence> corrs, bool use_src) {
  std::array<Vec2, 4> pts;
  for (std::size_t i = 0; i < 4; ++i) {
    const auto px = (use_src ? corrs[i].src : corrs[i].dst).pixel();
    if (!px) return false;  // vanishing points are exempt from the check
    pts[i] = *px;
  }
  for (std::size_t a = 0; a < 4; ++a) {
    for (std::size_t b = a + 1; b < 4; ++b) {
      for (std::size_t c = b + 1; c < 4; ++c) {
        if (collinear(pts[a], pts[b], pts[c])) return true;
      }
    }
  }
  return false;
}

}  // namespace

Homography dlt_homography(std::span<const PointCorrespondence> corrs) {
  if (corrs.size() < 4) {
    throw Error(ErrorCode::kEstimation, "dlt_homography needs at least 4 correspondences");
  }
  if (corrs.size() == 4 && (has_collinear_triple(corrs, true) || has_collinear_triple(corrs, false))) {
    throw Error(ErrorCode::kEstimation, "dlt_homography: three collinear points");
  }
  const Mat3 t_src = normalizing_transform(corrs, true);
  const Mat3 t_dst = normalizing_transform(corrs, false);

  Eigen::MatrixXd a(2 * corrs.size(), 9);
  for (std::size_t i = 0; i < corrs.size(); ++i) {
    Vec3 x = conditioned(t_src, corrs[i].src);
    Vec3 y = conditioned(t_dst, corrs[i].dst);
    if (corrs[i].vanishing) {
      x.normalize();
      y.normalize();
    }
    const double w = std::sqrt(std::max(corrs[i].weight, 0.0));
    const auto r0 = static_cast<Eigen::Index>(2 * i);
    a.row(r0) << Eigen::RowVector3d::Zero(), -y.z() * x.transpose(), y.y() * x.transpose();
    a.row(r0 + 1) << y.z() * x.transpose(), Eigen::RowVector3d::Zero(), -y.x() * x.transpose();
    a.row(r0) *= w;
    a.row(r0 + 1) *= w;
  }
  // Full V keeps the null vector available when there are only eight rows.
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeFullV);
  const auto& sv = svd.singularValues();
  if (sv.size() < 8 || !(sv(0) > 0.0) || sv(7) <= 1e-10 * sv(0)) {
    throw Error(ErrorCode::kEstimation, "dlt_homography: rank-deficient configuration");
  }
  const Eigen::Matrix<double, 9, 1> h = svd.matrixV().col(8);
  Mat3 hn;
  hn << h(0), h(1), h(2), h(3), h(4), h(5), h(6), h(7), h(8);
  const Mat3 m = t_dst.inverse() * hn * t_src;
  return Homography(m);
}

Homography dlt_homography(std::span<const Vec2> src, std::span<const Vec2> dst) {
  if (src.size() != dst.size()) {
    throw Error(ErrorCode::kDegenerateInput, "dlt_homography: size mismatch");
  }
  std::vector<PointCorrespondence> corrs;
  corrs.reserve(src.size());
  for (std::size_t i = 0; i < src.size(); ++i) {
    corrs.push_back({HomPoint::from_pixel(src[i]), HomPoint::from_pixel(dst[i]), 1.0});
  }
  return dlt_homography(corrs);
}

DetBox DetBox::make(double xmin, double ymin, double xmax, double ymax, double score) {
  if (!(xmin < xmax) || !(ymin < ymax)) {
    throw Error(ErrorCode::kDegenerateInput, "detection box has empty extent");
  }
  return DetBox{xmin, ymin, xmax, ymax, score};
}

DetBox DetBox::dilated(double margin) const {
  const Vec2 c = center();
  const double hw = 0.5 * width() * (1.0 + margin);
  const double hh = 0.5 * height() * (1.0 + margin);
  return DetBox{c.x() - hw, c.y() - hh, c.x() + hw, c.y() + hh, score};
}

double signed_area(std::span<const Vec2> polygon) {
  double acc = 0.0;
  const std::size_t n = polygon.size();
  for (std::size_t i = 0; i < n; ++i) {
    const Vec2& a = polygon[i];
    const Vec2& b = polygon[(i + 1) % n];
    acc += a.x() * b.y() - b.x() * a.y();
  }
  return 0.5 * acc;
}

namespace {

double cross2(const Vec2& u, const Vec2& v) { return u.x() * v.y() - u.y() * v.x(); }

}  // namespace

bool is_strictly_convex(std::span<const Vec2> polygon) {
  const std::size_t n = polygon.size();
  if (n < 3) return false;
  double scale = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (!polygon[i].allFinite()) return false;
    scale = std::max(scale, (polygon[(i + 1) % n] - polygon[i]).squaredNorm());
  }
  if (!(scale > 0.0)) return false;
  for (std::size_t i = 0; i < n; ++i) {
    const Vec2 e0 = polygon[(i + 1) % n] - polygon[i];
    const Vec2 e1 = polygon[(i + 2) % n] - polygon[(i + 1) % n];
    if (!(cross2(e0, e1) > 1e-12 * scale)) return false;
  }
  return true;
}

std::vector<Vec2> clip_convex(std::span<const Vec2> subject, std::span<const Vec2> clip) {
  std::vector<Vec2> output(subject.begin(), subject.end());
  const std::size_t n = clip.size();
  for (std::size_t e = 0; e < n && !output.empty(); ++e) {
    const Vec2& a = clip[e];
    const Vec2& b = clip[(e + 1) % n];
    const Vec2 edge = b - a;
    const std::vector<Vec2> input = std::move(output);
    output.clear();
    const auto side = [&](const Vec2& p) { return cross2(edge, p - a); };
    for (std::size_t i = 0; i < input.size(); ++i) {
      const Vec2& cur = input[i];
      const Vec2& prev = input[(i + input.size() - 1) % input.size()];
      const double sc = side(cur);
      const double sp = side(prev);
      if (sc >= 0.0) {
        if (sp < 0.0) output.push_back(prev + (cur - prev) * (sp / (sp - sc)));
        output.push_back(cur);
      } else if (sp >= 0.0) {
        output.push_back(prev + (cur - prev) * (sp / (sp - sc)));
      }
    }
  }
  return output;
}

QuadBox::QuadBox(const Corners& corners, double score) : corners_(corners), score_(score) {
  if (!is_strictly_convex(corners_) || !(signed_area(corners_) > 0.0)) {
    throw Error(ErrorCode::kDegenerateInput, "quad is not strictly convex in TL,TR,BR,BL order");
  }
}

QuadBox::QuadBox(const DetBox& b)
    : QuadBox(Corners{Vec2(b.xmin, b.ymin), Vec2(b.xmax, b.ymin), Vec2(b.xmax, b.ymax),
                      Vec2(b.xmin, b.ymax)},
              b.score) {}

std::optional<QuadBox> QuadBox::try_make(const Corners& corners, double score) {
  if (!is_strictly_convex(corners) || !(signed_area(corners) > 0.0)) return std::nullopt;
  return QuadBox(corners, score);
}

std::optional<QuadBox> QuadBox::canonical(Corners corners, double score) {
  if (signed_area(corners) < 0.0) std::reverse(corners.begin(), corners.end());
  std::size_t start = 0;
  for (std::size_t i = 1; i < 4; ++i) {
    if (corners[i].sum() < corners[start].sum()) start = i;
  }
  std::rotate(corners.begin(), corners.begin() + static_cast<std::ptrdiff_t>(start), corners.end());
  return try_make(corners, score);
}

double QuadBox::area() const { return signed_area(corners_); }

Vec2 QuadBox::centroid() const {
  // Area centroid via the triangle fan; matches the vertex mean for
  // parallelograms.
  const double a = area();
  Vec2 c = Vec2::Zero();
  for (std::size_t i = 0; i < 4; ++i) {
    const Vec2& p = corners_[i];
    const Vec2& q = corners_[(i + 1) % 4];
    c += (p + q) * cross2(p, q);
  }
  return c / (6.0 * a);
}

bool QuadBox::contains(const Vec2& p) const {
  for (std::size_t i = 0; i < 4; ++i) {
    if (cross2(corners_[(i + 1) % 4] - corners_[i], p - corners_[i]) < 0.0) return false;
  }
  return true;
}

DetBox QuadBox::bounding_box() const {
  DetBox b{corners_[0].x(), corners_[0].y(), corners_[0].x(), corners_[0].y(), score_};
  for (const auto& c : corners_) {
    b.xmin = std::min(b.xmin, c.x());
    b.ymin = std::min(b.ymin, c.y());
    b.xmax = std::max(b.xmax, c.x());
    b.ymax = std::max(b.ymax, c.y());
  }
  return b;
}

QuadBox QuadBox::dilated(double margin) const {
  const Vec2 c = centroid();
  Corners out;
  for (std::size_t i = 0; i < 4; ++i) out[i] = c + (1.0 + margin) * (corners_[i] - c);
  return QuadBox(out, score_);
}

double quad_iou(const QuadBox& a, const QuadBox& b) {
  const double area_a = a.area();
  const double area_b = b.area();
  constexpr double kMinArea = 1e-9;
  if (area_a < kMinArea || area_b < kMinArea) return 0.0;
  const auto inter_poly = clip_convex(a.corners(), b.corners());
  const double inter = inter_poly.size() >= 3 ? std::max(0.0, signed_area(inter_poly)) : 0.0;
  const double uni = area_a + area_b - inter;
  if (!(uni > kMinArea)) return 0.0;
  return std::clamp(inter / uni, 0.0, 1.0);
}

std::optional<QuadBox> project(const Homography& h, const QuadBox& q) {
  QuadBox::Corners out;
  int positive = 0;
  for (std::size_t i = 0; i < 4; ++i) {
    const Vec3 m = h.matrix() * Vec3(q.corner(i).x(), q.corner(i).y(), 1.0);
    if (is_at_infinity(m)) return std::nullopt;
    positive += m.z() > 0.0 ? 1 : 0;
    out[i] = m.head<2>() / m.z();
  }
  // Mixed signs of w: the vanishing line cuts through the quad.
  if (positive != 0 && positive != 4) return std::nullopt;
  return QuadBox::try_make(out, q.score());
}

}  // namespace objguide
