#pragma once

#include <array>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Geometry>

#include "objguide/error.hpp"

namespace objguide {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

struct ImageSize {
  int width = 0;
  int height = 0;

  Vec2 center() const { return {0.5 * width, 0.5 * height}; }
  bool operator==(const ImageSize&) const = default;
};

// Shared finiteness predicate: a homogeneous vector is "at infinity" when
// |w| < 1e-9 * |(x, y)|. Every module branching on finiteness uses this.
bool is_at_infinity(const Vec3& h);

/// Projective 2D point. Pixels when finite, a direction when w == 0.
class HomPoint {
 public:
  HomPoint() : h_(0.0, 0.0, 1.0) {}
  explicit HomPoint(const Vec3& h);
  HomPoint(double x, double y, double w) : HomPoint(Vec3(x, y, w)) {}

  static HomPoint from_pixel(const Vec2& p) { return HomPoint(p.x(), p.y(), 1.0); }

  const Vec3& vec() const { return h_; }
  bool at_infinity() const { return is_at_infinity(h_); }
  std::optional<Vec2> pixel() const;
  // Unit-norm copy; sign is left untouched.
  Vec3 unit() const { return h_.normalized(); }

  // Exact coordinate equality; use same_up_to_scale for projective equality.
  bool operator==(const HomPoint& o) const { return h_ == o.h_; }

 private:
  Vec3 h_;
};

/// Projective 2D line, l . x = 0.
class HomLine {
 public:
  explicit HomLine(const Vec3& l);
  HomLine(double a, double b, double c) : HomLine(Vec3(a, b, c)) {}

  const Vec3& vec() const { return l_; }
  double eval(const HomPoint& p) const { return l_.dot(p.vec()); }

 private:
  Vec3 l_;
};

// True when a and b are equal up to a nonzero scale (within tol on the
// normalized cross product).
bool same_up_to_scale(const Vec3& a, const Vec3& b, double tol = 1e-12);

// Both throw Error(kDegenerateInput) for coincident points / identical lines.
// The returned vector is the raw cross product (not normalized), which keeps
// axis-aligned constructions exact.
HomLine line_through(const HomPoint& p, const HomPoint& q);
HomPoint intersect(const HomLine& a, const HomLine& b);

struct LineSegment {
  Vec2 p;
  Vec2 q;

  LineSegment() = default;
  // Throws kDegenerateInput when p == q.
  LineSegment(const Vec2& p, const Vec2& q);

  double length() const { return (q - p).norm(); }
  Vec2 midpoint() const { return 0.5 * (p + q); }
  Vec2 direction() const { return q - p; }
  HomLine supporting_line() const;

  bool operator==(const LineSegment&) const = default;
};

// Drops segments shorter than min_length; order is preserved.
std::vector<LineSegment> filter_short_segments(std::span<const LineSegment> segments,
                                               double min_length);

/// 3x3 projective map, stored with unit Frobenius norm and the
/// largest-magnitude entry positive so equal maps compare equal.
class Homography {
 public:
  Homography() : Homography(Mat3::Identity()) {}
  // Throws kEstimation when |det| <= 1e-12 after normalization.
  explicit Homography(const Mat3& m);

  static Homography identity() { return Homography(); }

  const Mat3& matrix() const { return m_; }
  HomPoint apply(const HomPoint& p) const { return HomPoint(m_ * p.vec()); }
  // Maps a pixel; std::nullopt when the image lands at infinity.
  std::optional<Vec2> map(const Vec2& p) const;
  Homography inverse() const;
  Homography then(const Homography& next) const;  // next * this

  bool operator==(const Homography& o) const { return m_ == o.m_; }

 private:
  Mat3 m_;
};

// Frobenius distance between the canonical forms of two homographies.
double frobenius_distance(const Homography& a, const Homography& b);

/// One DLT constraint. Points may lie at infinity; the weight scales the
/// pair of rows in the least-squares system. Vanishing-point pairs stay out
/// of the normalization statistics and enter with unit-norm homogeneous
/// vectors, so a far but finite VP does not dominate the fit.
struct PointCorrespondence {
  HomPoint src;
  HomPoint dst;
  double weight = 1.0;
  bool vanishing = false;
};

// Direct linear transform with isotropic normalization on both sides
// (centroid of finite non-vanishing points to the origin, mean distance
// sqrt(2)).
// Exactly four pairs are checked for collinear triples. Throws
// Error(kEstimation) on rank-deficient systems.
Homography dlt_homography(std::span<const PointCorrespondence> corrs);
Homography dlt_homography(std::span<const Vec2> src, std::span<const Vec2> dst);

struct DetBox {
  double xmin = 0.0;
  double ymin = 0.0;
  double xmax = 1.0;
  double ymax = 1.0;
  double score = 1.0;

  // Throws kDegenerateInput unless xmin < xmax and ymin < ymax.
  static DetBox make(double xmin, double ymin, double xmax, double ymax, double score = 1.0);

  double width() const { return xmax - xmin; }
  double height() const { return ymax - ymin; }
  Vec2 center() const { return {0.5 * (xmin + xmax), 0.5 * (ymin + ymax)}; }
  bool contains(const Vec2& p) const {
    return p.x() >= xmin && p.x() <= xmax && p.y() >= ymin && p.y() <= ymax;
  }
  // Scales width and height by (1 + margin) about the center.
  DetBox dilated(double margin) const;

  bool operator==(const DetBox&) const = default;
};

/// Four-corner perspective box in TL, TR, BR, BL order.
///
/// Corners always form a strictly convex polygon with positive shoelace area
/// in image coordinates (y down); constructors reject anything else.
class QuadBox {
 public:
  using Corners = std::array<Vec2, 4>;

  // Throws kDegenerateInput for non-convex or wrongly ordered corners.
  QuadBox(const Corners& corners, double score);
  explicit QuadBox(const DetBox& box);

  static std::optional<QuadBox> try_make(const Corners& corners, double score);
  // Reorders any convex 4-gon to the canonical order: positive orientation,
  // starting from the corner with the smallest x + y.
  static std::optional<QuadBox> canonical(Corners corners, double score);

  const Corners& corners() const { return corners_; }
  const Vec2& corner(std::size_t i) const { return corners_[i]; }
  double score() const { return score_; }
  void set_score(double s) { score_ = s; }

  double area() const;
  Vec2 centroid() const;
  bool contains(const Vec2& p) const;
  DetBox bounding_box() const;
  // Scales the quad by (1 + margin) about its centroid.
  QuadBox dilated(double margin) const;

  bool operator==(const QuadBox& o) const { return corners_ == o.corners_ && score_ == o.score_; }

 private:
  Corners corners_;
  double score_;
};

// Shoelace area, signed (positive for the canonical orientation).
double signed_area(std::span<const Vec2> polygon);
bool is_strictly_convex(std::span<const Vec2> polygon);

// Sutherland-Hodgman clip of a convex subject by a convex clip polygon, both
// in positive orientation.
std::vector<Vec2> clip_convex(std::span<const Vec2> subject, std::span<const Vec2> clip);

// Area IoU in [0, 1]; near-zero-area quads give 0.
double quad_iou(const QuadBox& a, const QuadBox& b);

// Maps the corners of q through h. std::nullopt when a corner goes to
// infinity or the image is not a valid QuadBox.
std::optional<QuadBox> project(const Homography& h, const QuadBox& q);

}  // namespace objguide
