#include "objguide/rectify.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>

#include <Eigen/Dense>

namespace objguide {

namespace {

struct AxisFit {
  double scale = 1.0;
  double shift = 0.0;
};

// Closed-form 1D regression of target on source, slope forced positive.
AxisFit fit_axis(std::span<const double> source, std::span<const double> target) {
  const auto n = static_cast<double>(source.size());
  double ms = 0.0;
  double mt = 0.0;
  for (std::size_t i = 0; i < source.size(); ++i) {
    ms += source[i];
    mt += target[i];
  }
  ms /= n;
  mt /= n;
  double var = 0.0;
  double cov = 0.0;
  double var_t = 0.0;
  for (std::size_t i = 0; i < source.size(); ++i) {
    var += (source[i] - ms) * (source[i] - ms);
    cov += (source[i] - ms) * (target[i] - mt);
    var_t += (target[i] - mt) * (target[i] - mt);
  }
  AxisFit fit;
  if (var > 0.0 && cov > 0.0) {
    fit.scale = cov / var;
  } else if (var > 0.0 && var_t > 0.0) {
    fit.scale = std::sqrt(var_t / var);
  } else {
    fit.scale = 1.0;
  }
  fit.shift = mt - fit.scale * ms;
  return fit;
}

Vec2 oriented_unit(const Vec2& d, bool prefer_x) {
  Vec2 u = d.normalized();
  const double key = prefer_x ? u.x() : u.y();
  const double other = prefer_x ? u.y() : u.x();
  if (key < 0.0 || (key == 0.0 && other < 0.0)) u = -u;
  return u;
}

}  // namespace

Rectifier build_rectifier(const HomPoint& vp_h, const HomPoint& vp_v,
                          std::span<const LineSegment> segments, const ImageSize& image,
                          int plane_id) {
  if (segments.empty()) {
    throw Error(ErrorCode::kRectifierDegenerate, "build_rectifier: no segments");
  }
  if (same_up_to_scale(vp_h.vec(), vp_v.vec())) {
    throw Error(ErrorCode::kRectifierDegenerate, "build_rectifier: vanishing points coincide");
  }
  const Vec3 center(image.center().x(), image.center().y(), 1.0);
  Vec3 l = vp_h.unit().cross(vp_v.unit());
  const double lc = l.dot(center);
  if (!(std::abs(lc) > 1e-9 * l.norm() * center.norm())) {
    throw Error(ErrorCode::kRectifierDegenerate,
                "build_rectifier: vanishing line passes through the image center");
  }
  l /= lc;

  Mat3 p = Mat3::Identity();
  p.row(2) = l.transpose();

  // P leaves the first two coordinates alone, so the images of the VPs are
  // their own (x, y) directions at infinity.
  const Vec2 a = oriented_unit(vp_h.vec().head<2>(), true);
  const Vec2 b = oriented_unit(vp_v.vec().head<2>(), false);
  Eigen::Matrix2d ab;
  ab.col(0) = a;
  ab.col(1) = b;
  if (!(std::abs(ab.determinant()) > 1e-9)) {
    throw Error(ErrorCode::kRectifierDegenerate,
                "build_rectifier: vanishing directions are parallel after projection");
  }
  Mat3 bmat = Mat3::Identity();
  bmat.topLeftCorner<2, 2>() = ab.inverse();
  const Mat3 bp = bmat * p;

  std::vector<double> ux;
  std::vector<double> uy;
  std::vector<double> ox;
  std::vector<double> oy;
  for (const auto& s : segments) {
    for (const Vec2& e : {s.p, s.q}) {
      const Vec3 r = bp * Vec3(e.x(), e.y(), 1.0);
      if (!(r.z() > 0.0) || is_at_infinity(r)) continue;
      ux.push_back(r.x() / r.z());
      uy.push_back(r.y() / r.z());
      ox.push_back(e.x());
      oy.push_back(e.y());
    }
  }
  if (ux.size() < 2) {
    throw Error(ErrorCode::kRectifierDegenerate,
                "build_rectifier: no segment endpoints on the image side of the vanishing line");
  }
  const AxisFit fx = fit_axis(ux, ox);
  const AxisFit fy = fit_axis(uy, oy);
  Mat3 smat;
  smat << fx.scale, 0.0, fx.shift, 0.0, fy.scale, fy.shift, 0.0, 0.0, 1.0;

  Rectifier r{Homography(smat * bp), vp_h, vp_v, plane_id};
  for (const HomPoint* vp : {&vp_h, &vp_v}) {
    const Vec3 m = (r.h.matrix() * vp->vec()).normalized();
    if (!(std::abs(m.z()) < 1e-9)) {
      throw Error(ErrorCode::kRectifierDegenerate, "build_rectifier: VP not sent to infinity");
    }
  }
  return r;
}

double endpoint_ssd(const Homography& h, std::span<const LineSegment> segments) {
  double ssd = 0.0;
  for (const auto& s : segments) {
    for (const Vec2& e : {s.p, s.q}) {
      const auto m = h.map(e);
      if (!m) continue;
      ssd += (*m - e).squaredNorm();
    }
  }
  return ssd;
}

std::vector<ColumnInterval> segment_columns(std::span<const LineSegment> segments,
                                            std::span<const VanishingPoint> horizontal_vps,
                                            int width, const SegParams& params) {
  if (horizontal_vps.empty()) {
    throw Error(ErrorCode::kMissingHorizontal, "segment_columns: no horizontal vanishing point");
  }
  if (width <= 0) return {};
  const std::size_t k_count = horizontal_vps.size();
  if (k_count == 1) return {ColumnInterval{0, width, 0}};

  // votes[c * k_count + k]
  std::vector<double> votes(static_cast<std::size_t>(width) * k_count, 0.0);
  std::vector<double> residuals(k_count);
  for (const auto& s : segments) {
    const Vec2 d = s.direction();
    if (std::abs(d.y()) > std::abs(d.x())) continue;  // more than 45 degrees off horizontal
    double rmin = 90.0;
    for (std::size_t k = 0; k < k_count; ++k) {
      residuals[k] = residual_angle(s, horizontal_vps[k].point);
      rmin = std::min(rmin, residuals[k]);
    }
    double z = 0.0;
    for (std::size_t k = 0; k < k_count; ++k) {
      residuals[k] = std::exp(-(residuals[k] - rmin) / params.softmax_temp_deg);
      z += residuals[k];
    }
    const double x0 = std::min(s.p.x(), s.q.x());
    const double x1 = std::max(s.p.x(), s.q.x());
    const int c0 = std::max(0, static_cast<int>(std::floor(x0)));
    const int c1 = std::min(width - 1, static_cast<int>(std::ceil(x1)) - 1);
    for (int c = c0; c <= c1; ++c) {
      for (std::size_t k = 0; k < k_count; ++k) {
        votes[static_cast<std::size_t>(c) * k_count + k] += residuals[k] / z;
      }
    }
  }
  const auto vote = [&](int c, std::size_t k) {
    return votes[static_cast<std::size_t>(c) * k_count + k];
  };

  std::vector<int> label(static_cast<std::size_t>(width), -1);
  for (int c = 0; c < width; ++c) {
    double total = 0.0;
    std::size_t best = 0;
    for (std::size_t k = 0; k < k_count; ++k) {
      total += vote(c, k);
      if (vote(c, k) > vote(c, best)) best = k;
    }
    if (!(total > 0.0)) continue;
    double second = 0.0;
    for (std::size_t k = 0; k < k_count; ++k) {
      if (k != best) second = std::max(second, vote(c, k));
    }
    const double top = vote(c, best);
    if (top >= params.majority_thresh * total && top >= params.ratio_thresh * second) {
      label[static_cast<std::size_t>(c)] = static_cast<int>(best);
    }
  }

  if (std::all_of(label.begin(), label.end(), [](int l) { return l < 0; })) {
    std::size_t best = 0;
    for (std::size_t k = 1; k < k_count; ++k) {
      if (horizontal_vps[k].support() > horizontal_vps[best].support()) best = k;
    }
    return {ColumnInterval{0, width, static_cast<int>(best)}};
  }

  // Fill unlabeled gaps.
  int c = 0;
  while (c < width) {
    if (label[static_cast<std::size_t>(c)] >= 0) {
      ++c;
      continue;
    }
    const int g0 = c;
    while (c < width && label[static_cast<std::size_t>(c)] < 0) ++c;
    const int g1 = c;
    const int left = g0 > 0 ? label[static_cast<std::size_t>(g0 - 1)] : -1;
    const int right = g1 < width ? label[static_cast<std::size_t>(g1)] : -1;
    int split = g0;
    if (left < 0) {
      split = g0;  // leading border gap adopts the right neighbor
    } else if (right < 0 || left == right) {
      split = g1;
    } else {
      // Maximize the vote mass of the left label left of the split plus the
      // right label right of it; ties go to the split nearest the middle.
      double tail = 0.0;
      for (int x = g0; x < g1; ++x) tail += vote(x, static_cast<std::size_t>(right));
      double head = 0.0;
      double best_score = -1.0;
      const double mid = 0.5 * (g0 + g1);
      for (int t = g0; t <= g1; ++t) {
        const double score = head + tail;
        if (score > best_score ||
            (score == best_score && std::abs(t - mid) < std::abs(split - mid))) {
          best_score = score;
          split = t;
        }
        if (t < g1) {
          head += vote(t, static_cast<std::size_t>(left));
          tail -= vote(t, static_cast<std::size_t>(right));
        }
      }
    }
    for (int x = g0; x < g1; ++x) label[static_cast<std::size_t>(x)] = x < split ? left : right;
  }

  std::vector<ColumnInterval> out;
  for (int x = 0; x < width; ++x) {
    const int l = label[static_cast<std::size_t>(x)];
    if (!out.empty() && out.back().plane_id == l) {
      out.back().hi = x + 1;
    } else {
      out.push_back(ColumnInterval{x, x + 1, l});
    }
  }
  return out;
}

QuadBox backproject_quad(const DetBox& box, const Rectifier& r) {
  const Homography inv = r.h.inverse();
  const QuadBox rect(box);
  QuadBox::Corners corners;
  for (std::size_t i = 0; i < 4; ++i) {
    const auto m = inv.map(rect.corner(i));
    if (!m) throw Error(ErrorCode::kBackprojection, "backproject_quad: corner at infinity");
    corners[i] = *m;
  }
  // The rectified axes keep their orientation, so corner roles carry over.
  auto q = QuadBox::try_make(corners, box.score);
  if (!q) q = QuadBox::canonical(corners, box.score);
  if (!q) throw Error(ErrorCode::kBackprojection, "backproject_quad: quad is not convex");
  return *q;
}

PlaneLayout rectify_planes(std::span<const LineSegment> segments,
                           std::span<const VanishingPoint> vps, const ImageSize& image,
                           const SegParams& params) {
  PlaneLayout layout;
  layout.vertical = find_vertical(vps);
  layout.horizontal = horizontal_indices(vps);
  if (!layout.vertical || layout.horizontal.empty()) return PlaneLayout{};

  std::vector<VanishingPoint> horizontal;
  for (std::size_t idx : layout.horizontal) horizontal.push_back(vps[idx]);
  layout.columns = segment_columns(segments, horizontal, image.width, params);

  const auto plane_at = [&](double x) {
    const int col = std::clamp(static_cast<int>(std::floor(x)), 0, image.width - 1);
    for (const auto& iv : layout.columns) {
      if (col >= iv.lo && col < iv.hi) return iv.plane_id;
    }
    return -1;
  };

  const auto& vertical = vps[*layout.vertical];
  layout.rectifiers.resize(horizontal.size());
  for (std::size_t k = 0; k < horizontal.size(); ++k) {
    std::vector<LineSegment> all;
    std::vector<LineSegment> in_plane;
    for (const VanishingPoint* vp : std::array<const VanishingPoint*, 2>{&horizontal[k], &vertical}) {
      for (std::size_t idx : vp->inliers) {
        if (idx >= segments.size()) continue;
        all.push_back(segments[idx]);
        if (plane_at(segments[idx].midpoint().x()) == static_cast<int>(k)) {
          in_plane.push_back(segments[idx]);
        }
      }
    }
    const auto& fit_set = in_plane.size() >= 2 ? in_plane : all;
    try {
      layout.rectifiers[k] = build_rectifier(horizontal[k].point, vertical.point, fit_set, image,
                                             static_cast<int>(k));
    } catch (const Error&) {
      layout.rectifiers[k] = std::nullopt;
    }
  }
  return layout;
}

std::string to_string(BoxMode mode) {
  switch (mode) {
    case BoxMode::kO: return "O";
    case BoxMode::kOA: return "OA";
    case BoxMode::kR: return "R";
    case BoxMode::kRA: return "RA";
    case BoxMode::kOPlusR: return "O+R";
    case BoxMode::kOPlusRA: return "(O+R)A";
  }
  return "O";
}

std::optional<BoxMode> parse_box_mode(std::string_view text) {
  for (BoxMode m : {BoxMode::kO, BoxMode::kOA, BoxMode::kR, BoxMode::kRA, BoxMode::kOPlusR,
                    BoxMode::kOPlusRA}) {
    if (text == to_string(m)) return m;
  }
  return std::nullopt;
}

std::vector<QuadBox> merge_detections(const DetectionStreams& streams, BoxMode mode,
                                      double dedup_iou) {
  const std::vector<QuadBox>* first = nullptr;
  const std::vector<QuadBox>* second = nullptr;
  switch (mode) {
    case BoxMode::kO: first = &streams.orthogonal; break;
    case BoxMode::kOA: first = &streams.adjusted; break;
    case BoxMode::kR: first = &streams.rectified; break;
    case BoxMode::kRA: first = &streams.rectified_adjusted; break;
    case BoxMode::kOPlusR:
      first = &streams.orthogonal;
      second = &streams.rectified;
      break;
    case BoxMode::kOPlusRA:
      first = &streams.adjusted;
      second = &streams.rectified_adjusted;
      break;
  }
  std::vector<QuadBox> out = *first;
  if (!second) return out;
  const std::size_t base = out.size();
  std::vector<bool> absorbed(base, false);
  for (const auto& q : *second) {
    std::optional<std::size_t> hit;
    double best = dedup_iou;
    for (std::size_t i = 0; i < base; ++i) {
      if (absorbed[i]) continue;
      const double iou = quad_iou(out[i], q);
      if (hit ? iou > best : iou >= best) {
        best = iou;
        hit = i;
      }
    }
    if (!hit) {
      out.push_back(q);
      continue;
    }
    absorbed[*hit] = true;
    if (q.score() > out[*hit].score()) out[*hit] = q;
  }
  return out;
}

}  // namespace objguide
