#include "objguide/vanishing.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include <Eigen/Eigenvalues>

namespace objguide {

const char* to_string(Orientation o) {
  switch (o) {
    case Orientation::kVertical: return "vertical";
    case Orientation::kHorizontal: return "horizontal";
    case Orientation::kUnknown: break;
  }
  return "unknown";
}

namespace {

constexpr double kRadToDeg = 180.0 / std::numbers::pi;
constexpr double kDegToRad = std::numbers::pi / 180.0;

// Direction from m toward v, scaled by v's w. Valid for finite and infinite v
// alike; the sign flips with w but only |cos| is used downstream.
Vec2 toward(const Vec2& m, const Vec3& v) { return v.head<2>() - v.z() * m; }

double angle_between_deg(const Vec2& d, const Vec2& t) {
  const double cross = d.x() * t.y() - d.y() * t.x();
  const double dot = d.dot(t);
  return std::atan2(std::abs(cross), std::abs(dot)) * kRadToDeg;
}

struct PreparedSegment {
  Vec2 mid;
  Vec2 dir;  // unit
};

// Cheap inlier test equivalent to residual_angle <= thresh.
bool within(const PreparedSegment& s, const Vec3& v, double tan_thresh) {
  const Vec2 t = toward(s.mid, v);
  if (t.squaredNorm() == 0.0) return true;
  const double cross = s.dir.x() * t.y() - s.dir.y() * t.x();
  return std::abs(cross) <= tan_thresh * std::abs(s.dir.dot(t));
}

std::vector<std::size_t> collect_inliers(std::span<const PreparedSegment> prepared,
                                         std::span<const std::size_t> pool, const Vec3& v,
                                         double tan_thresh) {
  std::vector<std::size_t> out;
  for (std::size_t idx : pool) {
    if (within(prepared[idx], v, tan_thresh)) out.push_back(idx);
  }
  return out;
}

}  // namespace

HomPoint vp_from_pair(const LineSegment& a, const LineSegment& b) {
  return intersect(a.supporting_line(), b.supporting_line());
}

double residual_angle(const LineSegment& s, const HomPoint& v) {
  const Vec2 t = toward(s.midpoint(), v.vec());
  if (t.squaredNorm() == 0.0) return 0.0;
  return angle_between_deg(s.direction(), t);
}

namespace {

// With `at`, each row is divided by the distance from the segment midpoint
// to `at` (conditioned frame), so the rows measure residual angles.
HomPoint weighted_vp(std::span<const LineSegment> segments, std::span<const double> weights,
                     const HomPoint* at = nullptr) {
  // Condition the endpoints, solve the smallest-eigenvector problem in the
  // normalized frame, then map back.
  Vec2 centroid = Vec2::Zero();
  for (const auto& s : segments) centroid += s.p + s.q;
  centroid /= static_cast<double>(2 * segments.size());
  double mean_dist = 0.0;
  for (const auto& s : segments) mean_dist += (s.p - centroid).norm() + (s.q - centroid).norm();
  mean_dist /= static_cast<double>(2 * segments.size());
  const double scale = mean_dist > 0.0 ? std::sqrt(2.0) / mean_dist : 1.0;

  Vec3 a = Vec3::Zero();
  if (at) {
    const Vec3& x = at->vec();
    a = Vec3((x.x() - centroid.x() * x.z()) * scale, (x.y() - centroid.y() * x.z()) * scale, x.z())
            .normalized();
  }
  Mat3 m = Mat3::Zero();
  for (std::size_t i = 0; i < segments.size(); ++i) {
    const Vec2 p = (segments[i].p - centroid) * scale;
    const Vec2 q = (segments[i].q - centroid) * scale;
    Vec3 l = Vec3(p.x(), p.y(), 1.0).cross(Vec3(q.x(), q.y(), 1.0));
    const double n = l.head<2>().norm();
    if (!(n > 0.0)) continue;
    l /= n;
    double w = weights[i];
    if (at) {
      const double u = (a.head<2>() - a.z() * 0.5 * (p + q)).squaredNorm();
      if (!(u > 0.0)) continue;
      w /= u;
    }
    m += w * l * l.transpose();
  }
  Eigen::SelfAdjointEigenSolver<Mat3> eig(m);
  const Vec3 vn = eig.eigenvectors().col(0);
  // Undo the conditioning: x = T^-1 x'.
  const Vec3 v(vn.x() / scale + centroid.x() * vn.z(), vn.y() / scale + centroid.y() * vn.z(),
               vn.z());
  return HomPoint(v);
}

// Fit reweighted by a biweight of the residual angle so that segments near
// the threshold (often shared with a neighbouring VP) stop pulling the
// estimate. The first pass weights rows by length; the second starts from
// its result and weights by squared length over squared distance to the
// current VP, which approximates endpoint-noise maximum likelihood.
HomPoint robust_vp(std::span<const LineSegment> segments, HomPoint start, double thresh_deg) {
  std::vector<double> w(segments.size());
  std::vector<double> r(segments.size());
  std::vector<double> within;
  HomPoint v = start;
  for (const bool ml : {false, true}) {
    for (int round = 0; round < 20; ++round) {
      within.clear();
      // In the second pass residuals are scaled by length, which makes
      // endpoint noise comparable across segments.
      for (std::size_t i = 0; i < segments.size(); ++i) {
        const double angle = residual_angle(segments[i], v);
        r[i] = angle < thresh_deg ? angle * (ml ? segments[i].length() : 1.0) : -1.0;
        if (r[i] >= 0.0) within.push_back(r[i]);
      }
      if (within.empty()) break;
      auto mid = within.begin() + static_cast<std::ptrdiff_t>(within.size() / 2);
      std::nth_element(within.begin(), mid, within.end());
      const double t = ml ? std::max(4.685 * 1.4826 * *mid, 1e-3)
                          : std::clamp(4.685 * 1.4826 * *mid, 1e-4, thresh_deg);
      std::size_t used = 0;
      for (std::size_t i = 0; i < segments.size(); ++i) {
        const double u = r[i] / t;
        const double len = segments[i].length();
        w[i] = r[i] >= 0.0 && u < 1.0 ? (ml ? len * len : len) * (1.0 - u * u) * (1.0 - u * u) : 0.0;
        used += w[i] > 0.0 ? 1 : 0;
      }
      if (used < 2) break;
      const HomPoint next = weighted_vp(segments, w, ml ? &v : nullptr);
      const bool converged = same_up_to_scale(next.vec(), v.vec(), 1e-12);
      v = next;
      if (converged) break;
    }
  }
  return v;
}

}  // namespace

HomPoint refine_vp(std::span<const LineSegment> segments) {
  if (segments.size() < 2) {
    throw Error(ErrorCode::kDegenerateInput, "refine_vp needs at least two segments");
  }
  std::vector<double> w;
  w.reserve(segments.size());
  for (const auto& s : segments) w.push_back(s.length());
  return weighted_vp(segments, w);
}

std::vector<VanishingPoint> estimate_vps(std::span<const LineSegment> segments,
                                         const VpParams& params) {
  if (!(params.angle_thresh_deg > 0.0) || params.min_inliers < 2) {
    throw Error(ErrorCode::kDegenerateInput, "invalid VP parameters");
  }
  std::vector<VanishingPoint> result;
  if (segments.size() < 2) return result;

  std::vector<PreparedSegment> prepared;
  prepared.reserve(segments.size());
  for (const auto& s : segments) prepared.push_back({s.midpoint(), s.direction().normalized()});

  const double tan_thresh = std::tan(params.angle_thresh_deg * kDegToRad);
  std::mt19937_64 rng(params.seed);

  std::vector<std::size_t> remaining(segments.size());
  for (std::size_t i = 0; i < remaining.size(); ++i) remaining[i] = i;

  while (result.size() < params.max_vps && remaining.size() >= params.min_inliers &&
         remaining.size() >= 2) {
    std::vector<double> weights;
    weights.reserve(remaining.size());
    for (std::size_t idx : remaining) weights.push_back(segments[idx].length());
    std::discrete_distribution<std::size_t> pick(weights.begin(), weights.end());

    std::vector<std::size_t> best_inliers;
    std::optional<HomPoint> best_vp;
    for (std::size_t it = 0; it < params.max_iterations; ++it) {
      const std::size_t a = pick(rng);
      std::size_t b = pick(rng);
      for (int retry = 0; retry < 8 && b == a; ++retry) b = pick(rng);
      if (a == b) continue;
      HomPoint v;
      try {
        v = vp_from_pair(segments[remaining[a]], segments[remaining[b]]);
      } catch (const Error&) {
        continue;
      }
      auto inliers = collect_inliers(prepared, remaining, v.vec(), tan_thresh);
      if (inliers.size() > best_inliers.size()) {
        best_inliers = std::move(inliers);
        best_vp = v;
      }
    }
    if (!best_vp || best_inliers.size() < params.min_inliers) break;

    // Alternate refinement on the consensus set with re-collecting the
    // inliers of the refined VP until the set settles.
    HomPoint vp = *best_vp;
    std::vector<std::size_t> inliers = best_inliers;
    const double wide = 1.5 * params.angle_thresh_deg;
    for (int pass = 0; pass < 5; ++pass) {
      std::vector<LineSegment> support;
      for (std::size_t idx : collect_inliers(prepared, remaining, vp.vec(),
                                             std::tan(wide * kDegToRad))) {
        support.push_back(segments[idx]);
      }
      try {
        const HomPoint refined = robust_vp(support, vp, wide);
        auto next = collect_inliers(prepared, remaining, refined.vec(), tan_thresh);
        if (next.size() < params.min_inliers) break;
        vp = refined;
        const bool settled = next == inliers;
        inliers = std::move(next);
        if (settled) break;
      } catch (const Error&) {
        break;
      }
    }

    std::vector<std::size_t> rest;
    rest.reserve(remaining.size() - inliers.size());
    std::set_difference(remaining.begin(), remaining.end(), inliers.begin(), inliers.end(),
                        std::back_inserter(rest));
    remaining = std::move(rest);
    result.push_back(VanishingPoint{vp, std::move(inliers), Orientation::kUnknown});
  }

  std::stable_sort(result.begin(), result.end(),
                   [](const VanishingPoint& a, const VanishingPoint& b) {
                     return a.support() > b.support();
                   });
  return result;
}

std::vector<VanishingPoint> classify(std::vector<VanishingPoint> vps, const ImageSize& image,
                                     const VpParams& params) {
  const Vec2 center = image.center();
  std::optional<std::size_t> vertical;
  for (std::size_t i = 0; i < vps.size(); ++i) {
    const Vec2 d = toward(center, vps[i].point.vec());
    const double from_y_axis =
        d.squaredNorm() == 0.0 ? 90.0
                               : std::atan2(std::abs(d.x()), std::abs(d.y())) * kRadToDeg;
    if (from_y_axis <= params.vertical_cone_deg &&
        (!vertical || vps[i].support() > vps[*vertical].support())) {
      vertical = i;
    }
  }
  for (std::size_t i = 0; i < vps.size(); ++i) {
    vps[i].orientation =
        (vertical && *vertical == i) ? Orientation::kVertical : Orientation::kHorizontal;
  }
  return vps;
}

std::optional<std::size_t> find_vertical(std::span<const VanishingPoint> vps) {
  for (std::size_t i = 0; i < vps.size(); ++i) {
    if (vps[i].orientation == Orientation::kVertical) return i;
  }
  return std::nullopt;
}

std::vector<std::size_t> horizontal_indices(std::span<const VanishingPoint> vps) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < vps.size(); ++i) {
    if (vps[i].orientation == Orientation::kHorizontal) out.push_back(i);
  }
  return out;
}

}  // namespace objguide
