#include "objguide/synth.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numbers>
#include <random>
#include <unordered_map>

#include <Eigen/Dense>

namespace objguide::synth {

namespace {

constexpr double kDegToRad = std::numbers::pi / 180.0;
constexpr double kRadToDeg = 180.0 / std::numbers::pi;

Mat3 intrinsics(const Camera& cam) {
  Mat3 k;
  k << cam.focal, 0.0, 0.5 * cam.size.width, 0.0, cam.focal, 0.5 * cam.size.height, 0.0, 0.0, 1.0;
  return k;
}

// Camera-to-world rotation.
Mat3 orientation(const Camera& cam) {
  const double y = cam.yaw_deg * kDegToRad;
  const double p = cam.pitch_deg * kDegToRad;
  Mat3 ry;
  ry << std::cos(y), 0.0, std::sin(y), 0.0, 1.0, 0.0, -std::sin(y), 0.0, std::cos(y);
  Mat3 rx;
  rx << 1.0, 0.0, 0.0, 0.0, std::cos(p), -std::sin(p), 0.0, std::sin(p), std::cos(p);
  return ry * rx;
}

Vec3 facade_dir(const PlaneSpec& plane) {
  const double y = plane.yaw_deg * kDegToRad;
  return {std::cos(y), 0.0, std::sin(y)};
}

Vec3 plane_point(const PlaneSpec& plane, double u, double v) {
  return plane.origin + u * facade_dir(plane) + v * Vec3::UnitY();
}

struct Projected {
  Vec2 px;
  bool in_front = false;
  bool in_image = false;
};

Projected project_point(const Camera& cam, const Vec3& x, double margin = 0.0) {
  const Mat3 r = orientation(cam).transpose();
  const Vec3 c = r * (x - cam.position);
  Projected out;
  out.in_front = c.z() > 0.1;
  if (!out.in_front) return out;
  const Vec3 h = intrinsics(cam) * c;
  out.px = h.head<2>() / h.z();
  out.in_image = out.px.x() >= margin && out.px.y() >= margin &&
                 out.px.x() <= cam.size.width - margin && out.px.y() <= cam.size.height - margin;
  return out;
}

Descriptor random_unit(std::mt19937_64& rng, int dim) {
  std::normal_distribution<double> n01(0.0, 1.0);
  Descriptor d(dim);
  for (int c = 0; c < dim; ++c) d(c) = n01(rng);
  return d.normalized();
}

LineSegment rotated(const LineSegment& s, double angle_deg) {
  const double a = angle_deg * kDegToRad;
  const Vec2 m = s.midpoint();
  Eigen::Matrix2d r;
  r << std::cos(a), -std::sin(a), std::sin(a), std::cos(a);
  return LineSegment(m + r * (s.p - m), m + r * (s.q - m));
}

// Longest visible run of a plane-space segment, as an image segment whose
// endpoints are exact projections of points on the 3D line.
std::optional<LineSegment> visible_part(const Camera& cam, const Vec3& a, const Vec3& b) {
  constexpr int kSamples = 400;
  int best_lo = -1;
  int best_hi = -1;
  int run_lo = -1;
  for (int n = 0; n <= kSamples + 1; ++n) {
    bool ok = false;
    if (n <= kSamples) {
      const double t = static_cast<double>(n) / kSamples;
      const auto pr = project_point(cam, a + t * (b - a), 0.5);
      ok = pr.in_front && pr.in_image;
    }
    if (ok && run_lo < 0) run_lo = n;
    if (!ok && run_lo >= 0) {
      if (n - 1 - run_lo > best_hi - best_lo) {
        best_lo = run_lo;
        best_hi = n - 1;
      }
      run_lo = -1;
    }
  }
  if (best_lo < 0 || best_hi <= best_lo) return std::nullopt;
  const Vec2 p = project_point(cam, a + (static_cast<double>(best_lo) / kSamples) * (b - a)).px;
  const Vec2 q = project_point(cam, a + (static_cast<double>(best_hi) / kSamples) * (b - a)).px;
  if ((q - p).norm() < 1.0) return std::nullopt;
  return LineSegment(p, q);
}

struct Window {
  int plane = 0;
  double u0 = 0.0;
  double v0 = 0.0;
  double w = 0.0;
  double h = 0.0;

  std::array<Vec3, 4> corners(const PlaneSpec& p) const {
    return {plane_point(p, u0, v0), plane_point(p, u0 + w, v0), plane_point(p, u0 + w, v0 + h),
            plane_point(p, u0, v0 + h)};
  }
};

double max_edge_tilt_deg(const QuadBox::Corners& c) {
  double tilt = 0.0;
  for (std::size_t e = 0; e < 4; ++e) {
    const Vec2 d = c[(e + 1) % 4] - c[e];
    const bool horizontal_edge = (e % 2) == 0;
    const double ang = horizontal_edge ? std::atan2(std::abs(d.y()), std::abs(d.x()))
                                       : std::atan2(std::abs(d.x()), std::abs(d.y()));
    tilt = std::max(tilt, ang * kRadToDeg);
  }
  return tilt;
}

DetBox hull_of(const QuadBox::Corners& c) {
  DetBox b{c[0].x(), c[0].y(), c[0].x(), c[0].y(), 1.0};
  for (const auto& p : c) {
    b.xmin = std::min(b.xmin, p.x());
    b.ymin = std::min(b.ymin, p.y());
    b.xmax = std::max(b.xmax, p.x());
    b.ymax = std::max(b.ymax, p.y());
  }
  return b;
}

DetBox jitter(DetBox b, const NoiseSpec& noise, double min_size, std::mt19937_64& rng) {
  if (noise.corner_sigma_px > 0.0) {
    std::normal_distribution<double> n(0.0, noise.corner_sigma_px);
    const auto draw = [&] {
      const double e = n(rng);
      return noise.corner_clip_px > 0.0 ? std::clamp(e, -noise.corner_clip_px, noise.corner_clip_px) : e;
    };
    b.xmin += draw();
    b.ymin += draw();
    b.xmax += draw();
    b.ymax += draw();
  }
  if (b.xmax - b.xmin < min_size) b.xmax = b.xmin + min_size;
  if (b.ymax - b.ymin < min_size) b.ymax = b.ymin + min_size;
  return b;
}

// Angle between the 3D directions of two VPs (rays K^-1 v, unsigned).
double vp_angle_deg(const HomPoint& a, const HomPoint& b, const Camera& cam) {
  const Mat3 k_inv = intrinsics(cam).inverse();
  const Vec3 ra = (k_inv * a.vec()).normalized();
  const Vec3 rb = (k_inv * b.vec()).normalized();
  return std::atan2(ra.cross(rb).norm(), std::abs(ra.dot(rb))) * kRadToDeg;
}

}  // namespace

Eigen::Matrix<double, 3, 4> projection(const Camera& cam) {
  const Mat3 r = orientation(cam).transpose();
  Eigen::Matrix<double, 3, 4> rt;
  rt.leftCols<3>() = r;
  rt.col(3) = -r * cam.position;
  return intrinsics(cam) * rt;
}

Homography plane_homography(const Camera& cam, const PlaneSpec& plane) {
  const Mat3 r = orientation(cam).transpose();
  Mat3 m;
  m.col(0) = facade_dir(plane);
  m.col(1) = Vec3::UnitY();
  m.col(2) = plane.origin - cam.position;
  return Homography(intrinsics(cam) * r * m);
}

HomPoint horizontal_vp(const Camera& cam, const PlaneSpec& plane) {
  return HomPoint(intrinsics(cam) * orientation(cam).transpose() * facade_dir(plane));
}

HomPoint vertical_vp(const Camera& cam) {
  return HomPoint(intrinsics(cam) * orientation(cam).transpose() * Vec3::UnitY());
}

SyntheticPair generate(const SceneSpec& spec) {
  std::mt19937_64 rng(spec.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  SyntheticPair out;
  GroundTruth& gt = out.truth;

  for (std::size_t v = 0; v < 2; ++v) out.views[v].size = spec.views[v].size;

  // Layout checks and per-plane homographies.
  std::vector<Window> windows;
  for (std::size_t p = 0; p < spec.planes.size(); ++p) {
    const PlaneSpec& plane = spec.planes[p];
    const Vec3 normal = facade_dir(plane).cross(Vec3::UnitY());
    for (std::size_t v = 0; v < 2; ++v) {
      if (!(normal.dot(spec.views[v].position - plane.origin) < 0.0)) {
        throw Error(ErrorCode::kGeneration, "generate: facade faces away from a camera");
      }
      gt.plane_h[v].push_back(plane_homography(spec.views[v], plane));
    }
    gt.plane_h12.push_back(gt.plane_h[0][p].inverse().then(gt.plane_h[1][p]));

    const WindowGrid& g = plane.windows;
    for (int r = 0; r < g.rows; ++r) {
      for (int c = 0; c < g.cols; ++c) {
        Window w{static_cast<int>(p), g.left + c * (g.width + g.h_gap),
                 g.top + r * (g.height + g.v_gap), g.width, g.height};
        if (w.u0 + w.w > plane.width - 0.05 || w.v0 + w.h > plane.height - 0.05) {
          throw Error(ErrorCode::kGeneration, "generate: window grid does not fit its facade");
        }
        windows.push_back(w);
      }
    }
  }

  // Window visibility and true corners per view.
  std::array<std::vector<std::optional<QuadBox::Corners>>, 2> win_px;
  for (std::size_t v = 0; v < 2; ++v) {
    for (const auto& w : windows) {
      const auto c3 = w.corners(spec.planes[static_cast<std::size_t>(w.plane)]);
      QuadBox::Corners c;
      bool ok = true;
      for (std::size_t k = 0; k < 4; ++k) {
        const auto pr = project_point(spec.views[v], c3[k], 2.0);
        ok = ok && pr.in_front && pr.in_image;
        c[k] = pr.px;
      }
      if (ok && !QuadBox::try_make(c, 1.0)) ok = false;
      win_px[v].push_back(ok ? std::optional<QuadBox::Corners>(c) : std::nullopt);
    }
  }

  // Segments.
  for (std::size_t v = 0; v < 2; ++v) {
    const Camera& cam = spec.views[v];
    std::vector<LineSegment> segs;
    for (std::size_t n = 0; n < windows.size(); ++n) {
      if (!win_px[v][n]) continue;
      const auto& c = *win_px[v][n];
      for (std::size_t e = 0; e < 4; ++e) segs.emplace_back(c[e], c[(e + 1) % 4]);
    }
    for (const auto& plane : spec.planes) {
      if (!plane.facade_lines) continue;
      const WindowGrid& g = plane.windows;
      for (int r = 0; r < g.rows; ++r) {
        const double top = g.top + r * (g.height + g.v_gap) - 0.15;
        const double bottom = g.top + r * (g.height + g.v_gap) + g.height + 0.15;
        for (double vv : {top, bottom}) {
          if (auto s = visible_part(cam, plane_point(plane, 0.1, vv),
                                    plane_point(plane, plane.width - 0.1, vv))) {
            segs.push_back(*s);
          }
        }
      }
      for (double uu : {0.05, plane.width - 0.05}) {
        if (auto s = visible_part(cam, plane_point(plane, uu, 0.1),
                                  plane_point(plane, uu, plane.height - 0.1))) {
          segs.push_back(*s);
        }
      }
    }
    if (spec.noise.segment_angle_sigma_deg > 0.0) {
      std::normal_distribution<double> n(0.0, spec.noise.segment_angle_sigma_deg);
      for (auto& s : segs) s = rotated(s, n(rng));
    }
    const double f = std::clamp(spec.noise.outlier_fraction, 0.0, 0.95);
    const auto n_out = static_cast<std::size_t>(std::lround(f / (1.0 - f) * static_cast<double>(segs.size())));
    for (std::size_t k = 0; k < n_out; ++k) {
      for (int attempt = 0; attempt < 100; ++attempt) {
        const Vec2 m(unit(rng) * cam.size.width, unit(rng) * cam.size.height);
        const double ang = unit(rng) * std::numbers::pi;
        const double len = 20.0 + 100.0 * unit(rng);
        const Vec2 d(std::cos(ang) * 0.5 * len, std::sin(ang) * 0.5 * len);
        const Vec2 p = m - d;
        const Vec2 q = m + d;
        const auto inside = [&](const Vec2& x) {
          return x.x() >= 0 && x.y() >= 0 && x.x() <= cam.size.width && x.y() <= cam.size.height;
        };
        if (!inside(p) || !inside(q)) continue;
        segs.emplace_back(p, q);
        break;
      }
    }
    out.views[v].segments = std::move(segs);
  }

  // Ground-truth VPs, plane extents and column partition.
  for (std::size_t v = 0; v < 2; ++v) {
    const Camera& cam = spec.views[v];
    for (std::size_t p = 0; p < spec.planes.size(); ++p) {
      gt.vps[v].push_back({horizontal_vp(cam, spec.planes[p]), Orientation::kHorizontal,
                           static_cast<int>(p)});
    }
    gt.vps[v].push_back({vertical_vp(cam), Orientation::kVertical, -1});

    struct Extent {
      double lo;
      double hi;
      int plane;
    };
    std::vector<Extent> extents;
    for (std::size_t p = 0; p < spec.planes.size(); ++p) {
      const PlaneSpec& plane = spec.planes[p];
      double lo = 1e300;
      double hi = -1e300;
      const std::array<Vec3, 4> outline = {
          plane_point(plane, 0, 0), plane_point(plane, plane.width, 0),
          plane_point(plane, plane.width, plane.height), plane_point(plane, 0, plane.height)};
      for (std::size_t e = 0; e < 4; ++e) {
        if (auto s = visible_part(cam, outline[e], outline[(e + 1) % 4])) {
          lo = std::min({lo, s->p.x(), s->q.x()});
          hi = std::max({hi, s->p.x(), s->q.x()});
        }
      }
      gt.plane_extent[v].emplace_back(lo, hi);
      if (lo < hi) extents.push_back({lo, hi, static_cast<int>(p)});
    }
    std::sort(extents.begin(), extents.end(),
              [](const Extent& a, const Extent& b) { return a.lo < b.lo; });
    int start = 0;
    for (std::size_t k = 0; k < extents.size(); ++k) {
      int end = cam.size.width;
      if (k + 1 < extents.size()) {
        const double a = extents[k].hi;
        const double b = extents[k + 1].lo;
        end = std::clamp(static_cast<int>(std::lround(0.5 * (a + b))), start + 1, cam.size.width);
      }
      if (end > start) gt.columns[v].push_back({start, end, extents[k].plane});
      start = end;
    }
  }

  // Detected boxes. Window n maps to one box index per view.
  std::array<std::vector<std::optional<std::size_t>>, 2> win_box;
  for (std::size_t v = 0; v < 2; ++v) {
    win_box[v].assign(windows.size(), std::nullopt);
    for (std::size_t n = 0; n < windows.size(); ++n) {
      if (!win_px[v][n]) continue;
      const auto& c = *win_px[v][n];
      // Draw the noise even for missed windows so detector settings do not
      // shift the random stream of later windows.
      DetBox b = jitter(hull_of(c), spec.noise, spec.detector.min_box_px, rng);
      b.score = 0.5 + 0.5 * unit(rng);
      if (max_edge_tilt_deg(c) > spec.detector.max_tilt_deg) continue;
      win_box[v][n] = out.views[v].boxes.size();
      out.views[v].boxes.push_back(b);
      gt.box_plane[v].push_back(windows[n].plane);
      gt.box_true_corners[v].push_back(c);
    }
  }
  for (std::size_t n = 0; n < windows.size(); ++n) {
    if (win_box[0][n] && win_box[1][n]) gt.box_pairs.push_back({*win_box[0][n], *win_box[1][n]});
  }

  // Distractors: window-sized boxes consistent with no planted homography.
  std::array<std::vector<QuadBox>, 2> distractors;
  for (std::size_t v = 0; v < 2; ++v) {
    const Camera& cam = spec.views[v];
    const std::size_t other = 1 - v;
    for (int k = 0; k < spec.noise.distractors; ++k) {
      bool placed = false;
      for (int attempt = 0; attempt < 2000 && !placed; ++attempt) {
        const double w = 40.0 + 60.0 * unit(rng);
        const double h = 40.0 + 60.0 * unit(rng);
        const double x = unit(rng) * (cam.size.width - w);
        const double y = unit(rng) * (cam.size.height - h);
        const DetBox b{x, y, x + w, y + h, 0.5 + 0.5 * unit(rng)};
        const QuadBox q(b);
        bool ok = true;
        for (const auto& existing : out.views[v].boxes) {
          if (quad_iou(q, QuadBox(existing.dilated(0.2))) > 0.0) ok = false;
        }
        for (std::size_t p = 0; p < spec.planes.size() && ok; ++p) {
          const Homography h12 = v == 0 ? gt.plane_h12[p] : gt.plane_h12[p].inverse();
          const auto proj = project(h12, q);
          if (!proj) continue;
          for (const auto& target : out.views[other].boxes) {
            if (quad_iou(*proj, QuadBox(target)) > 0.1) ok = false;
          }
          for (const auto& target : distractors[other]) {
            if (quad_iou(*proj, target) > 0.1) ok = false;
          }
        }
        if (!ok) continue;
        distractors[v].push_back(q);
        out.views[v].boxes.push_back(b);
        gt.box_plane[v].push_back(-1);
        gt.box_true_corners[v].push_back(q.corners());
        placed = true;
      }
      if (!placed) throw Error(ErrorCode::kGeneration, "generate: cannot place distractor box");
    }
  }

  // Detections in rectified frames, using the same estimation chain as the
  // pipeline so the frames agree.
  if (spec.detector.rectified_boxes) {
    for (std::size_t v = 0; v < 2; ++v) {
      const Camera& cam = spec.views[v];
      const auto segs = filter_short_segments(out.views[v].segments, spec.detector.min_seg_len);
      const auto vps = classify(estimate_vps(segs, spec.detector.vp), cam.size, spec.detector.vp);
      const PlaneLayout layout = rectify_planes(segs, vps, cam.size, spec.detector.seg);
      if (layout.rectifiers.empty()) continue;
      for (std::size_t n = 0; n < windows.size(); ++n) {
        if (!win_px[v][n]) continue;
        const auto& c = *win_px[v][n];
        const HomPoint truth_vp = horizontal_vp(cam, spec.planes[static_cast<std::size_t>(windows[n].plane)]);
        std::optional<std::size_t> plane_k;
        double best = 3.0;
        for (std::size_t k = 0; k < layout.horizontal.size(); ++k) {
          const double a = vp_angle_deg(vps[layout.horizontal[k]].point, truth_vp, cam);
          if (a < best) {
            best = a;
            plane_k = k;
          }
        }
        if (!plane_k || !layout.rectifiers[*plane_k]) continue;
        const Vec2 centroid = 0.25 * (c[0] + c[1] + c[2] + c[3]);
        const int col = std::clamp(static_cast<int>(centroid.x()), 0, cam.size.width - 1);
        const bool in_columns = std::any_of(layout.columns.begin(), layout.columns.end(), [&](const ColumnInterval& iv) {
          return iv.plane_id == static_cast<int>(*plane_k) && col >= iv.lo && col < iv.hi;
        });
        if (!in_columns) continue;
        const Homography& rh = layout.rectifiers[*plane_k]->h;
        QuadBox::Corners rc;
        bool ok = true;
        for (std::size_t k = 0; k < 4; ++k) {
          const auto m = rh.map(c[k]);
          ok = ok && m.has_value();
          if (m) rc[k] = *m;
        }
        if (!ok) continue;
        DetBox b = jitter(hull_of(rc), spec.noise, spec.detector.min_box_px, rng);
        b.score = 0.5 + 0.5 * unit(rng);
        out.views[v].quads.push_back({QuadBox(b), FrameTag{static_cast<int>(*plane_k)}});
      }
    }
  }

  // Feature points: window corners / centers / interiors, facade points and
  // off-plane clutter, each with a day descriptor.
  struct Point3 {
    Vec3 x;
    int plane;
    Descriptor desc;
  };
  std::vector<Point3> points;
  std::map<std::pair<int, int>, Descriptor> prototypes;  // (plane, slot)
  const auto prototype = [&](int plane, int slot) -> const Descriptor& {
    auto it = prototypes.find({plane, slot});
    if (it == prototypes.end()) {
      it = prototypes.emplace(std::make_pair(plane, slot), random_unit(rng, spec.descriptor_dim)).first;
    }
    return it->second;
  };
  const auto window_desc = [&](int plane, int slot, double rep) {
    const Descriptor unique = random_unit(rng, spec.descriptor_dim);
    if (rep >= 1.0) return Descriptor(prototype(plane, slot));
    if (rep <= 0.0) return unique;
    return Descriptor((rep * prototype(plane, slot) + (1.0 - rep) * unique).normalized());
  };
  for (const auto& w : windows) {
    const PlaneSpec& plane = spec.planes[static_cast<std::size_t>(w.plane)];
    const FeatureLayout& fl = plane.features;
    if (fl.window_corners) {
      const auto c3 = w.corners(plane);
      for (int k = 0; k < 4; ++k) {
        points.push_back({c3[static_cast<std::size_t>(k)], w.plane, window_desc(w.plane, k, fl.repetition)});
      }
    }
    if (fl.window_center) {
      points.push_back({plane_point(plane, w.u0 + 0.5 * w.w, w.v0 + 0.5 * w.h), w.plane,
                        window_desc(w.plane, 4, fl.repetition)});
    }
    for (int k = 0; k < fl.interior_per_window; ++k) {
      const double u = w.u0 + w.w * (0.15 + 0.7 * unit(rng));
      const double vv = w.v0 + w.h * (0.15 + 0.7 * unit(rng));
      points.push_back({plane_point(plane, u, vv), w.plane, window_desc(w.plane, 5 + k, fl.repetition)});
    }
  }
  for (std::size_t p = 0; p < spec.planes.size(); ++p) {
    const PlaneSpec& plane = spec.planes[p];
    for (int k = 0; k < plane.features.facade_points; ++k) {
      for (int attempt = 0; attempt < 50; ++attempt) {
        const double u = unit(rng) * plane.width;
        const double vv = unit(rng) * plane.height;
        const bool in_window = std::any_of(windows.begin(), windows.end(), [&](const Window& w) {
          return w.plane == static_cast<int>(p) && u >= w.u0 - 0.2 && u <= w.u0 + w.w + 0.2 &&
                 vv >= w.v0 - 0.2 && vv <= w.v0 + w.h + 0.2;
        });
        if (in_window) continue;
        points.push_back({plane_point(plane, u, vv), static_cast<int>(p),
                          random_unit(rng, spec.descriptor_dim)});
        break;
      }
    }
  }
  for (int k = 0; k < spec.noise.clutter_points; ++k) {
    const Vec3 x(-15.0 + 30.0 * unit(rng), -8.0 + 10.0 * unit(rng), 6.0 + 30.0 * unit(rng));
    points.push_back({x, -1, random_unit(rng, spec.descriptor_dim)});
  }

  // Visibility and spacing; a point is kept only if it is not crowding an
  // accepted point in either view.
  struct Kept {
    std::size_t point;
    std::array<std::optional<Vec2>, 2> px;
  };
  std::vector<Kept> kept;
  const double spacing2 = spec.min_feature_spacing_px * spec.min_feature_spacing_px;
  for (std::size_t n = 0; n < points.size(); ++n) {
    Kept k{n, {}};
    bool any = false;
    for (std::size_t v = 0; v < 2; ++v) {
      const auto pr = project_point(spec.views[v], points[n].x, 1.0);
      if (pr.in_front && pr.in_image) {
        k.px[v] = pr.px;
        any = true;
      }
    }
    if (!any) continue;
    bool crowded = false;
    for (const auto& other : kept) {
      for (std::size_t v = 0; v < 2 && !crowded; ++v) {
        if (k.px[v] && other.px[v] && (*k.px[v] - *other.px[v]).squaredNorm() < spacing2) {
          crowded = true;
        }
      }
      if (crowded) break;
    }
    if (!crowded) kept.push_back(k);
  }

  std::normal_distribution<double> kp_noise(0.0, std::max(spec.noise.keypoint_sigma_px, 0.0));
  std::normal_distribution<double> desc_noise(0.0, std::max(spec.noise.descriptor_sigma, 0.0));
  std::vector<std::optional<int>> id2(kept.size());
  for (std::size_t n = 0; n < kept.size(); ++n) {
    const auto& k = kept[n];
    if (!k.px[1]) continue;
    const Point3& pt = points[k.point];
    Descriptor night = pt.desc;
    if (unit(rng) < spec.noise.destroyed_fraction) {
      night = random_unit(rng, spec.descriptor_dim);
    } else if (spec.noise.descriptor_sigma > 0.0) {
      for (Eigen::Index c = 0; c < night.size(); ++c) night(c) += desc_noise(rng);
      night.normalize();
    }
    Vec2 pos = *k.px[1];
    if (spec.noise.keypoint_sigma_px > 0.0) pos += Vec2(kp_noise(rng), kp_noise(rng));
    const int id = static_cast<int>(out.views[1].features.size());
    id2[n] = id;
    out.views[1].features.push_back({id, pos, night});
  }
  for (std::size_t n = 0; n < kept.size(); ++n) {
    const auto& k = kept[n];
    if (!k.px[0]) continue;
    const Point3& pt = points[k.point];
    Vec2 pos = *k.px[0];
    if (spec.noise.keypoint_sigma_px > 0.0) pos += Vec2(kp_noise(rng), kp_noise(rng));
    const int id = static_cast<int>(out.views[0].features.size());
    out.views[0].features.push_back({id, pos, pt.desc});
    FeatureTruth t;
    t.plane = pt.plane;
    t.counterpart = id2[n];
    const auto pr = project_point(spec.views[1], pt.x);
    if (pr.in_front) t.position2 = pr.px;
    gt.features.push_back(t);
  }
  return out;
}

SceneSpec single_plane_scene(std::uint64_t seed, int rows, int cols) {
  std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  SceneSpec s;
  s.seed = seed;
  PlaneSpec plane;
  plane.windows.rows = rows;
  plane.windows.cols = cols;
  plane.width = plane.windows.left * 2 + cols * plane.windows.width + (cols - 1) * plane.windows.h_gap;
  plane.height = plane.windows.top * 2 + rows * plane.windows.height + (rows - 1) * plane.windows.v_gap;
  plane.yaw_deg = 20.0 * u(rng);
  const Vec3 center(2.0 * u(rng), -2.0 + u(rng), 18.0 + 3.0 * u(rng));
  plane.origin = center - 0.5 * plane.width * facade_dir(plane) - 0.5 * plane.height * Vec3::UnitY();
  s.planes.push_back(plane);
  s.views[0].yaw_deg = 5.0 * u(rng);
  s.views[0].pitch_deg = 2.5 + 2.5 * u(rng);
  s.views[1].position = Vec3(2.5 * u(rng), 0.3 * u(rng), -1.0 + 2.0 * u(rng));
  s.views[1].yaw_deg = s.views[0].yaw_deg + 8.0 * u(rng);
  s.views[1].pitch_deg = 2.5 + 2.5 * u(rng);
  return s;
}

SceneSpec two_facade_scene(std::uint64_t seed, double gap_px, std::optional<double> right_yaw_deg) {
  std::mt19937_64 rng(seed ^ 0xc2b2ae3d27d4eb4fULL);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  SceneSpec s;
  s.seed = seed;
  for (auto& cam : s.views) {
    cam.size = ImageSize{1000, 750};
    cam.focal = 700.0;
  }
  const Camera& cam = s.views[0];
  const double cx = 0.5 * cam.size.width;
  const double x_left = 380.0 + 180.0 * u01(rng);
  const double x_right = x_left + gap_px;
  const double yaw_a = 20.0 + 20.0 * u01(rng);
  const double yaw_b = right_yaw_deg.value_or(20.0 + 20.0 * u01(rng));
  const double depth_a = 14.0 + 6.0 * u01(rng);
  const double depth_b = 14.0 + 6.0 * u01(rng);

  // The two facades get different window grids; identical grids would let
  // one facade's windows map exactly onto the other's.
  const auto facade = [&](double yaw, bool alt) {
    PlaneSpec p;
    p.yaw_deg = yaw;
    p.windows.rows = 3;
    p.windows.cols = 4;
    p.windows.width = alt ? 1.0 : 1.2;
    p.windows.height = alt ? 1.8 : 1.5;
    p.windows.h_gap = alt ? 1.6 : 1.4;
    p.windows.v_gap = alt ? 1.0 : 1.3;
    p.windows.left = 0.9;
    p.windows.top = alt ? 0.6 : 0.8;
    p.width = 2 * p.windows.left + 4 * p.windows.width + 3 * p.windows.h_gap;
    p.height = 9.0;
    p.features.interior_per_window = 2;
    p.features.facade_points = 8;
    return p;
  };
  // Facade A ends at the ray through column x_left; facade B starts at the
  // ray through x_right. With zero pitch, vertical facade edges project to
  // image columns.
  PlaneSpec a = facade(yaw_a, false);
  const Vec3 ray_a((x_left - cx) / cam.focal, 0.0, 1.0);
  const Vec3 edge_a = depth_a * ray_a;
  a.origin = edge_a - a.width * facade_dir(a) + Vec3(0.0, -7.0, 0.0);
  PlaneSpec b = facade(-yaw_b, true);
  const Vec3 ray_b((x_right - cx) / cam.focal, 0.0, 1.0);
  const Vec3 edge_b = depth_b * ray_b;
  b.origin = edge_b + Vec3(0.0, -7.0, 0.0);
  s.planes = {a, b};
  s.views[1].position = Vec3(-1.0 + 2.0 * u01(rng), 0.0, -1.5 + 1.5 * u01(rng));
  s.views[1].yaw_deg = -4.0 + 8.0 * u01(rng);
  return s;
}

SceneSpec repeated_grid_scene(std::uint64_t seed, double r_search) {
  std::mt19937_64 rng(seed ^ 0x165667b19e3779f9ULL);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  SceneSpec s;
  s.seed = seed;
  PlaneSpec plane;
  plane.windows.rows = 5;
  plane.windows.cols = 5;
  plane.windows.width = 1.0;
  plane.windows.height = 1.2;
  // Pitch in the image must exceed 2 * r_search; at ~18 m and f = 1000 one
  // meter is ~55 px.
  const double pitch_m = std::max(2.0, 2.0 * (2.0 * r_search) / 40.0);
  plane.windows.h_gap = pitch_m - plane.windows.width;
  plane.windows.v_gap = pitch_m - plane.windows.height;
  plane.windows.left = 0.6;
  plane.windows.top = 0.6;
  plane.width = 2 * 0.6 + 5 * pitch_m - plane.windows.h_gap;
  plane.height = 2 * 0.6 + 5 * pitch_m - plane.windows.v_gap;
  plane.yaw_deg = 10.0 * u(rng);
  plane.features = FeatureLayout{false, true, 0, 0, 1.0};
  const Vec3 center(u(rng), -1.5, 18.0 + u(rng));
  plane.origin = center - 0.5 * plane.width * facade_dir(plane) - 0.5 * plane.height * Vec3::UnitY();
  s.planes.push_back(plane);
  s.views[0].pitch_deg = 2.0;
  s.views[1].position = Vec3(1.5 * u(rng), 0.0, -1.0 + u(rng));
  s.views[1].yaw_deg = 5.0 * u(rng);
  s.views[1].pitch_deg = 2.0 + u(rng);
  s.min_feature_spacing_px = 10.0;
  return s;
}

SceneSpec day_night_scene(std::uint64_t seed) {
  SceneSpec s = two_facade_scene(seed, 60.0);
  for (auto& p : s.planes) {
    p.features.repetition = 0.8;
    p.features.interior_per_window = 3;
    p.features.facade_points = 12;
  }
  s.noise.corner_sigma_px = 1.0;
  s.noise.descriptor_sigma = 0.5;  // mutual-NN precision below 0.5 on seeds 0..19
  s.noise.destroyed_fraction = 0.2;
  s.noise.outlier_fraction = 0.2;
  s.noise.distractors = 2;
  s.noise.segment_angle_sigma_deg = 0.2;
  s.noise.keypoint_sigma_px = 0.3;
  s.noise.clutter_points = 30;
  return s;
}

std::vector<Match> brute_force_nn(std::span<const Feature> feats1,
                                  std::span<const Feature> feats2) {
  const auto cosine = [](const Descriptor& a, const Descriptor& b) {
    double s = 0.0;
    for (Eigen::Index c = 0; c < a.size(); ++c) s += a(c) * b(c);
    return s;
  };
  std::vector<std::size_t> nn12(feats1.size(), 0);
  std::vector<std::size_t> nn21(feats2.size(), 0);
  std::vector<double> best12(feats1.size(), -2.0);
  std::vector<double> best21(feats2.size(), -2.0);
  for (std::size_t a = 0; a < feats1.size(); ++a) {
    for (std::size_t b = 0; b < feats2.size(); ++b) {
      const double s = cosine(feats1[a].desc, feats2[b].desc);
      if (s > best12[a]) {
        best12[a] = s;
        nn12[a] = b;
      }
      if (s > best21[b]) {
        best21[b] = s;
        nn21[b] = a;
      }
    }
  }
  std::vector<Match> out;
  if (feats2.empty()) return out;
  for (std::size_t a = 0; a < feats1.size(); ++a) {
    if (nn21[nn12[a]] == a) out.push_back({feats1[a].id, feats2[nn12[a]].id, best12[a], -1});
  }
  return out;
}

double raster_iou(const QuadBox& a, const QuadBox& b, int resolution) {
  const DetBox ha = a.bounding_box();
  const DetBox hb = b.bounding_box();
  const double x0 = std::min(ha.xmin, hb.xmin);
  const double y0 = std::min(ha.ymin, hb.ymin);
  const double x1 = std::max(ha.xmax, hb.xmax);
  const double y1 = std::max(ha.ymax, hb.ymax);
  const double dx = (x1 - x0) / resolution;
  const double dy = (y1 - y0) / resolution;
  std::size_t in_a = 0;
  std::size_t in_b = 0;
  std::size_t both = 0;
  for (int r = 0; r < resolution; ++r) {
    for (int c = 0; c < resolution; ++c) {
      const Vec2 p(x0 + (c + 0.5) * dx, y0 + (r + 0.5) * dy);
      const bool ia = a.contains(p);
      const bool ib = b.contains(p);
      in_a += ia ? 1 : 0;
      in_b += ib ? 1 : 0;
      both += (ia && ib) ? 1 : 0;
    }
  }
  const std::size_t uni = in_a + in_b - both;
  return uni == 0 ? 0.0 : static_cast<double>(both) / static_cast<double>(uni);
}

Score score(std::span<const Match> matches, std::span<const ObjectGroup> groups,
            std::span<const Feature> feats1, std::span<const Feature> feats2,
            const GroundTruth& truth, double tol, std::span<const QuadBox> boxes1) {
  std::unordered_map<int, std::size_t> idx1;
  std::unordered_map<int, std::size_t> idx2;
  for (std::size_t n = 0; n < feats1.size(); ++n) idx1[feats1[n].id] = n;
  for (std::size_t n = 0; n < feats2.size(); ++n) idx2[feats2[n].id] = n;

  Score sc;
  for (const auto& t : truth.features) sc.ground_truth_pairs += t.counterpart ? 1 : 0;
  sc.total = matches.size();
  std::vector<std::map<int, std::size_t>> group_planes(groups.size());
  std::vector<std::vector<Vec2>> group_points(groups.size());
  for (const auto& m : matches) {
    const auto a = idx1.find(m.i);
    const auto b = idx2.find(m.j);
    if (a == idx1.end() || b == idx2.end() || a->second >= truth.features.size()) continue;
    const FeatureTruth& t = truth.features[a->second];
    const bool ok = t.position2 && (*t.position2 - feats2[b->second].pos).norm() <= tol;
    if (ok && t.counterpart) ++sc.correct;
    if (m.group_id >= 0 && static_cast<std::size_t>(m.group_id) < groups.size()) {
      if (t.plane >= 0) ++group_planes[static_cast<std::size_t>(m.group_id)][t.plane];
      group_points[static_cast<std::size_t>(m.group_id)].push_back(feats1[a->second].pos);
    }
  }
  std::size_t correct_any = 0;
  for (const auto& m : matches) {
    const auto a = idx1.find(m.i);
    const auto b = idx2.find(m.j);
    if (a == idx1.end() || b == idx2.end() || a->second >= truth.features.size()) continue;
    const FeatureTruth& t = truth.features[a->second];
    if (t.position2 && (*t.position2 - feats2[b->second].pos).norm() <= tol) ++correct_any;
  }
  sc.precision = sc.total == 0 ? 1.0 : static_cast<double>(correct_any) / static_cast<double>(sc.total);
  sc.recall = sc.ground_truth_pairs == 0
                  ? 0.0
                  : static_cast<double>(sc.correct) / static_cast<double>(sc.ground_truth_pairs);

  for (std::size_t g = 0; g < groups.size(); ++g) {
    if (group_planes[g].empty()) {
      sc.homography_error.push_back(std::numeric_limits<double>::infinity());
      continue;
    }
    int plane = group_planes[g].begin()->first;
    for (const auto& [p, n] : group_planes[g]) {
      if (n > group_planes[g][plane]) plane = p;
    }
    std::vector<Vec2> pts;
    if (!boxes1.empty()) {
      for (const auto& pr : groups[g].pairs) {
        if (pr.i < boxes1.size()) {
          for (const auto& c : boxes1[pr.i].corners()) pts.push_back(c);
        }
      }
    }
    if (pts.empty()) pts = group_points[g];
    double err = 0.0;
    for (const auto& p : pts) {
      const auto est = groups[g].h.map(p);
      const auto ref = truth.plane_h12[static_cast<std::size_t>(plane)].map(p);
      if (!est || !ref) {
        err = std::numeric_limits<double>::infinity();
        break;
      }
      err = std::max(err, (*est - *ref).norm());
    }
    sc.homography_error.push_back(err);
  }
  return sc;
}

Score score(const MatchSet& matches, const SyntheticPair& scene, double tol,
            std::span<const QuadBox> boxes1) {
  return score(matches.matches, matches.groups, scene.views[0].features, scene.views[1].features,
               scene.truth, tol, boxes1);
}

}  // namespace objguide::synth
