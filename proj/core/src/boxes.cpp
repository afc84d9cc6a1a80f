#include "objguide/boxes.hpp"

#include <vector>

namespace objguide {

namespace {

std::optional<std::size_t> best_supported(std::span<const VanishingPoint> vps, Orientation o) {
  std::optional<std::size_t> best;
  for (std::size_t i = 0; i < vps.size(); ++i) {
    if (vps[i].orientation != o) continue;
    if (!best || vps[i].support() > vps[*best].support()) best = i;
  }
  return best;
}

}  // namespace

BoxVps vote_box_vps(const DetBox& box, std::span<const LineSegment> segments,
                    std::span<const VanishingPoint> vps, double angle_thresh_deg,
                    double dilation) {
  const auto global_h = best_supported(vps, Orientation::kHorizontal);
  const auto global_v = best_supported(vps, Orientation::kVertical);
  if (!global_v) throw Error(ErrorCode::kMissingVertical, "no vertical vanishing point");
  if (!global_h) throw Error(ErrorCode::kMissingHorizontal, "no horizontal vanishing point");

  const DetBox around = box.dilated(dilation);
  std::vector<double> mass(vps.size(), 0.0);
  for (const auto& s : segments) {
    if (!around.contains(s.midpoint())) continue;
    std::optional<std::size_t> arg;
    double best = angle_thresh_deg;
    for (std::size_t k = 0; k < vps.size(); ++k) {
      const double r = residual_angle(s, vps[k].point);
      if (r <= best && (!arg || r < best)) {
        best = r;
        arg = k;
      }
    }
    if (arg) mass[*arg] += s.length();
  }

  BoxVps out{*global_h, *global_v, false};
  double best_h = 0.0;
  double best_v = 0.0;
  bool voted_h = false;
  bool voted_v = false;
  for (std::size_t k = 0; k < vps.size(); ++k) {
    if (!(mass[k] > 0.0)) continue;
    if (vps[k].orientation == Orientation::kHorizontal && mass[k] > best_h) {
      best_h = mass[k];
      out.horizontal = k;
      voted_h = true;
    } else if (vps[k].orientation == Orientation::kVertical && mass[k] > best_v) {
      best_v = mass[k];
      out.vertical = k;
      voted_v = true;
    }
  }
  out.from_votes = voted_h && voted_v;
  return out;
}

QuadBox adjust_box(const DetBox& box, const HomPoint& vp_h, const HomPoint& vp_v) {
  if (same_up_to_scale(vp_h.vec(), vp_v.vec())) {
    throw Error(ErrorCode::kDegenerateInput, "adjust_box: vanishing points coincide");
  }
  for (const HomPoint* vp : {&vp_h, &vp_v}) {
    const auto px = vp->pixel();
    if (px && box.contains(*px)) {
      throw Error(ErrorCode::kDegenerateInput, "adjust_box: vanishing point inside the box");
    }
  }
  const double xm = 0.5 * (box.xmin + box.xmax);
  const double ym = 0.5 * (box.ymin + box.ymax);
  const HomLine top = line_through(HomPoint(xm, box.ymin, 1.0), vp_h);
  const HomLine bottom = line_through(HomPoint(xm, box.ymax, 1.0), vp_h);
  const HomLine left = line_through(HomPoint(box.xmin, ym, 1.0), vp_v);
  const HomLine right = line_through(HomPoint(box.xmax, ym, 1.0), vp_v);

  QuadBox::Corners corners;
  const std::pair<const HomLine*, const HomLine*> order[4] = {
      {&top, &left}, {&top, &right}, {&bottom, &right}, {&bottom, &left}};
  for (std::size_t i = 0; i < 4; ++i) {
    HomPoint c;
    try {
      c = intersect(*order[i].first, *order[i].second);
    } catch (const Error&) {
      throw Error(ErrorCode::kAdjustmentFailed, "adjust_box: edge lines coincide");
    }
    const auto px = c.pixel();
    if (!px) throw Error(ErrorCode::kAdjustmentFailed, "adjust_box: corner at infinity");
    corners[i] = *px;
  }
  auto quad = QuadBox::try_make(corners, box.score);
  if (!quad) throw Error(ErrorCode::kAdjustmentFailed, "adjust_box: adjusted quad is not convex");
  return *quad;
}

}  // namespace objguide
