#pragma once

#include <span>

#include "objguide/geom.hpp"
#include "objguide/vanishing.hpp"

namespace objguide {

// Indices into the VP list that a detection is aligned with.
struct BoxVps {
  std::size_t horizontal = 0;
  std::size_t vertical = 0;
  bool from_votes = false;  // false when the global fallback was used
};

// Segments whose midpoint lies in the box dilated by `dilation` about its
// center vote (weight = length) for the VP with the smallest residual angle,
// when that residual is within angle_thresh_deg. Returns the horizontal and
// vertical VPs with the largest vote mass, falling back to the best-supported
// VP of each orientation. Requires classified VPs; throws kMissingVertical or
// kMissingHorizontal when an orientation is absent.
BoxVps vote_box_vps(const DetBox& box, std::span<const LineSegment> segments,
                    std::span<const VanishingPoint> vps, double angle_thresh_deg,
                    double dilation = 0.5);

// Midpoint construction: each horizontal edge midpoint is joined to vp_h,
// each vertical edge midpoint to vp_v, and the quad corners are the four
// intersections. With both VPs at axis infinity the result is the input box
// exactly. Throws kDegenerateInput for coincident VPs or a VP inside the
// box, kAdjustmentFailed when a corner lands at infinity or the quad is not
// convex.
QuadBox adjust_box(const DetBox& box, const HomPoint& vp_h, const HomPoint& vp_v);

}  // namespace objguide
