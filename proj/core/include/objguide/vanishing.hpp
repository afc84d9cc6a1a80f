#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "objguide/geom.hpp"

namespace objguide {

enum class Orientation { kUnknown, kVertical, kHorizontal };

const char* to_string(Orientation o);

struct VanishingPoint {
  HomPoint point;
  std::vector<std::size_t> inliers;  // indices into the estimation input
  Orientation orientation = Orientation::kUnknown;

  std::size_t support() const { return inliers.size(); }

  bool operator==(const VanishingPoint&) const = default;
};

struct VpParams {
  double angle_thresh_deg = 2.0;
  std::size_t min_inliers = 5;
  std::size_t max_iterations = 2000;
  std::size_t max_vps = 5;
  double vertical_cone_deg = 20.0;
  std::uint64_t seed = 0;
};

// Intersection of the two supporting lines. Throws kDegenerateInput for
// collinear segments.
HomPoint vp_from_pair(const LineSegment& a, const LineSegment& b);

// Angle in degrees, in [0, 90], between the segment and the direction from
// its midpoint toward v. Finite and infinite v are handled by the same
// homogeneous formula; a midpoint on top of v gives 0.
double residual_angle(const LineSegment& s, const HomPoint& v);

// Sequential RANSAC over 2-segment samples (length-biased). Each consensus
// is refined by robustly reweighted null-space fits that alternate with
// inlier re-collection. Output is ordered by non-increasing support; inlier
// sets are disjoint. Deterministic in params.seed.
std::vector<VanishingPoint> estimate_vps(std::span<const LineSegment> segments,
                                         const VpParams& params);

// Least-squares VP of the given segments (weighted by length); exposed for
// tests and for refinement of externally chosen inlier sets.
HomPoint refine_vp(std::span<const LineSegment> segments);

// Marks the best-supported VP within vertical_cone of the image y axis as
// THE vertical; everything else becomes horizontal.
std::vector<VanishingPoint> classify(std::vector<VanishingPoint> vps, const ImageSize& image,
                                     const VpParams& params);

std::optional<std::size_t> find_vertical(std::span<const VanishingPoint> vps);
std::vector<std::size_t> horizontal_indices(std::span<const VanishingPoint> vps);

}  // namespace objguide
