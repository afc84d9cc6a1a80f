#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "objguide/geom.hpp"
#include "objguide/vanishing.hpp"

namespace objguide {

/// Per-plane rectifying homography.
///
/// Built as H = S * B * P: P sends the vanishing line to infinity (scaled so
/// the image center keeps w = 1), B is the linear map taking the two
/// vanishing directions onto the +x and +y axes, and S is the anisotropic
/// scale + translation that best keeps segment endpoints in place.
/// Invariant: H * vp_h ~ (1, 0, 0) and H * vp_v ~ (0, 1, 0).
struct Rectifier {
  Homography h;
  HomPoint vp_h;
  HomPoint vp_v;
  int plane_id = 0;
};

struct ColumnInterval {
  int lo = 0;  // [lo, hi)
  int hi = 0;
  int plane_id = 0;

  bool operator==(const ColumnInterval&) const = default;
};

struct SegParams {
  double majority_thresh = 0.5;
  double ratio_thresh = 1.5;
  double softmax_temp_deg = 2.0;
};

// Throws kRectifierDegenerate when the vanishing line passes through the
// image center, the VPs coincide, or no endpoint lies on the image side of
// the vanishing line.
Rectifier build_rectifier(const HomPoint& vp_h, const HomPoint& vp_v,
                          std::span<const LineSegment> segments, const ImageSize& image,
                          int plane_id = 0);

// Endpoint sum of squared displacements for a given rectifier; the quantity
// the S stage minimizes.
double endpoint_ssd(const Homography& h, std::span<const LineSegment> segments);

// 1D labeling of image columns by horizontal VP (plane_id = index into
// horizontal_vps). Output partitions [0, width) in order. Throws
// kMissingHorizontal when horizontal_vps is empty.
std::vector<ColumnInterval> segment_columns(std::span<const LineSegment> segments,
                                            std::span<const VanishingPoint> horizontal_vps,
                                            int width, const SegParams& params = {});

// Maps a box detected in r's rectified frame back to the original image.
// Throws kBackprojection if a corner lands at infinity.
QuadBox backproject_quad(const DetBox& box, const Rectifier& r);

/// Per-plane rectification of one image: column labels plus one rectifier
/// per horizontal VP (std::nullopt where the rectifier is degenerate).
struct PlaneLayout {
  std::vector<std::size_t> horizontal;  // indices of horizontal VPs in the VP list
  std::optional<std::size_t> vertical;
  std::vector<ColumnInterval> columns;
  std::vector<std::optional<Rectifier>> rectifiers;  // indexed by plane_id
};

// Runs segmentation and builds the per-plane rectifiers. Each plane is fit
// on the inliers of its horizontal VP and of the vertical VP whose midpoints
// fall in that plane's columns. Returns an empty layout when there is no
// vertical or no horizontal VP.
PlaneLayout rectify_planes(std::span<const LineSegment> segments,
                           std::span<const VanishingPoint> vps, const ImageSize& image,
                           const SegParams& params = {});

enum class BoxMode { kO, kOA, kR, kRA, kOPlusR, kOPlusRA };

std::string to_string(BoxMode mode);
std::optional<BoxMode> parse_box_mode(std::string_view text);

struct DetectionStreams {
  std::vector<QuadBox> orthogonal;
  std::vector<QuadBox> adjusted;
  std::vector<QuadBox> rectified;
  std::vector<QuadBox> rectified_adjusted;
};

// Union of the streams selected by mode. Boxes from the second stream that
// overlap a kept box with IoU >= dedup_iou are merged into it (at most one
// per kept box), keeping the higher score.
std::vector<QuadBox> merge_detections(const DetectionStreams& streams, BoxMode mode,
                                      double dedup_iou = 0.8);

}  // namespace objguide
