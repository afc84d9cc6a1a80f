#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "objguide/geom.hpp"
#include "objguide/guided.hpp"
#include "objguide/objmatch.hpp"
#include "objguide/pipeline.hpp"
#include "objguide/rectify.hpp"
#include "objguide/vanishing.hpp"

namespace objguide::synth {

// World frame: x right, y down, z forward (matches image axes at zero
// rotation). Lengths in meters.
struct Camera {
  double focal = 1000.0;
  ImageSize size{1920, 1080};
  Vec3 position = Vec3::Zero();
  double yaw_deg = 0.0;    // about world y
  double pitch_deg = 0.0;  // about camera x, positive looks up
};

struct WindowGrid {
  int rows = 3;
  int cols = 4;
  double width = 1.2;
  double height = 1.5;
  double h_gap = 1.0;  // horizontal spacing between windows
  double v_gap = 1.2;
  double left = 0.8;   // offset of the first window from the facade origin
  double top = 0.8;
};

struct FeatureLayout {
  bool window_corners = true;
  bool window_center = false;
  int interior_per_window = 2;
  int facade_points = 10;
  // 0: every point has its own descriptor; 1: all windows share identical
  // descriptors slot by slot (repeated texture).
  double repetition = 0.0;
};

/// A vertical facade: origin is its top-left corner, it extends `width`
/// along (cos yaw, 0, sin yaw) and `height` downward.
struct PlaneSpec {
  Vec3 origin = Vec3(-5.0, -6.0, 20.0);
  double yaw_deg = 0.0;
  double width = 10.0;
  double height = 8.0;
  WindowGrid windows;
  FeatureLayout features;
  bool facade_lines = true;
};

struct NoiseSpec {
  double corner_sigma_px = 0.0;      // on detected box coordinates
  double corner_clip_px = 0.0;       // |noise| bound per coordinate, 0 = none
  double descriptor_sigma = 0.0;     // per component, view 2 only
  double destroyed_fraction = 0.0;   // view-2 descriptors replaced outright
  double outlier_fraction = 0.0;     // fraction of all segments
  int distractors = 0;               // off-plane boxes per view
  double segment_angle_sigma_deg = 0.0;
  double keypoint_sigma_px = 0.0;
  int clutter_points = 0;            // off-plane features
};

/// Simulated detector. The original-image detector misses windows whose
/// edges tilt more than max_tilt_deg; the rectified-frame detector sees every
/// window of a rectified plane.
struct DetectorSpec {
  double max_tilt_deg = 90.0;
  bool rectified_boxes = false;
  double min_box_px = 8.0;
  // Parameters the simulated rectified detector shares with the pipeline so
  // that the rectified frames agree.
  VpParams vp;
  SegParams seg;
  double min_seg_len = 20.0;
};

struct SceneSpec {
  std::uint64_t seed = 0;
  std::array<Camera, 2> views;
  std::vector<PlaneSpec> planes;
  NoiseSpec noise;
  DetectorSpec detector;
  int descriptor_dim = 128;
  double min_feature_spacing_px = 25.0;
};

struct TrueVp {
  HomPoint point;
  Orientation orientation = Orientation::kUnknown;
  int plane = -1;  // -1 for the shared vertical
};

struct FeatureTruth {
  int plane = -1;                 // -1 for clutter
  std::optional<int> counterpart; // feature id in view 2
  std::optional<Vec2> position2;  // noise-free position in view 2
};

struct GroundTruth {
  std::vector<BoxPair> box_pairs;                   // indices into views[v].boxes
  std::array<std::vector<int>, 2> box_plane;        // plane per box, -1 distractor
  std::array<std::vector<QuadBox::Corners>, 2> box_true_corners;  // per box (windows only)
  std::vector<FeatureTruth> features;               // per view-1 feature (by index)
  std::array<std::vector<TrueVp>, 2> vps;
  std::array<std::vector<ColumnInterval>, 2> columns;  // plane_id = plane index
  std::array<std::vector<std::pair<double, double>>, 2> plane_extent;  // image x-range per plane
  std::vector<Homography> plane_h12;                // per plane, view 1 -> view 2
  std::array<std::vector<Homography>, 2> plane_h;   // plane coords (m) -> view
};

struct SyntheticPair {
  std::array<ImageInputs, 2> views;
  GroundTruth truth;
};

// 3x4 projection matrix K [R | -R C].
Eigen::Matrix<double, 3, 4> projection(const Camera& cam);
Homography plane_homography(const Camera& cam, const PlaneSpec& plane);
HomPoint horizontal_vp(const Camera& cam, const PlaneSpec& plane);
HomPoint vertical_vp(const Camera& cam);

// Deterministic in spec.seed. Throws kGeneration when a plane faces away
// from a camera or the layout cannot be realized.
SyntheticPair generate(const SceneSpec& spec);

// Scene presets used by tests, the CLI and benchmarks.
SceneSpec single_plane_scene(std::uint64_t seed, int rows = 2, int cols = 3);
// Corner building: facade 0 on the left, facade 1 on the right, separated in
// view 1 by an empty band of gap_px columns. Zero pitch in both views.
SceneSpec two_facade_scene(std::uint64_t seed, double gap_px = 40.0,
                           std::optional<double> right_yaw_deg = std::nullopt);
SceneSpec repeated_grid_scene(std::uint64_t seed, double r_search = 20.0);
SceneSpec day_night_scene(std::uint64_t seed);

// Exhaustive mutual nearest neighbour by cosine similarity (ties to the
// lower index). The unguided baseline.
std::vector<Match> brute_force_nn(std::span<const Feature> feats1,
                                  std::span<const Feature> feats2);

// IoU by sampling cell centers of a resolution x resolution grid laid over
// the joint bounding box of both quads.
double raster_iou(const QuadBox& a, const QuadBox& b, int resolution);

struct Score {
  double precision = 1.0;
  double recall = 0.0;
  std::size_t correct = 0;
  std::size_t total = 0;
  std::size_t ground_truth_pairs = 0;
  std::vector<double> homography_error;  // per group, px
};

// A match is correct when the true view-2 position of feature i lies within
// tol of feature j. Homography error is the max corner discrepancy between
// the group homography and the planted one of the group's majority plane,
// over the group's image-1 boxes (when given) or its matched features.
Score score(const MatchSet& matches, const SyntheticPair& scene, double tol,
            std::span<const QuadBox> boxes1 = {});
Score score(std::span<const Match> matches, std::span<const ObjectGroup> groups,
            std::span<const Feature> feats1, std::span<const Feature> feats2,
            const GroundTruth& truth, double tol, std::span<const QuadBox> boxes1 = {});

}  // namespace objguide::synth
