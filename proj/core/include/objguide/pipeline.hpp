#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "objguide/boxes.hpp"
#include "objguide/guided.hpp"
#include "objguide/objmatch.hpp"
#include "objguide/rectify.hpp"
#include "objguide/vanishing.hpp"

namespace objguide {

// Coordinate frame of an ingested quad: the original image, or the
// rectified frame of one plane (plane_id = horizontal VP index).
struct FrameTag {
  std::optional<int> rect_plane;  // nullopt = original

  bool operator==(const FrameTag&) const = default;
};

struct TaggedQuad {
  QuadBox quad;
  FrameTag frame;

  bool operator==(const TaggedQuad&) const = default;
};

/// Everything the engine consumes for one image.
struct ImageInputs {
  ImageSize size;
  std::vector<LineSegment> segments;
  std::vector<DetBox> boxes;       // axis-aligned detections, original frame
  std::vector<TaggedQuad> quads;   // extra detections (e.g. on rectified images)
  std::vector<Feature> features;
};

struct PipelineConfig {
  VpParams vp;
  SegParams seg;
  MatchParams match;
  BoxMode mode = BoxMode::kOPlusRA;
  bool vp_constraint = true;        // VP rows in the refinement DLT
  bool additional_features = true;  // descriptor-only matches after guidance
  double min_seg_len = 20.0;
  std::optional<double> vp_weight;  // default: corner count / 4
};

/// Per-image intermediate state, kept for reports and tests.
struct ImageAnalysis {
  std::vector<LineSegment> segments;  // after length filtering
  std::vector<VanishingPoint> vps;
  PlaneLayout layout;
  DetectionStreams streams;
  std::vector<QuadBox> boxes;  // merged per mode
  std::vector<std::optional<BoxVps>> box_vps;
  std::vector<BoxDescriptor> descriptors;
};

// VP estimation, rectification and box derivation for one image.
ImageAnalysis analyze_image(const ImageInputs& in, const PipelineConfig& cfg);

struct StageCounts {
  std::size_t vps1 = 0;
  std::size_t vps2 = 0;
  std::size_t boxes1 = 0;
  std::size_t boxes2 = 0;
  std::size_t groups = 0;
  std::size_t refined = 0;
  std::size_t guided = 0;
  std::size_t additional = 0;
};

struct PairResult {
  MatchSet matches;
  StageCounts counts;
  ImageAnalysis image1;
  ImageAnalysis image2;
};

// Full pipeline: VPs -> boxes (per mode) -> object groups -> refinement ->
// guided matching in group order -> additional matches. Deterministic in
// cfg.vp.seed. Throws kDimensionMismatch for inconsistent descriptors.
PairResult match_pair(const ImageInputs& in1, const ImageInputs& in2, const PipelineConfig& cfg);

// VP correspondence of a group: the majority horizontal VP over its
// image-1 boxes, paired with the majority horizontal VP among the image-2
// partners of those boxes, plus the vertical VPs. Ties go to the lower VP
// index. std::nullopt when either side lacks votes.
std::optional<VpCorrespondence> group_vp_correspondence(const ObjectGroup& g,
                                                        const ImageAnalysis& image1,
                                                        const ImageAnalysis& image2);

}  // namespace objguide
