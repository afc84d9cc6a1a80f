#pragma once

#include <optional>
#include <span>
#include <vector>

#include "objguide/geom.hpp"
#include "objguide/objmatch.hpp"

namespace objguide {

struct Match {
  int i = 0;  // feature id, image 1
  int j = 0;  // feature id, image 2
  double sim = 0.0;
  int group_id = -1;  // -1 for descriptor-only matches

  bool operator==(const Match&) const = default;
};

struct MatchSet {
  std::vector<Match> matches;
  std::vector<ObjectGroup> groups;
};

// Horizontal and vertical VPs of a group's plane in both images.
struct VpCorrespondence {
  HomPoint horizontal1;
  HomPoint vertical1;
  HomPoint horizontal2;
  HomPoint vertical2;
};

// Re-estimates the group homography from the corners of every supporting
// pair. When `vps` is given, the two VP correspondences are appended with
// weight `vp_weight` each (default: corner count / 4). On a degenerate
// system the group is returned unchanged with refined == false.
ObjectGroup refine_homography(const ObjectGroup& g, std::span<const QuadBox> boxes1,
                              std::span<const QuadBox> boxes2,
                              const std::optional<VpCorrespondence>& vps,
                              std::optional<double> vp_weight = std::nullopt);

// Union of the group's image-1 quads, each dilated by `margin` about its
// centroid.
class SupportRegion {
 public:
  SupportRegion(const ObjectGroup& g, std::span<const QuadBox> boxes1, double margin);

  bool contains(const Vec2& p) const;
  const std::vector<QuadBox>& quads() const { return quads_; }

 private:
  std::vector<QuadBox> quads_;
};

// Feature-id exclusion masks shared across the guided and additional steps.
struct Claims {
  std::vector<bool> image1;  // indexed by position in feats1
  std::vector<bool> image2;
};

// Guided matching for one group: every unclaimed image-1 feature inside the
// support region is projected through g.h and matched to the most similar
// unclaimed image-2 feature within r_search of the projection (sim >=
// sim_thresh). Conflicts go to the higher similarity, the loser retries its
// next candidate. Newly matched features are marked in `claims`.
std::vector<Match> guided_match(std::span<const Feature> feats1, std::span<const Feature> feats2,
                                const ObjectGroup& g, std::span<const QuadBox> boxes1,
                                int group_id, const MatchParams& params, Claims& claims);

// Mutual nearest neighbours in descriptor space among unclaimed features,
// filtered by the ratio test (best distance < ratio * second best, on the
// image-1 side). group_id is -1.
std::vector<Match> additional_matches(std::span<const Feature> feats1,
                                      std::span<const Feature> feats2, double ratio,
                                      Claims& claims);

}  // namespace objguide
