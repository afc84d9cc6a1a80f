#pragma once

#include <optional>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "objguide/geom.hpp"

namespace objguide {

using Descriptor = Eigen::VectorXd;

/// Local feature: keypoint position plus a unit-norm descriptor.
struct Feature {
  int id = 0;
  Vec2 pos = Vec2::Zero();
  Descriptor desc;

  bool operator==(const Feature& o) const {
    return id == o.id && pos == o.pos && desc.size() == o.desc.size() && desc == o.desc;
  }
};

// Pooled appearance of a box. An empty vec is the no-descriptor sentinel;
// its similarity to anything is 0.
struct BoxDescriptor {
  std::optional<Descriptor> vec;

  double similarity(const BoxDescriptor& other) const;
};

struct BoxPair {
  std::size_t i = 0;  // box index in image 1
  std::size_t j = 0;  // box index in image 2

  bool operator==(const BoxPair&) const = default;
  auto operator<=>(const BoxPair&) const = default;
};

/// Box correspondences explained by one planar homography (image 1 -> 2).
/// `hypothesis` is the single-pair homography that selected the pairs; `h`
/// is the homography used downstream (equal to `hypothesis` until refined).
struct ObjectGroup {
  Homography hypothesis;
  Homography h;
  std::vector<BoxPair> pairs;
  bool refined = false;
};

struct MatchParams {
  std::size_t k_candidates = 5;
  double eps_iou = 0.5;
  double gem_p = 3.0;
  double r_search = 20.0;
  double sim_thresh = 0.0;
  double ratio = 0.8;
  double margin = 0.5;
};

// Generalized-mean pooling, re-normalized. Signed components are pooled as
// sign(mean) * GeM(|x|). Throws kNoDescriptor on empty input and
// kDimensionMismatch on mixed dimensions.
BoxDescriptor gem_pool(std::span<const Descriptor> descs, double p);

// GeM over the features whose position lies inside the quad; the sentinel
// when none do.
BoxDescriptor box_descriptor(const QuadBox& box, std::span<const Feature> feats, double p);
std::vector<BoxDescriptor> box_descriptors(std::span<const QuadBox> boxes,
                                           std::span<const Feature> feats, double p);

// Up to k indices of image-2 boxes by descending cosine similarity to box b
// of image 1, ties broken by lower index. `available2` (optional) masks out
// boxes already taken.
std::vector<std::size_t> candidates(std::size_t b, std::span<const BoxDescriptor> descs1,
                                    std::span<const BoxDescriptor> descs2, std::size_t k,
                                    const std::vector<bool>* available2 = nullptr);

// Homography from the four corners of q1 onto those of q2. Throws
// kEstimation for degenerate corners.
Homography hypothesis(const QuadBox& q1, const QuadBox& q2);

struct SupportPair {
  BoxPair pair;
  double iou = 0.0;
};

// One-to-one support of h: every image-1 box is projected and paired
// greedily by descending IoU with image-2 boxes, keeping IoU > eps_iou.
// Appearance is ignored. Optional masks restrict the boxes considered.
std::vector<SupportPair> support(const Homography& h, std::span<const QuadBox> boxes1,
                                 std::span<const QuadBox> boxes2, double eps_iou,
                                 const std::vector<bool>* available1 = nullptr,
                                 const std::vector<bool>* available2 = nullptr);

// Greedy sequence of homography hypotheses, each stored with its support
// (>= 2 pairs) whose boxes are then removed. Deterministic.
std::vector<ObjectGroup> greedy_match(std::span<const QuadBox> boxes1,
                                      std::span<const QuadBox> boxes2,
                                      std::span<const BoxDescriptor> descs1,
                                      std::span<const BoxDescriptor> descs2,
                                      const MatchParams& params);
std::vector<ObjectGroup> greedy_match(std::span<const QuadBox> boxes1,
                                      std::span<const QuadBox> boxes2,
                                      std::span<const Feature> feats1,
                                      std::span<const Feature> feats2,
                                      const MatchParams& params);

}  // namespace objguide
