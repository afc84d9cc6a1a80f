#include "objguide/pipeline.hpp"

#include <map>

namespace objguide {

namespace {

bool needs_rectified(BoxMode mode) {
  return mode == BoxMode::kR || mode == BoxMode::kRA || mode == BoxMode::kOPlusR ||
         mode == BoxMode::kOPlusRA;
}

std::optional<std::size_t> descriptor_dim(std::span<const Feature> feats) {
  std::optional<std::size_t> dim;
  for (const auto& f : feats) {
    const auto d = static_cast<std::size_t>(f.desc.size());
    if (!dim) {
      dim = d;
    } else if (*dim != d) {
      throw Error(ErrorCode::kDimensionMismatch, "descriptor dimension differs within an image");
    }
  }
  return dim;
}

}  // namespace

ImageAnalysis analyze_image(const ImageInputs& in, const PipelineConfig& cfg) {
  ImageAnalysis a;
  a.segments = filter_short_segments(in.segments, cfg.min_seg_len);
  a.vps = classify(estimate_vps(a.segments, cfg.vp), in.size, cfg.vp);
  const auto vertical = find_vertical(a.vps);
  const bool have_vps = vertical.has_value() && !horizontal_indices(a.vps).empty();

  for (const auto& b : in.boxes) {
    const QuadBox ortho(b);
    a.streams.orthogonal.push_back(ortho);
    QuadBox adjusted = ortho;
    if (have_vps) {
      try {
        const BoxVps bv = vote_box_vps(b, a.segments, a.vps, cfg.vp.angle_thresh_deg);
        adjusted = adjust_box(b, a.vps[bv.horizontal].point, a.vps[bv.vertical].point);
      } catch (const Error&) {
        // keep the orthogonal box
      }
    }
    a.streams.adjusted.push_back(adjusted);
  }
  for (const auto& tq : in.quads) {
    if (tq.frame.rect_plane) continue;
    a.streams.orthogonal.push_back(tq.quad);
    a.streams.adjusted.push_back(tq.quad);
  }

  if (needs_rectified(cfg.mode) && have_vps) {
    a.layout = rectify_planes(a.segments, a.vps, in.size, cfg.seg);
    for (const auto& tq : in.quads) {
      if (!tq.frame.rect_plane) continue;
      const auto k = static_cast<std::size_t>(*tq.frame.rect_plane);
      if (*tq.frame.rect_plane < 0 || k >= a.layout.rectifiers.size() || !a.layout.rectifiers[k]) {
        continue;
      }
      const Rectifier& r = *a.layout.rectifiers[k];
      QuadBox back = QuadBox(tq.quad.bounding_box());
      try {
        back = backproject_quad(tq.quad.bounding_box(), r);
      } catch (const Error&) {
        continue;
      }
      a.streams.rectified.push_back(back);
      QuadBox readjusted = back;
      try {
        readjusted = adjust_box(back.bounding_box(), r.vp_h, r.vp_v);
      } catch (const Error&) {
        // keep the backprojected quad
      }
      a.streams.rectified_adjusted.push_back(readjusted);
    }
  }

  a.boxes = merge_detections(a.streams, cfg.mode);
  a.box_vps.reserve(a.boxes.size());
  for (const auto& q : a.boxes) {
    std::optional<BoxVps> bv;
    if (have_vps) {
      try {
        bv = vote_box_vps(q.bounding_box(), a.segments, a.vps, cfg.vp.angle_thresh_deg);
      } catch (const Error&) {
      }
    }
    a.box_vps.push_back(bv);
  }
  a.descriptors = box_descriptors(a.boxes, in.features, cfg.match.gem_p);
  return a;
}

std::optional<VpCorrespondence> group_vp_correspondence(const ObjectGroup& g,
                                                        const ImageAnalysis& image1,
                                                        const ImageAnalysis& image2) {
  const auto vote_of = [](const ImageAnalysis& image, std::size_t idx) -> const BoxVps* {
    return idx < image.box_vps.size() && image.box_vps[idx] ? &*image.box_vps[idx] : nullptr;
  };
  const auto majority = [](const std::map<std::size_t, std::size_t>& votes) {
    std::size_t best = votes.begin()->first;
    for (const auto& [k, n] : votes) {
      if (n > votes.at(best)) best = k;
    }
    return best;
  };

  std::map<std::size_t, std::size_t> votes1;
  for (const auto& pr : g.pairs) {
    if (const BoxVps* v = vote_of(image1, pr.i)) ++votes1[v->horizontal];
  }
  if (votes1.empty()) return std::nullopt;
  const std::size_t h1 = majority(votes1);

  std::map<std::size_t, std::size_t> votes2;
  std::optional<std::size_t> v1;
  std::optional<std::size_t> v2;
  for (const auto& pr : g.pairs) {
    const BoxVps* a = vote_of(image1, pr.i);
    const BoxVps* b = vote_of(image2, pr.j);
    if (!a || !b || a->horizontal != h1) continue;
    ++votes2[b->horizontal];
    v1 = a->vertical;
    v2 = b->vertical;
  }
  if (votes2.empty()) return std::nullopt;
  const std::size_t h2 = majority(votes2);
  return VpCorrespondence{image1.vps[h1].point, image1.vps[*v1].point, image2.vps[h2].point,
                          image2.vps[*v2].point};
}

PairResult match_pair(const ImageInputs& in1, const ImageInputs& in2, const PipelineConfig& cfg) {
  const auto d1 = descriptor_dim(in1.features);
  const auto d2 = descriptor_dim(in2.features);
  if (d1 && d2 && *d1 != *d2) {
    throw Error(ErrorCode::kDimensionMismatch, "descriptor dimensions differ between images");
  }

  PairResult result;
  result.image1 = analyze_image(in1, cfg);
  result.image2 = analyze_image(in2, cfg);
  const ImageAnalysis& a1 = result.image1;
  const ImageAnalysis& a2 = result.image2;

  auto groups = greedy_match(a1.boxes, a2.boxes, a1.descriptors, a2.descriptors, cfg.match);
  for (auto& g : groups) {
    std::optional<VpCorrespondence> vpc;
    if (cfg.vp_constraint) {
      vpc = group_vp_correspondence(g, a1, a2);
    }
    g = refine_homography(g, a1.boxes, a2.boxes, vpc, cfg.vp_weight);
  }

  Claims claims{std::vector<bool>(in1.features.size(), false),
                std::vector<bool>(in2.features.size(), false)};
  MatchSet& ms = result.matches;
  for (std::size_t gi = 0; gi < groups.size(); ++gi) {
    auto guided = guided_match(in1.features, in2.features, groups[gi], a1.boxes,
                               static_cast<int>(gi), cfg.match, claims);
    result.counts.guided += guided.size();
    ms.matches.insert(ms.matches.end(), guided.begin(), guided.end());
  }
  if (cfg.additional_features) {
    auto extra = additional_matches(in1.features, in2.features, cfg.match.ratio, claims);
    result.counts.additional = extra.size();
    ms.matches.insert(ms.matches.end(), extra.begin(), extra.end());
  }

  result.counts.vps1 = a1.vps.size();
  result.counts.vps2 = a2.vps.size();
  result.counts.boxes1 = a1.boxes.size();
  result.counts.boxes2 = a2.boxes.size();
  result.counts.groups = groups.size();
  for (const auto& g : groups) result.counts.refined += g.refined ? 1 : 0;
  ms.groups = std::move(groups);
  return result;
}

}  // namespace objguide
