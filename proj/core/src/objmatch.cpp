#include "objguide/objmatch.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace objguide {

double BoxDescriptor::similarity(const BoxDescriptor& other) const {
  if (!vec || !other.vec || vec->size() != other.vec->size()) return 0.0;
  return vec->dot(*other.vec);
}

BoxDescriptor gem_pool(std::span<const Descriptor> descs, double p) {
  if (descs.empty()) throw Error(ErrorCode::kNoDescriptor, "gem_pool: no descriptors");
  if (!(p >= 1.0)) throw Error(ErrorCode::kDegenerateInput, "gem_pool: p must be >= 1");
  const Eigen::Index dim = descs.front().size();
  Descriptor mean = Descriptor::Zero(dim);
  Descriptor power = Descriptor::Zero(dim);
  for (const auto& d : descs) {
    if (d.size() != dim) {
      throw Error(ErrorCode::kDimensionMismatch, "gem_pool: descriptor dimensions differ");
    }
    mean += d;
    power += d.cwiseAbs().array().pow(p).matrix();
  }
  const double n = static_cast<double>(descs.size());
  Descriptor out(dim);
  for (Eigen::Index c = 0; c < dim; ++c) {
    const double g = std::pow(power(c) / n, 1.0 / p);
    out(c) = mean(c) < 0.0 ? -g : g;
  }
  const double norm = out.norm();
  if (!(norm > 0.0)) return BoxDescriptor{};
  return BoxDescriptor{out / norm};
}

BoxDescriptor box_descriptor(const QuadBox& box, std::span<const Feature> feats, double p) {
  std::vector<Descriptor> inside;
  for (const auto& f : feats) {
    if (box.contains(f.pos)) inside.push_back(f.desc);
  }
  if (inside.empty()) return BoxDescriptor{};
  return gem_pool(inside, p);
}

std::vector<BoxDescriptor> box_descriptors(std::span<const QuadBox> boxes,
                                           std::span<const Feature> feats, double p) {
  std::vector<BoxDescriptor> out;
  out.reserve(boxes.size());
  for (const auto& b : boxes) out.push_back(box_descriptor(b, feats, p));
  return out;
}

std::vector<std::size_t> candidates(std::size_t b, std::span<const BoxDescriptor> descs1,
                                    std::span<const BoxDescriptor> descs2, std::size_t k,
                                    const std::vector<bool>* available2) {
  std::vector<std::pair<double, std::size_t>> scored;
  for (std::size_t j = 0; j < descs2.size(); ++j) {
    if (available2 && !(*available2)[j]) continue;
    scored.emplace_back(descs1[b].similarity(descs2[j]), j);
  }
  std::stable_sort(scored.begin(), scored.end(), [](const auto& a, const auto& c) {
    return a.first > c.first || (a.first == c.first && a.second < c.second);
  });
  std::vector<std::size_t> out;
  for (std::size_t n = 0; n < scored.size() && n < k; ++n) out.push_back(scored[n].second);
  return out;
}

Homography hypothesis(const QuadBox& q1, const QuadBox& q2) {
  return dlt_homography(q1.corners(), q2.corners());
}

namespace {

bool boxes_overlap(const DetBox& a, const DetBox& b) {
  return a.xmin < b.xmax && b.xmin < a.xmax && a.ymin < b.ymax && b.ymin < a.ymax;
}

}  // namespace

std::vector<SupportPair> support(const Homography& h, std::span<const QuadBox> boxes1,
                                 std::span<const QuadBox> boxes2, double eps_iou,
                                 const std::vector<bool>* available1,
                                 const std::vector<bool>* available2) {
  std::vector<DetBox> hull2;
  hull2.reserve(boxes2.size());
  for (const auto& b : boxes2) hull2.push_back(b.bounding_box());

  std::vector<SupportPair> cands;
  for (std::size_t i = 0; i < boxes1.size(); ++i) {
    if (available1 && !(*available1)[i]) continue;
    const auto projected = project(h, boxes1[i]);
    if (!projected) continue;
    const DetBox hull1 = projected->bounding_box();
    for (std::size_t j = 0; j < boxes2.size(); ++j) {
      if (available2 && !(*available2)[j]) continue;
      if (!boxes_overlap(hull1, hull2[j])) continue;
      const double iou = quad_iou(*projected, boxes2[j]);
      if (iou > eps_iou) cands.push_back({{i, j}, iou});
    }
  }
  std::sort(cands.begin(), cands.end(), [](const SupportPair& a, const SupportPair& b) {
    return a.iou > b.iou || (a.iou == b.iou && a.pair < b.pair);
  });
  std::vector<bool> used1(boxes1.size(), false);
  std::vector<bool> used2(boxes2.size(), false);
  std::vector<SupportPair> out;
  for (const auto& c : cands) {
    if (used1[c.pair.i] || used2[c.pair.j]) continue;
    used1[c.pair.i] = true;
    used2[c.pair.j] = true;
    out.push_back(c);
  }
  std::sort(out.begin(), out.end(),
            [](const SupportPair& a, const SupportPair& b) { return a.pair < b.pair; });
  return out;
}

std::vector<ObjectGroup> greedy_match(std::span<const QuadBox> boxes1,
                                      std::span<const QuadBox> boxes2,
                                      std::span<const BoxDescriptor> descs1,
                                      std::span<const BoxDescriptor> descs2,
                                      const MatchParams& params) {
  if (descs1.size() != boxes1.size() || descs2.size() != boxes2.size()) {
    throw Error(ErrorCode::kDimensionMismatch, "greedy_match: one descriptor per box required");
  }
  std::vector<bool> avail1(boxes1.size(), true);
  std::vector<bool> avail2(boxes2.size(), true);
  std::vector<ObjectGroup> groups;

  struct Best {
    std::vector<SupportPair> pairs;
    double iou_sum = 0.0;
    BoxPair seed;
    std::optional<Homography> h;
  };

  while (true) {
    Best best;
    for (std::size_t i = 0; i < boxes1.size(); ++i) {
      if (!avail1[i]) continue;
      for (std::size_t j : candidates(i, descs1, descs2, params.k_candidates, &avail2)) {
        Homography h;
        try {
          h = hypothesis(boxes1[i], boxes2[j]);
        } catch (const Error&) {
          continue;
        }
        auto sup = support(h, boxes1, boxes2, params.eps_iou, &avail1, &avail2);
        const double iou_sum = std::accumulate(
            sup.begin(), sup.end(), 0.0, [](double acc, const SupportPair& s) { return acc + s.iou; });
        const BoxPair seed{i, j};
        const bool better =
            !best.h || sup.size() > best.pairs.size() ||
            (sup.size() == best.pairs.size() &&
             (iou_sum > best.iou_sum || (iou_sum == best.iou_sum && seed < best.seed)));
        if (better) best = Best{std::move(sup), iou_sum, seed, h};
      }
    }
    if (!best.h || best.pairs.size() < 2) break;

    ObjectGroup g{*best.h, *best.h, {}, false};
    for (const auto& s : best.pairs) {
      g.pairs.push_back(s.pair);
      avail1[s.pair.i] = false;
      avail2[s.pair.j] = false;
    }
    groups.push_back(std::move(g));
  }
  return groups;
}

std::vector<ObjectGroup> greedy_match(std::span<const QuadBox> boxes1,
                                      std::span<const QuadBox> boxes2,
                                      std::span<const Feature> feats1,
                                      std::span<const Feature> feats2,
                                      const MatchParams& params) {
  const auto d1 = box_descriptors(boxes1, feats1, params.gem_p);
  const auto d2 = box_descriptors(boxes2, feats2, params.gem_p);
  return greedy_match(boxes1, boxes2, d1, d2, params);
}

}  // namespace objguide
