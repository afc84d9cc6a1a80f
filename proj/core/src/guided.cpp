#include "objguide/guided.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <unordered_map>

#include <Eigen/Dense>

namespace objguide {

ObjectGroup refine_homography(const ObjectGroup& g, std::span<const QuadBox> boxes1,
                              std::span<const QuadBox> boxes2,
                              const std::optional<VpCorrespondence>& vps,
                              std::optional<double> vp_weight) {
  ObjectGroup out = g;
  out.refined = false;
  if (g.pairs.size() < 2) return out;

  std::vector<PointCorrespondence> corrs;
  for (const auto& pr : g.pairs) {
    for (std::size_t c = 0; c < 4; ++c) {
      corrs.push_back({HomPoint::from_pixel(boxes1[pr.i].corner(c)),
                       HomPoint::from_pixel(boxes2[pr.j].corner(c)), 1.0});
    }
  }
  if (vps) {
    const double w = vp_weight.value_or(static_cast<double>(corrs.size()) / 4.0);
    corrs.push_back({vps->horizontal1, vps->horizontal2, w, true});
    corrs.push_back({vps->vertical1, vps->vertical2, w, true});
  }
  try {
    out.h = dlt_homography(corrs);
    out.refined = true;
  } catch (const Error&) {
    out.h = g.h;
  }
  return out;
}

SupportRegion::SupportRegion(const ObjectGroup& g, std::span<const QuadBox> boxes1,
                             double margin) {
  for (const auto& pr : g.pairs) quads_.push_back(boxes1[pr.i].dilated(margin));
}

bool SupportRegion::contains(const Vec2& p) const {
  return std::any_of(quads_.begin(), quads_.end(), [&](const QuadBox& q) { return q.contains(p); });
}

namespace {

// Uniform bucket grid over image-2 keypoints for radius queries.
class PointGrid {
 public:
  PointGrid(std::span<const Feature> feats, double cell) : cell_(std::max(cell, 1.0)) {
    for (std::size_t n = 0; n < feats.size(); ++n) {
      buckets_[key(cell_of(feats[n].pos.x()), cell_of(feats[n].pos.y()))].push_back(n);
    }
  }

  template <typename Fn>
  void for_each_near(const Vec2& p, Fn&& fn) const {
    const long cx = cell_of(p.x());
    const long cy = cell_of(p.y());
    for (long dy = -1; dy <= 1; ++dy) {
      for (long dx = -1; dx <= 1; ++dx) {
        const auto it = buckets_.find(key(cx + dx, cy + dy));
        if (it == buckets_.end()) continue;
        for (std::size_t n : it->second) fn(n);
      }
    }
  }

 private:
  long cell_of(double v) const { return static_cast<long>(std::floor(v / cell_)); }
  static long long key(long x, long y) {
    return (static_cast<long long>(x) << 32) ^ static_cast<long long>(static_cast<unsigned>(y));
  }

  double cell_;
  std::unordered_map<long long, std::vector<std::size_t>> buckets_;
};

}  // namespace

std::vector<Match> guided_match(std::span<const Feature> feats1, std::span<const Feature> feats2,
                                const ObjectGroup& g, std::span<const QuadBox> boxes1,
                                int group_id, const MatchParams& params, Claims& claims) {
  const SupportRegion region(g, boxes1, params.margin);
  const PointGrid grid(feats2, params.r_search);
  const double r2 = params.r_search * params.r_search;

  // Ranked candidate lists (descending similarity, ties by lower index).
  std::vector<std::vector<std::pair<double, std::size_t>>> ranked(feats1.size());
  std::deque<std::size_t> queue;
  for (std::size_t a = 0; a < feats1.size(); ++a) {
    if (claims.image1[a] || !region.contains(feats1[a].pos)) continue;
    const auto proj = g.h.map(feats1[a].pos);
    if (!proj) continue;
    auto& list = ranked[a];
    grid.for_each_near(*proj, [&](std::size_t b) {
      if (claims.image2[b] || (feats2[b].pos - *proj).squaredNorm() > r2) return;
      const double sim = feats1[a].desc.dot(feats2[b].desc);
      if (sim >= params.sim_thresh) list.emplace_back(sim, b);
    });
    if (list.empty()) continue;
    std::sort(list.begin(), list.end(), [](const auto& x, const auto& y) {
      return x.first > y.first || (x.first == y.first && x.second < y.second);
    });
    queue.push_back(a);
  }

  // Deferred acceptance: the result does not depend on proposal order.
  std::vector<std::size_t> next(feats1.size(), 0);
  std::unordered_map<std::size_t, std::pair<std::size_t, double>> holder;  // b -> (a, sim)
  while (!queue.empty()) {
    const std::size_t a = queue.front();
    queue.pop_front();
    auto& list = ranked[a];
    if (next[a] >= list.size()) continue;
    const auto [sim, b] = list[next[a]++];
    auto it = holder.find(b);
    if (it == holder.end()) {
      holder.emplace(b, std::make_pair(a, sim));
      continue;
    }
    auto& [cur, cur_sim] = it->second;
    if (sim > cur_sim || (sim == cur_sim && a < cur)) {
      queue.push_back(cur);
      cur = a;
      cur_sim = sim;
    } else {
      queue.push_back(a);
    }
  }

  std::vector<Match> out;
  out.reserve(holder.size());
  for (const auto& [b, held] : holder) {
    out.push_back({feats1[held.first].id, feats2[b].id, held.second, group_id});
    claims.image1[held.first] = true;
    claims.image2[b] = true;
  }
  std::sort(out.begin(), out.end(), [](const Match& x, const Match& y) { return x.i < y.i; });
  return out;
}

std::vector<Match> additional_matches(std::span<const Feature> feats1,
                                      std::span<const Feature> feats2, double ratio,
                                      Claims& claims) {
  std::vector<std::size_t> free1;
  std::vector<std::size_t> free2;
  for (std::size_t a = 0; a < feats1.size(); ++a) {
    if (!claims.image1[a]) free1.push_back(a);
  }
  for (std::size_t b = 0; b < feats2.size(); ++b) {
    if (!claims.image2[b]) free2.push_back(b);
  }
  if (free1.empty() || free2.empty()) return {};
  const Eigen::Index dim = feats1[free1.front()].desc.size();
  Eigen::MatrixXd d1(dim, static_cast<Eigen::Index>(free1.size()));
  Eigen::MatrixXd d2(dim, static_cast<Eigen::Index>(free2.size()));
  for (std::size_t n = 0; n < free1.size(); ++n) d1.col(static_cast<Eigen::Index>(n)) = feats1[free1[n]].desc;
  for (std::size_t n = 0; n < free2.size(); ++n) d2.col(static_cast<Eigen::Index>(n)) = feats2[free2[n]].desc;
  const Eigen::MatrixXd sim = d1.transpose() * d2;

  const auto distance = [](double s) { return std::sqrt(std::max(0.0, 2.0 - 2.0 * s)); };
  std::vector<Eigen::Index> best12(free1.size());
  std::vector<bool> passes_ratio(free1.size(), false);
  for (Eigen::Index r = 0; r < sim.rows(); ++r) {
    Eigen::Index best = 0;
    double s1 = -2.0;
    double s2 = -2.0;
    for (Eigen::Index c = 0; c < sim.cols(); ++c) {
      const double s = sim(r, c);
      if (s > s1) {
        s2 = s1;
        s1 = s;
        best = c;
      } else if (s > s2) {
        s2 = s;
      }
    }
    best12[static_cast<std::size_t>(r)] = best;
    passes_ratio[static_cast<std::size_t>(r)] =
        sim.cols() < 2 || distance(s1) < ratio * distance(s2);
  }
  std::vector<Match> out;
  for (Eigen::Index c = 0; c < sim.cols(); ++c) {
    Eigen::Index best = 0;
    for (Eigen::Index r = 1; r < sim.rows(); ++r) {
      if (sim(r, c) > sim(best, c)) best = r;
    }
    const auto r = static_cast<std::size_t>(best);
    if (best12[r] != c || !passes_ratio[r]) continue;
    const std::size_t a = free1[r];
    const std::size_t b = free2[static_cast<std::size_t>(c)];
    claims.image1[a] = true;
    claims.image2[b] = true;
    out.push_back({feats1[a].id, feats2[b].id, sim(best, c), -1});
  }
  std::sort(out.begin(), out.end(), [](const Match& x, const Match& y) { return x.i < y.i; });
  return out;
}

}  // namespace objguide
