#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "objguide/objmatch.hpp"

namespace og = objguide;
using og::BoxDescriptor;
using og::Descriptor;
using og::Homography;
using og::QuadBox;
using og::Vec2;

namespace {

Descriptor unit(int dim, int axis) {
  Descriptor d = Descriptor::Zero(dim);
  d(axis) = 1.0;
  return d;
}

Descriptor random_unit(int dim, std::mt19937_64& rng) {
  std::normal_distribution<double> n;
  Descriptor d(dim);
  for (int k = 0; k < dim; ++k) d(k) = n(rng);
  return d.normalized();
}

QuadBox box(double x, double y, double w = 30, double h = 40) {
  return QuadBox(og::DetBox::make(x, y, x + w, y + h));
}

Homography translation(double tx, double ty) {
  og::Mat3 m = og::Mat3::Identity();
  m(0, 2) = tx;
  m(1, 2) = ty;
  return Homography(m);
}

std::vector<QuadBox> projected(const Homography& h, const std::vector<QuadBox>& boxes) {
  std::vector<QuadBox> out;
  for (const auto& b : boxes) out.push_back(*og::project(h, b));
  return out;
}

// Every group satisfies the documented invariants.
void expect_valid_groups(const std::vector<og::ObjectGroup>& groups, const std::vector<QuadBox>& b1,
                         const std::vector<QuadBox>& b2, double eps) {
  std::vector<bool> used1(b1.size()), used2(b2.size());
  for (const auto& g : groups) {
    EXPECT_GE(g.pairs.size(), 2u);
    for (const auto& p : g.pairs) {
      EXPECT_FALSE(used1[p.i]);
      EXPECT_FALSE(used2[p.j]);
      used1[p.i] = used2[p.j] = true;
      const auto q = og::project(g.hypothesis, b1[p.i]);
      ASSERT_TRUE(q);
      EXPECT_GE(og::quad_iou(*q, b2[p.j]), eps);
    }
  }
}

}  // namespace

TEST(GemPool, AverageWhenPIsOne) {
  std::mt19937_64 rng(1);
  std::vector<Descriptor> d;
  for (int k = 0; k < 3; ++k) d.push_back(random_unit(16, rng).cwiseAbs().normalized());
  const BoxDescriptor g = og::gem_pool(d, 1.0);
  ASSERT_TRUE(g.vec);
  const Descriptor mean = ((d[0] + d[1] + d[2]) / 3.0).normalized();
  EXPECT_LT((*g.vec - mean).norm(), 1e-12);
}

TEST(GemPool, SingleDescriptorIsItself) {
  std::mt19937_64 rng(2);
  const Descriptor d = random_unit(32, rng);
  for (const double p : {1.0, 3.0, 7.5}) {
    const BoxDescriptor g = og::gem_pool(std::vector<Descriptor>{d}, p);
    EXPECT_LT((*g.vec - d).norm(), 1e-12);
  }
}

TEST(GemPool, TwoOneHotVectors) {
  const BoxDescriptor g = og::gem_pool(std::vector<Descriptor>{unit(4, 0), unit(4, 1)}, 3.0);
  Descriptor expected = Descriptor::Zero(4);
  expected(0) = expected(1) = std::cbrt(0.5);
  expected.normalize();
  EXPECT_LT((*g.vec - expected).norm(), 1e-12);
  EXPECT_NEAR(g.vec->norm(), 1.0, 1e-12);
}

TEST(GemPool, Errors) {
  EXPECT_THROW(og::gem_pool(std::vector<Descriptor>{}, 3.0), og::Error);
  EXPECT_THROW(og::gem_pool(std::vector<Descriptor>{unit(3, 0), unit(4, 0)}, 3.0), og::Error);
}

TEST(BoxDescriptor, MembershipAndSentinel) {
  std::mt19937_64 rng(3);
  const Descriptor d = random_unit(8, rng);
  const std::vector<og::Feature> one = {{0, Vec2(10, 10), d}, {1, Vec2(500, 500), random_unit(8, rng)}};
  const BoxDescriptor bd = og::box_descriptor(box(0, 0), one, 3.0);
  EXPECT_LT((*bd.vec - d).norm(), 1e-12);

  const BoxDescriptor empty = og::box_descriptor(box(200, 200), one, 3.0);
  EXPECT_FALSE(empty.vec.has_value());
  EXPECT_EQ(empty.similarity(bd), 0.0);
  EXPECT_EQ(bd.similarity(empty), 0.0);

  std::vector<og::Feature> corners;
  for (int k = 0; k < 4; ++k) corners.push_back({k, Vec2(1 + 28 * (k % 2), 1 + 38 * (k / 2)), d});
  EXPECT_LT((*og::box_descriptor(box(0, 0), corners, 3.0).vec - d).norm(), 1e-12);
}

TEST(Candidates, Examples) {
  const std::vector<BoxDescriptor> d1 = {{unit(3, 0)}};
  const std::vector<BoxDescriptor> d2 = {{unit(3, 1)}, {unit(3, 0)}, {Descriptor((Descriptor(3) << 0.6, 0.8, 0).finished())}};
  EXPECT_EQ(og::candidates(0, d1, d2, 5), (std::vector<std::size_t>{1, 2, 0}));
  EXPECT_EQ(og::candidates(0, d1, d2, 1), (std::vector<std::size_t>{1}));

  const std::vector<BoxDescriptor> o2 = {{unit(3, 1)}, {unit(3, 2)}, {Descriptor((Descriptor(3) << 0.1, 0.99, 0).finished().normalized())}};
  EXPECT_EQ(og::candidates(0, d1, o2, 2), (std::vector<std::size_t>{2, 0}));
}

TEST(Hypothesis, Examples) {
  const QuadBox q = box(10, 20);
  EXPECT_LT(og::frobenius_distance(og::hypothesis(q, q), Homography::identity()), 1e-10);

  og::Mat3 s = og::Mat3::Identity();
  s(0, 0) = s(1, 1) = 2.0;
  EXPECT_LT(og::frobenius_distance(og::hypothesis(q, *og::project(Homography(s), q)), Homography(s)),
            1e-10);

  og::Mat3 m;
  m << 1.1, 0.1, 12, -0.05, 0.9, 8, 1e-3, 5e-4, 1;
  const Homography h(m);
  EXPECT_LT(og::frobenius_distance(og::hypothesis(q, *og::project(h, q)), h), 1e-6);
}

TEST(Support, IdentityGivesDiagonal) {
  const std::vector<QuadBox> b = {box(0, 0), box(100, 0), box(200, 50)};
  const auto s = og::support(Homography::identity(), b, b, 0.5);
  ASSERT_EQ(s.size(), 3u);
  for (const auto& p : s) {
    EXPECT_EQ(p.pair.i, p.pair.j);
    EXPECT_NEAR(p.iou, 1.0, 1e-12);
  }
}

TEST(Support, LowOverlapExcludedAndOneToOne) {
  const std::vector<QuadBox> b1 = {box(0, 0), box(2, 0), box(300, 300)};
  const std::vector<QuadBox> b2 = {box(1, 0), box(320, 300)};
  const auto s = og::support(Homography::identity(), b1, b2, 0.5);
  ASSERT_EQ(s.size(), 1u);
  EXPECT_EQ(s[0].pair.j, 0u);
  // Both b1[0] and b1[1] overlap b2[0] by the same amount; the tie goes to
  // the lower index.
  EXPECT_EQ(s[0].pair.i, 0u);
  const std::vector<QuadBox> b1b = {box(0, 0), box(1.5, 0)};
  const auto t = og::support(Homography::identity(), b1b, b2, 0.5);
  ASSERT_EQ(t.size(), 1u);
  EXPECT_EQ(t[0].pair.i, 1u);  // higher IoU wins
}

TEST(GreedyMatch, SinglePlane) {
  og::Mat3 m;
  m << 1.05, 0.02, 40, -0.01, 0.98, 15, 2e-4, 1e-4, 1;
  const Homography h0(m);
  std::vector<QuadBox> b1;
  for (int k = 0; k < 6; ++k) b1.push_back(box(100 + 60 * (k % 3), 100 + 70 * (k / 3)));
  const auto b2 = projected(h0, b1);
  std::mt19937_64 rng(4);
  std::vector<BoxDescriptor> d1, d2;
  for (std::size_t k = 0; k < b1.size(); ++k) {
    d1.push_back({random_unit(16, rng)});
    d2.push_back(d1.back());
  }
  og::MatchParams params;
  const auto groups = og::greedy_match(b1, b2, d1, d2, params);
  ASSERT_EQ(groups.size(), 1u);
  EXPECT_EQ(groups[0].pairs.size(), 6u);
  for (const auto& p : groups[0].pairs) EXPECT_EQ(p.i, p.j);
  EXPECT_LT(og::frobenius_distance(groups[0].h, h0), 1e-6);
  expect_valid_groups(groups, b1, b2, params.eps_iou);
}

TEST(GreedyMatch, TwoPlanesAndDistractors) {
  const Homography ha = translation(40, 0), hb = translation(-75, 10);
  std::vector<QuadBox> b1, b2;
  for (int k = 0; k < 4; ++k) b1.push_back(box(100 + 50 * k, 100));
  for (int k = 0; k < 3; ++k) b1.push_back(box(600 + 50 * k, 300));
  for (int k = 0; k < 4; ++k) b2.push_back(*og::project(ha, b1[k]));
  for (int k = 4; k < 7; ++k) b2.push_back(*og::project(hb, b1[k]));
  b1.push_back(box(900, 700, 20, 20));
  b1.push_back(box(50, 800, 45, 25));
  b2.push_back(box(400, 900, 25, 30));
  b2.push_back(box(1200, 40, 35, 35));

  std::mt19937_64 rng(5);
  std::vector<BoxDescriptor> d1, d2;
  for (std::size_t k = 0; k < b1.size(); ++k) d1.push_back({random_unit(16, rng)});
  for (std::size_t k = 0; k < b2.size(); ++k) {
    d2.push_back(k < 7 ? d1[k] : BoxDescriptor{random_unit(16, rng)});
  }
  og::MatchParams params;
  const auto groups = og::greedy_match(b1, b2, d1, d2, params);
  ASSERT_EQ(groups.size(), 2u);
  EXPECT_EQ(groups[0].pairs.size(), 4u);
  EXPECT_EQ(groups[1].pairs.size(), 3u);
  for (const auto& g : groups) {
    for (const auto& p : g.pairs) {
      EXPECT_EQ(p.i, p.j);
      EXPECT_LT(p.i, 7u);
    }
  }
  expect_valid_groups(groups, b1, b2, params.eps_iou);
}

TEST(GreedyMatch, OneBoxEachIsEmpty) {
  const std::vector<QuadBox> b = {box(0, 0)};
  const std::vector<BoxDescriptor> d = {{unit(4, 0)}};
  EXPECT_TRUE(og::greedy_match(b, b, d, d, og::MatchParams{}).empty());
}

TEST(GreedyMatch, FeatureOverloadAndDeterminism) {
  std::mt19937_64 rng(6);
  std::vector<QuadBox> b1;
  std::vector<og::Feature> f1, f2;
  const Homography h = translation(25, -10);
  for (int k = 0; k < 5; ++k) {
    b1.push_back(box(100 + 80 * k, 200));
    const Vec2 p(115 + 80 * k, 220);
    const Descriptor d = random_unit(16, rng);
    f1.push_back({k, p, d});
    f2.push_back({k, *h.map(p), d});
  }
  const auto b2 = projected(h, b1);
  og::MatchParams params;
  const auto g = og::greedy_match(b1, b2, f1, f2, params);
  ASSERT_EQ(g.size(), 1u);
  EXPECT_EQ(g[0].pairs.size(), 5u);
  const auto again = og::greedy_match(b1, b2, f1, f2, params);
  ASSERT_EQ(again.size(), 1u);
  EXPECT_EQ(again[0].pairs, g[0].pairs);
  EXPECT_EQ(again[0].h, g[0].h);
}
