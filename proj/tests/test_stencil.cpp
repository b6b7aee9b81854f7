#include <gtest/gtest.h>

#include <algorithm>
#include <random>
#include <set>

#include "stencilperf/stencil.hpp"
#include "support.hpp"

using namespace sperf;
using namespace sperf::testing;

TEST(Classification, PointCounts) {
  EXPECT_EQ(star7().point_count(), 7u);
  EXPECT_EQ(star19().point_count(), 19u);
  EXPECT_EQ(box27().point_count(), 27u);
  EXPECT_EQ(make_spec(2, 2, StencilKind::box, Weighting::homogeneous).point_count(), 25u);
  EXPECT_EQ(make_spec(2, 3, StencilKind::star, Weighting::homogeneous).point_count(), 13u);
}

TEST(Classification, RejectsUnsupported) {
  EXPECT_THROW(make_spec(1, 1, StencilKind::star, Weighting::homogeneous).validate(), SpecError);
  EXPECT_THROW(make_spec(3, 0, StencilKind::star, Weighting::homogeneous).validate(), SpecError);
  EXPECT_THROW(make_spec(3, kMaxRadius + 1, StencilKind::star, Weighting::homogeneous).validate(),
               SpecError);
  // 11^3 points is over the term limit.
  EXPECT_THROW(make_spec(3, 5, StencilKind::box, Weighting::homogeneous).validate(), SpecError);
  EXPECT_NO_THROW(make_spec(3, 4, StencilKind::box, Weighting::homogeneous).validate());
}

TEST(Classification, ParsersRoundTrip) {
  for (auto k : {StencilKind::star, StencilKind::box}) EXPECT_EQ(parse_kind(to_string(k)), k);
  for (auto w : {Weighting::homogeneous, Weighting::heterogeneous, Weighting::isotropic,
                 Weighting::point_symmetric})
    EXPECT_EQ(parse_weighting(to_string(w)), w);
  for (auto c : {CoefficientStorage::constant, CoefficientStorage::variable})
    EXPECT_EQ(parse_storage(to_string(c)), c);
  for (auto t : {ElementType::float32, ElementType::float64})
    EXPECT_EQ(parse_element_type(to_string(t)), t);
  EXPECT_THROW(parse_kind("diamond"), SpecError);
  EXPECT_THROW(parse_weighting("random"), SpecError);
}

TEST(KernelIR, ReferenceCoefficientStructures) {
  const auto k1 = build_kernel(star7());
  EXPECT_EQ(k1.terms.size(), 7u);
  EXPECT_EQ(k1.coefficients, std::vector<std::string>{"c0"});

  const auto k2 = build_kernel(star19());
  EXPECT_EQ(k2.terms.size(), 19u);
  ASSERT_EQ(k2.coefficients.size(), 19u);
  for (std::size_t c = 0; c < 19; ++c) EXPECT_EQ(k2.coefficients[c], "c" + std::to_string(c));

  const auto k3 = build_kernel(box27());
  EXPECT_EQ(k3.terms.size(), 27u);
  EXPECT_EQ(k3.weight_components(), 27u);
  EXPECT_EQ(k3.coefficients.front(), "W[0]");
  EXPECT_EQ(k3.coefficients.back(), "W[26]");
}

TEST(KernelIR, OpCounts) {
  const auto c1 = build_kernel(star7()).op_counts;
  EXPECT_EQ(c1.adds, 6);
  EXPECT_EQ(c1.muls, 1);
  EXPECT_EQ(c1.loads, 7);
  EXPECT_EQ(c1.stores, 1);
  // Rows (dk, dj): 5 for the star plus the write stream.
  EXPECT_EQ(c1.distinct_streams, 6);

  const auto c2 = build_kernel(star19()).op_counts;
  EXPECT_EQ(c2.adds, 18);
  EXPECT_EQ(c2.muls, 19);

  const auto c3 = build_kernel(box27()).op_counts;
  EXPECT_EQ(c3.loads, 27 + 27);
  EXPECT_EQ(c3.distinct_streams, 9 + 27 + 1);
}

TEST(KernelIR, IsotropicAndPointSymmetricGrouping) {
  const auto iso = build_kernel(make_spec(3, 1, StencilKind::box, Weighting::isotropic));
  // Squared norms 0, 1, 2, 3.
  EXPECT_EQ(iso.coefficients.size(), 4u);
  const auto ps = build_kernel(make_spec(3, 1, StencilKind::box, Weighting::point_symmetric));
  EXPECT_EQ(ps.coefficients.size(), 14u);
  const auto star_ps = build_kernel(make_spec(3, 2, StencilKind::star, Weighting::point_symmetric));
  EXPECT_EQ(star_ps.coefficients.size(), 7u);
}

// Properties over random families.
TEST(KernelIR, RandomFamiliesAreWellFormed) {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 300; ++trial) {
    const auto spec = random_spec(rng);
    const auto k = build_kernel(spec);
    ASSERT_EQ(k.terms.size(), spec.point_count()) << spec.name();
    EXPECT_EQ(k.terms.front().offset, (Offset{0, 0, 0}));
    std::set<Offset> seen;
    std::set<std::size_t> used;
    for (const auto& t : k.terms) {
      EXPECT_TRUE(seen.insert(t.offset).second) << "duplicate offset in " << spec.name();
      for (int a = 0; a < 3; ++a) EXPECT_LE(std::abs(t.offset[a]), spec.radius);
      if (spec.dimensions == 2) EXPECT_EQ(t.offset[0], 0);
      if (spec.kind == StencilKind::star)
        EXPECT_LE((t.offset[0] != 0) + (t.offset[1] != 0) + (t.offset[2] != 0), 1);
      ASSERT_LT(t.coefficient.index, k.coefficients.size());
      used.insert(t.coefficient.index);
    }
    EXPECT_EQ(used.size(), k.coefficients.size()) << "unused coefficient in " << spec.name();
    // Point symmetry: mirrored offsets share a coefficient.
    if (spec.weighting == Weighting::point_symmetric || spec.weighting == Weighting::isotropic) {
      for (const auto& t : k.terms) {
        const Offset neg{-t.offset[0], -t.offset[1], -t.offset[2]};
        const auto it = std::find_if(k.terms.begin(), k.terms.end(),
                                     [&](const OffsetTerm& u) { return u.offset == neg; });
        ASSERT_NE(it, k.terms.end());
        EXPECT_EQ(it->coefficient, t.coefficient);
      }
    }
    const auto& c = k.op_counts;
    EXPECT_EQ(c.adds, static_cast<int>(k.terms.size()) - 1);
    EXPECT_EQ(c.loads, static_cast<int>(k.terms.size() + k.weight_components()));
    EXPECT_GE(c.distinct_streams, 2);
  }
}

TEST(Grid, DimsAndValidation) {
  const auto spec = star19();
  auto d = GridDims::cubic(spec, 10);
  EXPECT_EQ(d.points(), 1000u);
  EXPECT_EQ(d.interior_points(3), 64u);
  EXPECT_NO_THROW(d.validate(spec));
  d.N = 7;
  EXPECT_THROW(d.validate(spec), SpecError);
  const auto d2 = GridDims::cubic(make_spec(2, 1, StencilKind::star, Weighting::homogeneous), 10);
  EXPECT_EQ(d2.M, 1);
  EXPECT_EQ(d2.interior_points(1), 64u);
}

TEST(Grid, LinearizedOffsetsSortedDescending) {
  const auto k = build_kernel(star7());
  const GridDims d{10, 20, 30, 8};
  const auto lo = linearized_offsets(k, d);
  EXPECT_EQ(lo.at("a"), (std::vector<long>{600, 30, 1, 0, -1, -30, -600}));
  EXPECT_EQ(lo.at("b"), std::vector<long>{0});
}
