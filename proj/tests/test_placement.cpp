#include <gtest/gtest.h>

#include <random>

#include "cornerforge/placement.hpp"
#include "support/fixtures.hpp"

using namespace cornerforge;

namespace {

Placement sample(std::uint64_t seed, Size2 bg, const BinaryMask& m, const PlacementConfig& cfg = {}) {
  return sample_placement(seed, bg, {"obj", 3, m}, cfg);
}

}  // namespace

TEST(DeriveCrop, Examples) {
  EXPECT_EQ(derive_crop({2000, 750}, 256, {4000, 3000}), (CropRegion{1872, 622, 256, 256}));
  EXPECT_EQ(derive_crop({10, 10}, 256, {4000, 3000}), (CropRegion{0, 0, 256, 256}));
  EXPECT_EQ(derive_crop({3999, 2999}, 256, {4000, 3000}), (CropRegion{3744, 2744, 256, 256}));
  for (const Point c : {Point{0, 0}, Point{128, 128}, Point{255, 3}}) {
    EXPECT_EQ(derive_crop(c, 256, {256, 256}), (CropRegion{0, 0, 256, 256}));
  }
  EXPECT_THROW(derive_crop({0, 0}, 256, {200, 300}), Error);
}

TEST(DeriveCrop, CenterStaysInsideProperty) {
  std::mt19937_64 gen(21);
  for (int i = 0; i < 2000; ++i) {
    const Size2 bg{static_cast<std::uint32_t>(16 + gen() % 3000), static_cast<std::uint32_t>(16 + gen() % 3000)};
    const std::uint32_t crop = 16 + static_cast<std::uint32_t>(gen() % (std::min(bg.w, bg.h) - 15));
    const Point c{static_cast<std::int64_t>(gen() % bg.w), static_cast<std::int64_t>(gen() % bg.h)};
    const auto r = derive_crop(c, crop, bg);
    ASSERT_TRUE(r.fits_in(bg.w, bg.h));
    ASSERT_EQ(r.w, crop);
    ASSERT_TRUE(r.contains({c.x, c.y, 1, 1}));
  }
}

TEST(SamplePlacement, UpperHalfOverManySeeds) {
  const BinaryMask m = testing_support::ellipse_mask(60, 20);
  for (std::uint64_t seed = 0; seed < 10000; ++seed) {
    ASSERT_LE(sample(seed, {4000, 3000}, m).center.y, 1500) << seed;
  }
}

TEST(SamplePlacement, Deterministic) {
  const BinaryMask m = testing_support::ellipse_mask(30, 40);
  for (std::uint64_t seed : {0ull, 1ull, 77ull, 0xFFFFFFFFFFFFFFFFull}) {
    EXPECT_EQ(sample(seed, {1024, 768}, m), sample(seed, {1024, 768}, m));
  }
  EXPECT_NE(sample(1, {1024, 768}, m), sample(2, {1024, 768}, m));
}

TEST(SamplePlacement, Errors) {
  const BinaryMask m = testing_support::ellipse_mask(10, 10);
  EXPECT_THROW(
      {
        try {
          sample(1, {200, 200}, m);
        } catch (const Error& e) {
          EXPECT_EQ(e.code(), ErrorCode::BackgroundTooSmall);
          throw;
        }
      },
      Error);
  try {
    sample(1, {500, 500}, BinaryMask(5, 5));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::EmptyMask);
  }
  PlacementConfig bad;
  bad.mask_scale_max = 1.0;
  try {
    sample(1, {500, 500}, m, bad);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::ConfigInvalid);
    EXPECT_NE(std::string(e.what()).find("placement.mask_scale_max"), std::string::npos);
  }
}

TEST(SamplePlacement, GeometryInvariantsProperty) {
  std::mt19937_64 gen(22);
  for (int i = 0; i < 3000; ++i) {
    PlacementConfig cfg;
    cfg.crop_size = 16 + static_cast<std::uint32_t>(gen() % 500);
    cfg.mask_scale_min = 0.01 + (gen() % 40) / 100.0;
    cfg.mask_scale_max = cfg.mask_scale_min + (gen() % 50) / 100.0;
    if (cfg.mask_scale_max >= 1.0) cfg.mask_scale_max = 0.95;
    cfg.vertical_fraction = 0.3 + (gen() % 71) / 100.0;
    cfg.edge_margin = static_cast<std::uint32_t>(gen() % 8);
    const Size2 bg{cfg.crop_size + 2 * cfg.edge_margin + static_cast<std::uint32_t>(gen() % 2000),
                   static_cast<std::uint32_t>((cfg.crop_size + 2 * cfg.edge_margin) / cfg.vertical_fraction) + 2 +
                       static_cast<std::uint32_t>(gen() % 2000)};
    const auto m = testing_support::random_mask(gen, 1 + gen() % 80, 1 + gen() % 80, 0.2);
    const auto p = sample(gen(), bg, m, cfg);

    ASSERT_TRUE(placement_valid(p, bg, cfg.crop_size));
    ASSERT_TRUE(p.crop.fits_in(bg.w, bg.h));
    const CropRegion local{0, 0, p.crop.w, p.crop.h};
    ASSERT_TRUE(local.contains(p.mask_rect));
    ASSERT_LT(p.mask_rect.area(), p.crop.area());
    ASSERT_LE(static_cast<double>(p.center.y), cfg.vertical_fraction * bg.h);
    // Object stays within the margins.
    const auto ox = p.crop.x + p.mask_rect.x, oy = p.crop.y + p.mask_rect.y;
    ASSERT_GE(ox, cfg.edge_margin);
    ASSERT_GE(oy, cfg.edge_margin);
    ASSERT_LE(ox + p.mask_rect.w, bg.w - cfg.edge_margin);
    // Aspect ratio within one pixel.
    const double sw = m.width(), sh = m.height();
    if (sw >= sh) {
      ASSERT_LE(std::abs(p.mask_dims.h - sh * p.mask_dims.w / sw), 1.0);
    } else {
      ASSERT_LE(std::abs(p.mask_dims.w - sw * p.mask_dims.h / sh), 1.0);
    }
  }
}

TEST(SamplePlacement, CenterXRoughlyUniformByDecile) {
  const BinaryMask m = testing_support::ellipse_mask(40, 20);
  const Size2 bg{4000, 3000};
  std::array<int, 10> buckets{};
  const int n = 10000;
  for (int seed = 0; seed < n; ++seed) {
    const auto c = sample(static_cast<std::uint64_t>(seed) * 7919 + 3, bg, m).center.x;
    ++buckets[static_cast<std::size_t>(c * 10 / bg.w)];
  }
  for (int b : buckets) EXPECT_NEAR(static_cast<double>(b) / n, 0.1, 0.03);
}

TEST(SamplePlacement, MaskOffsetCoversTheCrop) {
  // Over many seeds the mask must reach both near and far edges of the crop.
  const BinaryMask m = testing_support::ellipse_mask(20, 20);
  std::int64_t min_x = 1 << 20, max_right = 0;
  for (std::uint64_t seed = 0; seed < 4000; ++seed) {
    const auto p = sample(seed, {4000, 3000}, m);
    min_x = std::min(min_x, p.mask_rect.x);
    max_right = std::max(max_right, p.mask_rect.x + p.mask_rect.w);
  }
  EXPECT_LE(min_x, 2);
  EXPECT_GE(max_right, 254);
}
