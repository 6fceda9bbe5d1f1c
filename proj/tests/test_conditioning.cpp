#include <gtest/gtest.h>

#include <random>

#include "cornerforge/conditioning.hpp"
#include "cornerforge/placement.hpp"
#include "support/fixtures.hpp"

using namespace cornerforge;

namespace {

ClassPalette red_palette() { return ClassPalette({{"airplane", 0, {255, 0, 0}}, {"drone", 1, {0, 255, 0}}}); }

}  // namespace

TEST(ComposeConditionPatch, SpotExamples) {
  const ImageBuffer crop(8, 8, Rgb{10, 20, 30});
  BinaryMask mask(3, 2);
  mask.set(0, 0);
  const CropRegion rect{2, 3, 3, 2};
  const auto patch = compose_condition_patch(crop, mask, rect, red_palette(), 0);
  EXPECT_EQ(patch.pixels.at(2, 3), (Rgb{255, 0, 0}));
  EXPECT_EQ(patch.pixels.at(3, 3), kBlack);
  EXPECT_EQ(patch.pixels.at(4, 4), kBlack);
  EXPECT_EQ(patch.pixels.at(1, 3), (Rgb{10, 20, 30}));
  EXPECT_EQ(patch.pixels.at(5, 3), (Rgb{10, 20, 30}));
  EXPECT_EQ(patch.class_id, 0);
  EXPECT_EQ(patch.mask_rect, rect);
}

TEST(ComposeConditionPatch, Errors) {
  const ImageBuffer crop(8, 8);
  try {
    compose_condition_patch(crop, BinaryMask(3, 3, true), {0, 0, 3, 2}, red_palette(), 0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::DimensionMismatch);
  }
  try {
    compose_condition_patch(crop, BinaryMask(3, 3, true), {0, 0, 3, 3}, red_palette(), 5);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::UnknownClass);
  }
  EXPECT_THROW(compose_condition_patch(crop, BinaryMask(3, 3, true), {6, 6, 3, 3}, red_palette(), 0), Error);
}

TEST(ComposeConditionPatch, ThreeZoneRuleProperty) {
  std::mt19937_64 gen(31);
  const auto palette = ClassPalette::airborne_default();
  for (int trial = 0; trial < 100; ++trial) {
    const auto crop = testing_support::random_image(gen, 64, 64);
    const auto mask = testing_support::random_mask(gen, 1 + gen() % 40, 1 + gen() % 40, 0.4);
    const CropRegion rect{static_cast<std::int64_t>(gen() % (64 - mask.width() + 1)),
                          static_cast<std::int64_t>(gen() % (64 - mask.height() + 1)), mask.width(), mask.height()};
    const auto cls = static_cast<std::uint16_t>(gen() % palette.size());
    const auto patch = compose_condition_patch(crop, mask, rect, palette, cls);
    std::size_t colored = 0;
    for (std::uint32_t y = 0; y < 64; ++y) {
      for (std::uint32_t x = 0; x < 64; ++x) {
        const Rgb& px = patch.pixels.at(x, y);
        switch (zone_of(rect, mask, x, y)) {
          case Zone::ClassColor:
            ASSERT_EQ(px, palette.at(cls).color);
            ++colored;
            break;
          case Zone::Black: ASSERT_EQ(px, kBlack); break;
          case Zone::Source: ASSERT_EQ(px, crop.at(x, y)); break;
        }
      }
    }
    EXPECT_EQ(colored, mask.count());
    // Idempotent in its arguments.
    EXPECT_EQ(compose_condition_patch(crop, mask, rect, palette, cls).pixels, patch.pixels);
  }
}

TEST(BuildPrompt, Examples) {
  EXPECT_EQ(build_prompt("airplane"), "a photograph of an airplane, Nikon D850");
  EXPECT_EQ(build_prompt("helicopter"), "a photograph of a helicopter, Nikon D850");
  EXPECT_EQ(build_prompt("hot air balloon"), "a photograph of a hot air balloon, Nikon D850");
  EXPECT_EQ(build_prompt("Airship"), "a photograph of an Airship, Nikon D850");
  EXPECT_EQ(build_prompt("drone"), "a photograph of a drone, Nikon D850");
  try {
    build_prompt("");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::EmptyClassName);
  }
}
