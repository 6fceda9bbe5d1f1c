#include "cornerforge/backend.hpp"

#include <algorithm>
#include <cmath>

#include "cornerforge/protocol.hpp"
#include "cornerforge/rng.hpp"

namespace cornerforge {

std::string_view to_string(BackendKind kind) {
  switch (kind) {
    case BackendKind::Procedural: return "procedural";
    case BackendKind::RemoteMaskConditioned: return "mask_conditioned";
    case BackendKind::RemoteDiffusion: return "diffusion";
  }
  return "procedural";
}

BackendKind backend_kind_from_string(std::string_view s) {
  if (s == "procedural") return BackendKind::Procedural;
  if (s == "mask_conditioned") return BackendKind::RemoteMaskConditioned;
  if (s == "diffusion") return BackendKind::RemoteDiffusion;
  throw Error(ErrorCode::ConfigInvalid, "unknown backend kind '" + std::string(s) + "'");
}

std::string_view to_string(GroundTruthRule rule) {
  return rule == GroundTruthRule::WholePatch ? "whole_patch" : "mask_rect_tight";
}

void BackendDescriptor::validate() const {
  if (kind != BackendKind::Procedural && (!endpoint || endpoint->empty())) {
    throw Error(ErrorCode::ConfigInvalid, "backend.endpoint: required for remote backend kind");
  }
}

BackendDescriptor BackendDescriptor::remote(BackendKind kind, std::string endpoint) {
  BackendDescriptor d;
  d.kind = kind;
  d.endpoint = std::move(endpoint);
  return d;
}

void validate_request(const BackendDescriptor& backend, const GenerationRequest& req) {
  if (backend.mask_conditioned() != req.is_conditioned()) {
    throw Error(ErrorCode::WrongRequestKind, std::string("backend ") + std::string(to_string(backend.kind)) +
                                                 (req.is_conditioned() ? " does not take a conditioned patch"
                                                                       : " needs a conditioned patch"));
  }
  if (!req.mask_rect.fits_in(req.patch().width(), req.patch().height())) {
    throw Error(ErrorCode::RegionOutOfBounds, "mask_rect outside request patch");
  }
}

namespace {

class ProceduralGenerator final : public Generator {
 public:
  GenerationResult generate(const GenerationRequest& req) override {
    const auto start = std::chrono::steady_clock::now();
    ImageBuffer patch = procedural_generate(req);
    return {std::move(patch), backend_id(),
            std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - start)};
  }
  std::string backend_id() const override { return "procedural/v1"; }
};

std::uint8_t to_u8(double v) { return static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L)); }

}  // namespace

std::unique_ptr<Generator> make_generator(const BackendDescriptor& backend) {
  backend.validate();
  if (backend.kind == BackendKind::Procedural) return std::make_unique<ProceduralGenerator>();
  return std::make_unique<RemoteGenerator>(backend);
}

GenerationResult generate(const BackendDescriptor& backend, const GenerationRequest& req) {
  validate_request(backend, req);
  auto gen = make_generator(backend);
  auto result = gen->generate(req);
  if (result.patch.width() != req.patch().width() || result.patch.height() != req.patch().height()) {
    throw Error(ErrorCode::ProtocolError, "backend returned a patch of the wrong size");
  }
  return result;
}

ImageBuffer procedural_generate(const GenerationRequest& req) {
  const auto* cond = std::get_if<ConditionedPatch>(&req.input);
  if (!cond) throw Error(ErrorCode::WrongRequestKind, "procedural backend needs a conditioned patch");
  const ImageBuffer& in = cond->pixels;
  const CropRegion& rect = cond->mask_rect;
  const BinaryMask& mask = cond->mask;
  if (!rect.fits_in(in.width(), in.height()) || mask.width() != rect.w || mask.height() != rect.h) {
    throw Error(ErrorCode::DimensionMismatch, "conditioned patch geometry is inconsistent");
  }

  ImageBuffer out = in;
  const auto rx = static_cast<std::uint32_t>(rect.x);
  const auto ry = static_cast<std::uint32_t>(rect.y);
  const auto rw = static_cast<std::uint32_t>(rect.w);
  const auto rh = static_cast<std::uint32_t>(rect.h);

  // Surround: average of the row-wise and column-wise linear interpolations
  // between the nearest pixels just outside the rectangle.
  const bool has_left = rx > 0, has_right = rx + rw < in.width();
  const bool has_top = ry > 0, has_bottom = ry + rh < in.height();
  for (std::uint32_t j = 0; j < rh; ++j) {
    for (std::uint32_t i = 0; i < rw; ++i) {
      if (mask.test(i, j)) continue;
      double acc[3] = {0, 0, 0};
      int directions = 0;
      auto add_lerp = [&](bool has_a, bool has_b, const Rgb& a, const Rgb& b, double t) {
        if (!has_a && !has_b) return;
        const Rgb& lo = has_a ? a : b;
        const Rgb& hi = has_b ? b : a;
        acc[0] += lo.r + (hi.r - lo.r) * t;
        acc[1] += lo.g + (hi.g - lo.g) * t;
        acc[2] += lo.b + (hi.b - lo.b) * t;
        ++directions;
      };
      const std::uint32_t x = rx + i, y = ry + j;
      const Rgb& left = in.at(has_left ? rx - 1 : x, y);
      const Rgb& right = in.at(has_right ? rx + rw : x, y);
      const Rgb& top = in.at(x, has_top ? ry - 1 : y);
      const Rgb& bottom = in.at(x, has_bottom ? ry + rh : y);
      add_lerp(has_left, has_right, left, right, static_cast<double>(i + 1) / (rw + 1));
      add_lerp(has_top, has_bottom, top, bottom, static_cast<double>(j + 1) / (rh + 1));
      if (directions == 0) {
        out.at(x, y) = kBlack;
        continue;
      }
      out.at(x, y) = {to_u8(acc[0] / directions), to_u8(acc[1] / directions), to_u8(acc[2] / directions)};
    }
  }

  // Object: the class color fill darkened by a per-pixel seeded factor.
  // Scaling keeps the channel order of the class color.
  Rng rng(hash64(req.seed, 0xC1A55000ULL + req.class_id));
  Rgb color{};
  bool have_color = false;
  for (std::uint32_t j = 0; j < rh && !have_color; ++j) {
    for (std::uint32_t i = 0; i < rw; ++i) {
      if (mask.test(i, j)) {
        color = in.at(rx + i, ry + j);
        have_color = true;
        break;
      }
    }
  }
  for (std::uint32_t j = 0; j < rh; ++j) {
    for (std::uint32_t i = 0; i < rw; ++i) {
      if (!mask.test(i, j)) continue;
      const double f = rng.uniform_real(0.55, 0.9);
      Rgb px{to_u8(color.r * f), to_u8(color.g * f), to_u8(color.b * f)};
      if (px == color || px == kBlack) {
        const int bump = 1 + static_cast<int>(rng.uniform_int(0, 15));
        auto up = [bump](std::uint8_t c) { return static_cast<std::uint8_t>(std::min(255, c + bump)); };
        px = {up(color.r), up(color.g), up(color.b)};
      }
      out.at(rx + i, ry + j) = px;
    }
  }
  return out;
}

BBox derive_ground_truth(const BackendDescriptor& backend, const BinaryMask& mask, const CropRegion& mask_rect,
                         const CropRegion& crop) {
  if (backend.gt_rule() == GroundTruthRule::WholePatch) return BBox::from_region(crop);
  const BBox local = mask_bbox(mask);
  return {local.x + static_cast<double>(mask_rect.x + crop.x), local.y + static_cast<double>(mask_rect.y + crop.y),
          local.w, local.h};
}

}  // namespace cornerforge
