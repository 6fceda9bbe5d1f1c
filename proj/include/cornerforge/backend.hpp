#pragma once

#include <chrono>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <variant>

#include "cornerforge/conditioning.hpp"
#include "cornerforge/imaging.hpp"

namespace cornerforge {

inline constexpr std::string_view kProtocolVersion = "1.0";

enum class BackendKind { Procedural, RemoteMaskConditioned, RemoteDiffusion };

/// How the bounding box is derived from a generated object.
enum class GroundTruthRule {
  MaskRectTight,  // objects fill their mask, so the mask's tight box is exact
  WholePatch,     // object extent is unobservable, the whole crop is the box
};

std::string_view to_string(BackendKind kind);
BackendKind backend_kind_from_string(std::string_view s);
std::string_view to_string(GroundTruthRule rule);

struct BackendDescriptor {
  BackendKind kind = BackendKind::Procedural;
  std::optional<std::string> endpoint;
  std::chrono::milliseconds timeout{30'000};

  GroundTruthRule gt_rule() const noexcept {
    return kind == BackendKind::RemoteDiffusion ? GroundTruthRule::WholePatch : GroundTruthRule::MaskRectTight;
  }
  bool mask_conditioned() const noexcept { return kind != BackendKind::RemoteDiffusion; }

  /// Remote kinds need an endpoint.
  void validate() const;

  static BackendDescriptor procedural() { return {}; }
  static BackendDescriptor remote(BackendKind kind, std::string endpoint);
};

/// Diffusion backends get the untouched crop plus a text prompt.
struct PlainCrop {
  ImageBuffer pixels;
};

struct GenerationRequest {
  std::string protocol_version{kProtocolVersion};
  std::string class_name;
  std::uint16_t class_id = 0;
  std::uint64_t seed = 0;
  std::variant<ConditionedPatch, PlainCrop> input{PlainCrop{ImageBuffer(1, 1)}};
  CropRegion mask_rect;
  std::optional<std::string> prompt;
  std::map<std::string, std::string> backend_params;

  const ImageBuffer& patch() const {
    return std::visit([](const auto& in) -> const ImageBuffer& { return in.pixels; }, input);
  }
  bool is_conditioned() const noexcept { return std::holds_alternative<ConditionedPatch>(input); }
};

struct GenerationResult {
  ImageBuffer patch;
  std::string backend_id;
  std::chrono::milliseconds latency{0};
};

/// One generation session. Remote sessions own a connection, so each worker
/// should hold its own.
class Generator {
 public:
  virtual ~Generator() = default;
  virtual GenerationResult generate(const GenerationRequest& req) = 0;
  virtual std::string backend_id() const = 0;
};

std::unique_ptr<Generator> make_generator(const BackendDescriptor& backend);

/// Convenience wrapper: opens a session, runs one request.
GenerationResult generate(const BackendDescriptor& backend, const GenerationRequest& req);

/// Deterministic stand-in for a neural mask-conditioned generator.
ImageBuffer procedural_generate(const GenerationRequest& req);

/// Ground-truth box in background coordinates.
BBox derive_ground_truth(const BackendDescriptor& backend, const BinaryMask& mask, const CropRegion& mask_rect,
                         const CropRegion& crop);

/// Checks request/backend kind agreement before anything is sent.
void validate_request(const BackendDescriptor& backend, const GenerationRequest& req);

}  // namespace cornerforge
