#pragma once

#include <chrono>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "cornerforge/backend.hpp"

namespace cornerforge {

std::string base64_encode(const std::vector<std::uint8_t>& bytes);
/// Strict decoder: rejects characters outside the alphabet and bad padding.
std::vector<std::uint8_t> base64_decode(std::string_view text);

/// Decodes a PNG that must be 8-bit RGB as the wire format requires.
ImageBuffer decode_wire_png(const std::vector<std::uint8_t>& bytes);

/// Wire-level view of POST /v1/generate, as a server sees it.
struct WireRequest {
  std::string version;
  BackendKind kind = BackendKind::RemoteMaskConditioned;
  std::string class_name;
  std::uint16_t class_id = 0;
  std::uint64_t seed = 0;
  CropRegion mask_rect;
  std::optional<std::string> prompt;
  ImageBuffer patch{1, 1};
  std::map<std::string, std::string> params;
};

nlohmann::json encode_request(const GenerationRequest& req);

/// Server-side parse. ParseError for malformed bodies, ProtocolError for a
/// version mismatch, DimensionMismatch when mask_rect does not fit the patch.
WireRequest decode_request(const nlohmann::json& body);

nlohmann::json encode_response(const ImageBuffer& patch, const std::string& backend_id);

struct HealthStatus {
  std::string status;
  BackendKind kind = BackendKind::RemoteMaskConditioned;
};

/// HTTP client session for a remote backend. One per worker.
class RemoteGenerator final : public Generator {
 public:
  explicit RemoteGenerator(const BackendDescriptor& backend);
  ~RemoteGenerator() override;
  RemoteGenerator(const RemoteGenerator&) = delete;
  RemoteGenerator& operator=(const RemoteGenerator&) = delete;

  GenerationResult generate(const GenerationRequest& req) override;
  std::string backend_id() const override;

  HealthStatus health();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace cornerforge
