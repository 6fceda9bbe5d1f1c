#include "cornerforge/conformance.hpp"

#include <functional>

#include <httplib.h>

#include "cornerforge/protocol.hpp"
#include "cornerforge/rng.hpp"

namespace cornerforge {

using nlohmann::json;

namespace {

ImageBuffer test_crop(std::uint32_t size, std::uint64_t seed) {
  ImageBuffer img(size, size);
  Rng rng(seed);
  for (auto& px : img.pixels()) {
    px = {static_cast<std::uint8_t>(rng.uniform_int(90, 200)), static_cast<std::uint8_t>(rng.uniform_int(120, 220)),
          static_cast<std::uint8_t>(rng.uniform_int(180, 255))};
  }
  return img;
}

GenerationRequest sample_request(BackendKind kind, std::uint32_t size) {
  const auto palette = ClassPalette::airborne_default();
  const CropRegion rect{size / 4, size / 4, size / 4, size / 8};
  BinaryMask mask(static_cast<std::uint32_t>(rect.w), static_cast<std::uint32_t>(rect.h));
  for (std::uint32_t y = 1; y + 1 < mask.height(); ++y) {
    for (std::uint32_t x = 1; x + 1 < mask.width(); ++x) mask.set(x, y);
  }
  GenerationRequest req;
  req.class_id = 0;
  req.class_name = palette.at(0).class_name;
  req.seed = 7;
  req.mask_rect = rect;
  const auto crop = test_crop(size, 11);
  if (kind == BackendKind::RemoteDiffusion) {
    req.input = PlainCrop{crop};
    req.prompt = build_prompt(req.class_name);
  } else {
    req.input = compose_condition_patch(crop, mask, rect, palette, 0);
  }
  return req;
}

bool is_error_body(const httplib::Result& res) {
  try {
    const auto body = json::parse(res->body);
    return body.is_object() && body.contains("error") && body["error"].is_string();
  } catch (const json::exception&) {
    return false;
  }
}

}  // namespace

std::vector<ConformanceCheck> run_conformance(const std::string& base_url) {
  std::vector<ConformanceCheck> checks;
  auto run = [&](const std::string& name, const std::function<std::string()>& body) {
    ConformanceCheck c{name, false, {}};
    try {
      c.detail = body();
      c.passed = c.detail.empty();
    } catch (const std::exception& e) {
      c.detail = e.what();
    }
    checks.push_back(std::move(c));
  };

  httplib::Client raw(base_url);
  raw.set_read_timeout(60, 0);
  BackendKind kind = BackendKind::RemoteMaskConditioned;
  bool healthy = false;

  run("health reports status ok and a known kind", [&]() -> std::string {
    RemoteGenerator probe(BackendDescriptor::remote(BackendKind::RemoteMaskConditioned, base_url));
    const auto status = probe.health();
    kind = status.kind;
    if (status.status != "ok") return "status is '" + status.status + "'";
    healthy = true;
    return {};
  });
  if (!healthy) return checks;

  const std::uint32_t native = kind == BackendKind::RemoteDiffusion ? 512 : 256;
  const auto good = sample_request(kind, native);
  const auto good_body = encode_request(good);

  run("generate at native resolution preserves shape", [&]() -> std::string {
    RemoteGenerator gen(BackendDescriptor::remote(kind, base_url));
    const auto result = gen.generate(good);
    if (result.backend_id.empty()) return "empty backend_id";
    return {};
  });

  run("generate at 64x64 preserves shape", [&]() -> std::string {
    RemoteGenerator gen(BackendDescriptor::remote(kind, base_url));
    gen.generate(sample_request(kind, 64));
    return {};
  });

  auto expect_status = [&](const std::string& payload, int lo, int hi) -> std::string {
    auto res = raw.Post("/v1/generate", payload, "application/json");
    if (!res) return "transport error: " + httplib::to_string(res.error());
    if (res->status < lo || res->status > hi) return "unexpected HTTP status " + std::to_string(res->status);
    if (!is_error_body(res)) return "error body lacks a string 'error' field";
    return {};
  };

  run("malformed JSON is rejected with 400", [&] { return expect_status("{not json", 400, 400); });

  run("missing field is rejected with 400", [&] {
    auto body = good_body;
    body.erase("seed");
    return expect_status(body.dump(), 400, 400);
  });

  run("unsupported protocol version is rejected with 4xx", [&] {
    auto body = good_body;
    body["version"] = "99.0";
    return expect_status(body.dump(), 400, 499);
  });

  run("mask_rect outside the patch is rejected with 422", [&] {
    auto body = good_body;
    body["mask_rect"]["x"] = native;
    return expect_status(body.dump(), 422, 422);
  });

  return checks;
}

}  // namespace cornerforge
