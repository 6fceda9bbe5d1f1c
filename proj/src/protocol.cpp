#include "cornerforge/protocol.hpp"

#include <array>
#include <thread>

#include <httplib.h>

#include "cornerforge/image_io.hpp"
#include "cornerforge/log.hpp"

namespace cornerforge {

using nlohmann::json;

namespace {

constexpr char kAlphabet[] = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";

constexpr std::array<int, 256> make_reverse() {
  std::array<int, 256> rev{};
  for (auto& v : rev) v = -1;
  for (int i = 0; i < 64; ++i) rev[static_cast<unsigned char>(kAlphabet[i])] = i;
  return rev;
}

constexpr auto kReverse = make_reverse();

[[noreturn]] void protocol_error(const std::string& what) { throw Error(ErrorCode::ProtocolError, what); }

}  // namespace

std::string base64_encode(const std::vector<std::uint8_t>& bytes) {
  std::string out;
  out.reserve((bytes.size() + 2) / 3 * 4);
  std::size_t i = 0;
  for (; i + 2 < bytes.size(); i += 3) {
    const std::uint32_t v = (bytes[i] << 16) | (bytes[i + 1] << 8) | bytes[i + 2];
    out += kAlphabet[(v >> 18) & 63];
    out += kAlphabet[(v >> 12) & 63];
    out += kAlphabet[(v >> 6) & 63];
    out += kAlphabet[v & 63];
  }
  if (const std::size_t rest = bytes.size() - i; rest > 0) {
    std::uint32_t v = bytes[i] << 16;
    if (rest == 2) v |= bytes[i + 1] << 8;
    out += kAlphabet[(v >> 18) & 63];
    out += kAlphabet[(v >> 12) & 63];
    out += rest == 2 ? kAlphabet[(v >> 6) & 63] : '=';
    out += '=';
  }
  return out;
}

std::vector<std::uint8_t> base64_decode(std::string_view text) {
  if (text.size() % 4 != 0) throw Error(ErrorCode::ParseError, "base64 length is not a multiple of 4");
  std::vector<std::uint8_t> out;
  out.reserve(text.size() / 4 * 3);
  for (std::size_t i = 0; i < text.size(); i += 4) {
    const bool last = i + 4 == text.size();
    int pad = 0;
    std::uint32_t v = 0;
    for (std::size_t k = 0; k < 4; ++k) {
      const char c = text[i + k];
      if (c == '=') {
        if (!last || k < 2) throw Error(ErrorCode::ParseError, "misplaced base64 padding");
        ++pad;
        v <<= 6;
        continue;
      }
      if (pad > 0) throw Error(ErrorCode::ParseError, "data after base64 padding");
      const int d = kReverse[static_cast<unsigned char>(c)];
      if (d < 0) throw Error(ErrorCode::ParseError, "invalid base64 character");
      v = (v << 6) | static_cast<std::uint32_t>(d);
    }
    out.push_back(static_cast<std::uint8_t>(v >> 16));
    if (pad < 2) out.push_back(static_cast<std::uint8_t>(v >> 8));
    if (pad < 1) out.push_back(static_cast<std::uint8_t>(v));
  }
  return out;
}

ImageBuffer decode_wire_png(const std::vector<std::uint8_t>& bytes) {
  // IHDR is always the first chunk: bit depth at byte 24, color type at 25.
  if (bytes.size() < 33) throw Error(ErrorCode::ParseError, "PNG too short");
  const auto image = decode_png(bytes);
  if (bytes[24] != 8 || bytes[25] != 2) throw Error(ErrorCode::ParseError, "PNG is not 8-bit RGB");
  return image;
}

json encode_request(const GenerationRequest& req) {
  const bool conditioned = req.is_conditioned();
  json body;
  body["version"] = req.protocol_version;
  body["kind"] = conditioned ? "mask_conditioned" : "diffusion";
  body["class_name"] = req.class_name;
  body["class_id"] = req.class_id;
  body["seed"] = req.seed;
  body["mask_rect"] = {{"x", req.mask_rect.x}, {"y", req.mask_rect.y}, {"w", req.mask_rect.w}, {"h", req.mask_rect.h}};
  body["prompt"] = req.prompt ? json(*req.prompt) : json(nullptr);
  body["patch_png"] = base64_encode(encode_png(req.patch()));
  body["params"] = json::object();
  for (const auto& [k, v] : req.backend_params) body["params"][k] = v;
  return body;
}

WireRequest decode_request(const json& body) {
  auto parse_error = [](const std::string& what) { return Error(ErrorCode::ParseError, what); };
  if (!body.is_object()) throw parse_error("request body must be a JSON object");
  auto field = [&](const char* name, json::value_t type) -> const json& {
    auto it = body.find(name);
    if (it == body.end()) throw parse_error(std::string("missing field '") + name + "'");
    const bool ok = type == json::value_t::number_integer ? it->is_number_integer() : it->type() == type;
    if (!ok) throw parse_error(std::string("field '") + name + "' has the wrong type");
    return *it;
  };

  WireRequest req;
  req.version = field("version", json::value_t::string).get<std::string>();
  if (req.version != kProtocolVersion) {
    throw Error(ErrorCode::ProtocolError, "unsupported protocol version '" + req.version + "'");
  }
  const auto kind = field("kind", json::value_t::string).get<std::string>();
  if (kind == "mask_conditioned") {
    req.kind = BackendKind::RemoteMaskConditioned;
  } else if (kind == "diffusion") {
    req.kind = BackendKind::RemoteDiffusion;
  } else {
    throw parse_error("unknown kind '" + kind + "'");
  }
  req.class_name = field("class_name", json::value_t::string).get<std::string>();
  const auto class_id = field("class_id", json::value_t::number_integer).get<std::int64_t>();
  if (class_id < 0 || class_id > 0xFFFF) throw parse_error("class_id out of range");
  req.class_id = static_cast<std::uint16_t>(class_id);
  const auto& seed = body.find("seed");
  if (seed == body.end() || !seed->is_number_integer()) throw parse_error("missing or non-integer field 'seed'");
  req.seed = seed->get<std::uint64_t>();

  const auto& rect = field("mask_rect", json::value_t::object);
  for (const char* k : {"x", "y", "w", "h"}) {
    if (!rect.contains(k) || !rect[k].is_number_integer()) {
      throw parse_error(std::string("mask_rect.") + k + " missing or not an integer");
    }
  }
  req.mask_rect = {rect["x"].get<std::int64_t>(), rect["y"].get<std::int64_t>(), rect["w"].get<std::int64_t>(),
                   rect["h"].get<std::int64_t>()};

  const auto prompt = body.find("prompt");
  if (prompt == body.end()) throw parse_error("missing field 'prompt'");
  if (prompt->is_string()) {
    req.prompt = prompt->get<std::string>();
  } else if (!prompt->is_null()) {
    throw parse_error("field 'prompt' must be a string or null");
  }

  req.patch = decode_wire_png(base64_decode(field("patch_png", json::value_t::string).get<std::string>()));

  const auto& params = field("params", json::value_t::object);
  for (const auto& [k, v] : params.items()) {
    if (!v.is_string()) throw parse_error("params values must be strings");
    req.params[k] = v.get<std::string>();
  }

  if (!req.mask_rect.fits_in(req.patch.width(), req.patch.height())) {
    throw Error(ErrorCode::DimensionMismatch, "mask_rect does not fit the patch");
  }
  return req;
}

json encode_response(const ImageBuffer& patch, const std::string& backend_id) {
  return {{"patch_png", base64_encode(encode_png(patch))}, {"backend_id", backend_id}};
}

struct RemoteGenerator::Impl {
  BackendDescriptor backend;
  httplib::Client client;
  std::string last_backend_id = "remote";

  explicit Impl(const BackendDescriptor& b) : backend(b), client(*b.endpoint) {
    const auto t = backend.timeout;
    const auto secs = std::chrono::duration_cast<std::chrono::seconds>(t);
    const auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(t - secs);
    client.set_connection_timeout(secs.count(), usecs.count());
    client.set_read_timeout(secs.count(), usecs.count());
    client.set_write_timeout(secs.count(), usecs.count());
    client.set_keep_alive(true);
  }

  // One retry on transport failure, then a hard error.
  template <typename Call>
  httplib::Result with_retry(Call&& call, const std::string& what) {
    httplib::Error last = httplib::Error::Unknown;
    bool timed_out = false;
    for (int attempt = 0; attempt < 2; ++attempt) {
      const auto start = std::chrono::steady_clock::now();
      auto res = call();
      if (res) return res;
      last = res.error();
      const auto elapsed = std::chrono::steady_clock::now() - start;
      timed_out = last == httplib::Error::ConnectionTimeout ||
                  (last == httplib::Error::Read && elapsed >= backend.timeout * 9 / 10);
      log::warn("{} to {} failed (attempt {}): {}", what, *backend.endpoint, attempt + 1, httplib::to_string(last));
    }
    if (timed_out) {
      throw Error(ErrorCode::GenerationTimeout, what + " timed out after " +
                                                    std::to_string(backend.timeout.count()) + " ms");
    }
    throw Error(ErrorCode::BackendUnreachable, what + " to " + *backend.endpoint + ": " + httplib::to_string(last));
  }
};

[[noreturn]] static void rejected(const httplib::Response& res) {
  std::string message;
  try {
    const auto body = json::parse(res.body);
    if (body.is_object() && body.contains("error") && body["error"].is_string()) {
      message = body["error"].get<std::string>();
    }
  } catch (const json::exception&) {
  }
  if (message.empty()) message = res.body.substr(0, 200);
  throw Error(ErrorCode::BackendRejected, "HTTP " + std::to_string(res.status) + ": " + message);
}

RemoteGenerator::RemoteGenerator(const BackendDescriptor& backend) {
  backend.validate();
  impl_ = std::make_unique<Impl>(backend);
}

RemoteGenerator::~RemoteGenerator() = default;

std::string RemoteGenerator::backend_id() const { return impl_->last_backend_id; }

HealthStatus RemoteGenerator::health() {
  auto res = impl_->with_retry([&] { return impl_->client.Get("/v1/health"); }, "GET /v1/health");
  if (res->status != 200) rejected(*res);
  json body;
  try {
    body = json::parse(res->body);
  } catch (const json::exception& e) {
    protocol_error(std::string("health response is not JSON: ") + e.what());
  }
  if (!body.is_object() || !body.contains("status") || !body["status"].is_string() || !body.contains("kind") ||
      !body["kind"].is_string()) {
    protocol_error("health response lacks string fields 'status' and 'kind'");
  }
  HealthStatus status;
  status.status = body["status"].get<std::string>();
  const auto kind = body["kind"].get<std::string>();
  if (kind == "mask_conditioned") {
    status.kind = BackendKind::RemoteMaskConditioned;
  } else if (kind == "diffusion") {
    status.kind = BackendKind::RemoteDiffusion;
  } else {
    protocol_error("health reports unknown kind '" + kind + "'");
  }
  return status;
}

GenerationResult RemoteGenerator::generate(const GenerationRequest& req) {
  validate_request(impl_->backend, req);
  const std::string payload = encode_request(req).dump();
  const auto start = std::chrono::steady_clock::now();
  auto res = impl_->with_retry([&] { return impl_->client.Post("/v1/generate", payload, "application/json"); },
                               "POST /v1/generate");
  const auto latency =
      std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - start);
  if (res->status != 200) rejected(*res);

  json body;
  try {
    body = json::parse(res->body);
  } catch (const json::exception& e) {
    protocol_error(std::string("response is not JSON: ") + e.what());
  }
  if (!body.is_object()) protocol_error("response is not a JSON object");
  if (!body.contains("patch_png") || !body["patch_png"].is_string()) protocol_error("response lacks 'patch_png'");
  if (!body.contains("backend_id") || !body["backend_id"].is_string()) protocol_error("response lacks 'backend_id'");

  ImageBuffer patch{1, 1};
  try {
    patch = decode_wire_png(base64_decode(body["patch_png"].get_ref<const std::string&>()));
  } catch (const Error& e) {
    protocol_error(std::string("bad patch_png: ") + e.what());
  }
  const auto& expected = req.patch();
  if (patch.width() != expected.width() || patch.height() != expected.height()) {
    protocol_error("patch is " + std::to_string(patch.width()) + "x" + std::to_string(patch.height()) +
                   ", request was " + std::to_string(expected.width()) + "x" + std::to_string(expected.height()));
  }
  impl_->last_backend_id = body["backend_id"].get<std::string>();
  return {std::move(patch), impl_->last_backend_id, latency};
}

}  // namespace cornerforge
