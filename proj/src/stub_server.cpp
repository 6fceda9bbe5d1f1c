#include "cornerforge/stub_server.hpp"

#include <atomic>
#include <thread>

#include <httplib.h>

#include "cornerforge/image_io.hpp"
#include "cornerforge/protocol.hpp"

namespace cornerforge {

using nlohmann::json;

struct StubServer::Impl {
  BackendKind kind;
  StubMode mode;
  std::chrono::milliseconds slow_delay;
  httplib::Server server;
  std::thread thread;
  int port = -1;
  std::atomic<int> calls{0};

  void reply_error(httplib::Response& res, int status, const std::string& message) {
    res.status = status;
    res.set_content(json{{"error", message}}.dump(), "application/json");
  }

  void handle_generate(const httplib::Request& req, httplib::Response& res) {
    ++calls;
    json body;
    try {
      body = json::parse(req.body);
    } catch (const json::exception& e) {
      return reply_error(res, 400, std::string("malformed JSON: ") + e.what());
    }
    WireRequest wire;
    try {
      wire = decode_request(body);
    } catch (const Error& e) {
      return reply_error(res, e.code() == ErrorCode::DimensionMismatch ? 422 : 400, e.what());
    }
    if (wire.kind != kind) {
      return reply_error(res, 422, "server kind is " + std::string(to_string(kind)));
    }

    switch (mode) {
      case StubMode::Echo:
        break;
      case StubMode::WrongSize: {
        const std::uint32_t w = wire.patch.width() > 1 ? wire.patch.width() - 1 : 2;
        res.set_content(encode_response(ImageBuffer(w, wire.patch.height()), "stub/echo").dump(), "application/json");
        return;
      }
      case StubMode::NotJson:
        res.set_content("<html>definitely not json</html>", "text/html");
        return;
      case StubMode::MissingPatch:
        res.set_content(json{{"backend_id", "stub/echo"}}.dump(), "application/json");
        return;
      case StubMode::BadBase64:
        res.set_content(json{{"patch_png", "!!!not base64!!!"}, {"backend_id", "stub/echo"}}.dump(),
                        "application/json");
        return;
      case StubMode::NotPng:
        res.set_content(json{{"patch_png", base64_encode({'h', 'e', 'l', 'l', 'o', '!'})}, {"backend_id", "stub"}}.dump(),
                        "application/json");
        return;
      case StubMode::GrayPng: {
        const auto bytes = encode_mask_png(BinaryMask(wire.patch.width(), wire.patch.height(), true));
        res.set_content(json{{"patch_png", base64_encode(bytes)}, {"backend_id", "stub"}}.dump(), "application/json");
        return;
      }
      case StubMode::ServerError:
        return reply_error(res, 500, "stub inference failure");
      case StubMode::Slow:
        std::this_thread::sleep_for(slow_delay);
        break;
    }
    res.set_content(encode_response(wire.patch, "stub/echo").dump(), "application/json");
  }
};

StubServer::StubServer(BackendKind kind, StubMode mode, std::chrono::milliseconds slow_delay)
    : impl_(std::make_unique<Impl>()) {
  if (kind == BackendKind::Procedural) throw Error(ErrorCode::ConfigInvalid, "stub server needs a remote kind");
  impl_->kind = kind;
  impl_->mode = mode;
  impl_->slow_delay = slow_delay;
  auto& server = impl_->server;
  server.Get("/v1/health", [this](const httplib::Request&, httplib::Response& res) {
    res.set_content(json{{"status", "ok"}, {"kind", to_string(impl_->kind)}}.dump(), "application/json");
  });
  server.Post("/v1/generate",
              [this](const httplib::Request& req, httplib::Response& res) { impl_->handle_generate(req, res); });
  impl_->port = server.bind_to_any_port("127.0.0.1");
  if (impl_->port < 0) throw Error(ErrorCode::IoError, "stub server could not bind");
  impl_->thread = std::thread([this] { impl_->server.listen_after_bind(); });
  impl_->server.wait_until_ready();
}

StubServer::~StubServer() { stop(); }

std::string StubServer::url() const { return "http://127.0.0.1:" + std::to_string(impl_->port); }
int StubServer::port() const { return impl_->port; }
int StubServer::generate_calls() const { return impl_->calls.load(); }

void StubServer::wait() {
  if (impl_->thread.joinable()) impl_->thread.join();
}

void StubServer::stop() {
  impl_->server.stop();
  if (impl_->thread.joinable()) impl_->thread.join();
}

}  // namespace cornerforge
