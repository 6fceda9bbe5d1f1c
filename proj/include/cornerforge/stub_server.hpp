#pragma once

#include <chrono>
#include <memory>
#include <string>

#include "cornerforge/backend.hpp"

namespace cornerforge {

/// In-process protocol server. In Echo mode it returns the request patch
/// unchanged, which is enough to exercise every shape and framing rule.
/// The other modes reply with a specific defect.
enum class StubMode {
  Echo,
  WrongSize,       // 200 with a patch one pixel narrower
  NotJson,         // 200 with a non-JSON body
  MissingPatch,    // 200 JSON without patch_png
  BadBase64,       // 200 with patch_png that is not base64
  NotPng,          // 200 with base64 of non-PNG bytes
  GrayPng,         // 200 with an 8-bit grayscale PNG
  ServerError,     // 500 {"error": ...}
  Slow,            // sleeps past the client timeout, then echoes
};

class StubServer {
 public:
  explicit StubServer(BackendKind kind = BackendKind::RemoteMaskConditioned, StubMode mode = StubMode::Echo,
                      std::chrono::milliseconds slow_delay = std::chrono::milliseconds(1500));
  ~StubServer();
  StubServer(const StubServer&) = delete;
  StubServer& operator=(const StubServer&) = delete;

  /// Base URL, e.g. "http://127.0.0.1:40123".
  std::string url() const;
  int port() const;
  /// Number of POST /v1/generate calls received.
  int generate_calls() const;

  /// Blocks until stop() is called from another thread (used by the CLI).
  void wait();
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace cornerforge
