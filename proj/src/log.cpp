#include "cornerforge/log.hpp"

#include <cstdlib>

#include <spdlog/sinks/stdout_color_sinks.h>

namespace cornerforge::log {

void init_from_env() {
  auto logger = spdlog::stderr_color_mt("cornerforge");
  spdlog::set_default_logger(logger);
  spdlog::set_pattern("[%H:%M:%S] [%^%l%$] %v");
  spdlog::set_level(spdlog::level::warn);
  if (const char* level = std::getenv("CORNERFORGE_LOG")) {
    spdlog::set_level(spdlog::level::from_str(level));
  }
}

}  // namespace cornerforge::log
