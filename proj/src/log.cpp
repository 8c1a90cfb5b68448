#include "tdmpc/log.hpp"

#include <spdlog/cfg/helpers.h>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <cstdlib>

namespace tdmpc {

void configure_logging()
{
  auto logger = spdlog::stderr_color_mt("tube_dmpc");
  spdlog::set_default_logger(logger);
  spdlog::set_level(spdlog::level::warn);
  if (const char* level = std::getenv("TUBE_DMPC_LOG"); level != nullptr) { spdlog::cfg::helpers::load_levels(level); }
}

}  // namespace tdmpc
