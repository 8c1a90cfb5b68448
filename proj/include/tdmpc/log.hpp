#pragma once

namespace tdmpc {

/// Sets the global log level from TUBE_DMPC_LOG (trace, debug, info, warn, error, off). Default: warn.
void configure_logging();

}  // namespace tdmpc
