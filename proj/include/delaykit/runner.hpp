#pragma once

#include <string>

#include "delaykit/config.hpp"

namespace delaykit {

struct RunResult {
  std::string out_dir;
  nlohmann::json metadata;
};

// Executes the configured task and writes the result CSVs, metadata.json and
// summary.txt into the run directory.  config_bytes is the raw config text
// (only its hash enters the auto-generated directory name); out_override and
// threads_override are the command-line switches, 0/"" meaning unset.
RunResult run_task(RunConfig cfg, const std::string& config_bytes,
                   const std::string& out_override, unsigned threads_override);

}  // namespace delaykit
