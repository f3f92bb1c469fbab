#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "delaykit/billiard.hpp"
#include "delaykit/distribution.hpp"
#include "delaykit/envelope.hpp"
#include "delaykit/smatrix.hpp"

namespace delaykit {

// Fully validated run description with all defaults filled in.  `resolved`
// holds the JSON echo of the effective configuration for the run metadata.
struct RunConfig {
  std::string task;
  Dispersion dispersion = Dispersion::qm_quadratic;
  DistributionOptions options;
  int channel_in = 0;
  std::optional<int> channel_out;

  std::optional<SMatrixModel> model;
  std::optional<Envelope> envelope;
  std::optional<DelayGrid> grid;  // absent -> automatic coverage

  // ws_limit task
  double carrier = 0.0;  // k0 in EM mode, E0 in quantum mode
  std::vector<double> sigmas;

  // billiard tasks
  std::optional<DiscConfiguration> geometry;
  std::vector<Vec2> dirs_in;
  std::vector<Vec2> dirs_out;
  int m_max = 6;
  double bin_width = 0.5;
  std::vector<double> k_values;

  // escape task
  std::size_t n_samples = 100000;
  double s_max = 40.0;
  std::pair<double, double> fit_window{0.0, 0.0};
  std::size_t survival_grid = 600;

  std::uint64_t seed = 1;
  std::string out_dir;  // empty -> auto-named run directory

  nlohmann::json resolved;
  std::vector<std::string> warnings;
};

// Reads and validates a JSON run configuration.  Violations raise SchemaError
// naming the offending field; in strict mode unknown keys are errors, else
// they are collected into RunConfig::warnings.
RunConfig parse_config(const std::string& path, bool strict = false);
RunConfig parse_config_json(const nlohmann::json& j, bool strict = false);

}  // namespace delaykit
