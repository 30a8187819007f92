#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "tcr/adaptation.hpp"
#include "tcr/synthetic.hpp"

namespace tcr {

enum class RunMode { base, tent, tcr, untrained, sweep, synth };

RunMode run_mode_from_string(const std::string& name);
std::string to_string(RunMode mode);

// Everything one invocation needs. The report file is deterministic given
// the config and seed; wall-clock time is intentionally kept out of it.
struct RunConfig {
  RunMode mode = RunMode::base;
  std::string query_path;
  std::string gallery_path;
  std::string truth_path;
  std::string report_path;
  std::string out_dir = ".";      // synth outputs land here
  std::string load_state_path;    // resume for tcr / tent
  std::string save_state_path;
  StreamConfig stream;
  BenchmarkSpec bench;
  std::vector<double> scale_grid = {1.0, 1.5, 2.0};
  std::vector<double> offset_grid = {0.0, 0.25, 0.5, 0.75, 1.0, 1.25, 1.5, 2.0};
};

// Checkpoint codec for the adaptation state.
nlohmann::ordered_json state_to_json(const AdaptationState& state);
AdaptationState state_from_json(const nlohmann::json& j);
void save_state(const std::string& path, const AdaptationState& state);
AdaptationState load_state(const std::string& path);

// Executes one mode end to end and returns the report document; writes it to
// config.report_path when set. Every numeric field is checked finite.
nlohmann::ordered_json run(const RunConfig& config);

}  // namespace tcr
