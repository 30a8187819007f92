#include <chrono>
#include <iostream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "tcr/errors.hpp"
#include "tcr/format.hpp"
#include "tcr/runner.hpp"

namespace {

void add_input_flags(CLI::App* cmd, tcr::RunConfig& config) {
  cmd->add_option("--queries", config.query_path, "Query embedding file")->required();
  cmd->add_option("--gallery", config.gallery_path, "Gallery embedding file")->required();
  cmd->add_option("--truth", config.truth_path, "Ground-truth tsv file")->required();
  cmd->add_option("--report", config.report_path,
                  "Report output path (omit to print the report to stdout)");
}

void add_stream_flags(CLI::App* cmd, tcr::RunConfig& config) {
  tcr::StreamConfig& s = config.stream;
  cmd->add_option("--batch-size", s.batch_size, "Stream batch size")->check(CLI::PositiveNumber);
  cmd->add_option("--tta-steps", s.tta_steps, "Inner adaptation steps per batch");
  cmd->add_option("--temperature", s.temperature, "Softmax temperature for predictions");
  cmd->add_option("--uniformity-t", s.uniformity_t, "Scale t in the uniformity loss");
  cmd->add_option("--source-like-fraction", s.source_like_fraction,
                  "Fraction of smallest-SI pairs kept per batch");
  cmd->add_option("--queue-capacity", s.queue_capacity,
                  "Constraint queue capacity (0 = batch size)");
  cmd->add_option("--queue-update-budget", s.queue_update_budget,
                  "Maximum number of queue updates");
  cmd->add_option("--seed", s.seed, "Run seed (echoed into the report)")
      ->envname("TCR_SEED");
  cmd->add_option("--learning-rate", s.optimizer.learning_rate, "AdamW learning rate");
  cmd->add_option("--beta1", s.optimizer.beta1, "AdamW beta1");
  cmd->add_option("--beta2", s.optimizer.beta2, "AdamW beta2");
  cmd->add_option("--epsilon", s.optimizer.epsilon, "AdamW epsilon");
  cmd->add_option("--weight-decay", s.optimizer.weight_decay,
                  "AdamW decoupled weight decay (anchored at the identity head)");
  cmd->add_flag("--reset-optimizer-per-batch", s.reset_optimizer_per_batch,
                "Clear optimizer moments at every batch");
  cmd->add_flag("--stop-gradient-center", s.stop_gradient_center,
                "Detach the batch mean in the uniformity loss gradient");
  cmd->add_option("--tent-temperature", s.tent_temperature,
                  "Softmax temperature for the tent baseline");
  cmd->add_option("--lambda-scale", s.lambda_scale,
                  "Uniformity scaling coefficient (untrained mode)");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Test-time adaptation for cross-modal retrieval in embedding space"};
  app.require_subcommand(1);
  app.set_config("--config", "", "Config file; command-line flags take precedence");

  tcr::RunConfig config;
  std::string mode_name = "base";
  double lambda_offset = 0.0;

  CLI::App* run_cmd = app.add_subcommand("run", "Evaluate a query stream in one mode");
  run_cmd->add_option("--mode", mode_name, "base | tent | tcr | untrained")
      ->check(CLI::IsMember({"base", "tent", "tcr", "untrained"}));
  add_input_flags(run_cmd, config);
  add_stream_flags(run_cmd, config);
  CLI::Option* lo_opt =
      run_cmd->add_option("--lambda-offset", lambda_offset,
                          "Force the offset coefficient in untrained mode (0 disables "
                          "rectification; omit to solve it from the estimated gap)");
  run_cmd->add_option("--load-state", config.load_state_path,
                      "Resume tcr/tent from a saved head/optimizer checkpoint");
  run_cmd->add_option("--save-state", config.save_state_path,
                      "Write the final head/optimizer checkpoint");

  CLI::App* synth_cmd = app.add_subcommand("synth", "Generate a synthetic shifted benchmark");
  tcr::BenchmarkSpec& bench = config.bench;
  std::string shift_name = "composite";
  synth_cmd->add_option("--out-dir", config.out_dir, "Directory for the generated files");
  synth_cmd->add_option("--report", config.report_path,
                        "Report output path (omit to print to stdout)");
  synth_cmd->add_option("--gallery-size", bench.gallery_size, "Gallery item count")
      ->check(CLI::PositiveNumber);
  synth_cmd->add_option("--query-count", bench.query_count, "Query count")
      ->check(CLI::PositiveNumber);
  synth_cmd->add_option("--dim", bench.dim, "Embedding dimension");
  synth_cmd->add_option("--pair-noise-sigma", bench.pair_noise_sigma,
                        "Noise linking each query to its gallery target");
  synth_cmd->add_option("--concentration", bench.concentration,
                        "Cone concentration of gallery rows, 0 = uniform sphere");
  CLI::Option* seed_opt = synth_cmd->add_option("--seed", bench.seed, "Benchmark seed")
                              ->envname("TCR_SEED");
  synth_cmd->add_option("--shift-kind", shift_name,
                        "none | compact | offset | gaussian_noise | composite");
  synth_cmd->add_option("--compact-factor", bench.shift.compact_factor,
                        "Scale of query deviations about their mean");
  synth_cmd->add_option("--offset-magnitude", bench.shift.offset_magnitude,
                        "Translation along a seeded random direction");
  synth_cmd->add_option("--noise-sigma", bench.shift.noise_sigma, "Additive Gaussian sigma");
  CLI::Option* shift_seed_opt =
      synth_cmd->add_option("--shift-seed", bench.shift.seed, "Shift seed (defaults to --seed)");

  CLI::App* sweep_cmd =
      app.add_subcommand("sweep", "Recall over geometry intervention grids");
  add_input_flags(sweep_cmd, config);
  sweep_cmd->add_option("--scale-grid", config.scale_grid, "Scale coefficients")
      ->delimiter(',');
  sweep_cmd->add_option("--offset-grid", config.offset_grid, "Offset coefficients")
      ->delimiter(',');
  sweep_cmd->add_option("--seed", config.stream.seed, "Run seed (echoed into the report)")
      ->envname("TCR_SEED");

  std::string inspect_path;
  CLI::App* inspect_cmd = app.add_subcommand("inspect", "Dump embedding file header and stats");
  inspect_cmd->add_option("file", inspect_path, "Embedding file")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (app.got_subcommand(inspect_cmd)) {
      const tcr::EmbeddingFileInfo info = tcr::inspect_embedding_file(inspect_path);
      nlohmann::ordered_json j;
      j["version"] = info.version;
      j["dim"] = info.dim;
      j["count"] = info.count;
      j["min_value"] = info.min_value;
      j["max_value"] = info.max_value;
      j["mean_norm"] = info.mean_norm;
      j["finite"] = info.finite;
      j["sample_ids"] = info.sample_ids;
      std::cout << j.dump(2) << "\n";
      return 0;
    }

    if (app.got_subcommand(run_cmd)) {
      config.mode = tcr::run_mode_from_string(mode_name);
      if (lo_opt->count() > 0) {
        config.stream.lambda_offset_override = lambda_offset;
      }
    } else if (app.got_subcommand(synth_cmd)) {
      config.mode = tcr::RunMode::synth;
      bench.shift.kind = tcr::shift_kind_from_string(shift_name);
      if (shift_seed_opt->count() == 0 && seed_opt->count() > 0) {
        bench.shift.seed = bench.seed;
      }
    } else {
      config.mode = tcr::RunMode::sweep;
    }

    const auto started = std::chrono::steady_clock::now();
    const nlohmann::ordered_json doc = tcr::run(config);
    const auto elapsed = std::chrono::duration<double, std::milli>(
                             std::chrono::steady_clock::now() - started)
                             .count();
    if (config.report_path.empty()) {
      std::cout << doc.dump(2) << "\n";
    } else {
      std::cout << "report written to " << config.report_path << "\n";
    }
    std::cerr << "wall_clock_ms " << elapsed << "\n";
    return 0;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
