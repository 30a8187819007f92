#include "tcr/runner.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>

#include "tcr/errors.hpp"
#include "tcr/format.hpp"
#include "tcr/metrics.hpp"
#include "tcr/untrained.hpp"

namespace tcr {

using nlohmann::ordered_json;

RunMode run_mode_from_string(const std::string& name) {
  if (name == "base") return RunMode::base;
  if (name == "tent") return RunMode::tent;
  if (name == "tcr") return RunMode::tcr;
  if (name == "untrained") return RunMode::untrained;
  if (name == "sweep") return RunMode::sweep;
  if (name == "synth") return RunMode::synth;
  throw ConfigError("unknown mode: " + name);
}

std::string to_string(RunMode mode) {
  switch (mode) {
    case RunMode::base: return "base";
    case RunMode::tent: return "tent";
    case RunMode::tcr: return "tcr";
    case RunMode::untrained: return "untrained";
    case RunMode::sweep: return "sweep";
    case RunMode::synth: return "synth";
  }
  throw ConfigError("unknown mode value");
}

ordered_json state_to_json(const AdaptationState& state) {
  ordered_json j;
  j["schema"] = 1;
  j["gamma"] = state.head.gamma;
  j["beta"] = state.head.beta;
  j["optimizer"]["m_gamma"] = state.optimizer.m_gamma;
  j["optimizer"]["v_gamma"] = state.optimizer.v_gamma;
  j["optimizer"]["m_beta"] = state.optimizer.m_beta;
  j["optimizer"]["v_beta"] = state.optimizer.v_beta;
  j["optimizer"]["step_count"] = state.optimizer.step_count;
  return j;
}

AdaptationState state_from_json(const nlohmann::json& j) {
  AdaptationState state;
  state.head.gamma = j.at("gamma").get<std::vector<double>>();
  state.head.beta = j.at("beta").get<std::vector<double>>();
  const auto& opt = j.at("optimizer");
  state.optimizer.m_gamma = opt.at("m_gamma").get<std::vector<double>>();
  state.optimizer.v_gamma = opt.at("v_gamma").get<std::vector<double>>();
  state.optimizer.m_beta = opt.at("m_beta").get<std::vector<double>>();
  state.optimizer.v_beta = opt.at("v_beta").get<std::vector<double>>();
  state.optimizer.step_count = opt.at("step_count").get<long>();
  const std::size_t dim = state.head.gamma.size();
  if (state.head.beta.size() != dim || state.optimizer.m_gamma.size() != dim ||
      state.optimizer.v_gamma.size() != dim || state.optimizer.m_beta.size() != dim ||
      state.optimizer.v_beta.size() != dim) {
    throw ConfigError("checkpoint fields have inconsistent lengths");
  }
  if (!all_finite(state.head.gamma) || !all_finite(state.head.beta)) {
    throw NonFiniteError("checkpointed head contains non-finite values");
  }
  return state;
}

void save_state(const std::string& path, const AdaptationState& state) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) {
    throw FileIoError("cannot open " + path + " for writing");
  }
  out << state_to_json(state).dump(2) << '\n';
  if (!out) {
    throw FileIoError("short write to " + path);
  }
}

AdaptationState load_state(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw FileIoError("cannot open " + path);
  }
  nlohmann::json j;
  in >> j;
  return state_from_json(j);
}

namespace {

ordered_json recall_json(const RetrievalReport& r) {
  ordered_json j;
  for (const auto& [k, v] : r.recall_at) {
    j[std::to_string(k)] = v;
  }
  return j;
}

ordered_json metrics_json(const RetrievalReport& r) {
  ordered_json j;
  j["recall_at"] = recall_json(r);
  j["uniformity_query"] = r.uniformity_query;
  j["uniformity_gallery"] = r.uniformity_gallery;
  j["modality_gap"] = r.modality_gap;
  return j;
}

ordered_json trajectory_json(const RetrievalReport& r) {
  ordered_json arr = ordered_json::array();
  for (const TrajectoryPoint& p : r.per_batch_trajectory) {
    ordered_json row;
    row["batch"] = p.batch_index;
    row["recall_at_1"] = p.recall_at_1;
    row["uniformity"] = p.uniformity;
    row["gap"] = p.gap;
    if (p.losses) {
      row["loss"]["uniformity"] = p.losses->uniformity;
      row["loss"]["gap"] = p.losses->gap;
      row["loss"]["noise"] = p.losses->noise;
      row["loss"]["total"] = p.losses->total;
    }
    arr.push_back(std::move(row));
  }
  return arr;
}

ordered_json adapted_json(const RetrievalReport& r) {
  ordered_json j = metrics_json(r);
  if (r.constraints) {
    j["constraints"]["delta_s"] = r.constraints->delta_s;
    j["constraints"]["e_m"] = r.constraints->e_m;
  }
  j["queue_updates"] = r.queue_updates;
  j["trajectory"] = trajectory_json(r);
  return j;
}

ordered_json stream_config_json(const StreamConfig& c) {
  ordered_json j;
  j["batch_size"] = c.batch_size;
  j["tta_steps"] = c.tta_steps;
  j["temperature"] = c.temperature;
  j["uniformity_t"] = c.uniformity_t;
  j["source_like_fraction"] = c.source_like_fraction;
  j["queue_capacity"] = c.effective_queue_capacity();
  j["queue_update_budget"] = c.queue_update_budget;
  j["seed"] = c.seed;
  j["learning_rate"] = c.optimizer.learning_rate;
  j["beta1"] = c.optimizer.beta1;
  j["beta2"] = c.optimizer.beta2;
  j["epsilon"] = c.optimizer.epsilon;
  j["weight_decay"] = c.optimizer.weight_decay;
  j["reset_optimizer_per_batch"] = c.reset_optimizer_per_batch;
  j["stop_gradient_center"] = c.stop_gradient_center;
  j["tent_temperature"] = c.tent_temperature;
  j["lambda_scale"] = c.lambda_scale;
  if (c.lambda_offset_override) {
    j["lambda_offset_override"] = *c.lambda_offset_override;
  } else {
    j["lambda_offset_override"] = nullptr;
  }
  return j;
}

ordered_json bench_config_json(const BenchmarkSpec& b) {
  ordered_json j;
  j["gallery_size"] = b.gallery_size;
  j["query_count"] = b.query_count;
  j["dim"] = b.dim;
  j["pair_noise_sigma"] = b.pair_noise_sigma;
  j["concentration"] = b.concentration;
  j["seed"] = b.seed;
  j["shift"]["kind"] = to_string(b.shift.kind);
  j["shift"]["compact_factor"] = b.shift.compact_factor;
  j["shift"]["offset_magnitude"] = b.shift.offset_magnitude;
  j["shift"]["noise_sigma"] = b.shift.noise_sigma;
  j["shift"]["seed"] = b.shift.seed;
  return j;
}

ordered_json config_echo(const RunConfig& config) {
  ordered_json j;
  j["mode"] = to_string(config.mode);
  if (config.mode == RunMode::synth) {
    j["out_dir"] = config.out_dir;
    j["bench"] = bench_config_json(config.bench);
    return j;
  }
  j["files"]["queries"] = config.query_path;
  j["files"]["gallery"] = config.gallery_path;
  j["files"]["truth"] = config.truth_path;
  if (config.mode == RunMode::sweep) {
    j["scale_grid"] = config.scale_grid;
    j["offset_grid"] = config.offset_grid;
  } else {
    j["stream"] = stream_config_json(config.stream);
  }
  return j;
}

void assert_json_finite(const nlohmann::ordered_json& j) {
  if (j.is_number_float() && !std::isfinite(j.get<double>())) {
    throw NonFiniteError("report contains a non-finite number");
  }
  if (j.is_object() || j.is_array()) {
    for (const auto& child : j) {
      assert_json_finite(child);
    }
  }
}

struct LoadedInputs {
  GalleryStore gallery;
  StreamInput queries;
  TruthMap truth;
};

LoadedInputs load_inputs(const RunConfig& config) {
  if (config.gallery_path.empty() || config.query_path.empty() || config.truth_path.empty()) {
    throw ConfigError("mode " + to_string(config.mode) +
                      " needs --queries, --gallery and --truth");
  }
  return LoadedInputs{load_gallery(config.gallery_path), load_queries(config.query_path),
                      read_truth_file(config.truth_path)};
}

ordered_json run_synth(const RunConfig& config) {
  const Benchmark bench = make_benchmark(config.bench);
  const std::filesystem::path dir(config.out_dir);
  std::filesystem::create_directories(dir);
  const std::string gallery_path = (dir / "gallery.emb").string();
  const std::string queries_path = (dir / "queries.emb").string();
  const std::string truth_path = (dir / "truth.tsv").string();
  write_embedding_file(gallery_path, bench.gallery.embeddings(), bench.gallery.ids());
  write_embedding_file(queries_path, bench.shifted_queries, bench.query_ids);
  write_truth_file(truth_path, bench.query_ids, bench.truth);

  // Read everything back: proves the files parse and bases the reported
  // stats on what a consumer will actually see (float32 rounding included).
  const GalleryStore gallery = load_gallery(gallery_path);
  const StreamInput queries = load_queries(queries_path);
  const TruthMap truth = read_truth_file(truth_path);
  const RetrievalReport base = evaluate_base(queries, gallery, truth);

  ordered_json j;
  j["outputs"]["gallery"] = gallery_path;
  j["outputs"]["queries"] = queries_path;
  j["outputs"]["truth"] = truth_path;
  j["stats"]["gallery_count"] = gallery.size();
  j["stats"]["query_count"] = queries.raw_queries.rows();
  j["stats"]["dim"] = gallery.dim();
  j["base"] = metrics_json(base);
  return j;
}

}  // namespace

ordered_json run(const RunConfig& config) {
  ordered_json doc;
  doc["schema"] = 1;
  doc["mode"] = to_string(config.mode);
  doc["config"] = config_echo(config);

  const bool trains = config.mode == RunMode::tcr || config.mode == RunMode::tent;
  if (!trains && (!config.load_state_path.empty() || !config.save_state_path.empty())) {
    throw ConfigError("state checkpoints only apply to tcr and tent");
  }

  switch (config.mode) {
    case RunMode::synth: {
      const ordered_json synth = run_synth(config);
      for (const auto& [key, value] : synth.items()) {
        doc[key] = value;
      }
      break;
    }
    case RunMode::base: {
      const LoadedInputs in = load_inputs(config);
      doc["results"] = metrics_json(evaluate_base(in.queries, in.gallery, in.truth));
      break;
    }
    case RunMode::sweep: {
      const LoadedInputs in = load_inputs(config);
      const std::vector<SweepRow> rows = sweep_interventions(
          in.queries.raw_queries, in.queries.query_ids, in.gallery, in.truth,
          config.scale_grid, config.offset_grid);
      ordered_json arr = ordered_json::array();
      for (const SweepRow& row : rows) {
        ordered_json r;
        r["intervention"] = row.intervention;
        r["lambda"] = row.lambda;
        r["recall_at_1"] = row.recall_at_1;
        arr.push_back(std::move(r));
      }
      doc["sweep"] = std::move(arr);
      break;
    }
    case RunMode::untrained: {
      const LoadedInputs in = load_inputs(config);
      doc["before"] = metrics_json(evaluate_base(in.queries, in.gallery, in.truth));
      doc["after"] = adapted_json(run_untrained(in.queries, in.gallery, in.truth, config.stream));
      break;
    }
    case RunMode::tent:
    case RunMode::tcr: {
      const LoadedInputs in = load_inputs(config);
      doc["before"] = metrics_json(evaluate_base(in.queries, in.gallery, in.truth));
      AdaptationState state;
      if (!config.load_state_path.empty()) {
        state = load_state(config.load_state_path);
      }
      const RetrievalReport after =
          config.mode == RunMode::tcr
              ? run_stream(in.queries, in.gallery, in.truth, config.stream, &state)
              : tent_baseline(in.queries, in.gallery, in.truth, config.stream, &state);
      doc["after"] = adapted_json(after);
      if (!config.save_state_path.empty()) {
        save_state(config.save_state_path, state);
      }
      break;
    }
  }

  assert_json_finite(doc);
  if (!config.report_path.empty()) {
    std::ofstream out(config.report_path, std::ios::trunc);
    if (!out) {
      throw FileIoError("cannot open " + config.report_path + " for writing");
    }
    out << doc.dump(2) << '\n';
    if (!out) {
      throw FileIoError("short write to " + config.report_path);
    }
  }
  return doc;
}

}  // namespace tcr
