#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "tcr/adaptation.hpp"
#include "tcr/errors.hpp"
#include "tcr/runner.hpp"
#include "tcr/synthetic.hpp"

using namespace tcr;

namespace {

std::filesystem::path work_dir() {
  const auto dir = std::filesystem::temp_directory_path() / "tcr_runner_test";
  std::filesystem::create_directories(dir);
  return dir;
}

std::string slurp_text(const std::string& path) {
  std::ifstream in(path);
  REQUIRE(in.good());
  return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

// One small synthetic dataset on disk, generated once and reused.
struct Dataset {
  std::string gallery;
  std::string queries;
  std::string truth;
};

const Dataset& dataset() {
  static const Dataset d = [] {
    RunConfig config;
    config.mode = RunMode::synth;
    config.out_dir = (work_dir() / "data").string();
    config.bench.gallery_size = 120;
    config.bench.query_count = 60;
    config.bench.dim = 8;
    config.bench.pair_noise_sigma = 0.05;
    config.bench.seed = 9;
    config.bench.shift.seed = 9;
    const auto doc = run(config);
    return Dataset{doc["outputs"]["gallery"], doc["outputs"]["queries"],
                   doc["outputs"]["truth"]};
  }();
  return d;
}

RunConfig stream_run(RunMode mode) {
  RunConfig config;
  config.mode = mode;
  config.gallery_path = dataset().gallery;
  config.query_path = dataset().queries;
  config.truth_path = dataset().truth;
  config.stream.batch_size = 16;
  config.stream.seed = 9;
  return config;
}

AdaptationState sample_state() {
  AdaptationState state(3);
  state.head.gamma = {1.25, 0.75, 1.0};
  state.head.beta = {0.01, -0.02, 0.0};
  state.optimizer.m_gamma = {0.1, 0.2, 0.3};
  state.optimizer.v_gamma = {0.01, 0.02, 0.03};
  state.optimizer.m_beta = {-0.1, 0.0, 0.1};
  state.optimizer.v_beta = {0.001, 0.002, 0.003};
  state.optimizer.step_count = 7;
  return state;
}

}  // namespace

TEST_CASE("run mode names round-trip through the parser") {
  for (const RunMode mode : {RunMode::base, RunMode::tent, RunMode::tcr, RunMode::untrained,
                             RunMode::sweep, RunMode::synth}) {
    CHECK(run_mode_from_string(to_string(mode)) == mode);
  }
  CHECK_THROWS_AS(run_mode_from_string("adapt"), ConfigError);
}

TEST_CASE("adaptation state survives a checkpoint round-trip") {
  const AdaptationState state = sample_state();
  const std::string path = (work_dir() / "state.json").string();
  save_state(path, state);
  const AdaptationState back = load_state(path);
  CHECK(back.head.gamma == state.head.gamma);
  CHECK(back.head.beta == state.head.beta);
  CHECK(back.optimizer.m_gamma == state.optimizer.m_gamma);
  CHECK(back.optimizer.v_gamma == state.optimizer.v_gamma);
  CHECK(back.optimizer.m_beta == state.optimizer.m_beta);
  CHECK(back.optimizer.v_beta == state.optimizer.v_beta);
  CHECK(back.optimizer.step_count == state.optimizer.step_count);
}

TEST_CASE("state_from_json rejects inconsistent and non-finite checkpoints") {
  const AdaptationState state = sample_state();

  SUBCASE("mismatched field lengths") {
    auto j = state_to_json(state);
    j["beta"] = std::vector<double>{0.0};
    CHECK_THROWS_AS(state_from_json(j), ConfigError);
  }
  SUBCASE("non-finite head") {
    auto j = state_to_json(state);
    j["gamma"][0] = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS(state_from_json(j), NonFiniteError);
  }
  SUBCASE("missing key") {
    auto j = state_to_json(state);
    j.erase("optimizer");
    CHECK_THROWS(state_from_json(j));
  }
}

TEST_CASE("load_state reports a missing file") {
  CHECK_THROWS_AS(load_state((work_dir() / "no_such_state.json").string()), FileIoError);
}

TEST_CASE("synth mode writes a dataset whose base stats match a fresh base run") {
  const Dataset& d = dataset();
  CHECK(std::filesystem::exists(d.gallery));
  CHECK(std::filesystem::exists(d.queries));
  CHECK(std::filesystem::exists(d.truth));

  RunConfig synth;
  synth.mode = RunMode::synth;
  synth.out_dir = (work_dir() / "data2").string();
  synth.bench.gallery_size = 120;
  synth.bench.query_count = 60;
  synth.bench.dim = 8;
  synth.bench.pair_noise_sigma = 0.05;
  synth.bench.seed = 9;
  synth.bench.shift.seed = 9;
  const auto synth_doc = run(synth);
  CHECK(synth_doc["stats"]["gallery_count"] == 120);
  CHECK(synth_doc["stats"]["query_count"] == 60);
  CHECK(synth_doc["stats"]["dim"] == 8);

  const auto base_doc = run(stream_run(RunMode::base));
  CHECK(base_doc["results"]["recall_at"] == synth_doc["base"]["recall_at"]);
  CHECK(base_doc["results"]["modality_gap"] == synth_doc["base"]["modality_gap"]);
}

TEST_CASE("tcr with zero learning rate reports the base metrics unchanged") {
  RunConfig config = stream_run(RunMode::tcr);
  config.stream.optimizer.learning_rate = 0.0;
  const auto doc = run(config);
  CHECK(doc["after"]["recall_at"] == doc["before"]["recall_at"]);
  CHECK(doc["after"]["uniformity_query"] == doc["before"]["uniformity_query"]);
  CHECK(doc["after"]["modality_gap"] == doc["before"]["modality_gap"]);

  const auto base_doc = run(stream_run(RunMode::base));
  CHECK(doc["before"]["recall_at"] == base_doc["results"]["recall_at"]);
}

TEST_CASE("repeated runs write byte-identical reports") {
  RunConfig config = stream_run(RunMode::tcr);
  config.report_path = (work_dir() / "report_a.json").string();
  const auto doc_a = run(config);
  config.report_path = (work_dir() / "report_b.json").string();
  const auto doc_b = run(config);
  CHECK(doc_a == doc_b);
  const std::string a = slurp_text((work_dir() / "report_a.json").string());
  const std::string b = slurp_text((work_dir() / "report_b.json").string());
  CHECK(a == b);
  CHECK(a == doc_a.dump(2) + "\n");
}

TEST_CASE("trained modes emit trajectory, constraints and queue bookkeeping") {
  const auto doc = run(stream_run(RunMode::tcr));
  CHECK(doc["schema"] == 1);
  CHECK(doc["mode"] == "tcr");
  REQUIRE(doc.contains("after"));
  CHECK(doc["after"]["queue_updates"] == 4);  // 60 queries in batches of 16
  REQUIRE(doc["after"]["trajectory"].is_array());
  CHECK(doc["after"]["trajectory"].size() == 4);
  for (const auto& point : doc["after"]["trajectory"]) {
    CHECK(point.contains("loss"));
    CHECK(point["loss"].contains("total"));
  }
  CHECK(doc["after"].contains("constraints"));
}

TEST_CASE("untrained mode reports a trajectory without losses") {
  const auto doc = run(stream_run(RunMode::untrained));
  REQUIRE(doc["after"]["trajectory"].is_array());
  for (const auto& point : doc["after"]["trajectory"]) {
    CHECK_FALSE(point.contains("loss"));
  }
}

TEST_CASE("sweep mode reports one row per grid entry") {
  RunConfig config = stream_run(RunMode::sweep);
  config.scale_grid = {1.0, 2.0};
  config.offset_grid = {0.0, 1.0};
  const auto doc = run(config);
  REQUIRE(doc["sweep"].is_array());
  REQUIRE(doc["sweep"].size() == 4);
  CHECK(doc["sweep"][0]["intervention"] == "scale");
  CHECK(doc["sweep"][0]["lambda"] == 1.0);
  CHECK(doc["sweep"][3]["intervention"] == "offset");
  CHECK(doc["sweep"][3]["lambda"] == 1.0);
}

TEST_CASE("checkpoints pass the final state from one run into the next") {
  RunConfig first = stream_run(RunMode::tcr);
  first.save_state_path = (work_dir() / "chain_state.json").string();
  const auto first_doc = run(first);

  const AdaptationState saved = load_state(first.save_state_path);
  CHECK(saved.head.gamma.size() == 8);
  CHECK(saved.optimizer.step_count == 4);  // one optimizer step per batch

  RunConfig second = stream_run(RunMode::tcr);
  second.load_state_path = first.save_state_path;
  second.save_state_path = (work_dir() / "chain_state_2.json").string();
  run(second);
  const AdaptationState resumed = load_state(second.save_state_path);
  CHECK(resumed.optimizer.step_count == 8);
  CHECK(resumed.head.gamma != saved.head.gamma);

  RunConfig fresh = stream_run(RunMode::tcr);
  const auto fresh_doc = run(fresh);
  CHECK(fresh_doc == first_doc);
}

TEST_CASE("checkpoint flags are rejected outside the trained modes") {
  RunConfig config = stream_run(RunMode::base);
  config.save_state_path = (work_dir() / "never.json").string();
  CHECK_THROWS_AS(run(config), ConfigError);
  config.save_state_path.clear();
  config.load_state_path = (work_dir() / "never.json").string();
  CHECK_THROWS_AS(run(config), ConfigError);
}

TEST_CASE("stream modes demand all three input files") {
  RunConfig config = stream_run(RunMode::base);
  config.truth_path.clear();
  CHECK_THROWS_AS(run(config), ConfigError);
  config = stream_run(RunMode::tcr);
  config.gallery_path.clear();
  CHECK_THROWS_AS(run(config), ConfigError);
}
