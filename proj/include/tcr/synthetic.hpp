#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "tcr/gallery.hpp"
#include "tcr/matrix.hpp"
#include "tcr/metrics.hpp"

namespace tcr {

enum class ShiftKind { none, compact, offset, gaussian_noise, composite };

// Recipe for corrupting a clean query set. compact pulls rows toward their
// mean, offset translates them along a seeded random unit direction, noise
// adds isotropic Gaussian jitter; composite chains all three.
struct ShiftSpec {
  ShiftKind kind = ShiftKind::composite;
  double compact_factor = 0.5;
  double offset_magnitude = 0.6;
  double noise_sigma = 0.12;
  std::uint64_t seed = 1;
};

ShiftKind shift_kind_from_string(const std::string& name);
std::string to_string(ShiftKind kind);

// Shifted copies of the rows, left un-normalized (the stream payload is raw
// features).
Matrix apply_shift(const Matrix& queries, const ShiftSpec& spec);

// Shape of a generated retrieval benchmark. concentration in [0, 1) mixes a
// seeded center direction into every gallery row: 0 spreads rows uniformly
// over the sphere, values near 1 crowd them into a narrow cone, mimicking the
// cone-shaped embedding regions contrastive encoders produce.
struct BenchmarkSpec {
  std::size_t gallery_size = 10000;
  std::size_t query_count = 2000;
  std::size_t dim = 64;
  double pair_noise_sigma = 0.1;
  double concentration = 0.0;
  std::uint64_t seed = 1;
  ShiftSpec shift;
};

struct Benchmark {
  GalleryStore gallery;
  Matrix source_queries;   // unit rows, before the shift
  Matrix shifted_queries;  // raw rows, after the shift
  std::vector<std::string> query_ids;
  TruthMap truth;
};

// Gallery on the unit sphere; each query is a noisy copy of a distinct
// gallery item (sampled without replacement) and is then shifted per the
// spec. Fully determined by the spec.
Benchmark make_benchmark(const BenchmarkSpec& spec);

// One sweep measurement: recall@1 over the whole query set after applying a
// single intervention with the given coefficient.
struct SweepRow {
  std::string intervention;
  double lambda = 0.0;
  double recall_at_1 = 0.0;
};

// Whole-set geometry sweeps. Scale spreads queries about their mean by each
// grid value; offset moves them along the measured query-to-gallery mean
// direction by each grid value (1 closes the gap exactly, larger values
// overshoot).
std::vector<SweepRow> sweep_interventions(const Matrix& raw_queries,
                                          const std::vector<std::string>& query_ids,
                                          const GalleryStore& gallery, const TruthMap& truth,
                                          const std::vector<double>& scale_grid,
                                          const std::vector<double>& offset_grid);

}  // namespace tcr
