#include "tcr/synthetic.hpp"

#include <cstdio>
#include <numeric>

#include "tcr/embedding.hpp"
#include "tcr/errors.hpp"
#include "tcr/rng.hpp"
#include "tcr/untrained.hpp"

namespace tcr {

namespace {

// Stream ids carving one seed into independent generators.
constexpr std::uint64_t kGalleryStream = 0;
constexpr std::uint64_t kTargetStream = 1;
constexpr std::uint64_t kPairNoiseStream = 2;
constexpr std::uint64_t kCenterStream = 3;
constexpr std::uint64_t kShiftDirectionStream = 7;
constexpr std::uint64_t kShiftNoiseStream = 8;

// Unit rows mixing a shared center direction (weight c) with a per-row
// uniform direction (weight 1-c). c = 0 is uniform over the sphere.
Matrix random_unit_rows(std::size_t count, std::size_t dim, double concentration,
                        const std::vector<double>& center, Rng& rng) {
  Matrix raw(count, dim);
  for (std::size_t i = 0; i < count; ++i) {
    std::vector<double> u(dim);
    for (;;) {
      for (std::size_t d = 0; d < dim; ++d) {
        u[d] = rng.normal();
      }
      const double n = norm(u);
      if (n > 1e-9) {
        for (double& x : u) x /= n;
        break;
      }
    }
    for (std::size_t d = 0; d < dim; ++d) {
      raw.at(i, d) = concentration * center[d] + (1.0 - concentration) * u[d];
    }
  }
  return normalize_rows(raw);
}

std::vector<double> random_unit_direction(std::size_t dim, Rng& rng) {
  std::vector<double> v(dim);
  for (double& x : v) {
    x = rng.normal();
  }
  return l2_normalize(v).values();
}

std::string indexed_id(const char* prefix, std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%s%06zu", prefix, i);
  return std::string(buf);
}

}  // namespace

ShiftKind shift_kind_from_string(const std::string& name) {
  if (name == "none") return ShiftKind::none;
  if (name == "compact") return ShiftKind::compact;
  if (name == "offset") return ShiftKind::offset;
  if (name == "gaussian_noise") return ShiftKind::gaussian_noise;
  if (name == "composite") return ShiftKind::composite;
  throw ConfigError("unknown shift kind: " + name);
}

std::string to_string(ShiftKind kind) {
  switch (kind) {
    case ShiftKind::none: return "none";
    case ShiftKind::compact: return "compact";
    case ShiftKind::offset: return "offset";
    case ShiftKind::gaussian_noise: return "gaussian_noise";
    case ShiftKind::composite: return "composite";
  }
  throw ConfigError("unknown shift kind value");
}

Matrix apply_shift(const Matrix& queries, const ShiftSpec& spec) {
  if (spec.kind == ShiftKind::none) {
    return queries;
  }
  Matrix out = queries;
  const bool composite = spec.kind == ShiftKind::composite;
  if (composite || spec.kind == ShiftKind::compact) {
    if (!(spec.compact_factor > 0.0)) {
      throw ConfigError("compact_factor must be positive");
    }
    out = scale_rows_about_mean(out, spec.compact_factor);
  }
  if (composite || spec.kind == ShiftKind::offset) {
    Rng dir_rng(spec.seed, kShiftDirectionStream);
    const std::vector<double> dir = random_unit_direction(queries.cols(), dir_rng);
    // offset_rows subtracts, so negate to push queries away along +dir.
    out = offset_rows(out, dir, -spec.offset_magnitude);
  }
  if (composite || spec.kind == ShiftKind::gaussian_noise) {
    if (spec.noise_sigma < 0.0) {
      throw ConfigError("noise_sigma must be non-negative");
    }
    Rng noise_rng(spec.seed, kShiftNoiseStream);
    for (std::size_t i = 0; i < out.rows(); ++i) {
      for (std::size_t d = 0; d < out.cols(); ++d) {
        out.at(i, d) += spec.noise_sigma * noise_rng.normal();
      }
    }
  }
  return out;
}

Benchmark make_benchmark(const BenchmarkSpec& spec) {
  if (spec.gallery_size == 0 || spec.query_count == 0) {
    throw ConfigError("benchmark sizes must be positive");
  }
  if (spec.query_count > spec.gallery_size) {
    throw ConfigError("query_count cannot exceed gallery_size (targets are distinct)");
  }
  if (spec.dim < 2) {
    throw ConfigError("dim must be at least 2");
  }
  if (spec.concentration < 0.0 || spec.concentration >= 1.0) {
    throw ConfigError("concentration must be in [0, 1)");
  }
  Rng center_rng(spec.seed, kCenterStream);
  const std::vector<double> center = random_unit_direction(spec.dim, center_rng);
  Rng gallery_rng(spec.seed, kGalleryStream);
  Matrix gallery_rows =
      random_unit_rows(spec.gallery_size, spec.dim, spec.concentration, center, gallery_rng);
  std::vector<std::string> gallery_ids(spec.gallery_size);
  for (std::size_t i = 0; i < spec.gallery_size; ++i) {
    gallery_ids[i] = indexed_id("g", i);
  }

  // Distinct targets via a partial Fisher-Yates shuffle.
  Rng target_rng(spec.seed, kTargetStream);
  std::vector<std::size_t> perm(spec.gallery_size);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  for (std::size_t i = 0; i < spec.query_count; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(target_rng.below(spec.gallery_size - i));
    std::swap(perm[i], perm[j]);
  }

  Rng pair_rng(spec.seed, kPairNoiseStream);
  Matrix source(spec.query_count, spec.dim);
  std::vector<std::string> query_ids(spec.query_count);
  TruthMap truth;
  for (std::size_t i = 0; i < spec.query_count; ++i) {
    const std::size_t target = perm[i];
    std::vector<double> v(spec.dim);
    const auto g = gallery_rows.row(target);
    for (std::size_t d = 0; d < spec.dim; ++d) {
      v[d] = g[d] + spec.pair_noise_sigma * pair_rng.normal();
    }
    const EmbeddingVector unit = l2_normalize(v);
    for (std::size_t d = 0; d < spec.dim; ++d) {
      source.at(i, d) = unit.values()[d];
    }
    query_ids[i] = indexed_id("q", i);
    truth[query_ids[i]] = {gallery_ids[target]};
  }

  Matrix shifted = apply_shift(source, spec.shift);
  return Benchmark{GalleryStore(std::move(gallery_rows), std::move(gallery_ids)),
                   std::move(source), std::move(shifted), std::move(query_ids),
                   std::move(truth)};
}

namespace {

double whole_set_recall(const EmbeddingBatch& queries, const std::vector<std::string>& ids,
                        const GalleryStore& gallery, const TruthMap& truth) {
  const auto idx = top_k_indices(queries, gallery, 1);
  return recall_at_k(ids, rank_ids(idx, gallery), truth, 1);
}

}  // namespace

std::vector<SweepRow> sweep_interventions(const Matrix& raw_queries,
                                          const std::vector<std::string>& query_ids,
                                          const GalleryStore& gallery, const TruthMap& truth,
                                          const std::vector<double>& scale_grid,
                                          const std::vector<double>& offset_grid) {
  const EmbeddingBatch base = EmbeddingBatch::normalized(raw_queries, Modality::query);
  std::vector<SweepRow> rows;
  rows.reserve(scale_grid.size() + offset_grid.size());
  for (const double lambda : scale_grid) {
    const EmbeddingBatch scaled = scale_uniformity(base, lambda);
    rows.push_back(SweepRow{"scale", lambda, whole_set_recall(scaled, query_ids, gallery, truth)});
  }
  const std::vector<double> q_mean = base.mean();
  const std::vector<double> g_mean = gallery.mean();
  std::vector<double> direction(q_mean.size());
  for (std::size_t d = 0; d < direction.size(); ++d) {
    direction[d] = q_mean[d] - g_mean[d];
  }
  for (const double lambda : offset_grid) {
    EmbeddingBatch moved =
        lambda == 0.0
            ? base
            : EmbeddingBatch::normalized(offset_rows(base.matrix(), direction, lambda),
                                         Modality::query);
    rows.push_back(SweepRow{"offset", lambda, whole_set_recall(moved, query_ids, gallery, truth)});
  }
  return rows;
}

}  // namespace tcr
