#include "tcr/constraints.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "tcr/errors.hpp"
#include "tcr/matrix.hpp"

namespace tcr {

ConstraintQueue::ConstraintQueue(std::size_t capacity, int update_budget)
    : capacity_(capacity), update_budget_(update_budget) {
  if (capacity == 0) {
    throw ConfigError("constraint queue capacity must be positive");
  }
  if (update_budget < 0) {
    throw ConfigError("constraint queue update budget must be non-negative");
  }
}

double si_score(std::span<const double> zq, std::span<const double> zg,
                std::span<const double> q_center, std::span<const double> g_center) {
  const double pair_dist = distance(zq, zg);
  const double q_spread = distance(zq, q_center);
  const double g_spread = distance(zg, g_center);
  return 2.0 * pair_dist - (q_spread + g_spread);
}

namespace {

// Stable sort by SI keeps insertion order among ties, which makes queue
// contents reproducible across runs.
void sort_by_si(std::vector<PairRecord>& records) {
  std::stable_sort(records.begin(), records.end(),
                   [](const PairRecord& a, const PairRecord& b) { return a.si < b.si; });
}

}  // namespace

std::vector<PairRecord> select_source_like(const std::vector<PairRecord>& pairs,
                                           double fraction) {
  if (pairs.empty()) {
    throw SizeMismatchError("cannot select source-like pairs from an empty batch");
  }
  if (!(fraction > 0.0) || fraction > 1.0) {
    throw ConfigError("source-like fraction must lie in (0, 1]");
  }
  const auto m = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::floor(fraction * static_cast<double>(pairs.size()))));
  std::vector<PairRecord> sorted = pairs;
  sort_by_si(sorted);
  sorted.resize(std::min(m, sorted.size()));
  return sorted;
}

void update_queue(ConstraintQueue& queue, const std::vector<PairRecord>& pairs) {
  if (queue.budget_exhausted()) {
    return;
  }
  std::vector<PairRecord> merged = queue.records_;
  merged.insert(merged.end(), pairs.begin(), pairs.end());
  sort_by_si(merged);
  if (merged.size() > queue.capacity_) {
    merged.resize(queue.capacity_);
  }
  queue.records_ = std::move(merged);
  queue.update_count_ += 1;
}

namespace {

std::vector<double> mean_of(const std::vector<PairRecord>& records,
                            const std::vector<double> PairRecord::*field) {
  const std::size_t dim = (records.front().*field).size();
  std::vector<double> mean(dim, 0.0);
  for (const PairRecord& rec : records) {
    const std::vector<double>& v = rec.*field;
    for (std::size_t d = 0; d < dim; ++d) {
      mean[d] += v[d];
    }
  }
  const double inv = 1.0 / static_cast<double>(records.size());
  for (double& x : mean) {
    x *= inv;
  }
  return mean;
}

}  // namespace

double estimate_gap(const ConstraintQueue& queue) {
  if (queue.empty()) {
    throw EmptyQueueError("cannot estimate the modality gap from an empty queue");
  }
  const std::vector<double> q_mean = mean_of(queue.records(), &PairRecord::query_embedding);
  const std::vector<double> g_mean = mean_of(queue.records(), &PairRecord::candidate_embedding);
  return distance(q_mean, g_mean);
}

double entropy_threshold(const ConstraintQueue& queue) {
  if (queue.empty()) {
    throw EmptyQueueError("cannot read the entropy threshold from an empty queue");
  }
  double e_m = queue.records().front().entropy;
  for (const PairRecord& rec : queue.records()) {
    e_m = std::max(e_m, rec.entropy);
  }
  return e_m;
}

SourceConstraints current_constraints(const ConstraintQueue& queue) {
  return SourceConstraints{estimate_gap(queue), entropy_threshold(queue)};
}

std::vector<PairRecord> make_pair_records(const EmbeddingBatch& batch,
                                          const CandidateSet& cands,
                                          std::span<const double> entropies) {
  if (cands.size() != batch.size() || entropies.size() != batch.size()) {
    throw SizeMismatchError("batch, candidates and entropies must be the same length");
  }
  const std::vector<double> q_center = batch.mean();
  const std::vector<double> g_center = cands.mean();
  std::vector<PairRecord> records;
  records.reserve(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const auto zq = batch.row(i);
    const auto zg = cands.embeddings.row(i);
    PairRecord rec;
    rec.query_embedding.assign(zq.begin(), zq.end());
    rec.candidate_embedding.assign(zg.begin(), zg.end());
    rec.si = si_score(zq, zg, q_center, g_center);
    rec.entropy = entropies[i];
    records.push_back(std::move(rec));
  }
  return records;
}

}  // namespace tcr
