#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "tcr/embedding.hpp"
#include "tcr/gallery.hpp"

namespace tcr {

// One source-like query-candidate pair. The entropy is the value at the
// moment of queue insertion and never recomputed.
struct PairRecord {
  std::vector<double> query_embedding;
  std::vector<double> candidate_embedding;
  double si = 0.0;
  double entropy = 0.0;
};

// Estimated source-domain constraints consumed by the adaptation objective.
struct SourceConstraints {
  double delta_s = 0.0;  // source modality gap, in [0, 2]
  double e_m = 0.0;      // entropy threshold
};

// Bounded store of the smallest-SI pairs seen so far. Mutations stop after
// update_budget events; reads stay valid for the rest of the stream.
class ConstraintQueue {
 public:
  explicit ConstraintQueue(std::size_t capacity, int update_budget = 10);

  const std::vector<PairRecord>& records() const noexcept { return records_; }
  std::size_t capacity() const noexcept { return capacity_; }
  int update_count() const noexcept { return update_count_; }
  int update_budget() const noexcept { return update_budget_; }
  bool empty() const noexcept { return records_.empty(); }
  bool budget_exhausted() const noexcept { return update_count_ >= update_budget_; }

 private:
  friend void update_queue(ConstraintQueue& queue, const std::vector<PairRecord>& pairs);

  std::vector<PairRecord> records_;
  std::size_t capacity_;
  int update_count_ = 0;
  int update_budget_;
};

// Selection criterion: twice the pair distance minus the two center
// distances. Small values mark source-like pairs.
double si_score(std::span<const double> zq, std::span<const double> zg,
                std::span<const double> q_center, std::span<const double> g_center);

// The max(1, floor(fraction * B)) records with smallest SI; ties keep the
// original order.
std::vector<PairRecord> select_source_like(const std::vector<PairRecord>& pairs,
                                           double fraction);

// Merge, keep the smallest-SI records within capacity, count the event.
// A queue whose budget is exhausted is left untouched.
void update_queue(ConstraintQueue& queue, const std::vector<PairRecord>& pairs);

// Distance between the mean query and mean candidate embedding over the
// queue records. Throws EmptyQueueError.
double estimate_gap(const ConstraintQueue& queue);

// Largest stored entropy over the queue records. Throws EmptyQueueError.
double entropy_threshold(const ConstraintQueue& queue);

// Both constraints in one read.
SourceConstraints current_constraints(const ConstraintQueue& queue);

// SI scores and records for a batch and its candidates, using the batch
// means as centers.
std::vector<PairRecord> make_pair_records(const EmbeddingBatch& batch,
                                          const CandidateSet& cands,
                                          std::span<const double> entropies);

}  // namespace tcr
