#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <vector>

#include "tcr/constraints.hpp"
#include "tcr/objectives.hpp"

namespace tcr {

// Diagnostics captured after each batch of the stream.
struct TrajectoryPoint {
  std::size_t batch_index = 0;
  std::optional<LossBreakdown> losses;
  double recall_at_1 = 0.0;
  double uniformity = 0.0;
  double gap = 0.0;
};

// Summary of one full pass over the query stream.
struct RetrievalReport {
  std::map<std::size_t, double> recall_at;
  double uniformity_query = 0.0;
  double uniformity_gallery = 0.0;
  double modality_gap = 0.0;
  std::vector<TrajectoryPoint> per_batch_trajectory;
  std::optional<SourceConstraints> constraints;
  int queue_updates = 0;
};

}  // namespace tcr
