#pragma once

#include <span>

#include "tcr/adaptation.hpp"
#include "tcr/embedding.hpp"
#include "tcr/gallery.hpp"
#include "tcr/matrix.hpp"
#include "tcr/report.hpp"

namespace tcr {

// Pre-normalization cores of the two geometry interventions. Exposed so the
// exact identities (doubled uniformity, gap hit exactly) can be checked
// before rows are pushed back onto the sphere.

// row_i -> mean + lambda * (row_i - mean). lambda = 1 is an exact no-op.
Matrix scale_rows_about_mean(const Matrix& rows, double lambda);

// row_i -> row_i - lambda * direction. lambda = 0 is an exact no-op.
Matrix offset_rows(const Matrix& rows, std::span<const double> direction, double lambda);

// Spread rows about their mean by lambda_scale, then renormalize.
EmbeddingBatch scale_uniformity(const EmbeddingBatch& batch, double lambda_scale);

// Translate rows so the pre-normalization gap to the candidate mean equals
// delta_s, then renormalize. A gap below 1e-12 has no direction to move
// along; the batch is returned unchanged.
EmbeddingBatch rectify_gap(const EmbeddingBatch& batch, const CandidateSet& cands,
                           double delta_s);

// Training-free pass: per batch, select candidates, update the constraint
// queue (every batch, same budget), scale uniformity, estimate the source
// gap, rectify toward it and rank against the full gallery. config's
// lambda_offset_override forces the offset coefficient (0 skips the
// rectification entirely).
RetrievalReport run_untrained(const StreamInput& input, const GalleryStore& gallery,
                              const TruthMap& truth, const StreamConfig& config);

}  // namespace tcr
