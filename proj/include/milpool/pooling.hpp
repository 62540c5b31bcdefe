// SPDX-License-Identifier: Apache-2.0
// Copyright (C) 2026 milpool authors
//
// Forward evaluation of the five pooling functions, flat and hierarchical.
// All pooling is a weighted average per class: y = sum(w*x) / sum(w). A
// hierarchical structure applies the same average segment-wise, stage by
// stage, carrying segment weights forward, before the final clip average.
//
// Kernels are OpenMP-parallel over class columns; per-class arithmetic is
// serial and identical to the reference implementations in reference.hpp.

#ifndef MILPOOL_POOLING_HPP
#define MILPOOL_POOLING_HPP

#include "milpool/types.hpp"

namespace milpool {

/// Segment-level predictions and weights produced by one aggregation stage.
struct StageOutput {
    Matrix predictions;  // (N/M) x C
    Matrix weights;      // (N/M) x C
};

/// Derive pooling weights from frame scores per the weight rule of the
/// chosen function. Attention is rejected: its weights come from a model
/// head, not from the scores.
FrameWeights compute_weights(const FrameScores& scores, PoolingFunction fn);

/// Flat pooling: per class, y = sum(w*x) / sum(w). A class whose weights
/// sum to zero pools to 0.
ClipProbability pool_single(const FrameScores& scores, const FrameWeights& weights);

/// One aggregation stage: group rows into blocks of `segment_frames` and
/// reduce each block to one segment prediction and one segment weight.
/// Blocks whose weights sum to zero produce (0, 0) and are effectively
/// excluded from later stages.
StageOutput aggregate_stage(const Matrix& predictions, const Matrix& weights,
                            int segment_frames,
                            SegmentWeightRule rule = SegmentWeightRule::kSelfWeighted);

/// Hierarchical pooling: run one stage per plan factor, then take the final
/// weighted average of the remaining segments. An empty plan is exactly
/// pool_single.
ClipProbability pool_hierarchical(const FrameScores& scores, const FrameWeights& weights,
                                  const StagePlan& plan,
                                  SegmentWeightRule rule = SegmentWeightRule::kSelfWeighted);

/// Default structure for a clip of n_frames: [5, 5, 5] for the canonical
/// 125-frame clip, otherwise a greedy complete factorization into factors
/// <= 5, or flat when none exists.
StagePlan default_plan(std::size_t n_frames);

/// Convenience: weights (derived or supplied) + structure in one call.
/// `attention_weights` must be non-null iff the function is attention.
ClipProbability pool(const FrameScores& scores, const PoolingSpec& spec,
                     const FrameWeights* attention_weights = nullptr);

namespace detail {
/// Validates scores/weights agreement and value ranges; throws
/// std::invalid_argument on violation.
void check_pooling_inputs(const FrameScores& scores, const FrameWeights& weights);
}  // namespace detail

}  // namespace milpool

#endif  // MILPOOL_POOLING_HPP
