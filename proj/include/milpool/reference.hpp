// SPDX-License-Identifier: Apache-2.0
// Copyright (C) 2026 milpool authors
//
// Serial reference implementations, kept deliberately naive. The flat
// reference evaluates each pooling function from its closed definition
// (max; mean; sum x^2 / sum x; sum x*exp(x) / sum exp(x)) rather than
// through the shared weighted-average kernel, so the two routes check each
// other. The hierarchical reference is a direct nested-loop transcription
// of the stage formulas. Tests and the benchmark target compare these
// against the OpenMP kernels in pooling.hpp.

#ifndef MILPOOL_REFERENCE_HPP
#define MILPOOL_REFERENCE_HPP

#include "milpool/pooling.hpp"
#include "milpool/types.hpp"

namespace milpool::ref {

/// Flat pooling of one class column by the closed definition of `fn`.
/// `attention_weights` is consulted only for attention pooling.
double pool_single_class(const std::vector<double>& scores, PoolingFunction fn,
                         const std::vector<double>* attention_weights = nullptr);

/// Flat pooling of all classes by closed definitions.
ClipProbability pool_single(const FrameScores& scores, PoolingFunction fn,
                            const FrameWeights* attention_weights = nullptr);

/// Hierarchical pooling, serial nested loops, no shared kernels.
ClipProbability pool_hierarchical(const FrameScores& scores, const FrameWeights& weights,
                                  const StagePlan& plan,
                                  SegmentWeightRule rule = SegmentWeightRule::kSelfWeighted);

}  // namespace milpool::ref

#endif  // MILPOOL_REFERENCE_HPP
