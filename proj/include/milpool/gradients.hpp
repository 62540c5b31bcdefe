// SPDX-License-Identifier: Apache-2.0
// Copyright (C) 2026 milpool authors
//
// Exact analytical backward passes for the clip probability with respect to
// frame scores (all pooling functions) and frame weights (attention), under
// both the flat and the hierarchical structure, plus the central-difference
// verifier used as the independent oracle everywhere.

#ifndef MILPOOL_GRADIENTS_HPP
#define MILPOOL_GRADIENTS_HPP

#include "milpool/pooling.hpp"
#include "milpool/types.hpp"

namespace milpool {

/// Clip probabilities are clamped into [kProbabilityClamp, 1-kProbabilityClamp]
/// before logs; the cross-entropy gradient diverges at the boundary.
inline constexpr double kProbabilityClamp = 1e-7;

/// d(clip probability)/d(frame score) and, for attention pooling,
/// d(clip probability)/d(frame weight). Shapes match the input scores.
/// For the self-weighted functions the weight response is already folded
/// into d_y_d_x, so d_y_d_w stays empty unless the function is attention.
struct PoolingGradients {
    Matrix d_y_d_x;
    Matrix d_y_d_w;

    bool has_weight_grad() const { return !d_y_d_w.empty(); }
};

/// Per-class binary cross-entropy summed over classes.
double loss(const ClipProbability& y, const std::vector<int>& targets);

/// dL/dy per class: 1/(1-y) for a negative label, -1/y for a positive one,
/// evaluated on the clamped probability.
std::vector<double> loss_grad(const ClipProbability& y, const std::vector<int>& targets);

/// Gradients for flat pooling, via the per-function closed forms.
PoolingGradients grad_single(const FrameScores& scores, const FrameWeights& weights,
                             PoolingFunction fn);

/// Gradients for hierarchical pooling. One stage follows the closed
/// component derivatives of the segment average and segment weight; plans
/// with several stages compose those one-stage pieces in reverse order.
/// An empty plan delegates to grad_single.
PoolingGradients grad_hierarchical(const FrameScores& scores, const FrameWeights& weights,
                                   PoolingFunction fn, const StagePlan& plan,
                                   SegmentWeightRule rule = SegmentWeightRule::kSelfWeighted);

/// Central-difference verification of the analytic gradients.
/// Returns the max over entries of |analytic - numeric| / max(|analytic|, 1e-8),
/// covering d_y_d_x (and d_y_d_w for attention). For max pooling,
/// perturbations that move the argmax are excluded: the subgradient is only
/// claimed away from ties. Scores must keep at least `step` of margin to 0
/// and 1 so perturbed inputs stay valid.
double finite_difference_check(const FrameScores& scores, const FrameWeights& weights,
                               PoolingFunction fn, const StagePlan& plan, double step,
                               SegmentWeightRule rule = SegmentWeightRule::kSelfWeighted);

}  // namespace milpool

#endif  // MILPOOL_GRADIENTS_HPP
