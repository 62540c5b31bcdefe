// SPDX-License-Identifier: Apache-2.0
// Copyright (C) 2026 milpool authors

#include "milpool/pooling.hpp"

#include <cmath>
#include <cstddef>
#include <string>

namespace milpool {

namespace {

// Class columns below this count are not worth forking threads for.
constexpr std::ptrdiff_t kMinParallelClasses = 8;

}  // namespace

namespace detail {

void check_pooling_inputs(const FrameScores& scores, const FrameWeights& weights) {
    if (scores.values.rows() == 0 || scores.values.cols() == 0)
        throw std::invalid_argument("pooling: empty frame scores");
    if (!scores.values.same_shape(weights.values))
        throw std::invalid_argument("pooling: weight shape does not match scores");
    const double* x = scores.values.data();
    const double* w = weights.values.data();
    for (std::size_t i = 0; i < scores.values.size(); ++i) {
        if (!(x[i] >= 0.0 && x[i] <= 1.0))
            throw std::invalid_argument("pooling: frame score outside [0,1]");
        if (!(w[i] >= 0.0))
            throw std::invalid_argument("pooling: negative frame weight");
    }
}

}  // namespace detail

FrameWeights compute_weights(const FrameScores& scores, PoolingFunction fn) {
    const Matrix& x = scores.values;
    if (x.rows() == 0 || x.cols() == 0)
        throw std::invalid_argument("compute_weights: empty frame scores");
    if (fn == PoolingFunction::kAttention)
        throw std::invalid_argument(
            "compute_weights: attention weights are a model output, not derivable from scores");

    const std::ptrdiff_t n = static_cast<std::ptrdiff_t>(x.rows());
    const std::ptrdiff_t n_classes = static_cast<std::ptrdiff_t>(x.cols());
    FrameWeights out{Matrix(x.rows(), x.cols())};
    Matrix& w = out.values;

#pragma omp parallel for schedule(static) if (n_classes >= kMinParallelClasses)
    for (std::ptrdiff_t c = 0; c < n_classes; ++c) {
        switch (fn) {
            case PoolingFunction::kMax: {
                // One-hot at the argmax; ties go to the lowest frame index.
                std::ptrdiff_t best = 0;
                for (std::ptrdiff_t i = 1; i < n; ++i)
                    if (x(i, c) > x(best, c)) best = i;
                for (std::ptrdiff_t i = 0; i < n; ++i) w(i, c) = 0.0;
                w(best, c) = 1.0;
                break;
            }
            case PoolingFunction::kAverage: {
                const double inv = 1.0 / static_cast<double>(n);
                for (std::ptrdiff_t i = 0; i < n; ++i) w(i, c) = inv;
                break;
            }
            case PoolingFunction::kLinearSoftmax:
                for (std::ptrdiff_t i = 0; i < n; ++i) w(i, c) = x(i, c);
                break;
            case PoolingFunction::kExponentialSoftmax:
                for (std::ptrdiff_t i = 0; i < n; ++i) w(i, c) = std::exp(x(i, c));
                break;
            case PoolingFunction::kAttention:
                break;  // rejected above
        }
    }
    return out;
}

ClipProbability pool_single(const FrameScores& scores, const FrameWeights& weights) {
    detail::check_pooling_inputs(scores, weights);
    const Matrix& x = scores.values;
    const Matrix& w = weights.values;
    const std::ptrdiff_t n = static_cast<std::ptrdiff_t>(x.rows());
    const std::ptrdiff_t n_classes = static_cast<std::ptrdiff_t>(x.cols());

    ClipProbability y;
    y.values.assign(x.cols(), 0.0);

#pragma omp parallel for schedule(static) if (n_classes >= kMinParallelClasses)
    for (std::ptrdiff_t c = 0; c < n_classes; ++c) {
        double weighted = 0.0;
        double total = 0.0;
        for (std::ptrdiff_t i = 0; i < n; ++i) {
            weighted += w(i, c) * x(i, c);
            total += w(i, c);
        }
        // A class with no weight mass pools to 0 (silent clip).
        y.values[static_cast<std::size_t>(c)] = total > 0.0 ? weighted / total : 0.0;
    }
    return y;
}

StageOutput aggregate_stage(const Matrix& predictions, const Matrix& weights,
                            int segment_frames, SegmentWeightRule rule) {
    if (!predictions.same_shape(weights))
        throw std::invalid_argument("aggregate_stage: prediction/weight shape mismatch");
    if (segment_frames <= 0)
        throw std::invalid_argument("aggregate_stage: segment size must be positive");
    if (predictions.rows() == 0 || predictions.rows() % static_cast<std::size_t>(segment_frames) != 0)
        throw std::invalid_argument("aggregate_stage: segment size " +
                                    std::to_string(segment_frames) + " does not divide " +
                                    std::to_string(predictions.rows()) + " rows");

    const std::size_t n_segments = predictions.rows() / static_cast<std::size_t>(segment_frames);
    const std::ptrdiff_t n_classes = static_cast<std::ptrdiff_t>(predictions.cols());
    StageOutput out{Matrix(n_segments, predictions.cols()), Matrix(n_segments, predictions.cols())};

#pragma omp parallel for schedule(static) if (n_classes >= kMinParallelClasses)
    for (std::ptrdiff_t c = 0; c < n_classes; ++c) {
        for (std::size_t j = 0; j < n_segments; ++j) {
            const std::size_t begin = j * static_cast<std::size_t>(segment_frames);
            double weighted = 0.0;
            double squared = 0.0;
            double total = 0.0;
            for (int k = 0; k < segment_frames; ++k) {
                const double wi = weights(begin + static_cast<std::size_t>(k), c);
                const double xi = predictions(begin + static_cast<std::size_t>(k), c);
                weighted += wi * xi;
                squared += wi * wi;
                total += wi;
            }
            if (total > 0.0) {
                out.predictions(j, c) = weighted / total;
                out.weights(j, c) = rule == SegmentWeightRule::kSelfWeighted
                                        ? squared / total
                                        : total / static_cast<double>(segment_frames);
            } else {
                // Zero-mass segments drop out of every later stage.
                out.predictions(j, c) = 0.0;
                out.weights(j, c) = 0.0;
            }
        }
    }
    return out;
}

ClipProbability pool_hierarchical(const FrameScores& scores, const FrameWeights& weights,
                                  const StagePlan& plan, SegmentWeightRule rule) {
    detail::check_pooling_inputs(scores, weights);
    if (!plan.valid_for(scores.n_frames()))
        throw std::invalid_argument("pool_hierarchical: plan " + plan.to_string() +
                                    " does not divide " + std::to_string(scores.n_frames()) +
                                    " frames");
    if (plan.flat()) return pool_single(scores, weights);

    StageOutput level{scores.values, weights.values};
    for (int factor : plan.factors)
        level = aggregate_stage(level.predictions, level.weights, factor, rule);

    FrameScores top{level.predictions, scores.frame_rate_hz};
    // Segment predictions are weighted averages of [0,1] values, so reusing
    // the flat kernel (including its [0,1] input check) is sound.
    return pool_single(top, FrameWeights{level.weights});
}

StagePlan default_plan(std::size_t n_frames) {
    StagePlan plan;
    if (n_frames <= 1) return plan;
    std::size_t remaining = n_frames;
    while (remaining > 1) {
        int picked = 0;
        for (int f = 5; f >= 2; --f) {
            if (remaining % static_cast<std::size_t>(f) == 0) {
                picked = f;
                break;
            }
        }
        if (picked == 0) return StagePlan{};  // prime factor > 5: fall back to flat
        plan.factors.push_back(picked);
        remaining /= static_cast<std::size_t>(picked);
    }
    return plan;
}

ClipProbability pool(const FrameScores& scores, const PoolingSpec& spec,
                     const FrameWeights* attention_weights) {
    if (spec.function == PoolingFunction::kAttention) {
        if (attention_weights == nullptr)
            throw std::invalid_argument("pool: attention pooling needs supplied weights");
        return pool_hierarchical(scores, *attention_weights, spec.plan, spec.rule);
    }
    if (attention_weights != nullptr)
        throw std::invalid_argument("pool: supplied weights are only valid for attention pooling");
    return pool_hierarchical(scores, compute_weights(scores, spec.function), spec.plan, spec.rule);
}

}  // namespace milpool
