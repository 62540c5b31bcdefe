// SPDX-License-Identifier: Apache-2.0
// Copyright (C) 2026 milpool authors

#ifndef MILPOOL_TYPES_HPP
#define MILPOOL_TYPES_HPP

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include "milpool/matrix.hpp"

namespace milpool {

/// Configuration or API-contract violation (bad shapes, bad plans, bad flags).
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Malformed or missing data (files, datasets, checkpoints).
struct DataError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Numerical failure (NaN loss, gradient check out of tolerance).
struct NumericError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

enum class PoolingFunction {
    kMax,
    kAverage,
    kLinearSoftmax,
    kExponentialSoftmax,
    kAttention,
};

const char* pooling_function_name(PoolingFunction fn);
PoolingFunction pooling_function_from_name(const std::string& name);

/// Per-frame, per-class probabilities for one clip. N rows, C columns,
/// every entry in [0, 1].
struct FrameScores {
    Matrix values;
    double frame_rate_hz = 12.5;

    std::size_t n_frames() const { return values.rows(); }
    std::size_t n_classes() const { return values.cols(); }
};

/// Per-frame, per-class pooling weights, nonnegative, same shape as the
/// scores they were derived from.
struct FrameWeights {
    Matrix values;
};

/// Clip-level probability per class.
struct ClipProbability {
    std::vector<double> values;
};

/// How segment-level weights are formed when a stage aggregates frames.
/// kSelfWeighted is the corrected rule (sum of squared weights over the
/// weight sum); kAveraged is the superseded plain average, kept only so the
/// known-worse behaviour can be reproduced.
enum class SegmentWeightRule {
    kSelfWeighted,
    kAveraged,
};

/// Stage factors [M1, M2, ...] of a hierarchical pooling structure. Each
/// stage groups the current sequence into blocks of M. An empty list means
/// flat (single-stage) pooling.
struct StagePlan {
    std::vector<int> factors;

    bool flat() const { return factors.empty(); }

    /// Product of all factors; 1 for the flat plan.
    long product() const {
        long p = 1;
        for (int f : factors) p *= f;
        return p;
    }

    bool valid_for(std::size_t n_frames) const {
        if (n_frames == 0) return false;
        for (int f : factors)
            if (f <= 0) return false;
        long p = product();
        return p > 0 && static_cast<long>(n_frames) % p == 0;
    }

    std::string to_string() const;
    static StagePlan parse(const std::string& text);
};

/// Pooling function plus structure: everything needed to turn frame scores
/// and weights into a clip probability.
struct PoolingSpec {
    PoolingFunction function = PoolingFunction::kLinearSoftmax;
    StagePlan plan;
    SegmentWeightRule rule = SegmentWeightRule::kSelfWeighted;
};

}  // namespace milpool

#endif  // MILPOOL_TYPES_HPP
