// SPDX-License-Identifier: Apache-2.0
// Copyright (C) 2026 milpool authors

#include "milpool/reference.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace milpool::ref {

double pool_single_class(const std::vector<double>& scores, PoolingFunction fn,
                         const std::vector<double>* attention_weights) {
    if (scores.empty()) throw std::invalid_argument("ref::pool_single_class: empty scores");
    switch (fn) {
        case PoolingFunction::kMax:
            return *std::max_element(scores.begin(), scores.end());
        case PoolingFunction::kAverage: {
            double sum = 0.0;
            for (double x : scores) sum += x;
            return sum / static_cast<double>(scores.size());
        }
        case PoolingFunction::kLinearSoftmax: {
            double num = 0.0, den = 0.0;
            for (double x : scores) {
                num += x * x;
                den += x;
            }
            return den > 0.0 ? num / den : 0.0;
        }
        case PoolingFunction::kExponentialSoftmax: {
            double num = 0.0, den = 0.0;
            for (double x : scores) {
                num += x * std::exp(x);
                den += std::exp(x);
            }
            return num / den;
        }
        case PoolingFunction::kAttention: {
            if (attention_weights == nullptr || attention_weights->size() != scores.size())
                throw std::invalid_argument("ref::pool_single_class: attention needs weights");
            double num = 0.0, den = 0.0;
            for (std::size_t i = 0; i < scores.size(); ++i) {
                num += (*attention_weights)[i] * scores[i];
                den += (*attention_weights)[i];
            }
            return den > 0.0 ? num / den : 0.0;
        }
    }
    throw std::invalid_argument("ref::pool_single_class: unknown pooling function");
}

ClipProbability pool_single(const FrameScores& scores, PoolingFunction fn,
                            const FrameWeights* attention_weights) {
    ClipProbability y;
    y.values.reserve(scores.n_classes());
    for (std::size_t c = 0; c < scores.n_classes(); ++c) {
        std::vector<double> column(scores.n_frames());
        for (std::size_t i = 0; i < scores.n_frames(); ++i) column[i] = scores.values(i, c);
        if (fn == PoolingFunction::kAttention) {
            std::vector<double> wcol(scores.n_frames());
            for (std::size_t i = 0; i < scores.n_frames(); ++i)
                wcol[i] = attention_weights->values(i, c);
            y.values.push_back(pool_single_class(column, fn, &wcol));
        } else {
            y.values.push_back(pool_single_class(column, fn));
        }
    }
    return y;
}

ClipProbability pool_hierarchical(const FrameScores& scores, const FrameWeights& weights,
                                  const StagePlan& plan, SegmentWeightRule rule) {
    if (!plan.valid_for(scores.n_frames()))
        throw std::invalid_argument("ref::pool_hierarchical: invalid plan");

    ClipProbability y;
    y.values.assign(scores.n_classes(), 0.0);
    for (std::size_t c = 0; c < scores.n_classes(); ++c) {
        std::vector<double> x(scores.n_frames()), w(scores.n_frames());
        for (std::size_t i = 0; i < scores.n_frames(); ++i) {
            x[i] = scores.values(i, c);
            w[i] = weights.values(i, c);
        }
        for (int m : plan.factors) {
            const std::size_t blocks = x.size() / static_cast<std::size_t>(m);
            std::vector<double> xs(blocks), ws(blocks);
            for (std::size_t j = 0; j < blocks; ++j) {
                double num = 0.0, sq = 0.0, den = 0.0;
                for (int k = 0; k < m; ++k) {
                    const double wi = w[j * m + k];
                    num += wi * x[j * m + k];
                    sq += wi * wi;
                    den += wi;
                }
                if (den > 0.0) {
                    xs[j] = num / den;
                    ws[j] = rule == SegmentWeightRule::kSelfWeighted ? sq / den
                                                                     : den / static_cast<double>(m);
                } else {
                    xs[j] = 0.0;
                    ws[j] = 0.0;
                }
            }
            x.swap(xs);
            w.swap(ws);
        }
        double num = 0.0, den = 0.0;
        for (std::size_t j = 0; j < x.size(); ++j) {
            num += w[j] * x[j];
            den += w[j];
        }
        y.values[c] = den > 0.0 ? num / den : 0.0;
    }
    return y;
}

}  // namespace milpool::ref
