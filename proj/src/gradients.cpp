// SPDX-License-Identifier: Apache-2.0
// Copyright (C) 2026 milpool authors

#include "milpool/gradients.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

namespace milpool {

namespace {

constexpr std::ptrdiff_t kMinParallelClasses = 8;

double clamp_probability(double y) {
    return std::clamp(y, kProbabilityClamp, 1.0 - kProbabilityClamp);
}

/// Response of the derived weight to its own score: 0 for max, average and
/// attention, 1 for linear softmax, exp(x) for exponential softmax.
double weight_response(PoolingFunction fn, double x) {
    switch (fn) {
        case PoolingFunction::kLinearSoftmax: return 1.0;
        case PoolingFunction::kExponentialSoftmax: return std::exp(x);
        default: return 0.0;
    }
}

void check_targets(const ClipProbability& y, const std::vector<int>& targets) {
    if (y.values.size() != targets.size())
        throw std::invalid_argument("loss: target count does not match class count");
    for (int t : targets)
        if (t != 0 && t != 1) throw std::invalid_argument("loss: targets must be 0 or 1");
}

std::ptrdiff_t argmax_lowest(const Matrix& x, std::ptrdiff_t c) {
    std::ptrdiff_t best = 0;
    for (std::ptrdiff_t i = 1; i < static_cast<std::ptrdiff_t>(x.rows()); ++i)
        if (x(i, c) > x(best, c)) best = i;
    return best;
}

}  // namespace

double loss(const ClipProbability& y, const std::vector<int>& targets) {
    check_targets(y, targets);
    double total = 0.0;
    for (std::size_t c = 0; c < targets.size(); ++c) {
        const double p = clamp_probability(y.values[c]);
        total += targets[c] == 1 ? -std::log(p) : -std::log(1.0 - p);
    }
    return total;
}

std::vector<double> loss_grad(const ClipProbability& y, const std::vector<int>& targets) {
    check_targets(y, targets);
    std::vector<double> g(targets.size());
    for (std::size_t c = 0; c < targets.size(); ++c) {
        const double p = clamp_probability(y.values[c]);
        g[c] = targets[c] == 1 ? -1.0 / p : 1.0 / (1.0 - p);
    }
    return g;
}

PoolingGradients grad_single(const FrameScores& scores, const FrameWeights& weights,
                             PoolingFunction fn) {
    detail::check_pooling_inputs(scores, weights);
    const Matrix& x = scores.values;
    const Matrix& w = weights.values;
    const std::ptrdiff_t n = static_cast<std::ptrdiff_t>(x.rows());
    const std::ptrdiff_t n_classes = static_cast<std::ptrdiff_t>(x.cols());

    PoolingGradients g;
    g.d_y_d_x = Matrix(x.rows(), x.cols());
    if (fn == PoolingFunction::kAttention) g.d_y_d_w = Matrix(x.rows(), x.cols());

#pragma omp parallel for schedule(static) if (n_classes >= kMinParallelClasses)
    for (std::ptrdiff_t c = 0; c < n_classes; ++c) {
        switch (fn) {
            case PoolingFunction::kAverage: {
                const double inv = 1.0 / static_cast<double>(n);
                for (std::ptrdiff_t i = 0; i < n; ++i) g.d_y_d_x(i, c) = inv;
                break;
            }
            case PoolingFunction::kMax: {
                const std::ptrdiff_t best = argmax_lowest(x, c);
                for (std::ptrdiff_t i = 0; i < n; ++i) g.d_y_d_x(i, c) = 0.0;
                g.d_y_d_x(best, c) = 1.0;
                break;
            }
            case PoolingFunction::kLinearSoftmax: {
                double sum = 0.0, sum_sq = 0.0;
                for (std::ptrdiff_t i = 0; i < n; ++i) {
                    sum += x(i, c);
                    sum_sq += x(i, c) * x(i, c);
                }
                if (sum > 0.0) {
                    const double y = sum_sq / sum;
                    for (std::ptrdiff_t i = 0; i < n; ++i)
                        g.d_y_d_x(i, c) = (2.0 * x(i, c) - y) / sum;
                } else {
                    for (std::ptrdiff_t i = 0; i < n; ++i) g.d_y_d_x(i, c) = 0.0;
                }
                break;
            }
            case PoolingFunction::kExponentialSoftmax: {
                double num = 0.0, den = 0.0;
                for (std::ptrdiff_t i = 0; i < n; ++i) {
                    const double e = std::exp(x(i, c));
                    num += x(i, c) * e;
                    den += e;
                }
                const double y = num / den;
                for (std::ptrdiff_t i = 0; i < n; ++i)
                    g.d_y_d_x(i, c) = std::exp(x(i, c)) * (1.0 + x(i, c) - y) / den;
                break;
            }
            case PoolingFunction::kAttention: {
                double num = 0.0, den = 0.0;
                for (std::ptrdiff_t i = 0; i < n; ++i) {
                    num += w(i, c) * x(i, c);
                    den += w(i, c);
                }
                if (den > 0.0) {
                    const double y = num / den;
                    for (std::ptrdiff_t i = 0; i < n; ++i) {
                        g.d_y_d_x(i, c) = w(i, c) / den;
                        g.d_y_d_w(i, c) = (x(i, c) - y) / den;
                    }
                } else {
                    for (std::ptrdiff_t i = 0; i < n; ++i) {
                        g.d_y_d_x(i, c) = 0.0;
                        g.d_y_d_w(i, c) = 0.0;
                    }
                }
                break;
            }
        }
    }
    return g;
}

PoolingGradients grad_hierarchical(const FrameScores& scores, const FrameWeights& weights,
                                   PoolingFunction fn, const StagePlan& plan,
                                   SegmentWeightRule rule) {
    if (plan.flat()) return grad_single(scores, weights, fn);
    detail::check_pooling_inputs(scores, weights);
    if (!plan.valid_for(scores.n_frames()))
        throw std::invalid_argument("grad_hierarchical: plan " + plan.to_string() +
                                    " does not divide " + std::to_string(scores.n_frames()) +
                                    " frames");

    // Forward, keeping every level: level 0 holds the frames, level s the
    // segment predictions/weights after stage s.
    const std::size_t n_stages = plan.factors.size();
    std::vector<StageOutput> levels(n_stages + 1);
    levels[0] = StageOutput{scores.values, weights.values};
    for (std::size_t s = 0; s < n_stages; ++s)
        levels[s + 1] =
            aggregate_stage(levels[s].predictions, levels[s].weights, plan.factors[s], rule);

    const std::ptrdiff_t n_classes = static_cast<std::ptrdiff_t>(scores.n_classes());
    PoolingGradients g;
    g.d_y_d_x = Matrix(scores.n_frames(), scores.n_classes());
    if (fn == PoolingFunction::kAttention) g.d_y_d_w = Matrix(scores.n_frames(), scores.n_classes());

#pragma omp parallel for schedule(static) if (n_classes >= kMinParallelClasses)
    for (std::ptrdiff_t c = 0; c < n_classes; ++c) {
        const Matrix& top_x = levels[n_stages].predictions;
        const Matrix& top_w = levels[n_stages].weights;
        const std::size_t n_top = top_x.rows();

        // Final clip average: seed the backward pass with the derivatives of
        // y with respect to the top-level segment predictions and weights.
        double num = 0.0, den = 0.0;
        for (std::size_t j = 0; j < n_top; ++j) {
            num += top_w(j, c) * top_x(j, c);
            den += top_w(j, c);
        }
        std::vector<double> gx(n_top, 0.0), gw(n_top, 0.0);
        if (den > 0.0) {
            const double y = num / den;
            for (std::size_t j = 0; j < n_top; ++j) {
                gx[j] = top_w(j, c) / den;
                gw[j] = (top_x(j, c) - y) / den;
            }
        }

        // Walk the stages backwards, expanding segment gradients onto the
        // members of each segment.
        for (std::size_t s = n_stages; s-- > 0;) {
            const Matrix& in_x = levels[s].predictions;
            const Matrix& in_w = levels[s].weights;
            const Matrix& out_x = levels[s + 1].predictions;
            const Matrix& out_w = levels[s + 1].weights;
            const int m = plan.factors[s];
            const std::size_t n_in = in_x.rows();
            const std::size_t n_out = out_x.rows();
            std::vector<double> gx_in(n_in, 0.0), gw_in(n_in, 0.0);

            for (std::size_t j = 0; j < n_out; ++j) {
                double block_sum = 0.0;
                for (int k = 0; k < m; ++k)
                    block_sum += in_w(j * static_cast<std::size_t>(m) + k, c);
                if (block_sum <= 0.0) continue;  // zero-mass segments carry no gradient
                for (int k = 0; k < m; ++k) {
                    const std::size_t i = j * static_cast<std::size_t>(m) + k;
                    const double wi = in_w(i, c);
                    const double xi = in_x(i, c);
                    gx_in[i] = gx[j] * wi / block_sum;
                    const double dwhat_dw = rule == SegmentWeightRule::kSelfWeighted
                                                ? (2.0 * wi - out_w(j, c)) / block_sum
                                                : 1.0 / static_cast<double>(m);
                    gw_in[i] = gx[j] * (xi - out_x(j, c)) / block_sum + gw[j] * dwhat_dw;
                }
            }
            gx.swap(gx_in);
            gw.swap(gw_in);
        }

        // Frame level: fold the weight response of the pooling function.
        for (std::size_t i = 0; i < scores.n_frames(); ++i) {
            g.d_y_d_x(i, c) = gx[i] + gw[i] * weight_response(fn, scores.values(i, c));
            if (fn == PoolingFunction::kAttention) g.d_y_d_w(i, c) = gw[i];
        }
    }
    return g;
}

double finite_difference_check(const FrameScores& scores, const FrameWeights& weights,
                               PoolingFunction fn, const StagePlan& plan, double step,
                               SegmentWeightRule rule) {
    if (!(step > 0.0)) throw std::invalid_argument("finite_difference_check: step must be > 0");
    for (std::size_t i = 0; i < scores.values.size(); ++i) {
        const double x = scores.values.data()[i];
        if (x < step || x > 1.0 - step)
            throw std::invalid_argument(
                "finite_difference_check: scores need margin of one step to [0,1] bounds");
    }

    const PoolingGradients analytic = grad_hierarchical(scores, weights, fn, plan, rule);
    const std::ptrdiff_t n = static_cast<std::ptrdiff_t>(scores.n_frames());
    const std::size_t n_classes = scores.n_classes();

    // Central difference of the full forward pass. For self-weighted
    // functions the weights are re-derived from the perturbed scores, so the
    // numeric slope includes the weight response, matching the analytic fold.
    auto forward = [&](const FrameScores& s, const FrameWeights& w) {
        if (fn == PoolingFunction::kAttention) return pool_hierarchical(s, w, plan, rule);
        return pool_hierarchical(s, compute_weights(s, fn), plan, rule);
    };

    double max_err = 0.0;
#pragma omp parallel for schedule(static) reduction(max : max_err)
    for (std::ptrdiff_t i = 0; i < n; ++i) {
        FrameScores plus = scores;
        FrameScores minus = scores;
        for (std::size_t c = 0; c < n_classes; ++c) {
            plus.values(i, c) = scores.values(i, c) + step;
            minus.values(i, c) = scores.values(i, c) - step;
        }
        const ClipProbability y_plus = forward(plus, weights);
        const ClipProbability y_minus = forward(minus, weights);
        for (std::size_t c = 0; c < n_classes; ++c) {
            if (fn == PoolingFunction::kMax) {
                // The subgradient is only defined while the argmax is stable.
                std::ptrdiff_t a = argmax_lowest(plus.values, static_cast<std::ptrdiff_t>(c));
                std::ptrdiff_t b = argmax_lowest(minus.values, static_cast<std::ptrdiff_t>(c));
                if (a != b) continue;
            }
            const double numeric = (y_plus.values[c] - y_minus.values[c]) / (2.0 * step);
            const double a = analytic.d_y_d_x(i, c);
            max_err = std::max(max_err, std::abs(a - numeric) / std::max(std::abs(a), 1e-8));
        }
    }

    if (fn == PoolingFunction::kAttention) {
#pragma omp parallel for schedule(static) reduction(max : max_err)
        for (std::ptrdiff_t i = 0; i < n; ++i) {
            FrameWeights plus = weights;
            FrameWeights minus = weights;
            for (std::size_t c = 0; c < n_classes; ++c) {
                plus.values(i, c) = weights.values(i, c) + step;
                minus.values(i, c) = std::max(weights.values(i, c) - step, 0.0);
            }
            const ClipProbability y_plus = pool_hierarchical(scores, plus, plan, rule);
            const ClipProbability y_minus = pool_hierarchical(scores, minus, plan, rule);
            for (std::size_t c = 0; c < n_classes; ++c) {
                const double h_down = weights.values(i, c) - minus.values(i, c);
                const double numeric = (y_plus.values[c] - y_minus.values[c]) / (step + h_down);
                const double a = analytic.d_y_d_w(i, c);
                max_err = std::max(max_err, std::abs(a - numeric) / std::max(std::abs(a), 1e-8));
            }
        }
    }
    return max_err;
}

}  // namespace milpool
