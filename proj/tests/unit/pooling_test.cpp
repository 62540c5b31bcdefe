// SPDX-License-Identifier: Apache-2.0
// Copyright (C) 2026 milpool authors

#include <algorithm>
#include <cmath>
#include <random>

#include <doctest.h>

#include "milpool/pooling.hpp"
#include "milpool/reference.hpp"

using namespace milpool;

namespace {

FrameScores make_scores(const std::vector<double>& column, double rate = 12.5) {
    return FrameScores{Matrix::column(column), rate};
}

FrameScores random_scores(std::mt19937_64& rng, std::size_t n, std::size_t c,
                          double lo = 0.0, double hi = 1.0) {
    std::uniform_real_distribution<double> dist(lo, hi);
    FrameScores s;
    s.values = Matrix(n, c);
    for (std::size_t i = 0; i < s.values.size(); ++i) s.values.data()[i] = dist(rng);
    return s;
}

}  // namespace

TEST_CASE("average weights are all 1/N") {
    const FrameScores s = make_scores({0.1, 0.5, 0.9, 0.3});
    const FrameWeights w = compute_weights(s, PoolingFunction::kAverage);
    for (std::size_t i = 0; i < 4; ++i) CHECK(w.values(i, 0) == 0.25);
}

TEST_CASE("max weights are one-hot at the argmax, lowest index on ties") {
    const FrameWeights w =
        compute_weights(make_scores({0.1, 0.9, 0.3}), PoolingFunction::kMax);
    CHECK(w.values(0, 0) == 0.0);
    CHECK(w.values(1, 0) == 1.0);
    CHECK(w.values(2, 0) == 0.0);

    const FrameWeights tied =
        compute_weights(make_scores({0.4, 0.9, 0.9}), PoolingFunction::kMax);
    CHECK(tied.values(1, 0) == 1.0);
    CHECK(tied.values(2, 0) == 0.0);
}

TEST_CASE("exponential weights are exp of the scores") {
    const FrameWeights w =
        compute_weights(make_scores({0.0, 1.0}), PoolingFunction::kExponentialSoftmax);
    CHECK(w.values(0, 0) == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(w.values(1, 0) == doctest::Approx(2.718281828459045).epsilon(1e-15));
}

TEST_CASE("linear weights equal the scores") {
    const FrameScores s = make_scores({0.2, 0.7});
    const FrameWeights w = compute_weights(s, PoolingFunction::kLinearSoftmax);
    CHECK(w.values(0, 0) == 0.2);
    CHECK(w.values(1, 0) == 0.7);
}

TEST_CASE("attention weights cannot be derived from scores") {
    CHECK_THROWS_AS(compute_weights(make_scores({0.5}), PoolingFunction::kAttention),
                    std::invalid_argument);
}

TEST_CASE("linear softmax pools [0.2,0.4,0.6,0.8] to 0.6") {
    const FrameScores s = make_scores({0.2, 0.4, 0.6, 0.8});
    const ClipProbability y = pool_single(s, compute_weights(s, PoolingFunction::kLinearSoftmax));
    CHECK(y.values[0] == doctest::Approx(0.6).epsilon(1e-12));
}

TEST_CASE("exponential softmax pools [0,1] to e/(1+e)") {
    const FrameScores s = make_scores({0.0, 1.0});
    const ClipProbability y =
        pool_single(s, compute_weights(s, PoolingFunction::kExponentialSoftmax));
    const double e = 2.718281828459045;
    CHECK(y.values[0] == doctest::Approx(e / (1.0 + e)).epsilon(1e-12));
    CHECK(y.values[0] == doctest::Approx(0.731059).epsilon(1e-6));
}

TEST_CASE("constant clips pool to the constant under every function") {
    for (double c : {0.0, 0.25, 1.0}) {
        const FrameScores s = make_scores({c, c, c, c, c});
        for (PoolingFunction fn :
             {PoolingFunction::kMax, PoolingFunction::kAverage, PoolingFunction::kLinearSoftmax,
              PoolingFunction::kExponentialSoftmax}) {
            const ClipProbability y = pool_single(s, compute_weights(s, fn));
            CHECK(y.values[0] == doctest::Approx(c).epsilon(1e-14));
        }
        FrameWeights att{Matrix(5, 1, 0.7)};
        CHECK(pool_single(s, att).values[0] == doctest::Approx(c).epsilon(1e-14));
    }
}

TEST_CASE("all-zero weights pool to zero") {
    const FrameScores s = make_scores({0.0, 0.0, 0.0});
    const ClipProbability y = pool_single(s, compute_weights(s, PoolingFunction::kLinearSoftmax));
    CHECK(y.values[0] == 0.0);
}

TEST_CASE("invalid pooling inputs are rejected") {
    const FrameScores s = make_scores({0.5, 0.5});
    CHECK_THROWS_AS(pool_single(s, FrameWeights{Matrix(3, 1, 0.5)}), std::invalid_argument);
    CHECK_THROWS_AS(pool_single(s, FrameWeights{Matrix(2, 1, -0.1)}), std::invalid_argument);
    FrameScores bad = make_scores({0.5, 1.5});
    CHECK_THROWS_AS(pool_single(bad, FrameWeights{Matrix(2, 1, 1.0)}), std::invalid_argument);
}

TEST_CASE("pooled value is bounded by min and max of its class") {
    std::mt19937_64 rng(41);
    for (int trial = 0; trial < 300; ++trial) {
        const FrameScores s = random_scores(rng, 1 + trial % 17, 3);
        for (PoolingFunction fn :
             {PoolingFunction::kMax, PoolingFunction::kAverage, PoolingFunction::kLinearSoftmax,
              PoolingFunction::kExponentialSoftmax}) {
            const ClipProbability y = pool_single(s, compute_weights(s, fn));
            for (std::size_t c = 0; c < s.n_classes(); ++c) {
                double lo = 1.0, hi = 0.0;
                for (std::size_t i = 0; i < s.n_frames(); ++i) {
                    lo = std::min(lo, s.values(i, c));
                    hi = std::max(hi, s.values(i, c));
                }
                CHECK(y.values[c] >= lo - 1e-12);
                CHECK(y.values[c] <= hi + 1e-12);
            }
        }
    }
}

TEST_CASE("average <= max and linear >= average on random inputs") {
    std::mt19937_64 rng(42);
    for (int trial = 0; trial < 300; ++trial) {
        const FrameScores s = random_scores(rng, 2 + trial % 31, 2, 0.01, 0.99);
        const double avg =
            pool_single(s, compute_weights(s, PoolingFunction::kAverage)).values[0];
        const double mx = pool_single(s, compute_weights(s, PoolingFunction::kMax)).values[0];
        const double lin =
            pool_single(s, compute_weights(s, PoolingFunction::kLinearSoftmax)).values[0];
        CHECK(avg <= mx + 1e-12);
        CHECK(lin >= avg - 1e-12);
    }
}

TEST_CASE("pooling is invariant under frame permutation") {
    std::mt19937_64 rng(43);
    for (int trial = 0; trial < 100; ++trial) {
        const FrameScores s = random_scores(rng, 9, 2);
        FrameScores shuffled = s;
        std::vector<std::size_t> order(s.n_frames());
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
        std::shuffle(order.begin(), order.end(), rng);
        for (std::size_t i = 0; i < order.size(); ++i)
            for (std::size_t c = 0; c < s.n_classes(); ++c)
                shuffled.values(i, c) = s.values(order[i], c);
        for (PoolingFunction fn :
             {PoolingFunction::kMax, PoolingFunction::kAverage, PoolingFunction::kLinearSoftmax,
              PoolingFunction::kExponentialSoftmax}) {
            const ClipProbability a = pool_single(s, compute_weights(s, fn));
            const ClipProbability b = pool_single(shuffled, compute_weights(shuffled, fn));
            for (std::size_t c = 0; c < s.n_classes(); ++c)
                CHECK(a.values[c] == doctest::Approx(b.values[c]).epsilon(1e-12));
        }
    }
}

TEST_CASE("max pooling returns the exact maximum") {
    std::mt19937_64 rng(44);
    for (int trial = 0; trial < 100; ++trial) {
        const FrameScores s = random_scores(rng, 13, 2);
        const ClipProbability y = pool_single(s, compute_weights(s, PoolingFunction::kMax));
        for (std::size_t c = 0; c < s.n_classes(); ++c) {
            double hi = 0.0;
            for (std::size_t i = 0; i < s.n_frames(); ++i) hi = std::max(hi, s.values(i, c));
            CHECK(y.values[c] == hi);
        }
    }
}

TEST_CASE("weighted-average kernel agrees with the closed-definition reference") {
    std::mt19937_64 rng(45);
    for (int trial = 0; trial < 200; ++trial) {
        const FrameScores s = random_scores(rng, 1 + trial % 40, 1 + trial % 5);
        for (PoolingFunction fn :
             {PoolingFunction::kMax, PoolingFunction::kAverage, PoolingFunction::kLinearSoftmax,
              PoolingFunction::kExponentialSoftmax}) {
            const ClipProbability a = pool_single(s, compute_weights(s, fn));
            const ClipProbability b = ref::pool_single(s, fn);
            for (std::size_t c = 0; c < s.n_classes(); ++c)
                CHECK(a.values[c] == doctest::Approx(b.values[c]).epsilon(1e-12));
        }
    }
}
