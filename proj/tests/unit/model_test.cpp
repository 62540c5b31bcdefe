// SPDX-License-Identifier: Apache-2.0
// Copyright (C) 2026 milpool authors

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <random>

#include <doctest.h>

#include "milpool/model.hpp"

using namespace milpool;

namespace {

std::vector<ClipExample> tiny_batch(std::mt19937_64& rng, int n_clips, int frames, int dim,
                                    int classes) {
    std::uniform_real_distribution<double> feat(-1.0, 1.0);
    std::bernoulli_distribution label(0.5);
    std::vector<ClipExample> batch;
    for (int k = 0; k < n_clips; ++k) {
        ClipExample ex;
        ex.features = Matrix(frames, dim);
        for (std::size_t i = 0; i < ex.features.size(); ++i) ex.features.data()[i] = feat(rng);
        for (int c = 0; c < classes; ++c) ex.targets.push_back(label(rng) ? 1 : 0);
        batch.push_back(std::move(ex));
    }
    return batch;
}

double max_param_fd_error(const std::vector<ClipExample>& batch, const ScorerParams& params,
                          const PoolingSpec& spec, double step) {
    const std::vector<double> analytic = batch_param_grads(batch, params, spec);
    const std::vector<double> flat = params.flatten();
    double max_err = 0.0;
    for (std::size_t k = 0; k < flat.size(); ++k) {
        ScorerParams probe = params;
        std::vector<double> bumped = flat;
        bumped[k] = flat[k] + step;
        probe.unflatten(bumped);
        const double plus = batch_loss(batch, probe, spec);
        bumped[k] = flat[k] - step;
        probe.unflatten(bumped);
        const double minus = batch_loss(batch, probe, spec);
        const double numeric = (plus - minus) / (2.0 * step);
        max_err = std::max(max_err,
                           std::abs(analytic[k] - numeric) / std::max(std::abs(analytic[k]), 1e-8));
    }
    return max_err;
}

SynthConfig small_synth(std::uint64_t seed) {
    SynthConfig c;
    c.train_clips = 24;
    c.val_clips = 8;
    c.test_clips = 8;
    c.frames_per_clip = 10;
    c.feature_dim = 3;
    c.n_classes = 2;
    c.events_per_clip = 1.0;
    c.event_min_frames = 3;
    c.event_max_frames = 6;
    c.noise_sigma = 0.4;
    c.class_separation = 2.5;
    c.seed = seed;
    return c;
}

}  // namespace

TEST_CASE("zero weights give a constant sigmoid(bias) score") {
    ScorerParams p;
    p.input_dim = 3;
    p.hidden_dim = 4;
    p.n_classes = 2;
    p.w1 = Matrix(3, 4);
    p.b1.assign(4, 0.0);
    p.w2 = Matrix(4, 2);
    p.b2 = {0.5, -1.0};
    p.wa = Matrix(4, 2);
    p.ba.assign(2, 0.0);

    std::mt19937_64 rng(7);
    const std::vector<ClipExample> batch = tiny_batch(rng, 1, 6, 3, 2);
    const ForwardResult out = forward(batch[0].features, p);
    const double expect0 = 1.0 / (1.0 + std::exp(-0.5));
    const double expect1 = 1.0 / (1.0 + std::exp(1.0));
    for (std::size_t i = 0; i < 6; ++i) {
        CHECK(out.scores.values(i, 0) == doctest::Approx(expect0).epsilon(1e-12));
        CHECK(out.scores.values(i, 1) == doctest::Approx(expect1).epsilon(1e-12));
    }
}

TEST_CASE("attention weights never drop below the floor") {
    ScorerParams p;
    p.input_dim = 1;
    p.hidden_dim = 1;
    p.n_classes = 2;
    p.w1 = Matrix(1, 1, 5.0);
    p.b1 = {0.0};
    p.w2 = Matrix(1, 2, 0.0);
    p.b2 = {0.0, 0.0};
    p.wa = Matrix(1, 2);
    p.wa(0, 0) = 25.0;
    p.wa(0, 1) = -25.0;
    p.ba = {0.0, 0.0};

    Matrix features(4, 1, 1.0);
    const ForwardResult out = forward(features, p);
    for (std::size_t i = 0; i < 4; ++i) {
        CHECK(out.attention.values(i, 1) == kAttentionFloor);
        CHECK(out.attention.values(i, 0) >= kAttentionFloor);
    }
}

TEST_CASE("degenerate dimensions are rejected") {
    std::mt19937_64 rng(1);
    CHECK_THROWS_AS(ScorerParams::init(3, 0, 2, rng), ConfigError);
    CHECK_THROWS_AS(ScorerParams::init(0, 4, 2, rng), ConfigError);
}

TEST_CASE("model backprop matches central differences for every pooling and structure") {
    std::mt19937_64 rng(99);
    const std::vector<ClipExample> batch = tiny_batch(rng, 3, 10, 3, 2);
    ScorerParams params = ScorerParams::init(3, 4, 2, rng);

    const std::vector<StagePlan> plans = {StagePlan{}, StagePlan{{5}}, StagePlan{{5, 2}}};
    const std::vector<PoolingFunction> functions = {
        PoolingFunction::kMax, PoolingFunction::kAverage, PoolingFunction::kLinearSoftmax,
        PoolingFunction::kExponentialSoftmax, PoolingFunction::kAttention};
    for (PoolingFunction fn : functions)
        for (const StagePlan& plan : plans) {
            const PoolingSpec spec{fn, plan, SegmentWeightRule::kSelfWeighted};
            const double err = max_param_fd_error(batch, params, spec, 1e-5);
            INFO("fn=", pooling_function_name(fn), " plan=", plan.to_string());
            CHECK(err <= 1e-4);
        }
}

TEST_CASE("legacy segment-weight rule backprop also matches central differences") {
    std::mt19937_64 rng(98);
    const std::vector<ClipExample> batch = tiny_batch(rng, 2, 10, 3, 2);
    const ScorerParams params = [&rng] {
        std::mt19937_64 r(rng());
        return ScorerParams::init(3, 4, 2, r);
    }();
    const PoolingSpec spec{PoolingFunction::kLinearSoftmax, StagePlan{{5}},
                           SegmentWeightRule::kAveraged};
    CHECK(max_param_fd_error(batch, params, spec, 1e-5) <= 1e-4);
}

TEST_CASE("parallel batch gradients equal the serial ones bit for bit") {
    std::mt19937_64 rng(97);
    const std::vector<ClipExample> batch = tiny_batch(rng, 8, 10, 3, 2);
    ScorerParams params = ScorerParams::init(3, 4, 2, rng);
    const PoolingSpec spec{PoolingFunction::kLinearSoftmax, StagePlan{{5}},
                           SegmentWeightRule::kSelfWeighted};
    double loss_serial = 0.0, loss_parallel = 0.0;
    const std::vector<double> serial =
        batch_param_grads(batch, params, spec, &loss_serial, false);
    const std::vector<double> parallel =
        batch_param_grads(batch, params, spec, &loss_parallel, true);
    CHECK(loss_serial == loss_parallel);
    CHECK(serial == parallel);
}

TEST_CASE("training is deterministic for a fixed seed") {
    const Dataset data = generate(small_synth(11));
    TrainConfig config;
    config.max_epochs = 4;
    config.seed = 5;
    config.hidden_dim = 6;
    config.pooling = PoolingSpec{PoolingFunction::kLinearSoftmax, StagePlan{{5}},
                                 SegmentWeightRule::kSelfWeighted};
    const TrainResult a = train(data, config);
    const TrainResult b = train(data, config);
    CHECK(a.history.train_loss == b.history.train_loss);
    CHECK(a.history.val_loss == b.history.val_loss);
    CHECK(a.params.flatten() == b.params.flatten());
}

TEST_CASE("zero learning rate leaves the parameters at their initialization") {
    const Dataset data = generate(small_synth(12));
    TrainConfig config;
    config.learning_rate = 0.0;
    config.max_epochs = 3;
    config.seed = 9;
    config.hidden_dim = 5;
    config.pooling.function = PoolingFunction::kAverage;
    const TrainResult result = train(data, config);

    std::mt19937_64 rng(config.seed);
    const ScorerParams init = ScorerParams::init(data.config.feature_dim, config.hidden_dim,
                                                 data.config.n_classes, rng);
    CHECK(result.params.flatten() == init.flatten());
}

TEST_CASE("loss decreases over the first epochs on an easy dataset") {
    SynthConfig sc = small_synth(13);
    sc.train_clips = 60;
    sc.noise_sigma = 0.3;
    sc.class_separation = 3.0;
    const Dataset data = generate(sc);
    TrainConfig config;
    config.max_epochs = 5;
    config.early_stop_patience = 10;
    config.seed = 3;
    config.hidden_dim = 8;
    config.pooling.function = PoolingFunction::kMax;  // flat structure
    const TrainResult result = train(data, config);
    REQUIRE(result.history.train_loss.size() == 5);
    CHECK(result.history.train_loss[4] < result.history.train_loss[0]);
}

TEST_CASE("empty splits and non-finite features abort with diagnostics") {
    Dataset empty;
    empty.config = small_synth(1);
    CHECK_THROWS_AS(train(empty, TrainConfig{}), DataError);

    Dataset poisoned = generate(small_synth(14));
    poisoned.clips[0].features(2, 1) = std::numeric_limits<double>::quiet_NaN();
    TrainConfig config;
    config.max_epochs = 1;
    config.pooling.function = PoolingFunction::kAverage;
    CHECK_THROWS_AS(train(poisoned, config), NumericError);
}

TEST_CASE("checkpoints round-trip and reject mismatched configurations") {
    std::mt19937_64 rng(23);
    const ScorerParams params = ScorerParams::init(3, 4, 2, rng);
    TrainConfig config;
    config.learning_rate = 0.002;
    config.pooling.function = PoolingFunction::kExponentialSoftmax;

    const std::filesystem::path path =
        std::filesystem::temp_directory_path() / "milpool_ckpt_test.ckpt";
    save_checkpoint(params, config, path);
    const ScorerParams loaded = load_checkpoint(path, &config);
    CHECK(loaded.flatten() == params.flatten());
    CHECK(loaded.input_dim == 3);

    TrainConfig other = config;
    other.learning_rate = 0.01;
    CHECK_THROWS_AS(load_checkpoint(path, &other), DataError);

    // Truncated parameter payloads are detected.
    {
        std::error_code ec;
        const auto size = std::filesystem::file_size(path, ec);
        REQUIRE_FALSE(ec);
        std::filesystem::resize_file(path, size - 16);
        CHECK_THROWS_AS(load_checkpoint(path), DataError);
    }
    std::filesystem::remove(path);
}
