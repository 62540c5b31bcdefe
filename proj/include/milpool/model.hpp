// SPDX-License-Identifier: Apache-2.0
// Copyright (C) 2026 milpool authors
//
// Desk-scale trainable detector. A per-frame MLP (input -> hidden, tanh ->
// sigmoid score head) produces frame probabilities; a parallel dense head on
// the same hidden representation produces attention weights via a softmax
// over the class axis. The pooling and loss layers use the analytic
// backward passes from gradients.hpp; the dense layers use ordinary
// reverse-mode backprop.

#ifndef MILPOOL_MODEL_HPP
#define MILPOOL_MODEL_HPP

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "milpool/gradients.hpp"
#include "milpool/synth.hpp"
#include "milpool/types.hpp"

namespace milpool {

/// Attention weights are floored here so pooling denominators never vanish.
inline constexpr double kAttentionFloor = 1e-7;

/// Weights and biases of the frame scorer and the attention head.
struct ScorerParams {
    int input_dim = 0;
    int hidden_dim = 0;
    int n_classes = 0;
    Matrix w1;                // input_dim x hidden_dim
    std::vector<double> b1;   // hidden_dim
    Matrix w2;                // hidden_dim x n_classes (score head)
    std::vector<double> b2;   // n_classes
    Matrix wa;                // hidden_dim x n_classes (attention head)
    std::vector<double> ba;   // n_classes

    static ScorerParams init(int input_dim, int hidden_dim, int n_classes, std::mt19937_64& rng);

    std::size_t param_count() const;
    std::vector<double> flatten() const;
    void unflatten(const std::vector<double>& flat);
};

struct ForwardResult {
    Matrix hidden;            // N x H, tanh activations
    FrameScores scores;       // N x C
    FrameWeights attention;   // N x C, softmax over classes, floored
};

/// Full forward pass; attention weights are always produced (they are cheap
/// and keep the result shape independent of the pooling choice).
ForwardResult forward(const Matrix& features, const ScorerParams& params,
                      double frame_rate_hz = 12.5);

/// Forward pass returning scores only.
FrameScores predict_frames(const Matrix& features, const ScorerParams& params,
                           double frame_rate_hz = 12.5);

struct ClipExample {
    Matrix features;
    std::vector<int> targets;
};

/// Mean clip loss over a batch under the given pooling spec.
double batch_loss(const std::vector<ClipExample>& batch, const ScorerParams& params,
                  const PoolingSpec& spec);

/// Mean clip loss and its gradient with respect to every parameter, flat in
/// ScorerParams::flatten order. Used by the trainer and the gradient tests.
std::vector<double> batch_param_grads(const std::vector<ClipExample>& batch,
                                      const ScorerParams& params, const PoolingSpec& spec,
                                      double* loss_out = nullptr, bool parallel = false);

struct TrainConfig {
    double learning_rate = 0.001;
    int batch_size = 32;
    int early_stop_patience = 10;
    int max_epochs = 60;
    std::uint64_t seed = 1;
    int hidden_dim = 32;
    PoolingSpec pooling;
    bool parallel_batch = false;  // per-clip gradients still reduce in clip order
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_epsilon = 1e-8;

    /// Stable hash of every field that affects the trained artifact.
    std::uint64_t config_hash() const;
};

struct TrainHistory {
    std::vector<double> train_loss;  // per epoch, after that epoch's updates
    std::vector<double> val_loss;
    int best_epoch = -1;
};

struct TrainResult {
    ScorerParams params;  // best-validation snapshot
    TrainHistory history;
};

/// Adam training with early stopping on validation loss. Deterministic for
/// a fixed seed and config. Throws NumericError if the loss goes non-finite
/// and DataError on an empty split.
TrainResult train(const Dataset& data, const TrainConfig& config);

/// Checkpoint: one JSON header line (shapes, config hash), then the flat
/// parameter vector as little-endian 64-bit floats.
void save_checkpoint(const ScorerParams& params, const TrainConfig& config,
                     const std::filesystem::path& path);
ScorerParams load_checkpoint(const std::filesystem::path& path,
                             const TrainConfig* expected_config = nullptr);

}  // namespace milpool

#endif  // MILPOOL_MODEL_HPP
