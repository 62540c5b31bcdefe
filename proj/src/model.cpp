// SPDX-License-Identifier: Apache-2.0
// Copyright (C) 2026 milpool authors

#include "milpool/model.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <sstream>

#include <json.hpp>

namespace milpool {

static_assert(std::endian::native == std::endian::little,
              "checkpoint format assumes a little-endian host");

namespace {

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

std::uint64_t fnv1a(const std::string& text) {
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char ch : text) {
        h ^= ch;
        h *= 1099511628211ull;
    }
    return h;
}

/// Gradient accumulator with the same layout as ScorerParams::flatten.
struct FlatGrads {
    explicit FlatGrads(std::size_t n) : values(n, 0.0) {}
    std::vector<double> values;

    void add_scaled(const FlatGrads& other, double scale) {
        for (std::size_t i = 0; i < values.size(); ++i) values[i] += scale * other.values[i];
    }
};

struct GradLayout {
    std::size_t w1, b1, w2, b2, wa, ba;  // offsets into the flat vector
    static GradLayout of(const ScorerParams& p) {
        GradLayout l{};
        l.w1 = 0;
        l.b1 = l.w1 + p.w1.size();
        l.w2 = l.b1 + p.b1.size();
        l.b2 = l.w2 + p.w2.size();
        l.wa = l.b2 + p.b2.size();
        l.ba = l.wa + p.wa.size();
        return l;
    }
};

/// Loss and parameter gradient of a single clip, accumulated into `grads`.
double clip_loss_and_grads(const ClipExample& clip, const ScorerParams& p,
                           const PoolingSpec& spec, FlatGrads* grads) {
    const ForwardResult fwd = forward(clip.features, p);
    const Matrix& h = fwd.hidden;
    const Matrix& x = fwd.scores.values;
    const std::size_t n = x.rows();
    const std::size_t n_classes = x.cols();
    const std::size_t n_hidden = h.cols();
    const std::size_t n_inputs = clip.features.cols();

    const bool attention = spec.function == PoolingFunction::kAttention;
    const FrameWeights weights =
        attention ? fwd.attention : compute_weights(fwd.scores, spec.function);

    const ClipProbability y = pool_hierarchical(fwd.scores, weights, spec.plan, spec.rule);
    const double clip_loss = loss(y, clip.targets);
    if (grads == nullptr) return clip_loss;

    const std::vector<double> gy = loss_grad(y, clip.targets);
    const PoolingGradients pg =
        grad_hierarchical(fwd.scores, weights, spec.function, spec.plan, spec.rule);

    const GradLayout at = GradLayout::of(p);
    std::vector<double>& g = grads->values;
    Matrix dh(n, n_hidden);

    // Score head: through the sigmoid, then into w2/b2 and the hidden state.
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t c = 0; c < n_classes; ++c) {
            const double dx = gy[c] * pg.d_y_d_x(i, c);
            const double dz2 = dx * x(i, c) * (1.0 - x(i, c));
            for (std::size_t k = 0; k < n_hidden; ++k) {
                g[at.w2 + k * n_classes + c] += h(i, k) * dz2;
                dh(i, k) += p.w2(k, c) * dz2;
            }
            g[at.b2 + c] += dz2;
        }
    }

    // Attention head: through the floor and the per-frame class softmax.
    if (attention) {
        for (std::size_t i = 0; i < n; ++i) {
            double dot = 0.0;
            std::vector<double> gw(n_classes);
            for (std::size_t c = 0; c < n_classes; ++c) {
                const double raw = gy[c] * pg.d_y_d_w(i, c);
                gw[c] = weights.values(i, c) > kAttentionFloor ? raw : 0.0;
                dot += gw[c] * weights.values(i, c);
            }
            for (std::size_t c = 0; c < n_classes; ++c) {
                const double dza = weights.values(i, c) * (gw[c] - dot);
                for (std::size_t k = 0; k < n_hidden; ++k) {
                    g[at.wa + k * n_classes + c] += h(i, k) * dza;
                    dh(i, k) += p.wa(k, c) * dza;
                }
                g[at.ba + c] += dza;
            }
        }
    }

    // Shared hidden layer.
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t k = 0; k < n_hidden; ++k) {
            const double dz1 = dh(i, k) * (1.0 - h(i, k) * h(i, k));
            for (std::size_t d = 0; d < n_inputs; ++d)
                g[at.w1 + d * n_hidden + k] += clip.features(i, d) * dz1;
            g[at.b1 + k] += dz1;
        }
    }
    return clip_loss;
}

}  // namespace

ScorerParams ScorerParams::init(int input_dim, int hidden_dim, int n_classes,
                                std::mt19937_64& rng) {
    if (input_dim < 1 || hidden_dim < 1 || n_classes < 1)
        throw ConfigError("ScorerParams::init: dimensions must be >= 1");
    ScorerParams p;
    p.input_dim = input_dim;
    p.hidden_dim = hidden_dim;
    p.n_classes = n_classes;
    p.w1 = Matrix(input_dim, hidden_dim);
    p.b1.assign(hidden_dim, 0.0);
    p.w2 = Matrix(hidden_dim, n_classes);
    p.b2.assign(n_classes, 0.0);
    p.wa = Matrix(hidden_dim, n_classes);
    p.ba.assign(n_classes, 0.0);

    auto fill = [&rng](Matrix& m, double scale) {
        std::normal_distribution<double> dist(0.0, scale);
        for (std::size_t r = 0; r < m.rows(); ++r)
            for (std::size_t c = 0; c < m.cols(); ++c) m(r, c) = dist(rng);
    };
    fill(p.w1, 1.0 / std::sqrt(static_cast<double>(input_dim)));
    fill(p.w2, 1.0 / std::sqrt(static_cast<double>(hidden_dim)));
    fill(p.wa, 1.0 / std::sqrt(static_cast<double>(hidden_dim)));
    return p;
}

std::size_t ScorerParams::param_count() const {
    return w1.size() + b1.size() + w2.size() + b2.size() + wa.size() + ba.size();
}

std::vector<double> ScorerParams::flatten() const {
    std::vector<double> flat;
    flat.reserve(param_count());
    auto push_matrix = [&flat](const Matrix& m) {
        flat.insert(flat.end(), m.data(), m.data() + m.size());
    };
    push_matrix(w1);
    flat.insert(flat.end(), b1.begin(), b1.end());
    push_matrix(w2);
    flat.insert(flat.end(), b2.begin(), b2.end());
    push_matrix(wa);
    flat.insert(flat.end(), ba.begin(), ba.end());
    return flat;
}

void ScorerParams::unflatten(const std::vector<double>& flat) {
    if (flat.size() != param_count())
        throw std::invalid_argument("ScorerParams::unflatten: size mismatch");
    const double* src = flat.data();
    auto take_matrix = [&src](Matrix& m) {
        std::copy(src, src + m.size(), m.data());
        src += m.size();
    };
    auto take_vector = [&src](std::vector<double>& v) {
        std::copy(src, src + v.size(), v.data());
        src += v.size();
    };
    take_matrix(w1);
    take_vector(b1);
    take_matrix(w2);
    take_vector(b2);
    take_matrix(wa);
    take_vector(ba);
}

ForwardResult forward(const Matrix& features, const ScorerParams& p, double frame_rate_hz) {
    if (features.cols() != static_cast<std::size_t>(p.input_dim))
        throw std::invalid_argument("forward: feature dimension does not match scorer");
    if (features.rows() == 0) throw std::invalid_argument("forward: empty clip");

    const std::size_t n = features.rows();
    const std::size_t n_hidden = p.w1.cols();
    const std::size_t n_classes = p.w2.cols();

    ForwardResult out;
    out.hidden = Matrix(n, n_hidden);
    out.scores.values = Matrix(n, n_classes);
    out.scores.frame_rate_hz = frame_rate_hz;
    out.attention.values = Matrix(n, n_classes);

    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t k = 0; k < n_hidden; ++k) {
            double z = p.b1[k];
            for (std::size_t d = 0; d < features.cols(); ++d)
                z += features(i, d) * p.w1(d, k);
            out.hidden(i, k) = std::tanh(z);
        }
        double max_logit = -1e300;
        std::vector<double> att_logits(n_classes);
        for (std::size_t c = 0; c < n_classes; ++c) {
            double z2 = p.b2[c];
            double za = p.ba[c];
            for (std::size_t k = 0; k < n_hidden; ++k) {
                z2 += out.hidden(i, k) * p.w2(k, c);
                za += out.hidden(i, k) * p.wa(k, c);
            }
            out.scores.values(i, c) = sigmoid(z2);
            att_logits[c] = za;
            max_logit = std::max(max_logit, za);
        }
        double denom = 0.0;
        for (std::size_t c = 0; c < n_classes; ++c) denom += std::exp(att_logits[c] - max_logit);
        for (std::size_t c = 0; c < n_classes; ++c)
            out.attention.values(i, c) =
                std::max(std::exp(att_logits[c] - max_logit) / denom, kAttentionFloor);
    }
    return out;
}

FrameScores predict_frames(const Matrix& features, const ScorerParams& params,
                           double frame_rate_hz) {
    return forward(features, params, frame_rate_hz).scores;
}

double batch_loss(const std::vector<ClipExample>& batch, const ScorerParams& params,
                  const PoolingSpec& spec) {
    if (batch.empty()) throw std::invalid_argument("batch_loss: empty batch");
    std::vector<double> losses(batch.size());
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(batch.size()); ++i)
        losses[i] = clip_loss_and_grads(batch[i], params, spec, nullptr);
    double total = 0.0;
    for (double l : losses) total += l;  // fixed order, independent of threads
    return total / static_cast<double>(batch.size());
}

std::vector<double> batch_param_grads(const std::vector<ClipExample>& batch,
                                      const ScorerParams& params, const PoolingSpec& spec,
                                      double* loss_out, bool parallel) {
    if (batch.empty()) throw std::invalid_argument("batch_param_grads: empty batch");
    const double scale = 1.0 / static_cast<double>(batch.size());
    FlatGrads total(params.param_count());
    double loss_sum = 0.0;

    if (parallel) {
        // Per-clip buffers reduced in clip order: bit-identical to the
        // serial path regardless of thread count.
        std::vector<FlatGrads> per_clip(batch.size(), FlatGrads(params.param_count()));
        std::vector<double> losses(batch.size());
#pragma omp parallel for schedule(static)
        for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(batch.size()); ++i)
            losses[i] = clip_loss_and_grads(batch[i], params, spec, &per_clip[i]);
        for (std::size_t i = 0; i < batch.size(); ++i) {
            loss_sum += losses[i];
            total.add_scaled(per_clip[i], 1.0);
        }
    } else {
        for (const ClipExample& clip : batch)
            loss_sum += clip_loss_and_grads(clip, params, spec, &total);
    }

    for (double& v : total.values) v *= scale;
    if (loss_out != nullptr) *loss_out = loss_sum * scale;
    return std::move(total.values);
}

std::uint64_t TrainConfig::config_hash() const {
    std::ostringstream s;
    s.precision(17);
    s << "lr=" << learning_rate << ";batch=" << batch_size << ";patience=" << early_stop_patience
      << ";epochs=" << max_epochs << ";seed=" << seed << ";hidden=" << hidden_dim
      << ";fn=" << pooling_function_name(pooling.function) << ";plan=" << pooling.plan.to_string()
      << ";rule=" << (pooling.rule == SegmentWeightRule::kSelfWeighted ? "self" : "averaged")
      << ";b1=" << adam_beta1 << ";b2=" << adam_beta2 << ";eps=" << adam_epsilon;
    return fnv1a(s.str());
}

TrainResult train(const Dataset& data, const TrainConfig& config) {
    const std::vector<std::size_t> train_idx = data.split_indices(Split::kTrain);
    const std::vector<std::size_t> val_idx = data.split_indices(Split::kVal);
    if (train_idx.empty()) throw DataError("train: dataset has no training clips");
    if (val_idx.empty()) throw DataError("train: dataset has no validation clips");
    if (config.batch_size < 1 || config.max_epochs < 1 || config.early_stop_patience < 1 ||
        config.learning_rate < 0.0)
        throw ConfigError("train: invalid training configuration");
    if (!config.pooling.plan.valid_for(static_cast<std::size_t>(data.config.frames_per_clip)))
        throw ConfigError("train: pooling plan " + config.pooling.plan.to_string() +
                          " is invalid for " + std::to_string(data.config.frames_per_clip) +
                          " frames per clip");

    auto make_examples = [&data](const std::vector<std::size_t>& idx) {
        std::vector<ClipExample> out;
        out.reserve(idx.size());
        for (std::size_t i : idx) {
            const ClipRecord& clip = data.clips[i];
            for (std::size_t k = 0; k < clip.features.size(); ++k)
                if (!std::isfinite(clip.features.data()[k]))
                    throw NumericError("train: non-finite feature in clip " + clip.id);
            out.push_back(ClipExample{clip.features, clip.weak_labels});
        }
        return out;
    };
    const std::vector<ClipExample> train_set = make_examples(train_idx);
    const std::vector<ClipExample> val_set = make_examples(val_idx);

    std::mt19937_64 rng(config.seed);
    ScorerParams params = ScorerParams::init(data.config.feature_dim, config.hidden_dim,
                                             data.config.n_classes, rng);

    const std::size_t n_params = params.param_count();
    std::vector<double> flat = params.flatten();
    std::vector<double> m(n_params, 0.0), v(n_params, 0.0);
    long step = 0;

    TrainResult result;
    result.params = params;
    double best_val = std::numeric_limits<double>::infinity();
    int epochs_since_best = 0;

    std::vector<std::size_t> order(train_set.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

    for (int epoch = 0; epoch < config.max_epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        for (std::size_t begin = 0; begin < order.size();
             begin += static_cast<std::size_t>(config.batch_size)) {
            const std::size_t end =
                std::min(order.size(), begin + static_cast<std::size_t>(config.batch_size));
            std::vector<ClipExample> batch;
            batch.reserve(end - begin);
            for (std::size_t i = begin; i < end; ++i) batch.push_back(train_set[order[i]]);

            double batch_mean_loss = 0.0;
            const std::vector<double> grads = batch_param_grads(
                batch, params, config.pooling, &batch_mean_loss, config.parallel_batch);
            if (!std::isfinite(batch_mean_loss))
                throw NumericError("train: non-finite loss at epoch " + std::to_string(epoch));

            ++step;
            const double bias1 = 1.0 - std::pow(config.adam_beta1, static_cast<double>(step));
            const double bias2 = 1.0 - std::pow(config.adam_beta2, static_cast<double>(step));
            for (std::size_t i = 0; i < n_params; ++i) {
                m[i] = config.adam_beta1 * m[i] + (1.0 - config.adam_beta1) * grads[i];
                v[i] = config.adam_beta2 * v[i] + (1.0 - config.adam_beta2) * grads[i] * grads[i];
                flat[i] -= config.learning_rate * (m[i] / bias1) /
                           (std::sqrt(v[i] / bias2) + config.adam_epsilon);
            }
            params.unflatten(flat);
        }

        const double train_loss = batch_loss(train_set, params, config.pooling);
        const double val_loss = batch_loss(val_set, params, config.pooling);
        if (!std::isfinite(train_loss) || !std::isfinite(val_loss))
            throw NumericError("train: non-finite epoch loss at epoch " + std::to_string(epoch));
        result.history.train_loss.push_back(train_loss);
        result.history.val_loss.push_back(val_loss);

        if (val_loss < best_val) {
            best_val = val_loss;
            result.params = params;
            result.history.best_epoch = epoch;
            epochs_since_best = 0;
        } else if (++epochs_since_best >= config.early_stop_patience) {
            break;
        }
    }
    return result;
}

void save_checkpoint(const ScorerParams& params, const TrainConfig& config,
                     const std::filesystem::path& path) {
    nlohmann::json header;
    header["format"] = "milpool-checkpoint";
    header["version"] = 1;
    header["input_dim"] = params.input_dim;
    header["hidden_dim"] = params.hidden_dim;
    header["n_classes"] = params.n_classes;
    header["param_count"] = params.param_count();
    {
        std::ostringstream hash_hex;
        hash_hex << std::hex << config.config_hash();
        header["config_hash"] = hash_hex.str();
    }

    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("save_checkpoint: cannot open " + path.string());
    out << header.dump() << '\n';
    const std::vector<double> flat = params.flatten();
    out.write(reinterpret_cast<const char*>(flat.data()),
              static_cast<std::streamsize>(flat.size() * sizeof(double)));
    if (!out) throw DataError("save_checkpoint: write failed for " + path.string());
}

ScorerParams load_checkpoint(const std::filesystem::path& path,
                             const TrainConfig* expected_config) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("load_checkpoint: cannot open " + path.string());
    std::string header_line;
    if (!std::getline(in, header_line))
        throw DataError("load_checkpoint: missing header in " + path.string());

    nlohmann::json header;
    try {
        header = nlohmann::json::parse(header_line);
    } catch (const nlohmann::json::exception& e) {
        throw DataError("load_checkpoint: bad header in " + path.string() + ": " + e.what());
    }
    if (header.value("format", "") != "milpool-checkpoint" || header.value("version", 0) != 1)
        throw DataError("load_checkpoint: unrecognized checkpoint format in " + path.string());

    if (expected_config != nullptr) {
        std::ostringstream hash_hex;
        hash_hex << std::hex << expected_config->config_hash();
        if (header.value("config_hash", "") != hash_hex.str())
            throw DataError("load_checkpoint: config hash mismatch for " + path.string());
    }

    ScorerParams p;
    p.input_dim = header.at("input_dim").get<int>();
    p.hidden_dim = header.at("hidden_dim").get<int>();
    p.n_classes = header.at("n_classes").get<int>();
    if (p.input_dim < 1 || p.hidden_dim < 1 || p.n_classes < 1)
        throw DataError("load_checkpoint: bad shapes in " + path.string());
    p.w1 = Matrix(p.input_dim, p.hidden_dim);
    p.b1.assign(p.hidden_dim, 0.0);
    p.w2 = Matrix(p.hidden_dim, p.n_classes);
    p.b2.assign(p.n_classes, 0.0);
    p.wa = Matrix(p.hidden_dim, p.n_classes);
    p.ba.assign(p.n_classes, 0.0);

    const std::size_t expect = header.at("param_count").get<std::size_t>();
    if (expect != p.param_count())
        throw DataError("load_checkpoint: parameter count mismatch in " + path.string());
    std::vector<double> flat(expect);
    in.read(reinterpret_cast<char*>(flat.data()),
            static_cast<std::streamsize>(expect * sizeof(double)));
    if (in.gcount() != static_cast<std::streamsize>(expect * sizeof(double)))
        throw DataError("load_checkpoint: truncated parameters in " + path.string());
    p.unflatten(flat);
    return p;
}

}  // namespace milpool
