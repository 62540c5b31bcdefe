// SPDX-License-Identifier: Apache-2.0
// Copyright (C) 2026 milpool authors
//
// Weakly labeled synthetic clips with a hidden strong-label reference.
// Each clip is Gaussian background noise in feature space; an event adds a
// class-specific mean vector over its frame interval. The weak label of a
// class is set iff at least one frame carries an event of that class.

#ifndef MILPOOL_SYNTH_HPP
#define MILPOOL_SYNTH_HPP

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "milpool/types.hpp"

namespace milpool {

struct SynthConfig {
    int train_clips = 600;
    int val_clips = 100;
    int test_clips = 100;
    int frames_per_clip = 125;
    int feature_dim = 16;
    int n_classes = 4;
    double events_per_clip = 1.2;   // Poisson mean
    int event_min_frames = 8;
    int event_max_frames = 40;
    double noise_sigma = 1.6;
    double class_separation = 1.0;  // norm of each class mean vector
    double frame_rate_hz = 12.5;
    std::uint64_t seed = 7;
};

enum class Split { kTrain, kVal, kTest };

const char* split_name(Split s);
Split split_from_name(const std::string& name);

/// One event occurrence: frames [onset_frame, offset_frame).
struct EventSpan {
    int class_index = 0;
    int onset_frame = 0;
    int offset_frame = 0;

    friend bool operator==(const EventSpan&, const EventSpan&) = default;
};

struct ClipRecord {
    std::string id;
    Matrix features;                 // N x D, quantized to float32 precision
    std::vector<int> weak_labels;    // C entries, 0/1
    std::vector<EventSpan> events;   // strong reference, hidden from training
    Split split = Split::kTrain;
};

struct Dataset {
    SynthConfig config;
    std::vector<std::string> class_names;
    std::vector<ClipRecord> clips;

    std::vector<std::size_t> split_indices(Split s) const;
};

/// Deterministic generation from config.seed.
Dataset generate(const SynthConfig& config);

/// Writes features_{train,val,test}.bin (magic "MILP"), metadata.jsonl,
/// strong_ref.tsv and a dataset.json manifest into `dir`.
void write_dataset(const Dataset& data, const std::filesystem::path& dir);

/// Reads a directory produced by write_dataset. Throws DataError on
/// missing, truncated or inconsistent files.
Dataset read_dataset(const std::filesystem::path& dir);

}  // namespace milpool

#endif  // MILPOOL_SYNTH_HPP
