// SPDX-License-Identifier: Apache-2.0
// Copyright (C) 2026 milpool authors

#include <filesystem>
#include <fstream>
#include <set>

#include <doctest.h>

#include "milpool/synth.hpp"

using namespace milpool;

namespace {

SynthConfig small_config(std::uint64_t seed) {
    SynthConfig c;
    c.train_clips = 30;
    c.val_clips = 10;
    c.test_clips = 10;
    c.frames_per_clip = 25;
    c.feature_dim = 4;
    c.n_classes = 3;
    c.events_per_clip = 1.5;
    c.event_min_frames = 3;
    c.event_max_frames = 10;
    c.seed = seed;
    return c;
}

bool datasets_equal(const Dataset& a, const Dataset& b) {
    if (a.clips.size() != b.clips.size()) return false;
    for (std::size_t i = 0; i < a.clips.size(); ++i) {
        const ClipRecord& x = a.clips[i];
        const ClipRecord& y = b.clips[i];
        if (x.id != y.id || x.split != y.split || x.weak_labels != y.weak_labels ||
            x.events != y.events || !(x.features == y.features))
            return false;
    }
    return true;
}

struct TempDir {
    std::filesystem::path path;
    explicit TempDir(const std::string& name)
        : path(std::filesystem::temp_directory_path() / name) {
        std::filesystem::remove_all(path);
        std::filesystem::create_directories(path);
    }
    ~TempDir() { std::filesystem::remove_all(path); }
};

}  // namespace

TEST_CASE("weak labels follow the bag rule exactly") {
    const Dataset data = generate(small_config(101));
    bool saw_positive = false, saw_negative = false;
    for (const ClipRecord& clip : data.clips) {
        std::set<int> classes;
        for (const EventSpan& e : clip.events) {
            CHECK(e.onset_frame >= 0);
            CHECK(e.offset_frame <= data.config.frames_per_clip);
            CHECK(e.onset_frame < e.offset_frame);
            classes.insert(e.class_index);
        }
        for (int c = 0; c < data.config.n_classes; ++c)
            CHECK(clip.weak_labels[c] == (classes.count(c) ? 1 : 0));
        saw_positive |= !classes.empty();
        saw_negative |= classes.empty();
    }
    CHECK(saw_positive);
    CHECK(saw_negative);
}

TEST_CASE("splits are disjoint and sized as configured") {
    const Dataset data = generate(small_config(102));
    std::set<std::string> ids;
    for (const ClipRecord& clip : data.clips) CHECK(ids.insert(clip.id).second);
    CHECK(data.split_indices(Split::kTrain).size() == 30);
    CHECK(data.split_indices(Split::kVal).size() == 10);
    CHECK(data.split_indices(Split::kTest).size() == 10);
}

TEST_CASE("zero event rate yields only negative clips") {
    SynthConfig c = small_config(103);
    c.events_per_clip = 0.0;
    const Dataset data = generate(c);
    for (const ClipRecord& clip : data.clips) {
        CHECK(clip.events.empty());
        for (int label : clip.weak_labels) CHECK(label == 0);
    }
}

TEST_CASE("generation is deterministic in the seed") {
    const Dataset a = generate(small_config(104));
    const Dataset b = generate(small_config(104));
    const Dataset c = generate(small_config(105));
    CHECK(datasets_equal(a, b));
    CHECK_FALSE(datasets_equal(a, c));
}

TEST_CASE("dataset files round-trip") {
    TempDir dir("milpool_synth_roundtrip");
    const Dataset data = generate(small_config(106));
    write_dataset(data, dir.path);
    const Dataset loaded = read_dataset(dir.path);
    CHECK(datasets_equal(data, loaded));
    CHECK(loaded.class_names == data.class_names);
    CHECK(loaded.config.frame_rate_hz == data.config.frame_rate_hz);
}

TEST_CASE("an empty dataset still round-trips") {
    TempDir dir("milpool_synth_empty");
    SynthConfig c = small_config(107);
    c.train_clips = c.val_clips = c.test_clips = 0;
    const Dataset data = generate(c);
    write_dataset(data, dir.path);
    const Dataset loaded = read_dataset(dir.path);
    CHECK(loaded.clips.empty());
}

TEST_CASE("truncated feature files are rejected, not partially read") {
    TempDir dir("milpool_synth_truncated");
    const Dataset data = generate(small_config(108));
    write_dataset(data, dir.path);
    const std::filesystem::path victim = dir.path / "features_train.bin";
    const auto size = std::filesystem::file_size(victim);
    std::filesystem::resize_file(victim, size - 7);
    CHECK_THROWS_AS(read_dataset(dir.path), DataError);
}

TEST_CASE("corrupt magic bytes are rejected") {
    TempDir dir("milpool_synth_magic");
    const Dataset data = generate(small_config(109));
    write_dataset(data, dir.path);
    {
        std::fstream f(dir.path / "features_val.bin",
                       std::ios::binary | std::ios::in | std::ios::out);
        f.put('X');
    }
    CHECK_THROWS_AS(read_dataset(dir.path), DataError);
}

TEST_CASE("infeasible configurations are rejected") {
    SynthConfig c = small_config(110);
    c.event_max_frames = c.frames_per_clip + 1;
    CHECK_THROWS_AS(generate(c), ConfigError);
    c = small_config(110);
    c.event_min_frames = 0;
    CHECK_THROWS_AS(generate(c), ConfigError);
    c = small_config(110);
    c.noise_sigma = -1.0;
    CHECK_THROWS_AS(generate(c), ConfigError);
}
