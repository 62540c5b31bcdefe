// SPDX-License-Identifier: Apache-2.0
// Copyright (C) 2026 milpool authors

#include "milpool/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <random>
#include <sstream>

#include <json.hpp>

namespace milpool {

namespace {

constexpr char kFeatureMagic[4] = {'M', 'I', 'L', 'P'};
constexpr std::uint8_t kFeatureVersion = 1;

void validate(const SynthConfig& c) {
    if (c.train_clips < 0 || c.val_clips < 0 || c.test_clips < 0)
        throw ConfigError("synth: negative clip count");
    if (c.frames_per_clip < 1) throw ConfigError("synth: frames_per_clip must be >= 1");
    if (c.feature_dim < 1) throw ConfigError("synth: feature_dim must be >= 1");
    if (c.n_classes < 1) throw ConfigError("synth: n_classes must be >= 1");
    if (c.event_min_frames < 1 || c.event_min_frames > c.event_max_frames)
        throw ConfigError("synth: bad event duration range");
    if (c.event_max_frames > c.frames_per_clip)
        throw ConfigError("synth: event duration exceeds clip length");
    if (c.noise_sigma < 0.0) throw ConfigError("synth: noise_sigma must be >= 0");
    if (c.frame_rate_hz <= 0.0) throw ConfigError("synth: frame_rate_hz must be > 0");
    if (c.events_per_clip < 0.0) throw ConfigError("synth: events_per_clip must be >= 0");
}

void write_u32(std::ostream& out, std::uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v & 0xff),
                          static_cast<unsigned char>((v >> 8) & 0xff),
                          static_cast<unsigned char>((v >> 16) & 0xff),
                          static_cast<unsigned char>((v >> 24) & 0xff)};
    out.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t read_u32(std::istream& in, const std::string& context) {
    unsigned char b[4];
    in.read(reinterpret_cast<char*>(b), 4);
    if (in.gcount() != 4) throw DataError("truncated feature file: " + context);
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

std::string format_seconds(double s) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.6f", s);
    return buf;
}

}  // namespace

const char* split_name(Split s) {
    switch (s) {
        case Split::kTrain: return "train";
        case Split::kVal: return "val";
        case Split::kTest: return "test";
    }
    return "unknown";
}

Split split_from_name(const std::string& name) {
    if (name == "train") return Split::kTrain;
    if (name == "val") return Split::kVal;
    if (name == "test") return Split::kTest;
    throw DataError("unknown split name: '" + name + "'");
}

std::vector<std::size_t> Dataset::split_indices(Split s) const {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < clips.size(); ++i)
        if (clips[i].split == s) idx.push_back(i);
    return idx;
}

Dataset generate(const SynthConfig& config) {
    validate(config);
    std::mt19937_64 rng(config.seed);

    Dataset data;
    data.config = config;
    for (int c = 0; c < config.n_classes; ++c)
        data.class_names.push_back("class_" + std::to_string(c));

    // Class mean vectors: random directions scaled to the configured norm.
    std::vector<std::vector<double>> class_means(config.n_classes,
                                                 std::vector<double>(config.feature_dim));
    {
        std::normal_distribution<double> unit(0.0, 1.0);
        for (auto& mean : class_means) {
            double norm_sq = 0.0;
            for (double& v : mean) {
                v = unit(rng);
                norm_sq += v * v;
            }
            const double scale = config.class_separation / std::sqrt(std::max(norm_sq, 1e-12));
            for (double& v : mean) v *= scale;
        }
    }

    const int total = config.train_clips + config.val_clips + config.test_clips;
    std::normal_distribution<double> noise(0.0, config.noise_sigma);
    std::uniform_int_distribution<int> pick_class(0, config.n_classes - 1);
    std::uniform_int_distribution<int> pick_duration(config.event_min_frames,
                                                     config.event_max_frames);

    data.clips.reserve(static_cast<std::size_t>(total));
    for (int index = 0; index < total; ++index) {
        ClipRecord clip;
        {
            char buf[24];
            std::snprintf(buf, sizeof(buf), "clip_%06d", index);
            clip.id = buf;
        }
        clip.split = index < config.train_clips                      ? Split::kTrain
                     : index < config.train_clips + config.val_clips ? Split::kVal
                                                                     : Split::kTest;

        int n_events = 0;
        if (config.events_per_clip > 0.0) {
            std::poisson_distribution<int> pick_count(config.events_per_clip);
            n_events = pick_count(rng);
        }
        for (int e = 0; e < n_events; ++e) {
            EventSpan span;
            span.class_index = pick_class(rng);
            const int duration = pick_duration(rng);
            std::uniform_int_distribution<int> pick_onset(0, config.frames_per_clip - duration);
            span.onset_frame = pick_onset(rng);
            span.offset_frame = span.onset_frame + duration;
            clip.events.push_back(span);
        }

        clip.features = Matrix(config.frames_per_clip, config.feature_dim);
        for (int i = 0; i < config.frames_per_clip; ++i)
            for (int d = 0; d < config.feature_dim; ++d)
                clip.features(i, d) = config.noise_sigma > 0.0 ? noise(rng) : 0.0;
        for (const EventSpan& span : clip.events)
            for (int i = span.onset_frame; i < span.offset_frame; ++i)
                for (int d = 0; d < config.feature_dim; ++d)
                    clip.features(i, d) += class_means[span.class_index][d];

        // Stored features are float32; quantize now so the in-memory dataset
        // equals its round trip through the files.
        for (std::size_t i = 0; i < clip.features.size(); ++i)
            clip.features.data()[i] = static_cast<double>(static_cast<float>(clip.features.data()[i]));

        clip.weak_labels.assign(config.n_classes, 0);
        for (const EventSpan& span : clip.events) clip.weak_labels[span.class_index] = 1;

        data.clips.push_back(std::move(clip));
    }
    return data;
}

void write_dataset(const Dataset& data, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);

    for (Split s : {Split::kTrain, Split::kVal, Split::kTest}) {
        const std::filesystem::path path =
            dir / ("features_" + std::string(split_name(s)) + ".bin");
        std::ofstream out(path, std::ios::binary);
        if (!out) throw DataError("write_dataset: cannot open " + path.string());
        out.write(kFeatureMagic, 4);
        out.put(static_cast<char>(kFeatureVersion));
        for (const ClipRecord& clip : data.clips) {
            if (clip.split != s) continue;
            write_u32(out, static_cast<std::uint32_t>(clip.features.rows()));
            write_u32(out, static_cast<std::uint32_t>(clip.features.cols()));
            for (std::size_t i = 0; i < clip.features.size(); ++i) {
                const float v = static_cast<float>(clip.features.data()[i]);
                static_assert(sizeof(float) == 4);
                out.write(reinterpret_cast<const char*>(&v), 4);
            }
        }
        if (!out) throw DataError("write_dataset: write failed for " + path.string());
    }

    {
        std::ofstream out(dir / "metadata.jsonl");
        if (!out) throw DataError("write_dataset: cannot open metadata.jsonl");
        for (const ClipRecord& clip : data.clips) {
            nlohmann::json row;
            row["id"] = clip.id;
            row["split"] = split_name(clip.split);
            nlohmann::json labels = nlohmann::json::array();
            for (int c = 0; c < data.config.n_classes; ++c)
                if (clip.weak_labels[c]) labels.push_back(data.class_names[c]);
            row["weak_labels"] = labels;
            out << row.dump() << '\n';
        }
    }

    {
        std::ofstream out(dir / "strong_ref.tsv");
        if (!out) throw DataError("write_dataset: cannot open strong_ref.tsv");
        for (const ClipRecord& clip : data.clips)
            for (const EventSpan& span : clip.events)
                out << clip.id << '\t'
                    << format_seconds(span.onset_frame / data.config.frame_rate_hz) << '\t'
                    << format_seconds(span.offset_frame / data.config.frame_rate_hz) << '\t'
                    << data.class_names[span.class_index] << '\n';
    }

    {
        nlohmann::json manifest;
        manifest["train_clips"] = data.config.train_clips;
        manifest["val_clips"] = data.config.val_clips;
        manifest["test_clips"] = data.config.test_clips;
        manifest["frames_per_clip"] = data.config.frames_per_clip;
        manifest["feature_dim"] = data.config.feature_dim;
        manifest["n_classes"] = data.config.n_classes;
        manifest["events_per_clip"] = data.config.events_per_clip;
        manifest["event_min_frames"] = data.config.event_min_frames;
        manifest["event_max_frames"] = data.config.event_max_frames;
        manifest["noise_sigma"] = data.config.noise_sigma;
        manifest["class_separation"] = data.config.class_separation;
        manifest["frame_rate_hz"] = data.config.frame_rate_hz;
        manifest["seed"] = data.config.seed;
        manifest["class_names"] = data.class_names;
        std::ofstream out(dir / "dataset.json");
        if (!out) throw DataError("write_dataset: cannot open dataset.json");
        out << manifest.dump(2) << '\n';
    }
}

Dataset read_dataset(const std::filesystem::path& dir) {
    Dataset data;

    {
        std::ifstream in(dir / "dataset.json");
        if (!in) throw DataError("read_dataset: missing dataset.json in " + dir.string());
        nlohmann::json manifest;
        try {
            in >> manifest;
        } catch (const nlohmann::json::exception& e) {
            throw DataError(std::string("read_dataset: bad dataset.json: ") + e.what());
        }
        SynthConfig& c = data.config;
        c.train_clips = manifest.at("train_clips").get<int>();
        c.val_clips = manifest.at("val_clips").get<int>();
        c.test_clips = manifest.at("test_clips").get<int>();
        c.frames_per_clip = manifest.at("frames_per_clip").get<int>();
        c.feature_dim = manifest.at("feature_dim").get<int>();
        c.n_classes = manifest.at("n_classes").get<int>();
        c.events_per_clip = manifest.at("events_per_clip").get<double>();
        c.event_min_frames = manifest.at("event_min_frames").get<int>();
        c.event_max_frames = manifest.at("event_max_frames").get<int>();
        c.noise_sigma = manifest.at("noise_sigma").get<double>();
        c.class_separation = manifest.at("class_separation").get<double>();
        c.frame_rate_hz = manifest.at("frame_rate_hz").get<double>();
        c.seed = manifest.at("seed").get<std::uint64_t>();
        data.class_names = manifest.at("class_names").get<std::vector<std::string>>();
        if (static_cast<int>(data.class_names.size()) != c.n_classes)
            throw DataError("read_dataset: class name count does not match n_classes");
    }

    std::map<std::string, int> class_index;
    for (std::size_t c = 0; c < data.class_names.size(); ++c)
        class_index[data.class_names[c]] = static_cast<int>(c);

    // Metadata drives clip order; feature records pair up with metadata rows
    // of the same split, in file order.
    {
        std::ifstream in(dir / "metadata.jsonl");
        if (!in) throw DataError("read_dataset: missing metadata.jsonl in " + dir.string());
        std::string line;
        while (std::getline(in, line)) {
            if (line.empty()) continue;
            nlohmann::json row;
            try {
                row = nlohmann::json::parse(line);
            } catch (const nlohmann::json::exception& e) {
                throw DataError(std::string("read_dataset: bad metadata row: ") + e.what());
            }
            ClipRecord clip;
            clip.id = row.at("id").get<std::string>();
            clip.split = split_from_name(row.at("split").get<std::string>());
            clip.weak_labels.assign(data.config.n_classes, 0);
            for (const auto& name : row.at("weak_labels")) {
                auto it = class_index.find(name.get<std::string>());
                if (it == class_index.end())
                    throw DataError("read_dataset: unknown class in weak labels: " +
                                    name.get<std::string>());
                clip.weak_labels[it->second] = 1;
            }
            data.clips.push_back(std::move(clip));
        }
    }

    std::map<std::string, std::size_t> clip_by_id;
    for (std::size_t i = 0; i < data.clips.size(); ++i) {
        if (clip_by_id.count(data.clips[i].id))
            throw DataError("read_dataset: duplicate clip id " + data.clips[i].id);
        clip_by_id[data.clips[i].id] = i;
    }

    for (Split s : {Split::kTrain, Split::kVal, Split::kTest}) {
        const std::filesystem::path path =
            dir / ("features_" + std::string(split_name(s)) + ".bin");
        std::ifstream in(path, std::ios::binary);
        if (!in) throw DataError("read_dataset: missing " + path.string());
        char magic[4];
        in.read(magic, 4);
        if (in.gcount() != 4 || std::memcmp(magic, kFeatureMagic, 4) != 0)
            throw DataError("read_dataset: bad magic in " + path.string());
        const int version = in.get();
        if (version != kFeatureVersion)
            throw DataError("read_dataset: unsupported version in " + path.string());

        std::vector<std::size_t> expected;
        for (std::size_t i = 0; i < data.clips.size(); ++i)
            if (data.clips[i].split == s) expected.push_back(i);

        for (std::size_t slot = 0;; ++slot) {
            in.peek();
            if (in.eof()) {
                if (slot != expected.size())
                    throw DataError("read_dataset: " + path.string() + " has " +
                                    std::to_string(slot) + " clips, metadata lists " +
                                    std::to_string(expected.size()));
                break;
            }
            if (slot >= expected.size())
                throw DataError("read_dataset: " + path.string() + " has more clips than metadata");
            const std::uint32_t n = read_u32(in, path.string());
            const std::uint32_t d = read_u32(in, path.string());
            if (n == 0 || d == 0) throw DataError("read_dataset: empty clip in " + path.string());
            Matrix features(n, d);
            for (std::size_t i = 0; i < features.size(); ++i) {
                float v = 0.0f;
                in.read(reinterpret_cast<char*>(&v), 4);
                if (in.gcount() != 4)
                    throw DataError("read_dataset: truncated features in " + path.string());
                features.data()[i] = static_cast<double>(v);
            }
            data.clips[expected[slot]].features = std::move(features);
        }
    }

    {
        std::ifstream in(dir / "strong_ref.tsv");
        if (!in) throw DataError("read_dataset: missing strong_ref.tsv in " + dir.string());
        std::string line;
        std::size_t line_no = 0;
        while (std::getline(in, line)) {
            ++line_no;
            if (line.empty()) continue;
            std::istringstream fields(line);
            std::string id, onset, offset, name;
            if (!std::getline(fields, id, '\t') || !std::getline(fields, onset, '\t') ||
                !std::getline(fields, offset, '\t') || !std::getline(fields, name))
                throw DataError("read_dataset: bad strong_ref row " + std::to_string(line_no));
            auto clip_it = clip_by_id.find(id);
            if (clip_it == clip_by_id.end())
                throw DataError("read_dataset: strong_ref references unknown clip " + id);
            auto class_it = class_index.find(name);
            if (class_it == class_index.end())
                throw DataError("read_dataset: strong_ref references unknown class " + name);
            EventSpan span;
            span.class_index = class_it->second;
            span.onset_frame =
                static_cast<int>(std::llround(std::stod(onset) * data.config.frame_rate_hz));
            span.offset_frame =
                static_cast<int>(std::llround(std::stod(offset) * data.config.frame_rate_hz));
            if (span.onset_frame < 0 || span.offset_frame <= span.onset_frame)
                throw DataError("read_dataset: bad event interval at strong_ref row " +
                                std::to_string(line_no));
            data.clips[clip_it->second].events.push_back(span);
        }
    }
    return data;
}

}  // namespace milpool
