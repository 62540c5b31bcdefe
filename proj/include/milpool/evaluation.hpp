// SPDX-License-Identifier: Apache-2.0
// Copyright (C) 2026 milpool authors
//
// Frame predictions -> detected events -> segment-based micro-averaged
// metrics. Scoring marks fixed one-second segments active per class when any
// event overlaps them, then counts substitutions, deletions and insertions
// per segment.

#ifndef MILPOOL_EVALUATION_HPP
#define MILPOOL_EVALUATION_HPP

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "milpool/types.hpp"

namespace milpool {

struct PostProcessConfig {
    double threshold = 0.5;       // binarization point for frame probabilities
    int median_filter_frames = 5; // odd window, shrunk symmetrically at edges
    int min_event_frames = 3;     // shorter detections are dropped as noise

    void validate() const;
};

struct Event {
    std::string clip_id;
    int class_index = 0;
    double onset_seconds = 0.0;
    double offset_seconds = 0.0;
};
using EventList = std::vector<Event>;

/// Majority filter over a binary sequence; the reference for this is a
/// sort-based median in the tests.
std::vector<char> median_filter_binary(const std::vector<char>& bits, int window);

/// Threshold, median-filter, and minimum-duration-suppress one clip's frame
/// scores into detected events.
EventList post_process(const std::string& clip_id, const FrameScores& scores,
                       const PostProcessConfig& cfg);

struct SegmentCounts {
    long n_ref = 0;
    long n_sys = 0;
    long tp = 0;
    long fp = 0;
    long fn = 0;
    long substitutions = 0;
    long deletions = 0;
    long insertions = 0;

    SegmentCounts& operator+=(const SegmentCounts& other);
};

struct Metrics {
    SegmentCounts counts;
    double substitution_rate = 0.0;
    double deletion_rate = 0.0;
    double insertion_rate = 0.0;
    double error_rate = 0.0;
    double precision = 0.0;  // fractions in [0,1]
    double recall = 0.0;
    double f1 = 0.0;
};

Metrics metrics_from_counts(const SegmentCounts& counts);

/// Segment-based micro-averaged scoring over all clips in `clip_durations`.
/// Events referencing unknown clips raise DataError, as does an empty
/// reference (no active segments at all).
Metrics score(const EventList& system, const EventList& reference,
              const std::map<std::string, double>& clip_durations, int n_classes,
              double segment_seconds = 1.0);

/// Tab-separated event files: clip_id, onset_seconds, offset_seconds,
/// class_name — the same format the dataset's strong reference uses.
void write_event_tsv(const EventList& events, const std::vector<std::string>& class_names,
                     const std::filesystem::path& path);
EventList read_event_tsv(const std::filesystem::path& path,
                         const std::vector<std::string>& class_names);

/// One line of the comparison report.
struct ReportRow {
    std::string structure;  // "single" or "hierarchical"
    std::string pooling;
    Metrics metrics;
    std::vector<double> per_seed_er;  // empty when a single run is reported
};

/// Aligned text table, one row per (structure, pooling). When both
/// structures of a pooling function are present, the hierarchical row is
/// annotated with the relative ER/F1 change against the single row.
std::string render_text_report(const std::vector<ReportRow>& rows);

/// Machine-readable TSV with the same rows.
std::string render_tsv_report(const std::vector<ReportRow>& rows);

}  // namespace milpool

#endif  // MILPOOL_EVALUATION_HPP
