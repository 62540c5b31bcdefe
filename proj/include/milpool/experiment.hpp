// SPDX-License-Identifier: Apache-2.0
// Copyright (C) 2026 milpool authors
//
// Experiment grid: (pooling function x structure x seed) cells trained on
// one dataset, evaluated on its test split, and reported side by side with
// relative-change annotations between the two structures.

#ifndef MILPOOL_EXPERIMENT_HPP
#define MILPOOL_EXPERIMENT_HPP

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "milpool/evaluation.hpp"
#include "milpool/model.hpp"
#include "milpool/synth.hpp"

namespace milpool {

struct ExperimentConfig {
    std::vector<PoolingFunction> functions = {PoolingFunction::kLinearSoftmax};
    bool run_single = true;
    bool run_hierarchical = true;
    std::vector<std::uint64_t> seeds = {1, 2, 3, 4, 5};
    TrainConfig train;  // template; pooling/seed are overridden per cell
    PostProcessConfig post;
    SegmentWeightRule rule = SegmentWeightRule::kSelfWeighted;
    bool resume = false;  // reuse existing checkpoints with a matching config
    std::filesystem::path out_dir;
};

/// Hierarchical structure for a clip length, or the flat plan.
StagePlan structure_plan(bool hierarchical, int frames_per_clip);

/// "linear_hierarchical_seed3" style cell identifier used in file names.
std::string cell_id(PoolingFunction fn, bool hierarchical, std::uint64_t seed);

/// Concrete training configuration for one grid cell.
TrainConfig cell_config(const ExperimentConfig& config, const Dataset& data, PoolingFunction fn,
                        bool hierarchical, std::uint64_t seed);

/// Trains one cell (or loads it when resuming) and writes the checkpoint and
/// the per-epoch loss CSV under out_dir.
TrainResult train_cell(const Dataset& data, const ExperimentConfig& config, PoolingFunction fn,
                       bool hierarchical, std::uint64_t seed);

/// Trains every cell of the grid.
void train_grid(const Dataset& data, const ExperimentConfig& config);

/// Reference events of one split, in seconds.
EventList reference_events(const Dataset& data, Split split);

/// Clip id -> duration in seconds for one split.
std::map<std::string, double> clip_durations(const Dataset& data, Split split);

/// Predict, post-process and score trained parameters on the test split.
/// Optionally writes the detected events as TSV.
Metrics evaluate_params(const Dataset& data, const ScorerParams& params,
                        const PostProcessConfig& post,
                        const std::filesystem::path* events_out = nullptr);

struct SeedMetrics {
    std::string structure;
    std::string pooling;
    std::uint64_t seed = 0;
    Metrics metrics;
};

struct EvaluationResult {
    std::vector<ReportRow> summary;     // one row per (structure, pooling), seed-averaged
    std::vector<SeedMetrics> per_seed;  // one row per cell
};

/// Loads every cell's checkpoint and scores it. With `oracle` set, the
/// reference events are scored against themselves instead (a wiring check
/// that must produce a zero error rate).
EvaluationResult evaluate_grid(const Dataset& data, const ExperimentConfig& config,
                               bool oracle = false);

/// Aggregates per-seed metrics into report rows (mean rates, per-seed ER).
std::vector<ReportRow> summarize(const std::vector<SeedMetrics>& per_seed);

/// report.txt, report.tsv and metrics.tsv under out_dir.
void write_reports(const EvaluationResult& result, const std::filesystem::path& out_dir);

/// Reads a metrics.tsv written by write_reports.
std::vector<SeedMetrics> read_metrics_tsv(const std::filesystem::path& path);

}  // namespace milpool

#endif  // MILPOOL_EXPERIMENT_HPP
