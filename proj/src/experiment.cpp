// SPDX-License-Identifier: Apache-2.0
// Copyright (C) 2026 milpool authors

#include "milpool/experiment.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "milpool/pooling.hpp"

namespace milpool {

StagePlan structure_plan(bool hierarchical, int frames_per_clip) {
    if (!hierarchical) return StagePlan{};
    StagePlan plan = default_plan(static_cast<std::size_t>(frames_per_clip));
    if (plan.flat())
        throw ConfigError("no hierarchical plan exists for " + std::to_string(frames_per_clip) +
                          " frames per clip (prime factor > 5)");
    return plan;
}

std::string cell_id(PoolingFunction fn, bool hierarchical, std::uint64_t seed) {
    std::ostringstream out;
    out << pooling_function_name(fn) << '_' << (hierarchical ? "hierarchical" : "single")
        << "_seed" << seed;
    return out.str();
}

TrainConfig cell_config(const ExperimentConfig& config, const Dataset& data, PoolingFunction fn,
                        bool hierarchical, std::uint64_t seed) {
    TrainConfig tc = config.train;
    tc.seed = seed;
    tc.pooling.function = fn;
    tc.pooling.plan = structure_plan(hierarchical, data.config.frames_per_clip);
    tc.pooling.rule = config.rule;
    return tc;
}

TrainResult train_cell(const Dataset& data, const ExperimentConfig& config, PoolingFunction fn,
                       bool hierarchical, std::uint64_t seed) {
    const TrainConfig tc = cell_config(config, data, fn, hierarchical, seed);
    const std::string cell = cell_id(fn, hierarchical, seed);
    const std::filesystem::path ckpt_dir = config.out_dir / "checkpoints";
    const std::filesystem::path log_dir = config.out_dir / "logs";
    std::filesystem::create_directories(ckpt_dir);
    std::filesystem::create_directories(log_dir);
    const std::filesystem::path ckpt_path = ckpt_dir / (cell + ".ckpt");

    if (config.resume && std::filesystem::exists(ckpt_path)) {
        TrainResult result;
        result.params = load_checkpoint(ckpt_path, &tc);
        return result;
    }

    TrainResult result = train(data, tc);
    save_checkpoint(result.params, tc, ckpt_path);

    std::ofstream log(log_dir / (cell + "_loss.csv"));
    if (!log) throw DataError("train_cell: cannot open loss log for " + cell);
    log << "epoch,train_loss,val_loss\n";
    char buf[96];
    for (std::size_t e = 0; e < result.history.train_loss.size(); ++e) {
        std::snprintf(buf, sizeof(buf), "%zu,%.12g,%.12g\n", e, result.history.train_loss[e],
                      result.history.val_loss[e]);
        log << buf;
    }
    return result;
}

void train_grid(const Dataset& data, const ExperimentConfig& config) {
    if (config.functions.empty()) throw ConfigError("experiment: empty pooling function grid");
    if (!config.run_single && !config.run_hierarchical)
        throw ConfigError("experiment: no structures selected");
    if (config.seeds.empty()) throw ConfigError("experiment: empty seed list");
    for (PoolingFunction fn : config.functions)
        for (bool hierarchical : {false, true}) {
            if (hierarchical ? !config.run_hierarchical : !config.run_single) continue;
            for (std::uint64_t seed : config.seeds) train_cell(data, config, fn, hierarchical, seed);
        }
}

EventList reference_events(const Dataset& data, Split split) {
    EventList events;
    for (std::size_t i : data.split_indices(split)) {
        const ClipRecord& clip = data.clips[i];
        for (const EventSpan& span : clip.events)
            events.push_back(Event{clip.id, span.class_index,
                                   span.onset_frame / data.config.frame_rate_hz,
                                   span.offset_frame / data.config.frame_rate_hz});
    }
    return events;
}

std::map<std::string, double> clip_durations(const Dataset& data, Split split) {
    std::map<std::string, double> durations;
    for (std::size_t i : data.split_indices(split))
        durations[data.clips[i].id] =
            data.config.frames_per_clip / data.config.frame_rate_hz;
    return durations;
}

Metrics evaluate_params(const Dataset& data, const ScorerParams& params,
                        const PostProcessConfig& post, const std::filesystem::path* events_out) {
    EventList system;
    for (std::size_t i : data.split_indices(Split::kTest)) {
        const ClipRecord& clip = data.clips[i];
        const FrameScores scores =
            predict_frames(clip.features, params, data.config.frame_rate_hz);
        const EventList detected = post_process(clip.id, scores, post);
        system.insert(system.end(), detected.begin(), detected.end());
    }
    if (events_out != nullptr) write_event_tsv(system, data.class_names, *events_out);
    return score(system, reference_events(data, Split::kTest), clip_durations(data, Split::kTest),
                 data.config.n_classes);
}

EvaluationResult evaluate_grid(const Dataset& data, const ExperimentConfig& config, bool oracle) {
    EvaluationResult result;
    if (oracle) {
        const EventList reference = reference_events(data, Split::kTest);
        const Metrics m =
            score(reference, reference, clip_durations(data, Split::kTest), data.config.n_classes);
        result.per_seed.push_back(SeedMetrics{"oracle", "reference", 0, m});
        result.summary = summarize(result.per_seed);
        return result;
    }

    const std::filesystem::path events_dir = config.out_dir / "events";
    std::filesystem::create_directories(events_dir);
    for (PoolingFunction fn : config.functions)
        for (bool hierarchical : {false, true}) {
            if (hierarchical ? !config.run_hierarchical : !config.run_single) continue;
            for (std::uint64_t seed : config.seeds) {
                const TrainConfig tc = cell_config(config, data, fn, hierarchical, seed);
                const std::string cell = cell_id(fn, hierarchical, seed);
                const std::filesystem::path ckpt =
                    config.out_dir / "checkpoints" / (cell + ".ckpt");
                if (!std::filesystem::exists(ckpt))
                    throw DataError("evaluate: missing checkpoint " + ckpt.string());
                const ScorerParams params = load_checkpoint(ckpt, &tc);
                const std::filesystem::path events_path = events_dir / (cell + ".tsv");
                const Metrics m = evaluate_params(data, params, config.post, &events_path);
                result.per_seed.push_back(SeedMetrics{
                    hierarchical ? "hierarchical" : "single", pooling_function_name(fn), seed, m});
            }
        }
    result.summary = summarize(result.per_seed);
    return result;
}

std::vector<ReportRow> summarize(const std::vector<SeedMetrics>& per_seed) {
    std::vector<ReportRow> rows;
    for (const SeedMetrics& sm : per_seed) {
        ReportRow* row = nullptr;
        for (ReportRow& r : rows)
            if (r.structure == sm.structure && r.pooling == sm.pooling) row = &r;
        if (row == nullptr) {
            rows.push_back(ReportRow{sm.structure, sm.pooling, Metrics{}, {}});
            row = &rows.back();
        }
        Metrics& m = row->metrics;
        m.counts += sm.metrics.counts;
        m.substitution_rate += sm.metrics.substitution_rate;
        m.deletion_rate += sm.metrics.deletion_rate;
        m.insertion_rate += sm.metrics.insertion_rate;
        m.error_rate += sm.metrics.error_rate;
        m.precision += sm.metrics.precision;
        m.recall += sm.metrics.recall;
        m.f1 += sm.metrics.f1;
        row->per_seed_er.push_back(sm.metrics.error_rate);
    }
    for (ReportRow& r : rows) {
        const double n = static_cast<double>(r.per_seed_er.size());
        r.metrics.substitution_rate /= n;
        r.metrics.deletion_rate /= n;
        r.metrics.insertion_rate /= n;
        r.metrics.error_rate /= n;
        r.metrics.precision /= n;
        r.metrics.recall /= n;
        r.metrics.f1 /= n;
        if (r.per_seed_er.size() == 1) r.per_seed_er.clear();
    }
    return rows;
}

void write_reports(const EvaluationResult& result, const std::filesystem::path& out_dir) {
    std::filesystem::create_directories(out_dir);
    {
        std::ofstream out(out_dir / "report.txt");
        if (!out) throw DataError("write_reports: cannot open report.txt");
        out << render_text_report(result.summary);
    }
    {
        std::ofstream out(out_dir / "report.tsv");
        if (!out) throw DataError("write_reports: cannot open report.tsv");
        out << render_tsv_report(result.summary);
    }
    {
        std::ofstream out(out_dir / "metrics.tsv");
        if (!out) throw DataError("write_reports: cannot open metrics.tsv");
        out << "structure\tpooling\tseed\tsub\tdel\tins\ter\tprecision\trecall\tf1\n";
        char buf[256];
        for (const SeedMetrics& sm : result.per_seed) {
            const Metrics& m = sm.metrics;
            std::snprintf(buf, sizeof(buf),
                          "%s\t%s\t%llu\t%.6f\t%.6f\t%.6f\t%.6f\t%.6f\t%.6f\t%.6f\n",
                          sm.structure.c_str(), sm.pooling.c_str(),
                          static_cast<unsigned long long>(sm.seed), m.substitution_rate,
                          m.deletion_rate, m.insertion_rate, m.error_rate, m.precision, m.recall,
                          m.f1);
            out << buf;
        }
    }
}

std::vector<SeedMetrics> read_metrics_tsv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("read_metrics_tsv: cannot open " + path.string());
    std::vector<SeedMetrics> rows;
    std::string line;
    bool header = true;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (header) {
            header = false;
            continue;
        }
        if (line.empty()) continue;
        std::istringstream fields(line);
        SeedMetrics sm;
        std::string seed, sub, del, ins, er, pre, rec, f1;
        if (!std::getline(fields, sm.structure, '\t') || !std::getline(fields, sm.pooling, '\t') ||
            !std::getline(fields, seed, '\t') || !std::getline(fields, sub, '\t') ||
            !std::getline(fields, del, '\t') || !std::getline(fields, ins, '\t') ||
            !std::getline(fields, er, '\t') || !std::getline(fields, pre, '\t') ||
            !std::getline(fields, rec, '\t') || !std::getline(fields, f1, '\t'))
            throw DataError("read_metrics_tsv: bad row " + std::to_string(line_no));
        try {
            sm.seed = std::stoull(seed);
            sm.metrics.substitution_rate = std::stod(sub);
            sm.metrics.deletion_rate = std::stod(del);
            sm.metrics.insertion_rate = std::stod(ins);
            sm.metrics.error_rate = std::stod(er);
            sm.metrics.precision = std::stod(pre);
            sm.metrics.recall = std::stod(rec);
            sm.metrics.f1 = std::stod(f1);
        } catch (const std::logic_error&) {
            throw DataError("read_metrics_tsv: bad numbers at row " + std::to_string(line_no));
        }
        rows.push_back(std::move(sm));
    }
    return rows;
}

}  // namespace milpool
