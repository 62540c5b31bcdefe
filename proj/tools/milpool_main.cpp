// SPDX-License-Identifier: Apache-2.0
// Copyright (C) 2026 milpool authors
//
// Command-line front end: dataset synthesis, gradient verification, grid
// training and segment-based evaluation, all reproducible from a seed.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "milpool/experiment.hpp"
#include "milpool/gradients.hpp"
#include "milpool/pooling.hpp"

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitData = 3;
constexpr int kExitNumeric = 4;

struct GridOptions {
    std::string data_dir;
    std::string out_dir = "runs";
    std::vector<std::string> functions = {"linear"};
    std::vector<std::string> structures = {"single", "hierarchical"};
    std::vector<std::uint64_t> seeds = {1, 2, 3, 4, 5};
    double learning_rate = 0.001;
    int batch_size = 32;
    int patience = 10;
    int max_epochs = 60;
    int hidden_dim = 32;
    bool legacy_segment_weights = false;
    bool parallel_batch = false;
    bool resume = false;
    double threshold = 0.5;
    int median_filter = 5;
    int min_event_frames = 3;
};

void add_grid_options(CLI::App* cmd, GridOptions& opt, bool training_flags) {
    cmd->add_option("--data", opt.data_dir, "dataset directory (from `synth`)")->required();
    cmd->add_option("--out", opt.out_dir, "output directory for checkpoints/logs/reports");
    cmd->add_option("--functions", opt.functions,
                    "pooling functions: max,average,linear,exponential,attention")
        ->delimiter(',');
    cmd->add_option("--structures", opt.structures, "structures: single,hierarchical")
        ->delimiter(',');
    cmd->add_option("--seeds", opt.seeds, "training seeds")->delimiter(',');
    cmd->add_flag("--legacy-segment-weights", opt.legacy_segment_weights,
                  "use the superseded averaged segment-weight rule");
    if (training_flags) {
        cmd->add_option("--lr", opt.learning_rate, "Adam learning rate");
        cmd->add_option("--batch", opt.batch_size, "mini-batch size");
        cmd->add_option("--patience", opt.patience, "early-stopping patience (epochs)");
        cmd->add_option("--max-epochs", opt.max_epochs, "epoch cap");
        cmd->add_option("--hidden", opt.hidden_dim, "hidden layer width");
        cmd->add_flag("--parallel-batch", opt.parallel_batch,
                      "parallelize per-clip gradients (fixed-order reduction)");
        cmd->add_flag("--resume", opt.resume, "reuse existing checkpoints with matching config");
    } else {
        cmd->add_option("--lr", opt.learning_rate, "learning rate used at training time");
        cmd->add_option("--batch", opt.batch_size, "batch size used at training time");
        cmd->add_option("--patience", opt.patience, "patience used at training time");
        cmd->add_option("--max-epochs", opt.max_epochs, "epoch cap used at training time");
        cmd->add_option("--hidden", opt.hidden_dim, "hidden width used at training time");
        cmd->add_option("--threshold", opt.threshold, "frame binarization threshold");
        cmd->add_option("--filter", opt.median_filter, "median filter length (odd)");
        cmd->add_option("--min-frames", opt.min_event_frames, "minimum event duration in frames");
    }
}

milpool::ExperimentConfig make_experiment_config(const GridOptions& opt) {
    milpool::ExperimentConfig config;
    config.functions.clear();
    for (const std::string& name : opt.functions)
        config.functions.push_back(milpool::pooling_function_from_name(name));
    if (config.functions.empty()) throw milpool::ConfigError("empty pooling function grid");
    config.run_single = false;
    config.run_hierarchical = false;
    for (const std::string& s : opt.structures) {
        if (s == "single") config.run_single = true;
        else if (s == "hierarchical") config.run_hierarchical = true;
        else throw milpool::ConfigError("unknown structure '" + s + "'");
    }
    config.seeds = opt.seeds;
    config.train.learning_rate = opt.learning_rate;
    config.train.batch_size = opt.batch_size;
    config.train.early_stop_patience = opt.patience;
    config.train.max_epochs = opt.max_epochs;
    config.train.hidden_dim = opt.hidden_dim;
    config.train.parallel_batch = opt.parallel_batch;
    config.rule = opt.legacy_segment_weights ? milpool::SegmentWeightRule::kAveraged
                                             : milpool::SegmentWeightRule::kSelfWeighted;
    config.resume = opt.resume;
    config.post.threshold = opt.threshold;
    config.post.median_filter_frames = opt.median_filter;
    config.post.min_event_frames = opt.min_event_frames;
    config.out_dir = opt.out_dir;
    return config;
}

int run_synth(const milpool::SynthConfig& config, const std::string& out_dir) {
    const milpool::Dataset data = milpool::generate(config);
    milpool::write_dataset(data, out_dir);
    std::size_t n_events = 0;
    for (const auto& clip : data.clips) n_events += clip.events.size();
    std::printf("wrote %zu clips (%zu events, %d classes) to %s\n", data.clips.size(), n_events,
                config.n_classes, out_dir.c_str());
    return 0;
}

struct GradcheckOptions {
    int trials = 1000;
    double tolerance = 1e-5;
    double step = 1e-5;
    int frames = 125;
    int classes = 2;
    std::uint64_t seed = 1;
    std::vector<std::string> functions = {"average", "linear", "exponential", "attention", "max"};
    std::vector<std::string> plans = {"flat", "5", "5x5x5"};
    bool legacy_segment_weights = false;
};

int run_gradcheck(const GradcheckOptions& opt) {
    using milpool::PoolingFunction;
    if (opt.trials < 1) throw milpool::ConfigError("gradcheck: trials must be >= 1");
    if (opt.step <= 0.0) throw milpool::ConfigError("gradcheck: step must be > 0");
    const milpool::SegmentWeightRule rule = opt.legacy_segment_weights
                                                ? milpool::SegmentWeightRule::kAveraged
                                                : milpool::SegmentWeightRule::kSelfWeighted;

    bool all_pass = true;
    for (const std::string& fn_name : opt.functions) {
        const PoolingFunction fn = milpool::pooling_function_from_name(fn_name);
        for (const std::string& plan_text : opt.plans) {
            const milpool::StagePlan plan = milpool::StagePlan::parse(plan_text);
            if (!plan.valid_for(static_cast<std::size_t>(opt.frames)))
                throw milpool::ConfigError("gradcheck: plan " + plan.to_string() +
                                           " invalid for " + std::to_string(opt.frames) +
                                           " frames");

            double max_err = 0.0;
#pragma omp parallel for schedule(static) reduction(max : max_err)
            for (int trial = 0; trial < opt.trials; ++trial) {
                std::mt19937_64 rng(opt.seed ^
                                    (0x9e3779b97f4a7c15ull * static_cast<std::uint64_t>(trial + 1)));
                std::uniform_real_distribution<double> score_dist(0.05, 0.95);
                std::uniform_real_distribution<double> weight_dist(0.1, 2.0);
                milpool::FrameScores scores;
                scores.values = milpool::Matrix(opt.frames, opt.classes);
                milpool::FrameWeights weights;
                weights.values = milpool::Matrix(opt.frames, opt.classes);
                for (std::size_t i = 0; i < scores.values.size(); ++i) {
                    scores.values.data()[i] = score_dist(rng);
                    weights.values.data()[i] = weight_dist(rng);
                }
                const milpool::FrameWeights& used =
                    fn == PoolingFunction::kAttention ? weights
                                                      : milpool::compute_weights(scores, fn);
                max_err = std::max(max_err, milpool::finite_difference_check(
                                                scores, used, fn, plan, opt.step, rule));
            }

            if (fn == PoolingFunction::kMax) {
                // Subgradient only: argmax-crossing perturbations are excluded
                // inside the check, so this row reports but does not gate.
                std::printf("%-12s %-8s max_rel_err %.3e  subgradient-verified\n", fn_name.c_str(),
                            plan.to_string().c_str(), max_err);
            } else {
                const bool pass = max_err <= opt.tolerance;
                all_pass = all_pass && pass;
                std::printf("%-12s %-8s max_rel_err %.3e  %s (tolerance %.1e)\n", fn_name.c_str(),
                            plan.to_string().c_str(), max_err, pass ? "PASS" : "FAIL",
                            opt.tolerance);
            }
        }
    }
    if (!all_pass) throw milpool::NumericError("gradient check failed tolerance");
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"multi-instance pooling: synthesis, training, gradcheck, evaluation"};
    app.require_subcommand(1);
    app.set_config("--config", "", "INI/TOML config file; command-line flags win");

    // synth
    milpool::SynthConfig synth_config;
    std::string synth_out = "data";
    CLI::App* synth = app.add_subcommand("synth", "generate a weakly labeled synthetic dataset");
    synth->add_option("--out", synth_out, "output directory")->required();
    synth->add_option("--seed", synth_config.seed, "generation seed");
    synth->add_option("--clips", synth_config.train_clips, "training clips");
    synth->add_option("--val-clips", synth_config.val_clips, "validation clips");
    synth->add_option("--test-clips", synth_config.test_clips, "test clips");
    synth->add_option("--frames", synth_config.frames_per_clip, "frames per clip");
    synth->add_option("--classes", synth_config.n_classes, "number of event classes");
    synth->add_option("--dim", synth_config.feature_dim, "feature dimension");
    synth->add_option("--event-rate", synth_config.events_per_clip, "mean events per clip");
    synth->add_option("--event-min", synth_config.event_min_frames, "min event frames");
    synth->add_option("--event-max", synth_config.event_max_frames, "max event frames");
    synth->add_option("--noise", synth_config.noise_sigma, "feature noise sigma");
    synth->add_option("--separation", synth_config.class_separation, "class mean norm");
    synth->add_option("--rate", synth_config.frame_rate_hz, "frame rate in Hz");

    // gradcheck
    GradcheckOptions gc;
    CLI::App* gradcheck =
        app.add_subcommand("gradcheck", "verify analytic gradients against central differences");
    gradcheck->add_option("--trials", gc.trials, "random trials per grid cell");
    gradcheck->add_option("--tolerance", gc.tolerance, "max relative error allowed");
    gradcheck->add_option("--step", gc.step, "central-difference step");
    gradcheck->add_option("--frames", gc.frames, "frames per trial");
    gradcheck->add_option("--classes", gc.classes, "classes per trial");
    gradcheck->add_option("--seed", gc.seed, "trial seed");
    gradcheck->add_option("--functions", gc.functions, "pooling functions to check")
        ->delimiter(',');
    gradcheck->add_option("--plans", gc.plans, "structures, e.g. flat,5,5x5x5")->delimiter(',');
    gradcheck->add_flag("--legacy-segment-weights", gc.legacy_segment_weights,
                        "check the averaged segment-weight rule instead");

    // train
    GridOptions train_opt;
    CLI::App* train_cmd = app.add_subcommand("train", "train the pooling grid on a dataset");
    add_grid_options(train_cmd, train_opt, /*training_flags=*/true);

    // evaluate
    GridOptions eval_opt;
    bool oracle = false;
    CLI::App* eval_cmd =
        app.add_subcommand("evaluate", "score trained checkpoints on the test split");
    add_grid_options(eval_cmd, eval_opt, /*training_flags=*/false);
    eval_cmd->add_flag("--oracle", oracle,
                       "score the reference against itself (wiring check, ER 0)");

    // report
    std::string metrics_path, report_out;
    CLI::App* report_cmd = app.add_subcommand("report", "re-render a report from metrics.tsv");
    report_cmd->add_option("--metrics", metrics_path, "metrics.tsv from `evaluate`")->required();
    report_cmd->add_option("--out", report_out, "write the text report here instead of stdout");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kExitConfig;
    }

    try {
        if (*synth) return run_synth(synth_config, synth_out);
        if (*gradcheck) return run_gradcheck(gc);
        if (*train_cmd) {
            const milpool::ExperimentConfig config = make_experiment_config(train_opt);
            const milpool::Dataset data = milpool::read_dataset(train_opt.data_dir);
            milpool::train_grid(data, config);
            std::printf("trained %zu cells into %s\n",
                        config.functions.size() * config.seeds.size() *
                            (static_cast<std::size_t>(config.run_single) +
                             static_cast<std::size_t>(config.run_hierarchical)),
                        config.out_dir.string().c_str());
            return 0;
        }
        if (*eval_cmd) {
            const milpool::ExperimentConfig config = make_experiment_config(eval_opt);
            const milpool::Dataset data = milpool::read_dataset(eval_opt.data_dir);
            const milpool::EvaluationResult result = milpool::evaluate_grid(data, config, oracle);
            milpool::write_reports(result, config.out_dir);
            std::cout << milpool::render_text_report(result.summary);
            return 0;
        }
        if (*report_cmd) {
            const std::vector<milpool::SeedMetrics> per_seed =
                milpool::read_metrics_tsv(metrics_path);
            const std::string text = milpool::render_text_report(milpool::summarize(per_seed));
            if (report_out.empty()) {
                std::cout << text;
            } else {
                std::ofstream out(report_out);
                if (!out) throw milpool::DataError("report: cannot open " + report_out);
                out << text;
            }
            return 0;
        }
    } catch (const milpool::ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return kExitConfig;
    } catch (const std::invalid_argument& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return kExitConfig;
    } catch (const milpool::DataError& e) {
        std::fprintf(stderr, "data error: %s\n", e.what());
        return kExitData;
    } catch (const milpool::NumericError& e) {
        std::fprintf(stderr, "numeric error: %s\n", e.what());
        return kExitNumeric;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
