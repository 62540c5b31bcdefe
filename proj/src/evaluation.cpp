// SPDX-License-Identifier: Apache-2.0
// Copyright (C) 2026 milpool authors

#include "milpool/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace milpool {

namespace {

std::string format_seconds(double s) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.6f", s);
    return buf;
}

std::string format_fixed(double v, int decimals) {
    char buf[48];
    std::snprintf(buf, sizeof(buf), "%.*f", decimals, v);
    return buf;
}

/// "(3.8%↓)" style annotation for a relative change from `from` to `to`.
std::string change_annotation(double from, double to) {
    if (!(from > 0.0)) return "";
    const double change = (to - from) / from * 100.0;
    char buf[48];
    std::snprintf(buf, sizeof(buf), "(%.1f%%%s)", std::abs(change), change <= 0.0 ? "↓" : "↑");
    return buf;
}

}  // namespace

void PostProcessConfig::validate() const {
    if (!(threshold > 0.0 && threshold < 1.0))
        throw ConfigError("post_process: threshold must lie in (0,1)");
    if (median_filter_frames < 1 || median_filter_frames % 2 == 0)
        throw ConfigError("post_process: median filter length must be odd and positive");
    if (min_event_frames < 1) throw ConfigError("post_process: min_event_frames must be >= 1");
}

std::vector<char> median_filter_binary(const std::vector<char>& bits, int window) {
    if (window < 1 || window % 2 == 0)
        throw std::invalid_argument("median_filter_binary: window must be odd and positive");
    const int n = static_cast<int>(bits.size());
    const int max_radius = (window - 1) / 2;
    std::vector<char> out(bits.size());
    for (int i = 0; i < n; ++i) {
        // Shrink symmetrically at the edges so the window stays odd and the
        // median stays well defined.
        const int radius = std::min({max_radius, i, n - 1 - i});
        int ones = 0;
        for (int k = i - radius; k <= i + radius; ++k) ones += bits[k] != 0;
        out[i] = ones > radius ? 1 : 0;
    }
    return out;
}

EventList post_process(const std::string& clip_id, const FrameScores& scores,
                       const PostProcessConfig& cfg) {
    cfg.validate();
    if (scores.n_frames() == 0) throw std::invalid_argument("post_process: empty scores");
    if (scores.frame_rate_hz <= 0.0)
        throw std::invalid_argument("post_process: frame rate must be positive");

    EventList events;
    const int n = static_cast<int>(scores.n_frames());
    for (std::size_t c = 0; c < scores.n_classes(); ++c) {
        std::vector<char> active(scores.n_frames());
        for (int i = 0; i < n; ++i) active[i] = scores.values(i, c) > cfg.threshold ? 1 : 0;
        active = median_filter_binary(active, cfg.median_filter_frames);

        int run_start = -1;
        for (int i = 0; i <= n; ++i) {
            const bool on = i < n && active[i];
            if (on && run_start < 0) run_start = i;
            if (!on && run_start >= 0) {
                if (i - run_start >= cfg.min_event_frames)
                    events.push_back(Event{clip_id, static_cast<int>(c),
                                           run_start / scores.frame_rate_hz,
                                           i / scores.frame_rate_hz});
                run_start = -1;
            }
        }
    }
    return events;
}

SegmentCounts& SegmentCounts::operator+=(const SegmentCounts& other) {
    n_ref += other.n_ref;
    n_sys += other.n_sys;
    tp += other.tp;
    fp += other.fp;
    fn += other.fn;
    substitutions += other.substitutions;
    deletions += other.deletions;
    insertions += other.insertions;
    return *this;
}

Metrics metrics_from_counts(const SegmentCounts& counts) {
    if (counts.n_ref <= 0)
        throw DataError("score: empty reference (no active segments); error rate is undefined");
    Metrics m;
    m.counts = counts;
    const double n_ref = static_cast<double>(counts.n_ref);
    m.substitution_rate = counts.substitutions / n_ref;
    m.deletion_rate = counts.deletions / n_ref;
    m.insertion_rate = counts.insertions / n_ref;
    m.error_rate = (counts.substitutions + counts.deletions + counts.insertions) / n_ref;
    m.precision = counts.tp + counts.fp > 0
                      ? static_cast<double>(counts.tp) / (counts.tp + counts.fp)
                      : 0.0;
    m.recall = counts.tp + counts.fn > 0 ? static_cast<double>(counts.tp) / (counts.tp + counts.fn)
                                         : 0.0;
    m.f1 = m.precision + m.recall > 0.0 ? 2.0 * m.precision * m.recall / (m.precision + m.recall)
                                        : 0.0;
    return m;
}

Metrics score(const EventList& system, const EventList& reference,
              const std::map<std::string, double>& clip_durations, int n_classes,
              double segment_seconds) {
    if (n_classes < 1) throw std::invalid_argument("score: n_classes must be >= 1");
    if (!(segment_seconds > 0.0))
        throw std::invalid_argument("score: segment length must be positive");

    struct ClipEvents {
        std::string id;
        double duration;
        std::vector<const Event*> system;
        std::vector<const Event*> reference;
    };
    std::vector<ClipEvents> clips;
    std::map<std::string, std::size_t> clip_slot;
    for (const auto& [id, duration] : clip_durations) {
        if (!(duration > 0.0)) throw std::invalid_argument("score: clip duration must be positive");
        clip_slot[id] = clips.size();
        clips.push_back(ClipEvents{id, duration, {}, {}});
    }
    auto place = [&](const EventList& events, bool is_system) {
        for (const Event& e : events) {
            auto it = clip_slot.find(e.clip_id);
            if (it == clip_slot.end())
                throw DataError("score: event references unknown clip " + e.clip_id);
            if (e.class_index < 0 || e.class_index >= n_classes)
                throw DataError("score: event class out of range for clip " + e.clip_id);
            if (!(e.onset_seconds < e.offset_seconds))
                throw DataError("score: event with empty interval in clip " + e.clip_id);
            (is_system ? clips[it->second].system : clips[it->second].reference).push_back(&e);
        }
    };
    place(system, true);
    place(reference, false);

    std::vector<SegmentCounts> per_clip(clips.size());
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t ci = 0; ci < static_cast<std::ptrdiff_t>(clips.size()); ++ci) {
        const ClipEvents& clip = clips[ci];
        const int n_segments =
            static_cast<int>(std::ceil(clip.duration / segment_seconds - 1e-12));
        std::vector<char> ref_active(static_cast<std::size_t>(n_segments) * n_classes, 0);
        std::vector<char> sys_active(static_cast<std::size_t>(n_segments) * n_classes, 0);
        auto mark = [&](const std::vector<const Event*>& events, std::vector<char>& grid) {
            for (const Event* e : events) {
                // A segment is active if the event overlaps it by any
                // positive amount.
                int first = static_cast<int>(std::floor(e->onset_seconds / segment_seconds));
                int last = static_cast<int>(std::ceil(e->offset_seconds / segment_seconds)) - 1;
                first = std::max(first, 0);
                last = std::min(last, n_segments - 1);
                for (int k = first; k <= last; ++k)
                    grid[static_cast<std::size_t>(k) * n_classes + e->class_index] = 1;
            }
        };
        mark(clip.reference, ref_active);
        mark(clip.system, sys_active);

        SegmentCounts& counts = per_clip[ci];
        for (int k = 0; k < n_segments; ++k) {
            long seg_ref = 0, seg_sys = 0, seg_tp = 0;
            for (int c = 0; c < n_classes; ++c) {
                const char r = ref_active[static_cast<std::size_t>(k) * n_classes + c];
                const char s = sys_active[static_cast<std::size_t>(k) * n_classes + c];
                seg_ref += r != 0;
                seg_sys += s != 0;
                seg_tp += (r != 0 && s != 0);
            }
            const long seg_fn = seg_ref - seg_tp;
            const long seg_fp = seg_sys - seg_tp;
            counts.n_ref += seg_ref;
            counts.n_sys += seg_sys;
            counts.tp += seg_tp;
            counts.fn += seg_fn;
            counts.fp += seg_fp;
            counts.substitutions += std::min(seg_fn, seg_fp);
            counts.deletions += std::max(0L, seg_fn - seg_fp);
            counts.insertions += std::max(0L, seg_fp - seg_fn);
        }
    }

    SegmentCounts total;
    for (const SegmentCounts& c : per_clip) total += c;
    return metrics_from_counts(total);
}

void write_event_tsv(const EventList& events, const std::vector<std::string>& class_names,
                     const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw DataError("write_event_tsv: cannot open " + path.string());
    for (const Event& e : events) {
        if (e.class_index < 0 || e.class_index >= static_cast<int>(class_names.size()))
            throw std::invalid_argument("write_event_tsv: class index out of range");
        out << e.clip_id << '\t' << format_seconds(e.onset_seconds) << '\t'
            << format_seconds(e.offset_seconds) << '\t' << class_names[e.class_index] << '\n';
    }
}

EventList read_event_tsv(const std::filesystem::path& path,
                         const std::vector<std::string>& class_names) {
    std::ifstream in(path);
    if (!in) throw DataError("read_event_tsv: cannot open " + path.string());
    EventList events;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        std::istringstream fields(line);
        std::string id, onset, offset, name;
        if (!std::getline(fields, id, '\t') || !std::getline(fields, onset, '\t') ||
            !std::getline(fields, offset, '\t') || !std::getline(fields, name))
            throw DataError("read_event_tsv: bad row " + std::to_string(line_no) + " in " +
                            path.string());
        const auto it = std::find(class_names.begin(), class_names.end(), name);
        if (it == class_names.end())
            throw DataError("read_event_tsv: unknown class '" + name + "' at row " +
                            std::to_string(line_no));
        Event e;
        e.clip_id = id;
        e.class_index = static_cast<int>(it - class_names.begin());
        try {
            e.onset_seconds = std::stod(onset);
            e.offset_seconds = std::stod(offset);
        } catch (const std::logic_error&) {
            throw DataError("read_event_tsv: bad times at row " + std::to_string(line_no));
        }
        events.push_back(std::move(e));
    }
    return events;
}

std::string render_text_report(const std::vector<ReportRow>& rows) {
    std::ostringstream out;
    out << "structure      pooling       Sub.   Del.   Ins.   ER     "
        << "Pre.    Rec.    F1\n";

    auto find_single = [&rows](const std::string& pooling) -> const ReportRow* {
        for (const ReportRow& r : rows)
            if (r.structure == "single" && r.pooling == pooling) return &r;
        return nullptr;
    };

    char buf[256];
    for (const ReportRow& r : rows) {
        const Metrics& m = r.metrics;
        std::string er_note, f1_note;
        if (r.structure == "hierarchical") {
            if (const ReportRow* single = find_single(r.pooling)) {
                er_note = change_annotation(single->metrics.error_rate, m.error_rate);
                f1_note = change_annotation(single->metrics.f1, m.f1);
            }
        }
        std::snprintf(buf, sizeof(buf),
                      "%-14s %-13s %-6.2f %-6.2f %-6.2f %-6.2f %-7.2f %-7.2f %-6.2f",
                      r.structure.c_str(), r.pooling.c_str(), m.substitution_rate,
                      m.deletion_rate, m.insertion_rate, m.error_rate, m.precision * 100.0,
                      m.recall * 100.0, m.f1 * 100.0);
        out << buf;
        if (!er_note.empty()) out << "  ER " << er_note;
        if (!f1_note.empty()) out << "  F1 " << f1_note;
        out << '\n';
    }

    bool any_seeds = false;
    for (const ReportRow& r : rows) any_seeds |= !r.per_seed_er.empty();
    if (any_seeds) {
        out << "\nper-seed ER (mean reported above):\n";
        for (const ReportRow& r : rows) {
            if (r.per_seed_er.empty()) continue;
            out << "  " << r.structure << '/' << r.pooling << ':';
            for (double er : r.per_seed_er) out << ' ' << format_fixed(er, 2);
            out << '\n';
        }
    }
    return out.str();
}

std::string render_tsv_report(const std::vector<ReportRow>& rows) {
    std::ostringstream out;
    out << "structure\tpooling\tsub\tdel\tins\ter\tprecision\trecall\tf1\tper_seed_er\n";
    for (const ReportRow& r : rows) {
        const Metrics& m = r.metrics;
        out << r.structure << '\t' << r.pooling << '\t' << format_fixed(m.substitution_rate, 6)
            << '\t' << format_fixed(m.deletion_rate, 6) << '\t'
            << format_fixed(m.insertion_rate, 6) << '\t' << format_fixed(m.error_rate, 6) << '\t'
            << format_fixed(m.precision, 6) << '\t' << format_fixed(m.recall, 6) << '\t'
            << format_fixed(m.f1, 6) << '\t';
        for (std::size_t i = 0; i < r.per_seed_er.size(); ++i) {
            if (i) out << ',';
            out << format_fixed(r.per_seed_er[i], 6);
        }
        out << '\n';
    }
    return out.str();
}

}  // namespace milpool
