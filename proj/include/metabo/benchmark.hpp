#pragma once

// Paired comparison of plain BO against meta-learning BO on synthetic task pairs. Each pair is a
// source task solved beforehand (its runs fill memory) and a similar target task. Both conditions
// run the target with the same per-run seeds, so the comparison uses common random numbers.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <exception>
#include <functional>
#include <limits>
#include <map>
#include <mutex>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "metabo/bounds_reduction.hpp"
#include "metabo/error.hpp"
#include "metabo/memory.hpp"
#include "metabo/orchestrator.hpp"
#include "metabo/param_space.hpp"
#include "metabo/rng.hpp"
#include "metabo/sim_blackbox.hpp"
#include "metabo/similarity.hpp"
#include "metabo/stats.hpp"
#include "metabo/text.hpp"

namespace metabo {

struct TaskPair {
    sim::SimTask source;
    sim::SimTask target;
    PointCloud source_cloud;
    PointCloud target_cloud;
};

/// `count` pairs; pair i uses shape family i mod 7 and alternates medium/hard difficulty unless
/// `difficulty` fixes it. Target clouds are fresh samples of the same family with aspect jitter.
inline std::vector<TaskPair> make_task_pairs(std::size_t count, double similarity, std::uint64_t seed,
                                             std::optional<sim::Difficulty> difficulty = std::nullopt,
                                             std::size_t cloud_points = 2000) {
    if (count < 1) throw Error("at least one task pair is required");
    std::vector<TaskPair> pairs;
    for (std::size_t i = 0; i < count; ++i) {
        const auto d = difficulty.value_or(i % 2 == 0 ? sim::Difficulty::medium : sim::Difficulty::hard);
        const std::string id = std::to_string(i + 1);
        TaskPair p;
        p.source = sim::make_task(derive_seed(seed, {0x5a, i}), d, "source-" + id);
        p.source.shape = sim::kShapeFamilies[i % sim::kShapeFamilies.size()];
        p.target = sim::perturb_task(p.source, similarity, derive_seed(seed, {0x7a, i}), "target-" + id);
        p.source_cloud = sim::make_cloud(p.source.shape, derive_seed(seed, {0xc5, i}), cloud_points);
        p.target_cloud = sim::make_cloud(p.target.shape, derive_seed(seed, {0xc7, i}), cloud_points, 0.1);
        pairs.push_back(std::move(p));
    }
    return pairs;
}

struct BenchConfig {
    std::size_t runs_per_condition = 6;
    std::size_t source_runs = 3;
    BudgetConfig budget;
    bool reduction_enabled = true;
    std::size_t jobs = 1;
    OptimizerSettings settings;
    ReductionConfig reduction;
    DescriptorConfig descriptor;
    std::uint64_t seed = 1;
};

/// One finished target run.
struct BenchRun {
    std::string task;
    std::string source;
    std::string retrieved;
    double distance = 0.0;
    std::string condition;  // "baseline" or "meta"
    std::size_t run = 0;
    std::uint64_t seed = 0;
    double final_score = 0.0;
    double initial_mean = 0.0;
    bool aborted = false;

    friend bool operator==(const BenchRun&, const BenchRun&) = default;
};

struct ConditionStats {
    std::vector<double> scores;
    double mean = 0.0;
    double sd = 0.0;  // sample standard deviation, 0 for a single run
    double median = 0.0;
    double worst = 0.0;
    double best = 0.0;
    double initial_mean = 0.0;
};

struct TaskSummary {
    std::string task;
    std::string source;
    std::string retrieved;
    double distance = 0.0;
    ConditionStats baseline;
    ConditionStats meta;
};

struct BenchReport {
    std::vector<TaskSummary> tasks;
    std::vector<BenchRun> runs;
    double baseline_mean = 0.0;
    double meta_mean = 0.0;
    double baseline_initial = 0.0;
    double meta_initial = 0.0;
    stats::TestResult paired;
    bool reliable = false;  // at least 5 pairs
    std::size_t aborted_runs = 0;
};

namespace detail {

inline ConditionStats condition_stats(std::vector<double> scores, std::span<const double> initial) {
    ConditionStats c;
    if (scores.empty()) throw Error("condition has no runs");
    c.scores = std::move(scores);
    const double n = static_cast<double>(c.scores.size());
    for (double s : c.scores) c.mean += s;
    c.mean /= n;
    if (c.scores.size() > 1) {
        double ss = 0.0;
        for (double s : c.scores) ss += (s - c.mean) * (s - c.mean);
        c.sd = std::sqrt(ss / (n - 1.0));
    }
    c.median = stats::median(c.scores);
    c.worst = *std::min_element(c.scores.begin(), c.scores.end());
    c.best = *std::max_element(c.scores.begin(), c.scores.end());
    for (double s : initial) c.initial_mean += s;
    c.initial_mean /= static_cast<double>(initial.size());
    return c;
}

/// Runs fn(i) for i in [0, count) on up to `jobs` threads; rethrows the first failure.
inline void parallel_for(std::size_t count, std::size_t jobs, const std::function<void(std::size_t)>& fn) {
    jobs = std::clamp<std::size_t>(jobs, 1, std::max<std::size_t>(count, 1));
    if (jobs == 1) {
        for (std::size_t i = 0; i < count; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex mu;
    std::vector<std::thread> workers;
    for (std::size_t w = 0; w < jobs; ++w)
        workers.emplace_back([&] {
            for (std::size_t i = next++; i < count; i = next++) {
                try {
                    fn(i);
                } catch (...) {
                    std::lock_guard lock(mu);
                    if (!failure) failure = std::current_exception();
                }
            }
        });
    for (auto& t : workers) t.join();
    if (failure) std::rethrow_exception(failure);
}

}  // namespace detail

/// Aggregates runs into per-task and overall statistics. Tasks keep first-appearance order.
inline BenchReport summarize(std::vector<BenchRun> runs) {
    BenchReport rep;
    std::vector<std::string> order;
    std::map<std::string, std::vector<const BenchRun*>> by_task;
    for (const auto& r : runs) {
        if (r.condition != "baseline" && r.condition != "meta")
            throw Error("unknown benchmark condition '" + r.condition + "'");
        if (!by_task.count(r.task)) order.push_back(r.task);
        by_task[r.task].push_back(&r);
        if (r.aborted) ++rep.aborted_runs;
    }
    std::vector<double> diffs;
    for (const auto& t : order) {
        TaskSummary ts;
        ts.task = t;
        std::vector<double> b, m, bi, mi;
        for (const BenchRun* r : by_task[t]) {
            ts.source = r->source;
            if (r->condition == "baseline") {
                b.push_back(r->final_score);
                bi.push_back(r->initial_mean);
            } else {
                ts.retrieved = r->retrieved;
                ts.distance = r->distance;
                m.push_back(r->final_score);
                mi.push_back(r->initial_mean);
            }
        }
        if (b.empty() || m.empty()) throw Error("task " + t + " lacks runs for one condition");
        ts.baseline = detail::condition_stats(std::move(b), bi);
        ts.meta = detail::condition_stats(std::move(m), mi);
        diffs.push_back(ts.meta.mean - ts.baseline.mean);
        rep.tasks.push_back(std::move(ts));
    }
    if (rep.tasks.empty()) throw Error("benchmark has no runs");
    const double k = static_cast<double>(rep.tasks.size());
    for (const auto& ts : rep.tasks) {
        rep.baseline_mean += ts.baseline.mean / k;
        rep.meta_mean += ts.meta.mean / k;
        rep.baseline_initial += ts.baseline.initial_mean / k;
        rep.meta_initial += ts.meta.initial_mean / k;
    }
    rep.paired = stats::wilcoxon_signed_rank(diffs, 0.0);
    rep.reliable = rep.tasks.size() >= 5;
    rep.runs = std::move(runs);
    return rep;
}

/// Full benchmark against `memory`, which should start empty: source clouds and runs are written
/// to it, then bounds are reduced, then the target runs of both conditions are recorded.
inline BenchReport paired_benchmark(std::span<const TaskPair> pairs, const BenchConfig& cfg, MemoryStore& memory) {
    if (pairs.empty()) throw Error("benchmark needs at least one task pair");
    if (cfg.runs_per_condition < 1) throw Error("runs per condition must be >= 1");
    if (cfg.source_runs < 1) throw Error("source runs must be >= 1");
    cfg.budget.validate();
    cfg.reduction.validate();
    const ParameterSpace space = default_space();

    for (const auto& p : pairs) memory.store_cloud({p.source.label, p.source_cloud});

    // Sources: a pair's runs are sequential so run ids do not depend on scheduling.
    detail::parallel_for(pairs.size(), cfg.jobs, [&](std::size_t i) {
        const auto& p = pairs[i];
        for (std::size_t r = 0; r < cfg.source_runs; ++r) {
            RunResult res = run_optimization(p.source.label, sim_evaluator(p.source, space), space, cfg.budget,
                                              derive_seed(cfg.seed, {0x50, i, r}), memory, cfg.settings);
            if (res.aborted) throw Error("source run of " + p.source.label + " failed: " + res.error);
        }
        ReducedBounds rb = cfg.reduction_enabled
                               ? reduce_bounds(p.source.label, memory, space, cfg.reduction, derive_seed(cfg.seed, {0x3b, i}))
                               : detail::unchanged_bounds(p.source.label, space);
        memory.store_procedural({p.source.label, 0, rb});
    });

    std::vector<std::vector<BenchRun>> per_pair(pairs.size());
    detail::parallel_for(pairs.size(), cfg.jobs, [&](std::size_t i) {
        const auto& p = pairs[i];
        const Evaluator eval = sim_evaluator(p.target, space);
        for (std::size_t r = 0; r < cfg.runs_per_condition; ++r) {
            const std::uint64_t seed = derive_seed(cfg.seed, {0x7e, i, r});
            RunResult base = run_optimization(p.target.label, eval, space, cfg.budget, seed, memory, cfg.settings);
            RunResult meta = run_with_meta_learning(p.target.label, p.target_cloud, eval, space, memory, cfg.budget, seed,
                                                    cfg.settings, cfg.reduction, cfg.descriptor);
            for (const RunResult* res : {&base, &meta}) {
                BenchRun br;
                br.task = p.target.label;
                br.source = p.source.label;
                br.condition = res == &base ? "baseline" : "meta";
                br.retrieved = res->meta.similar_task.value_or("");
                br.distance = res->meta.similar_distance.value_or(0.0);
                br.run = r + 1;
                br.seed = seed;
                br.aborted = res->aborted;
                br.final_score = res->aborted ? 0.0 : res->final_score;
                br.initial_mean = res->aborted ? 0.0 : res->phase_mean(Phase::initial_design);
                per_pair[i].push_back(std::move(br));
            }
        }
    });

    std::vector<BenchRun> runs;
    for (auto& v : per_pair)
        for (auto& r : v) runs.push_back(std::move(r));
    return summarize(std::move(runs));
}

// ---- reports ----

inline constexpr std::string_view kBenchCsvHeader =
    "task,source,retrieved,distance,condition,run,seed,final_score,initial_mean,aborted";

/// One row per run; numbers in shortest round-trip form so parse_csv reproduces every aggregate.
inline std::string render_csv(const BenchReport& rep) {
    std::string out(kBenchCsvHeader);
    out += '\n';
    for (const auto& r : rep.runs) {
        out += r.task + ',' + r.source + ',' + r.retrieved + ',' + text::format_exact(r.distance) + ',' + r.condition +
               ',' + std::to_string(r.run) + ',' + std::to_string(r.seed) + ',' + text::format_exact(r.final_score) +
               ',' + text::format_exact(r.initial_mean) + ',' + (r.aborted ? "1" : "0") + '\n';
    }
    return out;
}

inline std::vector<BenchRun> parse_csv(std::string_view csv, const std::string& source_name = "<csv>") {
    std::vector<BenchRun> runs;
    std::size_t line_no = 0;
    bool header = false;
    for (auto line : text::split(csv, '\n')) {
        ++line_no;
        line = text::trim(line);
        if (line.empty()) continue;
        if (!header) {
            if (line != kBenchCsvHeader) throw ParseError(source_name, line_no, "unexpected CSV header");
            header = true;
            continue;
        }
        const auto f = text::split(line, ',');
        if (f.size() != 10) throw ParseError(source_name, line_no, "expected 10 fields");
        BenchRun r;
        r.task = std::string(f[0]);
        r.source = std::string(f[1]);
        r.retrieved = std::string(f[2]);
        r.condition = std::string(f[4]);
        auto dist = text::parse_double(f[3]);
        auto run = text::parse_int<std::size_t>(f[5]);
        auto seed = text::parse_int<std::uint64_t>(f[6]);
        auto fs = text::parse_double(f[7]);
        auto im = text::parse_double(f[8]);
        if (!dist || !run || !seed || !fs || !im || (f[9] != "0" && f[9] != "1"))
            throw ParseError(source_name, line_no, "malformed field");
        r.distance = *dist;
        r.run = *run;
        r.seed = *seed;
        r.final_score = *fs;
        r.initial_mean = *im;
        r.aborted = f[9] == "1";
        runs.push_back(std::move(r));
    }
    if (!header) throw ParseError(source_name, line_no, "missing CSV header");
    return runs;
}

namespace detail {

inline std::string pct(double v) { return text::format_fixed(100.0 * v, 1); }

inline std::string pad(std::string s, std::size_t w) {
    if (s.size() < w) s.append(w - s.size(), ' ');
    return s;
}

}  // namespace detail

/// Per-task table in the "mean±sd, median (worst) (best)" layout, then overall means and the
/// paired test over per-task means.
inline std::string render_text(const BenchReport& rep) {
    std::ostringstream o;
    std::size_t w = 4;
    for (const auto& t : rep.tasks) w = std::max(w, t.task.size());
    o << detail::pad("task", w + 2) << detail::pad("condition", 11) << "success % mean±sd, median (worst) (best)"
      << "   initial %   retrieved\n";
    for (const auto& t : rep.tasks) {
        for (const auto* c : {&t.baseline, &t.meta}) {
            const bool meta = c == &t.meta;
            std::string cell = detail::pct(c->mean) + "±" + detail::pct(c->sd) + ", " + detail::pct(c->median) + " (" +
                               detail::pct(c->worst) + ") (" + detail::pct(c->best) + ")";
            o << detail::pad(meta ? "" : t.task, w + 2) << detail::pad(meta ? "meta" : "baseline", 11)
              << detail::pad(cell, 41) << "   " << detail::pad(detail::pct(c->initial_mean), 9) << "   ";
            if (meta) o << t.retrieved << " (d=" << text::format_fixed(t.distance, 4) << ")";
            o << '\n';
        }
    }
    o << "overall mean: baseline " << detail::pct(rep.baseline_mean) << "%, meta " << detail::pct(rep.meta_mean)
      << "%\n";
    o << "initial design mean: baseline " << detail::pct(rep.baseline_initial) << "%, meta "
      << detail::pct(rep.meta_initial) << "%\n";
    o << "paired Wilcoxon signed-rank over " << rep.tasks.size() << " task means: W+ = "
      << text::format_compact(rep.paired.statistic) << ", p = " << text::format_compact(rep.paired.p_value);
    if (!rep.reliable) o << " (unreliable: fewer than 5 pairs)";
    o << '\n';
    if (rep.aborted_runs) o << "aborted runs: " << rep.aborted_runs << '\n';
    return o.str();
}

}  // namespace metabo
