#pragma once

// Multi-command front end. Every command writes its report to `out` and diagnostics to `err`.
// Exit codes: 0 success, 1 run failure or missing data, 2 usage error.

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "metabo/benchmark.hpp"
#include "metabo/bounds_reduction.hpp"
#include "metabo/error.hpp"
#include "metabo/memory.hpp"
#include "metabo/orchestrator.hpp"
#include "metabo/param_space.hpp"
#include "metabo/point_cloud.hpp"
#include "metabo/reduced_bounds.hpp"
#include "metabo/sim_blackbox.hpp"
#include "metabo/similarity.hpp"
#include "metabo/text.hpp"

namespace metabo::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitUsage = 2;

/// Thrown for flag values that parse but are invalid.
class UsageError : public Error {
public:
    using Error::Error;
};

struct CliConfig {
    std::optional<std::string> memory_root;
    std::uint64_t seed = 1;
    BudgetConfig budget;
    ReductionConfig reduction;
    AcquisitionConfig acquisition{0.65, 0.0};
    std::string format = "text";
    std::size_t jobs = 1;
    bool meta = false;
};

inline BudgetConfig parse_budget(std::string_view s) {
    const auto f = text::split(s, ',');
    if (f.size() != 3) throw UsageError("--budget expects three counts i,n,f");
    BudgetConfig b;
    std::size_t* slots[] = {&b.init, &b.infill, &b.final_reps};
    for (std::size_t i = 0; i < 3; ++i) {
        auto v = text::parse_int<std::size_t>(text::trim(f[i]));
        if (!v || *v < 1) throw UsageError("--budget components must be integers >= 1");
        *slots[i] = *v;
    }
    return b;
}

inline std::pair<double, double> parse_percentiles(std::string_view s) {
    const auto f = text::split(s, ',');
    if (f.size() != 2) throw UsageError("--percentiles expects two values x,X");
    auto lo = text::parse_double(text::trim(f[0]));
    auto hi = text::parse_double(text::trim(f[1]));
    if (!lo || !hi) throw UsageError("--percentiles values must be numbers");
    return {*lo, *hi};
}

namespace detail {

inline std::string read_text_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot read " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline void write_text_file(const std::string& path, const std::string& body) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + path);
    out << body;
    if (!out) throw IoError("write failed for " + path);
}

inline std::string join_params(std::span<const double> v, char sep) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) s += sep;
        s += text::format_compact(v[i]);
    }
    return s;
}

inline std::string phase_mean_text(const std::vector<IterationRecord>& recs, Phase p) {
    double s = 0.0;
    std::size_t n = 0;
    for (const auto& r : recs)
        if (r.phase == p) {
            s += r.score;
            ++n;
        }
    return n ? text::format_compact(s / static_cast<double>(n)) : "-";
}

}  // namespace detail

/// Runs one command line (arguments without the program name).
inline int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Bayesian optimization with memory-based search-space reduction", "metabo"};
    app.require_subcommand(1);
    app.fallthrough();

    CliConfig cfg;
    std::string budget_text = "10,20,5";
    std::string percentiles_text;
    std::optional<double> alpha_both;
    std::string memory_root;
    app.add_option("--memory-root", memory_root, "Memory directory (default: $" + std::string(kMemoryRootEnv) + " or ./memory)");
    app.add_option("--seed", cfg.seed, "Master seed");
    app.add_option("--budget", budget_text, "Evaluation budget i,n,f (initial design, infill, final repeats)");
    app.add_option("--beta", cfg.acquisition.beta, "EQI quantile level");
    app.add_option("--best-fraction", cfg.reduction.best_fraction, "Fraction of best iterations used for reduction");
    app.add_option("--alpha-dm", cfg.reduction.alpha_dm, "Significance level of the uniformity test");
    app.add_option("--alpha-w", cfg.reduction.alpha_w, "Significance level of the signed-rank test");
    app.add_option("--alpha", alpha_both, "Sets both --alpha-dm and --alpha-w");
    app.add_option("--percentiles", percentiles_text, "Lower and upper percentiles x,X");
    app.add_flag("--meta", cfg.meta, "Use reduced bounds of the most similar known task");
    app.add_option("--jobs", cfg.jobs, "Worker threads for bench")->check(CLI::PositiveNumber);
    app.add_option("--format", cfg.format, "Report format")->check(CLI::IsMember({"text", "csv"}));

    // optimize
    auto* optimize = app.add_subcommand("optimize", "Optimize one synthetic task");
    std::optional<std::uint64_t> task_seed;
    std::string difficulty_text = "medium";
    std::string task_file, cloud_file, task_label;
    optimize->add_option("--task-seed", task_seed, "Seed of a builtin synthetic task");
    optimize->add_option("--difficulty", difficulty_text, "easy, medium or hard")
        ->check(CLI::IsMember({"easy", "medium", "hard"}));
    optimize->add_option("--task-file", task_file, "Synthetic task file")->check(CLI::ExistingFile);
    optimize->add_option("--cloud", cloud_file, "Object point cloud (.xyz); default: generated from the task");
    optimize->add_option("--task", task_label, "Task label (default: from the task)");

    // reduce-bounds
    auto* reduce = app.add_subcommand("reduce-bounds", "Reduce the default bounds from a task's iterations");
    std::string reduce_task;
    reduce->add_option("--task", reduce_task, "Task label")->required();

    // similar
    auto* similar = app.add_subcommand("similar", "Nearest stored task by shape");
    std::string similar_cloud;
    similar->add_option("--cloud", similar_cloud, "Query point cloud (.xyz)")->required()->check(CLI::ExistingFile);

    // add-cloud
    auto* add_cloud = app.add_subcommand("add-cloud", "Store a point cloud in semantic memory");
    std::string add_task, add_file, add_shape;
    std::uint64_t add_seed = 0;
    add_cloud->add_option("--task", add_task, "Task label")->required();
    auto* add_file_opt = add_cloud->add_option("--cloud", add_file, "Point cloud (.xyz)")->check(CLI::ExistingFile);
    auto* add_shape_opt = add_cloud->add_option("--shape", add_shape, "Generate a cloud of this family");
    add_cloud->add_option("--cloud-seed", add_seed, "Seed for a generated cloud");
    add_file_opt->excludes(add_shape_opt);

    // bench
    auto* bench = app.add_subcommand("bench", "Paired benchmark: default bounds vs meta-learning");
    std::size_t pairs = 7, runs = 6, source_runs = 3;
    double similarity = 0.9;
    std::string csv_out;
    bool no_reduction = false;
    std::string bench_difficulty;
    bench->add_option("--pairs", pairs, "Task pairs")->check(CLI::PositiveNumber);
    bench->add_option("--runs", runs, "Runs per condition")->check(CLI::PositiveNumber);
    bench->add_option("--source-runs", source_runs, "Runs per source task")->check(CLI::PositiveNumber);
    bench->add_option("--similarity", similarity, "Source/target similarity")->check(CLI::Range(0.0, 1.0));
    bench->add_option("--csv", csv_out, "Also write per-run CSV here");
    bench->add_option("--difficulty", bench_difficulty, "Fix the difficulty of every pair")
        ->check(CLI::IsMember({"easy", "medium", "hard"}));
    bench->add_flag("--no-reduction", no_reduction, "Meta condition keeps the default bounds");

    // report
    auto* report = app.add_subcommand("report", "Re-render stored runs or a bench CSV");
    std::string report_csv, report_task;
    report->add_option("--csv", report_csv, "Bench CSV to summarize")->check(CLI::ExistingFile);
    report->add_option("--task", report_task, "Only this task");

    std::vector<std::string> argv(args.rbegin(), args.rend());
    try {
        app.parse(argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::ParseError& e) {
        app.exit(e, err, err);
        return kExitUsage;
    }

    const ParameterSpace space = default_space();
    try {
        cfg.budget = parse_budget(budget_text);
        if (!percentiles_text.empty())
            std::tie(cfg.reduction.lo_percentile, cfg.reduction.hi_percentile) = parse_percentiles(percentiles_text);
        if (alpha_both) cfg.reduction.alpha_dm = cfg.reduction.alpha_w = *alpha_both;
        if (!memory_root.empty()) cfg.memory_root = memory_root;
        cfg.reduction.validate();
        cfg.acquisition.validate();
        if (*optimize && !task_file.empty() && task_seed) throw UsageError("--task-seed and --task-file are exclusive");
        if (*optimize && task_file.empty() && !task_seed) throw UsageError("optimize needs --task-seed or --task-file");
        if (*add_cloud && add_file.empty() && add_shape.empty()) throw UsageError("add-cloud needs --cloud or --shape");
        if (*add_cloud && !add_shape.empty() && !sim::parse_shape(add_shape))
            throw UsageError("unknown shape '" + add_shape + "'");
        if (!text::is_valid_label(reduce_task) && *reduce) throw UsageError("invalid task label '" + reduce_task + "'");
    } catch (const Error& e) {
        err << "error: " << e.what() << '\n';
        return kExitUsage;
    }
    const bool csv = cfg.format == "csv";

    try {
        const std::filesystem::path root = MemoryStore::resolve_root(cfg.memory_root);
        OptimizerSettings settings;
        settings.acquisition = cfg.acquisition;

        if (*optimize) {
            sim::SimTask task = task_file.empty()
                                    ? sim::make_task(*task_seed, *sim::parse_difficulty(difficulty_text))
                                    : sim::SimTask::parse(detail::read_text_file(task_file), task_file);
            if (!task_label.empty()) task.label = task_label;
            if (!text::is_valid_label(task.label)) throw UsageError("invalid task label '" + task.label + "'");
            if (task.dimension() != space.dimension())
                throw UsageError("task has " + std::to_string(task.dimension()) + " parameters, expected " +
                                 std::to_string(space.dimension()));
            const PointCloud cloud = cloud_file.empty()
                                         ? sim::make_cloud(task.shape, task.latent_seed)
                                         : parse_xyz(detail::read_text_file(cloud_file), cloud_file);
            MemoryStore memory(root);
            const Evaluator eval = sim_evaluator(task, space);
            RunResult res = cfg.meta ? run_with_meta_learning(task.label, cloud, eval, space, memory, cfg.budget,
                                                              cfg.seed, settings, cfg.reduction)
                                     : run_optimization(task.label, eval, space, cfg.budget, cfg.seed, memory, settings);
            for (const auto& w : res.meta.warnings) err << "warning: " << w << '\n';
            if (csv) {
                out << "task,run,iteration,phase";
                for (const auto& b : space.bounds()) out << ',' << b.name;
                out << ",score\n";
                for (const auto& r : res.records)
                    out << r.task << ',' << r.run_id << ',' << r.iteration << ',' << to_string(r.phase) << ','
                        << detail::join_params(r.params, ',') << ',' << text::format_exact(r.score) << '\n';
            } else {
                out << "task " << res.task << " run " << res.run_id << " seed " << cfg.seed << " budget "
                    << cfg.budget.init << ',' << cfg.budget.infill << ',' << cfg.budget.final_reps << '\n';
                if (res.meta.similar_task)
                    out << "similar task " << *res.meta.similar_task << " (distance "
                        << text::format_compact(*res.meta.similar_distance) << ")\n";
                if (res.meta.fallback_default_bounds) out << "meta-learning fallback: default bounds\n";
                out << "space";
                for (const auto& b : res.meta.space.bounds())
                    out << ' ' << b.name << '=' << text::format_compact(b.lower) << ':' << text::format_compact(b.upper);
                out << '\n';
                for (const auto& r : res.records)
                    out << "iter " << r.iteration << ' ' << to_string(r.phase) << " score "
                        << text::format_fixed(r.score, 4) << " params " << detail::join_params(r.params, ' ') << '\n';
            }
            if (res.aborted) {
                err << "error: run aborted: " << res.error << '\n';
                return kExitFailure;
            }
            if (!memory.has_cloud(task.label)) memory.store_cloud({task.label, cloud});
            if (!csv) {
                out << "final score " << text::format_fixed(res.final_score, 4) << " (mean of "
                    << cfg.budget.final_reps << ")\n";
                out << "best params";
                for (std::size_t j = 0; j < space.dimension(); ++j)
                    out << ' ' << space[j].name << '=' << text::format_compact(res.best_params[j]);
                out << '\n';
            }
            return kExitOk;
        }

        if (*reduce) {
            MemoryStore memory(root);
            if (memory.query_iterations(reduce_task).empty()) {
                err << "error: no episodic data for task " << reduce_task << '\n';
                return kExitFailure;
            }
            const ReducedBounds rb = reduce_bounds(reduce_task, memory, space, cfg.reduction, cfg.seed);
            memory.store_procedural({reduce_task, 0, rb});
            if (csv) {
                out << "name,default_lower,default_upper,lower,upper,decision,p_dm,p_w,median\n";
                for (const auto& p : rb.params)
                    out << p.name << ',' << text::format_exact(p.default_lower) << ','
                        << text::format_exact(p.default_upper) << ',' << text::format_exact(p.lower) << ','
                        << text::format_exact(p.upper) << ',' << to_string(p.decision) << ','
                        << text::format_exact(p.p_dm) << ',' << text::format_exact(p.p_w) << ','
                        << text::format_exact(p.median) << '\n';
            } else {
                out << "reduced bounds for " << reduce_task << ": " << rb.iterations_total << " iterations, runs";
                for (int r : rb.source_runs) out << ' ' << r;
                out << ", best " << rb.iterations_used << " used\n";
                out << "best_fraction " << text::format_compact(rb.config.best_fraction) << " alpha_dm "
                    << text::format_compact(rb.config.alpha_dm) << " alpha_w " << text::format_compact(rb.config.alpha_w)
                    << " percentiles " << text::format_compact(rb.config.lo_percentile) << ','
                    << text::format_compact(rb.config.hi_percentile) << " seed " << rb.seed << '\n';
                if (rb.insufficient_data)
                    out << "insufficient data: fewer than " << rb.config.min_iterations
                        << " iterations, bounds unchanged\n";
                out << format_bounds_report(rb);
            }
            return kExitOk;
        }

        if (*similar) {
            MemoryStore memory(root);
            if (memory.list_tasks().empty()) {
                err << "error: semantic memory is empty\n";
                return kExitFailure;
            }
            const SimilarityMatch m = most_similar(parse_xyz(detail::read_text_file(similar_cloud), similar_cloud), memory);
            if (csv) out << "task,distance\n" << m.task << ',' << text::format_exact(m.distance) << '\n';
            else out << m.task << ' ' << text::format_compact(m.distance) << '\n';
            return kExitOk;
        }

        if (*add_cloud) {
            if (!text::is_valid_label(add_task)) throw UsageError("invalid task label '" + add_task + "'");
            const PointCloud cloud = add_file.empty() ? sim::make_cloud(*sim::parse_shape(add_shape), add_seed)
                                                      : parse_xyz(detail::read_text_file(add_file), add_file);
            MemoryStore memory(root);
            memory.store_cloud({add_task, cloud});
            out << "stored cloud for " << add_task << " (" << cloud.size() << " points)\n";
            return kExitOk;
        }

        if (*bench) {
            const std::filesystem::path dir = root / ("bench-" + std::to_string(cfg.seed));
            std::filesystem::remove_all(dir);
            MemoryStore memory(dir);
            std::optional<sim::Difficulty> d;
            if (!bench_difficulty.empty()) d = sim::parse_difficulty(bench_difficulty);
            const auto task_pairs = make_task_pairs(pairs, similarity, cfg.seed, d);
            BenchConfig bc;
            bc.runs_per_condition = runs;
            bc.source_runs = source_runs;
            bc.budget = cfg.budget;
            bc.reduction_enabled = !no_reduction;
            bc.jobs = cfg.jobs;
            bc.settings = settings;
            bc.reduction = cfg.reduction;
            bc.seed = cfg.seed;
            const BenchReport rep = paired_benchmark(task_pairs, bc, memory);
            const std::string csv_body = render_csv(rep);
            detail::write_text_file((dir / "report.csv").string(), csv_body);
            if (!csv_out.empty()) detail::write_text_file(csv_out, csv_body);
            out << (csv ? csv_body : render_text(rep));
            return rep.aborted_runs ? kExitFailure : kExitOk;
        }

        if (*report) {
            if (!report_csv.empty()) {
                BenchReport rep = summarize(parse_csv(detail::read_text_file(report_csv), report_csv));
                out << (csv ? render_csv(rep) : render_text(rep));
                return kExitOk;
            }
            MemoryStore memory(root);
            std::vector<std::string> tasks = memory.episodic_tasks();
            if (!report_task.empty()) {
                if (std::find(tasks.begin(), tasks.end(), report_task) == tasks.end()) tasks.clear();
                else tasks = {report_task};
            }
            if (tasks.empty()) {
                err << "error: no stored runs\n";
                return kExitFailure;
            }
            if (csv) out << "task,run,iterations,initial_mean,infill_mean,final_mean,best_observed\n";
            else out << "task run iterations initial_mean infill_mean final_mean best_observed\n";
            const char sep = csv ? ',' : ' ';
            for (const auto& t : tasks) {
                const auto recs = memory.query_iterations(t);
                std::map<int, std::vector<IterationRecord>> by_run;
                for (const auto& r : recs) by_run[r.run_id].push_back(r);
                for (const auto& [run, rs] : by_run) {
                    double best = 0.0;
                    for (const auto& r : rs) best = std::max(best, r.score);
                    out << t << sep << run << sep << rs.size() << sep
                        << detail::phase_mean_text(rs, Phase::initial_design) << sep
                        << detail::phase_mean_text(rs, Phase::infill_eqi) << sep
                        << detail::phase_mean_text(rs, Phase::final_eval) << sep << text::format_compact(best) << '\n';
                }
            }
            return kExitOk;
        }
    } catch (const UsageError& e) {
        err << "error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kExitFailure;
    }
    return kExitUsage;
}

}  // namespace metabo::cli
