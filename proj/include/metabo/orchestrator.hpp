#pragma once

// Bayesian optimization run: maximin LHS initial design, EQI infill with a GP refit every
// iteration, then repeated evaluation of the best predicted point. Every evaluation is written
// to episodic memory. The meta-learning variant narrows the space to the reduced bounds of the
// most similar known task before running.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "metabo/acquisition.hpp"
#include "metabo/bounds_reduction.hpp"
#include "metabo/cmaes.hpp"
#include "metabo/error.hpp"
#include "metabo/gp.hpp"
#include "metabo/lhs.hpp"
#include "metabo/memory.hpp"
#include "metabo/param_space.hpp"
#include "metabo/records.hpp"
#include "metabo/rng.hpp"
#include "metabo/sim_blackbox.hpp"
#include "metabo/similarity.hpp"

namespace metabo {

struct BudgetConfig {
    std::size_t init = 10;
    std::size_t infill = 20;
    std::size_t final_reps = 5;

    std::size_t total() const noexcept { return init + infill + final_reps; }
    void validate() const {
        if (init < 1 || infill < 1 || final_reps < 1) throw Error("budget components must all be >= 1");
    }
    friend bool operator==(const BudgetConfig&, const BudgetConfig&) = default;
};

struct OptimizerSettings {
    AcquisitionConfig acquisition{0.65, 0.0};  // tau_future is replaced by the fitted noise sd
    std::size_t lhs_restarts = 100;
    std::size_t acq_budget = 2000;   // CMA-ES evaluations per restart
    std::size_t acq_restarts = 3;
    std::size_t acq_probes = 100;    // random probes the chosen infill point must beat
    std::size_t gp_restarts = 2;
    std::size_t gp_budget = 500;
    std::size_t final_mean_budget = 2000;
};

/// Black-box score in [0,1] (higher is better) for raw parameters. The seed fixes its noise.
using Evaluator = std::function<double(std::span<const double> raw, std::uint64_t eval_seed)>;

inline Evaluator sim_evaluator(sim::SimTask task, ParameterSpace space = default_space()) {
    return [task = std::move(task), space = std::move(space)](std::span<const double> raw, std::uint64_t seed) {
        Rng rng(seed);
        return sim::evaluate(task, space, raw, rng).score;
    };
}

struct RunMetadata {
    ParameterSpace space = default_space();
    std::uint64_t seed = 0;
    BudgetConfig budget;
    OptimizerSettings settings;
    std::optional<std::string> similar_task;
    std::optional<double> similar_distance;
    bool fallback_default_bounds = false;
    std::vector<std::string> warnings;
    std::vector<double> tau_future;      // per infill iteration
    std::vector<double> chosen_eqi;      // EQI at the chosen infill point
    std::vector<double> best_probe_eqi;  // best EQI among the random probes
    std::size_t final_candidates = 0;
};

struct RunResult {
    std::string task;
    int run_id = 0;
    std::vector<IterationRecord> records;
    ParamVector best_params;
    double final_score = 0.0;
    RunMetadata meta;
    bool aborted = false;
    std::string error;

    double phase_mean(Phase p) const {
        double s = 0.0;
        std::size_t n = 0;
        for (const auto& r : records)
            if (r.phase == p) {
                s += r.score;
                ++n;
            }
        return n ? s / static_cast<double>(n) : std::numeric_limits<double>::quiet_NaN();
    }
};

namespace detail {

inline Eigen::MatrixXd to_matrix(const std::vector<UnitPoint>& xs, std::size_t m) {
    Eigen::MatrixXd X(static_cast<Eigen::Index>(xs.size()), static_cast<Eigen::Index>(m));
    for (std::size_t i = 0; i < xs.size(); ++i)
        for (std::size_t j = 0; j < m; ++j) X(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = xs[i][j];
    return X;
}

}  // namespace detail

/// One full optimization run over `space`. All points are proposed in the unit cube of `space`
/// and passed to the evaluator in raw units.
inline RunResult run_optimization(const std::string& task, const Evaluator& evaluator, const ParameterSpace& space,
                                  const BudgetConfig& budget, std::uint64_t seed, MemoryStore& memory,
                                  const OptimizerSettings& settings = {}) {
    budget.validate();
    settings.acquisition.validate();
    const std::size_t m = space.dimension();

    RunResult res;
    res.task = task;
    res.run_id = memory.next_run_id(task);
    res.meta.space = space;
    res.meta.seed = seed;
    res.meta.budget = budget;
    res.meta.settings = settings;

    std::vector<UnitPoint> xs;
    std::vector<double> scores;
    int iteration = 0;

    auto evaluate = [&](const UnitPoint& u, Phase phase) {
        ++iteration;
        IterationRecord rec;
        rec.task = task;
        rec.run_id = res.run_id;
        rec.iteration = iteration;
        rec.phase = phase;
        rec.params = space.unscale(u);
        const double s = evaluator(rec.params, derive_seed(seed, {0xe7a1, static_cast<std::uint64_t>(iteration)}));
        if (!std::isfinite(s) || s < 0.0 || s > 1.0) throw Error("evaluator returned a score outside [0, 1]");
        rec.score = s;
        memory.record_iteration(rec);
        res.records.push_back(rec);
        return s;
    };

    // Scores are maximized; the GP models their negation.
    auto fit = [&](std::optional<GpHyperParams> warm, std::uint64_t fit_seed) {
        Eigen::VectorXd y(static_cast<Eigen::Index>(scores.size()));
        for (std::size_t i = 0; i < scores.size(); ++i) y(static_cast<Eigen::Index>(i)) = -scores[i];
        GpFitOptions fo;
        fo.seed = fit_seed;
        fo.restarts = settings.gp_restarts;
        fo.budget_per_restart = settings.gp_budget;
        fo.warm_start = std::move(warm);
        return fit_gp(detail::to_matrix(xs, m), y, fo);
    };

    try {
        const DesignMatrix design = maximin_lhs(budget.init, m, derive_seed(seed, {0x1d5}), settings.lhs_restarts);
        for (std::size_t i = 0; i < design.rows(); ++i) {
            UnitPoint u = design.row_vector(i);
            scores.push_back(evaluate(u, Phase::initial_design));
            xs.push_back(std::move(u));
        }

        std::optional<GpHyperParams> warm;
        Rng probe_rng(derive_seed(seed, {0x9b0e}));
        for (std::size_t it = 0; it < budget.infill; ++it) {
            const std::uint64_t it_seed = derive_seed(seed, {0x1f11, it});
            GpFitResult fr = fit(warm, it_seed);
            if (fr.degenerate) res.meta.warnings.push_back("infill " + std::to_string(it + 1) + ": constant scores, GP at floor");
            const GpModel& gp = fr.model;
            warm = gp.hyper();

            AcquisitionConfig acq = settings.acquisition;
            acq.tau_future = std::sqrt(gp.hyper().noise_variance);
            res.meta.tau_future.push_back(acq.tau_future);
            const double qmin = q_min(gp, xs, acq.beta);
            auto neg_eqi = [&](std::span<const double> x) { return -eqi(gp, x, acq, qmin); };

            const DesignMatrix starts_d = maximin_lhs(settings.acq_restarts, m, derive_seed(it_seed, {1}), 10);
            std::vector<std::vector<double>> starts;
            for (std::size_t r = 0; r < starts_d.rows(); ++r) starts.push_back(starts_d.row_vector(r));
            CmaResult best = cmaes_minimize_restarts(neg_eqi, Box::unit(m), starts,
                                                     std::max(settings.acq_budget, default_config(m).lambda),
                                                     derive_seed(it_seed, {2}));
            UnitPoint chosen = best.best_point;
            double chosen_value = -best.best_value;

            double probe_best = -std::numeric_limits<double>::infinity();
            UnitPoint probe_point;
            UnitPoint probe(m);
            for (std::size_t k = 0; k < settings.acq_probes; ++k) {
                for (auto& v : probe) v = uniform01(probe_rng);
                const double e = eqi(gp, probe, acq, qmin);
                if (e > probe_best) {
                    probe_best = e;
                    probe_point = probe;
                }
            }
            if (probe_best > chosen_value) {
                chosen = probe_point;
                chosen_value = probe_best;
            }
            res.meta.chosen_eqi.push_back(chosen_value);
            res.meta.best_probe_eqi.push_back(probe_best);

            scores.push_back(evaluate(chosen, Phase::infill_eqi));
            xs.push_back(std::move(chosen));
        }

        // Best predicted point: lowest posterior mean of the negated score over all evaluated
        // points and a dedicated minimization of the mean.
        GpFitResult fr = fit(warm, derive_seed(seed, {0xf1a1}));
        const GpModel& gp = fr.model;
        auto mean_at = [&](std::span<const double> x) { return gp.posterior(x).mean; };
        std::vector<UnitPoint> candidates = xs;
        {
            std::size_t best_i = 0;
            for (std::size_t i = 1; i < xs.size(); ++i)
                if (mean_at(xs[i]) < mean_at(xs[best_i])) best_i = i;
            CmaOptions co;
            co.budget = std::max(settings.final_mean_budget, default_config(m).lambda);
            co.seed = derive_seed(seed, {0xf1a2});
            co.initial_mean = xs[best_i];
            co.initial_step = 0.2;
            candidates.push_back(cmaes_minimize(mean_at, Box::unit(m), co).best_point);
        }
        res.meta.final_candidates = candidates.size();
        std::size_t best_c = 0;
        double best_mean = mean_at(candidates[0]);
        for (std::size_t c = 1; c < candidates.size(); ++c) {
            const double v = mean_at(candidates[c]);
            if (v < best_mean) {
                best_mean = v;
                best_c = c;
            }
        }
        const UnitPoint final_point = candidates[best_c];
        res.best_params = space.unscale(final_point);

        double sum = 0.0;
        for (std::size_t r = 0; r < budget.final_reps; ++r) sum += evaluate(final_point, Phase::final_eval);
        res.final_score = sum / static_cast<double>(budget.final_reps);

        OptimizedParams op;
        for (const auto& b : space.bounds()) op.names.push_back(b.name);
        op.values = res.best_params;
        op.final_score = res.final_score;
        memory.store_procedural({task, res.run_id, op});
    } catch (const std::exception& e) {
        res.aborted = true;
        res.error = e.what();
    }
    return res;
}

/// Narrows the default space to the reduced bounds of the task whose cloud is nearest to
/// `cloud`. Reduced bounds missing from procedural memory are computed from episodic memory and
/// stored. Without any known cloud the default space is used and the fallback is flagged.
struct MetaSpace {
    ParameterSpace space;
    std::optional<SimilarityMatch> match;
    std::optional<ReducedBounds> bounds;
    bool fallback = false;
    std::string warning;
};

inline MetaSpace meta_learning_space(std::span<const Point3> cloud, const ParameterSpace& default_bounds,
                                     MemoryStore& memory, const ReductionConfig& reduction,
                                     const DescriptorConfig& descriptor_cfg, std::uint64_t seed) {
    MetaSpace ms{default_bounds, std::nullopt, std::nullopt, false, {}};
    if (memory.list_tasks().empty()) {
        ms.fallback = true;
        ms.warning = "semantic memory is empty; using default bounds";
        return ms;
    }
    ms.match = most_similar(cloud, memory, descriptor_cfg);
    ReducedBounds rb;
    if (auto entry = memory.load_procedural(ms.match->task, ProceduralKind::reduced_bounds)) {
        rb = std::get<ReducedBounds>(entry->payload);
    } else {
        rb = reduce_bounds(ms.match->task, memory, default_bounds, reduction, seed);
        memory.store_procedural({ms.match->task, 0, rb});
    }
    ms.space = restrict(default_bounds, rb);
    ms.bounds = std::move(rb);
    return ms;
}

inline RunResult run_with_meta_learning(const std::string& task, std::span<const Point3> cloud,
                                        const Evaluator& evaluator, const ParameterSpace& default_bounds,
                                        MemoryStore& memory, const BudgetConfig& budget, std::uint64_t seed,
                                        const OptimizerSettings& settings = {}, const ReductionConfig& reduction = {},
                                        const DescriptorConfig& descriptor_cfg = {}) {
    MetaSpace ms = meta_learning_space(cloud, default_bounds, memory, reduction, descriptor_cfg,
                                       derive_seed(seed, {0x3e7a}));
    RunResult res = run_optimization(task, evaluator, ms.space, budget, seed, memory, settings);
    if (ms.match) {
        res.meta.similar_task = ms.match->task;
        res.meta.similar_distance = ms.match->distance;
    }
    res.meta.fallback_default_bounds = ms.fallback;
    if (!ms.warning.empty()) res.meta.warnings.insert(res.meta.warnings.begin(), ms.warning);
    return res;
}

}  // namespace metabo
