#pragma once

// Search-space pruning from past experience. For every parameter, the unit-scaled values taken by
// the best iterations of a task are tested for uniformity; a non-uniform parameter is narrowed to
// percentiles of those values, on the side(s) chosen by a signed-rank test around 0.5.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "metabo/error.hpp"
#include "metabo/memory.hpp"
#include "metabo/param_space.hpp"
#include "metabo/records.hpp"
#include "metabo/reduced_bounds.hpp"
#include "metabo/stats.hpp"

namespace metabo {

/// Number of records kept for a fraction of n: ceil(fraction * n), robust to rounding noise.
inline std::size_t best_count(std::size_t n, double fraction) {
    const double raw = fraction * static_cast<double>(n);
    auto k = static_cast<std::size_t>(std::ceil(raw - 1e-9 * std::max(1.0, raw)));
    return std::clamp<std::size_t>(k, 1, n);
}

/// Highest-scoring ceil(fraction * N) records; ties at the cutoff go to the earlier (run, iteration).
/// The result is in (run, iteration) order.
inline std::vector<IterationRecord> select_best(std::span<const IterationRecord> iterations, double fraction) {
    if (iterations.empty()) throw Error("select_best needs at least one iteration");
    if (!(fraction > 0.0 && fraction <= 1.0)) throw Error("best fraction must lie in (0, 1]");
    for (const auto& r : iterations)
        if (!std::isfinite(r.score)) throw Error("select_best: non-finite score");
    std::vector<std::size_t> idx(iterations.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    auto key = [&](std::size_t i) { return std::pair(iterations[i].run_id, iterations[i].iteration); };
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
        if (iterations[a].score != iterations[b].score) return iterations[a].score > iterations[b].score;
        return key(a) < key(b);
    });
    idx.resize(best_count(iterations.size(), fraction));
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return key(a) < key(b); });
    std::vector<IterationRecord> out;
    out.reserve(idx.size());
    for (auto i : idx) out.push_back(iterations[i]);
    return out;
}

namespace detail {

/// Widens [lo, hi] (unit scale) to at least `min_width`, keeping it inside [0, 1].
inline std::pair<double, double> enforce_min_width(double lo, double hi, double min_width) {
    if (hi - lo >= min_width) return {lo, hi};
    const double center = 0.5 * (lo + hi);
    lo = center - 0.5 * min_width;
    hi = center + 0.5 * min_width;
    if (lo < 0.0) {
        hi -= lo;
        lo = 0.0;
    }
    if (hi > 1.0) {
        lo -= hi - 1.0;
        hi = 1.0;
    }
    return {std::max(lo, 0.0), std::min(hi, 1.0)};
}

inline ReducedBounds unchanged_bounds(const std::string& task, const ParameterSpace& space) {
    ReducedBounds rb;
    rb.task = task;
    for (const auto& b : space.bounds()) {
        ParameterReduction p;
        p.name = b.name;
        p.default_lower = p.lower = b.lower;
        p.default_upper = p.upper = b.upper;
        rb.params.push_back(std::move(p));
    }
    return rb;
}

}  // namespace detail

/// Reduced bounds of `task` from its iteration records (all runs). Records must carry raw values
/// inside `space`.
inline ReducedBounds reduce_bounds_from_records(const std::string& task, std::span<const IterationRecord> iterations,
                                                const ParameterSpace& space, const ReductionConfig& cfg,
                                                std::uint64_t seed) {
    cfg.validate();
    ReducedBounds rb = detail::unchanged_bounds(task, space);
    rb.config = cfg;
    rb.seed = seed;
    rb.iterations_total = iterations.size();
    std::set<int> runs;
    for (const auto& r : iterations) runs.insert(r.run_id);
    rb.source_runs.assign(runs.begin(), runs.end());

    if (iterations.size() < cfg.min_iterations) {
        rb.insufficient_data = true;
        return rb;
    }

    const std::vector<IterationRecord> best = select_best(iterations, cfg.best_fraction);
    rb.iterations_used = best.size();
    const std::size_t m = space.dimension();
    std::vector<std::vector<double>> columns(m);
    for (const auto& r : best) {
        const UnitPoint u = space.scale(r.params);
        for (std::size_t j = 0; j < m; ++j) columns[j].push_back(u[j]);
    }

    for (std::size_t j = 0; j < m; ++j) {
        auto& p = rb.params[j];
        const auto& col = columns[j];
        p.median = stats::median(col);
        double p_dm = 1.0;
        try {
            p_dm = stats::dudewicz_vdm_test(col, seed, cfg.dm_replicates).p_value;
        } catch (const InsufficientData&) {
            p_dm = 1.0;  // too few values: uniformity is not rejected
        }
        p.p_dm = p_dm;
        if (!(p_dm < cfg.alpha_dm)) continue;

        const double p_w = stats::wilcoxon_signed_rank(col, 0.5).p_value;
        p.p_w = p_w;
        double lo = 0.0, hi = 1.0;
        if (p_w < cfg.alpha_w && p.median > 0.5) {
            p.decision = BoundDecision::lower_raised;
            lo = stats::percentile(col, cfg.lo_percentile);
        } else if (p_w < cfg.alpha_w && p.median < 0.5) {
            p.decision = BoundDecision::upper_lowered;
            hi = stats::percentile(col, cfg.hi_percentile);
        } else {
            p.decision = BoundDecision::both;
            lo = stats::percentile(col, cfg.lo_percentile);
            hi = stats::percentile(col, cfg.hi_percentile);
        }
        std::tie(lo, hi) = detail::enforce_min_width(lo, hi, cfg.min_unit_width);
        const auto& b = space[j];
        p.lower = lo == 0.0 ? b.lower : std::clamp(b.lower + lo * b.width(), b.lower, b.upper);
        p.upper = hi == 1.0 ? b.upper : std::clamp(b.lower + hi * b.width(), b.lower, b.upper);
    }
    return rb;
}

/// Reads every iteration of `task` from episodic memory and reduces the bounds of `space`.
inline ReducedBounds reduce_bounds(const std::string& task, const MemoryStore& store, const ParameterSpace& space,
                                   const ReductionConfig& cfg, std::uint64_t seed) {
    const auto iterations = store.query_iterations(task);
    return reduce_bounds_from_records(task, iterations, space, cfg, seed);
}

}  // namespace metabo
