#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "metabo/error.hpp"
#include "metabo/param_space.hpp"
#include "metabo/text.hpp"

namespace metabo {

struct ReductionConfig {
    double best_fraction = 0.35;
    double alpha_dm = 0.15;
    double alpha_w = 0.15;
    double lo_percentile = 0.05;
    double hi_percentile = 0.95;
    /// Fewer iterations than this leave the bounds unchanged.
    std::size_t min_iterations = 15;
    /// Null replicates of the uniformity test.
    std::size_t dm_replicates = 10000;
    /// Reduced ranges narrower than this (unit scale) are widened around their center.
    double min_unit_width = 0.02;

    void validate() const {
        if (!(best_fraction > 0.0 && best_fraction <= 1.0)) throw Error("best fraction must lie in (0, 1]");
        if (!(alpha_dm > 0.0 && alpha_dm < 1.0)) throw Error("alpha_dm must lie in (0, 1)");
        if (!(alpha_w > 0.0 && alpha_w < 1.0)) throw Error("alpha_w must lie in (0, 1)");
        if (!(lo_percentile >= 0.0 && lo_percentile < hi_percentile && hi_percentile <= 1.0))
            throw Error("percentiles must satisfy 0 <= x < X <= 1");
        if (!(min_unit_width > 0.0 && min_unit_width <= 1.0)) throw Error("minimum width must lie in (0, 1]");
        if (dm_replicates < 1) throw Error("uniformity test needs at least one replicate");
    }

    friend bool operator==(const ReductionConfig&, const ReductionConfig&) = default;
};

enum class BoundDecision { unchanged, lower_raised, upper_lowered, both };

inline std::string_view to_string(BoundDecision d) {
    switch (d) {
        case BoundDecision::unchanged: return "unchanged";
        case BoundDecision::lower_raised: return "lower-raised";
        case BoundDecision::upper_lowered: return "upper-lowered";
        case BoundDecision::both: return "both";
    }
    return "?";
}

inline std::optional<BoundDecision> parse_decision(std::string_view s) {
    if (s == "unchanged") return BoundDecision::unchanged;
    if (s == "lower-raised") return BoundDecision::lower_raised;
    if (s == "upper-lowered") return BoundDecision::upper_lowered;
    if (s == "both") return BoundDecision::both;
    return std::nullopt;
}

struct ParameterReduction {
    std::string name;
    double default_lower = 0.0;
    double default_upper = 1.0;
    double lower = 0.0;
    double upper = 1.0;
    BoundDecision decision = BoundDecision::unchanged;
    double p_dm = std::numeric_limits<double>::quiet_NaN();
    double p_w = std::numeric_limits<double>::quiet_NaN();
    double median = std::numeric_limits<double>::quiet_NaN();  // unit scale
};

/// Per-task reduced ranges plus how they were obtained.
struct ReducedBounds {
    std::string task;
    std::vector<ParameterReduction> params;
    std::vector<int> source_runs;
    std::size_t iterations_total = 0;
    std::size_t iterations_used = 0;
    ReductionConfig config;
    std::uint64_t seed = 0;
    bool insufficient_data = false;

    std::vector<ParameterBound> bounds() const {
        std::vector<ParameterBound> out;
        out.reserve(params.size());
        for (const auto& p : params) out.push_back({p.name, p.lower, p.upper});
        return out;
    }

    std::string serialize() const {
        std::ostringstream os;
        os << "reduced_bounds " << task << '\n';
        os << "runs";
        for (int r : source_runs) os << ' ' << r;
        os << '\n';
        os << "iterations " << iterations_total << ' ' << iterations_used << '\n';
        os << "insufficient_data " << (insufficient_data ? 1 : 0) << '\n';
        os << "seed " << seed << '\n';
        os << "config " << text::format_exact(config.best_fraction) << ' ' << text::format_exact(config.alpha_dm) << ' '
           << text::format_exact(config.alpha_w) << ' ' << text::format_exact(config.lo_percentile) << ' '
           << text::format_exact(config.hi_percentile) << ' ' << config.min_iterations << ' '
           << config.dm_replicates << ' ' << text::format_exact(config.min_unit_width) << '\n';
        for (const auto& p : params) {
            os << "param " << p.name << ' ' << text::format_exact(p.default_lower) << ' '
               << text::format_exact(p.default_upper) << ' ' << text::format_exact(p.lower) << ' '
               << text::format_exact(p.upper) << ' ' << to_string(p.decision) << ' ' << text::format_exact(p.p_dm)
               << ' ' << text::format_exact(p.p_w) << ' ' << text::format_exact(p.median) << '\n';
        }
        return os.str();
    }

    static ReducedBounds parse(std::string_view body, const std::string& source = "<reduced_bounds>") {
        ReducedBounds rb;
        bool header = false;
        std::size_t line_no = 0;
        auto num = [&](std::string_view s) {
            if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
            auto v = text::parse_double(s);
            if (!v) throw ParseError(source, line_no, "bad number '" + std::string(s) + "'");
            return *v;
        };
        auto count = [&](std::string_view s) {
            auto v = text::parse_int<std::uint64_t>(s);
            if (!v) throw ParseError(source, line_no, "bad integer '" + std::string(s) + "'");
            return *v;
        };
        for (auto line : text::split(body, '\n')) {
            ++line_no;
            auto f = text::split_ws(line);
            if (f.empty() || f[0].front() == '#') continue;
            if (f[0] == "reduced_bounds" && f.size() == 2) {
                rb.task = std::string(f[1]);
                header = true;
            } else if (f[0] == "runs") {
                for (std::size_t i = 1; i < f.size(); ++i) {
                    auto v = text::parse_int<int>(f[i]);
                    if (!v) throw ParseError(source, line_no, "bad run id");
                    rb.source_runs.push_back(*v);
                }
            } else if (f[0] == "iterations" && f.size() == 3) {
                rb.iterations_total = count(f[1]);
                rb.iterations_used = count(f[2]);
            } else if (f[0] == "insufficient_data" && f.size() == 2) {
                rb.insufficient_data = f[1] == "1";
            } else if (f[0] == "seed" && f.size() == 2) {
                rb.seed = count(f[1]);
            } else if (f[0] == "config" && f.size() == 9) {
                rb.config.best_fraction = num(f[1]);
                rb.config.alpha_dm = num(f[2]);
                rb.config.alpha_w = num(f[3]);
                rb.config.lo_percentile = num(f[4]);
                rb.config.hi_percentile = num(f[5]);
                rb.config.min_iterations = count(f[6]);
                rb.config.dm_replicates = count(f[7]);
                rb.config.min_unit_width = num(f[8]);
            } else if (f[0] == "param" && f.size() == 10) {
                ParameterReduction p;
                p.name = std::string(f[1]);
                p.default_lower = num(f[2]);
                p.default_upper = num(f[3]);
                p.lower = num(f[4]);
                p.upper = num(f[5]);
                auto d = parse_decision(f[6]);
                if (!d) throw ParseError(source, line_no, "unknown decision '" + std::string(f[6]) + "'");
                p.decision = *d;
                p.p_dm = num(f[7]);
                p.p_w = num(f[8]);
                p.median = num(f[9]);
                rb.params.push_back(std::move(p));
            } else {
                throw ParseError(source, line_no, "unrecognized line");
            }
        }
        if (!header) throw ParseError(source, 0, "missing 'reduced_bounds' header");
        if (rb.params.empty()) throw ParseError(source, 0, "no parameters");
        return rb;
    }
};

/// Table-style report: one `name lo:hi → lo':hi' decision` row per parameter.
inline std::string format_bounds_report(const ReducedBounds& rb) {
    std::string out;
    for (const auto& p : rb.params) {
        out += p.name;
        out += ' ';
        out += text::format_compact(p.default_lower) + ':' + text::format_compact(p.default_upper);
        out += " → ";
        out += text::format_compact(p.lower) + ':' + text::format_compact(p.upper);
        out += ' ';
        out += to_string(p.decision);
        out += '\n';
    }
    return out;
}

/// The space narrowed to the reduced ranges.
inline ParameterSpace restrict(const ParameterSpace& space, const ReducedBounds& rb) {
    return space.restrict(rb.bounds(), space.name() + "@" + rb.task);
}

}  // namespace metabo
