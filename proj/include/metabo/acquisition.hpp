#pragma once

// Infill criteria over a GP posterior, minimization orientation.

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <vector>

#include "metabo/error.hpp"
#include "metabo/gp.hpp"
#include "metabo/normal.hpp"

namespace metabo {

struct AcquisitionConfig {
    double beta = 0.65;        // quantile level
    double tau_future = 0.0;   // noise sd expected on the next evaluation

    void validate() const {
        if (!(beta >= 0.5 && beta < 1.0)) throw Error("quantile level beta must lie in [0.5, 1)");
        if (!(tau_future >= 0.0)) throw Error("future noise sd must be non-negative");
    }
};

inline double quantile_from_moments(double mean, double sd, double beta) {
    return mean + normal::quantile(beta) * sd;
}

inline double quantile(const GpModel& model, std::span<const double> x, double beta) {
    const Posterior p = model.posterior(x);
    return quantile_from_moments(p.mean, p.sd(), beta);
}

/// Smallest beta-quantile over already evaluated points: the EQI incumbent.
inline double q_min(const GpModel& model, std::span<const std::vector<double>> evaluated, double beta) {
    if (evaluated.empty()) throw Error("q_min needs at least one evaluated point");
    double best = std::numeric_limits<double>::infinity();
    for (const auto& x : evaluated) best = std::min(best, quantile(model, x, beta));
    return best;
}

/// Expected improvement of `incumbent - Y` with Y ~ N(mean, sd^2).
inline double expected_improvement_from_moments(double mean, double sd, double incumbent) {
    const double gap = incumbent - mean;
    if (!(sd > 0.0)) return std::max(gap, 0.0);
    const double z = gap / sd;
    return std::max(0.0, gap * normal::cdf(z) + sd * normal::pdf(z));
}

inline double expected_improvement(const GpModel& model, std::span<const double> x, double incumbent) {
    const Posterior p = model.posterior(x);
    return expected_improvement_from_moments(p.mean, p.sd(), incumbent);
}

/// Mean and sd of the kriging quantile after one more observation with noise variance tau^2 at x.
struct QuantileMoments {
    double mean = 0.0;
    double sd = 0.0;
};

inline QuantileMoments future_quantile_moments(double mean, double variance, const AcquisitionConfig& cfg) {
    const double s2 = std::max(variance, 0.0);
    const double t2 = cfg.tau_future * cfg.tau_future;
    const double denom = t2 + s2;
    if (!(denom > 0.0)) return {mean, 0.0};
    const double post_var = t2 * s2 / denom;
    return {mean + normal::quantile(cfg.beta) * std::sqrt(post_var), s2 / std::sqrt(denom)};
}

inline double eqi_from_moments(double mean, double variance, const AcquisitionConfig& cfg, double qmin) {
    const QuantileMoments q = future_quantile_moments(mean, variance, cfg);
    return expected_improvement_from_moments(q.mean, q.sd, qmin);
}

inline double eqi(const GpModel& model, std::span<const double> x, const AcquisitionConfig& cfg, double qmin) {
    const Posterior p = model.posterior(x);
    return eqi_from_moments(p.mean, p.variance, cfg, qmin);
}

}  // namespace metabo
