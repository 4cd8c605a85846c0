#pragma once

// (mu/mu_w, lambda)-CMA-ES with rank-one and rank-mu covariance updates, restricted to a box.
// The search runs in box-normalized coordinates, so the initial step size is a fraction of the
// box width in every dimension.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "metabo/error.hpp"
#include "metabo/rng.hpp"

namespace metabo {

struct Box {
    std::vector<double> lower;
    std::vector<double> upper;

    static Box unit(std::size_t m) { return {std::vector<double>(m, 0.0), std::vector<double>(m, 1.0)}; }
    std::size_t dimension() const noexcept { return lower.size(); }
};

using Objective = std::function<double(std::span<const double>)>;

/// Strategy constants. Defaults follow the canonical formulation.
struct CmaConfig {
    std::size_t dimension = 1;
    std::size_t lambda = 4;
    std::size_t mu = 2;
    std::vector<double> weights;
    double mueff = 1.0;
    double cs = 0.0;
    double damps = 0.0;
    double cc = 0.0;
    double c1 = 0.0;
    double cmu = 0.0;
    double chi_n = 0.0;
    double initial_step = 0.3;  // fraction of the box width
};

inline CmaConfig default_config(std::size_t m, std::optional<std::size_t> lambda = std::nullopt) {
    if (m < 1) throw Error("CMA-ES dimension must be >= 1");
    CmaConfig c;
    const double n = static_cast<double>(m);
    c.dimension = m;
    c.lambda = lambda.value_or(4 + static_cast<std::size_t>(std::floor(3.0 * std::log(n))));
    if (c.lambda < 2) throw Error("CMA-ES population must be >= 2");
    c.mu = c.lambda / 2;
    c.weights.resize(c.mu);
    const double base = std::log((static_cast<double>(c.lambda) + 1.0) / 2.0);
    for (std::size_t i = 0; i < c.mu; ++i) c.weights[i] = base - std::log(static_cast<double>(i + 1));
    const double wsum = std::accumulate(c.weights.begin(), c.weights.end(), 0.0);
    double w2 = 0.0;
    for (auto& w : c.weights) {
        w /= wsum;
        w2 += w * w;
    }
    c.mueff = 1.0 / w2;
    c.cc = (4.0 + c.mueff / n) / (n + 4.0 + 2.0 * c.mueff / n);
    c.cs = (c.mueff + 2.0) / (n + c.mueff + 5.0);
    c.c1 = 2.0 / ((n + 1.3) * (n + 1.3) + c.mueff);
    c.cmu = std::min(1.0 - c.c1, 2.0 * (c.mueff - 2.0 + 1.0 / c.mueff) / ((n + 2.0) * (n + 2.0) + c.mueff));
    c.damps = 1.0 + 2.0 * std::max(0.0, std::sqrt((c.mueff - 1.0) / (n + 1.0)) - 1.0) + c.cs;
    c.chi_n = std::sqrt(n) * (1.0 - 1.0 / (4.0 * n) + 1.0 / (21.0 * n * n));
    return c;
}

struct CmaOptions {
    std::size_t budget = 1000;
    std::uint64_t seed = 0;
    std::optional<std::vector<double>> initial_mean;  // raw box coordinates
    std::optional<std::size_t> lambda;
    double initial_step = 0.3;
    /// Stop once sigma * sqrt(max eigenvalue) drops below this (normalized coordinates).
    double tol_x = 1e-13;
    /// Stop once the generation-best values of the last 10 + ceil(30 m / lambda) generations and
    /// the current population all lie within this range. Zero disables the check.
    double tol_fun = 1e-12;
    /// Stop after this many consecutive generations with all-equal fitness values.
    std::size_t flat_generations = 8;
};

struct CmaGeneration {
    std::size_t evaluations = 0;
    double best_value = 0.0;
    double sigma = 0.0;
};

struct CmaResult {
    std::vector<double> best_point;
    double best_value = std::numeric_limits<double>::infinity();
    std::size_t evaluations = 0;
    std::vector<CmaGeneration> history;
};

namespace detail {

inline double finite_or_inf(double v) {
    return std::isfinite(v) ? v : std::numeric_limits<double>::infinity();
}

}  // namespace detail

inline CmaResult cmaes_minimize(const Objective& f, const Box& box, const CmaOptions& opt) {
    const std::size_t m = box.dimension();
    if (m == 0 || box.upper.size() != m) throw Error("CMA-ES box is malformed");
    for (std::size_t j = 0; j < m; ++j)
        if (!(box.lower[j] < box.upper[j])) throw Error("CMA-ES box is degenerate in dimension " + std::to_string(j));

    const CmaConfig cfg = default_config(m, opt.lambda);
    if (opt.budget < cfg.lambda) throw Error("CMA-ES budget must be at least the population size");

    using Eigen::MatrixXd;
    using Eigen::VectorXd;

    const auto n = static_cast<Eigen::Index>(m);
    VectorXd lo(n), width(n);
    for (std::size_t j = 0; j < m; ++j) {
        lo(j) = box.lower[j];
        width(j) = box.upper[j] - box.lower[j];
    }
    auto to_raw = [&](const VectorXd& z, std::vector<double>& out) {
        out.resize(m);
        for (std::size_t j = 0; j < m; ++j)
            out[j] = std::clamp(lo(j) + z(j) * width(j), box.lower[j], box.upper[j]);
    };

    VectorXd mean = VectorXd::Constant(n, 0.5);
    if (opt.initial_mean) {
        if (opt.initial_mean->size() != m) throw Error("CMA-ES initial mean has wrong dimension");
        for (std::size_t j = 0; j < m; ++j)
            mean(j) = std::clamp(((*opt.initial_mean)[j] - lo(j)) / width(j), 0.0, 1.0);
    }
    double sigma = opt.initial_step;
    MatrixXd C = MatrixXd::Identity(n, n);
    MatrixXd B = MatrixXd::Identity(n, n);
    VectorXd D = VectorXd::Ones(n);
    VectorXd ps = VectorXd::Zero(n), pc = VectorXd::Zero(n);

    Rng rng(opt.seed);
    CmaResult res;
    std::vector<double> raw;

    std::vector<VectorXd> xs(cfg.lambda, VectorXd(n));
    std::vector<double> fit(cfg.lambda);
    std::vector<std::size_t> order(cfg.lambda);
    std::size_t flat_run = 0;
    std::size_t generation = 0;
    const std::size_t fun_window =
        10 + static_cast<std::size_t>(std::ceil(30.0 * static_cast<double>(m) / static_cast<double>(cfg.lambda)));
    MatrixXd BD = MatrixXd::Identity(n, n);
    VectorXd z(n);

    while (res.evaluations + cfg.lambda <= opt.budget) {
        for (std::size_t k = 0; k < cfg.lambda; ++k) {
            VectorXd x(n);
            bool inside = false;
            for (int attempt = 0; attempt < 100 && !inside; ++attempt) {
                for (Eigen::Index j = 0; j < n; ++j) z(j) = standard_normal(rng);
                x.noalias() = mean + sigma * (BD * z);
                inside = (x.array() >= 0.0).all() && (x.array() <= 1.0).all();
            }
            if (!inside) x = x.cwiseMax(0.0).cwiseMin(1.0);
            xs[k] = x;
            to_raw(x, raw);
            fit[k] = detail::finite_or_inf(f(raw));
            ++res.evaluations;
            if (fit[k] < res.best_value) {
                res.best_value = fit[k];
                res.best_point = raw;
            }
        }
        ++generation;

        std::iota(order.begin(), order.end(), std::size_t{0});
        std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return fit[a] < fit[b]; });

        VectorXd old_mean = mean;
        mean.setZero();
        for (std::size_t i = 0; i < cfg.mu; ++i) mean += cfg.weights[i] * xs[order[i]];

        const VectorXd step = (mean - old_mean) / sigma;
        const VectorXd inv_sqrt_step = B * (B.transpose() * step).cwiseQuotient(D);
        ps = (1.0 - cfg.cs) * ps + std::sqrt(cfg.cs * (2.0 - cfg.cs) * cfg.mueff) * inv_sqrt_step;
        const double ps_norm = ps.norm();
        const double hsig_den = std::sqrt(1.0 - std::pow(1.0 - cfg.cs, 2.0 * static_cast<double>(generation)));
        const bool hsig = ps_norm / hsig_den / cfg.chi_n < 1.4 + 2.0 / (static_cast<double>(m) + 1.0);
        pc = (1.0 - cfg.cc) * pc + (hsig ? std::sqrt(cfg.cc * (2.0 - cfg.cc) * cfg.mueff) : 0.0) * step;

        MatrixXd rank_mu = MatrixXd::Zero(n, n);
        for (std::size_t i = 0; i < cfg.mu; ++i) {
            const VectorXd y = (xs[order[i]] - old_mean) / sigma;
            rank_mu.noalias() += cfg.weights[i] * y * y.transpose();
        }
        C = (1.0 - cfg.c1 - cfg.cmu) * C +
            cfg.c1 * (pc * pc.transpose() + (hsig ? 0.0 : cfg.cc * (2.0 - cfg.cc)) * C) + cfg.cmu * rank_mu;
        C = 0.5 * (C + C.transpose());

        sigma *= std::exp((cfg.cs / cfg.damps) * (ps_norm / cfg.chi_n - 1.0));
        sigma = std::min(sigma, 10.0);

        Eigen::SelfAdjointEigenSolver<MatrixXd> eig(C);
        VectorXd evals = eig.eigenvalues().cwiseMax(1e-14);
        B = eig.eigenvectors();
        C = B * evals.asDiagonal() * B.transpose();
        C = 0.5 * (C + C.transpose());
        D = evals.cwiseSqrt();
        BD = B * D.asDiagonal();

        res.history.push_back({res.evaluations, fit[order[0]], sigma});

        const bool flat = std::all_of(fit.begin(), fit.end(), [&](double v) { return v == fit[0]; });
        flat_run = flat ? flat_run + 1 : 0;
        if (opt.flat_generations > 0 && flat_run >= opt.flat_generations) break;
        if (sigma * D.maxCoeff() < opt.tol_x) break;
        if (opt.tol_fun > 0.0 && res.history.size() >= fun_window) {
            double hi = fit[order.back()], lo_f = fit[order[0]];
            for (std::size_t g = res.history.size() - fun_window; g < res.history.size(); ++g) {
                hi = std::max(hi, res.history[g].best_value);
                lo_f = std::min(lo_f, res.history[g].best_value);
            }
            if (hi - lo_f < opt.tol_fun) break;
        }
    }
    if (res.best_point.empty()) to_raw(mean, res.best_point);
    return res;
}

/// Runs independent searches from the given starting means (raw box coordinates) and keeps the best.
/// Ties keep the earliest start.
inline CmaResult cmaes_minimize_restarts(const Objective& f, const Box& box,
                                         std::span<const std::vector<double>> starts, std::size_t budget_each,
                                         std::uint64_t seed, double initial_step = 0.3, double tol_fun = 1e-12) {
    if (starts.empty()) throw Error("CMA-ES restarts need at least one starting point");
    CmaResult best;
    std::size_t total = 0;
    for (std::size_t r = 0; r < starts.size(); ++r) {
        CmaOptions opt;
        opt.budget = budget_each;
        opt.seed = derive_seed(seed, {r});
        opt.initial_mean = starts[r];
        opt.initial_step = initial_step;
        opt.tol_fun = tol_fun;
        CmaResult run = cmaes_minimize(f, box, opt);
        total += run.evaluations;
        if (run.best_value < best.best_value || best.best_point.empty()) {
            best.best_value = run.best_value;
            best.best_point = std::move(run.best_point);
        }
        best.history.insert(best.history.end(), run.history.begin(), run.history.end());
    }
    best.evaluations = total;
    return best;
}

}  // namespace metabo
