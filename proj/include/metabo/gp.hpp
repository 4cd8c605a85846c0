#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "metabo/cmaes.hpp"
#include "metabo/error.hpp"
#include "metabo/lhs.hpp"
#include "metabo/rng.hpp"

namespace metabo {

struct GpHyperParams {
    double signal_variance = 1.0;
    std::vector<double> lengthscales;
    double noise_variance = 0.0;
    double prior_mean = 0.0;

    void validate(std::size_t m) const {
        if (!(signal_variance > 0.0)) throw Error("GP signal variance must be positive");
        if (!(noise_variance >= 0.0)) throw Error("GP noise variance must be non-negative");
        if (lengthscales.size() != m) throw Error("GP lengthscale count does not match input dimension");
        for (double l : lengthscales)
            if (!(l > 0.0)) throw Error("GP lengthscales must be positive");
    }
};

/// Matern 3/2 covariance with per-dimension lengthscales.
inline double matern32(std::span<const double> x, std::span<const double> y, const GpHyperParams& h) {
    if (x.size() != y.size() || x.size() != h.lengthscales.size()) throw Error("matern32 dimension mismatch");
    double r2 = 0.0;
    for (std::size_t j = 0; j < x.size(); ++j) {
        const double t = (x[j] - y[j]) / h.lengthscales[j];
        r2 += t * t;
    }
    const double a = std::numbers::sqrt3 * std::sqrt(r2);
    return h.signal_variance * (1.0 + a) * std::exp(-a);
}

struct Posterior {
    double mean = 0.0;
    double variance = 0.0;

    double sd() const { return std::sqrt(variance); }
};

/// Exact GP conditional on (inputs, targets) with fixed hyperparameters.
/// Immutable once built; posterior queries are safe from several threads.
class GpModel {
public:
    GpModel(GpHyperParams hyper, Eigen::MatrixXd inputs, Eigen::VectorXd targets)
        : hyper_(std::move(hyper)), x_(std::move(inputs)), y_(std::move(targets)) {
        if (x_.rows() != y_.size()) throw Error("GP input/target count mismatch");
        if (x_.rows() > 0) hyper_.validate(static_cast<std::size_t>(x_.cols()));
        const auto n = static_cast<std::size_t>(x_.rows());
        const auto m = static_cast<std::size_t>(x_.cols());
        inv_ls_.resize(hyper_.lengthscales.size());
        for (std::size_t j = 0; j < inv_ls_.size(); ++j) inv_ls_[j] = 1.0 / hyper_.lengthscales[j];
        scaled_.resize(n * m);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < m; ++j)
                scaled_[i * m + j] = x_(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) * inv_ls_[j];
        factorize();
    }

    /// Prior-only model over an m-dimensional input space.
    static GpModel prior(GpHyperParams hyper, std::size_t m) {
        return GpModel(std::move(hyper), Eigen::MatrixXd(0, static_cast<Eigen::Index>(m)), Eigen::VectorXd(0));
    }

    const GpHyperParams& hyper() const noexcept { return hyper_; }
    std::size_t size() const noexcept { return static_cast<std::size_t>(x_.rows()); }
    std::size_t dimension() const noexcept { return static_cast<std::size_t>(x_.cols()); }
    const Eigen::MatrixXd& inputs() const noexcept { return x_; }
    const Eigen::VectorXd& targets() const noexcept { return y_; }
    double jitter() const noexcept { return jitter_; }
    double log_marginal_likelihood() const noexcept { return lml_; }

    Posterior posterior(std::span<const double> x) const {
        if (x_.rows() == 0) return {hyper_.prior_mean, hyper_.signal_variance};
        const std::size_t m = dimension();
        if (x.size() != m) throw Error("GP posterior dimension mismatch");
        const auto n = static_cast<std::size_t>(x_.rows());
        double xs[64];
        std::vector<double> xs_heap;
        double* q = xs;
        if (m > 64) {
            xs_heap.resize(m);
            q = xs_heap.data();
        }
        for (std::size_t j = 0; j < m; ++j) q[j] = x[j] * inv_ls_[j];
        Eigen::VectorXd k(static_cast<Eigen::Index>(n));
        for (std::size_t i = 0; i < n; ++i) {
            const double* row = scaled_.data() + i * m;
            double r2 = 0.0;
            for (std::size_t j = 0; j < m; ++j) {
                const double t = row[j] - q[j];
                r2 += t * t;
            }
            const double a = std::numbers::sqrt3 * std::sqrt(r2);
            k(static_cast<Eigen::Index>(i)) = hyper_.signal_variance * (1.0 + a) * std::exp(-a);
        }
        const double mean = hyper_.prior_mean + k.dot(alpha_);
        llt_.matrixL().solveInPlace(k);
        const double var = std::max(0.0, hyper_.signal_variance - k.squaredNorm());
        return {mean, var};
    }

private:
    void factorize() {
        const auto n = static_cast<std::size_t>(x_.rows());
        const std::size_t m = dimension();
        if (n == 0) {
            lml_ = 0.0;
            return;
        }
        Eigen::MatrixXd K(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
        for (std::size_t a = 0; a < n; ++a) {
            const auto ia = static_cast<Eigen::Index>(a);
            K(ia, ia) = hyper_.signal_variance + hyper_.noise_variance;
            for (std::size_t b = a + 1; b < n; ++b) {
                double r2 = 0.0;
                for (std::size_t j = 0; j < m; ++j) {
                    const double t = scaled_[a * m + j] - scaled_[b * m + j];
                    r2 += t * t;
                }
                const double s = std::numbers::sqrt3 * std::sqrt(r2);
                K(ia, static_cast<Eigen::Index>(b)) = K(static_cast<Eigen::Index>(b), ia) =
                    hyper_.signal_variance * (1.0 + s) * std::exp(-s);
            }
        }
        for (double jit = 1e-10; jit <= 1e-6 * 1.0000001; jit *= 10.0) {
            Eigen::MatrixXd Kj = K;
            Kj.diagonal().array() += jit;
            llt_.compute(Kj);
            if (llt_.info() == Eigen::Success) {
                jitter_ = jit;
                const Eigen::VectorXd resid = y_.array() - hyper_.prior_mean;
                alpha_ = llt_.solve(resid);
                const double logdet = 2.0 * llt_.matrixLLT().diagonal().array().log().sum();
                lml_ = -0.5 * resid.dot(alpha_) - 0.5 * logdet -
                       0.5 * static_cast<double>(n) * std::log(2.0 * std::numbers::pi);
                // With little or no noise the jitter biases the mean by jit * alpha; refine
                // against the unjittered matrix so noise-free data is still interpolated.
                if (jit > 1e-3 * hyper_.noise_variance) refine_alpha(K, resid);
                return;
            }
        }
        throw Error("GP covariance matrix is not positive definite even with jitter 1e-6");
    }

    void refine_alpha(const Eigen::MatrixXd& K, const Eigen::VectorXd& resid) {
        Eigen::VectorXd r = resid - K * alpha_;
        double norm = r.norm();
        for (int step = 0; step < 5 && norm > 0.0; ++step) {
            const Eigen::VectorXd next = alpha_ + llt_.solve(r);
            const Eigen::VectorXd next_r = resid - K * next;
            if (!(next_r.norm() < norm)) break;
            alpha_ = next;
            r = next_r;
            norm = r.norm();
        }
    }

    GpHyperParams hyper_;
    Eigen::MatrixXd x_;
    Eigen::VectorXd y_;
    std::vector<double> inv_ls_;
    std::vector<double> scaled_;  // inputs divided by lengthscales, row-major
    Eigen::LLT<Eigen::MatrixXd> llt_;
    Eigen::VectorXd alpha_;
    double jitter_ = 0.0;
    double lml_ = 0.0;
};

/// Hyperparameter search box in standardized target units.
struct GpSearchBox {
    double lengthscale_min = 0.05;
    double lengthscale_max = 10.0;
    double signal_floor = 1e-4;
    double signal_factor = 25.0;
    double noise_floor = 1e-6;
};

struct GpFitOptions {
    std::uint64_t seed = 0;
    std::size_t restarts = 3;
    std::size_t budget_per_restart = 600;
    GpSearchBox box;
    /// Hyperparameters (in target units) used as the first restart's starting point.
    std::optional<GpHyperParams> warm_start;
};

struct GpFitResult {
    GpModel model;
    /// All targets equal: hyperparameters pinned to their floors.
    bool degenerate = false;
};

namespace detail {

// theta = (log l_1..l_m, log signal, log noise) in standardized units.
struct GpTheta {
    std::vector<double> lower;
    std::vector<double> upper;
};

inline GpTheta gp_theta_box(std::size_t m, double target_var, const GpSearchBox& b) {
    GpTheta t;
    for (std::size_t j = 0; j < m; ++j) {
        t.lower.push_back(std::log(b.lengthscale_min));
        t.upper.push_back(std::log(b.lengthscale_max));
    }
    t.lower.push_back(std::log(b.signal_floor));
    t.upper.push_back(std::log(b.signal_factor * target_var + b.signal_floor));
    t.lower.push_back(std::log(b.noise_floor));
    t.upper.push_back(std::log(target_var + b.noise_floor));
    return t;
}

inline GpHyperParams gp_theta_to_hyper(std::span<const double> theta, std::size_t m) {
    GpHyperParams h;
    h.lengthscales.resize(m);
    for (std::size_t j = 0; j < m; ++j) h.lengthscales[j] = std::exp(theta[j]);
    h.signal_variance = std::exp(theta[m]);
    h.noise_variance = std::exp(theta[m + 1]);
    h.prior_mean = 0.0;
    return h;
}

}  // namespace detail

/// Maximum-likelihood fit. Targets are standardized internally; the returned model carries
/// hyperparameters in the original target units (prior mean = target mean).
inline GpFitResult fit_gp(const Eigen::MatrixXd& inputs, const Eigen::VectorXd& targets, const GpFitOptions& opt = {}) {
    const auto n = targets.size();
    if (n < 2 || inputs.rows() != n) throw Error("GP fit needs at least two points with matching inputs");
    if (inputs.minCoeff() < 0.0 || inputs.maxCoeff() > 1.0) throw Error("GP inputs must lie in the unit cube");
    const auto m = static_cast<std::size_t>(inputs.cols());

    const double mean = targets.mean();
    const double var = (targets.array() - mean).square().sum() / static_cast<double>(n);
    const bool degenerate = !(var > 1e-300);
    const double sd = degenerate ? 1.0 : std::sqrt(var);
    const Eigen::VectorXd z = (targets.array() - mean) / sd;
    const double z_var = degenerate ? 0.0 : 1.0;

    const detail::GpTheta tb = detail::gp_theta_box(m, z_var, opt.box);
    const std::size_t dim = m + 2;
    std::vector<double> best_theta;

    if (degenerate) {
        best_theta = tb.lower;
        for (std::size_t j = 0; j < m; ++j) best_theta[j] = 0.0;  // unit lengthscales
    } else {
        auto neg_lml = [&](std::span<const double> theta) {
            try {
                GpModel g(detail::gp_theta_to_hyper(theta, m), inputs, z);
                return -g.log_marginal_likelihood();
            } catch (const Error&) {
                return std::numeric_limits<double>::infinity();
            }
        };

        std::vector<std::vector<double>> starts;
        if (opt.warm_start && opt.warm_start->lengthscales.size() == m) {
            std::vector<double> s(dim);
            for (std::size_t j = 0; j < m; ++j) s[j] = std::log(opt.warm_start->lengthscales[j]);
            s[m] = std::log(opt.warm_start->signal_variance / var);
            s[m + 1] = std::log(std::max(opt.warm_start->noise_variance / var, opt.box.noise_floor));
            for (std::size_t j = 0; j < dim; ++j) s[j] = std::clamp(s[j], tb.lower[j], tb.upper[j]);
            starts.push_back(std::move(s));
        } else {
            std::vector<double> s(dim);
            for (std::size_t j = 0; j < m; ++j) s[j] = std::log(0.5);
            s[m] = 0.0;
            s[m + 1] = std::log(0.1);
            for (std::size_t j = 0; j < dim; ++j) s[j] = std::clamp(s[j], tb.lower[j], tb.upper[j]);
            starts.push_back(std::move(s));
        }
        if (opt.restarts > 1) {
            DesignMatrix d = maximin_lhs(opt.restarts - 1, dim, derive_seed(opt.seed, {1}), 10);
            for (std::size_t r = 0; r + 1 < opt.restarts; ++r) {
                std::vector<double> s(dim);
                for (std::size_t j = 0; j < dim; ++j) s[j] = tb.lower[j] + d(r, j) * (tb.upper[j] - tb.lower[j]);
                starts.push_back(std::move(s));
            }
        }
        CmaResult best = cmaes_minimize_restarts(neg_lml, Box{tb.lower, tb.upper}, starts,
                                                 std::max(opt.budget_per_restart, default_config(dim).lambda),
                                                 derive_seed(opt.seed, {2}), 0.25);
        best_theta = best.best_point;
    }

    GpHyperParams h = detail::gp_theta_to_hyper(best_theta, m);
    h.signal_variance *= sd * sd;
    h.noise_variance *= sd * sd;
    h.prior_mean = mean;
    return {GpModel(std::move(h), inputs, targets), degenerate};
}

}  // namespace metabo
