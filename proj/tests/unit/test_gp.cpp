#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "metabo/gp.hpp"
#include "oracles.hpp"

using namespace metabo;

namespace {

Eigen::MatrixXd to_eigen(const std::vector<std::vector<double>>& xs) {
    Eigen::MatrixXd X(static_cast<Eigen::Index>(xs.size()), static_cast<Eigen::Index>(xs[0].size()));
    for (std::size_t i = 0; i < xs.size(); ++i)
        for (std::size_t j = 0; j < xs[0].size(); ++j) X(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = xs[i][j];
    return X;
}

Eigen::VectorXd to_eigen(const std::vector<double>& ys) {
    return Eigen::Map<const Eigen::VectorXd>(ys.data(), static_cast<Eigen::Index>(ys.size()));
}

GpHyperParams hyper(double s, std::vector<double> ls, double noise, double mean = 0.0) {
    GpHyperParams h;
    h.signal_variance = s;
    h.lengthscales = std::move(ls);
    h.noise_variance = noise;
    h.prior_mean = mean;
    return h;
}

}  // namespace

TEST(Matern32, ClosedFormValues) {
    const auto h = hyper(1.0, {1.0}, 0.0);
    const std::vector<double> a{0.0}, b{1.0};
    EXPECT_NEAR(matern32(a, b, h), (1.0 + std::sqrt(3.0)) * std::exp(-std::sqrt(3.0)), 1e-15);
    EXPECT_NEAR(matern32(a, b, h), 0.48336, 5e-6);
    EXPECT_EQ(matern32(a, a, hyper(2.5, {0.3}, 0.0)), 2.5);
    EXPECT_LT(matern32(std::vector<double>{0.0}, std::vector<double>{1e4}, h), 1e-300);
    EXPECT_THROW(matern32(a, std::vector<double>{0.0, 1.0}, h), Error);
}

TEST(GpPosterior, PriorWithoutData) {
    const GpModel g = GpModel::prior(hyper(1.7, {0.5, 0.5}, 0.1, 0.3), 2);
    const auto p = g.posterior(std::vector<double>{0.2, 0.9});
    EXPECT_EQ(p.mean, 0.3);
    EXPECT_EQ(p.variance, 1.7);
}

TEST(GpPosterior, SinglePointClosedForm) {
    const double s = 2.0, t = 0.5, mu = 0.25, y0 = 1.5;
    Eigen::MatrixXd X(1, 2);
    X << 0.3, 0.6;
    Eigen::VectorXd y(1);
    y << y0;
    const GpModel g(hyper(s, {0.4, 0.7}, t, mu), X, y);
    const auto p = g.posterior(std::vector<double>{0.3, 0.6});
    const double jit = g.jitter();
    EXPECT_NEAR(p.mean, mu + s / (s + t + jit) * (y0 - mu), 1e-12);
    EXPECT_NEAR(p.mean, mu + s / (s + t) * (y0 - mu), 1e-9);
}

TEST(GpPosterior, MatchesDenseOracle) {
    std::mt19937_64 rng(123);
    std::uniform_real_distribution<double> u(0, 1);
    for (int ds = 0; ds < 50; ++ds) {
        const std::size_t n = 2 + rng() % 7, m = 1 + rng() % 4;
        std::vector<std::vector<double>> xs(n, std::vector<double>(m));
        std::vector<double> ys(n);
        for (auto& x : xs)
            for (auto& v : x) v = u(rng);
        for (auto& v : ys) v = 2.0 * u(rng) - 1.0;
        std::vector<double> ls(m);
        for (auto& l : ls) l = 0.1 + u(rng);
        const auto h = hyper(0.5 + u(rng), ls, 0.01 + 0.2 * u(rng), u(rng) - 0.5);
        const GpModel g(h, to_eigen(xs), to_eigen(ys));
        oracle::DenseGp o{h.signal_variance, ls, h.noise_variance, h.prior_mean, g.jitter()};
        for (int probe = 0; probe < 20; ++probe) {
            std::vector<double> x(m);
            for (auto& v : x) v = u(rng);
            const auto [om, ov] = o.posterior(xs, ys, x);
            const auto p = g.posterior(x);
            EXPECT_NEAR(p.mean, om, 1e-8);
            EXPECT_NEAR(p.variance, std::max(ov, 0.0), 1e-8);
        }
    }
}

TEST(GpPosterior, NoiseFreeInterpolation) {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> u(0, 1);
    for (int ds = 0; ds < 20; ++ds) {
        const std::size_t n = 6, m = 3;
        std::vector<std::vector<double>> xs(n, std::vector<double>(m));
        std::vector<double> ys(n);
        for (auto& x : xs)
            for (auto& v : x) v = u(rng);
        for (auto& v : ys) v = u(rng);
        const auto h = hyper(1.3, {0.3, 0.4, 0.5}, 0.0, 0.5);
        const GpModel g(h, to_eigen(xs), to_eigen(ys));
        for (std::size_t i = 0; i < n; ++i) {
            const auto p = g.posterior(xs[i]);
            EXPECT_NEAR(p.mean, ys[i], 1e-6);
            EXPECT_LE(p.variance, 1e-6 * h.signal_variance);
        }
    }
}

TEST(GpPosterior, NoiseFreeInterpolationWithClosePoints) {
    // ill-conditioned: the 1e-10 jitter alone would leave a residual near 1e-5 here
    const std::vector<std::vector<double>> xs{{0.10}, {0.1005}, {0.40}, {0.41}, {0.70}, {0.95}};
    const std::vector<double> ys{-0.8, 0.9, 0.3, -0.6, 0.5, -0.2};
    const auto h = hyper(1.0, {0.9}, 0.0, 0.0);
    const GpModel g(h, to_eigen(xs), to_eigen(ys));
    for (std::size_t i = 0; i < xs.size(); ++i) EXPECT_NEAR(g.posterior(xs[i]).mean, ys[i], 1e-6) << i;
}

TEST(GpPosterior, VarianceBoundedAndPermutationInvariant) {
    std::mt19937_64 rng(8);
    std::uniform_real_distribution<double> u(0, 1);
    std::vector<std::vector<double>> xs(8, std::vector<double>(2));
    std::vector<double> ys(8);
    for (auto& x : xs)
        for (auto& v : x) v = u(rng);
    for (auto& v : ys) v = u(rng);
    const auto h = hyper(0.8, {0.2, 0.6}, 0.05, 0.1);
    const GpModel g(h, to_eigen(xs), to_eigen(ys));
    std::vector<std::size_t> perm{3, 1, 7, 0, 5, 2, 6, 4};
    std::vector<std::vector<double>> xp;
    std::vector<double> yp;
    for (auto i : perm) {
        xp.push_back(xs[i]);
        yp.push_back(ys[i]);
    }
    const GpModel gp(h, to_eigen(xp), to_eigen(yp));
    for (int probe = 0; probe < 100; ++probe) {
        std::vector<double> x{u(rng), u(rng)};
        const auto a = g.posterior(x), b = gp.posterior(x);
        EXPECT_GE(a.variance, 0.0);
        EXPECT_LE(a.variance, h.signal_variance + 1e-9);
        EXPECT_NEAR(a.mean, b.mean, 1e-10);
        EXPECT_NEAR(a.variance, b.variance, 1e-10);
    }
}

TEST(GpPosterior, DuplicatePointsNeedJitter) {
    Eigen::MatrixXd X(3, 1);
    X << 0.5, 0.5, 0.5;
    Eigen::VectorXd y(3);
    y << 1.0, 1.0, 1.0;
    const GpModel g(hyper(1.0, {0.3}, 0.0), X, y);
    EXPECT_GT(g.jitter(), 0.0);
    EXPECT_LE(g.jitter(), 1e-6);
    EXPECT_NEAR(g.posterior(std::vector<double>{0.5}).mean, 1.0, 1e-6);
}

TEST(GpModel, ValidatesInputs) {
    Eigen::MatrixXd X(2, 1);
    X << 0.1, 0.2;
    Eigen::VectorXd y(3);
    y << 1, 2, 3;
    EXPECT_THROW(GpModel(hyper(1.0, {0.3}, 0.0), X, y), Error);
    Eigen::VectorXd y2(2);
    y2 << 1, 2;
    EXPECT_THROW(GpModel(hyper(-1.0, {0.3}, 0.0), X, y2), Error);
    EXPECT_THROW(GpModel(hyper(1.0, {0.3, 0.2}, 0.0), X, y2), Error);
    EXPECT_THROW(GpModel(hyper(1.0, {0.3}, -0.1), X, y2), Error);
}

TEST(GpFit, ConstantTargetsAreDegenerate) {
    Eigen::MatrixXd X(4, 2);
    X << 0.1, 0.2, 0.4, 0.9, 0.7, 0.3, 0.95, 0.5;
    Eigen::VectorXd y = Eigen::VectorXd::Zero(4);
    const GpFitResult r = fit_gp(X, y);
    EXPECT_TRUE(r.degenerate);
    EXPECT_LE(r.model.hyper().noise_variance, 1e-6 * (1.0 + 1e-9));  // floor, up to exp(log()) rounding
    std::mt19937_64 rng(2);
    std::uniform_real_distribution<double> u(0, 1);
    for (int probe = 0; probe < 50; ++probe) {
        const auto p = r.model.posterior(std::vector<double>{u(rng), u(rng)});
        EXPECT_NEAR(p.mean, 0.0, 1e-12);
        EXPECT_LE(p.variance, r.model.hyper().signal_variance + 1e-12);
    }
}

TEST(GpFit, LeaveOneOutBeatsGlobalMean) {
    const std::size_t n = 8;
    std::vector<double> xs(n), ys(n);
    for (std::size_t i = 0; i < n; ++i) {
        xs[i] = (static_cast<double>(i) + 0.5) / static_cast<double>(n);
        ys[i] = std::sin(6.0 * xs[i]) + 0.5 * xs[i];
    }
    double err_gp = 0.0, err_mean = 0.0;
    for (std::size_t out = 0; out < n; ++out) {
        Eigen::MatrixXd X(static_cast<Eigen::Index>(n - 1), 1);
        Eigen::VectorXd y(static_cast<Eigen::Index>(n - 1));
        double mean = 0.0;
        Eigen::Index r = 0;
        for (std::size_t i = 0; i < n; ++i) {
            if (i == out) continue;
            X(r, 0) = xs[i];
            y(r) = ys[i];
            mean += ys[i];
            ++r;
        }
        mean /= static_cast<double>(n - 1);
        GpFitOptions o;
        o.seed = out;
        const GpFitResult f = fit_gp(X, y, o);
        err_gp += std::pow(f.model.posterior(std::vector<double>{xs[out]}).mean - ys[out], 2);
        err_mean += std::pow(mean - ys[out], 2);
    }
    EXPECT_LT(err_gp, err_mean);
}

TEST(GpFit, LikelihoodBeatsRandomHyperparameters) {
    Eigen::MatrixXd X(2, 1);
    X << 0.2, 0.7;
    Eigen::VectorXd y(2);
    y << -0.4, 1.1;
    GpFitOptions o;
    o.seed = 5;
    const GpFitResult f = fit_gp(X, y, o);
    const double best = f.model.log_marginal_likelihood();
    const double mean = y.mean();
    const double var = (y.array() - mean).square().mean();
    std::mt19937_64 rng(17);
    std::uniform_real_distribution<double> u(0, 1);
    for (int k = 0; k < 20; ++k) {
        // draws from the same search box, expressed in target units
        const double l = std::exp(std::log(0.05) + u(rng) * (std::log(10.0) - std::log(0.05)));
        const double s = std::exp(std::log(1e-4) + u(rng) * (std::log(25.0 + 1e-4) - std::log(1e-4))) * var;
        const double t = std::exp(std::log(1e-6) + u(rng) * (std::log(1.0 + 1e-6) - std::log(1e-6))) * var;
        const GpModel g(hyper(s, {l}, t, mean), X, y);
        EXPECT_GE(best, g.log_marginal_likelihood() - 1e-9);
    }
}

TEST(GpFit, DeterministicAndValidated) {
    Eigen::MatrixXd X(5, 2);
    X << 0.1, 0.2, 0.4, 0.9, 0.7, 0.3, 0.95, 0.5, 0.2, 0.6;
    Eigen::VectorXd y(5);
    y << 0.3, -0.2, 0.8, 0.1, 0.5;
    GpFitOptions o;
    o.seed = 3;
    const auto a = fit_gp(X, y, o), b = fit_gp(X, y, o);
    EXPECT_EQ(a.model.hyper().lengthscales, b.model.hyper().lengthscales);
    EXPECT_EQ(a.model.hyper().noise_variance, b.model.hyper().noise_variance);
    EXPECT_THROW(fit_gp(X.topRows(1), y.head(1)), Error);
    Eigen::MatrixXd bad = X;
    bad(0, 0) = 1.5;
    EXPECT_THROW(fit_gp(bad, y), Error);
}

TEST(GpFit, HyperparametersInsideSearchBox) {
    std::mt19937_64 rng(21);
    std::uniform_real_distribution<double> u(0, 1);
    Eigen::MatrixXd X(12, 3);
    Eigen::VectorXd y(12);
    for (Eigen::Index i = 0; i < 12; ++i) {
        for (Eigen::Index j = 0; j < 3; ++j) X(i, j) = u(rng);
        y(i) = 10.0 * X(i, 0) + u(rng);
    }
    const auto f = fit_gp(X, y);
    const double var = (y.array() - y.mean()).square().mean();
    const auto& h = f.model.hyper();
    for (double l : h.lengthscales) {
        EXPECT_GE(l, 0.05 * (1 - 1e-12));
        EXPECT_LE(l, 10.0 * (1 + 1e-12));
    }
    EXPECT_GE(h.signal_variance, 1e-4 * var * (1 - 1e-12));
    EXPECT_LE(h.signal_variance, (25.0 + 1e-4) * var * (1 + 1e-12));
    EXPECT_GE(h.noise_variance, 1e-6 * var * (1 - 1e-12));
    EXPECT_LE(h.noise_variance, (1.0 + 1e-6) * var * (1 + 1e-12));
    EXPECT_DOUBLE_EQ(h.prior_mean, y.mean());
}
