#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numeric>
#include <span>
#include <vector>

#include "metabo/error.hpp"
#include "metabo/rng.hpp"

namespace metabo {

/// n x m sample matrix in the unit cube, row-major.
class DesignMatrix {
public:
    DesignMatrix() = default;
    DesignMatrix(std::size_t n, std::size_t m) : n_(n), m_(m), data_(n * m, 0.0) {}

    std::size_t rows() const noexcept { return n_; }
    std::size_t cols() const noexcept { return m_; }

    double& operator()(std::size_t i, std::size_t j) { return data_[i * m_ + j]; }
    double operator()(std::size_t i, std::size_t j) const { return data_[i * m_ + j]; }

    std::span<const double> row(std::size_t i) const { return {data_.data() + i * m_, m_}; }
    std::vector<double> row_vector(std::size_t i) const { return {row(i).begin(), row(i).end()}; }

    friend bool operator==(const DesignMatrix&, const DesignMatrix&) = default;

private:
    std::size_t n_ = 0;
    std::size_t m_ = 0;
    std::vector<double> data_;
};

/// One random Latin hypercube: a random stratum permutation per column, uniform jitter inside strata.
inline DesignMatrix random_lhs(std::size_t n, std::size_t m, Rng& rng) {
    DesignMatrix d(n, m);
    std::vector<std::size_t> perm(n);
    const double dn = static_cast<double>(n);
    for (std::size_t j = 0; j < m; ++j) {
        std::iota(perm.begin(), perm.end(), std::size_t{0});
        std::shuffle(perm.begin(), perm.end(), rng);
        for (std::size_t i = 0; i < n; ++i) {
            const double k = static_cast<double>(perm[i]);
            const double hi = std::nextafter((k + 1.0) / dn, 0.0);
            d(i, j) = std::min((k + uniform01(rng)) / dn, hi);
        }
    }
    return d;
}

inline double min_pairwise_distance(const DesignMatrix& d) {
    if (d.rows() < 2) throw Error("min_pairwise_distance needs at least two points");
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t a = 0; a + 1 < d.rows(); ++a) {
        for (std::size_t b = a + 1; b < d.rows(); ++b) {
            double s = 0.0;
            for (std::size_t j = 0; j < d.cols(); ++j) {
                const double t = d(a, j) - d(b, j);
                s += t * t;
            }
            best = std::min(best, s);
        }
    }
    return std::sqrt(best);
}

/// Maximin LHS by restart search: draws `restarts` candidates from one seeded stream and keeps the
/// first one with the largest minimum pairwise distance.
inline DesignMatrix maximin_lhs(std::size_t n, std::size_t m, std::uint64_t seed, std::size_t restarts = 100) {
    if (n < 1 || m < 1 || restarts < 1) throw Error("maximin_lhs requires n >= 1, m >= 1, restarts >= 1");
    Rng rng(seed);
    DesignMatrix best = random_lhs(n, m, rng);
    if (n < 2) return best;
    double best_dist = min_pairwise_distance(best);
    for (std::size_t r = 1; r < restarts; ++r) {
        DesignMatrix cand = random_lhs(n, m, rng);
        const double dist = min_pairwise_distance(cand);
        if (dist > best_dist) {
            best = std::move(cand);
            best_dist = dist;
        }
    }
    return best;
}

}  // namespace metabo
