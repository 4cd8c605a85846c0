#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <span>
#include <string>
#include <tuple>
#include <vector>

#include "metabo/error.hpp"
#include "metabo/normal.hpp"
#include "metabo/rng.hpp"

namespace metabo::stats {

struct TestResult {
    double statistic = 0.0;
    double p_value = 1.0;
    std::size_t n = 0;
    std::string method;
    bool degenerate = false;
};

/// Type-7 percentile: linear interpolation at rank 1 + (n-1)q.
inline double percentile(std::span<const double> samples, double q) {
    if (samples.empty()) throw Error("percentile of an empty sample");
    if (!(q >= 0.0 && q <= 1.0)) throw Error("percentile level must lie in [0, 1]");
    std::vector<double> s(samples.begin(), samples.end());
    std::sort(s.begin(), s.end());
    const double h = static_cast<double>(s.size() - 1) * q;
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const std::size_t hi = std::min(lo + 1, s.size() - 1);
    return s[lo] + (h - static_cast<double>(lo)) * (s[hi] - s[lo]);
}

inline double median(std::span<const double> samples) { return percentile(samples, 0.5); }

namespace detail {

inline constexpr double kSpacingFloor = 1e-12;

inline double vasicek_sorted(std::span<const double> x, std::size_t w) {
    const std::size_t n = x.size();
    const double scale = static_cast<double>(n) / (2.0 * static_cast<double>(w));
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t hi = std::min(i + w, n - 1);
        const std::size_t lo = i >= w ? i - w : 0;
        sum += std::log(scale * std::max(x[hi] - x[lo], kSpacingFloor));
    }
    return sum / static_cast<double>(n);
}

}  // namespace detail

/// Vasicek m-spacing entropy estimate with window w; order-statistic indices clamp to [1, n].
inline double vasicek_entropy(std::span<const double> samples, std::size_t w) {
    const std::size_t n = samples.size();
    if (n < 3) throw InsufficientData("entropy estimate needs at least 3 samples");
    if (w < 1 || 2 * w > n) throw Error("entropy window must satisfy 1 <= w <= n/2");
    std::vector<double> s(samples.begin(), samples.end());
    std::sort(s.begin(), s.end());
    return detail::vasicek_sorted(s, w);
}

inline std::size_t default_entropy_window(std::size_t n) {
    return std::max<std::size_t>(1, static_cast<std::size_t>(std::floor(std::sqrt(static_cast<double>(n)))));
}

namespace detail {

/// Sorted null entropies for uniform samples of size n. Shared across calls with the same key.
inline std::shared_ptr<const std::vector<double>> uniform_entropy_null(std::size_t n, std::size_t w,
                                                                       std::uint64_t seed, std::size_t replicates) {
    using Key = std::tuple<std::size_t, std::size_t, std::uint64_t, std::size_t>;
    static std::mutex mu;
    static std::map<Key, std::shared_ptr<const std::vector<double>>> cache;
    const Key key{n, w, seed, replicates};
    {
        std::lock_guard lock(mu);
        if (auto it = cache.find(key); it != cache.end()) return it->second;
    }
    auto null = std::make_shared<std::vector<double>>();
    null->reserve(replicates);
    Rng rng(seed);
    std::vector<double> buf(n);
    for (std::size_t r = 0; r < replicates; ++r) {
        for (auto& v : buf) v = uniform01(rng);
        std::sort(buf.begin(), buf.end());
        null->push_back(vasicek_sorted(buf, w));
    }
    std::sort(null->begin(), null->end());
    std::lock_guard lock(mu);
    return cache.emplace(key, std::move(null)).first->second;
}

}  // namespace detail

/// Entropy-based uniformity test on [0,1]. The p-value is the Monte-Carlo left-tail probability of
/// the observed entropy under the uniform null; small p rejects uniformity.
inline TestResult dudewicz_vdm_test(std::span<const double> samples, std::uint64_t seed,
                                    std::size_t replicates = 10000) {
    const std::size_t n = samples.size();
    if (n < 5) throw InsufficientData("uniformity test needs at least 5 samples");
    if (replicates < 1) throw Error("uniformity test needs at least one null replicate");
    for (double v : samples)
        if (!(v >= 0.0 && v <= 1.0)) throw Error("uniformity test samples must lie in [0, 1]");
    const std::size_t w = default_entropy_window(n);
    const double h = vasicek_entropy(samples, w);
    const auto null = detail::uniform_entropy_null(n, w, seed, replicates);
    const auto below = static_cast<double>(std::upper_bound(null->begin(), null->end(), h) - null->begin());
    return {h, below / static_cast<double>(replicates), n, "dudewicz-van-der-meulen", false};
}

namespace detail {

struct SignedRanks {
    std::vector<double> ranks;  // midranks of |d|, nonzero deviations only
    std::vector<bool> positive;
    std::vector<std::size_t> tie_sizes;
};

inline SignedRanks signed_ranks(std::span<const double> samples, double mu0) {
    const double zero_tol = 1e-12 * std::max(1.0, std::abs(mu0));
    std::vector<double> d;
    for (double x : samples) {
        const double dev = x - mu0;
        if (std::abs(dev) > zero_tol) d.push_back(dev);
    }
    std::vector<std::size_t> idx(d.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return std::abs(d[a]) < std::abs(d[b]); });

    SignedRanks out;
    out.ranks.assign(d.size(), 0.0);
    out.positive.assign(d.size(), false);
    std::size_t i = 0;
    while (i < idx.size()) {
        std::size_t j = i + 1;
        // Magnitudes equal up to rounding noise share a midrank.
        while (j < idx.size() &&
               std::abs(d[idx[j]]) - std::abs(d[idx[i]]) <= 1e-9 * std::abs(d[idx[j]]))
            ++j;
        const double mid = 0.5 * static_cast<double>(i + 1 + j);
        for (std::size_t k = i; k < j; ++k) {
            out.ranks[idx[k]] = mid;
            out.positive[idx[k]] = d[idx[k]] > 0.0;
        }
        out.tie_sizes.push_back(j - i);
        i = j;
    }
    return out;
}

}  // namespace detail

/// One-sample Wilcoxon signed-rank test, two-sided. Exact (over all 2^n sign assignments of the
/// observed midranks) for up to 20 nonzero deviations, normal approximation with tie and
/// continuity corrections beyond.
inline TestResult wilcoxon_signed_rank(std::span<const double> samples, double mu0) {
    if (samples.empty()) throw Error("Wilcoxon test needs at least one sample");
    const detail::SignedRanks sr = detail::signed_ranks(samples, mu0);
    const std::size_t n = sr.ranks.size();
    double w_plus = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        if (sr.positive[i]) w_plus += sr.ranks[i];
    if (n == 0) return {0.0, 1.0, 0, "wilcoxon-signed-rank", true};

    if (n <= 20) {
        // Midranks are multiples of 1/2, so doubled ranks index an integer count table.
        std::vector<int> r2(n);
        int total = 0;
        for (std::size_t i = 0; i < n; ++i) {
            r2[i] = static_cast<int>(std::lround(2.0 * sr.ranks[i]));
            total += r2[i];
        }
        std::vector<double> counts(static_cast<std::size_t>(total) + 1, 0.0);
        counts[0] = 1.0;
        int reach = 0;
        for (int r : r2) {
            for (int s = reach; s >= 0; --s)
                if (counts[static_cast<std::size_t>(s)] != 0.0) counts[static_cast<std::size_t>(s + r)] += counts[static_cast<std::size_t>(s)];
            reach += r;
        }
        const int obs = static_cast<int>(std::lround(2.0 * w_plus));
        double le = 0.0, ge = 0.0;
        for (int s = 0; s <= total; ++s) {
            if (s <= obs) le += counts[static_cast<std::size_t>(s)];
            if (s >= obs) ge += counts[static_cast<std::size_t>(s)];
        }
        const double all = std::ldexp(1.0, static_cast<int>(n));
        const double p = std::min(1.0, 2.0 * std::min(le, ge) / all);
        return {w_plus, p, n, "wilcoxon-signed-rank-exact", false};
    }

    const double dn = static_cast<double>(n);
    const double mean = dn * (dn + 1.0) / 4.0;
    double var = dn * (dn + 1.0) * (2.0 * dn + 1.0) / 24.0;
    for (std::size_t t : sr.tie_sizes) {
        const double tt = static_cast<double>(t);
        var -= (tt * tt * tt - tt) / 48.0;
    }
    if (!(var > 0.0)) return {w_plus, 1.0, n, "wilcoxon-signed-rank-normal", true};
    const double z = std::max(0.0, std::abs(w_plus - mean) - 0.5) / std::sqrt(var);
    const double p = std::min(1.0, 2.0 * normal::cdf(-z));
    return {w_plus, p, n, "wilcoxon-signed-rank-normal", false};
}

}  // namespace metabo::stats
