#pragma once

// Shape retrieval by D2 shape distribution: the histogram of random pairwise point distances,
// divided by their mean. Invariant to rigid motion and uniform scale up to sampling noise.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "metabo/error.hpp"
#include "metabo/memory.hpp"
#include "metabo/point_cloud.hpp"
#include "metabo/rng.hpp"

namespace metabo {

struct DescriptorConfig {
    std::size_t bins = 64;
    std::size_t pair_samples = 100000;
    std::uint64_t seed = 0xD2D2D2D2ULL;
    double support = 3.0;  // histogram covers [0, support] of normalized distances
};

struct ShapeDescriptor {
    std::vector<double> histogram;
    double normalization = 1.0;  // mean sampled pair distance
};

inline ShapeDescriptor descriptor(std::span<const Point3> cloud, const DescriptorConfig& cfg = {}) {
    if (cloud.size() < 4) throw Error("shape descriptor needs at least 4 points");
    if (cfg.bins < 1 || cfg.pair_samples < 1) throw Error("shape descriptor needs bins >= 1 and pair_samples >= 1");

    PointCloud sorted(cloud.begin(), cloud.end());
    std::sort(sorted.begin(), sorted.end());
    if (sorted.front() == sorted.back()) throw Error("shape descriptor: cloud has zero diameter");

    Rng rng(cfg.seed);
    std::uniform_int_distribution<std::size_t> pick(0, sorted.size() - 1);
    std::vector<double> dist;
    dist.reserve(cfg.pair_samples);
    double sum = 0.0;
    while (dist.size() < cfg.pair_samples) {
        const std::size_t a = pick(rng);
        const std::size_t b = pick(rng);
        if (a == b) continue;
        const double dx = sorted[a][0] - sorted[b][0];
        const double dy = sorted[a][1] - sorted[b][1];
        const double dz = sorted[a][2] - sorted[b][2];
        const double d = std::sqrt(dx * dx + dy * dy + dz * dz);
        dist.push_back(d);
        sum += d;
    }
    const double mean = sum / static_cast<double>(dist.size());
    if (!(mean > 0.0)) throw Error("shape descriptor: sampled pairs are all coincident");

    ShapeDescriptor out;
    out.normalization = mean;
    out.histogram.assign(cfg.bins, 0.0);
    const double per_bin = static_cast<double>(cfg.bins) / cfg.support;
    for (double d : dist) {
        auto k = static_cast<std::size_t>(d / mean * per_bin);
        out.histogram[std::min(k, cfg.bins - 1)] += 1.0;
    }
    for (auto& h : out.histogram) h /= static_cast<double>(dist.size());
    return out;
}

inline double descriptor_distance(const ShapeDescriptor& a, const ShapeDescriptor& b) {
    if (a.histogram.size() != b.histogram.size()) throw Error("descriptor bin counts differ");
    double s = 0.0;
    for (std::size_t i = 0; i < a.histogram.size(); ++i) {
        const double t = a.histogram[i] - b.histogram[i];
        s += t * t;
    }
    return std::sqrt(s);
}

struct SimilarityMatch {
    std::string task;
    double distance = 0.0;
};

/// Nearest known task by descriptor distance; ties go to the lexicographically smaller label.
inline SimilarityMatch most_similar(std::span<const Point3> query, const MemoryStore& store,
                                    const DescriptorConfig& cfg = {}) {
    const auto tasks = store.list_tasks();
    if (tasks.empty()) throw NotFound("semantic memory holds no point clouds");
    const ShapeDescriptor q = descriptor(query, cfg);
    SimilarityMatch best{"", std::numeric_limits<double>::infinity()};
    for (const auto& t : tasks) {  // sorted, so strict < keeps the smallest label on ties
        const double d = descriptor_distance(q, descriptor(store.load_cloud(t).cloud, cfg));
        if (d < best.distance) best = {t, d};
    }
    return best;
}

}  // namespace metabo
