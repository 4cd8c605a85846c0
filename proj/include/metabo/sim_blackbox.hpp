#pragma once

// Synthetic noisy bin-picking objective. Each task owns a latent success-probability field over
// the unit-scaled parameter box, built from Gaussian bumps that only vary along a task-specific
// subset of "sensitive" parameters. An evaluation runs 15 grasp attempts: success scores 1,
// grasp-without-deposit scores 0.5, failure 0.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numbers>
#include <numeric>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "metabo/error.hpp"
#include "metabo/param_space.hpp"
#include "metabo/point_cloud.hpp"
#include "metabo/rng.hpp"
#include "metabo/text.hpp"

namespace metabo::sim {

inline constexpr int kAttempts = 15;
inline constexpr double kPartialReward = 0.5;

enum class Difficulty { easy, medium, hard };

inline std::string_view to_string(Difficulty d) {
    switch (d) {
        case Difficulty::easy: return "easy";
        case Difficulty::medium: return "medium";
        case Difficulty::hard: return "hard";
    }
    return "?";
}

inline std::optional<Difficulty> parse_difficulty(std::string_view s) {
    if (s == "easy") return Difficulty::easy;
    if (s == "medium") return Difficulty::medium;
    if (s == "hard") return Difficulty::hard;
    return std::nullopt;
}

enum class ShapeFamily { cube, sphere, rod, disk, torus, cone, tetrahedron };

inline constexpr std::array kShapeFamilies{ShapeFamily::cube,  ShapeFamily::sphere, ShapeFamily::rod,
                                           ShapeFamily::disk,  ShapeFamily::torus,  ShapeFamily::cone,
                                           ShapeFamily::tetrahedron};

inline std::string_view to_string(ShapeFamily s) {
    switch (s) {
        case ShapeFamily::cube: return "cube";
        case ShapeFamily::sphere: return "sphere";
        case ShapeFamily::rod: return "rod";
        case ShapeFamily::disk: return "disk";
        case ShapeFamily::torus: return "torus";
        case ShapeFamily::cone: return "cone";
        case ShapeFamily::tetrahedron: return "tetrahedron";
    }
    return "?";
}

inline std::optional<ShapeFamily> parse_shape(std::string_view s) {
    for (auto f : kShapeFamilies)
        if (to_string(f) == s) return f;
    return std::nullopt;
}

/// Gaussian bump in unit coordinates. An infinite width means the bump ignores that parameter.
struct Bump {
    std::vector<double> center;
    std::vector<double> width;
    double height = 1.0;

    double value(std::span<const double> u) const {
        double r2 = 0.0;
        for (std::size_t j = 0; j < u.size(); ++j) {
            if (!std::isfinite(width[j])) continue;
            const double t = (u[j] - center[j]) / width[j];
            r2 += t * t;
        }
        return height * std::exp(-0.5 * r2);
    }
};

struct SimTask {
    std::string label;
    Difficulty difficulty = Difficulty::medium;
    ShapeFamily shape = ShapeFamily::cube;
    std::vector<Bump> bumps;
    double peak = 0.9;
    double floor = 0.1;
    double partial_fraction = 0.5;  // of the non-success mass
    double partial_cap = 0.3;
    std::uint64_t latent_seed = 0;

    std::size_t dimension() const { return bumps.empty() ? 0 : bumps.front().center.size(); }

    /// Success probability at a unit-scaled point.
    double success(std::span<const double> u) const {
        double g = 0.0;
        for (const auto& b : bumps) g = std::max(g, b.value(u));
        return std::clamp(floor + (peak - floor) * g, 0.0, 1.0);
    }

    double partial(std::span<const double> u) const { return partial_from_success(success(u)); }

    double partial_from_success(double ps) const {
        return std::clamp(std::min(partial_fraction * (1.0 - ps), partial_cap), 0.0, 1.0 - ps);
    }

    /// Expected episode score at a unit-scaled point.
    double expected_score(std::span<const double> u) const {
        const double ps = success(u);
        return ps + kPartialReward * partial_from_success(ps);
    }

    std::string serialize() const {
        std::ostringstream os;
        os << "sim_task " << label << '\n'
           << "difficulty " << to_string(difficulty) << '\n'
           << "shape " << to_string(shape) << '\n'
           << "peak " << text::format_exact(peak) << '\n'
           << "floor " << text::format_exact(floor) << '\n'
           << "partial " << text::format_exact(partial_fraction) << ' ' << text::format_exact(partial_cap) << '\n'
           << "latent_seed " << latent_seed << '\n';
        for (const auto& b : bumps) {
            os << "bump " << text::format_exact(b.height);
            for (double c : b.center) os << ' ' << text::format_exact(c);
            for (double w : b.width) os << ' ' << text::format_exact(w);
            os << '\n';
        }
        return os.str();
    }

    static SimTask parse(std::string_view body, const std::string& source = "<task>") {
        SimTask t;
        bool header = false;
        std::size_t line_no = 0;
        auto num = [&](std::string_view s) {
            auto v = text::parse_double(s);
            if (!v) throw ParseError(source, line_no, "bad number '" + std::string(s) + "'");
            return *v;
        };
        for (auto line : text::split(body, '\n')) {
            ++line_no;
            auto f = text::split_ws(line);
            if (f.empty() || f[0].front() == '#') continue;
            if (f[0] == "sim_task" && f.size() == 2) {
                t.label = std::string(f[1]);
                header = true;
            } else if (f[0] == "difficulty" && f.size() == 2) {
                auto d = parse_difficulty(f[1]);
                if (!d) throw ParseError(source, line_no, "unknown difficulty");
                t.difficulty = *d;
            } else if (f[0] == "shape" && f.size() == 2) {
                auto s = parse_shape(f[1]);
                if (!s) throw ParseError(source, line_no, "unknown shape");
                t.shape = *s;
            } else if (f[0] == "peak" && f.size() == 2) {
                t.peak = num(f[1]);
            } else if (f[0] == "floor" && f.size() == 2) {
                t.floor = num(f[1]);
            } else if (f[0] == "partial" && f.size() == 3) {
                t.partial_fraction = num(f[1]);
                t.partial_cap = num(f[2]);
            } else if (f[0] == "latent_seed" && f.size() == 2) {
                auto v = text::parse_int<std::uint64_t>(f[1]);
                if (!v) throw ParseError(source, line_no, "bad seed");
                t.latent_seed = *v;
            } else if (f[0] == "bump" && f.size() >= 4 && (f.size() - 2) % 2 == 0) {
                const std::size_t m = (f.size() - 2) / 2;
                Bump b;
                b.height = num(f[1]);
                for (std::size_t j = 0; j < m; ++j) b.center.push_back(num(f[2 + j]));
                for (std::size_t j = 0; j < m; ++j) b.width.push_back(num(f[2 + m + j]));
                if (!t.bumps.empty() && m != t.dimension()) throw ParseError(source, line_no, "bump dimension mismatch");
                t.bumps.push_back(std::move(b));
            } else {
                throw ParseError(source, line_no, "unrecognized line");
            }
        }
        if (!header) throw ParseError(source, 0, "missing 'sim_task' header");
        return t;
    }
};

struct DifficultyPreset {
    std::size_t bumps;
    std::size_t sensitive;  // parameters the field depends on
    double width_lo;
    double width_hi;
};

inline DifficultyPreset preset(Difficulty d) {
    switch (d) {
        case Difficulty::easy: return {2, 3, 0.30, 0.45};
        case Difficulty::medium: return {3, 4, 0.22, 0.32};
        case Difficulty::hard: return {4, 5, 0.17, 0.25};
    }
    return {3, 4, 0.22, 0.32};
}

/// Seeded task over `dimension` unit-scaled parameters. Bump 0 is the global optimum; the others
/// are lower distractors.
inline SimTask make_task(std::uint64_t seed, Difficulty difficulty, std::string label = {},
                         std::size_t dimension = 9) {
    const DifficultyPreset pre = preset(difficulty);
    Rng rng(derive_seed(seed, {0x5147}));
    auto uni = [&](double lo, double hi) { return lo + (hi - lo) * uniform01(rng); };

    SimTask t;
    t.label = label.empty() ? "sim-" + std::string(to_string(difficulty)) + "-" + std::to_string(seed) : std::move(label);
    t.difficulty = difficulty;
    t.latent_seed = seed;
    t.shape = kShapeFamilies[static_cast<std::size_t>(rng() % kShapeFamilies.size())];
    t.peak = uni(0.85, 0.98);
    t.floor = uni(0.05, 0.25);

    std::vector<std::size_t> dims(dimension);
    std::iota(dims.begin(), dims.end(), std::size_t{0});
    std::shuffle(dims.begin(), dims.end(), rng);
    const std::size_t n_sensitive = std::min(pre.sensitive, dimension);
    std::vector<bool> sensitive(dimension, false);
    for (std::size_t k = 0; k < n_sensitive; ++k) sensitive[dims[k]] = true;

    for (std::size_t k = 0; k < pre.bumps; ++k) {
        Bump b;
        b.height = k == 0 ? 1.0 : uni(0.45, 0.75);
        for (std::size_t j = 0; j < dimension; ++j) {
            b.center.push_back(k == 0 ? uni(0.1, 0.9) : uni(0.0, 1.0));
            b.width.push_back(sensitive[j] ? uni(pre.width_lo, pre.width_hi) : std::numeric_limits<double>::infinity());
        }
        t.bumps.push_back(std::move(b));
    }
    return t;
}

/// A "similar object": bump centers move by (1 - similarity) * delta with |delta| <= 0.25 per
/// coordinate, heights by at most (1 - similarity) * 0.1. similarity = 1 returns an identical field.
inline SimTask perturb_task(const SimTask& task, double similarity, std::uint64_t seed, std::string label = {}) {
    if (!(similarity >= 0.0 && similarity <= 1.0)) throw Error("similarity must lie in [0, 1]");
    Rng rng(derive_seed(seed, {0x9e87}));
    SimTask out = task;
    out.label = label.empty() ? task.label + "-sim" : std::move(label);
    const double amount = 1.0 - similarity;
    for (auto& b : out.bumps) {
        for (auto& c : b.center) {
            const double delta = 0.25 * (2.0 * uniform01(rng) - 1.0);
            c = std::clamp(c + amount * delta, 0.0, 1.0);
        }
        const double jitter = 0.1 * (2.0 * uniform01(rng) - 1.0);
        b.height = std::clamp(b.height + amount * jitter, 0.0, 1.0);
    }
    return out;
}

struct EpisodeResult {
    int successes = 0;
    int partials = 0;
    double score = 0.0;
};

/// 15 independent attempts with success probability ps and partial probability pp.
inline EpisodeResult simulate_episode(double ps, double pp, Rng& rng) {
    EpisodeResult r;
    for (int a = 0; a < kAttempts; ++a) {
        const double u = uniform01(rng);
        if (u < ps)
            ++r.successes;
        else if (u < ps + pp)
            ++r.partials;
    }
    r.score = (static_cast<double>(r.successes) + kPartialReward * static_cast<double>(r.partials)) / kAttempts;
    return r;
}

/// One episode at raw parameters `raw`, scaled through `space` (the task's full box).
inline EpisodeResult evaluate(const SimTask& task, const ParameterSpace& space, std::span<const double> raw,
                              Rng& rng) {
    const UnitPoint u = space.scale(raw);  // throws on out-of-bounds parameters
    if (u.size() != task.dimension()) throw Error("task dimension does not match the parameter space");
    const double ps = task.success(u);
    return simulate_episode(ps, task.partial_from_success(ps), rng);
}

/// Location of the global optimum (bump 0 center) in unit coordinates.
inline UnitPoint optimum(const SimTask& task) {
    if (task.bumps.empty()) throw Error("task has no bumps");
    return task.bumps.front().center;
}

// ---- point clouds for the synthetic objects ----

namespace detail {

inline Point3 random_unit_vector(Rng& rng) {
    while (true) {
        Point3 v{standard_normal(rng), standard_normal(rng), standard_normal(rng)};
        const double n = std::sqrt(v[0] * v[0] + v[1] * v[1] + v[2] * v[2]);
        if (n > 1e-9) return {v[0] / n, v[1] / n, v[2] / n};
    }
}

inline std::array<double, 9> random_rotation(Rng& rng) {
    // Uniform quaternion.
    const double u1 = uniform01(rng), u2 = uniform01(rng), u3 = uniform01(rng);
    const double tau = 2.0 * std::numbers::pi;
    const double a = std::sqrt(1.0 - u1), b = std::sqrt(u1);
    const double w = a * std::sin(tau * u2), x = a * std::cos(tau * u2);
    const double y = b * std::sin(tau * u3), z = b * std::cos(tau * u3);
    return {1 - 2 * (y * y + z * z), 2 * (x * y - z * w),     2 * (x * z + y * w),
            2 * (x * y + z * w),     1 - 2 * (x * x + z * z), 2 * (y * z - x * w),
            2 * (x * z - y * w),     2 * (y * z + x * w),     1 - 2 * (x * x + y * y)};
}

}  // namespace detail

/// Surface samples of a canonical object of the given family. `aspect_jitter` perturbs each
/// extent by up to that relative amount; the result is randomly rotated, scaled and translated.
inline PointCloud make_cloud(ShapeFamily family, std::uint64_t seed, std::size_t points = 2000,
                             double aspect_jitter = 0.0) {
    Rng rng(derive_seed(seed, {0xc10d}));
    auto jit = [&] { return 1.0 + aspect_jitter * (2.0 * uniform01(rng) - 1.0); };
    const double ax = jit(), ay = jit(), az = jit();
    const double pi = std::numbers::pi;
    PointCloud cloud;
    cloud.reserve(points);
    for (std::size_t i = 0; i < points; ++i) {
        Point3 p{};
        switch (family) {
            case ShapeFamily::cube: {
                const int face = static_cast<int>(rng() % 6);
                const double s = 2.0 * uniform01(rng) - 1.0, t = 2.0 * uniform01(rng) - 1.0;
                const double sign = face % 2 == 0 ? 1.0 : -1.0;
                if (face / 2 == 0) p = {sign, s, t};
                else if (face / 2 == 1) p = {s, sign, t};
                else p = {s, t, sign};
                break;
            }
            case ShapeFamily::sphere: p = detail::random_unit_vector(rng); break;
            case ShapeFamily::rod:
            case ShapeFamily::disk: {
                const double radius = family == ShapeFamily::rod ? 0.2 : 1.0;
                const double half = family == ShapeFamily::rod ? 1.5 : 0.1;
                const double side = 2.0 * pi * radius * 2.0 * half;
                const double cap = pi * radius * radius;
                const double th = 2.0 * pi * uniform01(rng);
                if (uniform01(rng) * (side + 2.0 * cap) < side) {
                    p = {radius * std::cos(th), radius * std::sin(th), half * (2.0 * uniform01(rng) - 1.0)};
                } else {
                    const double r = radius * std::sqrt(uniform01(rng));
                    p = {r * std::cos(th), r * std::sin(th), uniform01(rng) < 0.5 ? half : -half};
                }
                break;
            }
            case ShapeFamily::torus: {
                const double th = 2.0 * pi * uniform01(rng), ph = 2.0 * pi * uniform01(rng);
                const double R = 1.0, r = 0.3;
                p = {(R + r * std::cos(ph)) * std::cos(th), (R + r * std::cos(ph)) * std::sin(th), r * std::sin(ph)};
                break;
            }
            case ShapeFamily::cone: {
                const double th = 2.0 * pi * uniform01(rng);
                const double h = 2.0, r0 = 0.8;
                const double slant = pi * r0 * std::sqrt(r0 * r0 + h * h);
                const double base = pi * r0 * r0;
                if (uniform01(rng) * (slant + base) < slant) {
                    const double t = std::sqrt(uniform01(rng));  // area grows linearly toward the base
                    p = {r0 * t * std::cos(th), r0 * t * std::sin(th), h * (1.0 - t)};
                } else {
                    const double r = r0 * std::sqrt(uniform01(rng));
                    p = {r * std::cos(th), r * std::sin(th), 0.0};
                }
                break;
            }
            case ShapeFamily::tetrahedron: {
                static constexpr std::array<Point3, 4> v{{{1, 1, 1}, {1, -1, -1}, {-1, 1, -1}, {-1, -1, 1}}};
                const auto face = static_cast<std::size_t>(rng() % 4);
                const Point3& a = v[face];
                const Point3& b = v[(face + 1) % 4];
                const Point3& c = v[(face + 2) % 4];
                double s = uniform01(rng), t = uniform01(rng);
                if (s + t > 1.0) {
                    s = 1.0 - s;
                    t = 1.0 - t;
                }
                for (std::size_t k = 0; k < 3; ++k) p[k] = a[k] + s * (b[k] - a[k]) + t * (c[k] - a[k]);
                break;
            }
        }
        cloud.push_back({p[0] * ax, p[1] * ay, p[2] * az});
    }
    const auto rot = detail::random_rotation(rng);
    const double scale = 0.5 + 1.5 * uniform01(rng);
    const Point3 shift{uniform01(rng), uniform01(rng), uniform01(rng)};
    for (auto& p : cloud) {
        const Point3 q{rot[0] * p[0] + rot[1] * p[1] + rot[2] * p[2], rot[3] * p[0] + rot[4] * p[1] + rot[5] * p[2],
                       rot[6] * p[0] + rot[7] * p[1] + rot[8] * p[2]};
        p = {scale * q[0] + shift[0], scale * q[1] + shift[1], scale * q[2] + shift[2]};
    }
    return cloud;
}

}  // namespace metabo::sim
