#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include "metabo/error.hpp"
#include "metabo/text.hpp"

namespace metabo {

/// Raw-unit parameter values, ordered like the owning space.
using ParamVector = std::vector<double>;
/// Point of the unit hypercube [0,1]^m.
using UnitPoint = std::vector<double>;

struct ParameterBound {
    std::string name;
    double lower = 0.0;
    double upper = 1.0;

    double width() const noexcept { return upper - lower; }
    friend bool operator==(const ParameterBound&, const ParameterBound&) = default;
};

/// Named, ordered box of continuous parameters with affine raw <-> unit-cube scaling.
/// Immutable after construction.
class ParameterSpace {
public:
    ParameterSpace(std::string name, std::vector<ParameterBound> bounds)
        : name_(std::move(name)), bounds_(std::move(bounds)) {
        if (bounds_.empty()) throw Error("parameter space '" + name_ + "' has no parameters");
        std::unordered_set<std::string> seen;
        for (const auto& b : bounds_) {
            if (b.name.empty()) throw Error("parameter space '" + name_ + "' has an unnamed parameter");
            if (!seen.insert(b.name).second) throw BoundsError(b.name, "duplicate parameter name");
            if (!std::isfinite(b.lower) || !std::isfinite(b.upper)) throw BoundsError(b.name, "non-finite bound");
            if (!(b.lower < b.upper)) throw BoundsError(b.name, "lower bound must be strictly below upper bound");
        }
    }

    const std::string& name() const noexcept { return name_; }
    std::size_t dimension() const noexcept { return bounds_.size(); }
    std::span<const ParameterBound> bounds() const noexcept { return bounds_; }
    const ParameterBound& operator[](std::size_t i) const { return bounds_.at(i); }

    std::optional<std::size_t> index_of(std::string_view name) const {
        for (std::size_t i = 0; i < bounds_.size(); ++i)
            if (bounds_[i].name == name) return i;
        return std::nullopt;
    }

    bool contains(std::span<const double> raw) const {
        if (raw.size() != dimension()) return false;
        for (std::size_t i = 0; i < raw.size(); ++i)
            if (!(raw[i] >= bounds_[i].lower - slack(i) && raw[i] <= bounds_[i].upper + slack(i))) return false;
        return true;
    }

    UnitPoint scale(std::span<const double> raw) const {
        check_size(raw.size());
        UnitPoint u(raw.size());
        for (std::size_t i = 0; i < raw.size(); ++i) {
            const auto& b = bounds_[i];
            if (!(raw[i] >= b.lower - slack(i) && raw[i] <= b.upper + slack(i)))
                throw BoundsError(b.name, "value " + text::format_exact(raw[i]) + " outside [" +
                                              text::format_exact(b.lower) + ", " + text::format_exact(b.upper) + "]");
            u[i] = std::clamp((raw[i] - b.lower) / b.width(), 0.0, 1.0);
        }
        return u;
    }

    ParamVector unscale(std::span<const double> unit) const {
        check_size(unit.size());
        ParamVector v(unit.size());
        for (std::size_t i = 0; i < unit.size(); ++i) {
            const auto& b = bounds_[i];
            if (!(unit[i] >= 0.0 && unit[i] <= 1.0))
                throw BoundsError(b.name, "unit coordinate " + text::format_exact(unit[i]) + " outside [0, 1]");
            if (unit[i] == 0.0)
                v[i] = b.lower;
            else if (unit[i] == 1.0)
                v[i] = b.upper;
            else
                v[i] = std::clamp(b.lower + unit[i] * b.width(), b.lower, b.upper);
        }
        return v;
    }

    /// Returns a narrower space. Every reduced range must nest inside this one.
    ParameterSpace restrict(std::span<const ParameterBound> reduced, std::string new_name = {}) const {
        check_size(reduced.size());
        std::vector<ParameterBound> out;
        out.reserve(reduced.size());
        for (std::size_t i = 0; i < reduced.size(); ++i) {
            const auto& b = bounds_[i];
            const auto& r = reduced[i];
            if (r.name != b.name) throw BoundsError(r.name, "expected parameter '" + b.name + "' at this position");
            if (!(r.lower < r.upper)) throw BoundsError(b.name, "reduced range is empty or inverted");
            if (r.lower < b.lower || r.upper > b.upper) throw BoundsError(b.name, "reduced range is not nested");
            out.push_back(r);
        }
        return ParameterSpace(new_name.empty() ? name_ : std::move(new_name), std::move(out));
    }

    /// Header `space <name>` then one `name lower upper` line per parameter.
    std::string serialize() const {
        std::ostringstream os;
        os << "space " << name_ << '\n';
        for (const auto& b : bounds_)
            os << b.name << ' ' << text::format_exact(b.lower) << ' ' << text::format_exact(b.upper) << '\n';
        return os.str();
    }

    static ParameterSpace parse(std::string_view body, const std::string& source = "<space>") {
        std::string name;
        std::vector<ParameterBound> bounds;
        std::size_t line_no = 0;
        for (auto line : text::split(body, '\n')) {
            ++line_no;
            line = text::trim(line);
            if (line.empty() || line.front() == '#') continue;
            auto f = text::split_ws(line);
            if (name.empty()) {
                if (f.size() != 2 || f[0] != "space") throw ParseError(source, line_no, "expected 'space <name>'");
                name = std::string(f[1]);
                continue;
            }
            if (f.size() != 3) throw ParseError(source, line_no, "expected 'name lower upper'");
            auto lo = text::parse_double(f[1]);
            auto hi = text::parse_double(f[2]);
            if (!lo || !hi) throw ParseError(source, line_no, "bad number");
            bounds.push_back({std::string(f[0]), *lo, *hi});
        }
        if (name.empty()) throw ParseError(source, 0, "missing space header");
        return ParameterSpace(std::move(name), std::move(bounds));
    }

    friend bool operator==(const ParameterSpace& a, const ParameterSpace& b) {
        return a.bounds_ == b.bounds_;
    }

private:
    void check_size(std::size_t n) const {
        if (n != bounds_.size())
            throw Error("dimension mismatch: expected " + std::to_string(bounds_.size()) + ", got " +
                        std::to_string(n));
    }
    double slack(std::size_t i) const noexcept { return 1e-12 * bounds_[i].width(); }

    std::string name_;
    std::vector<ParameterBound> bounds_;
};

/// The nine grasping parameters with their default ranges.
inline ParameterSpace default_space() {
    return ParameterSpace("default", {{"p1", -20.0, 20.0},
                                      {"p2", 5.0, 15.0},
                                      {"p3", 16.0, 100.0},
                                      {"p4", 5.0, 30.0},
                                      {"p5", 5.0, 30.0},
                                      {"p6", 5.0, 40.0},
                                      {"p7", 30.0, 300.0},
                                      {"p8", 5.0, 20.0},
                                      {"p9", 1.0, 10.0}});
}

}  // namespace metabo
