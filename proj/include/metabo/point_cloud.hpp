#pragma once

#include <array>
#include <cmath>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "metabo/error.hpp"
#include "metabo/text.hpp"

namespace metabo {

using Point3 = std::array<double, 3>;
using PointCloud = std::vector<Point3>;

/// `x y z` per line; blank lines and `#` comments are skipped.
inline PointCloud parse_xyz(std::string_view body, const std::string& source = "<cloud>") {
    PointCloud cloud;
    std::size_t line_no = 0;
    for (auto line : text::split(body, '\n')) {
        ++line_no;
        if (auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
        auto f = text::split_ws(line);
        if (f.empty()) continue;
        if (f.size() != 3) throw ParseError(source, line_no, "expected 3 coordinates, got " + std::to_string(f.size()));
        Point3 p{};
        for (std::size_t k = 0; k < 3; ++k) {
            auto v = text::parse_double(f[k]);
            if (!v || !std::isfinite(*v)) throw ParseError(source, line_no, "bad coordinate '" + std::string(f[k]) + "'");
            p[k] = *v;
        }
        cloud.push_back(p);
    }
    return cloud;
}

inline std::string format_xyz(const PointCloud& cloud) {
    std::string out;
    out.reserve(cloud.size() * 48);
    for (const auto& p : cloud) {
        out += text::format_exact(p[0]);
        out += ' ';
        out += text::format_exact(p[1]);
        out += ' ';
        out += text::format_exact(p[2]);
        out += '\n';
    }
    return out;
}

}  // namespace metabo
