#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "metabo/param_space.hpp"

namespace metabo {

enum class Phase { initial_design, infill_eqi, final_eval };

inline std::string_view to_string(Phase p) {
    switch (p) {
        case Phase::initial_design: return "initial_design";
        case Phase::infill_eqi: return "infill_eqi";
        case Phase::final_eval: return "final_eval";
    }
    return "?";
}

inline std::optional<Phase> parse_phase(std::string_view s) {
    if (s == "initial_design") return Phase::initial_design;
    if (s == "infill_eqi") return Phase::infill_eqi;
    if (s == "final_eval") return Phase::final_eval;
    return std::nullopt;
}

/// One evaluated parameter set of one optimization run. Parameters are in raw units.
struct IterationRecord {
    std::string task;
    int run_id = 0;
    int iteration = 0;
    Phase phase = Phase::initial_design;
    ParamVector params;
    double score = 0.0;

    friend bool operator==(const IterationRecord&, const IterationRecord&) = default;
};

}  // namespace metabo
