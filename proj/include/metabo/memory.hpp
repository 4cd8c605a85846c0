#pragma once

// File-backed long-term memory:
//   <root>/episodic/<task>.log        one tab-separated line per iteration, append-only
//   <root>/procedural/<task>.<kind>   latest snapshot, replaced atomically
//   <root>/semantic/<task>.xyz        point cloud

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include "metabo/error.hpp"
#include "metabo/param_space.hpp"
#include "metabo/point_cloud.hpp"
#include "metabo/records.hpp"
#include "metabo/reduced_bounds.hpp"
#include "metabo/text.hpp"

namespace metabo {

enum class ProceduralKind { optimized_params, reduced_bounds };

inline std::string_view to_string(ProceduralKind k) {
    return k == ProceduralKind::optimized_params ? "optimized_params" : "reduced_bounds";
}

/// Best parameter set found by one run.
struct OptimizedParams {
    std::vector<std::string> names;
    ParamVector values;
    double final_score = 0.0;

    friend bool operator==(const OptimizedParams&, const OptimizedParams&) = default;
};

struct ProceduralEntry {
    std::string task;
    int run_id = 0;  // run that produced the entry
    std::variant<OptimizedParams, ReducedBounds> payload;

    ProceduralKind kind() const {
        return std::holds_alternative<OptimizedParams>(payload) ? ProceduralKind::optimized_params
                                                                : ProceduralKind::reduced_bounds;
    }
};

struct SemanticEntry {
    std::string task;
    PointCloud cloud;
};

inline constexpr const char* kMemoryRootEnv = "METABO_MEMORY_ROOT";

class MemoryStore {
public:
    explicit MemoryStore(std::filesystem::path root) : root_(std::move(root)) {
        std::error_code ec;
        for (const char* sub : {"episodic", "procedural", "semantic"}) {
            std::filesystem::create_directories(root_ / sub, ec);
            if (ec) throw IoError("cannot create memory directory " + (root_ / sub).string() + ": " + ec.message());
        }
    }

    /// Explicit flag wins, then the environment variable, then `./memory`.
    static std::filesystem::path resolve_root(const std::optional<std::string>& flag) {
        if (flag && !flag->empty()) return *flag;
        if (const char* env = std::getenv(kMemoryRootEnv); env && *env) return env;
        return "memory";
    }

    const std::filesystem::path& root() const noexcept { return root_; }

    // ---- episodic ----

    void record_iteration(const IterationRecord& r) {
        check_label(r.task);
        if (!std::isfinite(r.score) || r.score < 0.0 || r.score > 1.0)
            throw Error("iteration score must be finite and in [0, 1]");
        std::lock_guard lock(mu_);
        auto& keys = keys_for(r.task);
        const std::pair<int, int> key{r.run_id, r.iteration};
        if (keys.count(key))
            throw Error("duplicate iteration record (" + r.task + ", run " + std::to_string(r.run_id) +
                        ", iteration " + std::to_string(r.iteration) + ")");
        std::string line = r.task + '\t' + std::to_string(r.run_id) + '\t' + std::to_string(r.iteration) + '\t' +
                           std::string(to_string(r.phase));
        for (double v : r.params) line += '\t' + text::format_exact(v);
        line += '\t' + text::format_exact(r.score) + '\n';
        std::ofstream out(episodic_path(r.task), std::ios::app | std::ios::binary);
        if (!out) throw IoError("cannot open episodic log for " + r.task);
        out.write(line.data(), static_cast<std::streamsize>(line.size()));
        out.flush();
        if (!out) throw IoError("write failed for episodic log of " + r.task);
        keys.insert(key);
    }

    /// All records of a task ordered by (run, iteration); empty for an unknown task.
    std::vector<IterationRecord> query_iterations(std::string_view task) const {
        check_label(task);
        auto recs = read_log(std::string(task));
        std::stable_sort(recs.begin(), recs.end(), [](const IterationRecord& a, const IterationRecord& b) {
            return std::pair(a.run_id, a.iteration) < std::pair(b.run_id, b.iteration);
        });
        return recs;
    }

    int next_run_id(std::string_view task) const {
        check_label(task);
        std::lock_guard lock(mu_);
        auto& keys = keys_for(std::string(task));
        return keys.empty() ? 1 : keys.rbegin()->first + 1;
    }

    std::vector<std::string> episodic_tasks() const { return list_dir("episodic", ".log"); }

    // ---- procedural ----

    void store_procedural(const ProceduralEntry& e) {
        check_label(e.task);
        std::string body;
        if (const auto* op = std::get_if<OptimizedParams>(&e.payload)) {
            if (op->names.size() != op->values.size()) throw Error("optimized params: name/value count mismatch");
            body = "optimized_params " + e.task + "\nrun " + std::to_string(e.run_id) + "\nscore " +
                   text::format_exact(op->final_score) + '\n';
            for (std::size_t i = 0; i < op->values.size(); ++i)
                body += "param " + op->names[i] + ' ' + text::format_exact(op->values[i]) + '\n';
        } else {
            body = "run " + std::to_string(e.run_id) + '\n' + std::get<ReducedBounds>(e.payload).serialize();
        }
        write_atomic(procedural_path(e.task, e.kind()), body);
    }

    /// Latest entry of the given kind, or nullopt when none was stored.
    std::optional<ProceduralEntry> load_procedural(std::string_view task, ProceduralKind kind) const {
        check_label(task);
        const auto path = procedural_path(std::string(task), kind);
        if (!std::filesystem::exists(path)) return std::nullopt;
        const std::string body = read_file(path);
        ProceduralEntry e;
        e.task = std::string(task);
        // First line is `run <id>` for reduced bounds; optimized params carry it inside.
        if (kind == ProceduralKind::reduced_bounds) {
            auto nl = body.find('\n');
            auto f = text::split_ws(std::string_view(body).substr(0, nl));
            if (f.size() != 2 || f[0] != "run") throw ParseError(path.string(), 1, "expected 'run <id>'");
            auto id = text::parse_int<int>(f[1]);
            if (!id) throw ParseError(path.string(), 1, "bad run id");
            e.run_id = *id;
            e.payload = ReducedBounds::parse(nl == std::string::npos ? std::string_view{} : std::string_view(body).substr(nl + 1),
                                             path.string());
            return e;
        }
        OptimizedParams op;
        std::size_t line_no = 0;
        for (auto line : text::split(body, '\n')) {
            ++line_no;
            auto f = text::split_ws(line);
            if (f.empty()) continue;
            if (f[0] == "optimized_params") continue;
            if (f[0] == "run" && f.size() == 2) {
                auto id = text::parse_int<int>(f[1]);
                if (!id) throw ParseError(path.string(), line_no, "bad run id");
                e.run_id = *id;
            } else if (f[0] == "score" && f.size() == 2) {
                auto v = text::parse_double(f[1]);
                if (!v) throw ParseError(path.string(), line_no, "bad score");
                op.final_score = *v;
            } else if (f[0] == "param" && f.size() == 3) {
                auto v = text::parse_double(f[2]);
                if (!v) throw ParseError(path.string(), line_no, "bad parameter value");
                op.names.emplace_back(f[1]);
                op.values.push_back(*v);
            } else {
                throw ParseError(path.string(), line_no, "unrecognized line");
            }
        }
        e.payload = std::move(op);
        return e;
    }

    // ---- semantic ----

    void store_cloud(const SemanticEntry& e) {
        check_label(e.task);
        if (e.cloud.empty()) throw Error("cannot store an empty point cloud for " + e.task);
        write_atomic(root_ / "semantic" / (e.task + ".xyz"), "# " + e.task + '\n' + format_xyz(e.cloud));
    }

    bool has_cloud(std::string_view task) const {
        check_label(task);
        return std::filesystem::exists(root_ / "semantic" / (std::string(task) + ".xyz"));
    }

    SemanticEntry load_cloud(std::string_view task) const {
        check_label(task);
        const auto path = root_ / "semantic" / (std::string(task) + ".xyz");
        if (!std::filesystem::exists(path)) throw NotFound("no point cloud stored for task '" + std::string(task) + "'");
        SemanticEntry e{std::string(task), parse_xyz(read_file(path), path.string())};
        if (e.cloud.empty()) throw ParseError(path.string(), 0, "point cloud is empty");
        return e;
    }

    /// Tasks having a semantic entry, sorted.
    std::vector<std::string> list_tasks() const { return list_dir("semantic", ".xyz"); }

private:
    static void check_label(std::string_view task) {
        if (!text::is_valid_label(task)) throw Error("invalid task label '" + std::string(task) + "'");
    }

    std::filesystem::path episodic_path(const std::string& task) const { return root_ / "episodic" / (task + ".log"); }
    std::filesystem::path procedural_path(const std::string& task, ProceduralKind k) const {
        return root_ / "procedural" / (task + "." + std::string(to_string(k)));
    }

    static std::string read_file(const std::filesystem::path& p) {
        std::ifstream in(p, std::ios::binary);
        if (!in) throw IoError("cannot read " + p.string());
        std::ostringstream ss;
        ss << in.rdbuf();
        return ss.str();
    }

    static void write_atomic(const std::filesystem::path& p, const std::string& body) {
        auto tmp = p;
        tmp += ".tmp";
        {
            std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
            if (!out) throw IoError("cannot write " + tmp.string());
            out.write(body.data(), static_cast<std::streamsize>(body.size()));
            out.flush();
            if (!out) throw IoError("write failed for " + tmp.string());
        }
        std::error_code ec;
        std::filesystem::rename(tmp, p, ec);
        if (ec) throw IoError("cannot replace " + p.string() + ": " + ec.message());
    }

    std::vector<IterationRecord> read_log(const std::string& task) const {
        const auto path = episodic_path(task);
        std::vector<IterationRecord> out;
        if (!std::filesystem::exists(path)) return out;
        const std::string body = read_file(path);
        std::size_t line_no = 0;
        for (auto line : text::split(body, '\n')) {
            ++line_no;
            if (line.empty()) continue;
            auto f = text::split(line, '\t');
            if (f.size() < 6) throw ParseError(path.string(), line_no, "too few fields");
            IterationRecord r;
            r.task = std::string(f[0]);
            auto run = text::parse_int<int>(f[1]);
            auto it = text::parse_int<int>(f[2]);
            auto ph = parse_phase(f[3]);
            if (!run || !it || !ph) throw ParseError(path.string(), line_no, "bad run, iteration or phase");
            r.run_id = *run;
            r.iteration = *it;
            r.phase = *ph;
            for (std::size_t k = 4; k + 1 < f.size(); ++k) {
                auto v = text::parse_double(f[k]);
                if (!v) throw ParseError(path.string(), line_no, "bad parameter value");
                r.params.push_back(*v);
            }
            auto s = text::parse_double(f.back());
            if (!s) throw ParseError(path.string(), line_no, "bad score");
            r.score = *s;
            out.push_back(std::move(r));
        }
        return out;
    }

    std::set<std::pair<int, int>>& keys_for(const std::string& task) const {
        auto it = keys_.find(task);
        if (it != keys_.end()) return it->second;
        std::set<std::pair<int, int>> keys;
        for (const auto& r : read_log(task)) keys.insert({r.run_id, r.iteration});
        return keys_.emplace(task, std::move(keys)).first->second;
    }

    std::vector<std::string> list_dir(const char* sub, std::string_view ext) const {
        std::vector<std::string> out;
        std::error_code ec;
        for (const auto& entry : std::filesystem::directory_iterator(root_ / sub, ec)) {
            if (!entry.is_regular_file()) continue;
            const auto name = entry.path().filename().string();
            if (name.size() > ext.size() && name.ends_with(ext)) out.push_back(name.substr(0, name.size() - ext.size()));
        }
        if (ec) throw IoError("cannot list " + (root_ / sub).string() + ": " + ec.message());
        std::sort(out.begin(), out.end());
        return out;
    }

    std::filesystem::path root_;
    mutable std::mutex mu_;
    mutable std::map<std::string, std::set<std::pair<int, int>>> keys_;
};

}  // namespace metabo
