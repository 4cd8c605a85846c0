// Acceptance checks. Prints one PASS/FAIL line per criterion and exits non-zero if any fails.
// Usage: acceptance [path-to-metabo-cli]

#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "alg1_oracle.hpp"
#include "datasets.hpp"
#include "metabo/acquisition.hpp"
#include "metabo/benchmark.hpp"
#include "metabo/bounds_reduction.hpp"
#include "metabo/cli.hpp"
#include "metabo/cmaes.hpp"
#include "metabo/gp.hpp"
#include "metabo/lhs.hpp"
#include "metabo/stats.hpp"
#include "oracles.hpp"

using namespace metabo;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Verdict {
    bool pass = false;
    std::string detail;
};

int failures = 0;

void report(int id, const std::string& name, const Verdict& v) {
    std::cout << (v.pass ? "PASS" : "FAIL") << " criterion " << id << ": " << name << " -- " << v.detail << std::endl;
    if (!v.pass) ++failures;
}

std::string fmt(double v, int prec = 4) {
    std::ostringstream os;
    os.precision(prec);
    os << v;
    return os.str();
}

// ---- 1 ----
Verdict alg1_equivalence() {
    const auto t0 = Clock::now();
    const ParameterSpace space = default_space();
    std::mt19937_64 rng(20240501);
    std::size_t mismatches = 0, reduced = 0;
    for (int d = 0; d < 100; ++d) {
        const std::size_t n = 30 + rng() % 151;
        const auto recs = oracle::synthetic_records(space, n, rng());
        const std::uint64_t seed = rng();
        const auto got = reduce_bounds_from_records("synthetic", recs, space, ReductionConfig{}, seed);
        const auto want = oracle::alg1(recs, space, oracle::Alg1Config{}, seed);
        for (std::size_t j = 0; j < want.size(); ++j) {
            const auto& p = got.params[j];
            if (std::string(to_string(p.decision)) != want[j].decision || p.lower != want[j].lower ||
                p.upper != want[j].upper)
                ++mismatches;
            reduced += want[j].decision != "unchanged";
        }
    }
    const double t = seconds_since(t0);
    return {mismatches == 0 && t < 30.0, std::to_string(mismatches) + " mismatches over 900 parameters (" +
                                             std::to_string(reduced) + " reduced), " + fmt(t, 3) + " s"};
}

// ---- 2 ----
Verdict wilcoxon_exactness() {
    std::mt19937_64 rng(77);
    double worst = 0.0;
    for (int d = 0; d < 200; ++d) {
        const std::size_t n = 1 + static_cast<std::size_t>(d % 12);
        std::vector<double> v(n);
        // Alternate continuous and coarse (tied) data.
        for (auto& x : v)
            x = d % 2 ? std::uniform_real_distribution<double>(0, 1)(rng) : static_cast<double>(rng() % 11) / 10.0;
        const double got = stats::wilcoxon_signed_rank(v, 0.5).p_value;
        worst = std::max(worst, std::abs(got - oracle::wilcoxon_enumerate(v, 0.5).p));
    }
    const double ex = stats::wilcoxon_signed_rank(std::vector<double>{0.6, 0.7, 0.8, 0.9, 0.95, 0.99}, 0.5).p_value;
    return {worst <= 1e-12 && ex == 2.0 / 64.0, "max |p - enumeration| = " + fmt(worst) + ", example p = " + fmt(ex, 17)};
}

// ---- 3 ----
Verdict dvm_calibration() {
    const auto t0 = Clock::now();
    std::mt19937_64 rng(31337);
    std::uniform_real_distribution<double> u(0, 1);
    int rejected = 0;
    for (int d = 0; d < 2000; ++d) {
        std::vector<double> v(30);
        for (auto& x : v) x = u(rng);
        rejected += stats::dudewicz_vdm_test(v, 1).p_value < 0.15;
    }
    const double rate = rejected / 2000.0;
    std::gamma_distribution<double> ga(8.0, 1.0), gb(2.0, 1.0);
    int power_hits = 0;
    const int power_sets = 500;
    for (int d = 0; d < power_sets; ++d) {
        std::vector<double> v(200);
        for (auto& x : v) {
            const double a = ga(rng), b = gb(rng);
            x = a / (a + b);
        }
        power_hits += stats::dudewicz_vdm_test(v, 1).p_value < 0.15;
    }
    const double power = static_cast<double>(power_hits) / power_sets;
    const double t = seconds_since(t0);
    return {rate >= 0.12 && rate <= 0.18 && power >= 0.95 && t < 120.0,
            "null rejection " + fmt(rate) + ", power " + fmt(power) + ", " + fmt(t, 3) + " s"};
}

// ---- 4 ----
Verdict gp_correctness() {
    std::mt19937_64 rng(4242);
    std::uniform_real_distribution<double> u(0, 1);
    double worst = 0.0, interp = 0.0;
    for (int ds = 0; ds < 50; ++ds) {
        const std::size_t n = 2 + rng() % 9, m = 1 + rng() % 5;
        Eigen::MatrixXd X(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(m));
        std::vector<std::vector<double>> xs(n, std::vector<double>(m));
        std::vector<double> ys(n);
        Eigen::VectorXd y(static_cast<Eigen::Index>(n));
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = 0; j < m; ++j) X(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = xs[i][j] = u(rng);
            y(static_cast<Eigen::Index>(i)) = ys[i] = 2.0 * u(rng) - 1.0;
        }
        GpHyperParams h;
        h.signal_variance = 0.5 + u(rng);
        for (std::size_t j = 0; j < m; ++j) h.lengthscales.push_back(0.1 + u(rng));
        h.noise_variance = 0.01 + 0.2 * u(rng);
        h.prior_mean = u(rng) - 0.5;
        const GpModel g(h, X, y);
        const oracle::DenseGp o{h.signal_variance, h.lengthscales, h.noise_variance, h.prior_mean, g.jitter()};
        for (int probe = 0; probe < 20; ++probe) {
            std::vector<double> x(m);
            for (auto& v : x) v = u(rng);
            const auto [om, ov] = o.posterior(xs, ys, x);
            const auto p = g.posterior(x);
            worst = std::max({worst, std::abs(p.mean - om), std::abs(p.variance - std::max(ov, 0.0))});
        }
        GpHyperParams h0 = h;
        h0.noise_variance = 0.0;
        const GpModel exact(h0, X, y);
        for (std::size_t i = 0; i < n; ++i) {
            const auto p = exact.posterior(xs[i]);
            interp = std::max({interp, std::abs(p.mean - ys[i]), p.variance / h.signal_variance});
        }
    }
    return {worst <= 1e-8 && interp <= 1e-6,
            "max posterior deviation " + fmt(worst) + ", interpolation residual " + fmt(interp)};
}

// ---- 5 ----
Verdict eqi_correctness() {
    struct Case {
        double m, s, tau, beta, qmin;
    };
    std::vector<Case> grid;
    const std::array<std::array<double, 3>, 5> msq{{{0.0, 1.0, 0.0}, {-0.5, 0.3, 0.0}, {0.4, 0.8, 0.2}, {1.0, 2.0, -0.5}, {-1.0, 0.5, -0.6}}};
    const std::array<std::array<double, 2>, 4> tb{{{1.0, 0.65}, {0.2, 0.65}, {0.5, 0.9}, {2.0, 0.5}}};
    for (const auto& a : msq)
        for (const auto& b : tb) grid.push_back({a[0], a[1], b[0], b[1], a[2]});
    double worst_z = 0.0;
    std::uint64_t seed = 1;
    for (const auto& c : grid) {
        const double closed = eqi_from_moments(c.m, c.s * c.s, AcquisitionConfig{c.beta, c.tau}, c.qmin);
        const auto [mc, se] = oracle::eqi_monte_carlo(c.m, c.s, c.tau, c.beta, c.qmin, 1000000, seed++);
        worst_z = std::max(worst_z, std::abs(closed - mc) / std::max(se, 1e-300));
    }
    double worst_ei = 0.0;
    std::mt19937_64 rng(8);
    std::uniform_real_distribution<double> u(-2, 2);
    for (int k = 0; k < 100; ++k) {
        const double m = u(rng), s = 0.05 + std::abs(u(rng)), inc = u(rng);
        const double z = (inc - m) / s;
        const double ei = (inc - m) * oracle::normal_cdf(z) + s * oracle::normal_pdf(z);
        worst_ei = std::max(worst_ei, std::abs(eqi_from_moments(m, s * s, AcquisitionConfig{0.5, 0.0}, inc) - ei));
    }
    return {worst_z <= 3.0 && worst_ei <= 1e-10,
            "max |closed - MC| = " + fmt(worst_z) + " SE over 20 cases, max |EQI - EI| = " + fmt(worst_ei)};
}

// ---- 6 ----
Verdict cmaes_benchmarks() {
    const auto t0 = Clock::now();
    auto sphere = [](std::span<const double> x) {
        double s = 0.0;
        for (double v : x) s += v * v;
        return s;
    };
    auto rosen = [](std::span<const double> x) {
        return 100.0 * std::pow(x[1] - x[0] * x[0], 2) + std::pow(1.0 - x[0], 2);
    };
    int sphere_ok = 0, rosen_ok = 0;
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        CmaOptions o;
        o.budget = 5000;
        o.seed = seed;
        o.initial_mean = std::vector<double>(9, 3.0);
        sphere_ok += cmaes_minimize(sphere, Box{std::vector<double>(9, -5.0), std::vector<double>(9, 5.0)}, o).best_value <= 1e-6;
        CmaOptions r;
        r.budget = 3000;
        r.seed = seed;
        rosen_ok += cmaes_minimize(rosen, Box{{-2, -2}, {2, 2}}, r).best_value <= 1e-4;
    }
    const double t = seconds_since(t0);
    return {sphere_ok == 10 && rosen_ok >= 8 && t < 60.0,
            "sphere " + std::to_string(sphere_ok) + "/10, Rosenbrock " + std::to_string(rosen_ok) + "/10, " + fmt(t, 3) + " s"};
}

// ---- 7 ----
bool stratified(const DesignMatrix& d) {
    const std::size_t n = d.rows();
    for (std::size_t j = 0; j < d.cols(); ++j) {
        std::vector<int> hits(n, 0);
        for (std::size_t i = 0; i < n; ++i) {
            const double v = d(i, j);
            if (!(v >= 0.0 && v < 1.0)) return false;
            std::size_t s = std::min(static_cast<std::size_t>(std::floor(v * static_cast<double>(n))), n - 1);
            if (v < static_cast<double>(s) / static_cast<double>(n)) --s;
            else if (s + 1 < n && v >= static_cast<double>(s + 1) / static_cast<double>(n)) ++s;
            ++hits[s];
        }
        for (int h : hits)
            if (h != 1) return false;
    }
    return true;
}

Verdict lhs_properties() {
    std::mt19937_64 rng(707);
    int strat_ok = 0;
    for (int t = 0; t < 500; ++t) {
        const std::size_t n = 1 + rng() % 60, m = 1 + rng() % 15;
        strat_ok += stratified(maximin_lhs(n, m, rng(), 1 + rng() % 20));
    }
    int mono_ok = 0;
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
        double prev = 0.0;
        bool ok = true;
        for (std::size_t r : {1, 2, 5, 10, 50, 100}) {
            const double d = min_pairwise_distance(maximin_lhs(10, 9, seed, r));
            ok = ok && d >= prev;
            prev = d;
        }
        mono_ok += ok;
    }
    return {strat_ok == 500 && mono_ok == 50,
            "stratified " + std::to_string(strat_ok) + "/500, monotone " + std::to_string(mono_ok) + "/50 seeds"};
}

// ---- 8, 9, 10 ----
struct BenchOutcome {
    std::uint64_t seed = 0;
    BenchReport rep;
    double seconds = 0.0;
};

BenchOutcome run_bench(std::uint64_t seed) {
    const auto t0 = Clock::now();
    const auto dir = oracle::temp_dir("acceptance-bench-" + std::to_string(seed));
    MemoryStore store(dir);
    BenchConfig cfg;
    cfg.seed = seed;
    cfg.jobs = std::max(1u, std::thread::hardware_concurrency());
    const auto pairs = make_task_pairs(7, 0.9, seed, std::nullopt);
    BenchOutcome out{seed, paired_benchmark(pairs, cfg, store), 0.0};
    std::filesystem::remove_all(dir);
    out.seconds = seconds_since(t0);
    return out;
}

// ---- 11 ----
std::string capture(const std::string& cmd) {
    std::string out;
    if (FILE* p = ::popen(cmd.c_str(), "r")) {
        std::array<char, 4096> buf{};
        std::size_t n;
        while ((n = std::fread(buf.data(), 1, buf.size(), p)) > 0) out.append(buf.data(), n);
        const int status = ::pclose(p);
        out += "\n[exit " + std::to_string(status) + "]";
    }
    return out;
}

Verdict cli_determinism(const std::string& binary) {
    const auto base = oracle::temp_dir("acceptance-cli");
    const std::vector<std::string> commands{
        "--budget 6,6,3 --seed 5 optimize --task-seed 11 --difficulty hard --task obj",
        "--budget 6,6,3 --seed 6 optimize --task-seed 11 --difficulty hard --task obj",
        "--seed 5 reduce-bounds --task obj",
        "--format csv --seed 5 reduce-bounds --task obj",
        "add-cloud --task cube --shape cube",
        "report",
        "--format csv report --task obj",
        "--budget 5,3,2 --seed 3 bench --pairs 2 --runs 1 --source-runs 1",
    };
    auto run_all = [&](const std::string& tag) {
        const auto root = base / tag;
        std::string transcript;
        for (const auto& c : commands) {
            if (!binary.empty()) {
                transcript += capture(binary + " --memory-root " + root.string() + " " + c + " 2>&1");
            } else {
                std::vector<std::string> args{"--memory-root", root.string()};
                std::istringstream is(c);
                for (std::string w; is >> w;) args.push_back(w);
                std::ostringstream o, e;
                const int code = cli::run_cli(args, o, e);
                transcript += o.str() + e.str() + "\n[exit " + std::to_string(code) + "]";
            }
            transcript += "\n----\n";
        }
        return transcript;
    };
    const std::string a = run_all("a"), b = run_all("b");
    std::filesystem::remove_all(base);
    const bool ran = a.find("final score") != std::string::npos && a.find("paired Wilcoxon") != std::string::npos;
    return {a == b && ran, std::to_string(commands.size()) + " commands, " + std::to_string(a.size()) +
                               " bytes of output, " + (a == b ? "identical" : "different") +
                               (binary.empty() ? " (in-process)" : "")};
}

}  // namespace

int main(int argc, char** argv) {
    const std::string cli_binary = argc > 1 ? argv[1] : "";

    report(1, "bounds reduction equals straight-line transcription", alg1_equivalence());
    report(2, "Wilcoxon exact p equals enumeration", wilcoxon_exactness());
    report(3, "uniformity test calibration and power", dvm_calibration());
    report(4, "GP posterior equals dense oracle", gp_correctness());
    report(5, "EQI closed form equals Monte-Carlo", eqi_correctness());
    report(6, "CMA-ES sphere and Rosenbrock", cmaes_benchmarks());
    report(7, "LHS stratification and maximin monotonicity", lhs_properties());

    const auto t0 = Clock::now();
    std::vector<BenchOutcome> benches;
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        benches.push_back(run_bench(seed));
        const auto& r = benches.back().rep;
        std::cout << "  bench seed " << seed << ": baseline " << fmt(r.baseline_mean) << " meta " << fmt(r.meta_mean)
                  << " p " << fmt(r.paired.p_value) << " initial " << fmt(r.baseline_initial) << " -> "
                  << fmt(r.meta_initial) << " (" << fmt(benches.back().seconds, 3) << " s)" << std::endl;
    }
    const double bench_seconds = seconds_since(t0);

    {
        const auto& r = benches.front().rep;
        const double gap = r.meta_initial - r.baseline_initial;
        double mean_gap = 0.0;
        for (const auto& b : benches) mean_gap += (b.rep.meta_initial - b.rep.baseline_initial) / 10.0;
        report(8, "warm start: initial-design gain under reduced bounds",
               {gap >= 0.03, "master seed 1: " + fmt(r.baseline_initial) + " -> " + fmt(r.meta_initial) + " (gap " +
                                 fmt(gap) + "); mean gap over 10 seeds " + fmt(mean_gap)});
    }
    {
        int wins = 0;
        for (const auto& b : benches) wins += b.rep.meta_mean > b.rep.baseline_mean && b.rep.paired.p_value < 0.05;
        report(9, "meta-learning beats baseline with p < 0.05",
               {wins >= 8 && bench_seconds < 900.0,
                std::to_string(wins) + "/10 master seeds, " + fmt(bench_seconds, 4) + " s"});
    }
    {
        int ok = 0, total = 0, seeds_ok = 0;
        for (const auto& b : benches) {
            int here = 0;
            for (const auto& t : b.rep.tasks) {
                here += t.meta.worst >= t.baseline.worst;
                ++total;
            }
            ok += here;
            seeds_ok += here >= 6;
        }
        report(10, "worst run under meta-learning at least the baseline worst",
               {ok * 7 >= total * 6, std::to_string(ok) + "/" + std::to_string(total) + " tasks over 10 seeds; " +
                                          std::to_string(seeds_ok) + "/10 seeds with >= 6/7"});
    }
    report(11, "CLI determinism", cli_determinism(cli_binary));

    std::cout << (failures == 0 ? "ALL PASS" : std::to_string(failures) + " criteria failed") << std::endl;
    return failures == 0 ? 0 : 1;
}
