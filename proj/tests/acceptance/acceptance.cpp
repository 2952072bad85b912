// Acceptance run: one PASS/FAIL line per criterion. Every CLI-driven check is
// run with 1 and 8 worker threads and the two CSV files must be identical.
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <sstream>

#include "commands.hpp"
#include "harnack/harnack.hpp"

namespace fs = std::filesystem;
using namespace harnack;

namespace {

// Pinned tolerances.
constexpr long kPaths = 100000;
constexpr double kOneSided = 3.0;           // lhs + 3 SE <= rhs
constexpr double kMartingaleSE = 4.0;       // |mean R_T - 1| <= 4 SE
constexpr double kMaxUnmerged = 1e-3;
constexpr double kHtExample = 4.6639;
constexpr double kHtOracleTol = 1e-3;
constexpr double kK4LimitTol = 1e-4;
constexpr double kOracleRatioLo = 1.6, kOracleRatioHi = 2.4;
constexpr double kVarTol = 0.05, kAutocovTol = 0.10;

struct Row {
    std::map<std::string, std::string> f;
    double num(const std::string& k) const {
        const auto it = f.find(k);
        if (it == f.end() || it->second.empty()) return std::nan("");
        return parse_double(it->second);
    }
    const std::string& verdict() const { return f.at("verdict"); }
};

struct Run {
    int rc = -1;
    std::string csv;
    std::map<std::string, Row> rows;
    std::string err;
};

std::map<std::string, Row> parse_csv(const std::string& text) {
    std::map<std::string, Row> out;
    std::istringstream in(text);
    std::string line;
    std::vector<std::string> header;
    while (std::getline(in, line)) {
        std::vector<std::string> cells;
        std::stringstream ss(line);
        std::string c;
        while (std::getline(ss, c, ',')) cells.push_back(c);
        if (!line.empty() && line.back() == ',') cells.emplace_back();
        if (header.empty()) {
            header = cells;
            continue;
        }
        Row r;
        for (std::size_t i = 0; i < header.size() && i < cells.size(); ++i) r.f[header[i]] = cells[i];
        out[r.f["claim"]] = r;
    }
    return out;
}

std::string slurp(const fs::path& p) {
    std::ifstream f(p, std::ios::binary);
    std::stringstream s;
    s << f.rdbuf();
    return s.str();
}

fs::path g_root;
std::vector<std::string> g_mismatch; // claims whose CSV changed with the thread count

Run run_once(const std::string& name, const std::string& command, const std::string& text, int threads) {
    const auto dir = g_root / name;
    fs::create_directories(dir);
    {
        std::ofstream f(dir / "run.conf");
        f << text << "\n[output]\nverbosity = 0\n";
    }
    const auto out = dir / ("t" + std::to_string(threads));
    std::ostringstream so, se;
    Run r;
    r.rc = cli::run_command({command, "--config", (dir / "run.conf").string(), "--out", out.string(), "--threads",
                             std::to_string(threads)},
                            so, se);
    r.err = se.str();
    const auto csv = out / (command + ".csv");
    if (fs::exists(csv)) {
        r.csv = slurp(csv);
        r.rows = parse_csv(r.csv);
    }
    return r;
}

// Runs at 1 and 8 threads; records any difference for the reproducibility
// criterion and returns the single-thread result.
Run run(const std::string& name, const std::string& command, const std::string& text) {
    auto a = run_once(name, command, text, 1);
    const auto b = run_once(name, command, text, 8);
    if (a.rc != b.rc || a.csv != b.csv) g_mismatch.push_back(name);
    return a;
}

int g_failed = 0;

void report(int id, bool ok, const std::string& what, const std::string& detail) {
    std::cout << (ok ? "PASS" : "FAIL") << " criterion " << id << ": " << what << " (" << detail << ")" << std::endl;
    if (!ok) ++g_failed;
}

std::string fmt(double x) {
    std::ostringstream s;
    s.precision(6);
    s << x;
    return s.str();
}

const std::string kLinear = R"([problem]
d = 1
r0 = 1
T = 2
m = 400
t0 = 1

[system]
name = linear_additive
a = -1
c = 0.5
s0 = 1

[coupling]
theta = 1
delta_merge = 1e-8

[mc]
n = 100000
seed = 20240601

[initial]
xi = 1
eta = 0
)";

const std::string kSine = R"([problem]
d = 1
r0 = 1
T = 2
m = 400

[system]
name = sine_multiplicative
a = -1
c = 0.2
s0 = 0.1

[mc]
n = 100000
seed = 20240602
)";

std::string with(std::string base, const std::string& extra) { return base + "\n" + extra + "\n"; }

std::string replace(std::string s, const std::string& from, const std::string& to) {
    const auto pos = s.find(from);
    if (pos != std::string::npos) s.replace(pos, from.size(), to);
    return s;
}

bool one_sided(const Row& r, std::string& detail) {
    const double lhs = r.num("lhs"), se = r.num("lhs_se"), rhs = r.num("rhs");
    const double rse = std::isnan(r.num("rhs_se")) ? 0.0 : r.num("rhs_se");
    detail += r.f.at("claim") + ": " + fmt(lhs) + " + 3*" + fmt(se) + " vs " + fmt(rhs) + "; ";
    return lhs + kOneSided * std::hypot(se, rse) <= rhs;
}

} // namespace

int main() {
    g_root = fs::temp_directory_path() / "harnack_acceptance";
    fs::remove_all(g_root);
    fs::create_directories(g_root);

    try {
        // 1. Martingale property of the Girsanov weight.
        {
            const auto r = run("girsanov", "couple", replace(kLinear, "theta = 1", "theta = 1\nmeasure = P"));
            bool ok = r.rc == cli::kHolds && r.rows.count("martingale");
            std::string d = "rc=" + std::to_string(r.rc);
            if (r.rows.count("martingale")) {
                const auto& m = r.rows.at("martingale");
                const double mean = m.num("lhs"), se = m.num("lhs_se");
                ok = ok && std::abs(mean - 1.0) <= kMartingaleSE * se && m.num("n") == kPaths;
                d += ", mean R_T = " + fmt(mean) + " +- " + fmt(se);
            }
            report(1, ok, "mean of R_T within 1 +- 4 SE", d + r.err);
        }

        // 2. Coupling success, and no more unmerged paths at half the step.
        {
            const auto a = run("coupling_m400", "couple", kLinear);
            const auto b = run("coupling_m800", "couple", replace(kLinear, "m = 400", "m = 800"));
            const auto c = run("coupling_m200", "couple", replace(kLinear, "m = 400", "m = 200"));
            bool ok = a.rc == cli::kHolds && a.rows.count("unmerged_fraction") && b.rows.count("unmerged_fraction") &&
                      c.rows.count("unmerged_fraction");
            std::string d;
            if (ok) {
                const double f200 = c.rows.at("unmerged_fraction").num("lhs");
                const double f400 = a.rows.at("unmerged_fraction").num("lhs");
                const double f800 = b.rows.at("unmerged_fraction").num("lhs");
                ok = f400 <= kMaxUnmerged && f400 <= f200 && f800 <= f400;
                d = "unmerged at h=1/200,1/400,1/800: " + fmt(f200) + ", " + fmt(f400) + ", " + fmt(f800);
            }
            report(2, ok, "merged fraction >= 99.9% and non-increasing as h halves", d + a.err);
        }

        // 3. Entropy of the weight against the closed-form bounds.
        {
            const auto r = run("entropy", "entropy", with(kLinear, "[bounds]\nt_eval = 0.5"));
            bool ok = r.rc == cli::kHolds && r.rows.count("entropy") && r.rows.count("entropy@t=0.5");
            std::string d;
            if (ok) ok = one_sided(r.rows.at("entropy"), d) && one_sided(r.rows.at("entropy@t=0.5"), d);
            report(3, ok, "entropy estimate + 3 SE below the bound at T and at t = 0.5", d + r.err);
        }

        // 4. Log-Harnack inequality and the Jensen control.
        {
            const std::string f = "[functions]\nf = quad_cap\nC = 100";
            const auto r = run("log_harnack", "log-harnack", with(kLinear, f));
            const auto j = run("log_harnack_jensen", "log-harnack", with(replace(kLinear, "eta = 0", "eta = 1"), f));
            bool ok = r.rc == cli::kHolds && j.rc == cli::kHolds && r.rows.count("log-harnack") &&
                      j.rows.count("log-harnack");
            std::string d;
            if (ok) {
                const auto& a = r.rows.at("log-harnack");
                const auto& b = j.rows.at("log-harnack");
                ok = a.verdict() == "holds" && b.verdict() == "holds" && b.num("bound") == 0.0;
                d = "margin " + fmt(a.num("margin_se")) + " SE, H_T = " + fmt(a.num("bound")) + "; Jensen margin " +
                    fmt(b.num("margin_se")) + " SE with H_T = " + fmt(b.num("bound"));
            }
            report(4, ok, "log-Harnack holds; xi = eta holds with H_T = 0", d + r.err + j.err);
        }

        // 5. T <= r0 is refused.
        {
            const auto a = run_once("short_T1", "log-harnack", replace(replace(kLinear, "T = 2", "T = 1"), "t0 = 1\n", ""), 1);
            const auto b = run_once("short_T05", "log-harnack",
                                    replace(replace(kLinear, "T = 2", "T = 0.5"), "t0 = 1\n", ""), 1);
            const bool ok = a.rc == cli::kError && b.rc == cli::kError && a.err.find("T > r0") != std::string::npos;
            report(5, ok, "log-harnack with T <= r0 exits with status 1",
                   "rc(T=1)=" + std::to_string(a.rc) + ", rc(T=0.5)=" + std::to_string(b.rc));
        }

        // 6. Power-Harnack above the threshold; the threshold itself is rejected.
        {
            const std::string rest = "[functions]\nf = quad_cap\nC = 100\n\n[initial]\nxi = 0.5\neta = 0";
            const auto r = run("power_harnack", "power-harnack", with(kSine, "[coupling]\np = 16\n\n" + rest));
            const auto t = run_once("power_harnack_p9", "power-harnack", with(kSine, "[coupling]\np = 9\n\n" + rest), 1);
            bool ok = r.rc == cli::kHolds && r.rows.count("power-harnack") && t.rc == cli::kError;
            std::string d = "rc(p=16)=" + std::to_string(r.rc) + ", rc(p=9)=" + std::to_string(t.rc);
            if (ok) {
                const auto& v = r.rows.at("power-harnack");
                ok = v.verdict() == "holds" && v.num("n") == kPaths;
                d += ", margin " + fmt(v.num("margin_se")) + " SE, Phi_p = " + fmt(v.num("bound"));
            }
            report(6, ok, "power-Harnack holds at p = 16; p = 9 rejected", d + r.err);
        }

        // 7. Exponential moment of the integrated segment gap.
        {
            const std::string text = replace(kSine, "m = 400", "m = 400\nt0 = 0.5") +
                                     "\n[coupling]\ntheta = 1.8\n\n[initial]\nxi = 1\neta = 0\n\n"
                                     "[lemma]\nid = integrated_segment_gap\nlambda_cap_fractions = 0.5, 1\ns = 0.5\n";
            const auto r = run("lemma", "entropy", text);
            int checked = 0;
            bool ok = r.rc == cli::kHolds;
            std::string d;
            for (const auto& [claim, row] : r.rows) {
                if (claim.rfind("lemma:integrated_segment_gap", 0) != 0) continue;
                ++checked;
                ok = one_sided(row, d) && ok;
            }
            report(7, ok && checked == 2, "exponential moment + 3 SE below its bound at cap/2 and cap",
                   d + "rc=" + std::to_string(r.rc) + r.err);
        }

        // 8. Closed-form gap of the additive linear system under Q.
        {
            const double a = -1.0;
            const auto lin = builtin_system<1>("linear_additive", {{"a", a}, {"c", 0.0}, {"s0", 1.0}});
            const GammaSchedule sched{1.0, lin.constants.k4, 1.0};
            auto max_error = [&](int m, int threads) {
                const CouplingPlan plan(sched, GridSpec(1, 2, m));
                Vector<1> one, zero;
                one(0) = 1;
                zero(0) = 0;
                const auto xi = SegmentPath<1>::constant(1, m, one);
                const auto eta = SegmentPath<1>::constant(1, m, zero);
                CouplingOptions o;
                o.record_paths = true;
                o.delta_merge = 0.0;
                const long n = 64;
                std::vector<double> worst(n);
                parallel_for(n, Execution{threads}, [&](long i) {
                    const auto tr = simulate_coupled<1>(lin, xi, eta, plan, 77, static_cast<std::uint64_t>(i), o);
                    double w = 0.0;
                    for (long k = 0; k <= plan.k0; ++k) {
                        const double t = plan.grid.time(k);
                        const double exact = k == plan.k0 ? 0.0 : std::exp(a * t - inv_gamma_integral(0.0, t, sched));
                        w = std::max(w, std::abs((tr.x_points[k] - tr.y_points[k])(0) - exact));
                    }
                    worst[static_cast<std::size_t>(i)] = w;
                });
                return *std::max_element(worst.begin(), worst.end());
            };
            const double e200 = max_error(200, 1), e400 = max_error(400, 1);
            if (e400 != max_error(400, 8)) g_mismatch.push_back("oracle");
            const double ratio = e200 / e400;
            report(8, ratio >= kOracleRatioLo && ratio <= kOracleRatioHi,
                   "gap matches D(0) exp(at - int 1/gamma) with first-order error",
                   "max error " + fmt(e200) + " at h=1/200, " + fmt(e400) + " at h=1/400, ratio " + fmt(ratio));
        }

        // 9. Bound calculators.
        {
            const auto r = run("h_t_example", "bounds",
                               "[problem]\nr0 = 1\nT = 2\nm = 100\n\n[constants]\nk1 = 1\nk2 = 0\nk3 = 1\nk4 = 1\n\n"
                               "[bounds]\npoint_gap = 1\nseg_gap = 1\n");
            bool ok = r.rc == cli::kHolds && r.rows.count("H_T");
            std::string d;
            if (ok) {
                const double v = r.rows.at("H_T").num("bound");
                const AssumptionConstants k{1, 0, 1, 1};
                const GapPair g{1, 1};
                // Independent dense uniform grid on (0, T - r0].
                double dense = std::numeric_limits<double>::infinity();
                for (int i = 1; i <= 1000000; ++i) {
                    const double s = i / 1e6;
                    const double val = 2.0 * k.k3 * k.k3 * k.k4 / -std::expm1(-k.k4 * s) +
                                       k.k1 * k.k1 * (0.5 + s) * std::exp(k.k2 * k.k2 * (k.k1 * k.k1 * s + 8) * s);
                    dense = std::min(dense, val);
                }
                const double lim = bound_H_T({1, 0, 1, 0}, g, 2, 1).value;
                const double near = bound_H_T({1, 0, 1, 1e-4}, g, 2, 1).value;
                const double gamma_lim = gamma(0.5, {1.0, 1e-12, 1.0});
                const double gamma_near = gamma(0.5, {1.0, 1e-4, 1.0});
                const double same = bound_H_T(k, {0, 0}, 2, 1).value;
                ok = std::abs(v - kHtExample) <= kHtOracleTol && std::abs(v - dense) <= kHtOracleTol &&
                     std::abs(near - lim) <= kK4LimitTol * lim &&
                     std::abs(gamma_near - gamma_lim) <= kK4LimitTol * gamma_lim && same == 0.0;
                d = "H_T = " + fmt(v) + ", dense grid " + fmt(dense) + ", K4 limit " + fmt(lim) + " vs K4=1e-4 " +
                    fmt(near) + ", H_T(xi,xi) = " + fmt(same);
            }
            report(9, ok, "H_T example, K4 limit branch and H_T(xi,xi) = 0", d + r.err);
        }

        // 10. Stationary segments of the delay-free OU process.
        {
            const auto r = run("stationary", "stationary",
                               "[problem]\nr0 = 1\nT = 2\nm = 100\n\n[system]\nname = ou_nodelay\na = 1\ns0 = 1\n\n"
                               "[mc]\nn = 10000\nseed = 20240603\n\n[initial]\nxi = 0\n\n"
                               "[stationary]\nburn_in = 10\nref_variance = 0.5\nref_autocov = " +
                                   format_double(0.5 * std::exp(-1.0)) + "\nvar_tol = " + format_double(kVarTol) +
                                   "\nautocov_tol = " + format_double(kAutocovTol) + "\n");
            bool ok = r.rc == cli::kHolds && r.rows.count("stationary_variance") && r.rows.count("stationary_autocov");
            std::string d;
            if (ok) {
                const double v = r.rows.at("stationary_variance").num("lhs");
                const double c = r.rows.at("stationary_autocov").num("lhs");
                ok = std::abs(v - 0.5) <= kVarTol * 0.5 && std::abs(c - 0.5 * std::exp(-1.0)) <= kAutocovTol * 0.5 * std::exp(-1.0);
                d = "variance " + fmt(v) + ", lag-r0 autocovariance " + fmt(c);
            }
            report(10, ok, "variance 0.5 +- 5% and autocovariance exp(-1)/2 +- 10%", d + r.err);
        }

        // 11. Thread-count independence of every run above.
        {
            std::string d = g_mismatch.empty() ? "all CSV files identical under --threads 1 and --threads 8" : "differs:";
            for (const auto& m : g_mismatch) d += " " + m;
            report(11, g_mismatch.empty(), "bit-identical results for 1 and 8 threads", d);
        }
    } catch (const std::exception& e) {
        std::cout << "FAIL acceptance run aborted: " << e.what() << std::endl;
        return 1;
    }
    return g_failed == 0 ? 0 : 1;
}
