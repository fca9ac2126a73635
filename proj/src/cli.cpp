#include "stopflow/cli.hpp"

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "stopflow/catalog.hpp"
#include "stopflow/config.hpp"
#include "stopflow/control.hpp"
#include "stopflow/diagnostics.hpp"
#include "stopflow/rng.hpp"
#include "stopflow/sde.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace stopflow::cli {

namespace {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

constexpr const char* kVersion = "0.1.0";

struct GlobalOpts {
    std::string out_dir = "out";
    std::uint64_t seed = 1;
    std::string grid_override;
    bool strict_exit = false;
    std::string format = "csv";
};

struct Manifest {
    std::string command;
    std::vector<std::string> configs;
    ordered_json grid;
    ordered_json settings;
    std::uint64_t seed = 0;
    std::vector<std::string> outputs;
    std::vector<std::pair<std::string, bool>> checks;
    std::chrono::steady_clock::time_point t0 = std::chrono::steady_clock::now();

    bool all_pass() const {
        for (const auto& [name, ok] : checks)
            if (!ok) return false;
        return true;
    }

    void write(const std::string& dir) {
        ordered_json j;
        j["command"] = command;
        j["configs"] = configs;
        j["grid"] = grid;
        j["settings"] = settings;
        j["tool_version"] = kVersion;
        j["seed"] = seed;
        j["outputs"] = outputs;
        ordered_json checks_j = ordered_json::array();
        for (const auto& [name, ok] : checks)
            checks_j.push_back(ordered_json{{"check", name}, {"pass", ok}});
        j["checks"] = checks_j;
        j["pass"] = all_pass();
        j["wall_clock_ms"] = std::chrono::duration_cast<std::chrono::milliseconds>(
                                 std::chrono::steady_clock::now() - t0)
                                 .count();
        std::ofstream os(dir + "/manifest.json");
        os << j.dump(2) << "\n";
    }
};

void apply_grid_override(const std::string& spec, std::size_t& nx, std::size_t& nt) {
    if (spec.empty()) return;
    std::stringstream ss(spec);
    std::string item;
    while (std::getline(ss, item, ',')) {
        std::size_t eq = item.find('=');
        if (eq == std::string::npos) throw ConfigError("bad --grid item '" + item + "'");
        std::string key = item.substr(0, eq);
        std::size_t val = static_cast<std::size_t>(std::stoul(item.substr(eq + 1)));
        if (key == "nx")
            nx = val;
        else if (key == "nt")
            nt = val;
        else
            throw ConfigError("bad --grid key '" + key + "'");
    }
}

struct LoadedProblem {
    CatalogEntry entry;  // catalog entries come with a plan; files fill one in
    std::string origin;
};

LoadedProblem load(const std::string& spec) {
    LoadedProblem lp;
    lp.origin = spec;
    if (spec.rfind("catalog:", 0) == 0) {
        lp.entry = catalog_get(spec.substr(8));
        return lp;
    }
    std::ifstream in(spec);
    if (!in) throw ConfigError("cannot open config '" + spec + "'");
    std::stringstream buf;
    buf << in.rdbuf();
    ParsedConfig cfg = parse_problem(buf.str(), fs::path(spec).parent_path().string());
    CatalogEntry& e = lp.entry;
    e.name = fs::path(spec).stem().string();
    e.problem = cfg.problem;
    e.nt = cfg.grid.nt;
    e.nx = cfg.grid.nx;
    e.spacing = cfg.grid.spacing;
    if (cfg.solve.mode == "stationary") {
        e.mode = CatalogEntry::Mode::Stationary;
    } else if (cfg.solve.mode == "windowed") {
        e.mode = CatalogEntry::Mode::Windowed;
        e.t_solve = cfg.solve.t_solve;
        e.t_report = cfg.solve.t_report.value_or(cfg.solve.t_solve);
        e.stationary_seed = cfg.solve.stationary_seed;
    } else if (cfg.solve.mode == "finite" ||
               (cfg.solve.mode == "auto" && !cfg.problem.horizon.perpetual)) {
        e.mode = CatalogEntry::Mode::Finite;
        e.t_solve = cfg.problem.horizon.perpetual ? cfg.solve.t_solve : cfg.problem.horizon.T;
    } else if (cfg.solve.mode == "auto" && cfg.problem.coefficients_time_invariant()) {
        e.mode = CatalogEntry::Mode::Stationary;
    } else if (cfg.solve.mode == "auto") {
        e.mode = CatalogEntry::Mode::Windowed;
        e.t_solve = cfg.solve.t_solve;
        e.t_report = cfg.solve.t_report.value_or(cfg.solve.t_solve);
        e.stationary_seed = true;
    } else {
        throw ConfigError("unknown solve mode '" + cfg.solve.mode + "'");
    }
    if (!cfg.problem.horizon.perpetual) e.t_solve = cfg.problem.horizon.T;
    return lp;
}

int cmd_solve(const GlobalOpts& g, const std::string& config) {
    LoadedProblem lp = load(config);
    apply_grid_override(g.grid_override, lp.entry.nx, lp.entry.nt);

    Manifest m;
    m.command = "solve " + config;
    m.configs = {config};
    m.seed = g.seed;
    m.grid = {{"nx", lp.entry.nx}, {"nt", lp.entry.nt}};
    SolverSettings settings;
    m.settings = {{"tol_pde_rel", settings.tol_pde_rel}, {"psor_omega", settings.psor_omega}};

    fs::create_directories(g.out_dir);
    ValueSurface s = lp.entry.run(settings);

    std::vector<double> xc(s.grid.nt());
    for (std::size_t k = 0; k < s.grid.nt(); ++k)
        xc[k] = lp.entry.problem.payoff.crossing(s.grid.t_nodes[k], lp.entry.problem.x_lo,
                                                 lp.entry.problem.x_hi);
    FreeBoundary fb = extract_boundaries(s, xc);
    SmoothFitGap gap = smooth_fit_gap(s, fb, lp.entry.problem.payoff);

    {
        std::ofstream os(g.out_dir + "/surface.csv");
        s.write_csv(os);
        m.outputs.push_back("surface.csv");
    }
    {
        std::ofstream os(g.out_dir + "/surface.stpf", std::ios::binary);
        s.write_binary(os);
        m.outputs.push_back("surface.stpf");
    }
    {
        std::ofstream os(g.out_dir + "/boundary.csv");
        fb.write_csv(os);
        m.outputs.push_back("boundary.csv");
    }
    {
        std::ofstream os(g.out_dir + "/smooth_fit.csv");
        std::string out = "t,gap_lower,gap_upper\n";
        char buf[40];
        for (std::size_t k = 0; k < gap.t_nodes.size(); ++k) {
            std::snprintf(buf, sizeof(buf), "%.17g", gap.t_nodes[k]);
            out += buf;
            out += ',';
            if (!std::isnan(gap.lower[k])) {
                std::snprintf(buf, sizeof(buf), "%.17g", gap.lower[k]);
                out += buf;
            }
            out += ',';
            if (!std::isnan(gap.upper[k])) {
                std::snprintf(buf, sizeof(buf), "%.17g", gap.upper[k]);
                out += buf;
            }
            out += '\n';
        }
        os << out;
        m.outputs.push_back("smooth_fit.csv");
    }
    m.checks.push_back({"solved", true});
    m.checks.push_back({"convex_sections", fb.convex_sections});
    m.write(g.out_dir);
    std::cout << "solved " << lp.entry.name << ": " << s.grid.nt() << "x" << s.grid.nx()
              << " surface, outputs in " << g.out_dir << "\n";
    return 0;
}

int cmd_compare(const GlobalOpts& g, const std::string& lo_spec, const std::string& hi_spec,
                const std::string& mode_name) {
    CompareMode mode;
    if (mode_name == "flow_discount")
        mode = CompareMode::FlowDiscount;
    else if (mode_name == "volatility")
        mode = CompareMode::Volatility;
    else if (mode_name == "drift")
        mode = CompareMode::Drift;
    else
        throw ConfigError("unknown compare mode '" + mode_name + "'");

    LoadedProblem lo = load(lo_spec), hi = load(hi_spec);
    apply_grid_override(g.grid_override, lo.entry.nx, lo.entry.nt);

    double t1 = lo.entry.mode == CatalogEntry::Mode::Stationary ? 1.0 : lo.entry.t_solve;
    Grid grid = lo.entry.problem.make_grid(lo.entry.nt, lo.entry.nx, 0.0, t1, lo.entry.spacing);
    SolverSettings settings;
    ComparisonReport rep = compare_problems(lo.entry.problem, hi.entry.problem, mode, grid,
                                            settings);

    Manifest m;
    m.command = "compare";
    m.configs = {lo_spec, hi_spec};
    m.seed = g.seed;
    m.grid = {{"nx", lo.entry.nx}, {"nt", lo.entry.nt}};
    fs::create_directories(g.out_dir);
    {
        std::ofstream os(g.out_dir + "/report.json");
        os << rep.json() << "\n";
        m.outputs.push_back("report.json");
    }
    m.checks.push_back({"comparison", rep.pass});
    m.write(g.out_dir);
    std::cout << rep.json() << "\n";
    if (g.strict_exit && !rep.pass) return 1;
    return 0;
}

int cmd_simulate(const GlobalOpts& g, const std::string& config, const std::string& boundary_path,
                 std::size_t n, double dt, double x0, double horizon) {
    if (n == 0) throw ConfigError("simulate needs n >= 1 paths");
    LoadedProblem lp = load(config);

    FreeBoundary fb;
    {
        std::ifstream in(boundary_path);
        if (!in) throw ConfigError("cannot open boundary file '" + boundary_path + "'");
        fb = FreeBoundary::read_csv(in);
    }
    SimParams params;
    params.n_paths = n;
    params.dt = dt;
    params.seed = g.seed;
    params.x0 = x0 != 0.0 ? x0 : lp.entry.x0.value_or(0.5 * (lp.entry.problem.x_lo +
                                                             lp.entry.problem.x_hi));
    params.horizon = horizon > 0.0
                         ? horizon
                         : (lp.entry.problem.horizon.perpetual ? std::max(2.0 * fb.t_nodes.back(),
                                                                          50.0)
                                                               : lp.entry.problem.horizon.T);
    BoundaryRule rule{&fb, 0.0};
    PathEnsemble e = simulate_stopped(lp.entry.problem, rule, params);

    Manifest m;
    m.command = "simulate";
    m.configs = {config, boundary_path};
    m.seed = g.seed;
    m.grid = {{"n_paths", n}, {"dt", dt}};
    fs::create_directories(g.out_dir);
    {
        std::ofstream os(g.out_dir + "/ensemble.csv");
        e.write_csv(os);
        m.outputs.push_back("ensemble.csv");
    }
    m.checks.push_back({"simulated", true});
    m.write(g.out_dir);
    std::cout << "simulated " << n << " paths: mean payoff " << e.mean_payoff() << " +/- "
              << e.stderr_payoff() << " (censored " << e.censored_count << ")\n";
    return 0;
}

// ---- verify suites ------------------------------------------------------

struct CheckList {
    std::vector<std::pair<std::string, bool>> items;
    void add(const std::string& name, bool ok) {
        items.push_back({name, ok});
        std::cout << (ok ? "[PASS] " : "[FAIL] ") << name << "\n";
    }
    bool all() const {
        for (const auto& [n, ok] : items)
            if (!ok) return false;
        return true;
    }
};

struct VerifyScale {
    std::size_t nx = 0, nt = 0;  // 0 = keep entry defaults
    std::uint64_t seed = 1;
};

CatalogEntry scaled(const std::string& name, const VerifyScale& vs) {
    CatalogEntry e = catalog_get(name);
    if (vs.nx) e.nx = vs.nx;
    if (vs.nt) e.nt = vs.nt;
    return e;
}

void verify_theorem1(CheckList& cl, const VerifyScale& vs) {
    SolverSettings settings;
    {
        CatalogEntry e = scaled("wald_rising_cost", vs);
        ValueSurface s = e.run(settings);
        MonotoneVerdict v = classify_environment(e.problem, s);
        cl.add("theorem1: rising-cost Wald classified DecreasingStrict",
               v.classification == MonotoneClass::DecreasingStrict);
        FreeBoundary fb = extract_boundaries(s, *e.problem.payoff.crossing_hint);
        if (v.classification != MonotoneClass::Mixed) {
            BoundaryCheck bc = verify_boundary_monotonicity(fb, v, s.grid);
            cl.add("theorem1: rising-cost Wald band narrows strictly", bc.pass);
        }
    }
    {
        CatalogEntry e = scaled("wald_rising_intensity", vs);
        ValueSurface s = e.run(settings);
        MonotoneVerdict v = classify_environment(e.problem, s);
        cl.add("theorem1: rising-intensity Wald classified IncreasingStrict",
               v.classification == MonotoneClass::IncreasingStrict);
        FreeBoundary fb = extract_boundaries(s, *e.problem.payoff.crossing_hint);
        if (v.classification != MonotoneClass::Mixed) {
            BoundaryCheck bc = verify_boundary_monotonicity(fb, v, s.grid);
            cl.add("theorem1: rising-intensity Wald band widens strictly", bc.pass);
        }
    }
}

StoppingProblem random_wald_pair_member(rng::CounterStream& rs, double r, double c0, double c1) {
    auto fmtnum = [](double v) {
        char buf[40];
        std::snprintf(buf, sizeof(buf), "%.12g", v);
        return std::string(buf);
    };
    return make_wald(1.0, 1.0, r, CoefficientField::constant(1.0), CoefficientField::constant(1.0),
                     CoefficientField::expression(fmtnum(c0) + "+" + fmtnum(c1) + "*t"));
}

void verify_theorem2(CheckList& cl, const VerifyScale& vs, std::size_t n_pairs, bool with_paths) {
    SolverSettings settings;
    rng::CounterStream rs(vs.seed, 2);
    std::size_t nx = vs.nx ? vs.nx : 201;
    std::size_t nt = vs.nt ? vs.nt : 101;
    bool all_ok = true, all_tau = true;
    for (std::size_t i = 0; i < n_pairs; ++i) {
        double r_lo = 0.05 + 0.1 * rs.uniform();
        double dr = 0.02 + 0.1 * rs.uniform();
        double c_hi0 = 0.005 + 0.02 * rs.uniform();
        double dc0 = 0.005 + 0.02 * rs.uniform();
        double slope = 0.01 * rs.uniform();
        // lo: lower flow (higher cost), higher discount. hi: the reverse.
        StoppingProblem lo = random_wald_pair_member(rs, r_lo + dr, c_hi0 + dc0, slope);
        StoppingProblem hi = random_wald_pair_member(rs, r_lo, c_hi0, slope);
        Grid grid = lo.make_grid(nt, nx, 0.0, 5.0);
        ComparisonReport rep =
            compare_problems(lo, hi, CompareMode::FlowDiscount, grid, settings);
        all_ok = all_ok && rep.pass;
        if (with_paths) {
            ValueSurface s_lo = solve_hjb(lo, grid, settings);
            ValueSurface s_hi = solve_hjb(hi, grid, settings);
            FreeBoundary b_lo = extract_boundaries(s_lo, 0.5);
            FreeBoundary b_hi = extract_boundaries(s_hi, 0.5);
            SimParams sp;
            sp.n_paths = 2000;
            sp.dt = 2e-3;
            sp.seed = vs.seed + i;
            sp.x0 = 0.5;
            sp.horizon = 5.0;
            CoupledRanking rank = coupled_stopping_rank(lo, hi, {&b_lo, 0.0}, {&b_hi, 0.0}, sp);
            all_tau = all_tau && rank.pass;
        }
    }
    cl.add("theorem2: dominance + inclusion on seeded pairs", all_ok);
    if (with_paths) cl.add("theorem2: coupled stopping-time ranking on seeded pairs", all_tau);
}

void verify_theorem3(CheckList& cl, const VerifyScale& vs) {
    SolverSettings settings;
    {
        StoppingProblem lo = make_put(1.0, CoefficientField::constant(0.05),
                                      CoefficientField::constant(0.2));
        StoppingProblem hi = make_put(1.0, CoefficientField::constant(0.05),
                                      CoefficientField::constant(0.4));
        // Shared grid must cover both truncations; reuse the wider domain.
        StoppingProblem lo_w = lo;
        lo_w.x_lo = hi.x_lo = std::min(lo.x_lo, hi.x_lo);
        lo_w.x_hi = hi.x_hi = std::max(lo.x_hi, hi.x_hi);
        Grid grid = lo_w.make_grid(vs.nt ? vs.nt : 81, vs.nx ? vs.nx : 401, 0.0, 2.0,
                                   Spacing::Log);
        ComparisonReport rep =
            compare_problems(lo_w, hi, CompareMode::Volatility, grid, settings);
        cl.add("theorem3: put sigma-dominance (convex hypothesis)",
               rep.pass && rep.hypothesis == "convex");
    }
    {
        StoppingProblem lo = make_investment(CoefficientField::constant(0.01),
                                             CoefficientField::constant(0.2),
                                             CoefficientField::constant(0.06),
                                             CoefficientField::constant(1.0));
        StoppingProblem hi = make_investment(CoefficientField::constant(0.03),
                                             CoefficientField::constant(0.2),
                                             CoefficientField::constant(0.06),
                                             CoefficientField::constant(1.0));
        StoppingProblem lo_w = lo;
        lo_w.x_lo = hi.x_lo = std::min(lo.x_lo, hi.x_lo);
        lo_w.x_hi = hi.x_hi = std::max(lo.x_hi, hi.x_hi);
        Grid grid = lo_w.make_grid(vs.nt ? vs.nt : 81, vs.nx ? vs.nx : 401, 0.0, 2.0,
                                   Spacing::Log);
        ComparisonReport rep = compare_problems(lo_w, hi, CompareMode::Drift, grid, settings);
        cl.add("theorem3: investment drift-dominance (monotone hypothesis)",
               rep.pass && rep.hypothesis == "nondecreasing");
    }
}

void verify_prop6(CheckList& cl, const VerifyScale& vs) {
    SolverSettings settings;
    CatalogEntry e = scaled("nonbinary_3pt", vs);
    ExactFilter filter(e.learning->prior);
    bool decreasing = true;
    for (double x : {0.2, 0.35, 0.5, 0.65, 0.8}) {
        double prev = 1e300;
        for (double t : {0.0, 0.5, 1.0, 2.0}) {
            double s = filter.belief_volatility(t, x);
            decreasing = decreasing && s < prev - 1e-12;
            prev = s;
        }
    }
    cl.add("prop6: non-binary belief volatility strictly decreasing in t", decreasing);

    ValueSurface s = e.run(settings);
    MonotoneVerdict v = classify_environment(e.problem, s);
    bool dir_ok = v.classification == MonotoneClass::DecreasingStrict ||
                  v.classification == MonotoneClass::Decreasing;
    cl.add("prop6: non-binary learning classified decreasing", dir_ok);
    if (dir_ok) {
        FreeBoundary fb = extract_boundaries(s, 0.5);
        BoundaryCheck bc = verify_boundary_monotonicity(fb, v, s.grid);
        cl.add("prop6: non-binary boundaries narrow", bc.pass);
    }
}

void verify_deadline(CheckList& cl, const VerifyScale& vs) {
    SolverSettings settings;
    {
        StoppingProblem base = make_wald(1.0, 1.0, 0.1, CoefficientField::constant(1.0),
                                         CoefficientField::constant(1.0),
                                         CoefficientField::constant(0.0));
        DeadlineSpec spec{CoefficientField::constant(0.25), CoefficientField::constant(0.0), "bad"};
        StoppingProblem transformed = apply_deadline(base, spec);
        bool exact = transformed.discount.kind() == CoefficientField::Kind::Constant &&
                     transformed.discount.constant_value() == 0.35;
        for (double x : {0.1, 0.5, 0.9})
            exact = exact && transformed.flow.eval(1.0, x) == base.flow.eval(1.0, x);
        cl.add("deadline: constant-rate transform is field-exact", exact);
    }
    for (const char* name : {"wald_deadline_forced", "wald_deadline_revelation"}) {
        CatalogEntry e = scaled(name, vs);
        ValueSurface s = e.run(settings);
        MonotoneVerdict v = classify_environment(e.problem, s);
        bool dir_ok = v.classification == MonotoneClass::DecreasingStrict ||
                      v.classification == MonotoneClass::Decreasing;
        bool band_ok = false;
        if (dir_ok) {
            FreeBoundary fb = extract_boundaries(s, 0.5);
            band_ok = verify_boundary_monotonicity(fb, v, s.grid).pass;
        }
        cl.add(std::string("deadline: ") + name + " band narrows", dir_ok && band_ok);
    }
}

void verify_controlled(CheckList& cl, const VerifyScale& vs) {
    SolverSettings settings;
    {
        // Singleton menu equals the plain solver.
        StoppingProblem p = make_wald(1.0, 1.0, 0.1, CoefficientField::constant(1.0),
                                      CoefficientField::constant(1.0),
                                      CoefficientField::constant(0.02));
        StoppingProblem pc = p;
        ActionSpec a{"only", p.mu, p.sigma, p.flow, p.discount};
        pc.actions.push_back(a);
        Grid grid = p.make_grid(vs.nt ? vs.nt : 51, vs.nx ? vs.nx : 201, 0.0, 2.0);
        ValueSurface plain = solve_hjb(p, grid, settings);
        ControlledSurface ctrl = solve_controlled(pc, grid, settings);
        double worst = 0.0;
        for (std::size_t i = 0; i < plain.values.size(); ++i)
            worst = std::fmax(worst, std::abs(plain.values[i] - ctrl.surface.values[i]));
        cl.add("controlled: singleton menu matches the plain solver", worst <= 1e-12);
    }
    {
        CatalogEntry e = scaled("controlled_wald_rising_cost", vs);
        ControlledSurface s = solve_controlled(e.problem, e.build_grid(), settings);
        MonotoneVerdict v = controlled_monotonicity_check(s, e.problem);
        cl.add("controlled: rising-cost menu classified DecreasingStrict",
               v.classification == MonotoneClass::DecreasingStrict);
    }
}

void verify_sc(CheckList& cl, const VerifyScale& vs) {
    CatalogEntry e = scaled("wald_stationary", vs);
    Grid grid = e.build_grid();
    SCProfile prof = check_single_crossing(e.problem, grid);
    cl.add("sc: Wald single crossing holds (and SSC)", prof.verdict_sc && prof.verdict_ssc);

    CatalogEntry put = catalog_get("put_stationary");
    Grid pgrid = put.problem.make_grid(vs.nt ? vs.nt : 11, vs.nx ? vs.nx : 201, 0.0, 1.0,
                                       Spacing::Log);
    SCProfile pprof = check_single_crossing(put.problem, pgrid);
    cl.add("sc: put single crossing holds", pprof.verdict_sc);
}

void verify_mc(CheckList& cl, const VerifyScale& vs) {
    SolverSettings settings;
    CatalogEntry e = catalog_get("put_stationary");
    e.nx = vs.nx ? vs.nx : 801;
    ValueSurface s = e.run(settings);
    FreeBoundary fb = extract_boundaries(s, 1.0);
    SimParams sp;
    sp.n_paths = 4000;
    sp.dt = 1e-3;
    sp.seed = vs.seed;
    sp.x0 = 1.0;
    sp.horizon = 120.0;
    ValueEstimate est = estimate_value_mc(e.problem, McRuleKind::Boundary, {&fb, 0.0}, sp);
    // PDE value at x0 = 1.
    const auto& xs = s.grid.x_nodes;
    auto it = std::lower_bound(xs.begin(), xs.end(), 1.0);
    std::size_t i = static_cast<std::size_t>(it - xs.begin());
    double v_pde = s.values[i];
    bool ok = std::abs(est.mean - v_pde) <= 3.0 * est.std_error + 5e-3;
    cl.add("mc: put optimal-rule estimate matches the PDE value", ok);
}

void verify_continuity(CheckList& cl, const VerifyScale& vs) {
    SolverSettings settings;
    CatalogEntry e = scaled("wald_rising_cost", vs);
    ValueSurface s = e.run(settings);
    FreeBoundary fb = extract_boundaries(s, 0.5);
    double cell = s.grid.x_nodes[s.grid.nx() / 2 + 1] - s.grid.x_nodes[s.grid.nx() / 2];
    cl.add("continuity: rising-cost Wald boundary jumps stay under 3 cells",
           fb.max_jump <= 3.0 * cell);
}

int cmd_verify(const GlobalOpts& g, const std::string& suite) {
    VerifyScale vs;
    vs.seed = g.seed;
    apply_grid_override(g.grid_override, vs.nx, vs.nt);

    CheckList cl;
    bool known = true;
    if (suite == "theorem1" || suite == "all") verify_theorem1(cl, vs);
    if (suite == "theorem2" || suite == "all")
        verify_theorem2(cl, vs, suite == "all" ? 5 : 10, true);
    if (suite == "theorem3" || suite == "all") verify_theorem3(cl, vs);
    if (suite == "prop6" || suite == "all") verify_prop6(cl, vs);
    if (suite == "deadline" || suite == "all") verify_deadline(cl, vs);
    if (suite == "controlled" || suite == "all") verify_controlled(cl, vs);
    if (suite == "sc" || suite == "all") verify_sc(cl, vs);
    if (suite == "mc" || suite == "all") verify_mc(cl, vs);
    if (suite == "continuity" || suite == "all") verify_continuity(cl, vs);
    if (cl.items.empty()) known = false;

    if (!known) {
        std::cerr << "unknown verify suite '" << suite << "'\n";
        return 2;
    }

    Manifest m;
    m.command = "verify " + suite;
    m.seed = g.seed;
    m.grid = {{"nx", vs.nx}, {"nt", vs.nt}};
    m.checks = cl.items;
    fs::create_directories(g.out_dir);
    m.write(g.out_dir);

    std::cout << (cl.all() ? "ALL CHECKS PASSED" : "CHECK FAILURES") << " (" << cl.items.size()
              << " checks)\n";
    if (!cl.all() && g.strict_exit) return 1;
    return 0;
}

int cmd_catalog(const GlobalOpts& g, const std::string& action, const std::string& name) {
    if (action == "list") {
        for (const auto& n : catalog_names()) {
            CatalogEntry e = catalog_get(n);
            std::cout << n << "  -  " << e.description << "\n";
        }
        return 0;
    }
    if (action == "show") {
        CatalogEntry e = catalog_get(name);
        ParsedConfig cfg;
        cfg.problem = e.problem;
        cfg.grid.nt = e.nt;
        cfg.grid.nx = e.nx;
        cfg.grid.spacing = e.spacing;
        cfg.solve.mode = e.mode == CatalogEntry::Mode::Stationary
                             ? "stationary"
                             : e.mode == CatalogEntry::Mode::Windowed ? "windowed" : "finite";
        cfg.solve.t_solve = e.t_solve;
        if (e.mode == CatalogEntry::Mode::Windowed) cfg.solve.t_report = e.t_report;
        cfg.solve.stationary_seed = e.stationary_seed;
        if (g.format == "toml")
            std::cout << print_problem_text(cfg);
        else
            std::cout << print_problem(cfg);
        return 0;
    }
    std::cerr << "unknown catalog action '" << action << "'\n";
    return 2;
}

}  // namespace

int run(const std::vector<std::string>& args) {
    CLI::App app{"stopflow: free-boundary solver and verification lab for optimal stopping"};
    app.require_subcommand(1);

    GlobalOpts g;
    app.add_option("--out", g.out_dir, "output directory");
    app.add_option("--seed", g.seed, "RNG seed");
    app.add_option("--grid", g.grid_override, "grid override, e.g. nx=400,nt=200");
    app.add_flag("--strict-exit", g.strict_exit, "nonzero exit on any check failure");
    app.add_option("--format", g.format, "artifact format: csv or json");

    std::string config, config_hi, mode = "flow_discount", boundary_path, suite, cat_action,
                        cat_name;
    std::size_t n_paths = 10000;
    double dt = 1e-3, x0 = 0.0, horizon = 0.0;

    auto* solve = app.add_subcommand("solve", "solve a problem and export artifacts");
    solve->add_option("config", config, "config path or catalog:<name>")->required();

    auto* compare = app.add_subcommand("compare", "comparative statics on a problem pair");
    compare->add_option("lo", config, "dominated-side config")->required();
    compare->add_option("hi", config_hi, "dominating-side config")->required();
    compare->add_option("--mode", mode, "flow_discount | volatility | drift");

    auto* simulate = app.add_subcommand("simulate", "Monte Carlo under a boundary rule");
    simulate->add_option("config", config, "config path or catalog:<name>")->required();
    simulate->add_option("--boundary", boundary_path, "boundary CSV")->required();
    simulate->add_option("--n", n_paths, "number of paths");
    simulate->add_option("--dt", dt, "simulation step");
    simulate->add_option("--x0", x0, "initial state");
    simulate->add_option("--horizon", horizon, "simulation horizon");

    auto* verify = app.add_subcommand("verify", "run a verification suite");
    verify->add_option("suite", suite, "suite name or 'all'")->required();

    auto* catalog = app.add_subcommand("catalog", "list or show built-in models");
    catalog->add_option("action", cat_action, "list | show")->required();
    catalog->add_option("name", cat_name, "entry name (for show)");

    std::vector<const char*> argv;
    argv.push_back("stopflow");
    for (const auto& a : args) argv.push_back(a.c_str());

    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 2;
    }

#ifdef _OPENMP
    if (const char* threads = std::getenv("STOPFLOW_THREADS")) {
        int n = std::atoi(threads);
        if (n > 0) omp_set_num_threads(n);
    }
#endif

    try {
        if (solve->parsed()) return cmd_solve(g, config);
        if (compare->parsed()) return cmd_compare(g, config, config_hi, mode);
        if (simulate->parsed()) return cmd_simulate(g, config, boundary_path, n_paths, dt, x0, horizon);
        if (verify->parsed()) return cmd_verify(g, suite);
        if (catalog->parsed()) return cmd_catalog(g, cat_action, cat_name);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 2;
}

}  // namespace stopflow::cli
