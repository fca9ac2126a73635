#include "stopflow/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>

#include <json.hpp>

namespace stopflow {

namespace {

double h_profile(const StoppingProblem& p, int branch, double t, double x) {
    const CoefficientField& g = p.payoff.branch(branch);
    double sig = p.sigma.eval(t, x);
    return p.flow.eval(t, x) + 0.5 * sig * sig * g.partial_xx(t, x) +
           p.mu.eval(t, x) * g.partial_x(t, x) - p.discount.eval(t, x) * g.eval(t, x);
}

double bisect_zero(const std::function<double(double)>& f, double a, double b, double fa,
                   double tol) {
    while (b - a > tol) {
        double m = 0.5 * (a + b);
        double fm = f(m);
        if (fm == 0.0) return m;
        if ((fa < 0.0) != (fm < 0.0))
            b = m;
        else {
            a = m;
            fa = fm;
        }
    }
    return 0.5 * (a + b);
}

}  // namespace

SCProfile check_single_crossing(const StoppingProblem& problem, const Grid& grid) {
    SCProfile out;
    out.t_nodes = grid.t_nodes;
    const std::size_t nt = grid.nt();
    out.x_minus.assign(nt, kNoBoundary);
    out.x_plus.assign(nt, kNoBoundary);

    const auto& x = grid.x_nodes;
    bool sc = true, ssc = true;

    for (std::size_t k = 0; k < nt && sc; ++k) {
        double t = grid.t_nodes[k];
        double xc = problem.payoff.crossing(t, problem.x_lo, problem.x_hi);

        std::vector<double> h(x.size());
        std::vector<bool> kink(x.size(), false);
        double hscale = 0.0;
        const double kink_tol = 1e-9 * (problem.x_hi - problem.x_lo);
        for (std::size_t i = 0; i < x.size(); ++i) {
            kink[i] = std::abs(x[i] - xc) < kink_tol;
            h[i] = h_profile(problem, problem.payoff.active_branch(t, x[i]), t, x[i]);
            hscale = std::fmax(hscale, std::abs(h[i]));
        }
        const double tol = 1e-9 * std::fmax(1.0, hscale);

        // Monotone up below the crossing level, down above it; pairs touching
        // the kink node are excluded (the payoff derivative jumps there).
        for (std::size_t i = 0; i + 1 < x.size(); ++i) {
            if (kink[i] || kink[i + 1]) continue;
            bool below = x[i + 1] <= xc;
            bool above = x[i] >= xc;
            double dh = h[i + 1] - h[i];
            if (below && dh < -tol) sc = false;
            if (above && dh > tol) sc = false;
        }
        if (!sc) {
            out.note = "shape violation at t=" + std::to_string(t);
            break;
        }

        // SSC: a unique sign change on each side of the crossing level.
        auto side_crossing = [&](double lo, double hi, bool neg_then_pos) -> std::optional<double> {
            auto hval = [&](double xx) {
                int branch = problem.payoff.active_branch(t, xx);
                double v = h_profile(problem, branch, t, xx);
                return neg_then_pos ? v : -v;
            };
            const int n = 101;
            int changes = 0;
            double cross_a = lo, cross_fa = hval(lo), cross_b = hi;
            double prev = cross_fa, prev_x = lo;
            for (int i = 1; i < n; ++i) {
                double xx = lo + (hi - lo) * i / (n - 1);
                double v = hval(xx);
                if (prev < -tol && v > tol) {
                    ++changes;
                    cross_a = prev_x;
                    cross_fa = prev;
                    cross_b = xx;
                }
                if (prev > tol && v < -tol) ++changes;  // wrong-order change
                if (std::abs(v) > tol) {
                    prev = v;
                    prev_x = xx;
                }
            }
            if (changes > 1) return std::nullopt;
            if (changes == 0) {
                // One-signed h: the crossing point degenerates to an endpoint.
                return hval(0.5 * (lo + hi)) >= 0.0 ? lo : hi;
            }
            auto f = [&](double xx) { return hval(xx); };
            return bisect_zero(f, cross_a, cross_b, cross_fa, 1e-10 * (problem.x_hi - problem.x_lo));
        };

        double m = problem.default_margin();
        auto xm = side_crossing(problem.x_lo + m, xc, true);
        auto xp = side_crossing(xc, problem.x_hi - m, false);
        if (!xm || !xp) {
            ssc = false;
        } else {
            out.x_minus[k] = *xm;
            out.x_plus[k] = *xp;
        }
    }

    out.verdict_sc = sc;
    out.verdict_ssc = sc && ssc;
    return out;
}

const char* to_string(MonotoneClass c) {
    switch (c) {
        case MonotoneClass::IncreasingStrict: return "IncreasingStrict";
        case MonotoneClass::Increasing: return "Increasing";
        case MonotoneClass::Flat: return "Flat";
        case MonotoneClass::Decreasing: return "Decreasing";
        case MonotoneClass::DecreasingStrict: return "DecreasingStrict";
        case MonotoneClass::Mixed: return "Mixed";
    }
    return "?";
}

MonotoneVerdict classify_environment(const StoppingProblem& problem, const ValueSurface& surface,
                                     const ClassifySettings& cs) {
    std::vector<detail::CoeffSet> sets{{&problem.mu, &problem.sigma, &problem.flow,
                                        &problem.discount}};
    return detail::classify_core(problem, sets, surface, cs);
}

MonotoneVerdict detail::classify_core(const StoppingProblem& problem,
                                      const std::vector<detail::CoeffSet>& sets,
                                      const ValueSurface& surface, const ClassifySettings& cs) {
    const std::size_t nt = surface.grid.nt();
    const std::size_t nx = surface.grid.nx();
    const auto& t = surface.grid.t_nodes;
    const auto& x = surface.grid.x_nodes;

    MonotoneVerdict out;
    if (nt < 2) {
        out.note = "surface has a single time layer";
        out.classification = MonotoneClass::Flat;
        return out;
    }

    double vt_min = 1e300, vt_max = -1e300;
    double int_min = 1e300, int_max = -1e300;
    double cvt_min = 1e300, cvt_max = -1e300;
    std::size_t n_cont = 0, n_kink = 0;
    bool too_coarse = false;
    WitnessNode w_vtmin, w_vtmax, w_intmin, w_intmax;

    for (std::size_t k = 0; k < nt; ++k) {
        if (cs.t_min && t[k] < *cs.t_min) continue;
        if (cs.t_max && t[k] > *cs.t_max) continue;
        std::size_t kb = k == 0 ? 1 : k;  // backward difference, forward on the first layer
        double dt = t[kb] - t[kb - 1];
        double xc = problem.payoff.crossing(t[k], problem.x_lo, problem.x_hi);

        // Collar: continuation nodes within cs.collar_cells of a region flip
        // are kept for the weak test but excluded from the strict one.
        std::vector<bool> near_boundary(nx, false);
        for (std::size_t i = 1; i + 1 < nx; ++i) {
            if (surface.region[k * nx + i] != surface.region[k * nx + i - 1]) {
                for (std::size_t d = 0; d <= cs.collar_cells; ++d) {
                    if (i + d < nx) near_boundary[i + d] = true;
                    if (i >= d + 1) near_boundary[i - d - 1] = true;
                }
            }
        }

        std::size_t layer_cont = 0;
        for (std::size_t i = 1; i + 1 < nx; ++i) {
            if (surface.region[k * nx + i] != Region::Continue) continue;
            ++layer_cont;
            ++n_cont;
            double vt = (surface.values[kb * nx + i] - surface.values[(kb - 1) * nx + i]) / dt;
            if (vt < vt_min) {
                vt_min = vt;
                w_vtmin = {t[k], x[i], vt};
            }
            if (vt > vt_max) {
                vt_max = vt;
                w_vtmax = {t[k], x[i], vt};
            }
            if (!near_boundary[i]) {
                cvt_min = std::fmin(cvt_min, vt);
                cvt_max = std::fmax(cvt_max, vt);
            }

            // Kink nodes are skipped for the integrand (payoff derivatives
            // are undefined there and V_xx carries the kink).
            double hm = x[i] - x[i - 1], hp = x[i + 1] - x[i];
            if (std::abs(x[i] - xc) < 0.5 * std::fmin(hm, hp)) {
                ++n_kink;
                continue;
            }
            double vx = (surface.values[k * nx + i + 1] - surface.values[k * nx + i - 1]) / (hm + hp);
            double vxx = 2.0 *
                         ((surface.values[k * nx + i + 1] - surface.values[k * nx + i]) / hp -
                          (surface.values[k * nx + i] - surface.values[k * nx + i - 1]) / hm) /
                         (hm + hp);
            for (const auto& set : sets) {
                double integrand = set.sigma->partial_t(t[k], x[i]) * vxx +
                                   set.mu->partial_t(t[k], x[i]) * vx -
                                   set.discount->partial_t(t[k], x[i]) *
                                       surface.values[k * nx + i] +
                                   set.flow->partial_t(t[k], x[i]);
                if (integrand < int_min) {
                    int_min = integrand;
                    w_intmin = {t[k], x[i], integrand};
                }
                if (integrand > int_max) {
                    int_max = integrand;
                    w_intmax = {t[k], x[i], integrand};
                }
            }
        }
        if (layer_cont >= 1 && layer_cont < 3) too_coarse = true;
    }

    if (n_cont == 0) {
        out.classification = MonotoneClass::Flat;
        out.note = "no continuation nodes (V = g everywhere)";
        return out;
    }

    out.vt_min = vt_min;
    out.vt_max = vt_max;
    out.iov_min = int_min == 1e300 ? 0.0 : int_min;
    out.dov_max = int_max == -1e300 ? 0.0 : int_max;
    out.vt_collar_min = cvt_min == 1e300 ? 0.0 : cvt_min;
    out.vt_collar_max = cvt_max == -1e300 ? 0.0 : cvt_max;
    out.continue_nodes = n_cont;
    out.skipped_kink_nodes = n_kink;
    out.witnesses = {w_vtmin, w_vtmax, w_intmin, w_intmax};

    if (too_coarse) {
        out.classification = MonotoneClass::Mixed;
        out.note = "grid too coarse: a layer has fewer than 3 continuation nodes";
        return out;
    }

    const double scale = surface.scale;
    const double vt_absmax = std::fmax(std::abs(vt_min), std::abs(vt_max));
    const double tol_flat = 1e-5 * scale;
    const double tol_weak = std::fmax(1e-9 * scale, 1e-3 * vt_absmax);
    const double int_absmax = std::fmax(std::abs(out.iov_min), std::abs(out.dov_max));
    const double tol_int = std::fmax(1e-9 * scale, 1e-6 * int_absmax);
    const double tol_strict = 1e-8 * scale;

    if (vt_absmax <= tol_flat) {
        out.classification = MonotoneClass::Flat;
        return out;
    }
    if (vt_min >= -tol_weak) {
        bool strict = out.iov_min >= -tol_int && out.vt_collar_min > tol_strict;
        out.classification = strict ? MonotoneClass::IncreasingStrict : MonotoneClass::Increasing;
        return out;
    }
    if (vt_max <= tol_weak) {
        bool strict = out.dov_max <= tol_int && out.vt_collar_max < -tol_strict;
        out.classification = strict ? MonotoneClass::DecreasingStrict : MonotoneClass::Decreasing;
        return out;
    }
    out.classification = MonotoneClass::Mixed;
    out.note = "V_t changes sign on the continuation region";
    return out;
}

namespace {

double local_cell(const Grid& grid, double b) {
    const auto& x = grid.x_nodes;
    auto it = std::upper_bound(x.begin(), x.end(), b);
    std::size_t i = it == x.begin() ? 1 : static_cast<std::size_t>(it - x.begin());
    i = std::min(i, x.size() - 1);
    return x[i] - x[i - 1];
}

}  // namespace

BoundaryCheck verify_boundary_monotonicity(const FreeBoundary& boundary,
                                           const MonotoneVerdict& verdict, const Grid& grid,
                                           const BoundaryCheckSettings& bs) {
    BoundaryCheck out;
    if (verdict.classification == MonotoneClass::Mixed)
        throw InvariantError("verify_boundary_monotonicity requires a non-Mixed verdict");

    const std::size_t nt = boundary.t_nodes.size();
    // Direction of the *band width* implied by the verdict: -1 narrowing
    // (decreasing environment), +1 widening, 0 flat.
    int dir = 0;
    switch (verdict.classification) {
        case MonotoneClass::Decreasing:
        case MonotoneClass::DecreasingStrict: dir = -1; break;
        case MonotoneClass::Increasing:
        case MonotoneClass::IncreasingStrict: dir = +1; break;
        default: dir = 0;
    }
    bool strict = verdict.classification == MonotoneClass::IncreasingStrict ||
                  verdict.classification == MonotoneClass::DecreasingStrict;

    auto check_side = [&](const std::vector<double>& b, const std::vector<bool>& at_edge,
                          int side_dir, double& cumulative) {
        // side_dir: expected sign of db/dt for this side under `dir`.
        double first = kNoBoundary, last = kNoBoundary;
        double b_min = 1e300, b_max = -1e300;
        for (double z : b)
            if (FreeBoundary::present(z)) {
                b_min = std::fmin(b_min, z);
                b_max = std::fmax(b_max, z);
            }
        if (dir == 0 && b_max >= b_min && b_max - b_min > local_cell(grid, b_min) + 1e-12)
            ++out.weak_violations;  // flat verdict: boundary drifted beyond one cell overall
        for (std::size_t k = 0; k + 1 < nt; ++k) {
            if (!FreeBoundary::present(b[k]) || !FreeBoundary::present(b[k + 1])) continue;
            if (!FreeBoundary::present(first)) first = b[k];
            last = b[k + 1];
            double db = b[k + 1] - b[k];
            double cell = local_cell(grid, b[k]);
            if (dir == 0) {
                if (std::abs(db) > cell + 1e-12) {
                    ++out.weak_violations;
                    out.worst_reversal = std::fmax(out.worst_reversal, std::abs(db) - cell);
                }
            } else if (side_dir > 0 ? db < -(cell + 1e-12) : db > cell + 1e-12) {
                ++out.weak_violations;
                out.worst_reversal = std::fmax(out.worst_reversal, std::abs(db) - cell);
            }
        }
        cumulative = (FreeBoundary::present(first) && FreeBoundary::present(last))
                         ? last - first
                         : 0.0;

        if (strict && dir != 0) {
            const std::size_t w = bs.window_steps;
            for (std::size_t k = 0; k + w < nt; ++k) {
                bool usable = true;
                for (std::size_t j = k; j <= k + w && usable; ++j)
                    if (!FreeBoundary::present(b[j]) || at_edge[j]) usable = false;
                if (!usable) continue;
                double move = (b[k + w] - b[k]) * side_dir;
                double cell = local_cell(grid, b[k]);
                if (move < bs.strict_cells * cell) ++out.strict_violations;
            }
        }
    };

    // Narrowing band: lower moves up (+1), upper moves down (-1); widening
    // reverses both. Flat checks both sides for stasis.
    int lower_dir = dir == 0 ? 0 : (dir < 0 ? +1 : -1);
    int upper_dir = dir == 0 ? 0 : (dir < 0 ? -1 : +1);
    check_side(boundary.lower, boundary.lower_at_edge, lower_dir, out.cumulative_lower);
    check_side(boundary.upper, boundary.upper_at_edge, upper_dir, out.cumulative_upper);

    out.pass = out.weak_violations == 0 && out.strict_violations == 0;
    return out;
}

const char* to_string(CompareMode m) {
    switch (m) {
        case CompareMode::FlowDiscount: return "flow_discount";
        case CompareMode::Volatility: return "volatility";
        case CompareMode::Drift: return "drift";
        case CompareMode::StoppingPayoff: return "stopping_payoff";
    }
    return "?";
}

namespace {

enum class Shape { Convex, Concave, Neither };
enum class Slope { NonDecreasing, NonIncreasing, Neither };

Shape surface_shape(const ValueSurface& s) {
    const std::size_t nt = s.grid.nt(), nx = s.grid.nx();
    const auto& x = s.grid.x_nodes;
    double tol = 1e-7 * s.scale;
    bool convex = true, concave = true;
    for (std::size_t k = 0; k < nt; ++k)
        for (std::size_t i = 1; i + 1 < nx; ++i) {
            double hm = x[i] - x[i - 1], hp = x[i + 1] - x[i];
            double d2 = (s.values[k * nx + i + 1] - s.values[k * nx + i]) / hp -
                        (s.values[k * nx + i] - s.values[k * nx + i - 1]) / hm;
            if (d2 < -tol * (hm + hp) / 2.0) convex = false;
            if (d2 > tol * (hm + hp) / 2.0) concave = false;
        }
    if (convex) return Shape::Convex;
    if (concave) return Shape::Concave;
    return Shape::Neither;
}

Slope surface_slope(const ValueSurface& s) {
    const std::size_t nt = s.grid.nt(), nx = s.grid.nx();
    double tol = 1e-9 * s.scale;
    bool up = true, down = true;
    for (std::size_t k = 0; k < nt; ++k)
        for (std::size_t i = 0; i + 1 < nx; ++i) {
            double d = s.values[k * nx + i + 1] - s.values[k * nx + i];
            if (d < -tol) up = false;
            if (d > tol) down = false;
        }
    if (up) return Slope::NonDecreasing;
    if (down) return Slope::NonIncreasing;
    return Slope::Neither;
}

struct FieldOrder {
    bool leq = true, geq = true, equal = true;
};

FieldOrder sample_order(const CoefficientField& a, const CoefficientField& b, const Grid& grid) {
    FieldOrder o;
    for (double t : grid.t_nodes)
        for (double x : grid.x_nodes) {
            double va = a.eval(t, x), vb = b.eval(t, x);
            double tol = 1e-12 * std::fmax(1.0, std::fmax(std::abs(va), std::abs(vb)));
            if (va > vb + tol) o.leq = false;
            if (va < vb - tol) o.geq = false;
            if (std::abs(va - vb) > tol) o.equal = false;
        }
    return o;
}

std::size_t inclusion_violations(const ValueSurface& inner, const ValueSurface& outer) {
    // Nodes continuing in `inner` must continue in `outer` within one cell.
    const std::size_t nt = inner.grid.nt(), nx = inner.grid.nx();
    std::size_t bad = 0;
    for (std::size_t k = 0; k < nt; ++k)
        for (std::size_t i = 0; i < nx; ++i) {
            if (inner.region[k * nx + i] != Region::Continue) continue;
            bool ok = outer.region[k * nx + i] == Region::Continue ||
                      (i > 0 && outer.region[k * nx + i - 1] == Region::Continue) ||
                      (i + 1 < nx && outer.region[k * nx + i + 1] == Region::Continue);
            if (!ok) ++bad;
        }
    return bad;
}

}  // namespace

ComparisonReport compare_problems(const StoppingProblem& lo, const StoppingProblem& hi,
                                  CompareMode mode, const Grid& grid,
                                  const SolverSettings& settings, const CompareSettings& cs) {
    ComparisonReport rep;
    rep.mode = mode;

    FieldOrder mu_ord = sample_order(lo.mu, hi.mu, grid);
    FieldOrder sig_ord = sample_order(lo.sigma, hi.sigma, grid);
    FieldOrder f_ord = sample_order(lo.flow, hi.flow, grid);
    FieldOrder r_ord = sample_order(lo.discount, hi.discount, grid);
    FieldOrder ga_ord = sample_order(lo.payoff.branch_a, hi.payoff.branch_a, grid);
    FieldOrder gb_ord = sample_order(lo.payoff.branch_b, hi.payoff.branch_b, grid);
    bool payoff_equal = ga_ord.equal && gb_ord.equal;

    switch (mode) {
        case CompareMode::FlowDiscount:
        case CompareMode::StoppingPayoff:
            rep.precondition_ok =
                mu_ord.equal && sig_ord.equal && payoff_equal && f_ord.leq && r_ord.geq;
            if (!rep.precondition_ok)
                rep.precondition_note =
                    "needs shared mu/sigma/g with f_lo <= f_hi and r_lo >= r_hi";
            break;
        case CompareMode::Volatility:
            rep.precondition_ok =
                mu_ord.equal && f_ord.equal && r_ord.equal && payoff_equal && sig_ord.leq;
            if (!rep.precondition_ok)
                rep.precondition_note = "needs shared mu/f/r/g with sigma_lo <= sigma_hi";
            break;
        case CompareMode::Drift:
            rep.precondition_ok =
                sig_ord.equal && f_ord.equal && r_ord.equal && payoff_equal && mu_ord.leq;
            if (!rep.precondition_ok)
                rep.precondition_note = "needs shared sigma/f/r/g with mu_lo <= mu_hi";
            break;
    }
    if (!rep.precondition_ok) return rep;

    ValueSurface s_lo, s_hi;
    std::exception_ptr err;
#pragma omp parallel sections
    {
#pragma omp section
        {
            try {
                s_lo = solve_hjb(lo, grid, settings, cs.lo_options);
            } catch (...) {
                err = std::current_exception();
            }
        }
#pragma omp section
        {
            try {
                s_hi = solve_hjb(hi, grid, settings, cs.hi_options);
            } catch (...) {
                err = std::current_exception();
            }
        }
    }
    if (err) std::rethrow_exception(err);

    // Theorem-3 modes condition on the solved value function.
    if (mode == CompareMode::Volatility) {
        Shape sh_lo = surface_shape(s_lo), sh_hi = surface_shape(s_hi);
        if (sh_lo == Shape::Convex || sh_hi == Shape::Convex) {
            rep.hypothesis = "convex";
        } else if (sh_lo == Shape::Concave || sh_hi == Shape::Concave) {
            rep.hypothesis = "concave";
            rep.reversed = true;
        } else {
            rep.hypothesis = "neither convex nor concave";
            rep.hypothesis_ok = false;
        }
    } else if (mode == CompareMode::Drift) {
        Slope sl_lo = surface_slope(s_lo), sl_hi = surface_slope(s_hi);
        if (sl_lo == Slope::NonDecreasing || sl_hi == Slope::NonDecreasing) {
            rep.hypothesis = "nondecreasing";
        } else if (sl_lo == Slope::NonIncreasing || sl_hi == Slope::NonIncreasing) {
            rep.hypothesis = "nonincreasing";
            rep.reversed = true;
        } else {
            rep.hypothesis = "neither monotone direction";
            rep.hypothesis_ok = false;
        }
    }
    if (!rep.hypothesis_ok) return rep;

    const ValueSurface& dominant = rep.reversed ? s_lo : s_hi;
    const ValueSurface& dominated = rep.reversed ? s_hi : s_lo;

    double scale = std::fmax(s_lo.scale, s_hi.scale);
    rep.tol_compare = cs.tol_compare_rel * scale;
    std::size_t n = dominant.values.size(), ordered = 0;
    double worst = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double gap = dominated.values[i] - dominant.values[i];
        if (gap <= rep.tol_compare) ++ordered;
        worst = std::fmax(worst, gap);
    }
    rep.dominance_fraction = static_cast<double>(ordered) / static_cast<double>(n);
    rep.worst_violation = worst;
    rep.inclusion_violations = inclusion_violations(dominated, dominant);
    rep.pass = worst <= rep.tol_compare && rep.inclusion_violations == 0;
    return rep;
}

StoppingProblem transform_to_zero_payoff(const StoppingProblem& problem,
                                         const CoefficientField& g_smooth) {
    auto src = [](const CoefficientField& f) {
        auto s = f.source();
        if (!s) throw InvariantError("transform requires expression or constant fields");
        return "(" + *s + ")";
    };
    if (g_smooth.kind() == CoefficientField::Kind::Expression && g_smooth.expr().has_kink())
        throw InvariantError("transform requires a kink-free stopping payoff");
    Expr g = g_smooth.kind() == CoefficientField::Kind::Expression
                 ? g_smooth.expr()
                 : Expr::constant(g_smooth.constant_value());
    auto gx = g.derivative('x');
    auto gxx = gx ? gx->derivative('x') : std::nullopt;
    if (!gx || !gxx) throw InvariantError("transform requires symbolic payoff derivatives");

    std::string flow_src = src(problem.flow) + "+" + src(problem.mu) + "*(" + gx->source() +
                           ")+0.5*" + src(problem.sigma) + "^2*(" + gxx->source() + ")-" +
                           src(problem.discount) + "*(" + g.source() + ")";
    StoppingProblem out = problem;
    out.flow = CoefficientField::expression(flow_src);
    out.payoff.branch_a = CoefficientField::constant(0.0);
    out.payoff.branch_b = CoefficientField::constant(0.0);
    out.payoff.crossing_hint = problem.payoff.crossing(0.0, problem.x_lo, problem.x_hi);
    return out;
}

ComparisonReport shifted_payoff_compare(const StoppingProblem& problem,
                                        const CoefficientField& g_alternate, const Grid& grid,
                                        const SolverSettings& settings, const CompareSettings& cs) {
    // Working payoff: the problem's own (smooth) branch_a; branch_b must not
    // interfere (use a constant far below when absent).
    StoppingProblem base = transform_to_zero_payoff(problem, problem.payoff.branch_a);
    StoppingProblem alt = transform_to_zero_payoff(problem, g_alternate);
    FieldOrder f_ord = sample_order(base.flow, alt.flow, grid);
    if (f_ord.leq) return compare_problems(base, alt, CompareMode::FlowDiscount, grid, settings, cs);
    ComparisonReport rep =
        compare_problems(alt, base, CompareMode::FlowDiscount, grid, settings, cs);
    rep.reversed = true;
    return rep;
}

const char* to_string(BandPrediction p) {
    switch (p) {
        case BandPrediction::Widening: return "widening";
        case BandPrediction::Narrowing: return "narrowing";
        case BandPrediction::Flat: return "flat";
        case BandPrediction::NoPrediction: return "no_prediction";
    }
    return "?";
}

namespace {

// Sign class of a sampled quantity: 0 all zero, +1 nonnegative (+2 with a
// strict node), -1/-2 nonpositive, 9 mixed.
int sign_class(const std::vector<double>& v, double tol) {
    bool pos = false, neg = false;
    for (double z : v) {
        if (z > tol) pos = true;
        if (z < -tol) neg = true;
    }
    if (pos && neg) return 9;
    if (pos) return +2;
    if (neg) return -2;
    return 0;
}

}  // namespace

SignTableReport corollary2_sign_table(const StoppingProblem& problem, const Grid& grid,
                                      const SolverSettings& settings, const SolveOptions& options) {
    SignTableReport rep;

    // Probe the four time-derivative conditions on the grid (away from the
    // payoff kink). A time-dependent payoff is folded in through the Ito
    // reduction: its (d/dt + L - r) g term joins the flow derivative.
    std::vector<double> sf, sr, smu, ssig;
    const bool g_time_dep = problem.payoff.time_dependent();
    for (double t : grid.t_nodes) {
        double xc = problem.payoff.crossing(t, problem.x_lo, problem.x_hi);
        for (double x : grid.x_nodes) {
            if (std::abs(x - xc) < 1e-9 * (problem.x_hi - problem.x_lo)) continue;
            sr.push_back(-problem.discount.partial_t(t, x));
            ssig.push_back(problem.sigma.partial_t(t, x));
            double gx = problem.payoff.slope_x(t, x);
            smu.push_back(problem.mu.partial_t(t, x) * gx);
            double ft = problem.flow.partial_t(t, x);
            if (g_time_dep) {
                // d/dt of (g_t + mu g_x + sigma^2/2 g_xx - r g) via finite
                // differences in t of the active branch's contribution.
                auto h = [&](double tt) {
                    int br = problem.payoff.active_branch(tt, x);
                    const CoefficientField& g = problem.payoff.branch(br);
                    double sig = problem.sigma.eval(tt, x);
                    return g.partial_t(tt, x) + problem.mu.eval(tt, x) * g.partial_x(tt, x) +
                           0.5 * sig * sig * g.partial_xx(tt, x) -
                           problem.discount.eval(tt, x) * g.eval(tt, x);
                };
                double dt = 1e-5 * std::fmax(1.0, std::abs(t));
                ft += (h(t + dt) - h(std::fmax(0.0, t - dt))) /
                      (t + dt - std::fmax(0.0, t - dt));
            }
            sf.push_back(ft);
        }
    }

    double tol = 1e-10;
    rep.sign_f = sign_class(sf, tol);
    rep.sign_neg_r = sign_class(sr, tol);
    rep.sign_mu_gx = sign_class(smu, tol);
    rep.sign_sigma = sign_class(ssig, tol);

    auto nonneg = [](int s) { return s == 0 || s > 0; };
    auto nonpos = [](int s) { return s == 0 || (s < 0 && s != 9); };
    bool any_mixed = rep.sign_f == 9 || rep.sign_neg_r == 9 || rep.sign_mu_gx == 9 ||
                     rep.sign_sigma == 9;
    bool all_zero = rep.sign_f == 0 && rep.sign_neg_r == 0 && rep.sign_mu_gx == 0 &&
                    rep.sign_sigma == 0;

    if (any_mixed) {
        rep.prediction = BandPrediction::NoPrediction;
        rep.note = "sign conditions are mixed; no direction is implied";
        return rep;
    }
    if (all_zero) {
        rep.prediction = BandPrediction::Flat;
    } else if (nonneg(rep.sign_f) && nonneg(rep.sign_neg_r) && nonneg(rep.sign_mu_gx) &&
               nonneg(rep.sign_sigma)) {
        rep.prediction = BandPrediction::Widening;
    } else if (nonpos(rep.sign_f) && nonpos(rep.sign_neg_r) && nonpos(rep.sign_mu_gx) &&
               nonpos(rep.sign_sigma)) {
        rep.prediction = BandPrediction::Narrowing;
    } else {
        rep.prediction = BandPrediction::NoPrediction;
        rep.note = "sign conditions disagree; no direction is implied";
        return rep;
    }

    ValueSurface s = solve_hjb(problem, grid, settings, options);
    std::vector<double> xc(grid.nt());
    for (std::size_t k = 0; k < grid.nt(); ++k)
        xc[k] = problem.payoff.crossing(grid.t_nodes[k], problem.x_lo, problem.x_hi);
    FreeBoundary fb = extract_boundaries(s, xc);

    MonotoneVerdict v;
    v.classification = rep.prediction == BandPrediction::Flat
                           ? MonotoneClass::Flat
                           : (rep.prediction == BandPrediction::Widening ? MonotoneClass::Increasing
                                                                         : MonotoneClass::Decreasing);
    BoundaryCheck bc = verify_boundary_monotonicity(fb, v, grid);
    rep.verified = bc.pass;
    if (!bc.pass) rep.note = "solver boundaries moved against the prediction";
    return rep;
}

namespace {

nlohmann::json witness_json(const WitnessNode& w) {
    return {{"t", w.t}, {"x", w.x}, {"value", w.value}};
}

}  // namespace

std::string ComparisonReport::json() const {
    nlohmann::json j{
        {"mode", to_string(mode)},
        {"precondition_ok", precondition_ok},
        {"precondition_note", precondition_note},
        {"hypothesis", hypothesis},
        {"hypothesis_ok", hypothesis_ok},
        {"reversed", reversed},
        {"value_dominance",
         {{"fraction", dominance_fraction}, {"worst_violation", worst_violation}}},
        {"region_inclusion", {{"violations", inclusion_violations}}},
        {"tol_compare", tol_compare},
        {"pass", pass},
    };
    return j.dump(2);
}

std::string SignTableReport::json() const {
    nlohmann::json j{
        {"sign_f", sign_f},
        {"sign_neg_r", sign_neg_r},
        {"sign_mu_gx", sign_mu_gx},
        {"sign_sigma", sign_sigma},
        {"prediction", to_string(prediction)},
        {"verified", verified},
        {"note", note},
    };
    return j.dump(2);
}

std::string verdict_json(const MonotoneVerdict& v) {
    nlohmann::json j{
        {"classification", to_string(v.classification)},
        {"vt_min", v.vt_min},
        {"vt_max", v.vt_max},
        {"iov_min", v.iov_min},
        {"dov_max", v.dov_max},
        {"vt_collar_min", v.vt_collar_min},
        {"vt_collar_max", v.vt_collar_max},
        {"continue_nodes", v.continue_nodes},
        {"skipped_kink_nodes", v.skipped_kink_nodes},
        {"note", v.note},
    };
    j["witnesses"] = nlohmann::json::array();
    for (const auto& w : v.witnesses) j["witnesses"].push_back(witness_json(w));
    return j.dump(2);
}

std::string sc_profile_json(const SCProfile& p) {
    nlohmann::json j{
        {"verdict_sc", p.verdict_sc},
        {"verdict_ssc", p.verdict_ssc},
        {"inconclusive", p.inconclusive},
        {"note", p.note},
    };
    auto arr = [](const std::vector<double>& v) {
        nlohmann::json a = nlohmann::json::array();
        for (double z : v) {
            if (std::isnan(z))
                a.push_back(nullptr);
            else
                a.push_back(z);
        }
        return a;
    };
    j["t_nodes"] = arr(p.t_nodes);
    j["x_minus"] = arr(p.x_minus);
    j["x_plus"] = arr(p.x_plus);
    return j.dump(2);
}

}  // namespace stopflow
