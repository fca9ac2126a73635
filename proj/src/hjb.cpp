#include "stopflow/hjb.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

namespace stopflow {

namespace detail {

namespace {

void eval_layer_impl(const StoppingProblem& problem, double t, const std::vector<double>& x,
                     LayerCoeffs& out, bool parallel) {
    const std::size_t n = x.size();
    out.sig2.resize(n);
    out.mu.resize(n);
    out.r.resize(n);
    out.f.resize(n);
    out.g.resize(n);
#pragma omp parallel for schedule(static) if (parallel)
    for (long long ii = 0; ii < static_cast<long long>(n); ++ii) {
        auto i = static_cast<std::size_t>(ii);
        double s = problem.sigma.eval(t, x[i]);
        out.sig2[i] = s * s;
        out.mu[i] = problem.mu.eval(t, x[i]);
        out.r[i] = problem.discount.eval(t, x[i]);
        out.f[i] = problem.flow.eval(t, x[i]);
        out.g[i] = problem.payoff.value(t, x[i]);
    }
}

}  // namespace

void eval_layer(const StoppingProblem& problem, double t, const std::vector<double>& x,
                LayerCoeffs& out) {
    eval_layer_impl(problem, t, x, out, true);
}

void eval_layer_serial(const StoppingProblem& problem, double t, const std::vector<double>& x,
                       LayerCoeffs& out) {
    eval_layer_impl(problem, t, x, out, false);
}

void build_generator(const std::vector<double>& x, const std::vector<double>& sig2,
                     const std::vector<double>& mu, Stencil& out) {
    const std::size_t n = x.size();
    out.dn.assign(n, 0.0);
    out.ct.assign(n, 0.0);
    out.up.assign(n, 0.0);
    for (std::size_t i = 1; i + 1 < n; ++i) {
        double hm = x[i] - x[i - 1];
        double hp = x[i + 1] - x[i];
        double diff_dn = sig2[i] / (hm * (hm + hp));
        double diff_up = sig2[i] / (hp * (hm + hp));
        double dn = diff_dn, up = diff_up;
        if (mu[i] >= 0.0)
            up += mu[i] / hp;
        else
            dn += -mu[i] / hm;
        out.dn[i] = dn;
        out.up[i] = up;
        out.ct[i] = -(dn + up);
    }
}

PsorResult psor(const Stencil& A_off, const std::vector<double>& A_diag,
                const std::vector<double>& b, const std::vector<double>& g,
                std::vector<double>& v, const SolverSettings& settings, double tol_pde,
                double tol_obstacle) {
    const std::size_t n = v.size();
    PsorResult res;
    if (n < 3) {
        res.converged = true;
        return res;
    }
    const double omega = settings.psor_omega;
    for (std::size_t sweep = 1; sweep <= settings.max_sweeps; ++sweep) {
        for (std::size_t i = 1; i + 1 < n; ++i) {
            double rhs = b[i] - A_off.dn[i] * v[i - 1] - A_off.up[i] * v[i + 1];
            double gs = rhs / A_diag[i];
            double cand = v[i] + omega * (gs - v[i]);
            v[i] = std::fmax(g[i], cand);
        }
        // Convergence is measured on the complementarity system itself:
        // residual must be <= tol everywhere and ~0 off the obstacle.
        double worst = 0.0;
        std::size_t worst_node = 0;
        for (std::size_t i = 1; i + 1 < n; ++i) {
            double resid =
                b[i] - (A_off.dn[i] * v[i - 1] + A_diag[i] * v[i] + A_off.up[i] * v[i + 1]);
            double viol = std::fmax(resid, 0.0);
            if (v[i] - g[i] > tol_obstacle) viol = std::fmax(viol, -resid);
            if (viol > worst) {
                worst = viol;
                worst_node = i;
            }
        }
        res.sweeps = sweep;
        res.worst_violation = worst;
        res.worst_node = worst_node;
        if (worst <= tol_pde) {
            res.converged = true;
            return res;
        }
    }
    return res;
}

}  // namespace detail

namespace {

double payoff_scale(const detail::LayerCoeffs& c) {
    double s = 0.0;
    for (double g : c.g) s = std::fmax(s, std::abs(g));
    return std::fmax(1.0, s);
}

struct LayerStepper {
    const StoppingProblem& problem;
    const std::vector<double>& x;
    SolverSettings settings;
    double scale;
    double tol_pde, tol_obstacle;
    const SolveOptions* options = nullptr;

    detail::LayerCoeffs now, next;
    detail::Stencil G_now, G_next;
    std::vector<double> diag, rhs;

    LayerStepper(const StoppingProblem& p, const std::vector<double>& xn, SolverSettings s,
                 double scale_)
        : problem(p), x(xn), settings(s), scale(scale_) {
        tol_pde = settings.tol_pde_rel * scale;
        tol_obstacle = settings.tol_obstacle_rel * scale;
        diag.resize(x.size());
        rhs.resize(x.size());
    }

    double edge_value(double t, bool upper) const {
        const std::size_t n = x.size();
        if (options && upper && options->upper_dirichlet)
            return std::fmax(options->upper_dirichlet->eval(t, x[n - 1]), now.g[n - 1]);
        if (options && !upper && options->lower_dirichlet)
            return std::fmax(options->lower_dirichlet->eval(t, x[0]), now.g[0]);
        return upper ? now.g[n - 1] : now.g[0];
    }

    /// One implicit step from layer values `w` (at t_next) to layer at t_now.
    /// `v` carries the warm start in and the solution out. Coefficients for
    /// t_now must already sit in `now` / `G_now` (and t_next in `next` /
    /// `G_next` when theta < 1).
    detail::PsorResult step(double t_now, double dt, const std::vector<double>& w,
                            std::vector<double>& v) {
        const std::size_t n = x.size();
        const double th = settings.theta;
        for (std::size_t i = 1; i + 1 < n; ++i) {
            diag[i] = 1.0 / dt + th * (now.r[i] - G_now.ct[i]);
            double expl = 0.0;
            if (th < 1.0) {
                double Lw = G_next.dn[i] * w[i - 1] + G_next.ct[i] * w[i] + G_next.up[i] * w[i + 1];
                expl = (1.0 - th) * (Lw - next.r[i] * w[i] + next.f[i]);
            }
            rhs[i] = w[i] / dt + th * now.f[i] + expl;
        }
        v[0] = edge_value(t_now, false);
        v[n - 1] = edge_value(t_now, true);
        detail::Stencil A_off;
        A_off.dn.resize(n);
        A_off.up.resize(n);
        A_off.ct.resize(n);
        for (std::size_t i = 1; i + 1 < n; ++i) {
            A_off.dn[i] = -th * G_now.dn[i];
            A_off.up[i] = -th * G_now.up[i];
        }
        return detail::psor(A_off, diag, rhs, now.g, v, settings, tol_pde, tol_obstacle);
    }

    /// Discrete PDE residual (b - A v) at interior nodes, 0 at the edges.
    void residuals(double dt, const std::vector<double>& w, const std::vector<double>& v,
                   std::vector<double>& out) const {
        const std::size_t n = x.size();
        out.assign(n, 0.0);
        const double th = settings.theta;
        for (std::size_t i = 1; i + 1 < n; ++i) {
            double Lv = G_now.dn[i] * v[i - 1] + G_now.ct[i] * v[i] + G_now.up[i] * v[i + 1];
            double expl = 0.0;
            if (th < 1.0) {
                double Lw = G_next.dn[i] * w[i - 1] + G_next.ct[i] * w[i] + G_next.up[i] * w[i + 1];
                expl = (1.0 - th) * (Lw - next.r[i] * w[i] + next.f[i]);
            }
            out[i] = (w[i] - v[i]) / dt + th * (Lv - now.r[i] * v[i] + now.f[i]) + expl;
        }
    }
};

[[noreturn]] void throw_psor_failure(const detail::PsorResult& res, const std::vector<double>& x,
                                     double t) {
    char buf[200];
    std::snprintf(buf, sizeof(buf),
                  "PSOR did not reach tol_pde within max_sweeps (worst node x=%.8g at t=%.6g, "
                  "violation %.3e after %zu sweeps)",
                  x[res.worst_node], t, res.worst_violation, res.sweeps);
    throw SolveError(buf);
}

}  // namespace

ValueSurface solve_hjb(const StoppingProblem& problem, const Grid& grid,
                       const SolverSettings& settings, const SolveOptions& options) {
    if (problem.controlled())
        throw SolveError("solve_hjb handles pure stopping problems; use solve_controlled");
    settings.validate();
    grid.validate();

    const std::size_t nt = grid.nt();
    const std::size_t nx = grid.nx();
    const auto& x = grid.x_nodes;

    ValueSurface s;
    s.grid = grid;
    s.values.assign(nt * nx, 0.0);
    s.obstacle.assign(nt * nx, 0.0);
    s.region.assign(nt * nx, Region::Continue);
    s.residual.assign(nt * nx, 0.0);

    detail::LayerCoeffs terminal;
    detail::eval_layer(problem, grid.t_nodes[nt - 1], x, terminal);
    s.scale = payoff_scale(terminal);

    LayerStepper stepper(problem, x, settings, s.scale);
    stepper.options = &options;

    // Terminal layer.
    std::vector<double> w(nx), v(nx), resid(nx);
    if (options.terminal_values) {
        if (options.terminal_values->size() != nx)
            throw SolveError("terminal seed size does not match the grid");
        w = *options.terminal_values;
        s.terminal_is_payoff = false;
        for (std::size_t i = 0; i < nx; ++i) w[i] = std::fmax(w[i], terminal.g[i]);
    } else {
        w = terminal.g;
    }
    for (std::size_t i = 0; i < nx; ++i) {
        s.values[(nt - 1) * nx + i] = w[i];
        s.obstacle[(nt - 1) * nx + i] = terminal.g[i];
        s.region[(nt - 1) * nx + i] =
            (w[i] - terminal.g[i] <= stepper.tol_obstacle) ? Region::Stop : Region::Continue;
    }

    stepper.next = terminal;
    detail::build_generator(x, stepper.next.sig2, stepper.next.mu, stepper.G_next);

    v = w;
    for (std::size_t k = nt - 1; k-- > 0;) {
        double t = grid.t_nodes[k];
        double dt = grid.t_nodes[k + 1] - t;
        detail::eval_layer(problem, t, x, stepper.now);
        detail::build_generator(x, stepper.now.sig2, stepper.now.mu, stepper.G_now);

        auto res = stepper.step(t, dt, w, v);
        if (!res.converged) throw_psor_failure(res, x, t);
        stepper.residuals(dt, w, v, resid);

        for (std::size_t i = 0; i < nx; ++i) {
            std::size_t idx = k * nx + i;
            s.values[idx] = v[i];
            s.obstacle[idx] = stepper.now.g[i];
            s.residual[idx] = resid[i];
            s.region[idx] =
                (v[i] - stepper.now.g[i] <= stepper.tol_obstacle) ? Region::Stop : Region::Continue;
        }

        w = v;
        std::swap(stepper.next, stepper.now);
        std::swap(stepper.G_next, stepper.G_now);
    }
    return s;
}

ValueSurface solve_stationary(const StoppingProblem& problem, const Grid& grid,
                              const SolverSettings& settings, const SolveOptions& options) {
    if (problem.controlled())
        throw SolveError("solve_stationary handles pure stopping problems");
    if (!problem.coefficients_time_invariant())
        throw SolveError("solve_stationary requires time-invariant coefficients");
    settings.validate();

    const std::size_t nx = grid.nx();
    const auto& x = grid.x_nodes;

    detail::LayerCoeffs coeffs;
    detail::eval_layer(problem, 0.0, x, coeffs);
    double scale = payoff_scale(coeffs);

    LayerStepper stepper(problem, x, settings, scale);
    stepper.options = &options;
    stepper.now = coeffs;
    stepper.next = coeffs;
    detail::build_generator(x, coeffs.sig2, coeffs.mu, stepper.G_now);
    stepper.G_next = stepper.G_now;

    const double dt = settings.stationary_dt;
    std::vector<double> w = coeffs.g, v = coeffs.g, resid;

    bool converged = false;
    std::size_t layers = 0;
    for (; layers < settings.stationary_max_layers; ++layers) {
        auto res = stepper.step(0.0, dt, w, v);
        if (!res.converged) throw_psor_failure(res, x, 0.0);
        double change = 0.0;
        for (std::size_t i = 0; i < nx; ++i) change = std::fmax(change, std::abs(v[i] - w[i]));
        w = v;
        if (change < settings.stationary_tol * scale) {
            converged = true;
            break;
        }
    }
    if (!converged)
        throw SolveError(
            "stationary continuation did not converge within stationary_max_layers; the "
            "perpetual problem may be ill-posed");

    stepper.residuals(dt, w, v, resid);

    ValueSurface s;
    s.grid.x_nodes = grid.x_nodes;
    s.grid.spacing = grid.spacing;
    s.grid.t_nodes = {0.0};
    s.values = v;
    s.obstacle = coeffs.g;
    s.residual = resid;
    s.scale = scale;
    s.terminal_is_payoff = false;
    s.region.resize(nx);
    for (std::size_t i = 0; i < nx; ++i)
        s.region[i] =
            (v[i] - coeffs.g[i] <= stepper.tol_obstacle) ? Region::Stop : Region::Continue;
    return s;
}

ValueSurface slice_surface(const ValueSurface& surface, double t_lo, double t_hi) {
    const std::size_t nx = surface.grid.nx();
    ValueSurface out;
    out.grid.x_nodes = surface.grid.x_nodes;
    out.grid.spacing = surface.grid.spacing;
    out.scale = surface.scale;
    out.terminal_is_payoff = false;
    out.action_labels = surface.action_labels;
    for (std::size_t k = 0; k < surface.grid.nt(); ++k) {
        double t = surface.grid.t_nodes[k];
        if (t < t_lo - 1e-12 || t > t_hi + 1e-12) continue;
        out.grid.t_nodes.push_back(t);
        for (std::size_t i = 0; i < nx; ++i) {
            std::size_t idx = k * nx + i;
            out.values.push_back(surface.values[idx]);
            out.obstacle.push_back(surface.obstacle[idx]);
            out.region.push_back(surface.region[idx]);
            out.residual.push_back(surface.residual[idx]);
            if (!surface.action.empty()) out.action.push_back(surface.action[idx]);
        }
    }
    if (out.grid.t_nodes.empty()) throw SolveError("slice window contains no time layers");
    return out;
}

namespace {

// Sub-cell boundary location from the first two continuation nodes: near the
// contact point V - g grows quadratically, so sqrt(V - g) is linear and its
// zero is well conditioned. Falls back to the stopped node when the pattern
// is irregular.
double refine_boundary(const ValueSurface& s, std::size_t layer, std::size_t stop_idx,
                       int direction) {
    const auto& x = s.grid.x_nodes;
    const std::size_t nx = s.grid.nx();
    auto d = [&](std::size_t i) {
        return s.values[layer * nx + i] - s.obstacle[layer * nx + i];
    };
    long long i1 = static_cast<long long>(stop_idx) + direction;
    long long i2 = i1 + direction;
    if (i1 < 0 || i2 < 0 || i1 >= static_cast<long long>(nx) || i2 >= static_cast<long long>(nx))
        return x[stop_idx];
    double d1 = d(static_cast<std::size_t>(i1));
    double d2 = d(static_cast<std::size_t>(i2));
    if (!(d1 > 0.0) || !(d2 > d1)) return x[stop_idx];
    double s1 = std::sqrt(d1), s2 = std::sqrt(d2);
    double x1 = x[static_cast<std::size_t>(i1)], x2 = x[static_cast<std::size_t>(i2)];
    double b = x1 - s1 * (x2 - x1) / (s2 - s1);
    double lo = std::fmin(x[stop_idx], x1), hi = std::fmax(x[stop_idx], x1);
    return std::clamp(b, lo, hi);
}

}  // namespace

FreeBoundary extract_boundaries(const ValueSurface& surface, const std::vector<double>& x_c) {
    const std::size_t nt = surface.grid.nt();
    const std::size_t nx = surface.grid.nx();
    const auto& x = surface.grid.x_nodes;

    FreeBoundary fb;
    fb.t_nodes = surface.grid.t_nodes;
    fb.lower.assign(nt, kNoBoundary);
    fb.upper.assign(nt, kNoBoundary);
    fb.lower_at_edge.assign(nt, false);
    fb.upper_at_edge.assign(nt, false);

    for (std::size_t k = 0; k < nt; ++k) {
        long long c_min = -1, c_max = -1;
        for (std::size_t i = 0; i < nx; ++i) {
            if (surface.region[k * nx + i] == Region::Continue) {
                if (c_min < 0) c_min = static_cast<long long>(i);
                c_max = static_cast<long long>(i);
            }
        }
        if (c_min < 0) {
            // Empty continuation: both boundaries meet at the crossing level.
            auto it = std::upper_bound(x.begin(), x.end(), x_c[k]);
            std::size_t jc = it == x.begin() ? 0 : static_cast<std::size_t>(it - x.begin()) - 1;
            fb.lower[k] = x[jc];
            fb.upper[k] = x[std::min(jc + 1, nx - 1)];
            if (x[jc] == x_c[k]) fb.upper[k] = x[jc];
            continue;
        }
        for (long long i = c_min + 1; i < c_max; ++i)
            if (surface.region[k * nx + static_cast<std::size_t>(i)] == Region::Stop)
                fb.convex_sections = false;

        if (c_min > 0) {
            std::size_t stop_idx = static_cast<std::size_t>(c_min - 1);
            fb.lower[k] = refine_boundary(surface, k, stop_idx, +1);
            fb.lower_at_edge[k] = stop_idx == 0;
        }
        if (c_max + 1 < static_cast<long long>(nx)) {
            std::size_t stop_idx = static_cast<std::size_t>(c_max + 1);
            fb.upper[k] = refine_boundary(surface, k, stop_idx, -1);
            fb.upper_at_edge[k] = stop_idx == nx - 1;
        }
    }

    for (std::size_t k = 1; k < nt; ++k) {
        if (FreeBoundary::present(fb.lower[k]) && FreeBoundary::present(fb.lower[k - 1]))
            fb.max_jump = std::fmax(fb.max_jump, std::abs(fb.lower[k] - fb.lower[k - 1]));
        if (FreeBoundary::present(fb.upper[k]) && FreeBoundary::present(fb.upper[k - 1]))
            fb.max_jump = std::fmax(fb.max_jump, std::abs(fb.upper[k] - fb.upper[k - 1]));
    }
    return fb;
}

FreeBoundary extract_boundaries(const ValueSurface& surface, double x_c) {
    return extract_boundaries(surface, std::vector<double>(surface.grid.nt(), x_c));
}

double SmoothFitGap::max_gap() const {
    double m = 0.0;
    for (double g : lower)
        if (!std::isnan(g)) m = std::fmax(m, g);
    for (double g : upper)
        if (!std::isnan(g)) m = std::fmax(m, g);
    return m;
}

SmoothFitGap smooth_fit_gap(const ValueSurface& surface, const FreeBoundary& boundary,
                            const StoppingPayoff& payoff) {
    const std::size_t nt = surface.grid.nt();
    const std::size_t nx = surface.grid.nx();
    const auto& x = surface.grid.x_nodes;

    SmoothFitGap out;
    out.t_nodes = surface.grid.t_nodes;
    out.lower.assign(nt, kNoBoundary);
    out.upper.assign(nt, kNoBoundary);

    for (std::size_t k = 0; k < nt; ++k) {
        double t = surface.grid.t_nodes[k];
        if (FreeBoundary::present(boundary.lower[k]) && !boundary.lower_at_edge[k]) {
            double b = boundary.lower[k];
            auto it = std::upper_bound(x.begin(), x.end(), b);
            std::size_t i = static_cast<std::size_t>(it - x.begin());
            // First node strictly above the boundary on the continuation side.
            while (i < nx && surface.region[k * nx + i] == Region::Stop) ++i;
            if (i < nx && x[i] > b) {
                double slope = (surface.values[k * nx + i] - payoff.value(t, b)) / (x[i] - b);
                double gx = payoff.branch(payoff.active_branch(t, b - 1e-12 * (x.back() - x.front())))
                                .partial_x(t, b);
                out.lower[k] = std::abs(slope - gx);
            }
        }
        if (FreeBoundary::present(boundary.upper[k]) && !boundary.upper_at_edge[k]) {
            double b = boundary.upper[k];
            auto it = std::lower_bound(x.begin(), x.end(), b);
            long long i = static_cast<long long>(it - x.begin()) - 1;
            while (i >= 0 && surface.region[k * nx + static_cast<std::size_t>(i)] == Region::Stop)
                --i;
            if (i >= 0 && x[static_cast<std::size_t>(i)] < b) {
                auto iu = static_cast<std::size_t>(i);
                double slope = (payoff.value(t, b) - surface.values[k * nx + iu]) / (b - x[iu]);
                double gx = payoff.branch(payoff.active_branch(t, b + 1e-12 * (x.back() - x.front())))
                                .partial_x(t, b);
                out.upper[k] = std::abs(slope - gx);
            }
        }
    }
    return out;
}

}  // namespace stopflow
