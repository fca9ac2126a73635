#include "stopflow/control.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

namespace stopflow {

namespace {

struct ActionLayer {
    detail::LayerCoeffs coeffs;
    detail::Stencil G;
};

void eval_action_layer(const ActionSpec& a, const StoppingPayoff& payoff, double t,
                       const std::vector<double>& x, ActionLayer& out) {
    const std::size_t n = x.size();
    out.coeffs.sig2.resize(n);
    out.coeffs.mu.resize(n);
    out.coeffs.r.resize(n);
    out.coeffs.f.resize(n);
    out.coeffs.g.resize(n);
#pragma omp parallel for schedule(static)
    for (long long ii = 0; ii < static_cast<long long>(n); ++ii) {
        auto i = static_cast<std::size_t>(ii);
        double s = a.sigma.eval(t, x[i]);
        out.coeffs.sig2[i] = s * s;
        out.coeffs.mu[i] = a.mu.eval(t, x[i]);
        out.coeffs.r[i] = a.discount.eval(t, x[i]);
        out.coeffs.f[i] = a.flow.eval(t, x[i]);
        out.coeffs.g[i] = payoff.value(t, x[i]);
    }
    detail::build_generator(x, out.coeffs.sig2, out.coeffs.mu, out.G);
}

}  // namespace

ControlledSurface solve_controlled(const StoppingProblem& problem, const Grid& grid,
                                   const SolverSettings& settings, const SolveOptions& options) {
    if (!problem.controlled())
        throw SolveError("solve_controlled requires a non-empty action set");
    settings.validate();
    grid.validate();
    SolverSettings psor_settings = settings;
    psor_settings.theta = 1.0;  // policy iteration is defined on the implicit scheme

    const std::size_t nt = grid.nt();
    const std::size_t nx = grid.nx();
    const std::size_t na = problem.actions.size();
    const auto& x = grid.x_nodes;

    ControlledSurface out;
    ValueSurface& s = out.surface;
    s.grid = grid;
    s.values.assign(nt * nx, 0.0);
    s.obstacle.assign(nt * nx, 0.0);
    s.region.assign(nt * nx, Region::Continue);
    s.residual.assign(nt * nx, 0.0);
    s.action.assign(nt * nx, 0);
    for (const auto& a : problem.actions) s.action_labels.push_back(a.label);

    std::vector<ActionLayer> layers(na);
    for (std::size_t a = 0; a < na; ++a)
        eval_action_layer(problem.actions[a], problem.payoff, grid.t_nodes[nt - 1], x, layers[a]);

    double scale = 1.0;
    for (double g : layers[0].coeffs.g) scale = std::fmax(scale, std::abs(g));
    s.scale = scale;
    const double tol_pde = settings.tol_pde_rel * scale;
    const double tol_obstacle = settings.tol_obstacle_rel * scale;

    // Terminal layer.
    std::vector<double> w(nx), v(nx);
    if (options.terminal_values) {
        if (options.terminal_values->size() != nx)
            throw SolveError("terminal seed size does not match the grid");
        w = *options.terminal_values;
        s.terminal_is_payoff = false;
        for (std::size_t i = 0; i < nx; ++i) w[i] = std::fmax(w[i], layers[0].coeffs.g[i]);
    } else {
        w = layers[0].coeffs.g;
    }
    for (std::size_t i = 0; i < nx; ++i) {
        s.values[(nt - 1) * nx + i] = w[i];
        s.obstacle[(nt - 1) * nx + i] = layers[0].coeffs.g[i];
        s.region[(nt - 1) * nx + i] =
            (w[i] - layers[0].coeffs.g[i] <= tol_obstacle) ? Region::Stop : Region::Continue;
    }

    std::vector<std::int32_t> policy(nx, 0), new_policy(nx, 0);
    std::vector<double> diag(nx), rhs(nx), resid(nx);
    detail::Stencil A_off;
    A_off.dn.resize(nx);
    A_off.up.resize(nx);
    A_off.ct.resize(nx);

    const std::size_t max_policy_iters = 100;
    v = w;

    for (std::size_t k = nt - 1; k-- > 0;) {
        double t = grid.t_nodes[k];
        double dt = grid.t_nodes[k + 1] - t;
        for (std::size_t a = 0; a < na; ++a)
            eval_action_layer(problem.actions[a], problem.payoff, t, x, layers[a]);
        const std::vector<double>& g = layers[0].coeffs.g;

        bool stable = false;
        std::size_t it = 0;
        for (; it < max_policy_iters; ++it) {
            // Solve the layer LCP under the frozen policy.
            for (std::size_t i = 1; i + 1 < nx; ++i) {
                const ActionLayer& al = layers[static_cast<std::size_t>(policy[i])];
                diag[i] = 1.0 / dt + al.coeffs.r[i] - al.G.ct[i];
                A_off.dn[i] = -al.G.dn[i];
                A_off.up[i] = -al.G.up[i];
                rhs[i] = w[i] / dt + al.coeffs.f[i];
            }
            v[0] = g[0];
            v[nx - 1] = g[nx - 1];
            auto res = detail::psor(A_off, diag, rhs, g, v, psor_settings, tol_pde, tol_obstacle);
            if (!res.converged) {
                char buf[160];
                std::snprintf(buf, sizeof(buf),
                              "PSOR did not converge at t=%.6g (worst node x=%.8g)", t,
                              x[res.worst_node]);
                throw SolveError(buf);
            }

            // Node-wise action re-maximization on the updated surface.
#pragma omp parallel for schedule(static)
            for (long long ii = 1; ii < static_cast<long long>(nx) - 1; ++ii) {
                auto i = static_cast<std::size_t>(ii);
                double best = -1e300;
                std::int32_t best_a = 0;
                for (std::size_t a = 0; a < na; ++a) {
                    const ActionLayer& al = layers[a];
                    double Hv = al.G.dn[i] * v[i - 1] + al.G.ct[i] * v[i] + al.G.up[i] * v[i + 1] -
                                al.coeffs.r[i] * v[i] + al.coeffs.f[i];
                    if (Hv > best + 1e-14 * (1.0 + std::abs(best))) {
                        best = Hv;
                        best_a = static_cast<std::int32_t>(a);
                    }
                }
                new_policy[i] = best_a;
            }
            if (new_policy == policy) {
                stable = true;
                break;
            }
            policy = new_policy;
        }
        if (!stable) {
            out.policy_converged = false;
            out.note = "policy cycling at t=" + std::to_string(t) + "; best iterate returned";
        }
        out.policy_iterations = std::max(out.policy_iterations, it + 1);

        for (std::size_t i = 0; i < nx; ++i) {
            std::size_t idx = k * nx + i;
            const ActionLayer& al = layers[static_cast<std::size_t>(policy[i])];
            double R = 0.0;
            if (i > 0 && i + 1 < nx) {
                double Lv = al.G.dn[i] * v[i - 1] + al.G.ct[i] * v[i] + al.G.up[i] * v[i + 1];
                R = (w[i] - v[i]) / dt + Lv - al.coeffs.r[i] * v[i] + al.coeffs.f[i];
            }
            s.values[idx] = v[i];
            s.obstacle[idx] = g[i];
            s.residual[idx] = R;
            s.action[idx] = policy[i];
            s.region[idx] = (v[i] - g[i] <= tol_obstacle) ? Region::Stop : Region::Continue;
        }
        w = v;
    }
    return out;
}

MonotoneVerdict controlled_monotonicity_check(const ControlledSurface& cs_in,
                                              const StoppingProblem& problem,
                                              const ClassifySettings& cs) {
    std::vector<detail::CoeffSet> sets;
    for (const auto& a : problem.actions)
        sets.push_back({&a.mu, &a.sigma, &a.flow, &a.discount});
    if (sets.empty())
        sets.push_back({&problem.mu, &problem.sigma, &problem.flow, &problem.discount});
    return detail::classify_core(problem, sets, cs_in.surface, cs);
}

}  // namespace stopflow
