#include "stopflow/catalog.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "stopflow/control.hpp"

namespace stopflow {

namespace {

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

std::string paren(const CoefficientField& f) {
    auto s = f.source();
    if (!s) throw InvariantError("catalog factories need expression or constant coefficients");
    return "(" + *s + ")";
}

bool is_const(const CoefficientField& f) {
    return f.kind() == CoefficientField::Kind::Constant;
}

}  // namespace

StoppingProblem make_wald(double a, double b, double r, const CoefficientField& i_field,
                          const CoefficientField& zeta_field, const CoefficientField& c_field) {
    if (a < 0.0 || b < 0.0) throw InvariantError("wald payoffs a, b must be nonnegative");
    if (r < 0.0) throw InvariantError("wald discount must be nonnegative");

    StoppingProblem p;
    p.x_lo = 0.0;
    p.x_hi = 1.0;
    p.horizon = Horizon::forever();
    p.mu = CoefficientField::constant(0.0);
    if (is_const(i_field) && is_const(zeta_field)) {
        double c0 = 2.0 * i_field.constant_value() / zeta_field.constant_value();
        p.sigma = CoefficientField::expression(fmt(c0) + "*x*(1-x)");
    } else {
        p.sigma =
            CoefficientField::expression("2*" + paren(i_field) + "/" + paren(zeta_field) +
                                         "*x*(1-x)");
    }
    if (is_const(c_field)) {
        p.flow = CoefficientField::constant(-c_field.constant_value());
    } else {
        p.flow = CoefficientField::expression("-" + paren(c_field));
    }
    p.discount = CoefficientField::constant(r);
    p.payoff.branch_a = CoefficientField::expression(fmt(a) + "*x");
    p.payoff.branch_b = CoefficientField::expression(fmt(b) + "*(1-x)");
    p.payoff.crossing_hint = b / (a + b);
    p.validate();
    return p;
}

NonbinaryModel make_nonbinary(const FiniteSupportPrior& prior, double a, double b, double r,
                              double c, const Grid& sigma_grid) {
    if (!(r >= 0.0)) throw InvariantError("nonbinary discount must be nonnegative");
    if (r == 0.0 && !(c > 0.0))
        throw InvariantError("perpetual nonbinary model with r = 0 needs a positive flow cost");

    ExactFilter filter(prior);

    Table tab;
    tab.t_nodes = sigma_grid.t_nodes;
    tab.x_nodes = sigma_grid.x_nodes;
    tab.values.resize(tab.t_nodes.size() * tab.x_nodes.size());
    for (std::size_t i = 0; i < tab.t_nodes.size(); ++i)
        for (std::size_t j = 0; j < tab.x_nodes.size(); ++j)
            tab.values[i * tab.x_nodes.size() + j] =
                filter.belief_volatility(tab.t_nodes[i], tab.x_nodes[j]);

    StoppingProblem p;
    p.x_lo = 0.0;
    p.x_hi = 1.0;
    p.horizon = Horizon::forever();
    p.mu = CoefficientField::constant(0.0);
    p.sigma = CoefficientField::tabulated(std::move(tab));
    p.flow = CoefficientField::constant(-c);
    p.discount = CoefficientField::constant(r);
    p.payoff.branch_a = CoefficientField::expression(fmt(a) + "*x");
    p.payoff.branch_b = CoefficientField::expression(fmt(b) + "*(1-x)");
    p.payoff.crossing_hint = b / (a + b);
    p.validate();

    NonbinaryModel model{std::move(p), std::move(filter), {}};
    model.learning.prior = prior;
    model.learning.i_field = CoefficientField::constant(1.0);
    model.learning.zeta_field = CoefficientField::constant(prior.zeta);
    return model;
}

StoppingProblem apply_deadline(const StoppingProblem& base, const DeadlineSpec& spec) {
    if (!is_const(base.discount))
        throw InvariantError(
            "deadline reformulation needs a constant base discount; non-constant discounts are "
            "refused");
    const double r = base.discount.constant_value();

    StoppingProblem out = base;

    // alpha == 0 keeps the problem bit-identical.
    if (is_const(spec.alpha) && spec.alpha.constant_value() == 0.0) return out;

    if (is_const(spec.alpha)) {
        out.discount = CoefficientField::constant(r + spec.alpha.constant_value());
    } else {
        out.discount = CoefficientField::expression(fmt(r) + "+" + paren(spec.alpha));
    }
    bool gamma_zero = is_const(spec.gamma) && spec.gamma.constant_value() == 0.0;
    if (!gamma_zero) {
        auto fsrc = base.flow.source();
        if (!fsrc) throw InvariantError("deadline reformulation needs expression flow fields");
        out.flow = CoefficientField::expression("(" + *fsrc + ")+" + paren(spec.alpha) + "*" +
                                                paren(spec.gamma));
    }
    out.validate();
    return out;
}

SolveOptions LelandModel::solve_options() const {
    SolveOptions opt;
    opt.upper_dirichlet = far_field;
    return opt;
}

LelandModel make_leland(const CoefficientField& delta_field, const CoefficientField& c_field,
                        double r, const CoefficientField& mu_field,
                        const CoefficientField& sigma_field, double penalty_G) {
    if (!(r > 0.0)) throw InvariantError("leland discount must be positive");
    if (penalty_G > 0.0) throw InvariantError("leland default penalty must be nonpositive");
    if (!is_const(mu_field) || !is_const(sigma_field))
        throw InvariantError("leland far-field closure supports constant mu and sigma only");
    const double mu = mu_field.constant_value();
    const double sg = sigma_field.constant_value();
    if (!(mu < r)) throw InvariantError("leland needs mu < r for a finite firm value");

    // delta - c must be nondecreasing in x for the one-sided cutoff.
    {
        double prev = -1e300;
        for (int j = 0; j <= 64; ++j) {
            double x = 0.01 + j * (20.0 - 0.01) / 64.0;
            double v = delta_field.eval(0.0, x) - c_field.eval(0.0, x);
            if (v < prev - 1e-12) throw InvariantError("leland requires delta - c nondecreasing in x");
            prev = v;
        }
    }
    // The far-field closure uses the never-default particular solution,
    // which is affine only for delta linear in x and constant c.
    {
        double d1 = delta_field.eval(0.0, 1.0), d2 = delta_field.eval(0.0, 2.0),
               d3 = delta_field.eval(0.0, 3.0);
        if (std::abs((d3 - d2) - (d2 - d1)) > 1e-9 * std::fmax(1.0, std::abs(d2)) ||
            std::abs(delta_field.eval(0.0, 0.0)) > 1e-12)
            throw InvariantError("leland supports delta(x) proportional to x");
        if (std::abs(c_field.eval(0.0, 1.0) - c_field.eval(0.0, 7.0)) > 1e-12)
            throw InvariantError("leland supports a constant coupon rate c");
    }

    // Shift to V - G: stopping payoff 0, flow delta - c - r G (exact).
    std::string flow_src = paren(delta_field) + "-" + paren(c_field);
    if (penalty_G != 0.0) flow_src += "-" + fmt(r * penalty_G);

    StoppingProblem p;
    p.horizon = Horizon::forever();
    p.mu = CoefficientField::expression(fmt(mu) + "*x");
    p.sigma = CoefficientField::expression(fmt(sg) + "*x");
    p.flow = CoefficientField::expression(flow_src);
    p.discount = CoefficientField::constant(r);
    p.payoff.branch_a = CoefficientField::constant(0.0);
    p.payoff.branch_b = CoefficientField::constant(0.0);

    // Threshold scale from the stationary closed form; domain wide enough
    // that the far-field Dirichlet carries the growth.
    double m_half = mu - 0.5 * sg * sg;
    double kappa = (m_half + std::sqrt(m_half * m_half + 2.0 * r * sg * sg)) / (sg * sg);
    double delta0 = delta_field.eval(0.0, 1.0) - delta_field.eval(0.0, 0.0);  // slope of delta x
    double c0 = c_field.eval(0.0, 1.0);
    double b_est = delta0 > 0.0 ? kappa / (kappa + 1.0) * (1.0 - mu / r) * c0 / delta0 : 1.0;
    p.x_lo = 0.01 * b_est;
    p.x_hi = 60.0 * b_est;
    p.payoff.crossing_hint = p.x_hi;  // one-sided stopping: continuation to the upper edge
    p.validate();

    LelandModel model;
    model.problem = std::move(p);
    model.shift = penalty_G;
    // Never-default value of the shifted problem (particular solution).
    model.far_field = CoefficientField::expression(
        fmt(delta0 / (r - mu)) + "*x-" + fmt((c0 + r * penalty_G) / r));
    return model;
}

StoppingProblem make_investment(const CoefficientField& mu_field,
                                const CoefficientField& sigma_field,
                                const CoefficientField& r_field,
                                const CoefficientField& I_field) {
    double mu_max = -1e300, r_min = 1e300, sig_max = 0.0, sig_min = 1e300, I_min = 1e300,
           I_max = -1e300, mu_min = 1e300, r_max = -1e300;
    for (int i = 0; i <= 32; ++i) {
        double t = 20.0 * i / 32.0;
        mu_max = std::fmax(mu_max, mu_field.eval(t, 1.0));
        mu_min = std::fmin(mu_min, mu_field.eval(t, 1.0));
        r_min = std::fmin(r_min, r_field.eval(t, 1.0));
        r_max = std::fmax(r_max, r_field.eval(t, 1.0));
        sig_max = std::fmax(sig_max, sigma_field.eval(t, 1.0));
        sig_min = std::fmin(sig_min, sigma_field.eval(t, 1.0));
        I_min = std::fmin(I_min, I_field.eval(t, 1.0));
        I_max = std::fmax(I_max, I_field.eval(t, 1.0));
    }
    if (!(mu_max < r_min))
        throw InvariantError("investment model needs sup mu < inf r for well-posedness");
    if (!(I_min > 0.0)) throw InvariantError("investment cost must stay positive");

    StoppingProblem p;
    p.horizon = Horizon::forever();
    p.mu = CoefficientField::expression(paren(mu_field) + "*x");
    p.sigma = CoefficientField::expression(paren(sigma_field) + "*x");
    p.flow = CoefficientField::constant(0.0);
    p.discount = r_field;
    p.payoff.branch_a = CoefficientField::expression("x-" + paren(I_field));
    p.payoff.branch_b = CoefficientField::constant(0.0);
    if (is_const(I_field)) p.payoff.crossing_hint = I_field.constant_value();

    // Threshold bound from the stationary closed form at coefficient
    // extremes; stopping covers the region above, so the default closure is
    // exact at the upper edge.
    auto kappa_of = [](double mu, double sg, double r) {
        double mh = mu - 0.5 * sg * sg;
        return (std::sqrt(mh * mh + 2.0 * sg * sg * r) - mh) / (sg * sg);
    };
    double b_max = 0.0;
    for (double mu : {mu_min, mu_max})
        for (double sg : {sig_min, sig_max})
            for (double r : {r_min, r_max}) {
                double k = kappa_of(mu, sg, r);
                if (k > 1.0) b_max = std::fmax(b_max, I_max / (1.0 - 1.0 / k));
            }
    if (b_max <= 0.0) b_max = 4.0 * I_max;
    p.x_lo = 0.01 * I_min;
    p.x_hi = 4.0 * b_max;
    p.validate();
    return p;
}

StoppingProblem make_put(double K, const CoefficientField& r_field,
                         const CoefficientField& sigma_field) {
    if (!(K > 0.0)) throw InvariantError("put strike must be positive (degenerate payoff refused)");
    double r_min = 1e300, sig_max = 0.0;
    for (int i = 0; i <= 32; ++i) {
        double t = 20.0 * i / 32.0;
        r_min = std::fmin(r_min, r_field.eval(t, 1.0));
        sig_max = std::fmax(sig_max, sigma_field.eval(t, 1.0));
    }
    if (!(r_min > 0.0)) throw InvariantError("put interest rate must be positive");

    StoppingProblem p;
    p.horizon = Horizon::forever();
    p.mu = CoefficientField::expression(paren(r_field) + "*x");
    p.sigma = CoefficientField::expression(paren(sigma_field) + "*x");
    p.flow = CoefficientField::constant(0.0);
    p.discount = r_field;
    p.payoff.branch_a = CoefficientField::expression(fmt(K) + "-x");
    p.payoff.branch_b = CoefficientField::constant(0.0);
    p.payoff.crossing_hint = K;

    // The upper truncation follows the closed-form decay of the perpetual
    // put: the edge error (K - b)(x_hi / b)^(-2 r / sigma^2) stays below
    // 2e-3 K.
    double gamma = 2.0 * r_min / (sig_max * sig_max);
    double b_est = K / (1.0 + 1.0 / gamma);
    double x_hi = b_est * std::pow((K - b_est) / (2e-3 * K), 1.0 / gamma);
    x_hi = std::clamp(x_hi, 8.0 * K, 4000.0 * K);
    p.x_lo = 0.01 * b_est;
    p.x_hi = x_hi;
    p.validate();
    return p;
}

Grid CatalogEntry::build_grid() const {
    double t1 = mode == Mode::Stationary ? 1.0 : t_solve;
    return problem.make_grid(nt, nx, 0.0, t1, spacing);
}

ValueSurface CatalogEntry::run(const SolverSettings& settings) const {
    Grid grid = build_grid();
    switch (mode) {
        case Mode::Stationary:
            return solve_stationary(problem, grid, settings, solve_options);
        case Mode::Finite:
            if (problem.controlled())
                return solve_controlled(problem, grid, settings, solve_options).surface;
            return solve_hjb(problem, grid, settings, solve_options);
        case Mode::Windowed: {
            SolveOptions opt = solve_options;
            if (stationary_seed) {
                StoppingProblem frozen = problem;
                frozen.mu = problem.mu.frozen_at(t_solve);
                frozen.sigma = problem.sigma.frozen_at(t_solve);
                frozen.flow = problem.flow.frozen_at(t_solve);
                frozen.discount = problem.discount.frozen_at(t_solve);
                frozen.payoff.branch_a = problem.payoff.branch_a.frozen_at(t_solve);
                frozen.payoff.branch_b = problem.payoff.branch_b.frozen_at(t_solve);
                ValueSurface seed = solve_stationary(frozen, grid, settings, solve_options);
                opt.terminal_values = seed.values;
            }
            ValueSurface full = solve_hjb(problem, grid, settings, opt);
            return slice_surface(full, 0.0, t_report);
        }
    }
    throw SolveError("unknown catalog mode");
}

namespace {

CatalogEntry wald_entry(const std::string& name, const std::string& desc,
                        const CoefficientField& i_f, const CoefficientField& z_f,
                        const CoefficientField& c_f, double r) {
    CatalogEntry e;
    e.name = name;
    e.description = desc;
    e.problem = make_wald(1.0, 1.0, r, i_f, z_f, c_f);
    e.x0 = 0.5;
    return e;
}

}  // namespace

std::vector<std::string> catalog_names() {
    return {
        "wald_stationary",
        "wald_rising_cost",
        "wald_rising_intensity",
        "nonbinary_3pt",
        "put_stationary",
        "put_sigma_decreasing",
        "investment_stationary",
        "investment_phi",
        "investment_cost_decreasing",
        "leland_base",
        "wald_deadline_forced",
        "wald_deadline_revelation",
        "controlled_wald_menu",
        "controlled_wald_rising_cost",
    };
}

CatalogEntry catalog_get(const std::string& name) {
    auto c = [](double v) { return CoefficientField::constant(v); };
    auto ex = [](const std::string& s) { return CoefficientField::expression(s); };

    if (name == "wald_stationary") {
        CatalogEntry e = wald_entry(name, "binary Wald, stationary data: flat boundaries",
                                    c(1.0), c(1.0), c(0.02), 0.1);
        e.mode = CatalogEntry::Mode::Windowed;
        e.t_solve = 5.0;
        e.t_report = 5.0;
        e.stationary_seed = true;
        e.nt = 201;
        e.nx = 801;
        return e;
    }
    if (name == "wald_rising_cost") {
        CatalogEntry e = wald_entry(name, "binary Wald with rising information cost: narrowing band",
                                    c(1.0), c(1.0), ex("0.01+0.02*t"), 0.1);
        e.mode = CatalogEntry::Mode::Windowed;
        e.t_solve = 15.0;
        e.t_report = 5.0;
        e.stationary_seed = true;
        e.nt = 601;
        e.nx = 401;
        return e;
    }
    if (name == "wald_rising_intensity") {
        CatalogEntry e = wald_entry(name, "binary Wald with rising signal intensity: widening band",
                                    ex("1+t"), c(1.0), c(0.02), 0.1);
        e.mode = CatalogEntry::Mode::Windowed;
        e.t_solve = 15.0;
        e.t_report = 5.0;
        e.stationary_seed = true;
        e.nt = 601;
        e.nx = 401;
        return e;
    }
    if (name == "nonbinary_3pt") {
        FiniteSupportPrior prior{{-1.0, 0.1, 1.0}, {0.4, 0.2, 0.4}, 1.0};
        CatalogEntry e;
        e.name = name;
        e.description = "three-point prior: learning slows, accuracy falls over time";
        e.mode = CatalogEntry::Mode::Windowed;
        e.t_solve = 10.0;
        e.t_report = 3.0;
        e.stationary_seed = true;
        e.nt = 501;
        e.nx = 401;
        e.x0 = 0.6;  // prior mass on theta >= 0
        Grid g = Grid::uniform(e.nt, 0.0, e.t_solve, e.nx, 1e-4, 1.0 - 1e-4);
        NonbinaryModel model = make_nonbinary(prior, 1.0, 1.0, 0.1, 0.01, g);
        e.problem = model.problem;
        e.problem.payoff.crossing_hint = 0.5;
        e.learning = model.learning;
        return e;
    }
    if (name == "put_stationary") {
        CatalogEntry e;
        e.name = name;
        e.description = "perpetual American put, constant r and sigma";
        e.problem = make_put(1.0, c(0.05), c(0.3));
        e.mode = CatalogEntry::Mode::Stationary;
        e.nx = 1600;
        e.nt = 2;
        e.spacing = Spacing::Log;
        e.x0 = 1.0;
        return e;
    }
    if (name == "put_sigma_decreasing") {
        CatalogEntry e;
        e.name = name;
        e.description = "American put with volatility falling over time: threshold rises";
        e.problem = make_put(1.0, c(0.05), ex("0.3*(1-0.05*t)"));
        e.mode = CatalogEntry::Mode::Finite;
        e.t_solve = 10.0;
        e.nt = 401;
        e.nx = 801;
        e.spacing = Spacing::Log;
        e.x0 = 1.0;
        return e;
    }
    if (name == "investment_stationary") {
        CatalogEntry e;
        e.name = name;
        e.description = "irreversible investment, stationary: threshold 3.0";
        e.problem = make_investment(c(0.03), c(0.2), c(0.06), c(1.0));
        e.mode = CatalogEntry::Mode::Stationary;
        e.nx = 1600;
        e.nt = 2;
        e.spacing = Spacing::Log;
        e.x0 = 1.0;
        return e;
    }
    if (name == "investment_phi") {
        CatalogEntry e;
        e.name = name;
        e.description = "irreversible investment, driftless: threshold at the golden ratio squared";
        e.problem = make_investment(c(0.0), c(0.2), c(0.02), c(1.0));
        e.mode = CatalogEntry::Mode::Stationary;
        e.nx = 1600;
        e.nt = 2;
        e.spacing = Spacing::Log;
        e.x0 = 1.0;
        return e;
    }
    if (name == "investment_cost_decreasing") {
        CatalogEntry e;
        e.name = name;
        e.description = "investment cost falling over time: threshold falls";
        e.problem = make_investment(c(0.03), c(0.2), c(0.06), ex("1-0.02*t"));
        e.mode = CatalogEntry::Mode::Finite;
        e.t_solve = 10.0;
        e.nt = 401;
        e.nx = 801;
        e.spacing = Spacing::Log;
        e.x0 = 1.0;
        return e;
    }
    if (name == "leland_base") {
        LelandModel m = make_leland(ex("0.06*x"), c(0.03), 0.05, c(0.01), c(0.25), 0.0);
        CatalogEntry e;
        e.name = name;
        e.description = "endogenous default: gBM cash flow, default threshold below";
        e.problem = m.problem;
        e.mode = CatalogEntry::Mode::Stationary;
        e.nx = 1201;
        e.nt = 2;
        e.spacing = Spacing::Log;
        e.shift = m.shift;
        e.solve_options = m.solve_options();
        e.x0 = 1.0;
        e.transform_note = "constant-shift to V - G; far-field Dirichlet at the upper edge";
        return e;
    }
    if (name == "wald_deadline_forced") {
        // Forced decision at a rising rate: gamma = g (bad news), band narrows.
        StoppingProblem base = make_wald(1.0, 1.0, 0.1, c(1.0), c(1.0), c(0.0));
        DeadlineSpec spec{ex("0.5+0.1*t"), ex("max(x,1-x)"), "bad"};
        CatalogEntry e;
        e.name = name;
        e.description = "Wald with a stochastic deadline whose pressure rises: narrowing band";
        e.problem = apply_deadline(base, spec);
        e.mode = CatalogEntry::Mode::Windowed;
        e.t_solve = 12.0;
        e.t_report = 5.0;
        e.stationary_seed = true;
        e.nt = 481;
        e.nx = 401;
        e.x0 = 0.5;
        e.transform_note = "deadline reformulation: discount r+alpha, flow f+alpha*gamma";
        return e;
    }
    if (name == "wald_deadline_revelation") {
        // Perfectly revealing news arriving more rarely over time: narrowing.
        StoppingProblem base = make_wald(1.0, 1.0, 0.1, c(1.0), c(1.0), c(0.0));
        DeadlineSpec spec{ex("0.5-0.02*t"), ex("x+(1-x)"), "good"};
        CatalogEntry e;
        e.name = name;
        e.description = "Wald with perfectly revealing news fading out: narrowing band";
        e.problem = apply_deadline(base, spec);
        e.mode = CatalogEntry::Mode::Windowed;
        e.t_solve = 12.0;
        e.t_report = 5.0;
        e.stationary_seed = true;
        e.nt = 481;
        e.nx = 401;
        e.x0 = 0.5;
        e.transform_note = "deadline reformulation: discount r+alpha, flow f+alpha*gamma";
        return e;
    }
    if (name == "controlled_wald_menu" || name == "controlled_wald_rising_cost") {
        bool rising = name == "controlled_wald_rising_cost";
        CatalogEntry e;
        e.name = name;
        e.description = rising
                            ? "learning-intensity menu with rising cost: narrowing band"
                            : "learning-intensity menu, stationary cost";
        StoppingProblem p = make_wald(1.0, 1.0, 0.1, c(1.0), c(1.0), c(0.0));
        std::string kappa = rising ? "(0.05+0.02*t)" : "0.05";
        for (double intensity : {0.5, 1.0}) {
            ActionSpec a;
            a.label = "i=" + fmt(intensity);
            a.mu = CoefficientField::constant(0.0);
            a.sigma = CoefficientField::expression(fmt(2.0 * intensity) + "*x*(1-x)");
            a.flow = CoefficientField::expression("-" + kappa + "*" + fmt(intensity * intensity));
            a.discount = CoefficientField::constant(0.1);
            p.actions.push_back(a);
        }
        p.validate();
        e.problem = p;
        e.mode = CatalogEntry::Mode::Finite;
        e.t_solve = rising ? 10.0 : 5.0;
        e.t_report = 5.0;
        e.nt = 401;
        e.nx = 401;
        e.x0 = 0.5;
        return e;
    }
    throw InvariantError("unknown catalog entry '" + name + "'");
}

}  // namespace stopflow
