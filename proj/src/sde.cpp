#include "stopflow/sde.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>

#include "stopflow/rng.hpp"

namespace stopflow {

namespace {

double interp_boundary(const std::vector<double>& t_nodes, const std::vector<double>& b, double t) {
    if (b.empty()) return kNoBoundary;
    if (t <= t_nodes.front()) return b.front();
    if (t >= t_nodes.back()) return b.back();
    auto it = std::upper_bound(t_nodes.begin(), t_nodes.end(), t);
    std::size_t i = static_cast<std::size_t>(it - t_nodes.begin());
    double w = (t - t_nodes[i - 1]) / (t_nodes[i] - t_nodes[i - 1]);
    double b0 = b[i - 1], b1 = b[i];
    if (std::isnan(b0)) return b1;
    if (std::isnan(b1)) return b0;
    return b0 * (1.0 - w) + b1 * w;
}

void append_g17(std::string& out, double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    out += buf;
}

}  // namespace

double BoundaryRule::lower_at(double t) const {
    if (!boundary) return kNoBoundary;
    double b = interp_boundary(boundary->t_nodes, boundary->lower, t);
    return std::isnan(b) ? b : b + shift;
}

double BoundaryRule::upper_at(double t) const {
    if (!boundary) return kNoBoundary;
    double b = interp_boundary(boundary->t_nodes, boundary->upper, t);
    return std::isnan(b) ? b : b - shift;
}

bool BoundaryRule::stops(double t, double x) const {
    double lo = lower_at(t), hi = upper_at(t);
    if (!std::isnan(lo) && x <= lo) return true;
    if (!std::isnan(hi) && x >= hi) return true;
    return false;
}

double PathEnsemble::mean_payoff() const {
    double sum = 0.0;
    for (const auto& p : paths) sum += p.payoff;
    return paths.empty() ? 0.0 : sum / static_cast<double>(paths.size());
}

double PathEnsemble::stderr_payoff() const {
    if (paths.size() < 2) return 0.0;
    double m = mean_payoff(), ss = 0.0;
    for (const auto& p : paths) ss += (p.payoff - m) * (p.payoff - m);
    return std::sqrt(ss / (static_cast<double>(paths.size() - 1) *
                           static_cast<double>(paths.size())));
}

void PathEnsemble::write_csv(std::ostream& os) const {
    std::string out = "path_id,tau,x_tau,payoff,alternative,deadline_hit\n";
    for (std::size_t i = 0; i < paths.size(); ++i) {
        const auto& p = paths[i];
        out += std::to_string(i);
        out += ',';
        append_g17(out, p.tau);
        out += ',';
        append_g17(out, p.x_tau);
        out += ',';
        append_g17(out, p.payoff);
        out += ',';
        out += (p.alternative > 0 ? "a" : p.alternative < 0 ? "b" : "none");
        out += ',';
        out += p.deadline_hit ? "1" : "0";
        out += '\n';
    }
    os << out;
}

namespace {

struct StepPayoff {
    double discount_integral = 0.0;  // integral of r along the path
    double flow_accum = 0.0;         // discounted flow integral

    void add_segment(double r0, double f0, double r1, double f1, double dt) {
        double d0 = discount_integral;
        discount_integral += 0.5 * (r0 + r1) * dt;
        flow_accum += 0.5 * (std::exp(-d0) * f0 + std::exp(-discount_integral) * f1) * dt;
    }
    double discounted(double v) const { return std::exp(-discount_integral) * v; }
};

PathResult run_one_path(const StoppingProblem& problem, const BoundaryRule& rule,
                        const SimParams& params, std::uint64_t path_id,
                        const DeadlineOverlay* deadline) {
    rng::CounterStream rs(params.seed, path_id);
    PathResult out;

    double t = params.t0;
    double x = params.x0;
    StepPayoff acc;

    if (rule.stops(t, x)) {
        out.tau = t;
        out.x_tau = x;
        out.payoff = problem.payoff.value(t, x);
        double lo = rule.lower_at(t);
        out.alternative = (!std::isnan(lo) && x <= lo) ? -1 : +1;
        return out;
    }

    const double dt = params.dt;
    const double sqrt_dt = std::sqrt(dt);
    double r0 = problem.discount.eval(t, x);
    double f0 = problem.flow.eval(t, x);

    while (t < params.horizon - 1e-12 * params.horizon) {
        double step = std::fmin(dt, params.horizon - t);
        double mu = problem.mu.eval(t, x);
        double sg = problem.sigma.eval(t, x);
        double z = rs.normal();
        double x_new = x + mu * step + sg * (step == dt ? sqrt_dt : std::sqrt(step)) * z;
        double t_new = t + step;

        // Domain censoring.
        if (x_new <= problem.x_lo || x_new >= problem.x_hi) {
            double xc = std::clamp(x_new, problem.x_lo, problem.x_hi);
            double r1 = problem.discount.eval(t_new, xc);
            double f1 = problem.flow.eval(t_new, xc);
            acc.add_segment(r0, f0, r1, f1, step);
            out.tau = t_new;
            out.x_tau = xc;
            out.payoff = acc.flow_accum + acc.discounted(problem.payoff.value(t_new, xc));
            out.censored = true;
            return out;
        }

        // Poisson deadline by thinning with a per-segment rate bound.
        if (deadline) {
            double a0 = deadline->alpha.eval(t, x);
            double a1 = deadline->alpha.eval(t_new, x_new);
            double bound = 1.05 * std::fmax(a0, a1) + 1e-12;
            double s = 0.0;
            for (;;) {
                s += rs.exponential(bound);
                if (s >= step) break;
                double lam = t + s;
                double xs = x + (x_new - x) * (s / step);
                if (rs.uniform() * bound <= deadline->alpha.eval(lam, xs)) {
                    double r1 = problem.discount.eval(lam, xs);
                    double f1 = problem.flow.eval(lam, xs);
                    acc.add_segment(r0, f0, r1, f1, s);
                    out.tau = lam;
                    out.x_tau = xs;
                    out.deadline_hit = true;
                    out.payoff = acc.flow_accum + acc.discounted(deadline->gamma.eval(lam, xs));
                    return out;
                }
            }
        }

        // Boundary crossing inside the step, located by linear interpolation
        // of the path and the boundary.
        double lo1 = rule.lower_at(t_new), hi1 = rule.upper_at(t_new);
        bool cross_lo = !std::isnan(lo1) && x_new <= lo1;
        bool cross_hi = !std::isnan(hi1) && x_new >= hi1;
        if (cross_lo || cross_hi) {
            double b0 = cross_lo ? rule.lower_at(t) : rule.upper_at(t);
            double b1 = cross_lo ? lo1 : hi1;
            double lambda = 1.0;
            double denom = (x_new - x) - (b1 - (std::isnan(b0) ? b1 : b0));
            if (!std::isnan(b0) && std::abs(denom) > 1e-300) {
                lambda = (b0 - x) / denom;
                lambda = std::clamp(lambda, 0.0, 1.0);
            }
            double tau = t + lambda * step;
            double xb = std::isnan(b0) ? b1 : b0 + lambda * (b1 - b0);
            double r1 = problem.discount.eval(tau, xb);
            double f1 = problem.flow.eval(tau, xb);
            acc.add_segment(r0, f0, r1, f1, lambda * step);
            out.tau = tau;
            out.x_tau = xb;
            out.alternative = cross_lo ? -1 : +1;
            out.payoff = acc.flow_accum + acc.discounted(problem.payoff.value(tau, xb));
            return out;
        }

        double r1 = problem.discount.eval(t_new, x_new);
        double f1 = problem.flow.eval(t_new, x_new);
        acc.add_segment(r0, f0, r1, f1, step);
        t = t_new;
        x = x_new;
        r0 = r1;
        f0 = f1;
    }

    out.tau = params.horizon;
    out.x_tau = x;
    out.alternative = 0;
    out.payoff = acc.flow_accum + acc.discounted(problem.payoff.value(params.horizon, x));
    return out;
}

PathEnsemble simulate_impl(const StoppingProblem& problem, const BoundaryRule& rule,
                           const SimParams& params, const DeadlineOverlay* deadline,
                           bool parallel) {
    if (params.n_paths == 0) throw InvariantError("simulation needs at least one path");
    if (!(params.horizon > params.t0))
        throw InvariantError("simulation horizon must exceed the start time");
    PathEnsemble e;
    e.seed = params.seed;
    e.n_paths = params.n_paths;
    e.dt_sim = params.dt;
    e.paths.resize(params.n_paths);
#pragma omp parallel for schedule(static) if (parallel)
    for (long long i = 0; i < static_cast<long long>(params.n_paths); ++i)
        e.paths[static_cast<std::size_t>(i)] =
            run_one_path(problem, rule, params, static_cast<std::uint64_t>(i), deadline);
    for (const auto& p : e.paths)
        if (p.censored) ++e.censored_count;
    return e;
}

}  // namespace

PathEnsemble simulate_stopped(const StoppingProblem& problem, const BoundaryRule& rule,
                              const SimParams& params) {
    return simulate_impl(problem, rule, params, nullptr, params.parallel);
}

PathEnsemble simulate_stopped_serial(const StoppingProblem& problem, const BoundaryRule& rule,
                                     const SimParams& params) {
    return simulate_impl(problem, rule, params, nullptr, false);
}

PathEnsemble simulate_stopped_with_deadline(const StoppingProblem& problem,
                                            const DeadlineOverlay& deadline,
                                            const BoundaryRule& rule, const SimParams& params) {
    return simulate_impl(problem, rule, params, &deadline, params.parallel);
}

CoupledRanking coupled_stopping_rank(const StoppingProblem& lo, const StoppingProblem& hi,
                                     const BoundaryRule& rule_lo, const BoundaryRule& rule_hi,
                                     const SimParams& params) {
    // One trajectory can serve both rules only when the dynamics coincide.
    for (double t : {params.t0, 0.5 * (params.t0 + params.horizon), params.horizon})
        for (int j = 1; j < 16; ++j) {
            double x = lo.x_lo + (lo.x_hi - lo.x_lo) * j / 16.0;
            if (std::abs(lo.mu.eval(t, x) - hi.mu.eval(t, x)) >
                    1e-12 * std::fmax(1.0, std::abs(lo.mu.eval(t, x))) ||
                std::abs(lo.sigma.eval(t, x) - hi.sigma.eval(t, x)) >
                    1e-12 * std::fmax(1.0, std::abs(lo.sigma.eval(t, x))))
                throw InvariantError("coupled ranking needs identical mu and sigma fields");
        }

    CoupledRanking out;
    out.tau_lo.resize(params.n_paths);
    out.tau_hi.resize(params.n_paths);

#pragma omp parallel for schedule(static) if (params.parallel)
    for (long long pi = 0; pi < static_cast<long long>(params.n_paths); ++pi) {
        rng::CounterStream rs(params.seed, static_cast<std::uint64_t>(pi));
        double t = params.t0, x = params.x0;
        bool lo_stopped = rule_lo.stops(t, x), hi_stopped = rule_hi.stops(t, x);
        double tau_l = lo_stopped ? t : params.horizon;
        double tau_h = hi_stopped ? t : params.horizon;
        const double sqrt_dt = std::sqrt(params.dt);
        while (t < params.horizon && (!lo_stopped || !hi_stopped)) {
            double step = std::fmin(params.dt, params.horizon - t);
            double z = rs.normal();
            x += lo.mu.eval(t, x) * step +
                 lo.sigma.eval(t, x) * (step == params.dt ? sqrt_dt : std::sqrt(step)) * z;
            x = std::clamp(x, lo.x_lo, lo.x_hi);
            t += step;
            if (!lo_stopped && rule_lo.stops(t, x)) {
                lo_stopped = true;
                tau_l = t;
            }
            if (!hi_stopped && rule_hi.stops(t, x)) {
                hi_stopped = true;
                tau_h = t;
            }
        }
        out.tau_lo[static_cast<std::size_t>(pi)] = tau_l;
        out.tau_hi[static_cast<std::size_t>(pi)] = tau_h;
    }

    for (std::size_t i = 0; i < params.n_paths; ++i)
        if (out.tau_hi[i] < out.tau_lo[i] - params.dt - 1e-12) ++out.violations;
    out.pass = out.violations == 0;
    return out;
}

ValueEstimate estimate_value_mc(const StoppingProblem& problem, McRuleKind kind,
                                const BoundaryRule& rule, const SimParams& params) {
    ValueEstimate est;
    if (kind == McRuleKind::Immediate) {
        est.mean = problem.payoff.value(params.t0, params.x0);
        est.std_error = 0.0;
        est.n = params.n_paths;
        return est;
    }
    BoundaryRule effective = rule;
    if (kind == McRuleKind::HorizonOnly) effective.boundary = nullptr;
    PathEnsemble e = simulate_stopped(problem, effective, params);
    est.mean = e.mean_payoff();
    est.std_error = e.stderr_payoff();
    est.n = e.paths.size();
    return est;
}

LearningEnsemble simulate_learning(const LearningModel& model, const BoundaryRule& rule,
                                   const SimParams& params) {
    ExactFilter filter(model.prior);
    const auto& support = model.prior.support;
    const auto& weights = model.prior.weights;

    LearningEnsemble out;
    out.paths.resize(params.n_paths);

#pragma omp parallel for schedule(static) if (params.parallel)
    for (long long pi = 0; pi < static_cast<long long>(params.n_paths); ++pi) {
        rng::CounterStream rs(params.seed, static_cast<std::uint64_t>(pi));

        // Ground truth from the prior.
        double u = rs.uniform();
        double theta = support.back();
        double cum = 0.0;
        for (std::size_t k = 0; k < support.size(); ++k) {
            cum += weights[k];
            if (u <= cum) {
                theta = support[k];
                break;
            }
        }

        double t = params.t0, s = 0.0, q = 0.0;
        // Start the filter consistent with x0: solve for the s matching x0
        // at q = 0+ (q=0 gives the prior; any x0 equal to the prior mass of
        // the nonnegative support needs s=0).
        double x = filter.posterior_up(s, q);
        LearningPath& lp = out.paths[static_cast<std::size_t>(pi)];
        const double sqrt_dt = std::sqrt(params.dt);

        bool stopped = false;
        while (t < params.horizon) {
            double step = std::fmin(params.dt, params.horizon - t);
            double it_ = model.i_field.eval(t, 0.0);
            double zt = model.zeta_field.eval(t, 0.0);
            double dz = it_ * theta * step + zt * (step == params.dt ? sqrt_dt : std::sqrt(step)) *
                                                 rs.normal();
            s += it_ / (zt * zt) * dz;
            q += it_ * it_ / (zt * zt) * step;
            t += step;
            x = filter.posterior_up(s, q);
            double lo = rule.lower_at(t), hi = rule.upper_at(t);
            if (!std::isnan(lo) && x <= lo) {
                lp.tau = t;
                lp.x_tau = x;
                lp.decision = -1;
                lp.correct = theta < 0.0;
                stopped = true;
                break;
            }
            if (!std::isnan(hi) && x >= hi) {
                lp.tau = t;
                lp.x_tau = x;
                lp.decision = +1;
                lp.correct = theta >= 0.0;
                stopped = true;
                break;
            }
        }
        if (!stopped) {
            lp.tau = params.horizon;
            lp.x_tau = x;
            lp.decision = x >= 0.5 ? +1 : -1;
            lp.correct = (lp.decision > 0) == (theta >= 0.0);
        }
    }
    return out;
}

std::vector<double> simulate_belief_sde_terminal(const CoefficientField& sigma, double t_end,
                                                 const SimParams& params) {
    std::vector<double> xs(params.n_paths);
#pragma omp parallel for schedule(static) if (params.parallel)
    for (long long pi = 0; pi < static_cast<long long>(params.n_paths); ++pi) {
        rng::CounterStream rs(params.seed, static_cast<std::uint64_t>(pi));
        double t = 0.0, x = params.x0;
        const double sqrt_dt = std::sqrt(params.dt);
        while (t < t_end) {
            double step = std::fmin(params.dt, t_end - t);
            double sg = sigma.eval(t, x);
            x += sg * (step == params.dt ? sqrt_dt : std::sqrt(step)) * rs.normal();
            x = std::clamp(x, 1e-9, 1.0 - 1e-9);
            t += step;
        }
        xs[static_cast<std::size_t>(pi)] = x;
    }
    return xs;
}

std::vector<double> simulate_filter_terminal(const LearningModel& model, double t_end,
                                             const SimParams& params) {
    ExactFilter filter(model.prior);
    const auto& support = model.prior.support;
    const auto& weights = model.prior.weights;
    std::vector<double> xs(params.n_paths);
#pragma omp parallel for schedule(static) if (params.parallel)
    for (long long pi = 0; pi < static_cast<long long>(params.n_paths); ++pi) {
        rng::CounterStream rs(params.seed, static_cast<std::uint64_t>(pi));
        double u = rs.uniform();
        double theta = support.back();
        double cum = 0.0;
        for (std::size_t k = 0; k < support.size(); ++k) {
            cum += weights[k];
            if (u <= cum) {
                theta = support[k];
                break;
            }
        }
        double t = 0.0, s = 0.0, q = 0.0;
        const double sqrt_dt = std::sqrt(params.dt);
        while (t < t_end) {
            double step = std::fmin(params.dt, t_end - t);
            double it_ = model.i_field.eval(t, 0.0);
            double zt = model.zeta_field.eval(t, 0.0);
            double dz = it_ * theta * step + zt * (step == params.dt ? sqrt_dt : std::sqrt(step)) *
                                                 rs.normal();
            s += it_ / (zt * zt) * dz;
            q += it_ * it_ / (zt * zt) * step;
            t += step;
        }
        xs[static_cast<std::size_t>(pi)] = filter.posterior_up(s, q);
    }
    return xs;
}

AccuracyProfile accuracy_profile(const LearningEnsemble& ensemble, std::size_t n_bins,
                                 double t_max, std::size_t min_count) {
    AccuracyProfile out;
    const double z = 1.959963984540054;  // 95% Wilson interval

    for (int alt : {+1, -1}) {
        for (std::size_t b = 0; b < n_bins; ++b) {
            AccuracyBin bin;
            bin.t_lo = t_max * static_cast<double>(b) / static_cast<double>(n_bins);
            bin.t_hi = t_max * static_cast<double>(b + 1) / static_cast<double>(n_bins);
            bin.alternative = alt;
            std::size_t n = 0, k = 0;
            for (const auto& p : ensemble.paths) {
                if (p.decision != alt) continue;
                if (p.tau < bin.t_lo || p.tau >= bin.t_hi) continue;
                ++n;
                if (p.correct) ++k;
            }
            bin.count = n;
            if (n < min_count) {
                bin.absent = true;
            } else {
                double phat = static_cast<double>(k) / static_cast<double>(n);
                double denom = 1.0 + z * z / static_cast<double>(n);
                double center = (phat + z * z / (2.0 * static_cast<double>(n))) / denom;
                double half = z *
                              std::sqrt(phat * (1.0 - phat) / static_cast<double>(n) +
                                        z * z / (4.0 * static_cast<double>(n) *
                                                 static_cast<double>(n))) /
                              denom;
                bin.accuracy = phat;
                bin.ci_lo = std::fmax(0.0, center - half);
                bin.ci_hi = std::fmin(1.0, center + half);
            }
            out.bins.push_back(bin);
        }
    }
    return out;
}

void AccuracyProfile::write_csv(std::ostream& os) const {
    std::string out = "t_bin_lo,t_bin_hi,alt,accuracy,ci_lo,ci_hi,count\n";
    for (const auto& b : bins) {
        if (b.absent) continue;
        append_g17(out, b.t_lo);
        out += ',';
        append_g17(out, b.t_hi);
        out += ',';
        out += (b.alternative > 0 ? "a" : "b");
        out += ',';
        append_g17(out, b.accuracy);
        out += ',';
        append_g17(out, b.ci_lo);
        out += ',';
        append_g17(out, b.ci_hi);
        out += ',';
        out += std::to_string(b.count);
        out += '\n';
    }
    os << out;
}

double AccuracyProfile::trend_z() const {
    // Pool both alternatives per time bin and run a Cochran-Armitage trend
    // test with the bin index as the score.
    std::vector<double> n_j, k_j, s_j;
    std::size_t half = bins.size() / 2;
    for (std::size_t b = 0; b < half; ++b) {
        double n = 0.0, k = 0.0;
        for (std::size_t a = 0; a < 2; ++a) {
            const AccuracyBin& bin = bins[a * half + b];
            if (bin.absent) continue;
            n += static_cast<double>(bin.count);
            k += bin.accuracy * static_cast<double>(bin.count);
        }
        if (n > 0.0) {
            n_j.push_back(n);
            k_j.push_back(k);
            s_j.push_back(static_cast<double>(b));
        }
    }
    double N = 0.0, K = 0.0;
    for (std::size_t j = 0; j < n_j.size(); ++j) {
        N += n_j[j];
        K += k_j[j];
    }
    if (N <= 0.0) return 0.0;
    double pbar = K / N;
    double T = 0.0, sn = 0.0, sn2 = 0.0;
    for (std::size_t j = 0; j < n_j.size(); ++j) {
        T += s_j[j] * (k_j[j] - n_j[j] * pbar);
        sn += n_j[j] * s_j[j];
        sn2 += n_j[j] * s_j[j] * s_j[j];
    }
    double var = pbar * (1.0 - pbar) * (sn2 - sn * sn / N);
    if (var <= 0.0) return 0.0;
    return T / std::sqrt(var);
}

double ks_distance(std::vector<double> a, std::vector<double> b) {
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    double d = 0.0;
    std::size_t i = 0, j = 0;
    while (i < a.size() && j < b.size()) {
        if (a[i] <= b[j])
            ++i;
        else
            ++j;
        double fa = static_cast<double>(i) / static_cast<double>(a.size());
        double fb = static_cast<double>(j) / static_cast<double>(b.size());
        d = std::fmax(d, std::abs(fa - fb));
    }
    return d;
}

}  // namespace stopflow
