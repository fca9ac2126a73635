// Timing harness comparing the OpenMP kernels against their serial
// reference implementations: Monte Carlo path simulation and per-layer
// coefficient evaluation. Also reports that both routes agree bit for bit.

#include <chrono>
#include <cstdio>

#include "stopflow/catalog.hpp"
#include "stopflow/hjb.hpp"
#include "stopflow/sde.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

using namespace stopflow;

namespace {

template <typename F>
double time_ms(F&& f, int reps = 3) {
    double best = 1e300;
    for (int i = 0; i < reps; ++i) {
        auto t0 = std::chrono::steady_clock::now();
        f();
        auto t1 = std::chrono::steady_clock::now();
        best = std::min(best, std::chrono::duration<double, std::milli>(t1 - t0).count());
    }
    return best;
}

}  // namespace

int main() {
#ifdef _OPENMP
    std::printf("OpenMP max threads: %d\n", omp_get_max_threads());
#else
    std::printf("built without OpenMP\n");
#endif

    SolverSettings settings;
    CatalogEntry put = catalog_get("put_stationary");
    put.nx = 801;
    ValueSurface s = put.run(settings);
    FreeBoundary fb = extract_boundaries(s, 1.0);

    SimParams sp;
    sp.n_paths = 20000;
    sp.dt = 1e-3;
    sp.seed = 7;
    sp.x0 = 1.0;
    sp.horizon = 60.0;
    BoundaryRule rule{&fb, 0.0};

    PathEnsemble par, ser;
    double t_par = time_ms([&] { par = simulate_stopped(put.problem, rule, sp); });
    double t_ser = time_ms([&] { ser = simulate_stopped_serial(put.problem, rule, sp); });
    bool identical = par.paths.size() == ser.paths.size();
    for (std::size_t i = 0; identical && i < par.paths.size(); ++i)
        identical = par.paths[i].payoff == ser.paths[i].payoff &&
                    par.paths[i].tau == ser.paths[i].tau;
    std::printf("monte carlo  %zu paths: parallel %8.2f ms | serial %8.2f ms | speedup %.2fx | "
                "bitwise %s\n",
                sp.n_paths, t_par, t_ser, t_ser / t_par, identical ? "identical" : "DIFFERENT");

    Grid grid = put.build_grid();
    detail::LayerCoeffs a, b;
    double t_eval_par = time_ms([&] {
        for (int k = 0; k < 50; ++k) detail::eval_layer(put.problem, 0.0, grid.x_nodes, a);
    });
    double t_eval_ser = time_ms([&] {
        for (int k = 0; k < 50; ++k) detail::eval_layer_serial(put.problem, 0.0, grid.x_nodes, b);
    });
    bool eval_same = a.sig2 == b.sig2 && a.mu == b.mu && a.r == b.r && a.f == b.f && a.g == b.g;
    std::printf("layer eval   50 x %zu nodes: parallel %8.2f ms | serial %8.2f ms | speedup "
                "%.2fx | bitwise %s\n",
                grid.nx(), t_eval_par, t_eval_ser, t_eval_ser / t_eval_par,
                eval_same ? "identical" : "DIFFERENT");
    return identical && eval_same ? 0 : 1;
}
