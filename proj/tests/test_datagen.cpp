#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "aroma/sim/burgers.hpp"
#include "aroma/sim/grid.hpp"
#include "aroma/sim/vorticity.hpp"

using namespace aroma;
using namespace aroma::sim;

TEST_CASE("full keep fraction returns the canonical row-major grid") {
    const auto g = subsample_grid({64, 64}, 1.0, 123);
    CHECK(g.n_points() == 4096);
    CHECK(g.coords(0, 0) == 0.0);
    CHECK(g.coords(0, 1) == 0.0);
    // second point advances the last axis
    CHECK(g.coords(1, 1) == doctest::Approx(1.0 / 64));
    CHECK(g.coords(1, 0) == 0.0);
    for (int64_t i = 0; i < 4096; ++i) CHECK(g.indices[static_cast<size_t>(i)] == i);
}

TEST_CASE("subsample counts follow round-to-even") {
    CHECK(subsample_grid({64, 64}, 0.25, 5).n_points() == 1024);
    CHECK(subsample_grid({64, 128}, 0.05, 5).n_points() == 410);  // round(409.6)
}

TEST_CASE("subsampling is deterministic and seed-sensitive") {
    const auto a = subsample_grid({32, 32}, 0.3, 9);
    const auto b = subsample_grid({32, 32}, 0.3, 9);
    const auto c = subsample_grid({32, 32}, 0.3, 10);
    CHECK(a.indices == b.indices);
    CHECK(a.coords == b.coords);
    CHECK(a.indices != c.indices);
}

TEST_CASE("too sparse grids are rejected") {
    CHECK_THROWS_WITH_AS(subsample_grid({4, 4}, 0.25, 1), doctest::Contains("GridTooSparse"),
                         Error);
    CHECK_THROWS_AS(subsample_grid({64, 64}, 0.0, 1), Error);
    CHECK_THROWS_AS(subsample_grid({64, 64}, 1.5, 1), Error);
}

namespace {

BurgersConfig small_burgers() {
    BurgersConfig cfg;
    cfg.n_space = 64;
    cfg.n_time = 40;
    cfg.dt_save = 0.064;
    return cfg;
}

}  // namespace

TEST_CASE("constant state with zero forcing stays constant") {
    auto cfg = small_burgers();
    cfg.viscosity = 5.0;
    const Vec u0 = Vec::Constant(cfg.n_space, 1.7);
    const Mat frames = solve_burgers_trajectory(cfg, u0, {});
    for (int t = 0; t < cfg.n_time; ++t)
        for (int i = 0; i < cfg.n_space; ++i) CHECK(frames(t, i) == doctest::Approx(1.7).epsilon(1e-12));
}

TEST_CASE("unforced Burgers dissipates energy and conserves the mean") {
    auto cfg = small_burgers();
    SineSeries ic{{0.8, 0.0, 2, 0.3}, {0.3, 0.0, 3, 1.1}};
    const Vec u0 = evaluate_sine_series(ic, cfg.domain_length, cfg.n_space, 0.0);
    const Mat frames = solve_burgers_trajectory(cfg, u0, {});

    const double mean0 = frames.row(0).mean();
    double prev = frames.row(0).norm();
    for (int t = 1; t < cfg.n_time; ++t) {
        const double cur = frames.row(t).norm();
        CHECK(cur <= prev * (1.0 + 1e-12));
        CHECK(std::abs(frames.row(t).mean() - mean0) < 1e-10);
        prev = cur;
    }
}

TEST_CASE("refining the inner step leaves saved frames unchanged to 1e-4") {
    Rng rng(11);
    for (int rep = 0; rep < 3; ++rep) {
        auto cfg = small_burgers();
        cfg.n_time = 20;
        cfg.substeps = 6;
        Rng traj_rng(hash_seed(77, static_cast<uint64_t>(rep)));
        const SineSeries forcing = sample_sine_series(cfg, traj_rng);
        const SineSeries ic = sample_sine_series(cfg, traj_rng);
        const Vec u0 = evaluate_sine_series(ic, cfg.domain_length, cfg.n_space, 0.0);
        const Mat coarse = solve_burgers_trajectory(cfg, u0, forcing);
        cfg.substeps = 12;
        const Mat fine = solve_burgers_trajectory(cfg, u0, forcing);
        CHECK((coarse - fine).norm() / fine.norm() < 1e-4);
    }
    (void)rng;
}

TEST_CASE("burgers dataset has the documented shape and coordinates") {
    BurgersConfig cfg;
    cfg.n_space = 100;
    cfg.n_time = 50;
    cfg.seed = 3;
    const auto ds = solve_burgers(cfg, 2);
    const auto shape = ds.manifest.at("arrays").at("u").at("shape").get<std::vector<int64_t>>();
    CHECK(shape == std::vector<int64_t>{2, 50, 100, 1});
    CHECK(ds.grid(0)(0, 0) == 0.0);
    CHECK(ds.grid(0)(99, 0) == doctest::Approx(0.99));
    CHECK(ds.times[1] == doctest::Approx(cfg.dt_save));
}

TEST_CASE("trajectory generation is identical with and without threads") {
    BurgersConfig cfg = small_burgers();
    cfg.n_time = 10;
    cfg.seed = 21;
    const auto serial = solve_burgers(cfg, 4, false);
    const auto parallel = solve_burgers(cfg, 4, true);
    CHECK(serial.u == parallel.u);
    CHECK(serial.coords == parallel.coords);
}

TEST_CASE("zero vorticity stays zero") {
    Vorticity2DConfig cfg;
    cfg.n_space = 32;
    cfg.n_time = 5;
    const Mat w0 = Mat::Zero(32, 32);
    const Mat frames = solve_vorticity_trajectory(cfg, w0, false);
    CHECK(frames.cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("a single Fourier mode decays at the heat-equation rate") {
    Vorticity2DConfig cfg;
    cfg.n_space = 32;
    cfg.n_time = 6;
    cfg.dt_save = 0.5;
    cfg.viscosity = 1e-2;
    const int n = cfg.n_space;
    const int kx = 3, ky = 2;
    Mat w0(n, n);
    for (int j = 0; j < n; ++j)
        for (int i = 0; i < n; ++i)
            w0(j, i) = std::cos(2.0 * M_PI * (kx * static_cast<double>(i) / n +
                                              ky * static_cast<double>(j) / n));
    const Mat frames = solve_vorticity_trajectory(cfg, w0, false);
    const double k2 = 4.0 * M_PI * M_PI * (kx * kx + ky * ky);
    for (int t = 1; t < cfg.n_time; ++t) {
        const double expected = std::exp(-cfg.viscosity * k2 * t * cfg.dt_save);
        const double measured = frames.row(t).norm() / frames.row(0).norm();
        CHECK(measured == doctest::Approx(expected).epsilon(1e-6));
    }
}

TEST_CASE("mean vorticity is conserved under zero-mean forcing") {
    Vorticity2DConfig cfg;
    cfg.n_space = 32;
    cfg.n_time = 5;
    cfg.dt_save = 0.5;
    Rng rng(5);
    const Mat w0 = sample_grf_vorticity(cfg, rng);
    const Mat frames = solve_vorticity_trajectory(cfg, w0, true);
    for (int t = 0; t < cfg.n_time; ++t) CHECK(std::abs(frames.row(t).mean()) < 1e-10);
}

TEST_CASE("vorticity dataset matches the desk-scale shape") {
    Vorticity2DConfig cfg;
    cfg.n_space = 16;
    cfg.n_time = 8;
    cfg.seed = 2;
    const auto ds = solve_vorticity2d(cfg, 2);
    const auto shape = ds.manifest.at("arrays").at("u").at("shape").get<std::vector<int64_t>>();
    CHECK(shape == std::vector<int64_t>{2, 8, 256, 1});
    CHECK(ds.coord_dim == 2);
    // row-major point j*n+i carries (x, y) = (i/n, j/n)
    CHECK(ds.grid(0)(1, 0) == doctest::Approx(1.0 / 16));
    CHECK(ds.grid(0)(1, 1) == 0.0);
    CHECK(ds.grid(0)(16, 0) == 0.0);
    CHECK(ds.grid(0)(16, 1) == doctest::Approx(1.0 / 16));
}

TEST_CASE("vorticity solver convergence under substep refinement") {
    Vorticity2DConfig cfg;
    cfg.n_space = 32;
    cfg.n_time = 4;
    cfg.dt_save = 0.5;
    Rng rng(8);
    const Mat w0 = sample_grf_vorticity(cfg, rng);
    cfg.substeps = 16;
    const Mat coarse = solve_vorticity_trajectory(cfg, w0, true);
    cfg.substeps = 32;
    const Mat fine = solve_vorticity_trajectory(cfg, w0, true);
    CHECK((coarse - fine).norm() / fine.norm() < 1e-4);
}

TEST_CASE("an unstable step count reports SolverDiverged") {
    BurgersConfig cfg;
    cfg.n_space = 64;
    cfg.n_time = 40;
    cfg.dt_save = 5.0;
    cfg.substeps = 1;  // far beyond the CFL bound
    SineSeries ic{{2.5, 0.0, 3, 0.4}, {1.5, 0.0, 2, 2.0}};
    const Vec u0 = evaluate_sine_series(ic, cfg.domain_length, cfg.n_space, 0.0);
    CHECK_THROWS_WITH_AS(solve_burgers_trajectory(cfg, u0, {}, 7), doctest::Contains("SolverDiverged"),
                         Error);
}

TEST_CASE("invalid configurations are rejected") {
    BurgersConfig b;
    b.n_space = 10;
    CHECK_THROWS_AS(b.validate(), Error);
    b = BurgersConfig{};
    b.viscosity = 0.0;
    CHECK_THROWS_AS(b.validate(), Error);
    Vorticity2DConfig v;
    v.n_space = 48;  // not a power of two
    CHECK_THROWS_AS(v.validate(), Error);
}
