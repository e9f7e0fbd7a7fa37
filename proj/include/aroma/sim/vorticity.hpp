#pragma once

#include "aroma/common.hpp"
#include "aroma/io/dataset.hpp"

namespace aroma::sim {

/// 2D incompressible Navier-Stokes in vorticity form on the unit torus:
///   w_t + u . grad(w) = nu Lap(w) + f,   u = rot(psi),  -Lap(psi) = w
struct Vorticity2DConfig {
    int n_space = 64;  // per axis, power of two
    int n_time = 40;
    double dt_save = 1.0;
    double viscosity = 1e-3;
    double forcing_amplitude = 0.1;  // f = a (sin(2 pi (x+y)) + cos(2 pi (x+y)))
    uint64_t seed = 0;
    int substeps = 0;
    // Gaussian random field IC: spectral density ~ (4 pi^2 |m|^2 + tau^2)^(-alpha),
    // rescaled to std ic_scale. Recorded in the manifest as artifact defaults.
    double ic_alpha = 2.5;
    double ic_tau = 7.0;
    double ic_scale = 1.0;

    void validate() const;

    io::json to_json() const;
    static Vorticity2DConfig from_json(const io::json& j);
};

/// Gaussian random vorticity field, n x n, zero mean.
Mat sample_grf_vorticity(const Vorticity2DConfig& cfg, Rng& rng);

/// One trajectory from the given vorticity field (n x n). Returns
/// n_time x (n*n) row-major frames, frame 0 = w0.
Mat solve_vorticity_trajectory(const Vorticity2DConfig& cfg, const Mat& w0, bool with_forcing,
                               int traj_index = -1);

io::TrajectoryDataset solve_vorticity2d(const Vorticity2DConfig& cfg, int n_trajectories,
                                        bool parallel = true);

}  // namespace aroma::sim
