#pragma once

#include "aroma/common.hpp"
#include "aroma/io/dataset.hpp"

#include <array>
#include <vector>

namespace aroma::sim {

/// 1D forced Burgers on a periodic domain:
///   u_t + u u_x = nu u_xx + f(x, t)
struct BurgersConfig {
    double domain_length = 16.0;
    int n_space = 100;
    int n_time = 250;
    double dt_save = 16.0 / 250.0;
    double viscosity = 0.1;
    int forcing_terms = 5;
    std::array<double, 2> amplitude_range{-0.5, 0.5};
    std::array<double, 2> frequency_range{-0.4, 0.4};
    std::array<double, 2> phase_range{0.0, 2.0 * M_PI};
    std::vector<int> wavenumber_set{1, 2, 3};
    uint64_t seed = 0;
    int substeps = 0;  // inner RK4 steps per saved frame; 0 = choose from a CFL estimate

    void validate() const;

    io::json to_json() const;
    static BurgersConfig from_json(const io::json& j);
};

/// f(x, t) = sum_j A_j sin(omega_j t + 2 pi l_j x / L + phi_j)
struct SineMode {
    double amplitude = 0.0;
    double omega = 0.0;
    int wavenumber = 1;
    double phase = 0.0;
};
using SineSeries = std::vector<SineMode>;

SineSeries sample_sine_series(const BurgersConfig& cfg, Rng& rng);
Vec evaluate_sine_series(const SineSeries& series, double domain_length, int n, double t);

/// Integrate one trajectory with a dealiased pseudo-spectral scheme
/// (integrating-factor RK4). Returns n_time x n_space, frame 0 = u0.
Mat solve_burgers_trajectory(const BurgersConfig& cfg, const Vec& u0, const SineSeries& forcing,
                             int traj_index = -1);

/// Sample n_trajectories (IC and forcing drawn per trajectory from the
/// config ranges) and pack them into a dataset. Trajectories are independent
/// tasks keyed by (seed, index); the result does not depend on `parallel`.
io::TrajectoryDataset solve_burgers(const BurgersConfig& cfg, int n_trajectories,
                                    bool parallel = true);

}  // namespace aroma::sim
