#include "aroma/sim/vorticity.hpp"

#include "fft_util.hpp"

#include <cmath>
#include <complex>

namespace aroma::sim {

void Vorticity2DConfig::validate() const {
    if (n_space < 16 || (n_space & (n_space - 1)) != 0)
        throw Error("ConfigError",
                    "n_space must be a power of two >= 16, got " + std::to_string(n_space));
    if (!(viscosity > 0.0)) throw Error("ConfigError", "viscosity must be positive");
    if (!(dt_save > 0.0)) throw Error("ConfigError", "dt_save must be positive");
    if (n_time < 1) throw Error("ConfigError", "n_time must be >= 1");
}

io::json Vorticity2DConfig::to_json() const {
    return io::json{{"n_space", n_space},
                    {"n_time", n_time},
                    {"dt_save", dt_save},
                    {"viscosity", viscosity},
                    {"forcing_amplitude", forcing_amplitude},
                    {"seed", seed},
                    {"substeps", substeps},
                    {"ic_alpha", ic_alpha},
                    {"ic_tau", ic_tau},
                    {"ic_scale", ic_scale}};
}

Vorticity2DConfig Vorticity2DConfig::from_json(const io::json& j) {
    Vorticity2DConfig c;
    c.n_space = j.value("n_space", c.n_space);
    c.n_time = j.value("n_time", c.n_time);
    c.dt_save = j.value("dt_save", c.dt_save);
    c.viscosity = j.value("viscosity", c.viscosity);
    c.forcing_amplitude = j.value("forcing_amplitude", c.forcing_amplitude);
    c.seed = j.value("seed", c.seed);
    c.substeps = j.value("substeps", c.substeps);
    c.ic_alpha = j.value("ic_alpha", c.ic_alpha);
    c.ic_tau = j.value("ic_tau", c.ic_tau);
    c.ic_scale = j.value("ic_scale", c.ic_scale);
    return c;
}

namespace {

inline int signed_mode(int idx, int n) { return idx <= n / 2 ? idx : idx - n; }

struct SpectralGrid {
    int n, nmx, nmy;  // complex layout: n rows (ky), n/2+1 cols (kx)
    std::vector<double> kx, ky;

    explicit SpectralGrid(int n_) : n(n_), nmx(n_ / 2 + 1), nmy(n_) {
        kx.resize(nmx);
        ky.resize(nmy);
        for (int i = 0; i < nmx; ++i) kx[i] = 2.0 * M_PI * i;
        for (int j = 0; j < nmy; ++j) ky[j] = 2.0 * M_PI * signed_mode(j, n);
    }

    int idx(int row, int col) const { return row * nmx + col; }

    bool dealias_keep(int row, int col) const {
        const int mx = col;
        const int my = std::abs(signed_mode(row, n));
        return mx <= n / 3 && my <= n / 3;
    }
};

class VorticityStepper {
public:
    VorticityStepper(const Vorticity2DConfig& cfg, bool with_forcing)
        : cfg_(cfg), fft_(cfg.n_space), grid_(cfg.n_space) {
        const int nm = fft_.n_modes();
        const int n2 = cfg.n_space * cfg.n_space;
        ux_.resize(n2);
        uy_.resize(n2);
        wx_.resize(n2);
        wy_.resize(n2);
        adv_.resize(n2);
        psi_hat_.resize(nm);
        tmp_hat_.resize(nm);
        fhat_.assign(nm, std::complex<double>(0.0, 0.0));
        if (with_forcing && cfg.forcing_amplitude != 0.0) {
            std::vector<double> f(n2);
            const int n = cfg.n_space;
            for (int j = 0; j < n; ++j)
                for (int i = 0; i < n; ++i) {
                    const double x = static_cast<double>(i) / n;
                    const double y = static_cast<double>(j) / n;
                    const double s = 2.0 * M_PI * (x + y);
                    f[static_cast<size_t>(j) * n + i] =
                        cfg.forcing_amplitude * (std::sin(s) + std::cos(s));
                }
            fft_.forward(f.data(), fhat_.data());
        }
        for (int s = 0; s < 4; ++s) stage_[s].resize(nm);
        scratch_state_.resize(nm);
        e_half_.resize(nm);
        e_full_.resize(nm);
    }

    // N(what) = -FFT(u . grad w) + fhat, dealiased
    void nonlinear(const std::vector<std::complex<double>>& what,
                   std::vector<std::complex<double>>& out) {
        const int n = cfg_.n_space;
        // streamfunction and velocity: psi_hat = what / |k|^2, u = (dpsi/dy, -dpsi/dx)
        for (int row = 0; row < grid_.nmy; ++row)
            for (int col = 0; col < grid_.nmx; ++col) {
                const int id = grid_.idx(row, col);
                const double k2 = grid_.kx[col] * grid_.kx[col] + grid_.ky[row] * grid_.ky[row];
                psi_hat_[id] = k2 > 0.0 ? what[id] / k2 : 0.0;
            }
        derivative(psi_hat_, /*wrt_x=*/false, ux_);  // u_x = dpsi/dy
        derivative(psi_hat_, /*wrt_x=*/true, uy_);
        for (double& v : uy_) v = -v;  // u_y = -dpsi/dx
        derivative(what, /*wrt_x=*/true, wx_);
        derivative(what, /*wrt_x=*/false, wy_);
        const int n2 = n * n;
        for (int i = 0; i < n2; ++i) adv_[i] = ux_[i] * wx_[i] + uy_[i] * wy_[i];
        fft_.forward(adv_.data(), tmp_hat_.data());
        for (int row = 0; row < grid_.nmy; ++row)
            for (int col = 0; col < grid_.nmx; ++col) {
                const int id = grid_.idx(row, col);
                out[id] = grid_.dealias_keep(row, col) ? (-tmp_hat_[id] + fhat_[id])
                                                       : std::complex<double>(0.0, 0.0);
            }
    }

    void prepare_step(double h) {
        for (int row = 0; row < grid_.nmy; ++row)
            for (int col = 0; col < grid_.nmx; ++col) {
                const int id = grid_.idx(row, col);
                const double lam =
                    -cfg_.viscosity *
                    (grid_.kx[col] * grid_.kx[col] + grid_.ky[row] * grid_.ky[row]);
                e_half_[id] = std::exp(lam * h * 0.5);
                e_full_[id] = std::exp(lam * h);
            }
    }

    void step(std::vector<std::complex<double>>& what, double h) {
        const int nm = fft_.n_modes();
        auto& k1 = stage_[0];
        auto& k2 = stage_[1];
        auto& k3 = stage_[2];
        auto& k4 = stage_[3];
        nonlinear(what, k1);
        std::vector<std::complex<double>>& tmp = scratch_state_;
        for (int m = 0; m < nm; ++m) tmp[m] = e_half_[m] * (what[m] + 0.5 * h * k1[m]);
        nonlinear(tmp, k2);
        for (int m = 0; m < nm; ++m) k2[m] /= e_half_[m];
        for (int m = 0; m < nm; ++m) tmp[m] = e_half_[m] * (what[m] + 0.5 * h * k2[m]);
        nonlinear(tmp, k3);
        for (int m = 0; m < nm; ++m) k3[m] /= e_half_[m];
        for (int m = 0; m < nm; ++m) tmp[m] = e_full_[m] * (what[m] + h * k3[m]);
        nonlinear(tmp, k4);
        for (int m = 0; m < nm; ++m) k4[m] /= e_full_[m];
        for (int m = 0; m < nm; ++m)
            what[m] = e_full_[m] *
                      (what[m] + (h / 6.0) * (k1[m] + 2.0 * k2[m] + 2.0 * k3[m] + k4[m]));
    }

    double max_speed(const std::vector<std::complex<double>>& what) {
        for (int row = 0; row < grid_.nmy; ++row)
            for (int col = 0; col < grid_.nmx; ++col) {
                const int id = grid_.idx(row, col);
                const double k2 = grid_.kx[col] * grid_.kx[col] + grid_.ky[row] * grid_.ky[row];
                psi_hat_[id] = k2 > 0.0 ? what[id] / k2 : 0.0;
            }
        derivative(psi_hat_, false, ux_);
        derivative(psi_hat_, true, uy_);
        double vmax = 0.0;
        for (size_t i = 0; i < ux_.size(); ++i)
            vmax = std::max(vmax, std::max(std::abs(ux_[i]), std::abs(uy_[i])));
        return vmax;
    }

    Fft2d& fft() { return fft_; }

private:
    void derivative(const std::vector<std::complex<double>>& xhat, bool wrt_x,
                    std::vector<double>& out) {
        for (int row = 0; row < grid_.nmy; ++row)
            for (int col = 0; col < grid_.nmx; ++col) {
                const int id = grid_.idx(row, col);
                const double k = wrt_x ? grid_.kx[col] : grid_.ky[row];
                tmp_hat_[id] = std::complex<double>(0.0, k) * xhat[id];
            }
        // r2c symmetry: the Nyquist column of an odd derivative must vanish
        if (wrt_x) {
            for (int row = 0; row < grid_.nmy; ++row) tmp_hat_[grid_.idx(row, grid_.nmx - 1)] = 0.0;
        } else {
            const int nyq_row = grid_.n / 2;
            for (int col = 0; col < grid_.nmx; ++col) tmp_hat_[grid_.idx(nyq_row, col)] = 0.0;
        }
        fft_.inverse(tmp_hat_.data(), out.data());
    }

    const Vorticity2DConfig& cfg_;
    Fft2d fft_;
    SpectralGrid grid_;
    std::vector<double> ux_, uy_, wx_, wy_, adv_;
    std::vector<std::complex<double>> psi_hat_, tmp_hat_, fhat_, scratch_state_;
    std::vector<std::complex<double>> stage_[4];
    std::vector<double> e_half_, e_full_;
};

}  // namespace

Mat sample_grf_vorticity(const Vorticity2DConfig& cfg, Rng& rng) {
    const int n = cfg.n_space;
    Fft2d fft(n);
    const int nmx = n / 2 + 1;
    std::vector<std::complex<double>> what(static_cast<size_t>(n) * nmx);
    for (int row = 0; row < n; ++row)
        for (int col = 0; col < nmx; ++col) {
            const double mx = col;
            const double my = signed_mode(row, n);
            const double k2 = 4.0 * M_PI * M_PI * (mx * mx + my * my);
            const double amp = std::pow(k2 + cfg.ic_tau * cfg.ic_tau, -cfg.ic_alpha / 2.0);
            what[static_cast<size_t>(row) * nmx + col] =
                amp * std::complex<double>(rng.normal(), rng.normal());
        }
    what[0] = 0.0;  // zero mean
    std::vector<double> w(static_cast<size_t>(n) * n);
    fft.inverse(what.data(), w.data());
    Mat out(n, n);
    for (int j = 0; j < n; ++j)
        for (int i = 0; i < n; ++i) out(j, i) = w[static_cast<size_t>(j) * n + i];
    const double mean = out.mean();
    out.array() -= mean;
    const double sd = std::sqrt(out.array().square().mean());
    if (sd > 0.0) out *= cfg.ic_scale / sd;
    return out;
}

Mat solve_vorticity_trajectory(const Vorticity2DConfig& cfg, const Mat& w0, bool with_forcing,
                               int traj_index) {
    cfg.validate();
    const int n = cfg.n_space;
    if (w0.rows() != n || w0.cols() != n)
        throw Error("ConfigError", "initial vorticity must be n_space x n_space");

    VorticityStepper stepper(cfg, with_forcing);
    const int nm = stepper.fft().n_modes();
    std::vector<std::complex<double>> what(nm);
    std::vector<double> w_phys(static_cast<size_t>(n) * n);
    for (int j = 0; j < n; ++j)
        for (int i = 0; i < n; ++i) w_phys[static_cast<size_t>(j) * n + i] = w0(j, i);
    stepper.fft().forward(w_phys.data(), what.data());

    int substeps = cfg.substeps;
    if (substeps <= 0) {
        const double vmax = std::max(0.2, stepper.max_speed(what) * 1.5);
        const double k_max = 2.0 * M_PI * (n / 3);
        const double h_max = 2.0 / (2.0 * vmax * k_max);
        substeps = std::max(4, static_cast<int>(std::ceil(cfg.dt_save / h_max)));
    }
    const double h = cfg.dt_save / substeps;
    stepper.prepare_step(h);

    Mat frames(cfg.n_time, n * n);
    for (int i = 0; i < n * n; ++i) frames(0, i) = w_phys[static_cast<size_t>(i)];
    for (int frame = 1; frame < cfg.n_time; ++frame) {
        for (int s = 0; s < substeps; ++s) stepper.step(what, h);
        stepper.fft().inverse(what.data(), w_phys.data());
        for (int i = 0; i < n * n; ++i) {
            if (!std::isfinite(w_phys[static_cast<size_t>(i)]) ||
                std::abs(w_phys[static_cast<size_t>(i)]) > 1e6)
                throw Error("SolverDiverged", "vorticity trajectory " + std::to_string(traj_index) +
                                                  " diverged at frame " + std::to_string(frame));
            frames(frame, i) = w_phys[static_cast<size_t>(i)];
        }
    }
    return frames;
}

io::TrajectoryDataset solve_vorticity2d(const Vorticity2DConfig& cfg, int n_trajectories,
                                        bool parallel) {
    cfg.validate();
    const int n = cfg.n_space;
    io::json config = cfg.to_json();
    config["provenance"] = {{"forcing", "reference-standard"},
                            {"initial_condition", "artifact-default"},
                            {"time_stepper", "artifact-default"}};
    io::TrajectoryDataset ds = io::TrajectoryDataset::create("ns2d", config, n_trajectories,
                                                             cfg.n_time, n * n, 1, 2);
    for (int i = 0; i < cfg.n_time; ++i) ds.times[static_cast<size_t>(i)] = static_cast<float>(i * cfg.dt_save);

    std::string failure;
#pragma omp parallel for schedule(dynamic) if (parallel)
    for (int traj = 0; traj < n_trajectories; ++traj) {
        try {
            Rng rng(hash_seed(cfg.seed, 0x6e733264ULL, static_cast<uint64_t>(traj)));
            const Mat w0 = sample_grf_vorticity(cfg, rng);
            const Mat frames = solve_vorticity_trajectory(cfg, w0, true, traj);
            for (int t = 0; t < cfg.n_time; ++t) {
                float* dst = ds.frame_ptr(traj, t);
                for (int i = 0; i < n * n; ++i) dst[i] = static_cast<float>(frames(t, i));
            }
            // row-major grid: index j*n+i sits at (x, y) = (i/n, j/n)
            float* cdst = ds.coords.data() + static_cast<int64_t>(traj) * n * n * 2;
            for (int j = 0; j < n; ++j)
                for (int i = 0; i < n; ++i) {
                    cdst[(static_cast<int64_t>(j) * n + i) * 2 + 0] =
                        static_cast<float>(static_cast<double>(i) / n);
                    cdst[(static_cast<int64_t>(j) * n + i) * 2 + 1] =
                        static_cast<float>(static_cast<double>(j) / n);
                }
        } catch (const std::exception& e) {
#pragma omp critical
            if (failure.empty()) failure = e.what();
        }
    }
    if (!failure.empty()) throw Error("SolverDiverged", failure);
    return ds;
}

}  // namespace aroma::sim
