#include "aroma/sim/burgers.hpp"

#include "fft_util.hpp"

#include <cmath>
#include <complex>

namespace aroma::sim {

void BurgersConfig::validate() const {
    if (n_space < 16 || n_space % 2 != 0)
        throw Error("ConfigError", "n_space must be even and >= 16, got " + std::to_string(n_space));
    if (!(viscosity > 0.0)) throw Error("ConfigError", "viscosity must be positive");
    if (!(dt_save > 0.0)) throw Error("ConfigError", "dt_save must be positive");
    if (n_time < 1) throw Error("ConfigError", "n_time must be >= 1");
    if (!(domain_length > 0.0)) throw Error("ConfigError", "domain_length must be positive");
    if (forcing_terms < 0) throw Error("ConfigError", "forcing_terms must be >= 0");
    if (forcing_terms > 0 && wavenumber_set.empty())
        throw Error("ConfigError", "wavenumber_set must be non-empty when forcing is enabled");
}

io::json BurgersConfig::to_json() const {
    return io::json{{"domain_length", domain_length},
                    {"n_space", n_space},
                    {"n_time", n_time},
                    {"dt_save", dt_save},
                    {"viscosity", viscosity},
                    {"forcing_terms", forcing_terms},
                    {"amplitude_range", amplitude_range},
                    {"frequency_range", frequency_range},
                    {"phase_range", phase_range},
                    {"wavenumber_set", wavenumber_set},
                    {"seed", seed},
                    {"substeps", substeps}};
}

BurgersConfig BurgersConfig::from_json(const io::json& j) {
    BurgersConfig c;
    c.domain_length = j.value("domain_length", c.domain_length);
    c.n_space = j.value("n_space", c.n_space);
    c.n_time = j.value("n_time", c.n_time);
    c.dt_save = j.value("dt_save", c.dt_save);
    c.viscosity = j.value("viscosity", c.viscosity);
    c.forcing_terms = j.value("forcing_terms", c.forcing_terms);
    if (j.contains("amplitude_range")) c.amplitude_range = j.at("amplitude_range");
    if (j.contains("frequency_range")) c.frequency_range = j.at("frequency_range");
    if (j.contains("phase_range")) c.phase_range = j.at("phase_range");
    if (j.contains("wavenumber_set")) c.wavenumber_set = j.at("wavenumber_set").get<std::vector<int>>();
    c.seed = j.value("seed", c.seed);
    c.substeps = j.value("substeps", c.substeps);
    return c;
}

SineSeries sample_sine_series(const BurgersConfig& cfg, Rng& rng) {
    SineSeries series;
    series.reserve(static_cast<size_t>(cfg.forcing_terms));
    for (int j = 0; j < cfg.forcing_terms; ++j) {
        SineMode m;
        m.amplitude = rng.uniform(cfg.amplitude_range[0], cfg.amplitude_range[1]);
        m.omega = rng.uniform(cfg.frequency_range[0], cfg.frequency_range[1]);
        m.wavenumber = cfg.wavenumber_set[static_cast<size_t>(rng.uniform_int(cfg.wavenumber_set.size()))];
        m.phase = rng.uniform(cfg.phase_range[0], cfg.phase_range[1]);
        series.push_back(m);
    }
    return series;
}

Vec evaluate_sine_series(const SineSeries& series, double domain_length, int n, double t) {
    Vec out = Vec::Zero(n);
    for (const SineMode& m : series) {
        const double kx = 2.0 * M_PI * m.wavenumber / domain_length;
        for (int i = 0; i < n; ++i) {
            const double x = domain_length * i / n;
            out[i] += m.amplitude * std::sin(m.omega * t + kx * x + m.phase);
        }
    }
    return out;
}

namespace {

class BurgersStepper {
public:
    BurgersStepper(const BurgersConfig& cfg, const SineSeries& forcing)
        : cfg_(cfg), forcing_(forcing), fft_(cfg.n_space), nm_(fft_.n_modes()) {
        const int n = cfg.n_space;
        k_.resize(nm_);
        dealias_.resize(nm_);
        for (int m = 0; m < nm_; ++m) {
            k_[m] = 2.0 * M_PI * m / cfg.domain_length;
            dealias_[m] = (m <= n / 3) ? 1.0 : 0.0;
        }
        u_phys_.resize(n);
        w_phys_.resize(n);
        what_.resize(nm_);
        fhat_.resize(nm_);
    }

    // N(uhat, t) = -0.5 i k dealias((u^2)^) + fhat(t)
    void nonlinear(const std::vector<std::complex<double>>& uhat, double t,
                   std::vector<std::complex<double>>& out) {
        fft_.inverse(uhat.data(), u_phys_.data());
        for (int i = 0; i < cfg_.n_space; ++i) w_phys_[i] = u_phys_[i] * u_phys_[i];
        fft_.forward(w_phys_.data(), what_.data());
        if (!forcing_.empty()) {
            const Vec f = evaluate_sine_series(forcing_, cfg_.domain_length, cfg_.n_space, t);
            fft_.forward(f.data(), fhat_.data());
        } else {
            std::fill(fhat_.begin(), fhat_.end(), std::complex<double>(0.0, 0.0));
        }
        for (int m = 0; m < nm_; ++m) {
            const std::complex<double> ik(0.0, k_[m]);
            out[m] = dealias_[m] * (-0.5 * ik * what_[m]) + fhat_[m];
        }
    }

    // integrating-factor RK4 over one inner step of size h starting at time t
    void step(std::vector<std::complex<double>>& uhat, double t, double h) {
        const int nm = nm_;
        std::vector<std::complex<double>> k1(nm), k2(nm), k3(nm), k4(nm), tmp(nm);
        std::vector<double> e_half(nm), e_full(nm);
        for (int m = 0; m < nm; ++m) {
            const double lam = -cfg_.viscosity * k_[m] * k_[m];
            e_half[m] = std::exp(lam * h * 0.5);
            e_full[m] = std::exp(lam * h);
        }
        nonlinear(uhat, t, k1);
        for (int m = 0; m < nm; ++m) tmp[m] = e_half[m] * (uhat[m] + 0.5 * h * k1[m]);
        nonlinear(tmp, t + 0.5 * h, k2);
        for (int m = 0; m < nm; ++m) k2[m] /= e_half[m];
        for (int m = 0; m < nm; ++m) tmp[m] = e_half[m] * (uhat[m] + 0.5 * h * k2[m]);
        nonlinear(tmp, t + 0.5 * h, k3);
        for (int m = 0; m < nm; ++m) k3[m] /= e_half[m];
        for (int m = 0; m < nm; ++m) tmp[m] = e_full[m] * (uhat[m] + h * k3[m]);
        nonlinear(tmp, t + h, k4);
        for (int m = 0; m < nm; ++m) k4[m] /= e_full[m];
        for (int m = 0; m < nm; ++m) {
            const std::complex<double> incr =
                (h / 6.0) * (k1[m] + 2.0 * k2[m] + 2.0 * k3[m] + k4[m]);
            uhat[m] = e_full[m] * (uhat[m] + incr);
        }
    }

    Fft1d& fft() { return fft_; }

private:
    const BurgersConfig& cfg_;
    const SineSeries& forcing_;
    Fft1d fft_;
    int nm_;
    std::vector<double> k_, dealias_;
    std::vector<double> u_phys_, w_phys_;
    std::vector<std::complex<double>> what_, fhat_;
};

int auto_substeps(const BurgersConfig& cfg, const Vec& u0, const SineSeries& forcing) {
    if (cfg.substeps > 0) return cfg.substeps;
    double amp = 0.0;
    for (const SineMode& m : forcing) amp += std::abs(m.amplitude);
    const double u_est = std::max(2.0, 2.0 * u0.cwiseAbs().maxCoeff() + amp);
    const double k_max = 2.0 * M_PI * (cfg.n_space / 3) / cfg.domain_length;
    const double h_max = 2.0 / (u_est * k_max);
    return std::max(4, static_cast<int>(std::ceil(cfg.dt_save / h_max)));
}

}  // namespace

Mat solve_burgers_trajectory(const BurgersConfig& cfg, const Vec& u0, const SineSeries& forcing,
                             int traj_index) {
    cfg.validate();
    if (u0.size() != cfg.n_space)
        throw Error("ConfigError", "initial condition size does not match n_space");

    BurgersStepper stepper(cfg, forcing);
    const int nm = stepper.fft().n_modes();
    std::vector<std::complex<double>> uhat(nm);
    stepper.fft().forward(u0.data(), uhat.data());

    const int substeps = auto_substeps(cfg, u0, forcing);
    const double h = cfg.dt_save / substeps;

    Mat frames(cfg.n_time, cfg.n_space);
    frames.row(0) = u0.transpose();
    std::vector<double> u_phys(cfg.n_space);
    for (int frame = 1; frame < cfg.n_time; ++frame) {
        const double t0 = (frame - 1) * cfg.dt_save;
        for (int s = 0; s < substeps; ++s) stepper.step(uhat, t0 + s * h, h);
        stepper.fft().inverse(uhat.data(), u_phys.data());
        for (int i = 0; i < cfg.n_space; ++i) {
            if (!std::isfinite(u_phys[i]) || std::abs(u_phys[i]) > 1e6)
                throw Error("SolverDiverged", "Burgers trajectory " + std::to_string(traj_index) +
                                                  " diverged at frame " + std::to_string(frame));
            frames(frame, i) = u_phys[i];
        }
    }
    return frames;
}

io::TrajectoryDataset solve_burgers(const BurgersConfig& cfg, int n_trajectories, bool parallel) {
    cfg.validate();
    io::json config = cfg.to_json();
    config["ic_family"] = "sine-series";
    config["provenance"] = {{"forcing", "artifact-default"},
                            {"initial_condition", "artifact-default"},
                            {"time_stepper", "artifact-default"}};
    io::TrajectoryDataset ds = io::TrajectoryDataset::create(
        "burgers", config, n_trajectories, cfg.n_time, cfg.n_space, 1, 1);

    for (int i = 0; i < cfg.n_time; ++i) ds.times[static_cast<size_t>(i)] = static_cast<float>(i * cfg.dt_save);

    std::string failure;
#pragma omp parallel for schedule(dynamic) if (parallel)
    for (int traj = 0; traj < n_trajectories; ++traj) {
        try {
            Rng rng(hash_seed(cfg.seed, 0x6275726773ULL, static_cast<uint64_t>(traj)));
            const SineSeries forcing = sample_sine_series(cfg, rng);
            const SineSeries ic_series = sample_sine_series(cfg, rng);
            const Vec u0 = evaluate_sine_series(ic_series, cfg.domain_length, cfg.n_space, 0.0);
            const Mat frames = solve_burgers_trajectory(cfg, u0, forcing, traj);
            for (int t = 0; t < cfg.n_time; ++t) {
                float* dst = ds.frame_ptr(traj, t);
                for (int i = 0; i < cfg.n_space; ++i) dst[i] = static_cast<float>(frames(t, i));
            }
            float* cdst = ds.coords.data() + static_cast<int64_t>(traj) * cfg.n_space;
            for (int i = 0; i < cfg.n_space; ++i)
                cdst[i] = static_cast<float>(static_cast<double>(i) / cfg.n_space);
        } catch (const std::exception& e) {
#pragma omp critical
            if (failure.empty()) failure = e.what();
        }
    }
    if (!failure.empty()) throw Error("SolverDiverged", failure);
    return ds;
}

}  // namespace aroma::sim
