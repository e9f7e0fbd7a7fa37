#pragma once

#include <fftw3.h>

#include <complex>
#include <mutex>
#include <vector>

namespace aroma::sim {

inline std::mutex& fftw_plan_mutex() {
    static std::mutex m;
    return m;
}

/// 1D real<->complex transform of fixed size n. forward() applies the 1/n
/// normalization so that inverse(forward(x)) == x. Each instance owns its
/// plans and buffers; plan creation is serialized (FFTW planning is not
/// thread-safe, execution on private buffers is).
class Fft1d {
public:
    explicit Fft1d(int n) : n_(n), rbuf_(n), cbuf_(n / 2 + 1) {
        std::lock_guard<std::mutex> lock(fftw_plan_mutex());
        fwd_ = fftw_plan_dft_r2c_1d(n, rbuf_.data(),
                                    reinterpret_cast<fftw_complex*>(cbuf_.data()), FFTW_ESTIMATE);
        inv_ = fftw_plan_dft_c2r_1d(n, reinterpret_cast<fftw_complex*>(cbuf_.data()),
                                    rbuf_.data(), FFTW_ESTIMATE);
    }

    ~Fft1d() {
        std::lock_guard<std::mutex> lock(fftw_plan_mutex());
        fftw_destroy_plan(fwd_);
        fftw_destroy_plan(inv_);
    }

    Fft1d(const Fft1d&) = delete;
    Fft1d& operator=(const Fft1d&) = delete;

    int n() const { return n_; }
    int n_modes() const { return n_ / 2 + 1; }

    void forward(const double* x, std::complex<double>* xhat) {
        std::copy(x, x + n_, rbuf_.begin());
        fftw_execute(fwd_);
        const double scale = 1.0 / n_;
        for (int i = 0; i < n_modes(); ++i) xhat[i] = cbuf_[i] * scale;
    }

    void inverse(const std::complex<double>* xhat, double* x) {
        std::copy(xhat, xhat + n_modes(), cbuf_.begin());
        fftw_execute(inv_);
        std::copy(rbuf_.begin(), rbuf_.end(), x);
    }

private:
    int n_;
    std::vector<double> rbuf_;
    std::vector<std::complex<double>> cbuf_;
    fftw_plan fwd_, inv_;
};

/// 2D real<->complex transform on an n x n grid (row-major), normalized on
/// the forward direction. Complex layout is n x (n/2+1).
class Fft2d {
public:
    explicit Fft2d(int n) : n_(n), rbuf_(static_cast<size_t>(n) * n), cbuf_(static_cast<size_t>(n) * (n / 2 + 1)) {
        std::lock_guard<std::mutex> lock(fftw_plan_mutex());
        fwd_ = fftw_plan_dft_r2c_2d(n, n, rbuf_.data(),
                                    reinterpret_cast<fftw_complex*>(cbuf_.data()), FFTW_ESTIMATE);
        inv_ = fftw_plan_dft_c2r_2d(n, n, reinterpret_cast<fftw_complex*>(cbuf_.data()),
                                    rbuf_.data(), FFTW_ESTIMATE);
    }

    ~Fft2d() {
        std::lock_guard<std::mutex> lock(fftw_plan_mutex());
        fftw_destroy_plan(fwd_);
        fftw_destroy_plan(inv_);
    }

    Fft2d(const Fft2d&) = delete;
    Fft2d& operator=(const Fft2d&) = delete;

    int n() const { return n_; }
    int n_modes() const { return n_ * (n_ / 2 + 1); }

    void forward(const double* x, std::complex<double>* xhat) {
        std::copy(x, x + static_cast<size_t>(n_) * n_, rbuf_.begin());
        fftw_execute(fwd_);
        const double scale = 1.0 / (static_cast<double>(n_) * n_);
        for (int i = 0; i < n_modes(); ++i) xhat[i] = cbuf_[i] * scale;
    }

    void inverse(const std::complex<double>* xhat, double* x) {
        std::copy(xhat, xhat + n_modes(), cbuf_.begin());
        fftw_execute(inv_);
        std::copy(rbuf_.begin(), rbuf_.end(), x);
    }

private:
    int n_;
    std::vector<double> rbuf_;
    std::vector<std::complex<double>> cbuf_;
    fftw_plan fwd_, inv_;
};

}  // namespace aroma::sim
