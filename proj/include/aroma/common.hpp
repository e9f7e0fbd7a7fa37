#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <utility>

namespace aroma {

using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vec = Eigen::VectorXd;
using MatMap = Eigen::Map<Mat>;
using ConstMatMap = Eigen::Map<const Mat>;

/// One physical state observed on an arbitrary point set:
/// coords are N x dim positions in [0,1)^dim, values are N x C samples.
struct FieldSnapshot {
    Mat coords;
    Mat values;

    Eigen::Index n_points() const { return coords.rows(); }
    Eigen::Index coord_dim() const { return coords.cols(); }
    Eigen::Index channels() const { return values.cols(); }
};

/// Error with a machine-readable kind (SolverDiverged, InvalidWindow, ...).
class Error : public std::runtime_error {
public:
    Error(std::string kind, const std::string& message)
        : std::runtime_error(kind + ": " + message), kind_(std::move(kind)) {}

    const std::string& kind() const { return kind_; }

private:
    std::string kind_;
};

/// splitmix64 step, used to derive independent child seeds.
inline uint64_t mix_seed(uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

inline uint64_t hash_seed(uint64_t seed, uint64_t a, uint64_t b = 0, uint64_t c = 0) {
    uint64_t h = mix_seed(seed);
    h = mix_seed(h ^ a);
    h = mix_seed(h ^ b);
    h = mix_seed(h ^ c);
    return h;
}

/// Deterministic RNG. Gaussian variates use an explicit Box-Muller transform so
/// streams do not depend on the standard library's distribution implementation.
class Rng {
public:
    explicit Rng(uint64_t seed) : state_(seed ? seed : 0x853c49e6748fea9bULL) {}

    uint64_t next_u64() {
        // xorshift128+ style mixing over splitmix-expanded state
        state_ = mix_seed(state_);
        return state_;
    }

    /// Uniform in [0, 1).
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Uniform integer in [0, n).
    int64_t uniform_int(int64_t n) {
        return static_cast<int64_t>(uniform() * static_cast<double>(n)) % n;
    }

    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u1 = 0.0;
        while (u1 <= 1e-300) u1 = uniform();
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double theta = 2.0 * M_PI * u2;
        spare_ = r * std::sin(theta);
        has_spare_ = true;
        return r * std::cos(theta);
    }

    void fill_normal(Mat& m) {
        for (Eigen::Index i = 0; i < m.rows(); ++i)
            for (Eigen::Index j = 0; j < m.cols(); ++j) m(i, j) = normal();
    }

    Rng fork(uint64_t stream) { return Rng(hash_seed(next_u64(), stream)); }

private:
    uint64_t state_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

/// Run fn(i) for i in [0, n). When parallel is false the loop is the serial
/// reference path; results must match the parallel one for independent items.
void parallel_for(int64_t n, const std::function<void(int64_t)>& fn, bool parallel = true);

/// Like parallel_for but also hands fn the executing thread index, for code
/// that accumulates into per-thread buffers.
void parallel_for_threaded(int64_t n, const std::function<void(int64_t, int)>& fn,
                           bool parallel = true);

int max_threads();

double now_seconds();

}  // namespace aroma
