#pragma once

#include "aroma/common.hpp"

#include <vector>

namespace aroma::nn {

/// Deterministic Fourier features: for each coordinate axis and frequency f,
/// the pair (cos(2 pi f x), sin(2 pi f x)). Integer frequencies make the
/// embedding exactly periodic on the unit interval.
struct FourierEmbedder {
    std::vector<double> frequencies;
    int coord_dim = 1;

    static FourierEmbedder log_spaced(int coord_dim, double min_exp, double max_exp, int count);
    static FourierEmbedder from_frequencies(int coord_dim, std::vector<double> freqs);

    Eigen::Index out_dim() const {
        return static_cast<Eigen::Index>(2 * frequencies.size() * static_cast<size_t>(coord_dim));
    }

    Mat embed(const Mat& coords) const;
};

inline FourierEmbedder FourierEmbedder::log_spaced(int coord_dim, double min_exp, double max_exp,
                                                   int count) {
    FourierEmbedder e;
    e.coord_dim = coord_dim;
    e.frequencies.resize(static_cast<size_t>(count));
    for (int i = 0; i < count; ++i) {
        const double t = count > 1 ? static_cast<double>(i) / (count - 1) : 1.0;
        e.frequencies[static_cast<size_t>(i)] = std::pow(2.0, min_exp + t * (max_exp - min_exp));
    }
    return e;
}

inline FourierEmbedder FourierEmbedder::from_frequencies(int coord_dim,
                                                         std::vector<double> freqs) {
    FourierEmbedder e;
    e.coord_dim = coord_dim;
    e.frequencies = std::move(freqs);
    return e;
}

inline Mat FourierEmbedder::embed(const Mat& coords) const {
    const Eigen::Index n = coords.rows();
    const Eigen::Index nf = static_cast<Eigen::Index>(frequencies.size());
    Mat out(n, out_dim());
    for (Eigen::Index i = 0; i < n; ++i) {
        Eigen::Index col = 0;
        for (int d = 0; d < coord_dim; ++d) {
            const double x = coords(i, d);
            for (Eigen::Index f = 0; f < nf; ++f) {
                const double arg = 2.0 * M_PI * frequencies[static_cast<size_t>(f)] * x;
                out(i, col++) = std::cos(arg);
                out(i, col++) = std::sin(arg);
            }
        }
    }
    return out;
}

}  // namespace aroma::nn
