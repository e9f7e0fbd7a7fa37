#pragma once

#include "aroma/common.hpp"

#include <vector>

namespace aroma::sim {

/// A point set retained from a parent regular grid. Coordinates live in
/// [0,1)^dim and are ordered by ascending row-major parent index.
struct GridSpec {
    Mat coords;                        // N x dim
    std::vector<int> parent_resolution;
    double keep_fraction = 1.0;
    std::vector<int64_t> indices;      // row-major indices into the parent grid

    Eigen::Index n_points() const { return coords.rows(); }
};

/// Full regular grid over [0,1)^dim, row-major, node d at i/n_d.
GridSpec full_grid(const std::vector<int>& resolution);

/// Uniform random subset without replacement of round(pi * parent size)
/// points. Deterministic for a fixed seed; pi = 1 returns the canonical
/// row-major grid. Rounding is to nearest, ties to even.
GridSpec subsample_grid(const std::vector<int>& parent_resolution, double pi, uint64_t seed);

}  // namespace aroma::sim
