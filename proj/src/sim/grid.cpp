#include "aroma/sim/grid.hpp"

#include <algorithm>
#include <cfenv>
#include <cmath>
#include <numeric>

namespace aroma::sim {

namespace {

Mat coords_from_indices(const std::vector<int64_t>& idx, const std::vector<int>& res) {
    const int dim = static_cast<int>(res.size());
    Mat coords(static_cast<Eigen::Index>(idx.size()), dim);
    for (size_t p = 0; p < idx.size(); ++p) {
        int64_t rem = idx[p];
        // row-major: the last dimension varies fastest
        for (int d = dim - 1; d >= 0; --d) {
            const int64_t n = res[d];
            coords(static_cast<Eigen::Index>(p), d) = static_cast<double>(rem % n) / static_cast<double>(n);
            rem /= n;
        }
    }
    return coords;
}

}  // namespace

GridSpec full_grid(const std::vector<int>& resolution) {
    int64_t total = 1;
    for (int n : resolution) total *= n;
    std::vector<int64_t> idx(total);
    std::iota(idx.begin(), idx.end(), 0);
    GridSpec g;
    g.coords = coords_from_indices(idx, resolution);
    g.parent_resolution = resolution;
    g.keep_fraction = 1.0;
    g.indices = std::move(idx);
    return g;
}

GridSpec subsample_grid(const std::vector<int>& parent_resolution, double pi, uint64_t seed) {
    if (!(pi > 0.0) || pi > 1.0)
        throw Error("GridTooSparse", "keep fraction must be in (0, 1], got " + std::to_string(pi));
    if (pi == 1.0) return full_grid(parent_resolution);

    int64_t total = 1;
    for (int n : parent_resolution) total *= n;
    const int64_t keep = static_cast<int64_t>(std::nearbyint(pi * static_cast<double>(total)));
    if (keep < 8)
        throw Error("GridTooSparse",
                    "keep fraction " + std::to_string(pi) + " retains " + std::to_string(keep) +
                        " points (< 8)");

    // partial Fisher-Yates: the first `keep` slots are a uniform subset
    std::vector<int64_t> pool(total);
    std::iota(pool.begin(), pool.end(), 0);
    Rng rng(hash_seed(seed, 0x677269645f737562ULL));  // "grid_sub"
    for (int64_t i = 0; i < keep; ++i) {
        const int64_t j = i + rng.uniform_int(total - i);
        std::swap(pool[i], pool[j]);
    }
    std::vector<int64_t> idx(pool.begin(), pool.begin() + keep);
    std::sort(idx.begin(), idx.end());

    GridSpec g;
    g.coords = coords_from_indices(idx, parent_resolution);
    g.parent_resolution = parent_resolution;
    g.keep_fraction = pi;
    g.indices = std::move(idx);
    return g;
}

}  // namespace aroma::sim
