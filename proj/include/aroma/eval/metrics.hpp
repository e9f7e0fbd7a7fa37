#pragma once

#include "aroma/common.hpp"

#include <vector>

namespace aroma::eval {

/// A trajectory is a sequence of frames, each n_points x channels.
using Trajectory = std::vector<Mat>;

struct RelL2Result {
    double value = 0.0;
    int excluded = 0;  // items skipped for zero-norm ground truth
};

/// mean_j ||pred_j - true_j||_2 / ||true_j||_2 with each trajectory flattened
/// over (time, space, channels).
RelL2Result relative_l2(const std::vector<Trajectory>& pred,
                        const std::vector<Trajectory>& truth);

enum class Horizon { in_t, out_t };

/// MSE over the designated half of the trajectory (first half = In-t).
double horizon_mse(const std::vector<Trajectory>& pred, const std::vector<Trajectory>& truth,
                   Horizon split);

struct CorrelationResult {
    std::vector<double> curve;  // mean spatial Pearson correlation per step
    std::vector<int> counts;    // trajectories contributing per step
    double high_corr_time = 0.0;  // first step with curve < threshold (curve length if never)
};

/// Per-step Pearson correlation across spatial points/channels, averaged over
/// trajectories, then thresholded. Steps where every field is constant are
/// recorded as missing (NaN curve value, count 0).
CorrelationResult correlation_over_time(const std::vector<Trajectory>& pred,
                                        const std::vector<Trajectory>& truth,
                                        double threshold = 0.8);

}  // namespace aroma::eval
