#pragma once

#include "aroma/common.hpp"

#include <json.hpp>

#include <string>
#include <vector>

namespace aroma::io {

using json = nlohmann::json;

/// Per-channel affine normalization statistics, computed on the training
/// split only. Channels with (near) zero variance keep scale 1 and are
/// flagged.
struct NormStats {
    std::vector<double> mean;
    std::vector<double> stdev;
    std::vector<bool> flagged;

    json to_json() const;
    static NormStats from_json(const json& j);
};

/// On-disk trajectory container: manifest.json + raw little-endian float32
/// blobs (u.bin, coords.bin, times.bin), row-major.
///   u      [n_traj, n_time, n_points, channels]
///   coords [n_traj, n_points, coord_dim]   (grid is fixed along a trajectory)
///   times  [n_time]
class TrajectoryDataset {
public:
    json manifest;
    std::vector<float> u;
    std::vector<float> coords;
    std::vector<float> times;
    int n_traj = 0, n_time = 0, n_points = 0, channels = 0, coord_dim = 0;

    static TrajectoryDataset create(const std::string& equation, const json& config, int n_traj,
                                    int n_time, int n_points, int channels, int coord_dim);

    static TrajectoryDataset load(const std::string& dir);
    void save(const std::string& dir) const;

    /// Shape/finiteness/domain checks; throws on any mismatch.
    void validate() const;

    int64_t frame_offset(int traj, int t) const {
        return ((static_cast<int64_t>(traj) * n_time + t) * n_points) * channels;
    }
    float* frame_ptr(int traj, int t) { return u.data() + frame_offset(traj, t); }
    const float* frame_ptr(int traj, int t) const { return u.data() + frame_offset(traj, t); }

    Mat frame_values(int traj, int t) const;  // n_points x channels
    Mat grid(int traj) const;                 // n_points x coord_dim
    FieldSnapshot snapshot(int traj, int t) const;

    std::vector<int> split(const std::string& name) const;
    void set_split(const std::string& name, const std::vector<int>& trajs);
};

/// Non-overlapping sub-trajectory windows, each treated as an independent
/// trajectory. items are (source trajectory, frame offset).
struct WindowView {
    int window = 0;
    std::vector<std::pair<int, int>> items;

    int count() const { return static_cast<int>(items.size()); }
};

WindowView slice_subtrajectories(const TrajectoryDataset& ds, int window);

/// Restrict a view to the listed source trajectories.
WindowView filter_view(const WindowView& view, const std::vector<int>& trajs);

/// A pair of successive states on a shared grid.
struct StatePair {
    FieldSnapshot u_t;
    FieldSnapshot u_next;
    int traj = 0;
    int t = 0;  // absolute frame index of u_t
};

/// Uniform over (window item, t) with t+1 inside the horizon (horizon = 0
/// means the full window). Never crosses a window boundary.
std::vector<StatePair> sample_pairs(const TrajectoryDataset& ds, const WindowView& view,
                                    int horizon, int batch, Rng& rng);

/// Number of distinct (item, t) pairs available to sample_pairs.
int64_t count_pairs(const TrajectoryDataset& ds, const WindowView& view, int horizon);

NormStats compute_norm_stats(const TrajectoryDataset& ds, const std::vector<int>& trajs);

/// Normalize stored values in place using training-split statistics and
/// record them in the manifest. Returns the stats.
NormStats normalize(TrajectoryDataset& ds);

void normalize_values(Mat& values, const NormStats& stats);
void denormalize_values(Mat& values, const NormStats& stats);

void write_json_atomic(const std::string& path, const json& j);
json read_json(const std::string& path);

}  // namespace aroma::io
