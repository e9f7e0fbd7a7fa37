#include "aroma/io/dataset.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

namespace aroma::io {

namespace fs = std::filesystem;

static_assert(std::endian::native == std::endian::little,
              "blob format is little-endian; big-endian hosts are not supported");

namespace {

void write_blob(const std::string& path, const std::vector<float>& data) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("IoError", "cannot open " + path + " for writing");
    out.write(reinterpret_cast<const char*>(data.data()),
              static_cast<std::streamsize>(data.size() * sizeof(float)));
    if (!out) throw Error("IoError", "short write to " + path);
}

std::vector<float> read_blob(const std::string& path, int64_t expected_count) {
    std::ifstream in(path, std::ios::binary | std::ios::ate);
    if (!in) throw Error("IoError", "cannot open " + path);
    const int64_t bytes = static_cast<int64_t>(in.tellg());
    if (bytes != expected_count * static_cast<int64_t>(sizeof(float)))
        throw Error("IoError", path + ": expected " +
                                   std::to_string(expected_count * sizeof(float)) + " bytes, found " +
                                   std::to_string(bytes));
    std::vector<float> data(static_cast<size_t>(expected_count));
    in.seekg(0);
    in.read(reinterpret_cast<char*>(data.data()), bytes);
    if (!in) throw Error("IoError", "short read from " + path);
    return data;
}

int64_t shape_count(const json& shape) {
    int64_t n = 1;
    for (const auto& d : shape) n *= d.get<int64_t>();
    return n;
}

}  // namespace

json NormStats::to_json() const {
    return json{{"mean", mean}, {"std", stdev}, {"flagged", flagged}};
}

NormStats NormStats::from_json(const json& j) {
    NormStats s;
    s.mean = j.at("mean").get<std::vector<double>>();
    s.stdev = j.at("std").get<std::vector<double>>();
    s.flagged = j.at("flagged").get<std::vector<bool>>();
    return s;
}

void write_json_atomic(const std::string& path, const json& j) {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::trunc);
        if (!out) throw Error("IoError", "cannot open " + tmp);
        out << j.dump(2) << "\n";
    }
    fs::rename(tmp, path);
}

json read_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("IoError", "cannot open " + path);
    json j;
    in >> j;
    return j;
}

TrajectoryDataset TrajectoryDataset::create(const std::string& equation, const json& config,
                                            int n_traj, int n_time, int n_points, int channels,
                                            int coord_dim) {
    TrajectoryDataset ds;
    ds.n_traj = n_traj;
    ds.n_time = n_time;
    ds.n_points = n_points;
    ds.channels = channels;
    ds.coord_dim = coord_dim;
    ds.u.assign(static_cast<size_t>(n_traj) * n_time * n_points * channels, 0.0f);
    ds.coords.assign(static_cast<size_t>(n_traj) * n_points * coord_dim, 0.0f);
    ds.times.assign(static_cast<size_t>(n_time), 0.0f);
    ds.manifest = json{
        {"format", "aroma-dataset-v1"},
        {"equation", equation},
        {"config", config},
        {"arrays",
         {{"u", {{"shape", {n_traj, n_time, n_points, channels}}, {"dtype", "float32"}}},
          {"coords", {{"shape", {n_traj, n_points, coord_dim}}, {"dtype", "float32"}}},
          {"times", {{"shape", {n_time}}, {"dtype", "float32"}}}}},
        {"splits", json::object()},
        {"normalization", nullptr},
    };
    return ds;
}

void TrajectoryDataset::validate() const {
    const auto& arrays = manifest.at("arrays");
    const int64_t u_count = shape_count(arrays.at("u").at("shape"));
    const int64_t c_count = shape_count(arrays.at("coords").at("shape"));
    const int64_t t_count = shape_count(arrays.at("times").at("shape"));
    if (u_count != static_cast<int64_t>(u.size()))
        throw Error("ShapeMismatch", "u: manifest says " + std::to_string(u_count) +
                                         " elements, buffer has " + std::to_string(u.size()));
    if (c_count != static_cast<int64_t>(coords.size()))
        throw Error("ShapeMismatch", "coords: manifest says " + std::to_string(c_count) +
                                         " elements, buffer has " + std::to_string(coords.size()));
    if (t_count != static_cast<int64_t>(times.size()))
        throw Error("ShapeMismatch", "times: manifest says " + std::to_string(t_count) +
                                         " elements, buffer has " + std::to_string(times.size()));
    const auto u_shape = arrays.at("u").at("shape").get<std::vector<int64_t>>();
    if (u_shape != std::vector<int64_t>{n_traj, n_time, n_points, channels})
        throw Error("ShapeMismatch", "u shape does not match dataset dimensions");
    for (float v : u)
        if (!std::isfinite(v)) throw Error("NonFiniteData", "u contains NaN/Inf");
    for (float v : coords)
        if (!(v >= 0.0f && v < 1.0f))
            throw Error("DomainError", "coords must lie in [0,1), got " + std::to_string(v));
}

void TrajectoryDataset::save(const std::string& dir) const {
    validate();
    fs::create_directories(dir);
    write_blob(dir + "/u.bin", u);
    write_blob(dir + "/coords.bin", coords);
    write_blob(dir + "/times.bin", times);
    write_json_atomic(dir + "/manifest.json", manifest);
}

TrajectoryDataset TrajectoryDataset::load(const std::string& dir) {
    if (!fs::exists(dir + "/manifest.json"))
        throw Error("DependencyError", "no dataset at " + dir);
    TrajectoryDataset ds;
    ds.manifest = read_json(dir + "/manifest.json");
    const auto& arrays = ds.manifest.at("arrays");
    const auto u_shape = arrays.at("u").at("shape").get<std::vector<int64_t>>();
    const auto c_shape = arrays.at("coords").at("shape").get<std::vector<int64_t>>();
    ds.n_traj = static_cast<int>(u_shape.at(0));
    ds.n_time = static_cast<int>(u_shape.at(1));
    ds.n_points = static_cast<int>(u_shape.at(2));
    ds.channels = static_cast<int>(u_shape.at(3));
    ds.coord_dim = static_cast<int>(c_shape.at(2));
    ds.u = read_blob(dir + "/u.bin", shape_count(arrays.at("u").at("shape")));
    ds.coords = read_blob(dir + "/coords.bin", shape_count(arrays.at("coords").at("shape")));
    ds.times = read_blob(dir + "/times.bin", shape_count(arrays.at("times").at("shape")));
    return ds;
}

Mat TrajectoryDataset::frame_values(int traj, int t) const {
    const float* p = frame_ptr(traj, t);
    Mat m(n_points, channels);
    for (int i = 0; i < n_points; ++i)
        for (int c = 0; c < channels; ++c) m(i, c) = p[static_cast<int64_t>(i) * channels + c];
    return m;
}

Mat TrajectoryDataset::grid(int traj) const {
    const float* p = coords.data() + static_cast<int64_t>(traj) * n_points * coord_dim;
    Mat m(n_points, coord_dim);
    for (int i = 0; i < n_points; ++i)
        for (int d = 0; d < coord_dim; ++d) m(i, d) = p[static_cast<int64_t>(i) * coord_dim + d];
    return m;
}

FieldSnapshot TrajectoryDataset::snapshot(int traj, int t) const {
    return FieldSnapshot{grid(traj), frame_values(traj, t)};
}

std::vector<int> TrajectoryDataset::split(const std::string& name) const {
    const auto& splits = manifest.at("splits");
    if (!splits.contains(name)) throw Error("ConfigError", "dataset has no split '" + name + "'");
    return splits.at(name).get<std::vector<int>>();
}

void TrajectoryDataset::set_split(const std::string& name, const std::vector<int>& trajs) {
    manifest["splits"][name] = trajs;
}

WindowView slice_subtrajectories(const TrajectoryDataset& ds, int window) {
    if (window < 1 || window > ds.n_time)
        throw Error("InvalidWindow", "window " + std::to_string(window) + " not in [1, " +
                                         std::to_string(ds.n_time) + "]");
    WindowView view;
    view.window = window;
    const int per_traj = ds.n_time / window;
    view.items.reserve(static_cast<size_t>(ds.n_traj) * per_traj);
    for (int traj = 0; traj < ds.n_traj; ++traj)
        for (int w = 0; w < per_traj; ++w) view.items.emplace_back(traj, w * window);
    return view;
}

WindowView filter_view(const WindowView& view, const std::vector<int>& trajs) {
    WindowView out;
    out.window = view.window;
    for (const auto& item : view.items)
        for (int t : trajs)
            if (item.first == t) {
                out.items.push_back(item);
                break;
            }
    return out;
}

int64_t count_pairs(const TrajectoryDataset& ds, const WindowView& view, int horizon) {
    (void)ds;
    const int h = horizon > 0 ? std::min(horizon, view.window) : view.window;
    if (h < 2) return 0;
    return static_cast<int64_t>(view.items.size()) * (h - 1);
}

std::vector<StatePair> sample_pairs(const TrajectoryDataset& ds, const WindowView& view,
                                    int horizon, int batch, Rng& rng) {
    const int64_t total = count_pairs(ds, view, horizon);
    if (total == 0) throw Error("NoPairsAvailable", "no (t, t+1) pairs inside the horizon");
    const int h = horizon > 0 ? std::min(horizon, view.window) : view.window;
    std::vector<StatePair> out;
    out.reserve(static_cast<size_t>(batch));
    for (int b = 0; b < batch; ++b) {
        const auto& item = view.items[static_cast<size_t>(rng.uniform_int(view.items.size()))];
        const int t = item.second + static_cast<int>(rng.uniform_int(h - 1));
        StatePair pair;
        pair.traj = item.first;
        pair.t = t;
        pair.u_t = ds.snapshot(item.first, t);
        pair.u_next = ds.snapshot(item.first, t + 1);
        out.push_back(std::move(pair));
    }
    return out;
}

NormStats compute_norm_stats(const TrajectoryDataset& ds, const std::vector<int>& trajs) {
    NormStats stats;
    stats.mean.assign(ds.channels, 0.0);
    stats.stdev.assign(ds.channels, 1.0);
    stats.flagged.assign(ds.channels, false);
    const int64_t per_traj = static_cast<int64_t>(ds.n_time) * ds.n_points;
    std::vector<double> sum(ds.channels, 0.0), sumsq(ds.channels, 0.0);
    int64_t count = 0;
    for (int traj : trajs) {
        const float* p = ds.frame_ptr(traj, 0);
        for (int64_t i = 0; i < per_traj; ++i)
            for (int c = 0; c < ds.channels; ++c) {
                const double v = p[i * ds.channels + c];
                sum[c] += v;
                sumsq[c] += v * v;
            }
        count += per_traj;
    }
    if (count == 0) throw Error("ConfigError", "normalization over an empty split");
    for (int c = 0; c < ds.channels; ++c) {
        stats.mean[c] = sum[c] / static_cast<double>(count);
        const double var = sumsq[c] / static_cast<double>(count) - stats.mean[c] * stats.mean[c];
        if (var < 1e-12) {
            stats.stdev[c] = 1.0;
            stats.flagged[c] = true;
        } else {
            stats.stdev[c] = std::sqrt(var);
        }
    }
    return stats;
}

NormStats normalize(TrajectoryDataset& ds) {
    const NormStats stats = compute_norm_stats(ds, ds.split("train"));
    const int64_t frames = static_cast<int64_t>(ds.n_traj) * ds.n_time * ds.n_points;
    for (int64_t i = 0; i < frames; ++i)
        for (int c = 0; c < ds.channels; ++c) {
            float& v = ds.u[static_cast<size_t>(i * ds.channels + c)];
            v = static_cast<float>((v - stats.mean[c]) / stats.stdev[c]);
        }
    ds.manifest["normalization"] = stats.to_json();
    return stats;
}

void normalize_values(Mat& values, const NormStats& stats) {
    for (Eigen::Index c = 0; c < values.cols(); ++c)
        values.col(c) = (values.col(c).array() - stats.mean[c]) / stats.stdev[c];
}

void denormalize_values(Mat& values, const NormStats& stats) {
    for (Eigen::Index c = 0; c < values.cols(); ++c)
        values.col(c) = values.col(c).array() * stats.stdev[c] + stats.mean[c];
}

}  // namespace aroma::io
