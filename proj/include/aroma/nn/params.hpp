#pragma once

#include "aroma/common.hpp"

#include <string>
#include <vector>

namespace aroma::nn {

struct ParamInfo {
    std::string name;
    Eigen::Index rows = 0, cols = 0;
    int64_t offset = 0;
};

/// Flat parameter storage. Modules register named matrices and keep integer
/// handles; optimizers, checkpoints and finite-difference checks all walk the
/// flat vector.
class ParamStore {
public:
    int add(const std::string& name, Eigen::Index rows, Eigen::Index cols) {
        ParamInfo info{name, rows, cols, static_cast<int64_t>(data_.size())};
        infos_.push_back(info);
        data_.resize(data_.size() + static_cast<size_t>(rows * cols), 0.0);
        return static_cast<int>(infos_.size()) - 1;
    }

    MatMap mat(int id) {
        const ParamInfo& p = infos_[static_cast<size_t>(id)];
        return MatMap(data_.data() + p.offset, p.rows, p.cols);
    }
    ConstMatMap mat(int id) const {
        const ParamInfo& p = infos_[static_cast<size_t>(id)];
        return ConstMatMap(data_.data() + p.offset, p.rows, p.cols);
    }

    int find(const std::string& name) const {
        for (size_t i = 0; i < infos_.size(); ++i)
            if (infos_[i].name == name) return static_cast<int>(i);
        return -1;
    }

    const std::vector<ParamInfo>& infos() const { return infos_; }
    int count() const { return static_cast<int>(infos_.size()); }
    int64_t size() const { return static_cast<int64_t>(data_.size()); }
    std::vector<double>& flat() { return data_; }
    const std::vector<double>& flat() const { return data_; }

private:
    std::vector<ParamInfo> infos_;
    std::vector<double> data_;
};

/// Gradient buffer laid out like a ParamStore.
class GradBuf {
public:
    explicit GradBuf(const ParamStore& store)
        : store_(&store), g_(static_cast<size_t>(store.size()), 0.0) {}

    void zero() { std::fill(g_.begin(), g_.end(), 0.0); }

    MatMap mat(int id) {
        const ParamInfo& p = store_->infos()[static_cast<size_t>(id)];
        return MatMap(g_.data() + p.offset, p.rows, p.cols);
    }

    void add(const GradBuf& other) {
        for (size_t i = 0; i < g_.size(); ++i) g_[i] += other.g_[i];
    }

    void scale(double s) {
        for (double& v : g_) v *= s;
    }

    double squared_norm() const {
        double acc = 0.0;
        for (double v : g_) acc += v * v;
        return acc;
    }

    std::vector<double>& flat() { return g_; }
    const std::vector<double>& flat() const { return g_; }

private:
    const ParamStore* store_;
    std::vector<double> g_;
};

inline void init_xavier_uniform(MatMap w, Rng& rng) {
    const double limit = std::sqrt(6.0 / static_cast<double>(w.rows() + w.cols()));
    for (Eigen::Index i = 0; i < w.rows(); ++i)
        for (Eigen::Index j = 0; j < w.cols(); ++j) w(i, j) = rng.uniform(-limit, limit);
}

inline void init_normal(MatMap w, double stdev, Rng& rng) {
    for (Eigen::Index i = 0; i < w.rows(); ++i)
        for (Eigen::Index j = 0; j < w.cols(); ++j) w(i, j) = stdev * rng.normal();
}

}  // namespace aroma::nn
