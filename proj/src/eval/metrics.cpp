#include "aroma/eval/metrics.hpp"

#include <cmath>
#include <cstdio>

namespace aroma::eval {

RelL2Result relative_l2(const std::vector<Trajectory>& pred,
                        const std::vector<Trajectory>& truth) {
    if (pred.size() != truth.size())
        throw Error("ShapeMismatch", "relative_l2: item counts differ");
    RelL2Result res;
    double acc = 0.0;
    int used = 0;
    for (size_t j = 0; j < pred.size(); ++j) {
        if (pred[j].size() != truth[j].size())
            throw Error("ShapeMismatch", "relative_l2: frame counts differ");
        double num = 0.0, den = 0.0;
        for (size_t t = 0; t < pred[j].size(); ++t) {
            num += (pred[j][t] - truth[j][t]).squaredNorm();
            den += truth[j][t].squaredNorm();
        }
        if (den == 0.0) {
            ++res.excluded;
            std::fprintf(stderr, "relative_l2: item %zu has zero-norm ground truth, excluded\n", j);
            continue;
        }
        acc += std::sqrt(num) / std::sqrt(den);
        ++used;
    }
    res.value = used > 0 ? acc / used : 0.0;
    return res;
}

double horizon_mse(const std::vector<Trajectory>& pred, const std::vector<Trajectory>& truth,
                   Horizon split) {
    if (pred.size() != truth.size())
        throw Error("ShapeMismatch", "horizon_mse: item counts differ");
    double acc = 0.0;
    int64_t count = 0;
    for (size_t j = 0; j < pred.size(); ++j) {
        const size_t n = truth[j].size();
        const size_t begin = split == Horizon::in_t ? 0 : n / 2;
        const size_t end = split == Horizon::in_t ? n / 2 : n;
        for (size_t t = begin; t < end; ++t) {
            acc += (pred[j][t] - truth[j][t]).squaredNorm();
            count += truth[j][t].size();
        }
    }
    return count > 0 ? acc / static_cast<double>(count) : 0.0;
}

namespace {

double pearson(const Mat& a, const Mat& b, bool& defined) {
    const double ma = a.mean(), mb = b.mean();
    const auto da = a.array() - ma;
    const auto db = b.array() - mb;
    const double va = da.square().sum(), vb = db.square().sum();
    if (va <= 0.0 || vb <= 0.0) {
        defined = false;
        return 0.0;
    }
    defined = true;
    return (da * db).sum() / std::sqrt(va * vb);
}

}  // namespace

CorrelationResult correlation_over_time(const std::vector<Trajectory>& pred,
                                        const std::vector<Trajectory>& truth, double threshold) {
    if (pred.size() != truth.size())
        throw Error("ShapeMismatch", "correlation_over_time: item counts differ");
    size_t n_steps = 0;
    for (const auto& tr : truth) n_steps = std::max(n_steps, tr.size());
    CorrelationResult res;
    res.curve.assign(n_steps, std::nan(""));
    res.counts.assign(n_steps, 0);
    for (size_t t = 0; t < n_steps; ++t) {
        double acc = 0.0;
        int count = 0;
        for (size_t j = 0; j < pred.size(); ++j) {
            if (t >= pred[j].size() || t >= truth[j].size()) continue;
            bool defined = false;
            const double r = pearson(pred[j][t], truth[j][t], defined);
            if (defined) {
                acc += r;
                ++count;
            }
        }
        if (count > 0) res.curve[t] = acc / count;
        res.counts[t] = count;
    }
    res.high_corr_time = static_cast<double>(n_steps);
    for (size_t t = 0; t < n_steps; ++t) {
        if (!std::isnan(res.curve[t]) && res.curve[t] < threshold) {
            res.high_corr_time = static_cast<double>(t);
            break;
        }
    }
    return res;
}

}  // namespace aroma::eval
