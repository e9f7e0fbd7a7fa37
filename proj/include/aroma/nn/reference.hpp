#pragma once

#include "aroma/nn/layers.hpp"

namespace aroma::nn::ref {

/// Naive loop implementations of the hot kernels. They are the serial
/// reference the optimized paths are tested and benchmarked against.

inline Mat linear(const ParamStore& P, const Linear& lin, const Mat& x) {
    ConstMatMap w = P.mat(lin.w);
    Mat y = Mat::Zero(x.rows(), lin.out);
    for (Eigen::Index i = 0; i < x.rows(); ++i)
        for (Eigen::Index o = 0; o < lin.out; ++o) {
            double acc = 0.0;
            for (Eigen::Index j = 0; j < lin.in; ++j) acc += x(i, j) * w(o, j);
            y(i, o) = acc;
        }
    if (lin.has_bias) {
        ConstMatMap b = P.mat(lin.b);
        for (Eigen::Index i = 0; i < x.rows(); ++i)
            for (Eigen::Index o = 0; o < lin.out; ++o) y(i, o) += b(0, o);
    }
    return y;
}

inline Mat attention(const ParamStore& P, const MultiheadAttention& attn, const Mat& q_in,
                     const Mat& k_in, const Mat& v_in) {
    const Mat q = linear(P, attn.wq, q_in);
    const Mat k = linear(P, attn.wk, k_in);
    const Mat v = linear(P, attn.wv, v_in);
    const Eigen::Index nq = q_in.rows(), nk = k_in.rows(), dh = attn.dim_head;
    const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
    Mat ctx(nq, attn.heads * dh);
    for (int h = 0; h < attn.heads; ++h) {
        for (Eigen::Index i = 0; i < nq; ++i) {
            std::vector<double> scores(static_cast<size_t>(nk));
            double max_score = -1e300;
            for (Eigen::Index j = 0; j < nk; ++j) {
                double acc = 0.0;
                for (Eigen::Index c = 0; c < dh; ++c)
                    acc += q(i, h * dh + c) * k(j, h * dh + c);
                scores[static_cast<size_t>(j)] = acc * scale;
                max_score = std::max(max_score, scores[static_cast<size_t>(j)]);
            }
            double denom = 0.0;
            for (Eigen::Index j = 0; j < nk; ++j) {
                scores[static_cast<size_t>(j)] = std::exp(scores[static_cast<size_t>(j)] - max_score);
                denom += scores[static_cast<size_t>(j)];
            }
            for (Eigen::Index c = 0; c < dh; ++c) {
                double acc = 0.0;
                for (Eigen::Index j = 0; j < nk; ++j)
                    acc += scores[static_cast<size_t>(j)] * v(j, h * dh + c);
                ctx(i, h * dh + c) = acc / denom;
            }
        }
    }
    return linear(P, attn.wo, ctx);
}

}  // namespace aroma::nn::ref
