#include "aroma/nn/layers.hpp"

#include <cmath>

namespace aroma::nn {

namespace {
constexpr double kInvSqrt2 = 0.7071067811865475244;
constexpr double kInvSqrt2Pi = 0.3989422804014326779;
}  // namespace

double gelu_scalar(double x) { return 0.5 * x * (1.0 + std::erf(x * kInvSqrt2)); }

void gelu(const Mat& x, Mat& y) {
    y.resizeLike(x);
    for (Eigen::Index i = 0; i < x.size(); ++i) y.data()[i] = gelu_scalar(x.data()[i]);
}

Mat gelu_backward(const Mat& x, const Mat& dy) {
    Mat dx(x.rows(), x.cols());
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        const double v = x.data()[i];
        const double cdf = 0.5 * (1.0 + std::erf(v * kInvSqrt2));
        const double pdf = kInvSqrt2Pi * std::exp(-0.5 * v * v);
        dx.data()[i] = dy.data()[i] * (cdf + v * pdf);
    }
    return dx;
}

void silu(const Mat& x, Mat& y) {
    y.resizeLike(x);
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        const double v = x.data()[i];
        y.data()[i] = v / (1.0 + std::exp(-v));
    }
}

Mat silu_backward(const Mat& x, const Mat& dy) {
    Mat dx(x.rows(), x.cols());
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        const double v = x.data()[i];
        const double s = 1.0 / (1.0 + std::exp(-v));
        dx.data()[i] = dy.data()[i] * (s * (1.0 + v * (1.0 - s)));
    }
    return dx;
}

Linear::Linear(ParamStore& P, const std::string& name, Eigen::Index in_, Eigen::Index out_,
               Rng& rng, bool bias, Init init)
    : in(in_), out(out_), has_bias(bias) {
    w = P.add(name + "/weight", out, in);
    if (init == Init::xavier)
        init_xavier_uniform(P.mat(w), rng);
    if (bias) b = P.add(name + "/bias", 1, out);
}

Mat Linear::forward(const ParamStore& P, const Mat& x, Cache* cache) const {
    if (cache) cache->x = x;
    Mat y = x * P.mat(w).transpose();
    if (has_bias) y.rowwise() += P.mat(b).row(0);
    return y;
}

Mat Linear::backward(const ParamStore& P, const Cache& cache, const Mat& dy, GradBuf& G) const {
    G.mat(w).noalias() += dy.transpose() * cache.x;
    if (has_bias) G.mat(b).row(0) += dy.colwise().sum();
    return dy * P.mat(w);
}

LayerNorm::LayerNorm(ParamStore& P, const std::string& name, Eigen::Index dim_, bool affine_)
    : dim(dim_), affine(affine_) {
    if (affine) {
        g = P.add(name + "/gain", 1, dim);
        b = P.add(name + "/bias", 1, dim);
        P.mat(g).setOnes();
    }
}

Mat LayerNorm::forward(const ParamStore& P, const Mat& x, Cache* cache) const {
    Mat xhat(x.rows(), x.cols());
    Vec inv_std(x.rows());
    const double d = static_cast<double>(x.cols());
    for (Eigen::Index r = 0; r < x.rows(); ++r) {
        const double mean = x.row(r).mean();
        const double var = (x.row(r).array() - mean).square().sum() / d;
        const double is = 1.0 / std::sqrt(var + kEps);
        xhat.row(r) = (x.row(r).array() - mean) * is;
        inv_std[r] = is;
    }
    Mat y = xhat;
    if (affine) {
        y.array().rowwise() *= P.mat(g).row(0).array();
        y.rowwise() += P.mat(b).row(0);
    }
    if (cache) {
        cache->xhat = std::move(xhat);
        cache->inv_std = std::move(inv_std);
    }
    return y;
}

Mat LayerNorm::backward(const ParamStore& P, const Cache& cache, const Mat& dy, GradBuf& G) const {
    Mat dxhat = dy;
    if (affine) {
        for (Eigen::Index c = 0; c < dy.cols(); ++c) {
            G.mat(g)(0, c) += (dy.col(c).array() * cache.xhat.col(c).array()).sum();
            G.mat(b)(0, c) += dy.col(c).sum();
        }
        dxhat.array().rowwise() *= P.mat(g).row(0).array();
    }
    Mat dx(dy.rows(), dy.cols());
    const double d = static_cast<double>(dy.cols());
    for (Eigen::Index r = 0; r < dy.rows(); ++r) {
        const double mean_d = dxhat.row(r).mean();
        const double mean_dx = (dxhat.row(r).array() * cache.xhat.row(r).array()).mean();
        dx.row(r) = cache.inv_std[r] *
                    (dxhat.row(r).array() - mean_d - cache.xhat.row(r).array() * mean_dx);
    }
    (void)d;
    return dx;
}

void AttnCounters::record(AttnTag tag, int64_t elements) {
    switch (tag) {
        case AttnTag::geometry: geometry += elements; break;
        case AttnTag::observation: observation += elements; break;
        case AttnTag::decoder_query: decoder_query += elements; break;
        case AttnTag::decoder_self: decoder_self += elements; break;
        case AttnTag::refiner: refiner += elements; break;
        case AttnTag::none: break;
    }
}

AttnCounters& attn_counters() {
    static AttnCounters counters;
    return counters;
}

MultiheadAttention::MultiheadAttention(ParamStore& P, const std::string& name, Eigen::Index dim_q,
                                       Eigen::Index dim_k, Eigen::Index dim_v, Eigen::Index dim_out,
                                       int heads_, Eigen::Index dim_head_, Rng& rng, AttnTag tag_,
                                       Linear::Init out_init)
    : heads(heads_), dim_head(dim_head_), tag(tag_) {
    const Eigen::Index inner = heads_ * dim_head_;
    wq = Linear(P, name + "/wq", dim_q, inner, rng);
    wk = Linear(P, name + "/wk", dim_k, inner, rng);
    wv = Linear(P, name + "/wv", dim_v, inner, rng);
    wo = Linear(P, name + "/wo", inner, dim_out, rng, true, out_init);
}

Mat MultiheadAttention::forward(const ParamStore& P, const Mat& q_in, const Mat& k_in,
                                const Mat& v_in, Cache* cache) const {
    Cache local;
    Cache& c = cache ? *cache : local;
    c.q = wq.forward(P, q_in, &c.qc);
    c.k = wk.forward(P, k_in, &c.kc);
    c.v = wv.forward(P, v_in, &c.vc);

    const Eigen::Index nq = q_in.rows();
    const Eigen::Index nk = k_in.rows();
    const double scale = 1.0 / std::sqrt(static_cast<double>(dim_head));
    attn_counters().record(tag, static_cast<int64_t>(nq) * nk);

    Mat ctx(nq, heads * dim_head);
    c.probs.assign(static_cast<size_t>(heads), Mat());
    for (int h = 0; h < heads; ++h) {
        const auto qh = c.q.middleCols(h * dim_head, dim_head);
        const auto kh = c.k.middleCols(h * dim_head, dim_head);
        const auto vh = c.v.middleCols(h * dim_head, dim_head);
        Mat scores = (qh * kh.transpose()) * scale;
        for (Eigen::Index r = 0; r < nq; ++r) {
            const double m = scores.row(r).maxCoeff();
            scores.row(r) = (scores.row(r).array() - m).exp();
            scores.row(r) /= scores.row(r).sum();
        }
        ctx.middleCols(h * dim_head, dim_head).noalias() = scores * vh;
        c.probs[static_cast<size_t>(h)] = std::move(scores);
    }
    return wo.forward(P, ctx, &c.oc);
}

MultiheadAttention::InputGrads MultiheadAttention::backward(const ParamStore& P, const Cache& c,
                                                            const Mat& dy, GradBuf& G) const {
    const Mat dctx = wo.backward(P, c.oc, dy, G);
    const double scale = 1.0 / std::sqrt(static_cast<double>(dim_head));

    Mat dq(c.q.rows(), c.q.cols()), dk(c.k.rows(), c.k.cols()), dv(c.v.rows(), c.v.cols());
    for (int h = 0; h < heads; ++h) {
        const auto qh = c.q.middleCols(h * dim_head, dim_head);
        const auto kh = c.k.middleCols(h * dim_head, dim_head);
        const auto vh = c.v.middleCols(h * dim_head, dim_head);
        const Mat& probs = c.probs[static_cast<size_t>(h)];
        const auto dctx_h = dctx.middleCols(h * dim_head, dim_head);

        Mat dprobs = dctx_h * vh.transpose();
        dv.middleCols(h * dim_head, dim_head).noalias() = probs.transpose() * dctx_h;

        // softmax backward per row
        Mat dscores(probs.rows(), probs.cols());
        for (Eigen::Index r = 0; r < probs.rows(); ++r) {
            const double dot = probs.row(r).dot(dprobs.row(r));
            dscores.row(r) = probs.row(r).array() * (dprobs.row(r).array() - dot);
        }
        dscores *= scale;
        dq.middleCols(h * dim_head, dim_head).noalias() = dscores * kh;
        dk.middleCols(h * dim_head, dim_head).noalias() = dscores.transpose() * qh;
    }

    InputGrads grads;
    grads.dq = wq.backward(P, c.qc, dq, G);
    grads.dk = wk.backward(P, c.kc, dk, G);
    grads.dv = wv.backward(P, c.vc, dv, G);
    return grads;
}

Mat MultiheadAttention::attention_rows(const ParamStore& P, const Mat& q_in, const Mat& k_in,
                                       int head) const {
    const Mat q = wq.forward(P, q_in);
    const Mat k = wk.forward(P, k_in);
    const double scale = 1.0 / std::sqrt(static_cast<double>(dim_head));
    const auto qh = q.middleCols(head * dim_head, dim_head);
    const auto kh = k.middleCols(head * dim_head, dim_head);
    Mat scores = (qh * kh.transpose()) * scale;
    for (Eigen::Index r = 0; r < scores.rows(); ++r) {
        const double m = scores.row(r).maxCoeff();
        scores.row(r) = (scores.row(r).array() - m).exp();
        scores.row(r) /= scores.row(r).sum();
    }
    return scores;
}

FeedForward::FeedForward(ParamStore& P, const std::string& name, Eigen::Index dim,
                         Eigen::Index hidden, Eigen::Index out, Rng& rng, Linear::Init out_init) {
    norm = LayerNorm(P, name + "/norm", dim);
    fc1 = Linear(P, name + "/fc1", dim, hidden, rng);
    fc2 = Linear(P, name + "/fc2", hidden, out, rng, true, out_init);
}

Mat FeedForward::forward(const ParamStore& P, const Mat& x, Cache* cache) const {
    Cache local;
    Cache& c = cache ? *cache : local;
    c.xn = norm.forward(P, x, &c.ln);
    c.h = fc1.forward(P, c.xn, &c.c1);
    Mat a;
    gelu(c.h, a);
    return fc2.forward(P, a, &c.c2);
}

Mat FeedForward::backward(const ParamStore& P, const Cache& c, const Mat& dy, GradBuf& G) const {
    const Mat da = fc2.backward(P, c.c2, dy, G);
    const Mat dh = gelu_backward(c.h, da);
    const Mat dxn = fc1.backward(P, c.c1, dh, G);
    return norm.backward(P, c.ln, dxn, G);
}

CrossAttnBlock::CrossAttnBlock(ParamStore& P, const std::string& name, Eigen::Index dim,
                               Eigen::Index dim_ctx_k, Eigen::Index dim_ctx_v, int heads,
                               Eigen::Index dim_head, int ffn_mult, Rng& rng, AttnTag tag,
                               bool shared_kv_)
    : shared_kv(shared_kv_) {
    norm_q = LayerNorm(P, name + "/norm_q", dim);
    norm_k = LayerNorm(P, name + "/norm_k", dim_ctx_k);
    if (!shared_kv) norm_v = LayerNorm(P, name + "/norm_v", dim_ctx_v);
    attn = MultiheadAttention(P, name + "/attn", dim, dim_ctx_k, dim_ctx_v, dim, heads, dim_head,
                              rng, tag);
    ffn = FeedForward(P, name + "/ffn", dim, dim * ffn_mult, dim, rng, Linear::Init::zero);
}

Mat CrossAttnBlock::forward(const ParamStore& P, const Mat& x, const Mat& k_src, const Mat& v_src,
                            Cache* cache) const {
    Cache local;
    Cache& c = cache ? *cache : local;
    const Mat qn = norm_q.forward(P, x, &c.lnq);
    const Mat kn = norm_k.forward(P, k_src, &c.lnk);
    const Mat vn = shared_kv ? kn : norm_v.forward(P, v_src, &c.lnv);
    c.a = attn.forward(P, qn, kn, vn, &c.attn);
    return x + ffn.forward(P, c.a, &c.ffn);
}

CrossAttnBlock::InputGrads CrossAttnBlock::backward(const ParamStore& P, const Cache& c,
                                                    const Mat& dy, GradBuf& G) const {
    const Mat da = ffn.backward(P, c.ffn, dy, G);
    const auto ig = attn.backward(P, c.attn, da, G);
    InputGrads grads;
    grads.dx = dy + norm_q.backward(P, c.lnq, ig.dq, G);
    if (shared_kv) {
        grads.dk = norm_k.backward(P, c.lnk, ig.dk + ig.dv, G);
        grads.dv = Mat::Zero(ig.dv.rows(), ig.dv.cols());
    } else {
        grads.dk = norm_k.backward(P, c.lnk, ig.dk, G);
        grads.dv = norm_v.backward(P, c.lnv, ig.dv, G);
    }
    return grads;
}

SelfAttnBlock::SelfAttnBlock(ParamStore& P, const std::string& name, Eigen::Index dim, int heads,
                             Eigen::Index dim_head, int ffn_mult, Rng& rng, AttnTag tag) {
    norm = LayerNorm(P, name + "/norm", dim);
    attn = MultiheadAttention(P, name + "/attn", dim, dim, dim, dim, heads, dim_head, rng, tag,
                              Linear::Init::zero);
    ffn = FeedForward(P, name + "/ffn", dim, dim * ffn_mult, dim, rng, Linear::Init::zero);
}

Mat SelfAttnBlock::forward(const ParamStore& P, const Mat& x, Cache* cache) const {
    Cache local;
    Cache& c = cache ? *cache : local;
    c.xn = norm.forward(P, x, &c.ln);
    const Mat x1 = x + attn.forward(P, c.xn, c.xn, c.xn, &c.attn);
    return x1 + ffn.forward(P, x1, &c.ffn);
}

Mat SelfAttnBlock::backward(const ParamStore& P, const Cache& c, const Mat& dy, GradBuf& G) const {
    const Mat dx1 = dy + ffn.backward(P, c.ffn, dy, G);
    const auto ig = attn.backward(P, c.attn, dx1, G);
    const Mat dxn = ig.dq + ig.dk + ig.dv;
    return dx1 + norm.backward(P, c.ln, dxn, G);
}

}  // namespace aroma::nn
