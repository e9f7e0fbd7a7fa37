#pragma once

#include "aroma/nn/params.hpp"

#include <atomic>
#include <string>
#include <vector>

namespace aroma::nn {

double gelu_scalar(double x);
void gelu(const Mat& x, Mat& y);
Mat gelu_backward(const Mat& x, const Mat& dy);
void silu(const Mat& x, Mat& y);
Mat silu_backward(const Mat& x, const Mat& dy);

/// y = x W^T + b, W stored out x in.
struct Linear {
    int w = -1, b = -1;
    Eigen::Index in = 0, out = 0;
    bool has_bias = true;

    enum class Init { xavier, zero };

    Linear() = default;
    Linear(ParamStore& P, const std::string& name, Eigen::Index in, Eigen::Index out, Rng& rng,
           bool bias = true, Init init = Init::xavier);

    struct Cache {
        Mat x;
    };

    Mat forward(const ParamStore& P, const Mat& x, Cache* cache = nullptr) const;
    Mat backward(const ParamStore& P, const Cache& cache, const Mat& dy, GradBuf& G) const;
};

/// Row-wise layer normalization with optional affine parameters.
struct LayerNorm {
    int g = -1, b = -1;
    Eigen::Index dim = 0;
    bool affine = true;
    static constexpr double kEps = 1e-5;

    LayerNorm() = default;
    LayerNorm(ParamStore& P, const std::string& name, Eigen::Index dim, bool affine = true);

    struct Cache {
        Mat xhat;
        Vec inv_std;
    };

    Mat forward(const ParamStore& P, const Mat& x, Cache* cache = nullptr) const;
    Mat backward(const ParamStore& P, const Cache& cache, const Mat& dy, GradBuf& G) const;
};

/// Instrumentation: logical score-matrix element counts (rows x cols of one
/// attention call, heads not multiplied in) accumulated per pipeline stage.
enum class AttnTag { none, geometry, observation, decoder_query, decoder_self, refiner };

struct AttnCounters {
    std::atomic<int64_t> geometry{0}, observation{0}, decoder_query{0}, decoder_self{0},
        refiner{0};

    void reset() { geometry = observation = decoder_query = decoder_self = refiner = 0; }
    void record(AttnTag tag, int64_t elements);
    int64_t total() const {
        return geometry + observation + decoder_query + decoder_self + refiner;
    }
};

AttnCounters& attn_counters();

/// Multi-head scaled dot-product attention. Input normalization is the
/// caller's responsibility; projections carry biases (zero at init).
struct MultiheadAttention {
    Linear wq, wk, wv, wo;
    int heads = 1;
    Eigen::Index dim_head = 0;
    AttnTag tag = AttnTag::none;

    MultiheadAttention() = default;
    MultiheadAttention(ParamStore& P, const std::string& name, Eigen::Index dim_q,
                       Eigen::Index dim_k, Eigen::Index dim_v, Eigen::Index dim_out, int heads,
                       Eigen::Index dim_head, Rng& rng, AttnTag tag = AttnTag::none,
                       Linear::Init out_init = Linear::Init::xavier);

    struct Cache {
        Linear::Cache qc, kc, vc, oc;
        Mat q, k, v;              // N x (heads * dim_head)
        std::vector<Mat> probs;   // per head, Nq x Nk
    };

    struct InputGrads {
        Mat dq, dk, dv;
    };

    Mat forward(const ParamStore& P, const Mat& q_in, const Mat& k_in, const Mat& v_in,
                Cache* cache = nullptr) const;
    InputGrads backward(const ParamStore& P, const Cache& cache, const Mat& dy, GradBuf& G) const;

    /// Softmax rows for one head on given inputs (analysis path, no cache).
    Mat attention_rows(const ParamStore& P, const Mat& q_in, const Mat& k_in, int head) const;
};

/// LayerNorm -> Linear -> GELU -> Linear.
struct FeedForward {
    LayerNorm norm;
    Linear fc1, fc2;

    FeedForward() = default;
    FeedForward(ParamStore& P, const std::string& name, Eigen::Index dim, Eigen::Index hidden,
                Eigen::Index out, Rng& rng, Linear::Init out_init = Linear::Init::xavier);

    struct Cache {
        LayerNorm::Cache ln;
        Linear::Cache c1, c2;
        Mat xn, h;
    };

    Mat forward(const ParamStore& P, const Mat& x, Cache* cache = nullptr) const;
    Mat backward(const ParamStore& P, const Cache& cache, const Mat& dy, GradBuf& G) const;
};

/// out = x + FFN(CrossAttention(LN(x), LN(k_src), LN(v_src))); the residual
/// wraps the attention/FFN pair as a unit.
struct CrossAttnBlock {
    LayerNorm norm_q, norm_k, norm_v;
    MultiheadAttention attn;
    FeedForward ffn;
    bool shared_kv = false;  // k_src and v_src are the same tensor

    CrossAttnBlock() = default;
    CrossAttnBlock(ParamStore& P, const std::string& name, Eigen::Index dim,
                   Eigen::Index dim_ctx_k, Eigen::Index dim_ctx_v, int heads,
                   Eigen::Index dim_head, int ffn_mult, Rng& rng, AttnTag tag, bool shared_kv);

    struct Cache {
        LayerNorm::Cache lnq, lnk, lnv;
        MultiheadAttention::Cache attn;
        FeedForward::Cache ffn;
        Mat a;
    };

    struct InputGrads {
        Mat dx, dk, dv;
    };

    Mat forward(const ParamStore& P, const Mat& x, const Mat& k_src, const Mat& v_src,
                Cache* cache = nullptr) const;
    InputGrads backward(const ParamStore& P, const Cache& cache, const Mat& dy, GradBuf& G) const;
};

/// x <- x + Attn(LN(x)); x <- x + FFN(LN(x))
struct SelfAttnBlock {
    LayerNorm norm;
    MultiheadAttention attn;
    FeedForward ffn;

    SelfAttnBlock() = default;
    SelfAttnBlock(ParamStore& P, const std::string& name, Eigen::Index dim, int heads,
                  Eigen::Index dim_head, int ffn_mult, Rng& rng, AttnTag tag);

    struct Cache {
        LayerNorm::Cache ln;
        Mat xn;
        MultiheadAttention::Cache attn;
        FeedForward::Cache ffn;
    };

    Mat forward(const ParamStore& P, const Mat& x, Cache* cache = nullptr) const;
    Mat backward(const ParamStore& P, const Cache& cache, const Mat& dy, GradBuf& G) const;
};

}  // namespace aroma::nn
