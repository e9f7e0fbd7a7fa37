#pragma once

#include "aroma/nn/fourier.hpp"
#include "aroma/nn/layers.hpp"

namespace aroma::nn {

struct EncoderConfig {
    int coord_dim = 1;
    int channels = 1;
    int hidden_dim = 128;    // d
    int num_latents = 32;    // M
    int latent_dim = 8;      // h, the bottleneck width
    int cross_heads = 4;
    Eigen::Index cross_dim_head = 32;
    int ffn_mult = 4;
    bool encode_geo = false;
    double max_encoding_freq = 4.0;
    int freq_samples = 16;
    bool value_bias = true;
    double logvar_clamp = 10.0;
};

struct LatentTokens {
    Mat z;       // M x h
    Mat mu;      // M x h
    Mat logsig;  // M x h  (log of the standard deviation, clamped)
};

enum class EncodeMode { train, eval };

/// Drop floor(ratio * N) points uniformly at random (train-time only; the
/// caller decides when to apply it).
FieldSnapshot sequence_dropout(const FieldSnapshot& snapshot, double ratio, Rng& rng);

/// Maps N (position, value) observations to M latent tokens: Fourier/value
/// embeddings, optional geometry cross-attention, observation cross-attention,
/// then a linear bottleneck with Gaussian sampling.
class Encoder {
public:
    Encoder() = default;
    Encoder(ParamStore& P, const EncoderConfig& cfg, Rng& rng);

    struct Cache {
        Mat gamma_raw;
        Linear::Cache pos_c, val_c;
        Mat gamma, v;
        CrossAttnBlock::Cache geo, obs;
        Mat t_geo, t_obs;
        LayerNorm::Cache out_ln;
        Mat t_normed;
        Linear::Cache mu_c, logsig_c;
        Mat logsig_raw, eps;
        Eigen::Index n_points = 0;
    };

    std::pair<Mat, Mat> embed(const ParamStore& P, const FieldSnapshot& snapshot,
                              Cache* cache = nullptr) const;
    Mat encode_geometry(const ParamStore& P, const Mat& gamma, Cache* cache = nullptr) const;
    Mat encode_observations(const ParamStore& P, const Mat& t_geo, const Mat& gamma, const Mat& v,
                            Cache* cache = nullptr) const;
    LatentTokens bottleneck_and_sample(const ParamStore& P, const Mat& t_obs, EncodeMode mode,
                                       Rng* rng, Cache* cache = nullptr) const;

    LatentTokens encode(const ParamStore& P, const FieldSnapshot& snapshot, EncodeMode mode,
                        Rng* rng = nullptr, Cache* cache = nullptr) const;

    /// Accumulate parameter gradients given upstream gradients w.r.t. mu,
    /// logsig and the sampled z.
    void backward(const ParamStore& P, const Cache& cache, const Mat& dmu, const Mat& dlogsig,
                  const Mat& dz, GradBuf& G) const;

    const EncoderConfig& config() const { return cfg_; }
    const FourierEmbedder& embedder() const { return embedder_; }
    int query_tokens_param() const { return tokens_; }
    const CrossAttnBlock& geometry_block() const { return geo_; }
    const CrossAttnBlock& observation_block() const { return obs_; }

    /// Softmax rows (tokens over observation points) of one cross-attention
    /// stage for a given head; analysis path.
    Mat attention_rows(const ParamStore& P, const FieldSnapshot& snapshot, bool geometry_stage,
                       int head) const;

private:
    EncoderConfig cfg_;
    FourierEmbedder embedder_;
    int tokens_ = -1;  // M x d learnable queries
    Linear pos_embed_, value_embed_;
    CrossAttnBlock geo_, obs_;
    LayerNorm out_norm_;
    Linear to_mu_, to_logsig_;
};

}  // namespace aroma::nn
