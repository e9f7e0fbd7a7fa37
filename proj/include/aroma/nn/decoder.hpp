#pragma once

#include "aroma/nn/fourier.hpp"
#include "aroma/nn/layers.hpp"

#include <vector>

namespace aroma::nn {

/// Frequency bands for the local neural-field queries. Band b samples
/// `samples_per_band` frequencies log-spaced (base 2) between exponent
/// e_{b-1} and e_b, with e_0 = 0 for the first band.
struct BandSpec {
    std::vector<FourierEmbedder> bands;

    static BandSpec from_exponents(int coord_dim, const std::vector<int>& exponents,
                                   int samples_per_band);
    static BandSpec from_frequency_lists(int coord_dim,
                                         const std::vector<std::vector<double>>& lists);

    int count() const { return static_cast<int>(bands.size()); }
};

struct DecoderConfig {
    int coord_dim = 1;
    int channels = 1;
    int latent_dim = 8;   // h
    int hidden_dim = 128; // d
    int num_self_attentions = 2;
    int latent_heads = 4;
    Eigen::Index latent_dim_head = 32;
    int cross_heads = 4;
    Eigen::Index cross_dim_head = 32;
    int ffn_mult = 4;
    std::vector<int> band_exponents{3, 4, 5};
    int samples_per_band = 16;
    int feature_dim = 16;
    int inr_width = 128;  // `dim` of the MLP head
    int depth_inr = 3;
    bool periodic_queries = false;
};

/// Conditional neural field: lift + self-attention over tokens, per-band
/// cross-attention against query Fourier features, and a pointwise MLP head.
class Decoder {
public:
    Decoder() = default;
    Decoder(ParamStore& P, const DecoderConfig& cfg, Rng& rng);

    struct BandCache {
        Mat gamma_q;
        LayerNorm::Cache ln;
        Mat zn;
        MultiheadAttention::Cache attn;
    };

    struct Cache {
        Linear::Cache lift_c;
        std::vector<SelfAttnBlock::Cache> sa;
        Mat zprime;
        std::vector<BandCache> bands;
        Mat features;
        std::vector<Linear::Cache> head_c;
        std::vector<Mat> head_pre;  // pre-activation of each hidden layer
        Eigen::Index n_queries = 0;
    };

    Mat lift_and_selfattend(const ParamStore& P, const Mat& z, Cache* cache = nullptr) const;
    Mat query_features(const ParamStore& P, const Mat& zprime, const Mat& x,
                       Cache* cache = nullptr) const;
    Mat decode_values(const ParamStore& P, const Mat& features, Cache* cache = nullptr) const;

    Mat decode(const ParamStore& P, const Mat& z, const Mat& x, Cache* cache = nullptr) const;

    /// Returns dZ (M x h); accumulates parameter gradients.
    Mat backward(const ParamStore& P, const Cache& cache, const Mat& du, GradBuf& G) const;

    const DecoderConfig& config() const { return cfg_; }
    const BandSpec& band_spec() const { return bands_; }

    /// Decoder cross-attention rows (queries over tokens) for one band/head.
    Mat attention_rows(const ParamStore& P, const Mat& zprime, const Mat& x, int band,
                       int head) const;

private:
    Mat wrap_queries(const Mat& x) const;

    DecoderConfig cfg_;
    BandSpec bands_;
    Linear lift_;
    std::vector<SelfAttnBlock> self_attn_;
    LayerNorm ctx_norm_;
    std::vector<MultiheadAttention> band_attn_;
    std::vector<Linear> head_;
};

}  // namespace aroma::nn
