#pragma once

#include "aroma/nn/layers.hpp"

#include <vector>

namespace aroma::nn {

/// K-step diffusion schedule. alpha_bar[k] is the signal fraction at level k:
/// alpha_bar[K] = 0 (pure noise start) and alpha_bar[0] = 1 - sigma_min^2,
/// decaying exponentially in between.
struct NoiseSchedule {
    int steps = 0;  // K
    double sigma_min = 0.0;
    std::vector<double> alpha_bar;  // size K + 1

    double signal(int k) const { return alpha_bar[static_cast<size_t>(k)]; }
    double noise(int k) const { return 1.0 - alpha_bar[static_cast<size_t>(k)]; }
    double a(int k) const { return std::sqrt(signal(k)); }
    double s(int k) const { return std::sqrt(noise(k)); }
};

NoiseSchedule build_schedule(int steps, double sigma_min);

/// z_k = a z0 + s eps, v = a eps - s z0  (a = sqrt(alpha_bar), s = sqrt(1-alpha_bar))
struct VTarget {
    Mat z_k;
    Mat v;
};
VTarget vpredict_target(const Mat& z0, const Mat& eps, double a, double s);
VTarget vpredict_target(const Mat& z0, const Mat& eps, const NoiseSchedule& schedule, int k);
Mat vpredict_reconstruct_z0(const Mat& z_k, const Mat& v, double a, double s);
Mat vpredict_reconstruct_eps(const Mat& z_k, const Mat& v, double a, double s);

struct RefinerConfig {
    int num_latents = 32;  // M
    int latent_dim = 8;    // h
    int hidden = 128;
    int depth = 4;
    int heads = 4;
    double mlp_ratio = 4.0;
};

/// Conditional diffusion transformer over the stacked sequence
/// (Z^t, Z~_k): adaLN-modulated blocks conditioned on the diffusion step,
/// output head reading the target half. With all modulation weights at zero
/// each block is the identity on the token stream.
class Refiner {
public:
    Refiner() = default;
    Refiner(ParamStore& P, const RefinerConfig& cfg, Rng& rng);

    struct BlockCache {
        Mat x_in;
        LayerNorm::Cache ln1;
        Mat xn1, a_in, attn_out;
        MultiheadAttention::Cache attn;
        Mat h1;
        LayerNorm::Cache ln2;
        Mat xn2, f_in, f_h, f_act, ffn_out;
        Linear::Cache f1, f2;
        Linear::Cache mod1_c, mod2_c;
        Mat mod1, mod2;  // 1 x 3*hidden
    };

    struct Cache {
        Mat k_raw;  // sinusoidal step features
        Linear::Cache emb1_c, emb2_c;
        Mat emb_h, cond;     // cond = e, 1 x hidden
        Mat mod_in;          // SiLU(e)
        Linear::Cache in_c;
        Mat x0;
        std::vector<BlockCache> blocks;
        LayerNorm::Cache lnf;
        Mat xnf, head_in;
        Linear::Cache modf_c, head_c;
        Mat modf;
    };

    /// v estimate for the target half of the sequence.
    Mat forward_v(const ParamStore& P, const Mat& z_cond, const Mat& z_noisy, int k,
                  Cache* cache = nullptr) const;

    /// Final token stream (2M x hidden) before the output head; exposed for
    /// the identity-at-init checks.
    Mat forward_stream(const ParamStore& P, const Mat& z_cond, const Mat& z_noisy, int k,
                       Cache* cache = nullptr) const;

    void backward(const ParamStore& P, const Cache& cache, const Mat& d_out, GradBuf& G) const;

    /// K reverse denoising steps from a pure-noise draw; deterministic given
    /// the initial draw, returns the clean estimate of the final step.
    Mat sample_next(const ParamStore& P, const Mat& z_t, const NoiseSchedule& schedule,
                    Rng& rng) const;

    /// Ablation stepper: same backbone, zero target half, step fixed to the
    /// sentinel k = 0; the head output is the next-state prediction.
    Mat deterministic_step(const ParamStore& P, const Mat& z_t, Cache* cache = nullptr) const;

    const RefinerConfig& config() const { return cfg_; }

private:
    Mat step_embedding(int k) const;
    Mat forward_impl(const ParamStore& P, const Mat& z_cond, const Mat& z_noisy, int k,
                     Cache& c) const;

    RefinerConfig cfg_;
    Linear in_proj_;
    int e_pos_ = -1;
    Linear emb1_, emb2_;
    struct Block {
        LayerNorm ln1, ln2;
        MultiheadAttention attn;
        Linear fc1, fc2;
        Linear mod1, mod2;
    };
    std::vector<Block> blocks_;
    LayerNorm lnf_;
    Linear modf_, head_;
};

/// Token-wise MLP stepper (no inter-token interaction), the "+ mlp" ablation.
class MlpStepper {
public:
    MlpStepper() = default;
    MlpStepper(ParamStore& P, int latent_dim, int hidden, int depth, Rng& rng);

    struct Cache {
        std::vector<Linear::Cache> c;
        std::vector<Mat> pre;
    };

    Mat forward(const ParamStore& P, const Mat& z, Cache* cache = nullptr) const;
    void backward(const ParamStore& P, const Cache& cache, const Mat& dy, GradBuf& G) const;

private:
    std::vector<Linear> layers_;
};

}  // namespace aroma::nn
