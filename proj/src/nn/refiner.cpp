#include "aroma/nn/refiner.hpp"

#include <cmath>

namespace aroma::nn {

NoiseSchedule build_schedule(int steps, double sigma_min) {
    if (steps < 1) throw Error("InvalidSchedule", "need at least one denoising step");
    if (!(sigma_min > 0.0 && sigma_min < 1.0))
        throw Error("InvalidSchedule", "sigma_min must lie in (0, 1)");
    NoiseSchedule s;
    s.steps = steps;
    s.sigma_min = sigma_min;
    s.alpha_bar.resize(static_cast<size_t>(steps) + 1);
    for (int k = 0; k <= steps; ++k)
        s.alpha_bar[static_cast<size_t>(k)] =
            1.0 - std::pow(sigma_min, 2.0 * (steps - k) / static_cast<double>(steps));
    return s;
}

VTarget vpredict_target(const Mat& z0, const Mat& eps, double a, double s) {
    VTarget t;
    t.z_k = a * z0 + s * eps;
    t.v = a * eps - s * z0;
    return t;
}

VTarget vpredict_target(const Mat& z0, const Mat& eps, const NoiseSchedule& schedule, int k) {
    return vpredict_target(z0, eps, schedule.a(k), schedule.s(k));
}

Mat vpredict_reconstruct_z0(const Mat& z_k, const Mat& v, double a, double s) {
    return a * z_k - s * v;
}

Mat vpredict_reconstruct_eps(const Mat& z_k, const Mat& v, double a, double s) {
    return s * z_k + a * v;
}

Refiner::Refiner(ParamStore& P, const RefinerConfig& cfg, Rng& rng) : cfg_(cfg) {
    if (cfg.hidden % cfg.heads != 0)
        throw Error("ConfigError", "refiner hidden size must be divisible by the head count");
    const Eigen::Index d = cfg.hidden;
    const Eigen::Index dim_head = d / cfg.heads;
    in_proj_ = Linear(P, "refiner/in_proj", cfg.latent_dim, d, rng);
    e_pos_ = P.add("refiner/e_pos", 2 * cfg.num_latents, d);
    init_normal(P.mat(e_pos_), 0.02, rng);
    emb1_ = Linear(P, "refiner/k_embed/fc1", d, d, rng);
    emb2_ = Linear(P, "refiner/k_embed/fc2", d, d, rng);
    for (int b = 0; b < cfg.depth; ++b) {
        const std::string base = "refiner/block" + std::to_string(b);
        Block blk;
        blk.ln1 = LayerNorm(P, base + "/ln1", d, /*affine=*/false);
        blk.attn = MultiheadAttention(P, base + "/attn", d, d, d, d, cfg.heads, dim_head, rng,
                                      AttnTag::refiner);
        blk.ln2 = LayerNorm(P, base + "/ln2", d, /*affine=*/false);
        const Eigen::Index ffn_hidden = static_cast<Eigen::Index>(cfg.mlp_ratio * d);
        blk.fc1 = Linear(P, base + "/ffn_fc1", d, ffn_hidden, rng);
        blk.fc2 = Linear(P, base + "/ffn_fc2", ffn_hidden, d, rng);
        blk.mod1 = Linear(P, base + "/mod1", d, 3 * d, rng, true, Linear::Init::zero);
        blk.mod2 = Linear(P, base + "/mod2", d, 3 * d, rng, true, Linear::Init::zero);
        blocks_.push_back(std::move(blk));
    }
    lnf_ = LayerNorm(P, "refiner/ln_final", d, /*affine=*/false);
    modf_ = Linear(P, "refiner/mod_final", d, 2 * d, rng, true, Linear::Init::zero);
    head_ = Linear(P, "refiner/head", d, cfg.latent_dim, rng, true, Linear::Init::zero);
}

Mat Refiner::step_embedding(int k) const {
    const Eigen::Index d = cfg_.hidden;
    Mat e(1, d);
    const Eigen::Index half = d / 2;
    for (Eigen::Index i = 0; i < half; ++i) {
        const double freq = std::exp(-std::log(10000.0) * static_cast<double>(i) /
                                     static_cast<double>(half));
        e(0, i) = std::cos(k * freq);
        e(0, half + i) = std::sin(k * freq);
    }
    return e;
}

namespace {

// rows of x modulated by 1-row signals: y = x .* (1 + scale) .+ shift
Mat modulate(const Mat& x, const Eigen::Ref<const Mat>& shift,
             const Eigen::Ref<const Mat>& scale) {
    Mat y = x;
    y.array().rowwise() *= (1.0 + scale.row(0).array());
    y.rowwise() += shift.row(0);
    return y;
}

}  // namespace

Mat Refiner::forward_impl(const ParamStore& P, const Mat& z_cond, const Mat& z_noisy, int k,
                          Cache& c) const {
    const Eigen::Index m = cfg_.num_latents;
    const Eigen::Index h = cfg_.latent_dim;
    if (z_cond.rows() != m || z_cond.cols() != h || z_noisy.rows() != m || z_noisy.cols() != h)
        throw Error("ConfigError", "refiner input shape mismatch");
    const Eigen::Index d = cfg_.hidden;

    // step conditioning
    c.k_raw = step_embedding(k);
    c.emb_h = emb1_.forward(P, c.k_raw, &c.emb1_c);
    Mat emb_act;
    silu(c.emb_h, emb_act);
    c.cond = emb2_.forward(P, emb_act, &c.emb2_c);
    silu(c.cond, c.mod_in);

    // stacked sequence
    Mat stacked(2 * m, h);
    stacked.topRows(m) = z_cond;
    stacked.bottomRows(m) = z_noisy;
    c.x0 = in_proj_.forward(P, stacked, &c.in_c);
    c.x0 += P.mat(e_pos_);

    Mat x = c.x0;
    c.blocks.resize(blocks_.size());
    for (size_t b = 0; b < blocks_.size(); ++b) {
        const Block& blk = blocks_[b];
        BlockCache& bc = c.blocks[b];
        bc.x_in = x;
        bc.mod1 = blk.mod1.forward(P, c.mod_in, &bc.mod1_c);
        bc.mod2 = blk.mod2.forward(P, c.mod_in, &bc.mod2_c);
        const auto shift1 = bc.mod1.leftCols(d);
        const auto scale1 = bc.mod1.middleCols(d, d);
        const auto gate1 = bc.mod1.rightCols(d);
        const auto shift2 = bc.mod2.leftCols(d);
        const auto scale2 = bc.mod2.middleCols(d, d);
        const auto gate2 = bc.mod2.rightCols(d);

        bc.xn1 = blk.ln1.forward(P, x, &bc.ln1);
        bc.a_in = modulate(bc.xn1, shift1, scale1);
        bc.attn_out = blk.attn.forward(P, bc.a_in, bc.a_in, bc.a_in, &bc.attn);
        bc.h1 = x + (bc.attn_out.array().rowwise() * gate1.row(0).array()).matrix();

        bc.xn2 = blk.ln2.forward(P, bc.h1, &bc.ln2);
        bc.f_in = modulate(bc.xn2, shift2, scale2);
        bc.f_h = blk.fc1.forward(P, bc.f_in, &bc.f1);
        gelu(bc.f_h, bc.f_act);
        bc.ffn_out = blk.fc2.forward(P, bc.f_act, &bc.f2);
        x = bc.h1 + (bc.ffn_out.array().rowwise() * gate2.row(0).array()).matrix();
    }
    return x;
}

Mat Refiner::forward_stream(const ParamStore& P, const Mat& z_cond, const Mat& z_noisy, int k,
                            Cache* cache) const {
    Cache local;
    Cache& c = cache ? *cache : local;
    return forward_impl(P, z_cond, z_noisy, k, c);
}

Mat Refiner::forward_v(const ParamStore& P, const Mat& z_cond, const Mat& z_noisy, int k,
                       Cache* cache) const {
    Cache local;
    Cache& c = cache ? *cache : local;
    const Mat x = forward_impl(P, z_cond, z_noisy, k, c);
    const Eigen::Index d = cfg_.hidden;
    c.xnf = lnf_.forward(P, x, &c.lnf);
    c.modf = modf_.forward(P, c.mod_in, &c.modf_c);
    c.head_in = modulate(c.xnf, c.modf.leftCols(d), c.modf.rightCols(d));
    const Mat out = head_.forward(P, c.head_in, &c.head_c);
    const Mat v = out.bottomRows(cfg_.num_latents);
    if (!v.allFinite()) throw Error("RefinerNumericalError", "non-finite refiner output");
    return v;
}

void Refiner::backward(const ParamStore& P, const Cache& c, const Mat& d_out, GradBuf& G) const {
    const Eigen::Index m = cfg_.num_latents;
    const Eigen::Index d = cfg_.hidden;

    // output head reads only the target half
    Mat d_head_out = Mat::Zero(2 * m, cfg_.latent_dim);
    d_head_out.bottomRows(m) = d_out;
    Mat d_head_in = head_.backward(P, c.head_c, d_head_out, G);

    Mat d_mod_in = Mat::Zero(1, d);  // gradient into SiLU(e), accumulated over all consumers

    // final modulation: head_in = xnf .* (1 + scale_f) .+ shift_f
    {
        Mat d_modf(1, 2 * d);
        for (Eigen::Index col = 0; col < d; ++col) {
            d_modf(0, col) = d_head_in.col(col).sum();  // shift
            d_modf(0, d + col) = (d_head_in.col(col).array() * c.xnf.col(col).array()).sum();
        }
        d_mod_in += modf_.backward(P, c.modf_c, d_modf, G);
        d_head_in.array().rowwise() *= (1.0 + c.modf.rightCols(d).row(0).array());
    }
    Mat dx = lnf_.backward(P, c.lnf, d_head_in, G);

    for (size_t b = blocks_.size(); b-- > 0;) {
        const Block& blk = blocks_[b];
        const BlockCache& bc = c.blocks[b];
        const auto scale1 = bc.mod1.middleCols(d, d);
        const auto gate1 = bc.mod1.rightCols(d);
        const auto scale2 = bc.mod2.middleCols(d, d);
        const auto gate2 = bc.mod2.rightCols(d);

        // x = h1 + gate2 .* ffn_out
        Mat d_mod2(1, 3 * d);
        Mat d_ffn_out = dx;
        d_ffn_out.array().rowwise() *= gate2.row(0).array();
        for (Eigen::Index col = 0; col < d; ++col)
            d_mod2(0, 2 * d + col) = (dx.col(col).array() * bc.ffn_out.col(col).array()).sum();

        Mat d_f_act = blk.fc2.backward(P, bc.f2, d_ffn_out, G);
        Mat d_f_h = gelu_backward(bc.f_h, d_f_act);
        Mat d_f_in = blk.fc1.backward(P, bc.f1, d_f_h, G);
        for (Eigen::Index col = 0; col < d; ++col) {
            d_mod2(0, col) = d_f_in.col(col).sum();
            d_mod2(0, d + col) = (d_f_in.col(col).array() * bc.xn2.col(col).array()).sum();
        }
        Mat d_xn2 = d_f_in;
        d_xn2.array().rowwise() *= (1.0 + scale2.row(0).array());
        Mat d_h1 = dx + blk.ln2.backward(P, bc.ln2, d_xn2, G);
        d_mod_in += blk.mod2.backward(P, bc.mod2_c, d_mod2, G);

        // h1 = x_in + gate1 .* attn_out
        Mat d_mod1(1, 3 * d);
        Mat d_attn_out = d_h1;
        d_attn_out.array().rowwise() *= gate1.row(0).array();
        for (Eigen::Index col = 0; col < d; ++col)
            d_mod1(0, 2 * d + col) = (d_h1.col(col).array() * bc.attn_out.col(col).array()).sum();

        auto ig = blk.attn.backward(P, bc.attn, d_attn_out, G);
        Mat d_a_in = ig.dq + ig.dk + ig.dv;
        for (Eigen::Index col = 0; col < d; ++col) {
            d_mod1(0, col) = d_a_in.col(col).sum();
            d_mod1(0, d + col) = (d_a_in.col(col).array() * bc.xn1.col(col).array()).sum();
        }
        Mat d_xn1 = d_a_in;
        d_xn1.array().rowwise() *= (1.0 + scale1.row(0).array());
        dx = d_h1 + blk.ln1.backward(P, bc.ln1, d_xn1, G);
        d_mod_in += blk.mod1.backward(P, bc.mod1_c, d_mod1, G);
    }

    // input projection and positional embedding
    G.mat(e_pos_) += dx;
    in_proj_.backward(P, c.in_c, dx, G);

    // conditioning path: mod_in = SiLU(e)
    Mat d_cond = silu_backward(c.cond, d_mod_in);
    Mat d_emb_act = emb2_.backward(P, c.emb2_c, d_cond, G);
    Mat d_emb_h = silu_backward(c.emb_h, d_emb_act);
    emb1_.backward(P, c.emb1_c, d_emb_h, G);
}

Mat Refiner::sample_next(const ParamStore& P, const Mat& z_t, const NoiseSchedule& schedule,
                         Rng& rng) const {
    if (schedule.steps < 1) throw Error("ConfigError", "empty noise schedule");
    if (z_t.rows() != cfg_.num_latents || z_t.cols() != cfg_.latent_dim)
        throw Error("ConfigError", "latent shape does not match the refiner configuration");
    Mat z(z_t.rows(), z_t.cols());
    rng.fill_normal(z);
    for (int k = schedule.steps; k >= 1; --k) {
        const Mat v = forward_v(P, z_t, z, k);
        const double a = schedule.a(k), s = schedule.s(k);
        const Mat z0 = vpredict_reconstruct_z0(z, v, a, s);
        if (k == 1) {
            z = z0;
        } else {
            const Mat eps = vpredict_reconstruct_eps(z, v, a, s);
            z = schedule.a(k - 1) * z0 + schedule.s(k - 1) * eps;
        }
    }
    if (!z.allFinite()) throw Error("RefinerNumericalError", "non-finite sample");
    return z;
}

Mat Refiner::deterministic_step(const ParamStore& P, const Mat& z_t, Cache* cache) const {
    const Mat zeros = Mat::Zero(z_t.rows(), z_t.cols());
    Cache local;
    Cache& c = cache ? *cache : local;
    const Mat x = forward_impl(P, z_t, zeros, 0, c);
    const Eigen::Index d = cfg_.hidden;
    c.xnf = lnf_.forward(P, x, &c.lnf);
    c.modf = modf_.forward(P, c.mod_in, &c.modf_c);
    c.head_in = modulate(c.xnf, c.modf.leftCols(d), c.modf.rightCols(d));
    const Mat out = head_.forward(P, c.head_in, &c.head_c);
    return out.bottomRows(cfg_.num_latents);
}

MlpStepper::MlpStepper(ParamStore& P, int latent_dim, int hidden, int depth, Rng& rng) {
    Eigen::Index in = latent_dim;
    for (int l = 0; l < depth; ++l) {
        layers_.emplace_back(P, "refiner/mlp_step/fc" + std::to_string(l), in, hidden, rng);
        in = hidden;
    }
    layers_.emplace_back(P, "refiner/mlp_step/out", in, latent_dim, rng);
}

Mat MlpStepper::forward(const ParamStore& P, const Mat& z, Cache* cache) const {
    Cache local;
    Cache& c = cache ? *cache : local;
    c.c.resize(layers_.size());
    c.pre.resize(layers_.size() - 1);
    Mat h = z;
    for (size_t l = 0; l + 1 < layers_.size(); ++l) {
        h = layers_[l].forward(P, h, &c.c[l]);
        c.pre[l] = h;
        Mat a;
        gelu(h, a);
        h = std::move(a);
    }
    return layers_.back().forward(P, h, &c.c[layers_.size() - 1]);
}

void MlpStepper::backward(const ParamStore& P, const Cache& c, const Mat& dy, GradBuf& G) const {
    Mat dh = layers_.back().backward(P, c.c[layers_.size() - 1], dy, G);
    for (size_t l = layers_.size() - 1; l-- > 0;) {
        dh = gelu_backward(c.pre[l], dh);
        dh = layers_[l].backward(P, c.c[l], dh, G);
    }
}

}  // namespace aroma::nn
