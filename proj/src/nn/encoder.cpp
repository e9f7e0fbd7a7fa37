#include "aroma/nn/encoder.hpp"

#include <algorithm>
#include <numeric>

namespace aroma::nn {

FieldSnapshot sequence_dropout(const FieldSnapshot& snapshot, double ratio, Rng& rng) {
    if (ratio < 0.0 || ratio >= 1.0)
        throw Error("InvalidRatio", "dropout ratio must be in [0, 1), got " + std::to_string(ratio));
    const Eigen::Index n = snapshot.n_points();
    const Eigen::Index drop = static_cast<Eigen::Index>(ratio * static_cast<double>(n));
    if (drop == 0) return snapshot;

    std::vector<Eigen::Index> idx(static_cast<size_t>(n));
    std::iota(idx.begin(), idx.end(), 0);
    const Eigen::Index keep = n - drop;
    for (Eigen::Index i = 0; i < keep; ++i) {
        const Eigen::Index j = i + static_cast<Eigen::Index>(rng.uniform_int(n - i));
        std::swap(idx[static_cast<size_t>(i)], idx[static_cast<size_t>(j)]);
    }
    std::sort(idx.begin(), idx.begin() + keep);

    FieldSnapshot out;
    out.coords.resize(keep, snapshot.coords.cols());
    out.values.resize(keep, snapshot.values.cols());
    for (Eigen::Index i = 0; i < keep; ++i) {
        out.coords.row(i) = snapshot.coords.row(idx[static_cast<size_t>(i)]);
        out.values.row(i) = snapshot.values.row(idx[static_cast<size_t>(i)]);
    }
    return out;
}

Encoder::Encoder(ParamStore& P, const EncoderConfig& cfg, Rng& rng) : cfg_(cfg) {
    if (cfg.latent_dim >= cfg.hidden_dim)
        throw Error("ConfigError", "latent_dim must be smaller than hidden_dim");
    embedder_ = FourierEmbedder::log_spaced(cfg.coord_dim, 0.0, cfg.max_encoding_freq,
                                            cfg.freq_samples);
    const Eigen::Index d = cfg.hidden_dim;
    tokens_ = P.add("encoder/tokens", cfg.num_latents, d);
    init_normal(P.mat(tokens_), 0.02, rng);
    pos_embed_ = Linear(P, "encoder/pos_embed", embedder_.out_dim(), d, rng);
    value_embed_ = Linear(P, "encoder/value_embed", cfg.channels, d, rng, cfg.value_bias);
    if (cfg.encode_geo)
        geo_ = CrossAttnBlock(P, "encoder/geo", d, d, d, cfg.cross_heads, cfg.cross_dim_head,
                              cfg.ffn_mult, rng, AttnTag::geometry, /*shared_kv=*/true);
    obs_ = CrossAttnBlock(P, "encoder/obs", d, d, d, cfg.cross_heads, cfg.cross_dim_head,
                          cfg.ffn_mult, rng, AttnTag::observation, /*shared_kv=*/false);
    out_norm_ = LayerNorm(P, "encoder/out_norm", d);
    to_mu_ = Linear(P, "encoder/to_mu", d, cfg.latent_dim, rng);
    to_logsig_ = Linear(P, "encoder/to_logsig", d, cfg.latent_dim, rng);
    // start with a tight posterior so early reconstructions are not washed
    // out by sampling noise
    P.mat(to_logsig_.b).setConstant(-3.0);
}

std::pair<Mat, Mat> Encoder::embed(const ParamStore& P, const FieldSnapshot& snapshot,
                                   Cache* cache) const {
    if (snapshot.coords.cols() != cfg_.coord_dim)
        throw Error("ConfigError", "snapshot coordinate dimension mismatch");
    if (snapshot.values.cols() != cfg_.channels)
        throw Error("ConfigError", "snapshot channel count mismatch");
    for (Eigen::Index i = 0; i < snapshot.coords.size(); ++i) {
        const double x = snapshot.coords.data()[i];
        if (!(x >= 0.0 && x < 1.0))
            throw Error("DomainError",
                        "encoder coordinates must lie in [0,1), got " + std::to_string(x));
    }
    Cache local;
    Cache& c = cache ? *cache : local;
    c.n_points = snapshot.n_points();
    c.gamma_raw = embedder_.embed(snapshot.coords);
    Mat gamma = pos_embed_.forward(P, c.gamma_raw, &c.pos_c);
    Mat v = value_embed_.forward(P, snapshot.values, &c.val_c);
    if (cache) {
        cache->gamma = gamma;
        cache->v = v;
    }
    return {std::move(gamma), std::move(v)};
}

Mat Encoder::encode_geometry(const ParamStore& P, const Mat& gamma, Cache* cache) const {
    const Mat tokens = P.mat(tokens_);
    if (!cfg_.encode_geo) {
        if (cache) cache->t_geo = tokens;
        return tokens;
    }
    Mat t_geo = geo_.forward(P, tokens, gamma, gamma, cache ? &cache->geo : nullptr);
    if (cache) cache->t_geo = t_geo;
    return t_geo;
}

Mat Encoder::encode_observations(const ParamStore& P, const Mat& t_geo, const Mat& gamma,
                                 const Mat& v, Cache* cache) const {
    if (gamma.rows() == 0) throw Error("EmptyObservationSet", "encoder received zero observations");
    Mat t_obs = obs_.forward(P, t_geo, gamma, v, cache ? &cache->obs : nullptr);
    if (cache) cache->t_obs = t_obs;
    return t_obs;
}

LatentTokens Encoder::bottleneck_and_sample(const ParamStore& P, const Mat& t_obs, EncodeMode mode,
                                            Rng* rng, Cache* cache) const {
    Cache local;
    Cache& c = cache ? *cache : local;
    c.t_normed = out_norm_.forward(P, t_obs, &c.out_ln);
    LatentTokens tokens;
    tokens.mu = to_mu_.forward(P, c.t_normed, &c.mu_c);
    c.logsig_raw = to_logsig_.forward(P, c.t_normed, &c.logsig_c);
    tokens.logsig = c.logsig_raw.array().min(cfg_.logvar_clamp).max(-cfg_.logvar_clamp);
    if (!tokens.mu.allFinite() || !tokens.logsig.allFinite())
        throw Error("EncoderNumericalError", "non-finite latent statistics");
    if (mode == EncodeMode::train) {
        if (!rng) throw Error("ConfigError", "train-mode encoding requires an rng");
        c.eps.resize(tokens.mu.rows(), tokens.mu.cols());
        rng->fill_normal(c.eps);
        tokens.z = tokens.mu + (tokens.logsig.array().exp() * c.eps.array()).matrix();
    } else {
        c.eps = Mat::Zero(tokens.mu.rows(), tokens.mu.cols());
        tokens.z = tokens.mu;
    }
    return tokens;
}

LatentTokens Encoder::encode(const ParamStore& P, const FieldSnapshot& snapshot, EncodeMode mode,
                             Rng* rng, Cache* cache) const {
    Cache local;
    Cache& c = cache ? *cache : local;
    auto [gamma, v] = embed(P, snapshot, &c);
    const Mat t_geo = encode_geometry(P, gamma, &c);
    const Mat t_obs = encode_observations(P, t_geo, gamma, v, &c);
    return bottleneck_and_sample(P, t_obs, mode, rng, &c);
}

Mat Encoder::attention_rows(const ParamStore& P, const FieldSnapshot& snapshot,
                            bool geometry_stage, int head) const {
    Cache c;
    auto [gamma, v] = embed(P, snapshot, &c);
    if (geometry_stage) {
        if (!cfg_.encode_geo)
            throw Error("ConfigError", "geometry stage disabled for this model");
        const Mat qn = geo_.norm_q.forward(P, P.mat(tokens_));
        const Mat kn = geo_.norm_k.forward(P, gamma);
        return geo_.attn.attention_rows(P, qn, kn, head);
    }
    const Mat t_geo = encode_geometry(P, gamma, &c);
    const Mat qn = obs_.norm_q.forward(P, t_geo);
    const Mat kn = obs_.norm_k.forward(P, gamma);
    return obs_.attn.attention_rows(P, qn, kn, head);
}

void Encoder::backward(const ParamStore& P, const Cache& c, const Mat& dmu, const Mat& dlogsig,
                       const Mat& dz, GradBuf& G) const {
    // z = mu + exp(logsig) * eps
    Mat dmu_total = dmu + dz;
    Mat dlogsig_total = dlogsig;
    if (dz.size() > 0 && c.eps.size() > 0) {
        const Mat logsig_clamped =
            c.logsig_raw.array().min(cfg_.logvar_clamp).max(-cfg_.logvar_clamp);
        dlogsig_total.array() +=
            dz.array() * c.eps.array() * logsig_clamped.array().exp();
    }
    // clamp gradient mask
    Mat dlogsig_raw = dlogsig_total;
    for (Eigen::Index i = 0; i < dlogsig_raw.size(); ++i) {
        const double raw = c.logsig_raw.data()[i];
        if (raw > cfg_.logvar_clamp || raw < -cfg_.logvar_clamp) dlogsig_raw.data()[i] = 0.0;
    }

    Mat d_normed = to_mu_.backward(P, c.mu_c, dmu_total, G);
    d_normed += to_logsig_.backward(P, c.logsig_c, dlogsig_raw, G);
    Mat d_tobs = out_norm_.backward(P, c.out_ln, d_normed, G);

    auto obs_grads = obs_.backward(P, c.obs, d_tobs, G);
    Mat dgamma = std::move(obs_grads.dk);
    Mat dv = std::move(obs_grads.dv);
    Mat d_tgeo = std::move(obs_grads.dx);

    if (cfg_.encode_geo) {
        auto geo_grads = geo_.backward(P, c.geo, d_tgeo, G);
        dgamma += geo_grads.dk;
        G.mat(tokens_) += geo_grads.dx;
    } else {
        G.mat(tokens_) += d_tgeo;
    }

    pos_embed_.backward(P, c.pos_c, dgamma, G);
    value_embed_.backward(P, c.val_c, dv, G);
}

}  // namespace aroma::nn
