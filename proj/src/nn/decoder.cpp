#include "aroma/nn/decoder.hpp"

namespace aroma::nn {

BandSpec BandSpec::from_exponents(int coord_dim, const std::vector<int>& exponents,
                                  int samples_per_band) {
    if (exponents.empty()) throw Error("ConfigError", "band exponent list must be non-empty");
    for (size_t i = 1; i < exponents.size(); ++i)
        if (exponents[i] <= exponents[i - 1])
            throw Error("ConfigError", "band exponents must be strictly ascending");
    BandSpec spec;
    double lo = 0.0;
    for (int e : exponents) {
        spec.bands.push_back(
            FourierEmbedder::log_spaced(coord_dim, lo, static_cast<double>(e), samples_per_band));
        lo = static_cast<double>(e);
    }
    return spec;
}

BandSpec BandSpec::from_frequency_lists(int coord_dim,
                                        const std::vector<std::vector<double>>& lists) {
    BandSpec spec;
    for (const auto& freqs : lists)
        spec.bands.push_back(FourierEmbedder::from_frequencies(coord_dim, freqs));
    return spec;
}

Decoder::Decoder(ParamStore& P, const DecoderConfig& cfg, Rng& rng) : cfg_(cfg) {
    bands_ = BandSpec::from_exponents(cfg.coord_dim, cfg.band_exponents, cfg.samples_per_band);
    const Eigen::Index d = cfg.hidden_dim;
    lift_ = Linear(P, "decoder/lift", cfg.latent_dim, d, rng);
    for (int i = 0; i < cfg.num_self_attentions; ++i)
        self_attn_.emplace_back(P, "decoder/self_attn" + std::to_string(i), d, cfg.latent_heads,
                                cfg.latent_dim_head, cfg.ffn_mult, rng, AttnTag::decoder_self);
    ctx_norm_ = LayerNorm(P, "decoder/ctx_norm", d);
    for (int b = 0; b < bands_.count(); ++b)
        band_attn_.emplace_back(P, "decoder/band" + std::to_string(b),
                                bands_.bands[static_cast<size_t>(b)].out_dim(), d, d,
                                cfg.feature_dim, cfg.cross_heads, cfg.cross_dim_head, rng,
                                AttnTag::decoder_query);
    const Eigen::Index feat = static_cast<Eigen::Index>(cfg.feature_dim) * bands_.count();
    Eigen::Index width_in = feat;
    for (int l = 0; l < cfg.depth_inr; ++l) {
        head_.emplace_back(P, "decoder/head" + std::to_string(l), width_in, cfg.inr_width, rng);
        width_in = cfg.inr_width;
    }
    head_.emplace_back(P, "decoder/head_out", width_in, cfg.channels, rng);
}

Mat Decoder::wrap_queries(const Mat& x) const {
    if (!cfg_.periodic_queries) {
        for (Eigen::Index i = 0; i < x.size(); ++i) {
            const double v = x.data()[i];
            if (!(v >= 0.0 && v < 1.0))
                throw Error("DomainError",
                            "query coordinates must lie in [0,1), got " + std::to_string(v));
        }
        return x;
    }
    Mat wrapped = x;
    for (Eigen::Index i = 0; i < wrapped.size(); ++i)
        wrapped.data()[i] -= std::floor(wrapped.data()[i]);
    return wrapped;
}

Mat Decoder::lift_and_selfattend(const ParamStore& P, const Mat& z, Cache* cache) const {
    if (!z.allFinite()) throw Error("DecoderNumericalError", "non-finite latent tokens");
    Cache local;
    Cache& c = cache ? *cache : local;
    Mat h = lift_.forward(P, z, &c.lift_c);
    c.sa.resize(self_attn_.size());
    for (size_t i = 0; i < self_attn_.size(); ++i) h = self_attn_[i].forward(P, h, &c.sa[i]);
    c.zprime = h;
    return h;
}

Mat Decoder::query_features(const ParamStore& P, const Mat& zprime, const Mat& x,
                            Cache* cache) const {
    if (x.cols() != cfg_.coord_dim) throw Error("ConfigError", "query coordinate dim mismatch");
    const Mat xq = wrap_queries(x);
    Cache local;
    Cache& c = cache ? *cache : local;
    c.n_queries = xq.rows();
    c.bands.resize(static_cast<size_t>(bands_.count()));
    Mat features(xq.rows(), static_cast<Eigen::Index>(cfg_.feature_dim) * bands_.count());
    for (int b = 0; b < bands_.count(); ++b) {
        BandCache& bc = c.bands[static_cast<size_t>(b)];
        bc.gamma_q = bands_.bands[static_cast<size_t>(b)].embed(xq);
        bc.zn = ctx_norm_.forward(P, zprime, &bc.ln);
        features.middleCols(static_cast<Eigen::Index>(b) * cfg_.feature_dim, cfg_.feature_dim) =
            band_attn_[static_cast<size_t>(b)].forward(P, bc.gamma_q, bc.zn, bc.zn, &bc.attn);
    }
    c.features = features;
    return features;
}

Mat Decoder::decode_values(const ParamStore& P, const Mat& features, Cache* cache) const {
    Cache local;
    Cache& c = cache ? *cache : local;
    c.head_c.resize(head_.size());
    c.head_pre.resize(head_.size() - 1);
    Mat h = features;
    for (size_t l = 0; l + 1 < head_.size(); ++l) {
        h = head_[l].forward(P, h, &c.head_c[l]);
        c.head_pre[l] = h;
        Mat a;
        gelu(h, a);
        h = std::move(a);
    }
    return head_.back().forward(P, h, &c.head_c[head_.size() - 1]);
}

Mat Decoder::decode(const ParamStore& P, const Mat& z, const Mat& x, Cache* cache) const {
    Cache local;
    Cache& c = cache ? *cache : local;
    const Mat zp = lift_and_selfattend(P, z, &c);
    const Mat f = query_features(P, zp, x, &c);
    return decode_values(P, f, &c);
}

Mat Decoder::backward(const ParamStore& P, const Cache& c, const Mat& du, GradBuf& G) const {
    // MLP head
    Mat dh = head_.back().backward(P, c.head_c[head_.size() - 1], du, G);
    for (size_t l = head_.size() - 1; l-- > 0;) {
        dh = gelu_backward(c.head_pre[l], dh);
        dh = head_[l].backward(P, c.head_c[l], dh, G);
    }

    // band cross-attentions: gradient into z' accumulates over bands
    Mat dzprime = Mat::Zero(c.zprime.rows(), c.zprime.cols());
    for (int b = 0; b < bands_.count(); ++b) {
        const BandCache& bc = c.bands[static_cast<size_t>(b)];
        const Mat dfeat =
            dh.middleCols(static_cast<Eigen::Index>(b) * cfg_.feature_dim, cfg_.feature_dim);
        auto ig = band_attn_[static_cast<size_t>(b)].backward(P, bc.attn, dfeat, G);
        dzprime += ctx_norm_.backward(P, bc.ln, ig.dk + ig.dv, G);
        // ig.dq is the gradient w.r.t. the Fourier features; queries carry no parameters
    }

    // self-attention stack and lift
    Mat dz = dzprime;
    for (size_t i = self_attn_.size(); i-- > 0;) dz = self_attn_[i].backward(P, c.sa[i], dz, G);
    return lift_.backward(P, c.lift_c, dz, G);
}

Mat Decoder::attention_rows(const ParamStore& P, const Mat& zprime, const Mat& x, int band,
                            int head) const {
    const Mat xq = wrap_queries(x);
    const Mat gamma_q = bands_.bands[static_cast<size_t>(band)].embed(xq);
    const Mat zn = ctx_norm_.forward(P, zprime);
    return band_attn_[static_cast<size_t>(band)].attention_rows(P, gamma_q, zn, head);
}

}  // namespace aroma::nn
