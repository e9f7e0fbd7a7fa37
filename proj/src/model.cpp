#include "aroma/model.hpp"

namespace aroma {

nn::EncoderConfig ModelSpec::encoder_config() const {
    nn::EncoderConfig c;
    c.coord_dim = coord_dim;
    c.channels = channels;
    c.hidden_dim = hidden_dim;
    c.num_latents = num_latents;
    c.latent_dim = latent_dim;
    c.cross_heads = cross_heads;
    c.cross_dim_head = cross_dim_head;
    c.ffn_mult = ffn_mult;
    c.encode_geo = encode_geo;
    c.max_encoding_freq = max_encoding_freq;
    c.freq_samples = freq_samples;
    c.value_bias = value_bias;
    return c;
}

nn::DecoderConfig ModelSpec::decoder_config() const {
    nn::DecoderConfig c;
    c.coord_dim = coord_dim;
    c.channels = channels;
    c.latent_dim = latent_dim;
    c.hidden_dim = hidden_dim;
    c.num_self_attentions = num_self_attentions;
    c.latent_heads = latent_heads;
    c.latent_dim_head = latent_dim_head;
    c.cross_heads = cross_heads;
    c.cross_dim_head = cross_dim_head;
    c.ffn_mult = ffn_mult;
    c.band_exponents = frequencies;
    c.samples_per_band = freq_samples;
    c.feature_dim = feature_dim;
    c.inr_width = dim;
    c.depth_inr = depth_inr;
    c.periodic_queries = periodic_queries;
    return c;
}

nn::RefinerConfig ModelSpec::refiner_config() const {
    nn::RefinerConfig c;
    c.num_latents = num_latents;
    c.latent_dim = latent_dim;
    c.hidden = hidden_size;
    c.depth = depth;
    c.heads = num_heads;
    c.mlp_ratio = mlp_ratio;
    return c;
}

io::json ModelSpec::to_json() const {
    return io::json{{"coord_dim", coord_dim},
                    {"channels", channels},
                    {"hidden_dim", hidden_dim},
                    {"num_self_attentions", num_self_attentions},
                    {"num_latents", num_latents},
                    {"latent_dim", latent_dim},
                    {"latent_heads", latent_heads},
                    {"latent_dim_head", latent_dim_head},
                    {"cross_heads", cross_heads},
                    {"cross_dim_head", cross_dim_head},
                    {"dim", dim},
                    {"depth_inr", depth_inr},
                    {"frequencies", frequencies},
                    {"dropout_sequence", dropout_sequence},
                    {"feature_dim", feature_dim},
                    {"encode_geo", encode_geo},
                    {"max_encoding_freq", max_encoding_freq},
                    {"kl_weight", kl_weight},
                    {"hidden_size", hidden_size},
                    {"depth", depth},
                    {"num_heads", num_heads},
                    {"mlp_ratio", mlp_ratio},
                    {"min_noise", min_noise},
                    {"denoising_steps", denoising_steps},
                    {"freq_samples", freq_samples},
                    {"ffn_mult", ffn_mult},
                    {"value_bias", value_bias},
                    {"periodic_queries", periodic_queries},
                    {"mlp_stepper_hidden", mlp_stepper_hidden},
                    {"mlp_stepper_depth", mlp_stepper_depth}};
}

ModelSpec ModelSpec::from_json(const io::json& j) {
    ModelSpec s;
    s.coord_dim = j.value("coord_dim", s.coord_dim);
    s.channels = j.value("channels", s.channels);
    s.hidden_dim = j.value("hidden_dim", s.hidden_dim);
    s.num_self_attentions = j.value("num_self_attentions", s.num_self_attentions);
    s.num_latents = j.value("num_latents", s.num_latents);
    s.latent_dim = j.value("latent_dim", s.latent_dim);
    s.latent_heads = j.value("latent_heads", s.latent_heads);
    s.latent_dim_head = j.value("latent_dim_head", s.latent_dim_head);
    s.cross_heads = j.value("cross_heads", s.cross_heads);
    s.cross_dim_head = j.value("cross_dim_head", s.cross_dim_head);
    s.dim = j.value("dim", s.dim);
    s.depth_inr = j.value("depth_inr", s.depth_inr);
    if (j.contains("frequencies")) s.frequencies = j.at("frequencies").get<std::vector<int>>();
    s.dropout_sequence = j.value("dropout_sequence", s.dropout_sequence);
    s.feature_dim = j.value("feature_dim", s.feature_dim);
    s.encode_geo = j.value("encode_geo", s.encode_geo);
    s.max_encoding_freq = j.value("max_encoding_freq", s.max_encoding_freq);
    s.kl_weight = j.value("kl_weight", s.kl_weight);
    s.hidden_size = j.value("hidden_size", s.hidden_size);
    s.depth = j.value("depth", s.depth);
    s.num_heads = j.value("num_heads", s.num_heads);
    s.mlp_ratio = j.value("mlp_ratio", s.mlp_ratio);
    s.min_noise = j.value("min_noise", s.min_noise);
    s.denoising_steps = j.value("denoising_steps", s.denoising_steps);
    s.freq_samples = j.value("freq_samples", s.freq_samples);
    s.ffn_mult = j.value("ffn_mult", s.ffn_mult);
    s.value_bias = j.value("value_bias", s.value_bias);
    s.periodic_queries = j.value("periodic_queries", s.periodic_queries);
    s.mlp_stepper_hidden = j.value("mlp_stepper_hidden", s.mlp_stepper_hidden);
    s.mlp_stepper_depth = j.value("mlp_stepper_depth", s.mlp_stepper_depth);
    return s;
}

ModelSpec ModelSpec::preset(const std::string& name) {
    ModelSpec s;
    if (name == "burgers") {
        s.coord_dim = 1;
        s.latent_dim = 8;
        s.frequencies = {3, 4, 5};
        s.encode_geo = false;
        s.kl_weight = 1e-4;
        s.min_noise = 1e-2;
    } else if (name == "ns") {
        s.coord_dim = 2;
        s.latent_dim = 16;
        s.frequencies = {2, 3};
        s.encode_geo = true;
        s.kl_weight = 1e-4;
        s.min_noise = 1e-2;
    } else {
        throw Error("ConfigError", "unknown model preset '" + name + "'");
    }
    return s;
}

AutoencoderModel AutoencoderModel::build(const ModelSpec& spec, uint64_t seed) {
    AutoencoderModel m;
    m.spec = spec;
    Rng rng(hash_seed(seed, 0x6165ULL));
    m.encoder = nn::Encoder(m.params, spec.encoder_config(), rng);
    m.decoder = nn::Decoder(m.params, spec.decoder_config(), rng);
    m.norm.mean.assign(static_cast<size_t>(spec.channels), 0.0);
    m.norm.stdev.assign(static_cast<size_t>(spec.channels), 1.0);
    m.norm.flagged.assign(static_cast<size_t>(spec.channels), false);
    return m;
}

void AutoencoderModel::save(const std::string& dir, const io::json& extra) const {
    io::json config = extra;
    config["model"] = spec.to_json();
    config["normalization"] = norm.to_json();
    config["stage"] = "autoencoder";
    io::CheckpointArchive::save(dir, {&params}, config);
}

AutoencoderModel AutoencoderModel::load(const std::string& dir) {
    const io::json config = io::CheckpointArchive::load_config(dir);
    AutoencoderModel m = build(ModelSpec::from_json(config.at("model")), 0);
    io::CheckpointArchive::load_into(dir, {&m.params});
    m.norm = io::NormStats::from_json(config.at("normalization"));
    return m;
}

std::string to_string(StepperVariant v) {
    switch (v) {
        case StepperVariant::diffusion: return "diffusion";
        case StepperVariant::deterministic: return "deterministic";
        case StepperVariant::mlp: return "mlp";
    }
    return "diffusion";
}

StepperVariant stepper_variant_from_string(const std::string& s) {
    if (s == "diffusion") return StepperVariant::diffusion;
    if (s == "deterministic") return StepperVariant::deterministic;
    if (s == "mlp") return StepperVariant::mlp;
    throw Error("ConfigError", "unknown stepper variant '" + s + "'");
}

StepperModel StepperModel::build(const ModelSpec& spec, StepperVariant variant, uint64_t seed) {
    StepperModel m;
    m.variant = variant;
    m.spec = spec;
    Rng rng(hash_seed(seed, 0x726566ULL));
    if (variant == StepperVariant::mlp)
        m.mlp = nn::MlpStepper(m.params, spec.latent_dim, spec.mlp_stepper_hidden,
                               spec.mlp_stepper_depth, rng);
    else
        m.refiner = nn::Refiner(m.params, spec.refiner_config(), rng);
    m.schedule = nn::build_schedule(spec.denoising_steps, spec.min_noise);
    return m;
}

Mat StepperModel::step(const Mat& z, Rng& rng) const {
    const Mat zs = z / latent_scale;
    Mat out;
    switch (variant) {
        case StepperVariant::diffusion: out = refiner.sample_next(params, zs, schedule, rng); break;
        case StepperVariant::deterministic: out = refiner.deterministic_step(params, zs); break;
        case StepperVariant::mlp: out = mlp.forward(params, zs); break;
    }
    return out * latent_scale;
}

void PipelineModel::save(const std::string& dir, const io::json& extra) const {
    io::json config = extra;
    config["model"] = autoencoder.spec.to_json();
    config["normalization"] = autoencoder.norm.to_json();
    config["stage"] = "pipeline";
    config["stepper"] = {{"variant", to_string(stepper.variant)},
                         {"latent_scale", stepper.latent_scale},
                         {"schedule",
                          {{"denoising_steps", stepper.schedule.steps},
                           {"min_noise", stepper.schedule.sigma_min},
                           {"alpha_bar", stepper.schedule.alpha_bar}}}};
    io::CheckpointArchive::save(dir, {&autoencoder.params, &stepper.params}, config);
}

PipelineModel PipelineModel::load(const std::string& dir) {
    const io::json config = io::CheckpointArchive::load_config(dir);
    const ModelSpec spec = ModelSpec::from_json(config.at("model"));
    PipelineModel m{AutoencoderModel::build(spec, 0),
                    StepperModel::build(
                        spec,
                        stepper_variant_from_string(config.at("stepper").at("variant")), 0)};
    io::CheckpointArchive::load_into(dir, {&m.autoencoder.params, &m.stepper.params});
    m.autoencoder.norm = io::NormStats::from_json(config.at("normalization"));
    m.stepper.latent_scale = config.at("stepper").value("latent_scale", 1.0);
    return m;
}

}  // namespace aroma
