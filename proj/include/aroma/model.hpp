#pragma once

#include "aroma/io/checkpoint.hpp"
#include "aroma/io/dataset.hpp"
#include "aroma/nn/decoder.hpp"
#include "aroma/nn/encoder.hpp"
#include "aroma/nn/refiner.hpp"

namespace aroma {

/// Full hyperparameter record for one dataset configuration; field names
/// follow the config-file vocabulary.
struct ModelSpec {
    int coord_dim = 1;
    int channels = 1;
    // encoder-decoder
    int hidden_dim = 128;
    int num_self_attentions = 2;
    int num_latents = 32;
    int latent_dim = 8;
    int latent_heads = 4;
    int latent_dim_head = 32;
    int cross_heads = 4;
    int cross_dim_head = 32;
    int dim = 128;        // width of the MLP head
    int depth_inr = 3;
    std::vector<int> frequencies{3, 4, 5};
    double dropout_sequence = 0.1;
    int feature_dim = 16;
    bool encode_geo = false;
    double max_encoding_freq = 4.0;
    double kl_weight = 1e-4;
    // diffusion transformer
    int hidden_size = 128;
    int depth = 4;
    int num_heads = 4;
    double mlp_ratio = 4.0;
    double min_noise = 1e-2;
    int denoising_steps = 3;
    // artifact knobs
    int freq_samples = 16;
    int ffn_mult = 4;
    bool value_bias = true;
    bool periodic_queries = false;
    int mlp_stepper_hidden = 128;
    int mlp_stepper_depth = 3;

    nn::EncoderConfig encoder_config() const;
    nn::DecoderConfig decoder_config() const;
    nn::RefinerConfig refiner_config() const;

    io::json to_json() const;
    static ModelSpec from_json(const io::json& j);

    /// Table defaults per dataset family: "burgers" or "ns".
    static ModelSpec preset(const std::string& name);
};

/// Stage-1 object: encoder + decoder sharing one parameter store, plus the
/// normalization statistics they were trained with.
struct AutoencoderModel {
    ModelSpec spec;
    nn::ParamStore params;
    nn::Encoder encoder;
    nn::Decoder decoder;
    io::NormStats norm;

    static AutoencoderModel build(const ModelSpec& spec, uint64_t seed);

    void save(const std::string& dir, const io::json& extra = io::json::object()) const;
    static AutoencoderModel load(const std::string& dir);
};

enum class StepperVariant { diffusion, deterministic, mlp };

std::string to_string(StepperVariant v);
StepperVariant stepper_variant_from_string(const std::string& s);

/// Stage-2 object: one latent time stepper (diffusion refiner, its
/// deterministic ablation, or the token-wise MLP ablation).
struct StepperModel {
    StepperVariant variant = StepperVariant::diffusion;
    ModelSpec spec;
    nn::ParamStore params;
    nn::Refiner refiner;
    nn::MlpStepper mlp;
    nn::NoiseSchedule schedule;
    /// Latents are standardized by this scalar inside the stepper so the
    /// diffusion noise levels act on unit-scale data.
    double latent_scale = 1.0;

    static StepperModel build(const ModelSpec& spec, StepperVariant variant, uint64_t seed);

    /// One latent step. Diffusion consumes the rng; the ablations do not.
    Mat step(const Mat& z, Rng& rng) const;
};

/// A stage-2 checkpoint bundles the frozen autoencoder with the stepper so a
/// rollout is self-contained.
struct PipelineModel {
    AutoencoderModel autoencoder;
    StepperModel stepper;

    void save(const std::string& dir, const io::json& extra = io::json::object()) const;
    static PipelineModel load(const std::string& dir);
};

}  // namespace aroma
