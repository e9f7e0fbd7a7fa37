#pragma once

#include "aroma/io/dataset.hpp"
#include "aroma/model.hpp"

#include <string>
#include <vector>

namespace aroma::train {

struct TrainConfig {
    std::string stage = "autoencoder";  // "autoencoder" | "refiner"
    int epochs = 40;
    int steps_per_epoch = 0;  // 0 = one full pass over the usable frames/pairs
    int batch_size = 64;
    double lr_max = 1e-3;
    double lr_min = 1e-5;
    std::string schedule = "cosine";
    double kl_weight = 1e-4;
    std::string kl_reduction = "mean";  // "mean" per latent entry | "sum"
    double dropout_sequence = 0.1;
    uint64_t seed = 0;
    std::string regularization = "vae";  // "vae" | "l2-ae"
    double weight_decay = 1e-4;          // applied in l2-ae mode only
    double grad_clip = 1.0;
    double val_fraction = 0.1;
    int val_max_items = 256;
    int checkpoint_every = 10;
    int max_query_points = 0;  // 0 = reconstruct on the full input grid
    bool augment_shift = false;  // periodic shifts; full regular grids only
    int window = 0;            // sub-trajectory window length, 0 = whole trajectory
    int horizon = 0;           // usable frames per window/trajectory, 0 = all
    std::string stepper = "diffusion";
    bool parallel = true;

    io::json to_json() const;
    static TrainConfig from_json(const io::json& j);
};

/// D_KL(N(mu, sigma^2) || N(0, I)) summed over all token/channel entries.
double kl_divergence(const Mat& mu, const Mat& logsig);

struct EpochRow {
    int epoch = 0;
    double lr = 0.0;
    double train_loss = 0.0;
    double recon = 0.0;
    double kl = 0.0;
    double val_metric = 0.0;
    double seconds = 0.0;
};

struct TrainResult {
    std::vector<EpochRow> curve;
    double best_val = 0.0;
    int best_epoch = -1;
    bool aborted = false;
    std::string checkpoint_dir;
};

void write_loss_csv(const std::string& path, const std::vector<EpochRow>& curve,
                    const std::string& val_name);

/// Stage 1: joint encoder-decoder training (VAE by default, weight-decay
/// autoencoder in l2-ae mode). The model is left holding the best-validation
/// weights; checkpoints and loss curves go to out_dir when it is non-empty.
TrainResult train_autoencoder(const io::TrajectoryDataset& ds, AutoencoderModel& model,
                              const TrainConfig& cfg, const std::string& out_dir);

/// Stage 2: latent stepper on posterior samples from the frozen autoencoder.
/// The autoencoder weights are never touched.
TrainResult train_refiner(const io::TrajectoryDataset& ds, const AutoencoderModel& autoencoder,
                          StepperModel& stepper, const TrainConfig& cfg,
                          const std::string& out_dir);

}  // namespace aroma::train
