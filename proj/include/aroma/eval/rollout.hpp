#pragma once

#include "aroma/model.hpp"

#include <vector>

namespace aroma::eval {

struct RolloutResult {
    std::vector<Mat> fields;   // step 0 = decoded initial encoding, denormalized
    std::vector<Mat> latents;  // index-aligned with fields
    std::vector<double> step_ms;
    uint64_t seed = 0;
    bool truncated = false;
};

/// Encode once, march n_steps in latent space, decode every saved step on
/// query_grid. The rng is consumed only by the latent steps, so the latent
/// trajectory is independent of the decoding grid. Non-finite latents
/// truncate the result and set the flag.
RolloutResult rollout(const AutoencoderModel& ae, const StepperModel& stepper,
                      const FieldSnapshot& u0, int n_steps, const Mat& query_grid, uint64_t seed,
                      bool parallel_decode = true);

/// Reconstruction only (encode + decode, no dynamics).
Mat reconstruct(const AutoencoderModel& ae, const FieldSnapshot& u0, const Mat& query_grid);

struct EnsembleResult {
    std::vector<Mat> mean;    // per step
    std::vector<Mat> stdev;   // per step, pointwise
    std::vector<double> mean_std_per_step;
    int n_samples = 0;
};

EnsembleResult ensemble_uncertainty(const AutoencoderModel& ae, const StepperModel& stepper,
                                    const FieldSnapshot& u0, int n_steps, int n_samples,
                                    const Mat& query_grid, uint64_t seed);

}  // namespace aroma::eval
