#pragma once

#include "aroma/eval/rollout.hpp"
#include "aroma/io/dataset.hpp"

#include <string>
#include <vector>

namespace aroma::eval {

enum class AttnStage { geometry, observation, decoder };

AttnStage attn_stage_from_string(const std::string& s);

struct AttentionMapResult {
    Mat rows;  // one row per requested token: a distribution over the point set
    double mean_entropy = 0.0;
};

/// Softmax attention maps for the chosen tokens and head. Encoder stages
/// export the raw token-over-points rows; the decoder stage exports each
/// token's received attention mass over the queries (columns renormalized).
AttentionMapResult attention_maps(const AutoencoderModel& ae, const FieldSnapshot& snapshot,
                                  AttnStage stage, const std::vector<int>& tokens, int head);

/// Mean decoder cross-attention weight received by each token at each query,
/// averaged over bands and heads; Q x M.
Mat decoder_token_mass(const AutoencoderModel& ae, const Mat& z, const Mat& query_grid);

/// Fraction of the perturbation energy sum(delta^2) carried by the top
/// `top_fraction` of queries ranked by the token's attention mass.
double locality_statistic(const Vec& token_mass, const std::vector<Mat>& delta_fields,
                          double top_fraction = 0.2);

struct PerturbationResult {
    std::vector<Mat> delta_fields;  // |u_perturbed - u_base| per source frame
    Vec token_mass;                 // Q entries for the probed token
    double locality = 0.0;
};

/// Replace latent slot `token` of z_frames[0] with the same slot from later
/// frames and decode; quantifies how locally the decoder reacts.
PerturbationResult token_perturbation(const AutoencoderModel& ae,
                                      const std::vector<Mat>& z_frames, int token,
                                      const Mat& query_grid, const std::vector<int>& sources);

struct LatentDump {
    std::vector<Mat> mu, logsig, predicted;
    std::vector<bool> informative;  // per (token, channel), flattened row-major
};

LatentDump latent_dump(const AutoencoderModel& ae, const StepperModel* stepper,
                       const io::TrajectoryDataset& ds, int traj, uint64_t seed);

void write_latent_csv(const std::string& path, const LatentDump& dump);

double mean_row_entropy(const Mat& rows);

}  // namespace aroma::eval
