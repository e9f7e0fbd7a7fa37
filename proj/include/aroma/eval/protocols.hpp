#pragma once

#include "aroma/eval/metrics.hpp"
#include "aroma/eval/rollout.hpp"
#include "aroma/io/dataset.hpp"

namespace aroma::eval {

struct BurgersEvalOptions {
    int window = 50;
    int max_items = 0;  // 0 = every test window
    uint64_t seed = 0;
    bool with_rollout = true;
    bool parallel = true;
};

/// Window-level reconstruction and autoregressive rollout errors on the test
/// split; windows are independent items.
io::json evaluate_burgers(const io::TrajectoryDataset& ds, const AutoencoderModel& ae,
                          const StepperModel* stepper, const BurgersEvalOptions& opt);

struct NsEvalOptions {
    int horizon = 20;  // In-t length; Out-t is the remainder
    uint64_t seed = 0;
    bool parallel = true;
};

/// Full-trajectory rollout from each test initial condition on its own grid;
/// In-t / Out-t MSE on raw fields.
io::json evaluate_ns(const io::TrajectoryDataset& ds, const AutoencoderModel& ae,
                     const StepperModel* stepper, const NsEvalOptions& opt);

struct LongRolloutOptions {
    int t0 = 49;
    int steps = 200;
    int max_items = 16;
    uint64_t seed = 0;
    double threshold = 0.8;
    bool parallel = true;
};

struct LongRolloutResult {
    CorrelationResult corr;
    io::json summary;
};

LongRolloutResult long_rollout_correlation(const io::TrajectoryDataset& ds,
                                           const AutoencoderModel& ae,
                                           const StepperModel& stepper,
                                           const LongRolloutOptions& opt);

struct UncertaintyOptions {
    int t0 = 49;
    int steps = 200;
    int n_samples = 8;
    int max_items = 8;
    int early_step = 10;
    int late_step = 150;
    uint64_t seed = 0;
};

/// Ensemble spread growth along long rollouts; reports per-item mean std at
/// the probe steps and their medians.
io::json uncertainty_growth(const io::TrajectoryDataset& ds, const AutoencoderModel& ae,
                            const StepperModel& stepper, const UncertaintyOptions& opt,
                            std::vector<EnsembleResult>* details = nullptr);

}  // namespace aroma::eval
