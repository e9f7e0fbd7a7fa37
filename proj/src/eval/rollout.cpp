#include "aroma/eval/rollout.hpp"

#include <cmath>

namespace aroma::eval {

RolloutResult rollout(const AutoencoderModel& ae, const StepperModel& stepper,
                      const FieldSnapshot& u0, int n_steps, const Mat& query_grid, uint64_t seed,
                      bool parallel_decode) {
    RolloutResult res;
    res.seed = seed;

    FieldSnapshot snap = u0;
    io::normalize_values(snap.values, ae.norm);
    const auto tokens = ae.encoder.encode(ae.params, snap, nn::EncodeMode::eval);

    res.latents.push_back(tokens.mu);
    Rng rng(hash_seed(seed, 0x726f6c6cULL));
    Mat z = tokens.mu;
    for (int m = 0; m < n_steps; ++m) {
        const double t0 = now_seconds();
        bool ok = true;
        try {
            z = stepper.step(z, rng);
        } catch (const Error& e) {
            if (e.kind() == "RefinerNumericalError")
                ok = false;
            else
                throw;
        }
        if (ok && !z.allFinite()) ok = false;
        res.step_ms.push_back((now_seconds() - t0) * 1e3);
        if (!ok) {
            res.truncated = true;
            break;
        }
        res.latents.push_back(z);
    }

    res.fields.assign(res.latents.size(), Mat());
    parallel_for(
        static_cast<int64_t>(res.latents.size()),
        [&](int64_t i) {
            Mat u = ae.decoder.decode(ae.params, res.latents[static_cast<size_t>(i)], query_grid);
            io::denormalize_values(u, ae.norm);
            res.fields[static_cast<size_t>(i)] = std::move(u);
        },
        parallel_decode);
    return res;
}

Mat reconstruct(const AutoencoderModel& ae, const FieldSnapshot& u0, const Mat& query_grid) {
    FieldSnapshot snap = u0;
    io::normalize_values(snap.values, ae.norm);
    const auto tokens = ae.encoder.encode(ae.params, snap, nn::EncodeMode::eval);
    Mat u = ae.decoder.decode(ae.params, tokens.mu, query_grid);
    io::denormalize_values(u, ae.norm);
    return u;
}

EnsembleResult ensemble_uncertainty(const AutoencoderModel& ae, const StepperModel& stepper,
                                    const FieldSnapshot& u0, int n_steps, int n_samples,
                                    const Mat& query_grid, uint64_t seed) {
    if (n_samples < 1) throw Error("ConfigError", "ensemble needs at least one sample");
    std::vector<RolloutResult> rollouts(static_cast<size_t>(n_samples));
    for (int s = 0; s < n_samples; ++s)
        rollouts[static_cast<size_t>(s)] =
            rollout(ae, stepper, u0, n_steps, query_grid, hash_seed(seed, 0x656e73ULL, s));

    size_t steps = rollouts[0].fields.size();
    for (const auto& r : rollouts) steps = std::min(steps, r.fields.size());

    EnsembleResult res;
    res.n_samples = n_samples;
    for (size_t t = 0; t < steps; ++t) {
        Mat mean = Mat::Zero(rollouts[0].fields[t].rows(), rollouts[0].fields[t].cols());
        for (const auto& r : rollouts) mean += r.fields[t];
        mean /= static_cast<double>(n_samples);
        Mat var = Mat::Zero(mean.rows(), mean.cols());
        for (const auto& r : rollouts) {
            const Mat d = r.fields[t] - mean;
            var.array() += d.array().square();
        }
        var /= static_cast<double>(n_samples);
        Mat stdev = var.array().sqrt();
        res.mean_std_per_step.push_back(stdev.mean());
        res.mean.push_back(std::move(mean));
        res.stdev.push_back(std::move(stdev));
    }
    return res;
}

}  // namespace aroma::eval
