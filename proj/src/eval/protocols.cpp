#include "aroma/eval/protocols.hpp"

#include <cmath>

namespace aroma::eval {

namespace {

std::vector<std::pair<int, int>> test_windows(const io::TrajectoryDataset& ds, int window,
                                              int max_items) {
    const auto view = io::slice_subtrajectories(ds, window);
    const auto filtered = io::filter_view(view, ds.split("test"));
    std::vector<std::pair<int, int>> items = filtered.items;
    if (max_items > 0 && static_cast<int>(items.size()) > max_items) {
        std::vector<std::pair<int, int>> trimmed;
        const size_t stride = items.size() / static_cast<size_t>(max_items);
        for (size_t i = 0; i < items.size() && trimmed.size() < static_cast<size_t>(max_items);
             i += std::max<size_t>(1, stride))
            trimmed.push_back(items[i]);
        items = trimmed;
    }
    return items;
}

Trajectory truth_window(const io::TrajectoryDataset& ds, int traj, int offset, int frames) {
    Trajectory out;
    for (int t = 0; t < frames; ++t) out.push_back(ds.frame_values(traj, offset + t));
    return out;
}

}  // namespace

io::json evaluate_burgers(const io::TrajectoryDataset& ds, const AutoencoderModel& ae,
                          const StepperModel* stepper, const BurgersEvalOptions& opt) {
    const auto items = test_windows(ds, opt.window, opt.max_items);
    if (items.empty()) throw Error("ConfigError", "no test windows to evaluate");

    std::vector<Trajectory> recon(items.size()), truth(items.size());
    parallel_for(
        static_cast<int64_t>(items.size()),
        [&](int64_t i) {
            const auto [traj, offset] = items[static_cast<size_t>(i)];
            const Mat grid = ds.grid(traj);
            Trajectory rec;
            for (int t = 0; t < opt.window; ++t)
                rec.push_back(reconstruct(ae, ds.snapshot(traj, offset + t), grid));
            recon[static_cast<size_t>(i)] = std::move(rec);
            truth[static_cast<size_t>(i)] = truth_window(ds, traj, offset, opt.window);
        },
        opt.parallel);
    const auto recon_err = relative_l2(recon, truth);

    io::json summary{{"items", items.size()},
                     {"window", opt.window},
                     {"recon_rel_l2", recon_err.value},
                     {"recon_excluded", recon_err.excluded}};

    if (stepper && opt.with_rollout) {
        std::vector<Trajectory> pred(items.size());
        std::vector<int> truncated(items.size(), 0);
        parallel_for(
            static_cast<int64_t>(items.size()),
            [&](int64_t i) {
                const auto [traj, offset] = items[static_cast<size_t>(i)];
                const auto res =
                    rollout(ae, *stepper, ds.snapshot(traj, offset), opt.window - 1,
                            ds.grid(traj), hash_seed(opt.seed, 0x6275ULL, i),
                            /*parallel_decode=*/false);
                pred[static_cast<size_t>(i)] = res.fields;
                truncated[static_cast<size_t>(i)] = res.truncated ? 1 : 0;
            },
            opt.parallel);
        int n_trunc = 0;
        for (int t : truncated) n_trunc += t;
        // truncated rollouts keep their shorter length and fail the metric shape
        // check; report them separately instead
        std::vector<Trajectory> pred_ok, truth_ok;
        for (size_t i = 0; i < pred.size(); ++i)
            if (!truncated[i]) {
                pred_ok.push_back(pred[i]);
                truth_ok.push_back(truth[i]);
            }
        const auto roll_err = relative_l2(pred_ok, truth_ok);
        summary["relative_l2"] = roll_err.value;
        summary["rollout_excluded"] = roll_err.excluded;
        summary["rollout_truncated"] = n_trunc;
    }
    return summary;
}

io::json evaluate_ns(const io::TrajectoryDataset& ds, const AutoencoderModel& ae,
                     const StepperModel* stepper, const NsEvalOptions& opt) {
    const std::vector<int> test = ds.split("test");
    if (test.empty()) throw Error("ConfigError", "dataset has no test split");
    const int steps = ds.n_time - 1;

    std::vector<Trajectory> recon(test.size()), truth(test.size());
    parallel_for(
        static_cast<int64_t>(test.size()),
        [&](int64_t i) {
            const int traj = test[static_cast<size_t>(i)];
            const Mat grid = ds.grid(traj);
            Trajectory rec;
            for (int t = 0; t < ds.n_time; ++t)
                rec.push_back(reconstruct(ae, ds.snapshot(traj, t), grid));
            recon[static_cast<size_t>(i)] = std::move(rec);
            truth[static_cast<size_t>(i)] = truth_window(ds, traj, 0, ds.n_time);
        },
        opt.parallel);
    const auto recon_err = relative_l2(recon, truth);

    io::json summary{{"items", test.size()},
                     {"horizon", opt.horizon},
                     {"recon_rel_l2", recon_err.value}};

    if (stepper) {
        std::vector<Trajectory> pred(test.size());
        int n_trunc = 0;
        bool finite = true;
        for (size_t i = 0; i < test.size(); ++i) {
            const int traj = test[i];
            const auto res = rollout(ae, *stepper, ds.snapshot(traj, 0), steps, ds.grid(traj),
                                     hash_seed(opt.seed, 0x6e73ULL, i), opt.parallel);
            if (res.truncated) {
                ++n_trunc;
                finite = false;
            }
            Trajectory p = res.fields;
            while (static_cast<int>(p.size()) < ds.n_time)
                p.push_back(Mat::Zero(ds.n_points, ds.channels));
            pred[i] = std::move(p);
            for (const Mat& f : pred[i])
                if (!f.allFinite()) finite = false;
        }
        const auto roll_err = relative_l2(pred, truth);
        summary["relative_l2"] = roll_err.value;
        summary["in_t_mse"] = horizon_mse(pred, truth, Horizon::in_t);
        summary["out_t_mse"] = horizon_mse(pred, truth, Horizon::out_t);
        summary["rollout_truncated"] = n_trunc;
        summary["finite"] = finite;
    }
    return summary;
}

LongRolloutResult long_rollout_correlation(const io::TrajectoryDataset& ds,
                                           const AutoencoderModel& ae,
                                           const StepperModel& stepper,
                                           const LongRolloutOptions& opt) {
    if (opt.t0 + opt.steps >= ds.n_time)
        throw Error("ConfigError", "long rollout would leave the dataset horizon");
    std::vector<int> test = ds.split("test");
    if (opt.max_items > 0 && static_cast<int>(test.size()) > opt.max_items)
        test.resize(static_cast<size_t>(opt.max_items));

    std::vector<Trajectory> pred(test.size()), truth(test.size());
    parallel_for(
        static_cast<int64_t>(test.size()),
        [&](int64_t i) {
            const int traj = test[static_cast<size_t>(i)];
            const auto res = rollout(ae, stepper, ds.snapshot(traj, opt.t0), opt.steps,
                                     ds.grid(traj), hash_seed(opt.seed, 0x6c72ULL, i),
                                     /*parallel_decode=*/false);
            pred[static_cast<size_t>(i)] = res.fields;
            truth[static_cast<size_t>(i)] =
                truth_window(ds, traj, opt.t0, static_cast<int>(res.fields.size()));
        },
        opt.parallel);

    LongRolloutResult out;
    out.corr = correlation_over_time(pred, truth, opt.threshold);
    out.summary = io::json{{"items", test.size()},
                           {"t0", opt.t0},
                           {"steps", opt.steps},
                           {"threshold", opt.threshold},
                           {"high_corr_time", out.corr.high_corr_time}};
    return out;
}

io::json uncertainty_growth(const io::TrajectoryDataset& ds, const AutoencoderModel& ae,
                            const StepperModel& stepper, const UncertaintyOptions& opt,
                            std::vector<EnsembleResult>* details) {
    if (opt.t0 + opt.steps >= ds.n_time)
        throw Error("ConfigError", "rollout would leave the dataset horizon");
    std::vector<int> test = ds.split("test");
    if (opt.max_items > 0 && static_cast<int>(test.size()) > opt.max_items)
        test.resize(static_cast<size_t>(opt.max_items));

    std::vector<double> early, late;
    for (size_t i = 0; i < test.size(); ++i) {
        const auto ens = ensemble_uncertainty(ae, stepper, ds.snapshot(test[i], opt.t0), opt.steps,
                                              opt.n_samples, ds.grid(test[i]),
                                              hash_seed(opt.seed, 0x756eULL, i));
        if (static_cast<int>(ens.mean_std_per_step.size()) > opt.late_step) {
            early.push_back(ens.mean_std_per_step[static_cast<size_t>(opt.early_step)]);
            late.push_back(ens.mean_std_per_step[static_cast<size_t>(opt.late_step)]);
        }
        if (details) details->push_back(ens);
    }
    auto median = [](std::vector<double> v) {
        if (v.empty()) return 0.0;
        std::sort(v.begin(), v.end());
        const size_t n = v.size();
        return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
    };
    int grew = 0;
    for (size_t i = 0; i < early.size(); ++i)
        if (late[i] > early[i]) ++grew;
    return io::json{{"items", early.size()},
                    {"n_samples", opt.n_samples},
                    {"early_step", opt.early_step},
                    {"late_step", opt.late_step},
                    {"median_std_early", median(early)},
                    {"median_std_late", median(late)},
                    {"items_with_growth", grew},
                    {"std_early", early},
                    {"std_late", late}};
}

}  // namespace aroma::eval
