#include "aroma/train/trainer.hpp"

#include "aroma/nn/optim.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>

namespace aroma::train {

io::json TrainConfig::to_json() const {
    return io::json{{"stage", stage},
                    {"epochs", epochs},
                    {"steps_per_epoch", steps_per_epoch},
                    {"batch_size", batch_size},
                    {"lr_max", lr_max},
                    {"lr_min", lr_min},
                    {"schedule", schedule},
                    {"kl_weight", kl_weight},
                    {"kl_reduction", kl_reduction},
                    {"dropout_sequence", dropout_sequence},
                    {"seed", seed},
                    {"regularization", regularization},
                    {"weight_decay", weight_decay},
                    {"grad_clip", grad_clip},
                    {"val_fraction", val_fraction},
                    {"val_max_items", val_max_items},
                    {"checkpoint_every", checkpoint_every},
                    {"max_query_points", max_query_points},
                    {"augment_shift", augment_shift},
                    {"window", window},
                    {"horizon", horizon},
                    {"stepper", stepper},
                    {"parallel", parallel}};
}

TrainConfig TrainConfig::from_json(const io::json& j) {
    TrainConfig c;
    c.stage = j.value("stage", c.stage);
    c.epochs = j.value("epochs", c.epochs);
    c.steps_per_epoch = j.value("steps_per_epoch", c.steps_per_epoch);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.lr_max = j.value("lr_max", c.lr_max);
    c.lr_min = j.value("lr_min", c.lr_min);
    c.schedule = j.value("schedule", c.schedule);
    c.kl_weight = j.value("kl_weight", c.kl_weight);
    c.kl_reduction = j.value("kl_reduction", c.kl_reduction);
    c.dropout_sequence = j.value("dropout_sequence", c.dropout_sequence);
    c.seed = j.value("seed", c.seed);
    c.regularization = j.value("regularization", c.regularization);
    c.weight_decay = j.value("weight_decay", c.weight_decay);
    c.grad_clip = j.value("grad_clip", c.grad_clip);
    c.val_fraction = j.value("val_fraction", c.val_fraction);
    c.val_max_items = j.value("val_max_items", c.val_max_items);
    c.checkpoint_every = j.value("checkpoint_every", c.checkpoint_every);
    c.max_query_points = j.value("max_query_points", c.max_query_points);
    c.augment_shift = j.value("augment_shift", c.augment_shift);
    c.window = j.value("window", c.window);
    c.horizon = j.value("horizon", c.horizon);
    c.stepper = j.value("stepper", c.stepper);
    c.parallel = j.value("parallel", c.parallel);
    return c;
}

double kl_divergence(const Mat& mu, const Mat& logsig) {
    const auto var = (2.0 * logsig.array()).exp();
    return 0.5 * (mu.array().square() + var - 1.0 - 2.0 * logsig.array()).sum();
}

void write_loss_csv(const std::string& path, const std::vector<EpochRow>& curve,
                    const std::string& val_name) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw Error("IoError", "cannot open " + path);
    out << "epoch,lr,train_loss,recon,kl," << val_name << ",seconds\n";
    for (const auto& r : curve)
        out << r.epoch << "," << r.lr << "," << r.train_loss << "," << r.recon << "," << r.kl
            << "," << r.val_metric << "," << r.seconds << "\n";
}

namespace {

struct FrameRef {
    int traj;
    int t;
};

struct SplitPlan {
    std::vector<int> train_trajs, val_trajs;
    std::vector<FrameRef> train_frames, val_frames;
    std::vector<FrameRef> train_pair_starts, val_pair_starts;  // t and t+1 are usable
};

void validate_train_config(const TrainConfig& cfg) {
    if (!(cfg.lr_max > cfg.lr_min) || !(cfg.lr_min > 0.0))
        throw Error("ConfigError", "learning rates must satisfy lr_max > lr_min > 0");
    if (cfg.kl_weight < 0.0) throw Error("ConfigError", "kl_weight must be >= 0");
    if (cfg.epochs < 1 || cfg.batch_size < 1)
        throw Error("ConfigError", "epochs and batch_size must be positive");
}

SplitPlan make_split_plan(const io::TrajectoryDataset& ds, const TrainConfig& cfg) {
    SplitPlan plan;
    std::vector<int> train = ds.split("train");
    const int n_val = std::max(1, static_cast<int>(std::lround(cfg.val_fraction * train.size())));
    if (static_cast<size_t>(n_val) >= train.size())
        throw Error("ConfigError", "validation split would consume the whole training set");
    plan.val_trajs.assign(train.end() - n_val, train.end());
    plan.train_trajs.assign(train.begin(), train.end() - n_val);

    const int window = cfg.window > 0 ? cfg.window : ds.n_time;
    if (window > ds.n_time) throw Error("InvalidWindow", "training window exceeds n_time");
    const int horizon = cfg.horizon > 0 ? std::min(cfg.horizon, window) : window;
    const int per_traj = ds.n_time / window;

    auto fill = [&](const std::vector<int>& trajs, std::vector<FrameRef>& frames,
                    std::vector<FrameRef>& pair_starts) {
        for (int traj : trajs)
            for (int w = 0; w < per_traj; ++w) {
                const int off = w * window;
                for (int t = 0; t < horizon; ++t) {
                    frames.push_back({traj, off + t});
                    if (t + 1 < horizon) pair_starts.push_back({traj, off + t});
                }
            }
    };
    fill(plan.train_trajs, plan.train_frames, plan.train_pair_starts);
    fill(plan.val_trajs, plan.val_frames, plan.val_pair_starts);
    if (plan.train_frames.empty()) throw Error("ConfigError", "no usable training frames");
    return plan;
}

FieldSnapshot normalized_snapshot(const io::TrajectoryDataset& ds, const io::NormStats& stats,
                                  int traj, int t) {
    FieldSnapshot snap = ds.snapshot(traj, t);
    io::normalize_values(snap.values, stats);
    return snap;
}

/// Roll values around the torus (full regular grids only): the field family
/// is shift-invariant, the coordinates stay put.
void periodic_shift(FieldSnapshot& snap, int coord_dim, Rng& rng) {
    const Eigen::Index n = snap.values.rows();
    Mat rolled(n, snap.values.cols());
    if (coord_dim == 1) {
        const Eigen::Index s = rng.uniform_int(n);
        for (Eigen::Index i = 0; i < n; ++i) rolled.row(i) = snap.values.row((i + s) % n);
    } else {
        const Eigen::Index side = static_cast<Eigen::Index>(std::lround(std::sqrt(static_cast<double>(n))));
        if (side * side != n) return;
        const Eigen::Index sx = rng.uniform_int(side), sy = rng.uniform_int(side);
        for (Eigen::Index j = 0; j < side; ++j)
            for (Eigen::Index i = 0; i < side; ++i)
                rolled.row(j * side + i) =
                    snap.values.row(((j + sy) % side) * side + (i + sx) % side);
    }
    snap.values = std::move(rolled);
}

/// Deterministic subsample of query rows (loss estimator on large grids).
void subsample_queries(Mat& coords, Mat& values, int max_points, Rng& rng) {
    const Eigen::Index n = coords.rows();
    if (max_points <= 0 || n <= max_points) return;
    std::vector<Eigen::Index> idx(static_cast<size_t>(n));
    std::iota(idx.begin(), idx.end(), 0);
    for (int i = 0; i < max_points; ++i) {
        const Eigen::Index j = i + static_cast<Eigen::Index>(rng.uniform_int(n - i));
        std::swap(idx[static_cast<size_t>(i)], idx[static_cast<size_t>(j)]);
    }
    Mat c(max_points, coords.cols()), v(max_points, values.cols());
    for (int i = 0; i < max_points; ++i) {
        c.row(i) = coords.row(idx[static_cast<size_t>(i)]);
        v.row(i) = values.row(idx[static_cast<size_t>(i)]);
    }
    coords = std::move(c);
    values = std::move(v);
}

double validate_autoencoder(const io::TrajectoryDataset& ds, const AutoencoderModel& model,
                            const std::vector<FrameRef>& frames, int max_items, bool parallel) {
    const int n = std::min<int>(max_items, static_cast<int>(frames.size()));
    if (n == 0) return 0.0;
    const size_t stride = std::max<size_t>(1, frames.size() / static_cast<size_t>(n));
    std::vector<FrameRef> chosen;
    for (size_t i = 0; i < frames.size() && chosen.size() < static_cast<size_t>(n); i += stride)
        chosen.push_back(frames[i]);
    std::vector<double> errs(chosen.size(), 0.0);
    parallel_for(
        static_cast<int64_t>(chosen.size()),
        [&](int64_t i) {
            const FrameRef ref = chosen[static_cast<size_t>(i)];
            FieldSnapshot snap = normalized_snapshot(ds, model.norm, ref.traj, ref.t);
            const auto tokens = model.encoder.encode(model.params, snap, nn::EncodeMode::eval);
            Mat uhat = model.decoder.decode(model.params, tokens.z, snap.coords);
            io::denormalize_values(uhat, model.norm);
            Mat truth = ds.frame_values(ref.traj, ref.t);
            const double denom = truth.norm();
            errs[static_cast<size_t>(i)] = denom > 0.0 ? (uhat - truth).norm() / denom : 0.0;
        },
        parallel);
    double acc = 0.0;
    for (double e : errs) acc += e;
    return acc / static_cast<double>(errs.size());
}

}  // namespace

TrainResult train_autoencoder(const io::TrajectoryDataset& ds, AutoencoderModel& model,
                              const TrainConfig& cfg, const std::string& out_dir) {
    validate_train_config(cfg);
    const SplitPlan plan = make_split_plan(ds, cfg);
    if (!out_dir.empty()) std::filesystem::create_directories(out_dir);
    model.norm = io::compute_norm_stats(ds, ds.split("train"));

    const bool vae = cfg.regularization == "vae";
    const double kl_scale =
        cfg.kl_reduction == "sum"
            ? 1.0
            : 1.0 / static_cast<double>(model.spec.num_latents * model.spec.latent_dim);
    nn::AdamW opt(model.params, vae ? 0.0 : cfg.weight_decay);

    const int nthreads = std::max(1, max_threads());
    std::vector<nn::GradBuf> grads(static_cast<size_t>(nthreads), nn::GradBuf(model.params));
    nn::GradBuf total(model.params);

    const int64_t frames_total = static_cast<int64_t>(plan.train_frames.size());
    const int steps =
        cfg.steps_per_epoch > 0
            ? cfg.steps_per_epoch
            : static_cast<int>((frames_total + cfg.batch_size - 1) / cfg.batch_size);

    TrainResult result;
    std::vector<double> best_params = model.params.flat();
    double best_val = std::numeric_limits<double>::infinity();

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        const double lr = nn::cosine_lr(epoch, cfg.epochs, cfg.lr_max, cfg.lr_min);
        const double t_start = now_seconds();
        double epoch_loss = 0.0, epoch_recon = 0.0, epoch_kl = 0.0;
        bool bad = false;

        for (int step = 0; step < steps && !bad; ++step) {
            Rng pick(hash_seed(cfg.seed, 0x62617463ULL, static_cast<uint64_t>(epoch),
                               static_cast<uint64_t>(step)));
            std::vector<FrameRef> batch(static_cast<size_t>(cfg.batch_size));
            for (int b = 0; b < cfg.batch_size; ++b)
                batch[static_cast<size_t>(b)] =
                    plan.train_frames[static_cast<size_t>(pick.uniform_int(frames_total))];

            for (auto& g : grads) g.zero();
            std::vector<double> recon_terms(batch.size(), 0.0), kl_terms(batch.size(), 0.0);

            parallel_for_threaded(
                static_cast<int64_t>(batch.size()),
                [&](int64_t b, int tid) {
                    const FrameRef ref = batch[static_cast<size_t>(b)];
                    Rng rng_s(hash_seed(cfg.seed, static_cast<uint64_t>(epoch) * 1000003ULL + step,
                                        static_cast<uint64_t>(b), 0x73616d70ULL));
                    FieldSnapshot snap = normalized_snapshot(ds, model.norm, ref.traj, ref.t);
                    if (cfg.augment_shift)
                        periodic_shift(snap, model.spec.coord_dim, rng_s);

                    FieldSnapshot enc_in = cfg.dropout_sequence > 0.0
                                               ? nn::sequence_dropout(snap, cfg.dropout_sequence, rng_s)
                                               : snap;

                    nn::Encoder::Cache ec;
                    const auto mode = vae ? nn::EncodeMode::train : nn::EncodeMode::eval;
                    const auto tokens = model.encoder.encode(model.params, enc_in, mode, &rng_s, &ec);

                    Mat qcoords = snap.coords;
                    Mat target = snap.values;
                    subsample_queries(qcoords, target, cfg.max_query_points, rng_s);

                    nn::Decoder::Cache dc;
                    const Mat uhat = model.decoder.decode(model.params, tokens.z, qcoords, &dc);
                    const Mat diff = uhat - target;
                    const double denom = static_cast<double>(diff.size());
                    recon_terms[static_cast<size_t>(b)] = diff.squaredNorm() / denom;

                    const Mat du = (2.0 / denom) * diff;
                    const Mat dz = model.decoder.backward(model.params, dc, du, grads[static_cast<size_t>(tid)]);

                    Mat dmu = Mat::Zero(tokens.mu.rows(), tokens.mu.cols());
                    Mat dlogsig = Mat::Zero(tokens.mu.rows(), tokens.mu.cols());
                    if (vae) {
                        kl_terms[static_cast<size_t>(b)] =
                            kl_scale * kl_divergence(tokens.mu, tokens.logsig);
                        dmu = cfg.kl_weight * kl_scale * tokens.mu;
                        dlogsig = cfg.kl_weight * kl_scale *
                                  ((2.0 * tokens.logsig.array()).exp() - 1.0).matrix();
                    }
                    model.encoder.backward(model.params, ec, dmu, dlogsig, dz,
                                           grads[static_cast<size_t>(tid)]);
                },
                cfg.parallel);

            total.zero();
            for (auto& g : grads) total.add(g);
            total.scale(1.0 / cfg.batch_size);
            nn::clip_grad_norm(total, cfg.grad_clip);

            double loss = 0.0, recon = 0.0, klsum = 0.0;
            for (size_t b = 0; b < batch.size(); ++b) {
                recon += recon_terms[b];
                klsum += kl_terms[b];
            }
            recon /= static_cast<double>(batch.size());
            klsum /= static_cast<double>(batch.size());
            loss = recon + cfg.kl_weight * klsum;
            if (!std::isfinite(loss)) {
                bad = true;
                break;
            }
            opt.step(model.params, total, lr);
            epoch_loss += loss;
            epoch_recon += recon;
            epoch_kl += klsum;
        }

        if (bad) {
            std::copy(best_params.begin(), best_params.end(), model.params.flat().begin());
            result.aborted = true;
            break;
        }

        const double val = validate_autoencoder(ds, model, plan.val_frames, cfg.val_max_items,
                                                cfg.parallel);
        EpochRow row;
        row.epoch = epoch;
        row.lr = lr;
        row.train_loss = epoch_loss / steps;
        row.recon = epoch_recon / steps;
        row.kl = epoch_kl / steps;
        row.val_metric = val;
        row.seconds = now_seconds() - t_start;
        result.curve.push_back(row);

        if (val < best_val) {
            best_val = val;
            best_params = model.params.flat();
            result.best_epoch = epoch;
        }
        const bool last = epoch == cfg.epochs - 1;
        if (!out_dir.empty() && (last || (cfg.checkpoint_every > 0 &&
                                          (epoch + 1) % cfg.checkpoint_every == 0))) {
            write_loss_csv(out_dir + "/loss.csv", result.curve, "val_rel_l2");
        }
    }

    std::copy(best_params.begin(), best_params.end(), model.params.flat().begin());
    result.best_val = best_val;
    if (!out_dir.empty()) {
        std::filesystem::create_directories(out_dir);
        write_loss_csv(out_dir + "/loss.csv", result.curve, "val_rel_l2");
        const std::string ckpt = out_dir + "/checkpoint";
        model.save(ckpt, io::json{{"train", cfg.to_json()}});
        result.checkpoint_dir = ckpt;
    }
    return result;
}

namespace {

/// Posterior statistics for every usable frame, encoded once with the frozen
/// encoder (fresh z samples are drawn from them at each step).
struct LatentBank {
    int m = 0, h = 0;
    std::vector<float> mu, logsig;  // [frame, M, h]
    std::vector<FrameRef> refs;
    std::vector<int64_t> lookup;  // (traj * n_time + t) -> bank row

    int64_t row(int traj, int t, int n_time) const {
        return lookup[static_cast<size_t>(traj) * n_time + t];
    }

    Mat mu_at(int64_t r) const { return unpack(mu, r); }
    Mat logsig_at(int64_t r) const { return unpack(logsig, r); }

private:
    Mat unpack(const std::vector<float>& buf, int64_t r) const {
        Mat out(m, h);
        const float* p = buf.data() + r * m * h;
        for (int i = 0; i < m; ++i)
            for (int j = 0; j < h; ++j) out(i, j) = p[static_cast<int64_t>(i) * h + j];
        return out;
    }
};

LatentBank encode_bank(const io::TrajectoryDataset& ds, const AutoencoderModel& ae,
                       const std::vector<FrameRef>& frames, bool parallel) {
    LatentBank bank;
    bank.m = ae.spec.num_latents;
    bank.h = ae.spec.latent_dim;
    bank.refs = frames;
    bank.lookup.assign(static_cast<size_t>(ds.n_traj) * ds.n_time, -1);
    bank.mu.assign(frames.size() * static_cast<size_t>(bank.m) * bank.h, 0.0f);
    bank.logsig.assign(frames.size() * static_cast<size_t>(bank.m) * bank.h, 0.0f);
    for (size_t i = 0; i < frames.size(); ++i)
        bank.lookup[static_cast<size_t>(frames[i].traj) * ds.n_time + frames[i].t] =
            static_cast<int64_t>(i);
    parallel_for(
        static_cast<int64_t>(frames.size()),
        [&](int64_t i) {
            const FrameRef ref = frames[static_cast<size_t>(i)];
            FieldSnapshot snap = normalized_snapshot(ds, ae.norm, ref.traj, ref.t);
            const auto tokens = ae.encoder.encode(ae.params, snap, nn::EncodeMode::eval);
            float* mp = bank.mu.data() + i * bank.m * bank.h;
            float* sp = bank.logsig.data() + i * bank.m * bank.h;
            for (int r = 0; r < bank.m; ++r)
                for (int c = 0; c < bank.h; ++c) {
                    mp[static_cast<int64_t>(r) * bank.h + c] = static_cast<float>(tokens.mu(r, c));
                    sp[static_cast<int64_t>(r) * bank.h + c] =
                        static_cast<float>(tokens.logsig(r, c));
                }
        },
        parallel);
    return bank;
}

Mat sample_latent(const LatentBank& bank, int64_t row, Rng& rng) {
    Mat z = bank.mu_at(row);
    const Mat logsig = bank.logsig_at(row);
    for (Eigen::Index i = 0; i < z.rows(); ++i)
        for (Eigen::Index j = 0; j < z.cols(); ++j)
            z(i, j) += std::exp(logsig(i, j)) * rng.normal();
    return z;
}

}  // namespace

TrainResult train_refiner(const io::TrajectoryDataset& ds, const AutoencoderModel& autoencoder,
                          StepperModel& stepper, const TrainConfig& cfg,
                          const std::string& out_dir) {
    validate_train_config(cfg);
    const SplitPlan plan = make_split_plan(ds, cfg);
    if (!out_dir.empty()) std::filesystem::create_directories(out_dir);
    if (plan.train_pair_starts.empty())
        throw Error("NoPairsAvailable", "no training pairs inside the horizon");

    // all frames reachable as pair members
    std::vector<FrameRef> all_frames = plan.train_frames;
    all_frames.insert(all_frames.end(), plan.val_frames.begin(), plan.val_frames.end());
    const LatentBank bank = encode_bank(ds, autoencoder, all_frames, cfg.parallel);

    // standardize the latent space so the noise schedule sees unit-scale data
    {
        double sq = 0.0;
        for (float v : bank.mu) sq += static_cast<double>(v) * v;
        stepper.latent_scale = std::max(1e-8, std::sqrt(sq / static_cast<double>(bank.mu.size())));
    }
    const double ls = stepper.latent_scale;

    nn::AdamW opt(stepper.params, 0.0);
    const int nthreads = std::max(1, max_threads());
    std::vector<nn::GradBuf> grads(static_cast<size_t>(nthreads), nn::GradBuf(stepper.params));
    nn::GradBuf total(stepper.params);

    const int64_t pairs_total = static_cast<int64_t>(plan.train_pair_starts.size());
    const int steps =
        cfg.steps_per_epoch > 0
            ? cfg.steps_per_epoch
            : static_cast<int>((pairs_total + cfg.batch_size - 1) / cfg.batch_size);
    const int K = stepper.schedule.steps;

    TrainResult result;
    std::vector<double> best_params = stepper.params.flat();
    double best_val = std::numeric_limits<double>::infinity();

    const int n_val_pairs =
        std::min<int>(cfg.val_max_items, static_cast<int>(plan.val_pair_starts.size()));

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        const double lr = nn::cosine_lr(epoch, cfg.epochs, cfg.lr_max, cfg.lr_min);
        const double t_start = now_seconds();
        double epoch_loss = 0.0;
        bool bad = false;

        for (int step = 0; step < steps && !bad; ++step) {
            Rng pick(hash_seed(cfg.seed, 0x70616972ULL, static_cast<uint64_t>(epoch),
                               static_cast<uint64_t>(step)));
            std::vector<FrameRef> batch(static_cast<size_t>(cfg.batch_size));
            for (int b = 0; b < cfg.batch_size; ++b)
                batch[static_cast<size_t>(b)] =
                    plan.train_pair_starts[static_cast<size_t>(pick.uniform_int(pairs_total))];

            for (auto& g : grads) g.zero();
            std::vector<double> losses(batch.size(), 0.0);

            parallel_for_threaded(
                static_cast<int64_t>(batch.size()),
                [&](int64_t b, int tid) {
                    const FrameRef ref = batch[static_cast<size_t>(b)];
                    Rng rng_s(hash_seed(cfg.seed, static_cast<uint64_t>(epoch) * 1000003ULL + step,
                                        static_cast<uint64_t>(b), 0x72656673ULL));
                    const int64_t r_t = bank.row(ref.traj, ref.t, ds.n_time);
                    const int64_t r_n = bank.row(ref.traj, ref.t + 1, ds.n_time);
                    nn::GradBuf& G = grads[static_cast<size_t>(tid)];

                    if (stepper.variant == StepperVariant::diffusion) {
                        const Mat z_t = sample_latent(bank, r_t, rng_s) / ls;
                        const Mat z_next = sample_latent(bank, r_n, rng_s) / ls;
                        const int k = 1 + static_cast<int>(rng_s.uniform_int(K));
                        Mat eps(z_next.rows(), z_next.cols());
                        rng_s.fill_normal(eps);
                        const auto target = nn::vpredict_target(z_next, eps, stepper.schedule, k);
                        nn::Refiner::Cache rc;
                        const Mat vhat =
                            stepper.refiner.forward_v(stepper.params, z_t, target.z_k, k, &rc);
                        const Mat diff = vhat - target.v;
                        losses[static_cast<size_t>(b)] =
                            diff.squaredNorm() / static_cast<double>(diff.size());
                        const Mat dv = (2.0 / static_cast<double>(diff.size())) * diff;
                        stepper.refiner.backward(stepper.params, rc, dv, G);
                    } else {
                        const Mat mu_t = bank.mu_at(r_t) / ls;
                        const Mat mu_next = bank.mu_at(r_n) / ls;
                        if (stepper.variant == StepperVariant::deterministic) {
                            nn::Refiner::Cache rc;
                            const Mat pred =
                                stepper.refiner.deterministic_step(stepper.params, mu_t, &rc);
                            const Mat diff = pred - mu_next;
                            losses[static_cast<size_t>(b)] =
                                diff.squaredNorm() / static_cast<double>(diff.size());
                            const Mat dp = (2.0 / static_cast<double>(diff.size())) * diff;
                            stepper.refiner.backward(stepper.params, rc, dp, G);
                        } else {
                            nn::MlpStepper::Cache mc;
                            const Mat pred = stepper.mlp.forward(stepper.params, mu_t, &mc);
                            const Mat diff = pred - mu_next;
                            losses[static_cast<size_t>(b)] =
                                diff.squaredNorm() / static_cast<double>(diff.size());
                            const Mat dp = (2.0 / static_cast<double>(diff.size())) * diff;
                            stepper.mlp.backward(stepper.params, mc, dp, G);
                        }
                    }
                },
                cfg.parallel);

            total.zero();
            for (auto& g : grads) total.add(g);
            total.scale(1.0 / cfg.batch_size);
            nn::clip_grad_norm(total, cfg.grad_clip);

            double loss = 0.0;
            for (double l : losses) loss += l;
            loss /= static_cast<double>(losses.size());
            if (!std::isfinite(loss)) {
                bad = true;
                break;
            }
            opt.step(stepper.params, total, lr);
            epoch_loss += loss;
        }

        if (bad) {
            std::copy(best_params.begin(), best_params.end(), stepper.params.flat().begin());
            result.aborted = true;
            break;
        }

        // one-step latent MSE on the validation pairs
        double val = 0.0;
        if (n_val_pairs > 0) {
            std::vector<double> errs(static_cast<size_t>(n_val_pairs), 0.0);
            parallel_for(
                n_val_pairs,
                [&](int64_t i) {
                    const FrameRef ref = plan.val_pair_starts[static_cast<size_t>(i)];
                    const int64_t r_t = bank.row(ref.traj, ref.t, ds.n_time);
                    const int64_t r_n = bank.row(ref.traj, ref.t + 1, ds.n_time);
                    const Mat mu_t = bank.mu_at(r_t);
                    const Mat mu_next = bank.mu_at(r_n);
                    Rng rng_v(hash_seed(cfg.seed, 0x76616cULL, static_cast<uint64_t>(i)));
                    const Mat pred = stepper.step(mu_t, rng_v);  // standardizes internally
                    errs[static_cast<size_t>(i)] =
                        (pred - mu_next).squaredNorm() / static_cast<double>(mu_next.size());
                },
                cfg.parallel);
            for (double e : errs) val += e;
            val /= static_cast<double>(errs.size());
        }

        EpochRow row;
        row.epoch = epoch;
        row.lr = lr;
        row.train_loss = epoch_loss / steps;
        row.val_metric = val;
        row.seconds = now_seconds() - t_start;
        result.curve.push_back(row);

        if (val < best_val) {
            best_val = val;
            best_params = stepper.params.flat();
            result.best_epoch = epoch;
        }
        if (!out_dir.empty() && cfg.checkpoint_every > 0 && (epoch + 1) % cfg.checkpoint_every == 0)
            write_loss_csv(out_dir + "/loss.csv", result.curve, "val_latent_mse");
    }

    std::copy(best_params.begin(), best_params.end(), stepper.params.flat().begin());
    result.best_val = best_val;
    if (!out_dir.empty()) {
        std::filesystem::create_directories(out_dir);
        write_loss_csv(out_dir + "/loss.csv", result.curve, "val_latent_mse");
        const std::string ckpt = out_dir + "/checkpoint";
        PipelineModel pipeline{autoencoder, stepper};
        pipeline.save(ckpt, io::json{{"train", cfg.to_json()}});
        result.checkpoint_dir = ckpt;
    }
    return result;
}

}  // namespace aroma::train
