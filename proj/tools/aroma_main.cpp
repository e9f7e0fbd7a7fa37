#include "aroma/eval/analysis.hpp"
#include "aroma/eval/protocols.hpp"
#include "aroma/model.hpp"
#include "aroma/plot.hpp"
#include "aroma/sim/burgers.hpp"
#include "aroma/sim/grid.hpp"
#include "aroma/sim/vorticity.hpp"
#include "aroma/train/trainer.hpp"

#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>

namespace fs = std::filesystem;
using aroma::FieldSnapshot;
using aroma::Mat;
using aroma::io::json;

#ifndef AROMA_VERSION
#define AROMA_VERSION "dev"
#endif

namespace {

json parse_override_value(const std::string& text) {
    try {
        return json::parse(text);
    } catch (const json::exception&) {
        return json(text);  // bare strings are fine unquoted
    }
}

void apply_override(json& config, const std::string& spec) {
    const auto eq = spec.find('=');
    if (eq == std::string::npos)
        throw aroma::Error("ConfigError", "--set expects key=value, got '" + spec + "'");
    const std::string path = spec.substr(0, eq);
    const json value = parse_override_value(spec.substr(eq + 1));
    json* node = &config;
    size_t begin = 0;
    while (true) {
        const size_t dot = path.find('.', begin);
        const std::string key = path.substr(begin, dot == std::string::npos ? dot : dot - begin);
        if (key.empty()) throw aroma::Error("ConfigError", "empty key in --set path '" + path + "'");
        if (dot == std::string::npos) {
            (*node)[key] = value;
            return;
        }
        node = &(*node)[key];
        begin = dot + 1;
    }
}

json load_config(const std::string& path, const std::vector<std::string>& overrides) {
    json config = path.empty() ? json::object() : aroma::io::read_json(path);
    for (const auto& o : overrides) apply_override(config, o);
    return config;
}

uint64_t resolve_seed(const json& config) {
    if (config.contains("seed")) return config.at("seed").get<uint64_t>();
    if (const char* env = std::getenv("AROMA_LAB_SEED")) return std::strtoull(env, nullptr, 10);
    return 0;
}

struct RunContext {
    std::string command;
    std::vector<std::string> argv;
    json config;
    uint64_t seed = 0;
    json inputs = json::object();
    std::string out_dir;
    double t_start = aroma::now_seconds();
};

void write_run_manifest(const RunContext& ctx) {
    if (ctx.out_dir.empty()) return;
    fs::create_directories(ctx.out_dir);
    aroma::io::write_json_atomic(ctx.out_dir + "/run_manifest.json",
                                 json{{"command", ctx.command},
                                      {"argv", ctx.argv},
                                      {"config", ctx.config},
                                      {"seed", ctx.seed},
                                      {"inputs", ctx.inputs},
                                      {"output", ctx.out_dir},
                                      {"version", AROMA_VERSION},
                                      {"wall_seconds", aroma::now_seconds() - ctx.t_start}});
}

aroma::ModelSpec model_spec_for(const json& config, const aroma::io::TrajectoryDataset& ds) {
    const std::string equation = ds.manifest.at("equation").get<std::string>();
    json merged = aroma::ModelSpec::preset(equation == "burgers" ? "burgers" : "ns").to_json();
    if (config.contains("model")) merged.update(config.at("model"));
    merged["coord_dim"] = ds.coord_dim;
    merged["channels"] = ds.channels;
    return aroma::ModelSpec::from_json(merged);
}

int run_generate_data(RunContext& ctx, const std::string& equation, const std::string& out) {
    json& config = ctx.config;
    const uint64_t seed = ctx.seed;
    const int n_train = config.value("n_train", 8);
    const int n_test = config.value("n_test", 2);
    const int n_traj = n_train + n_test;
    config["seed"] = seed;

    aroma::io::TrajectoryDataset ds;
    if (equation == "burgers") {
        auto cfg = aroma::sim::BurgersConfig::from_json(config);
        cfg.seed = seed;
        ds = aroma::sim::solve_burgers(cfg, n_traj);
    } else if (equation == "ns2d") {
        auto cfg = aroma::sim::Vorticity2DConfig::from_json(config);
        cfg.seed = seed;
        ds = aroma::sim::solve_vorticity2d(cfg, n_traj);
        const double pi = config.value("pi", 1.0);
        if (pi < 1.0) {
            const std::vector<int> res{cfg.n_space, cfg.n_space};
            const auto probe = aroma::sim::subsample_grid(res, pi, aroma::hash_seed(seed, 0x67ULL, 0));
            const int n_keep = static_cast<int>(probe.n_points());
            auto sub = aroma::io::TrajectoryDataset::create("ns2d", ds.manifest.at("config"),
                                                            n_traj, cfg.n_time, n_keep, 1, 2);
            sub.times = ds.times;
            sub.manifest["config"]["pi"] = pi;
            for (int traj = 0; traj < n_traj; ++traj) {
                const auto grid =
                    aroma::sim::subsample_grid(res, pi, aroma::hash_seed(seed, 0x67ULL, traj));
                float* cdst = sub.coords.data() + static_cast<int64_t>(traj) * n_keep * 2;
                for (int i = 0; i < n_keep; ++i) {
                    cdst[2 * i] = static_cast<float>(grid.coords(i, 0));
                    cdst[2 * i + 1] = static_cast<float>(grid.coords(i, 1));
                }
                for (int t = 0; t < cfg.n_time; ++t) {
                    const float* src = ds.frame_ptr(traj, t);
                    float* dst = sub.frame_ptr(traj, t);
                    for (int i = 0; i < n_keep; ++i) dst[i] = src[grid.indices[static_cast<size_t>(i)]];
                }
            }
            ds = std::move(sub);
        }
    } else {
        throw aroma::Error("ConfigError", "unknown equation '" + equation + "'");
    }

    std::vector<int> train(n_train), test(n_test);
    std::iota(train.begin(), train.end(), 0);
    std::iota(test.begin(), test.end(), n_train);
    ds.set_split("train", train);
    ds.set_split("test", test);
    ds.save(out);
    std::cout << "wrote " << out << ": " << n_traj << " trajectories, " << ds.n_time
              << " frames, " << ds.n_points << " points\n";
    return 0;
}

int run_train_autoencoder(RunContext& ctx, const std::string& data, const std::string& out) {
    auto ds = aroma::io::TrajectoryDataset::load(data);
    const auto spec = model_spec_for(ctx.config, ds);
    auto train_cfg = aroma::train::TrainConfig::from_json(ctx.config.value("train", json::object()));
    train_cfg.stage = "autoencoder";
    train_cfg.seed = ctx.seed;
    if (!ctx.config.value("train", json::object()).contains("kl_weight"))
        train_cfg.kl_weight = spec.kl_weight;
    if (ctx.config.value("paper_scale", false)) train_cfg.epochs = 5000;
    ctx.config["model"] = spec.to_json();
    ctx.config["train"] = train_cfg.to_json();

    auto model = aroma::AutoencoderModel::build(spec, ctx.seed);
    if (ctx.config.contains("init_from")) {
        const std::string init = ctx.config.at("init_from");
        aroma::io::CheckpointArchive::load_into(init, {&model.params});
        ctx.inputs["init_from"] = init;
    }
    const auto result = aroma::train::train_autoencoder(ds, model, train_cfg, out);
    std::cout << "best val rel-L2 " << result.best_val << " at epoch " << result.best_epoch
              << (result.aborted ? " (aborted on non-finite loss)" : "") << "\n";
    return result.aborted ? 1 : 0;
}

int run_train_refiner(RunContext& ctx, const std::string& data, const std::string& out,
                      const std::string& autoencoder_path) {
    auto ds = aroma::io::TrajectoryDataset::load(data);
    std::string ae_path = autoencoder_path;
    if (ae_path.empty()) ae_path = ctx.config.value("autoencoder", "");
    if (ae_path.empty())
        throw aroma::Error("DependencyError",
                           "train-refiner needs --autoencoder or config key 'autoencoder'");
    auto ae = aroma::AutoencoderModel::load(ae_path);
    ctx.inputs["autoencoder"] = ae_path;

    auto train_cfg = aroma::train::TrainConfig::from_json(ctx.config.value("train", json::object()));
    train_cfg.stage = "refiner";
    train_cfg.seed = ctx.seed;
    if (ctx.config.value("paper_scale", false)) train_cfg.epochs = 2000;
    ctx.config["train"] = train_cfg.to_json();
    ctx.config["model"] = ae.spec.to_json();

    auto stepper = aroma::StepperModel::build(
        ae.spec, aroma::stepper_variant_from_string(train_cfg.stepper), ctx.seed);
    const auto result = aroma::train::train_refiner(ds, ae, stepper, train_cfg, out);
    std::cout << "best val latent MSE " << result.best_val << " at epoch " << result.best_epoch
              << (result.aborted ? " (aborted on non-finite loss)" : "") << "\n";
    return result.aborted ? 1 : 0;
}

void dump_rollout(const std::string& out, const aroma::io::TrajectoryDataset& ds,
                  const aroma::eval::RolloutResult& res) {
    fs::create_directories(out);
    std::ofstream bin(out + "/fields.bin", std::ios::binary | std::ios::trunc);
    for (const Mat& f : res.fields)
        for (Eigen::Index i = 0; i < f.size(); ++i) {
            const float v = static_cast<float>(f.data()[i]);
            bin.write(reinterpret_cast<const char*>(&v), sizeof(float));
        }
    std::ofstream lat(out + "/latents.csv", std::ios::trunc);
    lat << "step,token,channel,value\n";
    for (size_t t = 0; t < res.latents.size(); ++t)
        for (Eigen::Index i = 0; i < res.latents[t].rows(); ++i)
            for (Eigen::Index j = 0; j < res.latents[t].cols(); ++j)
                lat << t << "," << i << "," << j << "," << res.latents[t](i, j) << "\n";

    if (ds.coord_dim == 1) {
        Mat img(static_cast<Eigen::Index>(res.fields.size()), res.fields[0].rows());
        for (size_t t = 0; t < res.fields.size(); ++t) img.row(static_cast<Eigen::Index>(t)) = res.fields[t].col(0).transpose();
        aroma::plot::heatmap(out + "/rollout.ppm", img, 4);
    } else {
        const int n = static_cast<int>(std::lround(std::sqrt(static_cast<double>(ds.n_points))));
        if (n * n == ds.n_points) {
            aroma::plot::heatmap(out + "/rollout_first.ppm",
                                 aroma::plot::to_grid(res.fields.front().col(0), n, n), 6);
            aroma::plot::heatmap(out + "/rollout_last.ppm",
                                 aroma::plot::to_grid(res.fields.back().col(0), n, n), 6);
        }
    }
}

int run_rollout(RunContext& ctx, const std::string& ckpt, const std::string& data,
                const std::string& out, int traj, int t0, int steps, const std::string& mode) {
    auto pipeline = aroma::PipelineModel::load(ckpt);
    auto ds = aroma::io::TrajectoryDataset::load(data);
    ctx.inputs = {{"checkpoint", ckpt}, {"data", data}};
    if (!mode.empty()) {
        const auto want = aroma::stepper_variant_from_string(mode);
        if (want != pipeline.stepper.variant &&
            !(want == aroma::StepperVariant::deterministic &&
              pipeline.stepper.variant == aroma::StepperVariant::mlp))
            throw aroma::Error("ConfigError", "checkpoint stepper is '" +
                                                  to_string(pipeline.stepper.variant) +
                                                  "', requested mode '" + mode + "'");
    }
    if (traj < 0) traj = ds.split("test").empty() ? 0 : ds.split("test").front();
    if (t0 < 0 || t0 >= ds.n_time) throw aroma::Error("ConfigError", "t0 out of range");
    if (steps < 0) steps = ds.n_time - 1 - t0;

    const auto res = aroma::eval::rollout(pipeline.autoencoder, pipeline.stepper,
                                          ds.snapshot(traj, t0), steps, ds.grid(traj), ctx.seed);
    dump_rollout(out, ds, res);
    double mean_ms = 0.0;
    for (double ms : res.step_ms) mean_ms += ms;
    if (!res.step_ms.empty()) mean_ms /= static_cast<double>(res.step_ms.size());
    aroma::io::write_json_atomic(out + "/summary.json",
                                 json{{"trajectory", traj},
                                      {"t0", t0},
                                      {"steps_requested", steps},
                                      {"steps_completed", res.fields.size() - 1},
                                      {"truncated", res.truncated},
                                      {"mean_step_ms", mean_ms},
                                      {"seed", ctx.seed}});
    std::cout << "rollout: " << res.fields.size() - 1 << " steps"
              << (res.truncated ? " (truncated)" : "") << ", mean latent step " << mean_ms
              << " ms\n";
    return 0;
}

int run_evaluate(RunContext& ctx, const std::string& ckpt, const std::string& data,
                 const std::string& out, int max_items) {
    auto ds = aroma::io::TrajectoryDataset::load(data);
    ctx.inputs = {{"checkpoint", ckpt}, {"data", data}};
    const json cfg = aroma::io::CheckpointArchive::load_config(ckpt);
    const bool has_stepper = cfg.value("stage", "") == "pipeline";

    json summary;
    if (ds.manifest.at("equation") == "burgers") {
        aroma::eval::BurgersEvalOptions opt;
        opt.window = ctx.config.value("window", 50);
        opt.max_items = max_items;
        opt.seed = ctx.seed;
        if (has_stepper) {
            auto pipeline = aroma::PipelineModel::load(ckpt);
            summary = evaluate_burgers(ds, pipeline.autoencoder, &pipeline.stepper, opt);
        } else {
            auto ae = aroma::AutoencoderModel::load(ckpt);
            summary = evaluate_burgers(ds, ae, nullptr, opt);
        }
    } else {
        aroma::eval::NsEvalOptions opt;
        opt.horizon = ctx.config.value("horizon", ds.n_time / 2);
        opt.seed = ctx.seed;
        if (has_stepper) {
            auto pipeline = aroma::PipelineModel::load(ckpt);
            summary = evaluate_ns(ds, pipeline.autoencoder, &pipeline.stepper, opt);
        } else {
            auto ae = aroma::AutoencoderModel::load(ckpt);
            summary = evaluate_ns(ds, ae, nullptr, opt);
        }
    }
    fs::create_directories(out);
    aroma::io::write_json_atomic(out + "/summary.json", summary);
    std::cout << summary.dump(2) << "\n";
    return 0;
}

int run_analyze(RunContext& ctx, const std::string& ckpt, const std::string& data,
                const std::string& out, const std::string& what) {
    auto ds = aroma::io::TrajectoryDataset::load(data);
    ctx.inputs = {{"checkpoint", ckpt}, {"data", data}};
    const json cfg = aroma::io::CheckpointArchive::load_config(ckpt);
    const bool has_stepper = cfg.value("stage", "") == "pipeline";
    fs::create_directories(out);

    aroma::PipelineModel pipeline;
    aroma::AutoencoderModel ae_only;
    const aroma::AutoencoderModel* ae = nullptr;
    const aroma::StepperModel* stepper = nullptr;
    if (has_stepper) {
        pipeline = aroma::PipelineModel::load(ckpt);
        ae = &pipeline.autoencoder;
        stepper = &pipeline.stepper;
    } else {
        ae_only = aroma::AutoencoderModel::load(ckpt);
        ae = &ae_only;
    }

    const int traj = ds.split("test").empty() ? 0 : ds.split("test").front();

    if (what == "attention") {
        const auto snap = ds.snapshot(traj, 0);
        std::vector<int> tokens;
        for (int i = 0; i < std::min(8, ae->spec.num_latents); ++i) tokens.push_back(i);
        const auto stage = ae->spec.encode_geo ? aroma::eval::AttnStage::geometry
                                               : aroma::eval::AttnStage::decoder;
        const auto maps = attention_maps(*ae, snap, stage, tokens, 0);
        auto init_model = aroma::AutoencoderModel::build(ae->spec, ctx.seed + 1);
        init_model.norm = ae->norm;
        const auto init_maps = attention_maps(init_model, snap, stage, tokens, 0);
        aroma::plot::heatmap(out + "/attention_maps.ppm", maps.rows, 6);
        aroma::io::write_json_atomic(out + "/summary.json",
                                     json{{"stage", ae->spec.encode_geo ? "geometry" : "decoder"},
                                          {"entropy_trained", maps.mean_entropy},
                                          {"entropy_init", init_maps.mean_entropy}});
        std::ofstream csv(out + "/attention.csv", std::ios::trunc);
        csv << "token,point,weight\n";
        for (Eigen::Index r = 0; r < maps.rows.rows(); ++r)
            for (Eigen::Index c = 0; c < maps.rows.cols(); ++c)
                csv << tokens[static_cast<size_t>(r)] << "," << c << "," << maps.rows(r, c) << "\n";
    } else if (what == "perturbation") {
        std::vector<Mat> z_frames;
        for (int t = 0; t < ds.n_time; ++t) {
            FieldSnapshot snap = ds.snapshot(traj, t);
            aroma::io::normalize_values(snap.values, ae->norm);
            z_frames.push_back(ae->encoder.encode(ae->params, snap, aroma::nn::EncodeMode::eval).mu);
        }
        std::vector<int> sources;
        for (int t = 5; t < ds.n_time; t += std::max(1, ds.n_time / 8)) sources.push_back(t);
        std::ofstream csv(out + "/locality.csv", std::ios::trunc);
        csv << "token,locality\n";
        aroma::Rng pick(aroma::hash_seed(ctx.seed, 0x746f6bULL));
        for (int i = 0; i < std::min(8, ae->spec.num_latents); ++i) {
            const int token = static_cast<int>(pick.uniform_int(ae->spec.num_latents));
            const auto res =
                aroma::eval::token_perturbation(*ae, z_frames, token, ds.grid(traj), sources);
            csv << token << "," << res.locality << "\n";
            if (ds.coord_dim == 1 && !res.delta_fields.empty()) {
                Mat img(static_cast<Eigen::Index>(res.delta_fields.size()),
                        res.delta_fields[0].rows());
                for (size_t s = 0; s < res.delta_fields.size(); ++s)
                    img.row(static_cast<Eigen::Index>(s)) = res.delta_fields[s].col(0).transpose();
                aroma::plot::heatmap(out + "/delta_token" + std::to_string(token) + ".ppm", img, 4);
            }
        }
    } else if (what == "latents") {
        const auto dump = aroma::eval::latent_dump(*ae, stepper, ds, traj, ctx.seed);
        aroma::eval::write_latent_csv(out + "/latents.csv", dump);
        std::vector<std::vector<double>> series;
        for (Eigen::Index ch = 0; ch < std::min<Eigen::Index>(8, dump.mu[0].size()); ++ch) {
            std::vector<double> s;
            for (const Mat& m : dump.mu) s.push_back(m.data()[ch]);
            series.push_back(std::move(s));
        }
        aroma::plot::line_plot(out + "/mu_over_time.ppm", series);
    } else if (what == "uncertainty") {
        if (!stepper || stepper->variant != aroma::StepperVariant::diffusion)
            throw aroma::Error("ConfigError", "uncertainty analysis needs a diffusion checkpoint");
        aroma::eval::UncertaintyOptions opt;
        opt.seed = ctx.seed;
        opt.t0 = ctx.config.value("t0", 49);
        opt.steps = ctx.config.value("steps", std::min(200, ds.n_time - opt.t0 - 1));
        opt.n_samples = ctx.config.value("n_samples", 8);
        std::vector<aroma::eval::EnsembleResult> details;
        const json summary = uncertainty_growth(ds, *ae, *stepper, opt, &details);
        aroma::io::write_json_atomic(out + "/summary.json", summary);
        if (!details.empty()) {
            std::ofstream csv(out + "/std_over_time.csv", std::ios::trunc);
            csv << "step,mean_std\n";
            for (size_t t = 0; t < details[0].mean_std_per_step.size(); ++t)
                csv << t << "," << details[0].mean_std_per_step[t] << "\n";
            aroma::plot::line_plot(out + "/std_over_time.ppm", {details[0].mean_std_per_step});
        }
    } else if (what == "correlation") {
        if (!stepper) throw aroma::Error("ConfigError", "correlation analysis needs a stepper");
        aroma::eval::LongRolloutOptions opt;
        opt.seed = ctx.seed;
        opt.t0 = ctx.config.value("t0", 49);
        opt.steps = ctx.config.value("steps", std::min(200, ds.n_time - opt.t0 - 1));
        const auto res = long_rollout_correlation(ds, *ae, *stepper, opt);
        aroma::io::write_json_atomic(out + "/summary.json", res.summary);
        std::ofstream csv(out + "/correlation.csv", std::ios::trunc);
        csv << "step,correlation,count\n";
        for (size_t t = 0; t < res.corr.curve.size(); ++t)
            csv << t << "," << res.corr.curve[t] << "," << res.corr.counts[t] << "\n";
        aroma::plot::line_plot(out + "/correlation.ppm", {res.corr.curve});
    } else {
        throw aroma::Error("ConfigError", "unknown analysis '" + what + "'");
    }
    std::cout << "analysis '" << what << "' written to " << out << "\n";
    return 0;
}

int run_plot(const std::string& csv_path, const std::string& column, const std::string& out) {
    std::ifstream in(csv_path);
    if (!in) throw aroma::Error("IoError", "cannot open " + csv_path);
    std::string header;
    std::getline(in, header);
    std::vector<std::string> cols;
    {
        std::string tok;
        std::stringstream ss(header);
        while (std::getline(ss, tok, ',')) cols.push_back(tok);
    }
    int target = -1;
    for (size_t i = 0; i < cols.size(); ++i)
        if (cols[i] == column) target = static_cast<int>(i);
    if (target < 0) throw aroma::Error("ConfigError", "column '" + column + "' not in " + csv_path);
    std::vector<double> series;
    std::string line;
    while (std::getline(in, line)) {
        std::stringstream ss(line);
        std::string tok;
        for (int i = 0; std::getline(ss, tok, ','); ++i)
            if (i == target) series.push_back(tok.empty() ? std::nan("") : std::stod(tok));
    }
    aroma::plot::line_plot(out, {series});
    std::cout << "wrote " << out << " (" << series.size() << " points)\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"aroma: latent-token neural surrogates for PDE dynamics"};
    app.require_subcommand(1);

    std::string config_path, data_dir, out_dir, ckpt_dir, equation, mode, what = "attention";
    std::string autoencoder_path, csv_path, column = "correlation";
    std::vector<std::string> overrides;
    int traj = -1, t0 = 0, steps = -1, max_items = 0;

    auto add_common = [&](CLI::App* cmd, bool needs_config) {
        auto* opt = cmd->add_option("--config", config_path, "JSON config file");
        if (needs_config) opt->check(CLI::ExistingFile);
        cmd->add_option("--set", overrides, "override config keys, e.g. --set train.epochs=3");
    };

    auto* gen = app.add_subcommand("generate-data", "synthesize a trajectory dataset");
    gen->add_option("--equation", equation, "burgers | ns2d")->required();
    gen->add_option("--out", out_dir, "output dataset directory")->required();
    add_common(gen, false);

    auto* tae = app.add_subcommand("train-autoencoder", "stage 1: encoder-decoder training");
    tae->add_option("--data", data_dir, "dataset directory")->required();
    tae->add_option("--out", out_dir, "output directory")->required();
    add_common(tae, false);

    auto* tre = app.add_subcommand("train-refiner", "stage 2: latent stepper training");
    tre->add_option("--data", data_dir, "dataset directory")->required();
    tre->add_option("--out", out_dir, "output directory")->required();
    tre->add_option("--autoencoder", autoencoder_path, "stage-1 checkpoint directory");
    add_common(tre, false);

    auto* rol = app.add_subcommand("rollout", "autoregressive rollout from a dataset state");
    rol->add_option("--checkpoint", ckpt_dir, "pipeline checkpoint")->required();
    rol->add_option("--data", data_dir, "dataset directory")->required();
    rol->add_option("--out", out_dir, "output directory")->required();
    rol->add_option("--trajectory", traj, "trajectory index (default: first test)");
    rol->add_option("--t0", t0, "start frame");
    rol->add_option("--steps", steps, "latent steps (default: to the end)");
    rol->add_option("--mode", mode, "diffusion | deterministic");
    add_common(rol, false);

    auto* eva = app.add_subcommand("evaluate", "metrics on the test split");
    eva->add_option("--checkpoint", ckpt_dir, "checkpoint directory")->required();
    eva->add_option("--data", data_dir, "dataset directory")->required();
    eva->add_option("--out", out_dir, "output directory")->required();
    eva->add_option("--max-items", max_items, "cap evaluated items (0 = all)");
    add_common(eva, false);

    auto* ana = app.add_subcommand("analyze", "attention / perturbation / latents / uncertainty");
    ana->add_option("--checkpoint", ckpt_dir, "checkpoint directory")->required();
    ana->add_option("--data", data_dir, "dataset directory")->required();
    ana->add_option("--out", out_dir, "output directory")->required();
    ana->add_option("--what", what, "attention|perturbation|latents|uncertainty|correlation");
    add_common(ana, false);

    auto* plt = app.add_subcommand("plot", "render a CSV column as a line plot");
    plt->add_option("--csv", csv_path, "input CSV")->required();
    plt->add_option("--column", column, "column name");
    plt->add_option("--out", out_dir, "output image (.ppm)")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << e.what() << "\n\n" << app.help() << "\n";
        return 2;
    }

    RunContext ctx;
    for (int i = 0; i < argc; ++i) ctx.argv.push_back(argv[i]);
    try {
        ctx.config = load_config(config_path, overrides);
        ctx.seed = resolve_seed(ctx.config);
        ctx.out_dir = out_dir;
        int rc = 0;
        if (gen->parsed()) {
            ctx.command = "generate-data";
            rc = run_generate_data(ctx, equation, out_dir);
        } else if (tae->parsed()) {
            ctx.command = "train-autoencoder";
            ctx.inputs["data"] = data_dir;
            rc = run_train_autoencoder(ctx, data_dir, out_dir);
        } else if (tre->parsed()) {
            ctx.command = "train-refiner";
            ctx.inputs["data"] = data_dir;
            rc = run_train_refiner(ctx, data_dir, out_dir, autoencoder_path);
        } else if (rol->parsed()) {
            ctx.command = "rollout";
            rc = run_rollout(ctx, ckpt_dir, data_dir, out_dir, traj, t0, steps, mode);
        } else if (eva->parsed()) {
            ctx.command = "evaluate";
            rc = run_evaluate(ctx, ckpt_dir, data_dir, out_dir, max_items);
        } else if (ana->parsed()) {
            ctx.command = "analyze";
            rc = run_analyze(ctx, ckpt_dir, data_dir, out_dir, what);
        } else if (plt->parsed()) {
            ctx.command = "plot";
            rc = run_plot(csv_path, column, out_dir);
            return rc;  // plot writes a single file, no manifest directory
        }
        write_run_manifest(ctx);
        return rc;
    } catch (const aroma::Error& e) {
        std::cerr << json{{"error", {{"kind", e.kind()}, {"message", e.what()}}}}.dump() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << json{{"error", {{"kind", "InternalError"}, {"message", e.what()}}}}.dump()
                  << "\n";
        return 1;
    }
}
