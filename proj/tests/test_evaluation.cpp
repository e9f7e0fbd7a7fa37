#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "aroma/eval/analysis.hpp"
#include "aroma/eval/metrics.hpp"
#include "aroma/eval/protocols.hpp"
#include "aroma/eval/rollout.hpp"

using namespace aroma;
using namespace aroma::eval;

namespace {

Mat random_mat(Eigen::Index r, Eigen::Index c, uint64_t seed) {
    Rng rng(seed);
    Mat m(r, c);
    rng.fill_normal(m);
    return m;
}

std::vector<Trajectory> random_trajs(int items, int frames, int points, uint64_t seed) {
    std::vector<Trajectory> out;
    for (int j = 0; j < items; ++j) {
        Trajectory tr;
        for (int t = 0; t < frames; ++t)
            tr.push_back(random_mat(points, 1, hash_seed(seed, j, t)));
        out.push_back(std::move(tr));
    }
    return out;
}

ModelSpec tiny_spec() {
    ModelSpec spec;
    spec.hidden_dim = 16;
    spec.num_latents = 4;
    spec.latent_dim = 4;
    spec.latent_heads = 2;
    spec.latent_dim_head = 4;
    spec.cross_heads = 2;
    spec.cross_dim_head = 4;
    spec.dim = 16;
    spec.depth_inr = 2;
    spec.frequencies = {2, 3};
    spec.feature_dim = 6;
    spec.freq_samples = 4;
    spec.ffn_mult = 2;
    spec.hidden_size = 16;
    spec.depth = 1;
    spec.num_heads = 2;
    return spec;
}

AutoencoderModel random_model(uint64_t seed) {
    auto m = AutoencoderModel::build(tiny_spec(), seed);
    Rng rng(hash_seed(seed, 1));
    for (auto& v : m.params.flat()) v += 0.05 * rng.normal();
    return m;
}

FieldSnapshot snapshot_1d(Eigen::Index n, uint64_t seed) {
    FieldSnapshot snap;
    snap.coords.resize(n, 1);
    for (Eigen::Index i = 0; i < n; ++i) snap.coords(i, 0) = static_cast<double>(i) / n;
    snap.values = random_mat(n, 1, seed);
    return snap;
}

}  // namespace

TEST_CASE("relative_l2 basic identities") {
    const auto truth = random_trajs(3, 4, 10, 1);
    CHECK(relative_l2(truth, truth).value == doctest::Approx(0.0));

    std::vector<Trajectory> zeros = truth, doubled = truth;
    for (auto& tr : zeros)
        for (auto& f : tr) f.setZero();
    for (auto& tr : doubled)
        for (auto& f : tr) f *= 2.0;
    CHECK(relative_l2(zeros, truth).value == doctest::Approx(1.0));
    CHECK(relative_l2(doubled, truth).value == doctest::Approx(1.0));
}

TEST_CASE("zero-norm truths are excluded with a warning") {
    auto truth = random_trajs(2, 3, 5, 2);
    for (auto& f : truth[1]) f.setZero();
    const auto res = relative_l2(truth, truth);
    CHECK(res.excluded == 1);
    CHECK(res.value == doctest::Approx(0.0));
}

TEST_CASE("metrics match an independent brute-force recomputation") {
    const auto pred = random_trajs(4, 6, 12, 3);
    const auto truth = random_trajs(4, 6, 12, 4);

    // brute force straight from the arrays
    double brute_rel = 0.0;
    for (size_t j = 0; j < truth.size(); ++j) {
        double num = 0.0, den = 0.0;
        for (size_t t = 0; t < truth[j].size(); ++t)
            for (Eigen::Index i = 0; i < truth[j][t].size(); ++i) {
                const double p = pred[j][t].data()[i];
                const double q = truth[j][t].data()[i];
                num += (p - q) * (p - q);
                den += q * q;
            }
        brute_rel += std::sqrt(num) / std::sqrt(den);
    }
    brute_rel /= static_cast<double>(truth.size());
    CHECK(std::abs(relative_l2(pred, truth).value - brute_rel) < 1e-10);

    double brute_mse = 0.0;
    int64_t count = 0;
    for (size_t j = 0; j < truth.size(); ++j)
        for (size_t t = 0; t < truth[j].size() / 2; ++t)
            for (Eigen::Index i = 0; i < truth[j][t].size(); ++i) {
                const double d = pred[j][t].data()[i] - truth[j][t].data()[i];
                brute_mse += d * d;
                ++count;
            }
    brute_mse /= static_cast<double>(count);
    CHECK(std::abs(horizon_mse(pred, truth, Horizon::in_t) - brute_mse) < 1e-10);
}

TEST_CASE("horizon split covers frames 0-19 and 20-39 of 40-frame items") {
    auto truth = random_trajs(1, 40, 6, 5);
    auto pred = truth;
    for (int t = 20; t < 40; ++t) pred[0][static_cast<size_t>(t)].array() += 0.5;
    CHECK(horizon_mse(pred, truth, Horizon::in_t) == doctest::Approx(0.0));
    CHECK(horizon_mse(pred, truth, Horizon::out_t) == doctest::Approx(0.25));
}

TEST_CASE("correlation is 1 for identical and affine-mapped fields") {
    const auto truth = random_trajs(2, 5, 50, 6);
    auto affine = truth;
    for (auto& tr : affine)
        for (auto& f : tr) f = 2.5 * f.array() + 0.7;
    const auto self_corr = correlation_over_time(truth, truth);
    const auto affine_corr = correlation_over_time(affine, truth);
    for (double c : self_corr.curve) CHECK(c == doctest::Approx(1.0));
    for (double c : affine_corr.curve) CHECK(c == doctest::Approx(1.0));
    CHECK(self_corr.high_corr_time == doctest::Approx(5.0));  // never crosses
}

TEST_CASE("independent noise decorrelates and constant fields are missing") {
    std::vector<Trajectory> pred, truth;
    for (int seed = 0; seed < 12; ++seed) {
        pred.push_back({random_mat(400, 1, 100 + seed)});
        truth.push_back({random_mat(400, 1, 200 + seed)});
    }
    const auto corr = correlation_over_time(pred, truth);
    CHECK(std::abs(corr.curve[0]) < 0.1);

    std::vector<Trajectory> const_pred{{Mat::Ones(10, 1)}};
    std::vector<Trajectory> const_truth{{random_mat(10, 1, 9)}};
    const auto missing = correlation_over_time(const_pred, const_truth);
    CHECK(missing.counts[0] == 0);
    CHECK(std::isnan(missing.curve[0]));
}

TEST_CASE("rollout with zero steps reconstructs the input only") {
    const auto model = random_model(7);
    const auto stepper = StepperModel::build(tiny_spec(), StepperVariant::deterministic, 8);
    const auto snap = snapshot_1d(24, 10);
    const auto res = rollout(model, stepper, snap, 0, snap.coords, 1);
    CHECK(res.fields.size() == 1);
    CHECK(res.latents.size() == 1);
    CHECK_FALSE(res.truncated);
    const Mat recon = reconstruct(model, snap, snap.coords);
    CHECK((res.fields[0] - recon).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("deterministic rollouts are bit-reproducible") {
    const auto model = random_model(11);
    auto stepper = StepperModel::build(tiny_spec(), StepperVariant::deterministic, 12);
    Rng rng(13);
    for (auto& v : stepper.params.flat()) v += 0.02 * rng.normal();
    const auto snap = snapshot_1d(24, 14);
    const auto a = rollout(model, stepper, snap, 6, snap.coords, 5);
    const auto b = rollout(model, stepper, snap, 6, snap.coords, 5);
    REQUIRE(a.fields.size() == b.fields.size());
    for (size_t t = 0; t < a.fields.size(); ++t)
        CHECK((a.fields[t] - b.fields[t]).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("latent trajectories ignore the decoding grid") {
    const auto model = random_model(15);
    auto stepper = StepperModel::build(tiny_spec(), StepperVariant::diffusion, 16);
    Rng rng(17);
    for (auto& v : stepper.params.flat()) v += 0.02 * rng.normal();
    const auto snap = snapshot_1d(24, 18);
    const Mat fine = snapshot_1d(48, 19).coords;
    const auto a = rollout(model, stepper, snap, 5, snap.coords, 99);
    const auto b = rollout(model, stepper, snap, 5, fine, 99);
    REQUIRE(a.latents.size() == b.latents.size());
    for (size_t t = 0; t < a.latents.size(); ++t)
        CHECK((a.latents[t] - b.latents[t]).cwiseAbs().maxCoeff() == 0.0);
    CHECK(b.fields[0].rows() == 48);
}

TEST_CASE("ensembles: single sample has zero spread, deterministic samples coincide") {
    const auto model = random_model(20);
    const auto det = StepperModel::build(tiny_spec(), StepperVariant::deterministic, 21);
    const auto snap = snapshot_1d(16, 22);
    const auto one = ensemble_uncertainty(model, det, snap, 3, 1, snap.coords, 1);
    for (const Mat& s : one.stdev) CHECK(s.cwiseAbs().maxCoeff() == 0.0);
    const auto many = ensemble_uncertainty(model, det, snap, 3, 4, snap.coords, 1);
    for (const Mat& s : many.stdev) CHECK(s.cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("attention maps are distributions and start near uniform") {
    const auto model = random_model(23);
    const auto snap = snapshot_1d(64, 24);
    const auto maps = attention_maps(model, snap, AttnStage::observation, {0, 1, 2, 3}, 0);
    for (Eigen::Index r = 0; r < maps.rows.rows(); ++r)
        CHECK(maps.rows.row(r).sum() == doctest::Approx(1.0).epsilon(1e-6));
    CHECK(maps.mean_entropy > 0.9 * std::log(64.0));

    const auto dec_maps = attention_maps(model, snap, AttnStage::decoder, {0, 1}, 0);
    for (Eigen::Index r = 0; r < dec_maps.rows.rows(); ++r)
        CHECK(dec_maps.rows.row(r).sum() == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("replacing a token with itself changes nothing") {
    const auto model = random_model(25);
    std::vector<Mat> z_frames{random_mat(4, 4, 26)};
    z_frames.push_back(z_frames[0]);  // source frame identical
    const auto snap = snapshot_1d(32, 27);
    const auto res = token_perturbation(model, z_frames, 2, snap.coords, {1});
    CHECK(res.delta_fields[0].cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("locality statistic rewards energy on high-attention points") {
    Vec mass(10);
    mass << 10, 9, 0.1, 0.1, 0.1, 0.1, 0.1, 0.1, 0.1, 0.1;
    Mat concentrated = Mat::Zero(10, 1);
    concentrated(0, 0) = 3.0;
    concentrated(1, 0) = 1.0;
    Mat spread = Mat::Ones(10, 1);
    CHECK(locality_statistic(mass, {concentrated}, 0.2) == doctest::Approx(1.0));
    CHECK(locality_statistic(mass, {spread}, 0.2) == doctest::Approx(0.2));
}

TEST_CASE("latent dumps of a frozen state are constant over time") {
    const auto model = random_model(28);
    auto ds = io::TrajectoryDataset::create("burgers", io::json::object(), 1, 5, 16, 1, 1);
    Rng rng(29);
    for (int i = 0; i < 16; ++i) {
        const float v = static_cast<float>(rng.normal());
        for (int t = 0; t < 5; ++t) ds.u[static_cast<size_t>(t * 16 + i)] = v;
        ds.coords[static_cast<size_t>(i)] = static_cast<float>(i) / 16.0f;
    }
    const auto dump = latent_dump(model, nullptr, ds, 0, 1);
    REQUIRE(dump.mu.size() == 5);
    for (size_t t = 1; t < 5; ++t)
        CHECK((dump.mu[t] - dump.mu[0]).cwiseAbs().maxCoeff() == 0.0);
    CHECK(dump.informative.size() == 16);
}
