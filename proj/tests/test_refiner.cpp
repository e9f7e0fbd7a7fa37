#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "aroma/nn/refiner.hpp"
#include "support/gradcheck.hpp"

using namespace aroma;
using namespace aroma::nn;

namespace {

Mat random_mat(Eigen::Index r, Eigen::Index c, uint64_t seed) {
    Rng rng(seed);
    Mat m(r, c);
    rng.fill_normal(m);
    return m;
}

void randomize_store(ParamStore& P, uint64_t seed) {
    Rng rng(seed);
    for (auto& v : P.flat()) v = 0.2 * rng.normal();
}

RefinerConfig tiny_config() {
    RefinerConfig cfg;
    cfg.num_latents = 3;
    cfg.latent_dim = 2;
    cfg.hidden = 8;
    cfg.depth = 1;
    cfg.heads = 2;
    cfg.mlp_ratio = 2.0;
    return cfg;
}

}  // namespace

TEST_CASE("schedule endpoints and monotonicity") {
    const auto s = build_schedule(3, 1e-2);
    CHECK(s.alpha_bar.size() == 4);
    CHECK(s.signal(3) == doctest::Approx(0.0));            // pure-noise start
    CHECK(s.signal(0) == doctest::Approx(1.0 - 1e-4));     // 1 - sigma_min^2
    for (int k = 1; k <= 3; ++k) CHECK(s.signal(k) < s.signal(k - 1));
}

TEST_CASE("one-step schedule has exactly two levels") {
    const auto s = build_schedule(1, 1e-2);
    CHECK(s.alpha_bar.size() == 2);
    CHECK(s.signal(1) == doctest::Approx(0.0));
    CHECK(s.signal(0) == doctest::Approx(1.0 - 1e-4));
}

TEST_CASE("noise fractions decrease strictly toward the clean end") {
    const auto s = build_schedule(3, 1e-3);
    CHECK(s.noise(3) == doctest::Approx(1.0));
    CHECK(s.noise(2) == doctest::Approx(1e-2));
    CHECK(s.noise(1) == doctest::Approx(1e-4));
    CHECK(s.noise(0) == doctest::Approx(1e-6));
}

TEST_CASE("invalid schedules are rejected") {
    CHECK_THROWS_WITH_AS(build_schedule(0, 1e-2), doctest::Contains("InvalidSchedule"), Error);
    CHECK_THROWS_AS(build_schedule(3, 0.0), Error);
    CHECK_THROWS_AS(build_schedule(3, 1.0), Error);
}

TEST_CASE("v-prediction limit cases") {
    const Mat z0 = random_mat(3, 2, 1);
    const Mat eps = random_mat(3, 2, 2);
    // alpha_bar = 1: z_k = z0, v = eps
    auto t1 = vpredict_target(z0, eps, 1.0, 0.0);
    CHECK((t1.z_k - z0).cwiseAbs().maxCoeff() == 0.0);
    CHECK((t1.v - eps).cwiseAbs().maxCoeff() == 0.0);
    // alpha_bar = 0: z_k = eps, v = -z0
    auto t0 = vpredict_target(z0, eps, 0.0, 1.0);
    CHECK((t0.z_k - eps).cwiseAbs().maxCoeff() == 0.0);
    CHECK((t0.v + z0).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("v-prediction algebra reconstructs z0 and eps") {
    const Mat z0 = random_mat(4, 3, 3);
    const Mat eps = random_mat(4, 3, 4);
    const double a = std::sqrt(0.64), s = std::sqrt(0.36);
    const auto t = vpredict_target(z0, eps, a, s);
    CHECK((vpredict_reconstruct_z0(t.z_k, t.v, a, s) - z0).cwiseAbs().maxCoeff() < 1e-6);
    CHECK((vpredict_reconstruct_eps(t.z_k, t.v, a, s) - eps).cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("blocks are the identity and the head is silent at initialization") {
    ParamStore P;
    Rng rng(5);
    const auto cfg = tiny_config();
    Refiner refiner(P, cfg, rng);
    const Mat z_cond = random_mat(3, 2, 6);
    const Mat z_noisy = random_mat(3, 2, 7);

    Refiner::Cache cache;
    const Mat stream = refiner.forward_stream(P, z_cond, z_noisy, 2, &cache);
    CHECK((stream - cache.x0).cwiseAbs().maxCoeff() == 0.0);  // adaLN-Zero

    const Mat v = refiner.forward_v(P, z_cond, z_noisy, 2);
    CHECK(v.cwiseAbs().maxCoeff() == 0.0);
    CHECK(v.rows() == 3);
    CHECK(v.cols() == 2);
}

TEST_CASE("at init the v-loss equals the mean squared target") {
    ParamStore P;
    Rng rng(8);
    Refiner refiner(P, tiny_config(), rng);
    const auto sched = build_schedule(3, 1e-2);
    const Mat z_t = random_mat(3, 2, 9);
    const Mat z_next = random_mat(3, 2, 10);
    const Mat eps = random_mat(3, 2, 11);
    const auto target = vpredict_target(z_next, eps, sched, 2);
    const Mat vhat = refiner.forward_v(P, z_t, target.z_k, 2);
    const double loss = (vhat - target.v).squaredNorm() / target.v.size();
    CHECK(loss == doctest::Approx(target.v.squaredNorm() / target.v.size()));
}

TEST_CASE("positional embeddings break conditioning-token permutation symmetry") {
    ParamStore P;
    Rng rng(12);
    Refiner refiner(P, tiny_config(), rng);
    randomize_store(P, 13);
    Mat z_cond = random_mat(3, 2, 14);
    const Mat z_noisy = random_mat(3, 2, 15);
    const Mat a = refiner.forward_v(P, z_cond, z_noisy, 1);
    z_cond.row(0).swap(z_cond.row(2));
    const Mat b = refiner.forward_v(P, z_cond, z_noisy, 1);
    CHECK((a - b).cwiseAbs().maxCoeff() > 1e-8);
}

TEST_CASE("oracle v-function makes the sampler exact") {
    const auto sched = build_schedule(3, 1e-2);
    const Mat z0 = random_mat(4, 3, 20);
    // replicate the sampler update using the ground-truth v at every level
    Rng rng(21);
    Mat z(4, 3);
    rng.fill_normal(z);
    for (int k = sched.steps; k >= 1; --k) {
        const double a = sched.a(k), s = sched.s(k);
        const Mat eps_true = (z - a * z0) / s;
        const Mat v_true = a * eps_true - s * z0;
        const Mat zz = vpredict_reconstruct_z0(z, v_true, a, s);
        CHECK((zz - z0).cwiseAbs().maxCoeff() < 1e-5);
        if (k == 1) {
            z = zz;
        } else {
            const Mat eps_hat = vpredict_reconstruct_eps(z, v_true, a, s);
            z = sched.a(k - 1) * zz + sched.s(k - 1) * eps_hat;
        }
    }
    CHECK((z - z0).cwiseAbs().maxCoeff() < 1e-5);
}

TEST_CASE("sampling is deterministic given the rng and shape-checked") {
    ParamStore P;
    Rng rng(22);
    Refiner refiner(P, tiny_config(), rng);
    randomize_store(P, 23);
    const auto sched = build_schedule(3, 1e-2);
    const Mat z_t = random_mat(3, 2, 24);
    Rng s1(7), s2(7), s3(8);
    const Mat a = refiner.sample_next(P, z_t, sched, s1);
    const Mat b = refiner.sample_next(P, z_t, sched, s2);
    const Mat c = refiner.sample_next(P, z_t, sched, s3);
    CHECK((a - b).cwiseAbs().maxCoeff() == 0.0);
    CHECK((a - c).cwiseAbs().maxCoeff() > 0.0);

    const Mat bad = random_mat(5, 2, 25);
    Rng s4(9);
    CHECK_THROWS_WITH_AS(refiner.sample_next(P, bad, sched, s4), doctest::Contains("ConfigError"),
                         Error);
}

TEST_CASE("deterministic stepper at init passes tokens through to a silent head") {
    ParamStore P;
    Rng rng(26);
    Refiner refiner(P, tiny_config(), rng);
    const Mat z_t = random_mat(3, 2, 27);
    const Mat pred = refiner.deterministic_step(P, z_t);
    CHECK(pred.cwiseAbs().maxCoeff() == 0.0);  // zero-initialized head

    Refiner::Cache cache;
    const Mat stream = refiner.forward_stream(P, z_t, Mat::Zero(3, 2), 0, &cache);
    CHECK((stream - cache.x0).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("mlp stepper is token-wise and zero weights give a constant") {
    ParamStore P;
    Rng rng(28);
    MlpStepper mlp(P, 2, 6, 2, rng);
    randomize_store(P, 29);
    const Mat z = random_mat(5, 2, 30);
    const Mat full = mlp.forward(P, z);
    for (Eigen::Index i = 0; i < z.rows(); ++i) {
        const Mat single = mlp.forward(P, z.row(i));
        CHECK((full.row(i) - single.row(0)).cwiseAbs().maxCoeff() < 1e-12);
    }

    ParamStore P0;
    Rng rng0(31);
    MlpStepper zero_mlp(P0, 2, 6, 2, rng0);
    for (auto& v : P0.flat()) v = 0.0;
    const Mat out = zero_mlp.forward(P0, z);
    for (Eigen::Index i = 1; i < out.rows(); ++i)
        CHECK((out.row(i) - out.row(0)).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("table-default refiner materializes hidden 128 over depth 4") {
    ParamStore P;
    Rng rng(60);
    RefinerConfig cfg;  // defaults mirror the published table
    Refiner refiner(P, cfg, rng);
    const int wq3 = P.find("refiner/block3/attn/wq/weight");
    REQUIRE(wq3 >= 0);
    CHECK(P.mat(wq3).rows() == 128);
    CHECK(P.mat(wq3).cols() == 128);
    CHECK(P.find("refiner/block4/attn/wq/weight") == -1);
    const int ffn = P.find("refiner/block0/ffn_fc1/weight");
    CHECK(P.mat(ffn).rows() == 512);  // mlp_ratio 4.0
    const int epos = P.find("refiner/e_pos");
    CHECK(P.mat(epos).rows() == 64);  // 2M slots
}

TEST_CASE("gradcheck: depth-1 width-8 refiner") {
    ParamStore P;
    Rng rng(32);
    Refiner refiner(P, tiny_config(), rng);
    randomize_store(P, 33);
    const Mat z_cond = random_mat(3, 2, 34);
    const Mat z_noisy = random_mat(3, 2, 35);
    const Mat target = random_mat(3, 2, 36);

    auto loss = [&] {
        const Mat v = refiner.forward_v(P, z_cond, z_noisy, 2);
        return (v - target).squaredNorm();
    };
    auto backward = [&](GradBuf& G) {
        Refiner::Cache c;
        const Mat v = refiner.forward_v(P, z_cond, z_noisy, 2, &c);
        refiner.backward(P, c, 2.0 * (v - target), G);
    };
    CHECK(test::gradcheck(P, loss, backward) < 1e-4);
}

TEST_CASE("gradcheck: mlp stepper") {
    ParamStore P;
    Rng rng(40);
    MlpStepper mlp(P, 2, 5, 2, rng);
    randomize_store(P, 41);
    const Mat z = random_mat(4, 2, 42);
    const Mat target = random_mat(4, 2, 43);
    auto loss = [&] { return (mlp.forward(P, z) - target).squaredNorm(); };
    auto backward = [&](GradBuf& G) {
        MlpStepper::Cache c;
        const Mat y = mlp.forward(P, z, &c);
        mlp.backward(P, c, 2.0 * (y - target), G);
    };
    CHECK(test::gradcheck(P, loss, backward) < 1e-4);
}
