#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "aroma/nn/encoder.hpp"
#include "support/gradcheck.hpp"

#include <numeric>

using namespace aroma;
using namespace aroma::nn;

namespace {

FieldSnapshot random_snapshot(Eigen::Index n, int dim, int channels, uint64_t seed) {
    Rng rng(seed);
    FieldSnapshot snap;
    snap.coords.resize(n, dim);
    snap.values.resize(n, channels);
    for (Eigen::Index i = 0; i < snap.coords.size(); ++i) snap.coords.data()[i] = rng.uniform();
    rng.fill_normal(snap.values);
    return snap;
}

EncoderConfig tiny_config() {
    EncoderConfig cfg;
    cfg.hidden_dim = 16;
    cfg.num_latents = 4;
    cfg.latent_dim = 3;
    cfg.cross_heads = 2;
    cfg.cross_dim_head = 4;
    cfg.ffn_mult = 2;
    cfg.freq_samples = 4;
    return cfg;
}

void randomize_store(ParamStore& P, uint64_t seed) {
    Rng rng(seed);
    for (auto& v : P.flat()) v = 0.25 * rng.normal();
}

}  // namespace

TEST_CASE("fourier features are bounded, alternate cos/sin at zero, and wrap") {
    const auto emb = FourierEmbedder::from_frequencies(1, {1.0, 2.0, 4.0, 8.0, 16.0});
    Mat zero(1, 1);
    zero(0, 0) = 0.0;
    const Mat g0 = emb.embed(zero);
    for (Eigen::Index c = 0; c < g0.cols(); c += 2) {
        CHECK(g0(0, c) == doctest::Approx(1.0));      // cos
        CHECK(g0(0, c + 1) == doctest::Approx(0.0));  // sin
    }

    Mat x(3, 1);
    x << 0.0, 0.31, 1.0 - 1e-12;
    const Mat g = emb.embed(x);
    CHECK(g.maxCoeff() <= 1.0 + 1e-12);
    CHECK(g.minCoeff() >= -1.0 - 1e-12);
    // integer frequencies: gamma(0) equals gamma(1^-)
    CHECK((g.row(0) - g.row(2)).cwiseAbs().maxCoeff() < 1e-5);
}

TEST_CASE("log-spaced frequency construction spans the requested band") {
    const auto emb = FourierEmbedder::log_spaced(1, 0.0, 4.0, 16);
    REQUIRE(emb.frequencies.size() == 16);
    CHECK(emb.frequencies.front() == doctest::Approx(1.0));
    CHECK(emb.frequencies.back() == doctest::Approx(16.0));
    for (size_t i = 1; i < 16; ++i)
        CHECK(emb.frequencies[i] / emb.frequencies[i - 1] ==
              doctest::Approx(std::pow(2.0, 4.0 / 15.0)));
}

TEST_CASE("encoder output is M x h for any N") {
    ParamStore P;
    Rng rng(1);
    Encoder enc(P, tiny_config(), rng);
    randomize_store(P, 2);
    for (Eigen::Index n : {37, 100, 1024, 4096}) {
        const auto snap = random_snapshot(n, 1, 1, 100 + static_cast<uint64_t>(n));
        const auto tokens = enc.encode(P, snap, EncodeMode::eval);
        CHECK(tokens.z.rows() == 4);
        CHECK(tokens.z.cols() == 3);
        CHECK(tokens.mu.allFinite());
    }
}

TEST_CASE("table-default bottleneck yields 256 numbers for a Burgers state") {
    ParamStore P;
    Rng rng(1);
    EncoderConfig cfg;  // defaults follow the Burgers column
    Encoder enc(P, cfg, rng);
    const auto snap = random_snapshot(100, 1, 1, 7);
    const auto tokens = enc.encode(P, snap, EncodeMode::eval);
    CHECK(tokens.z.size() == 32 * 8);
}

TEST_CASE("encoding is invariant to point permutations") {
    ParamStore P;
    Rng rng(3);
    auto cfg = tiny_config();
    cfg.encode_geo = true;
    Encoder enc(P, cfg, rng);
    randomize_store(P, 4);
    const auto snap = random_snapshot(200, 1, 1, 8);

    FieldSnapshot permuted;
    std::vector<Eigen::Index> perm(200);
    std::iota(perm.begin(), perm.end(), 0);
    Rng shuffle(9);
    for (Eigen::Index i = 199; i > 0; --i)
        std::swap(perm[static_cast<size_t>(i)],
                  perm[static_cast<size_t>(shuffle.uniform_int(i + 1))]);
    permuted.coords.resize(200, 1);
    permuted.values.resize(200, 1);
    for (Eigen::Index i = 0; i < 200; ++i) {
        permuted.coords.row(i) = snap.coords.row(perm[static_cast<size_t>(i)]);
        permuted.values.row(i) = snap.values.row(perm[static_cast<size_t>(i)]);
    }

    const auto a = enc.encode(P, snap, EncodeMode::eval);
    const auto b = enc.encode(P, permuted, EncodeMode::eval);
    const double scale = a.mu.cwiseAbs().maxCoeff();
    CHECK((a.mu - b.mu).cwiseAbs().maxCoeff() < 1e-5 * scale);
}

TEST_CASE("duplicating every observation leaves the tokens unchanged") {
    ParamStore P;
    Rng rng(5);
    Encoder enc(P, tiny_config(), rng);
    randomize_store(P, 6);
    const auto snap = random_snapshot(60, 1, 1, 10);
    FieldSnapshot doubled;
    doubled.coords.resize(120, 1);
    doubled.values.resize(120, 1);
    doubled.coords << snap.coords, snap.coords;
    doubled.values << snap.values, snap.values;
    const auto a = enc.encode(P, snap, EncodeMode::eval);
    const auto b = enc.encode(P, doubled, EncodeMode::eval);
    CHECK((a.mu - b.mu).cwiseAbs().maxCoeff() < 1e-5 * a.mu.cwiseAbs().maxCoeff());
}

TEST_CASE("geometry tokens ignore observation values") {
    ParamStore P;
    Rng rng(7);
    auto cfg = tiny_config();
    cfg.encode_geo = true;
    Encoder enc(P, cfg, rng);
    randomize_store(P, 8);
    auto snap_a = random_snapshot(50, 1, 1, 11);
    auto snap_b = snap_a;
    Rng other(12);
    other.fill_normal(snap_b.values);

    Encoder::Cache ca, cb;
    enc.encode(P, snap_a, EncodeMode::eval, nullptr, &ca);
    enc.encode(P, snap_b, EncodeMode::eval, nullptr, &cb);
    CHECK((ca.t_geo - cb.t_geo).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("disabled geometry stage passes the query tokens through") {
    ParamStore P;
    Rng rng(13);
    Encoder enc(P, tiny_config(), rng);
    const auto snap = random_snapshot(20, 1, 1, 14);
    Encoder::Cache c;
    enc.encode(P, snap, EncodeMode::eval, nullptr, &c);
    const Mat tokens = P.mat(enc.query_tokens_param());
    CHECK((c.t_geo - tokens).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("zero values with a bias-free value path leave tokens at their prior") {
    ParamStore P;
    Rng rng(15);
    auto cfg = tiny_config();
    cfg.value_bias = false;
    Encoder enc(P, cfg, rng);  // biases of attention/ffn are zero at init
    auto snap = random_snapshot(30, 1, 1, 16);
    snap.values.setZero();
    Encoder::Cache c;
    enc.encode(P, snap, EncodeMode::eval, nullptr, &c);
    CHECK((c.v.cwiseAbs()).maxCoeff() == 0.0);
    // T_obs = T_geo + FFN(zero attention output) = T_geo at init
    CHECK((c.t_obs - c.t_geo).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("empty observation sets and bad domains are rejected") {
    ParamStore P;
    Rng rng(17);
    Encoder enc(P, tiny_config(), rng);
    const auto empty = random_snapshot(0, 1, 1, 18);
    CHECK_THROWS_WITH_AS(enc.encode(P, empty, EncodeMode::eval),
                         doctest::Contains("EmptyObservationSet"), Error);
    auto bad = random_snapshot(5, 1, 1, 19);
    bad.coords(2, 0) = 1.25;
    CHECK_THROWS_WITH_AS(enc.encode(P, bad, EncodeMode::eval), doctest::Contains("DomainError"),
                         Error);
}

TEST_CASE("train-mode sampling is reproducible and shrinks with the variance") {
    ParamStore P;
    Rng rng(21);
    Encoder enc(P, tiny_config(), rng);
    randomize_store(P, 22);
    const auto snap = random_snapshot(40, 1, 1, 23);

    Rng s1(77), s2(77), s3(78);
    const auto a = enc.encode(P, snap, EncodeMode::train, &s1);
    const auto b = enc.encode(P, snap, EncodeMode::train, &s2);
    const auto c = enc.encode(P, snap, EncodeMode::train, &s3);
    CHECK((a.z - b.z).cwiseAbs().maxCoeff() == 0.0);
    CHECK((a.z - c.z).cwiseAbs().maxCoeff() > 0.0);

    // push log-sigma to the clamp floor: z collapses to mu
    ParamStore P2;
    Rng rng2(21);
    Encoder enc2(P2, tiny_config(), rng2);
    randomize_store(P2, 22);
    const int logsig_b = P2.find("encoder/to_logsig/bias");
    REQUIRE(logsig_b >= 0);
    P2.mat(logsig_b).setConstant(-1e9);
    Rng s4(79);
    const auto d = enc2.encode(P2, snap, EncodeMode::train, &s4);
    CHECK((d.z - d.mu).cwiseAbs().maxCoeff() < 1e-3);
    CHECK(d.logsig.minCoeff() == doctest::Approx(-10.0));
}

TEST_CASE("sequence dropout keeps the advertised count and validates its ratio") {
    const auto snap = random_snapshot(100, 1, 1, 30);
    Rng rng(31);
    const auto kept = sequence_dropout(snap, 0.1, rng);
    CHECK(kept.n_points() == 90);
    Rng rng2(32);
    const auto same = sequence_dropout(snap, 0.0, rng2);
    CHECK(same.n_points() == 100);
    CHECK((same.values - snap.values).cwiseAbs().maxCoeff() == 0.0);
    Rng rng3(33);
    CHECK_THROWS_WITH_AS(sequence_dropout(snap, 1.0, rng3), doctest::Contains("InvalidRatio"),
                         Error);
}

TEST_CASE("cross-attention score counts are M*N, plus M*N with geometry") {
    ParamStore P;
    Rng rng(41);
    auto cfg = tiny_config();
    Encoder enc(P, cfg, rng);
    const auto snap = random_snapshot(123, 1, 1, 42);
    attn_counters().reset();
    enc.encode(P, snap, EncodeMode::eval);
    CHECK(attn_counters().observation == 4 * 123);
    CHECK(attn_counters().geometry == 0);
    CHECK(attn_counters().total() == 4 * 123);  // never N x N

    ParamStore P2;
    Rng rng2(43);
    cfg.encode_geo = true;
    Encoder enc2(P2, cfg, rng2);
    attn_counters().reset();
    enc2.encode(P2, snap, EncodeMode::eval);
    CHECK(attn_counters().observation == 4 * 123);
    CHECK(attn_counters().geometry == 4 * 123);
}

TEST_CASE("gradcheck: encoder wrt all weights") {
    ParamStore P;
    Rng rng(50);
    EncoderConfig cfg;
    cfg.hidden_dim = 8;
    cfg.num_latents = 2;
    cfg.latent_dim = 2;
    cfg.cross_heads = 2;
    cfg.cross_dim_head = 2;
    cfg.ffn_mult = 1;
    cfg.freq_samples = 2;
    cfg.encode_geo = true;
    Encoder enc(P, cfg, rng);
    randomize_store(P, 51);
    const auto snap = random_snapshot(5, 1, 1, 52);

    auto loss = [&] {
        const auto t = enc.encode(P, snap, EncodeMode::eval);
        return t.mu.squaredNorm();
    };
    auto backward = [&](GradBuf& G) {
        Encoder::Cache c;
        const auto t = enc.encode(P, snap, EncodeMode::eval, nullptr, &c);
        const Mat dmu = 2.0 * t.mu;
        const Mat zero = Mat::Zero(t.mu.rows(), t.mu.cols());
        enc.backward(P, c, dmu, zero, zero, G);
    };
    CHECK(test::gradcheck(P, loss, backward) < 1e-4);
}
