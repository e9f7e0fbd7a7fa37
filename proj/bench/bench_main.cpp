// Timing comparison between the serial reference paths and the OpenMP /
// Eigen-backed implementations.

#include "aroma/nn/decoder.hpp"
#include "aroma/nn/encoder.hpp"
#include "aroma/nn/reference.hpp"
#include "aroma/nn/refiner.hpp"
#include "aroma/sim/burgers.hpp"

#include <cstdio>
#include <functional>

using namespace aroma;
using namespace aroma::nn;

namespace {

double time_best(const std::function<void()>& fn, int reps = 3) {
    double best = 1e300;
    for (int i = 0; i < reps; ++i) {
        const double t0 = now_seconds();
        fn();
        best = std::min(best, now_seconds() - t0);
    }
    return best;
}

void row(const char* name, double serial, double fast) {
    std::printf("%-46s %10.1f ms %10.1f ms %8.2fx\n", name, serial * 1e3, fast * 1e3,
                serial / fast);
}

}  // namespace

int main() {
    std::printf("%-46s %13s %13s %9s\n", "kernel", "serial", "parallel", "speedup");

    {
        sim::BurgersConfig cfg;
        cfg.n_space = 128;
        cfg.n_time = 64;
        cfg.seed = 1;
        const double serial = time_best([&] { sim::solve_burgers(cfg, 16, false); }, 2);
        const double parallel = time_best([&] { sim::solve_burgers(cfg, 16, true); }, 2);
        row("burgers generation (16 trajectories)", serial, parallel);
    }

    {
        ParamStore P;
        Rng rng(2);
        MultiheadAttention attn(P, "attn", 128, 128, 128, 128, 4, 32, rng);
        Rng noise(3);
        for (auto& v : P.flat()) v += 0.05 * noise.normal();
        Mat q(32, 128), k(2048, 128), v(2048, 128);
        Rng data(4);
        data.fill_normal(q);
        data.fill_normal(k);
        data.fill_normal(v);
        const double naive = time_best([&] { ref::attention(P, attn, q, k, v); });
        const double fast = time_best([&] { attn.forward(P, q, k, v); });
        row("cross-attention 32 x 2048, 4 heads", naive, fast);
    }

    {
        ParamStore P;
        Rng rng(5);
        EncoderConfig ec;  // table-default encoder
        Encoder enc(P, ec, rng);
        DecoderConfig dc;
        Decoder dec(P, dc, rng);
        Rng noise(6);
        for (auto& v : P.flat()) v += 0.02 * noise.normal();

        const int batch = 16;
        auto run_batch = [&](bool parallel) {
            parallel_for(
                batch,
                [&](int64_t b) {
                    Rng rng_s(hash_seed(7, static_cast<uint64_t>(b)));
                    FieldSnapshot snap;
                    snap.coords.resize(512, 1);
                    snap.values.resize(512, 1);
                    for (int i = 0; i < 512; ++i) {
                        snap.coords(i, 0) = rng_s.uniform();
                        snap.values(i, 0) = rng_s.normal();
                    }
                    GradBuf G(P);
                    Encoder::Cache ecache;
                    Decoder::Cache dcache;
                    const auto tokens = enc.encode(P, snap, EncodeMode::eval, nullptr, &ecache);
                    const Mat u = dec.decode(P, tokens.z, snap.coords, &dcache);
                    const Mat dz = dec.backward(P, dcache, 2.0 * u, G);
                    const Mat zero = Mat::Zero(tokens.mu.rows(), tokens.mu.cols());
                    enc.backward(P, ecache, zero, zero, dz, G);
                },
                parallel);
        };
        const double serial = time_best([&] { run_batch(false); }, 2);
        const double parallel = time_best([&] { run_batch(true); }, 2);
        row("encode+decode fwd/bwd, batch 16 x N=512", serial, parallel);
    }

    {
        ParamStore P;
        Rng rng(8);
        RefinerConfig cfg;  // table-default diffusion transformer
        Refiner refiner(P, cfg, rng);
        Rng noise(9);
        for (auto& v : P.flat()) v += 0.02 * noise.normal();
        const auto sched = build_schedule(3, 1e-2);
        Mat z(32, 8);
        Rng data(10);
        data.fill_normal(z);
        auto sample_many = [&](bool parallel) {
            parallel_for(
                16,
                [&](int64_t i) {
                    Rng r(hash_seed(11, static_cast<uint64_t>(i)));
                    refiner.sample_next(P, z, sched, r);
                },
                parallel);
        };
        const double serial = time_best([&] { sample_many(false); }, 2);
        const double parallel = time_best([&] { sample_many(true); }, 2);
        row("diffusion sampling, 16 rollout steps", serial, parallel);
    }

    return 0;
}
