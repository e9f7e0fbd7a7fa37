#include "aroma/eval/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

namespace aroma::eval {

AttnStage attn_stage_from_string(const std::string& s) {
    if (s == "geometry") return AttnStage::geometry;
    if (s == "observation") return AttnStage::observation;
    if (s == "decoder") return AttnStage::decoder;
    throw Error("ConfigError", "unknown attention stage '" + s + "'");
}

double mean_row_entropy(const Mat& rows) {
    double acc = 0.0;
    for (Eigen::Index r = 0; r < rows.rows(); ++r) {
        double h = 0.0;
        for (Eigen::Index c = 0; c < rows.cols(); ++c) {
            const double p = rows(r, c);
            if (p > 1e-12) h -= p * std::log(p);
        }
        acc += h;
    }
    return rows.rows() > 0 ? acc / static_cast<double>(rows.rows()) : 0.0;
}

Mat decoder_token_mass(const AutoencoderModel& ae, const Mat& z, const Mat& query_grid) {
    const Mat zprime = ae.decoder.lift_and_selfattend(ae.params, z);
    const int bands = ae.decoder.band_spec().count();
    const int heads = ae.decoder.config().cross_heads;
    Mat mass = Mat::Zero(query_grid.rows(), ae.spec.num_latents);
    for (int b = 0; b < bands; ++b)
        for (int h = 0; h < heads; ++h)
            mass += ae.decoder.attention_rows(ae.params, zprime, query_grid, b, h);
    mass /= static_cast<double>(bands * heads);
    return mass;
}

AttentionMapResult attention_maps(const AutoencoderModel& ae, const FieldSnapshot& snapshot,
                                  AttnStage stage, const std::vector<int>& tokens, int head) {
    FieldSnapshot snap = snapshot;
    io::normalize_values(snap.values, ae.norm);
    AttentionMapResult res;
    if (stage == AttnStage::decoder) {
        const auto latent = ae.encoder.encode(ae.params, snap, nn::EncodeMode::eval);
        Mat mass = decoder_token_mass(ae, latent.mu, snap.coords);
        // export each token's received mass as a distribution over queries
        res.rows.resize(static_cast<Eigen::Index>(tokens.size()), mass.rows());
        for (size_t i = 0; i < tokens.size(); ++i) {
            Vec col = mass.col(tokens[i]);
            const double total = col.sum();
            if (total > 0.0) col /= total;
            res.rows.row(static_cast<Eigen::Index>(i)) = col.transpose();
        }
    } else {
        const Mat rows = ae.encoder.attention_rows(ae.params, snap,
                                                   stage == AttnStage::geometry, head);
        res.rows.resize(static_cast<Eigen::Index>(tokens.size()), rows.cols());
        for (size_t i = 0; i < tokens.size(); ++i)
            res.rows.row(static_cast<Eigen::Index>(i)) = rows.row(tokens[i]);
    }
    res.mean_entropy = mean_row_entropy(res.rows);
    return res;
}

double locality_statistic(const Vec& token_mass, const std::vector<Mat>& delta_fields,
                          double top_fraction) {
    const Eigen::Index q = token_mass.size();
    const Eigen::Index top = std::max<Eigen::Index>(
        1, static_cast<Eigen::Index>(std::ceil(top_fraction * static_cast<double>(q))));
    std::vector<Eigen::Index> order(static_cast<size_t>(q));
    std::iota(order.begin(), order.end(), 0);
    std::partial_sort(order.begin(), order.begin() + top, order.end(),
                      [&](Eigen::Index a, Eigen::Index b) { return token_mass[a] > token_mass[b]; });

    double acc = 0.0;
    int used = 0;
    for (const Mat& delta : delta_fields) {
        const double total = delta.array().square().sum();
        if (total <= 0.0) continue;
        double inside = 0.0;
        for (Eigen::Index i = 0; i < top; ++i)
            inside += delta.row(order[static_cast<size_t>(i)]).array().square().sum();
        acc += inside / total;
        ++used;
    }
    return used > 0 ? acc / used : 0.0;
}

PerturbationResult token_perturbation(const AutoencoderModel& ae,
                                      const std::vector<Mat>& z_frames, int token,
                                      const Mat& query_grid, const std::vector<int>& sources) {
    if (z_frames.empty()) throw Error("ConfigError", "token_perturbation needs latent frames");
    const Mat& base = z_frames[0];

    Mat u_base = ae.decoder.decode(ae.params, base, query_grid);
    io::denormalize_values(u_base, ae.norm);

    PerturbationResult res;
    const Mat mass = decoder_token_mass(ae, base, query_grid);
    res.token_mass = mass.col(token);

    for (int t : sources) {
        if (t < 0 || t >= static_cast<int>(z_frames.size()))
            throw Error("ConfigError", "perturbation source frame out of range");
        Mat z = base;
        z.row(token) = z_frames[static_cast<size_t>(t)].row(token);
        Mat u = ae.decoder.decode(ae.params, z, query_grid);
        io::denormalize_values(u, ae.norm);
        res.delta_fields.push_back((u - u_base).cwiseAbs());
    }
    res.locality = locality_statistic(res.token_mass, res.delta_fields);
    return res;
}

LatentDump latent_dump(const AutoencoderModel& ae, const StepperModel* stepper,
                       const io::TrajectoryDataset& ds, int traj, uint64_t seed) {
    LatentDump dump;
    for (int t = 0; t < ds.n_time; ++t) {
        FieldSnapshot snap = ds.snapshot(traj, t);
        io::normalize_values(snap.values, ae.norm);
        const auto tokens = ae.encoder.encode(ae.params, snap, nn::EncodeMode::eval);
        dump.mu.push_back(tokens.mu);
        dump.logsig.push_back(tokens.logsig);
    }
    if (stepper) {
        Rng rng(hash_seed(seed, 0x6c64756dULL));
        Mat z = dump.mu[0];
        dump.predicted.push_back(z);
        for (int t = 1; t < ds.n_time; ++t) {
            z = stepper->step(z, rng);
            dump.predicted.push_back(z);
        }
    }
    // a (token, channel) entry whose posterior stays near the prior carries no
    // information for the decoder
    const Eigen::Index m = dump.mu[0].rows(), h = dump.mu[0].cols();
    dump.informative.assign(static_cast<size_t>(m * h), true);
    for (Eigen::Index i = 0; i < m; ++i)
        for (Eigen::Index j = 0; j < h; ++j) {
            double mean_sig = 0.0;
            for (const Mat& ls : dump.logsig) mean_sig += std::exp(ls(i, j));
            mean_sig /= static_cast<double>(dump.logsig.size());
            if (mean_sig >= 0.9) dump.informative[static_cast<size_t>(i * h + j)] = false;
        }
    return dump;
}

void write_latent_csv(const std::string& path, const LatentDump& dump) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw Error("IoError", "cannot open " + path);
    const Eigen::Index m = dump.mu[0].rows(), h = dump.mu[0].cols();
    out << "t,token,channel,mu,logsig,predicted,informative\n";
    for (size_t t = 0; t < dump.mu.size(); ++t)
        for (Eigen::Index i = 0; i < m; ++i)
            for (Eigen::Index j = 0; j < h; ++j) {
                out << t << "," << i << "," << j << "," << dump.mu[t](i, j) << ","
                    << dump.logsig[t](i, j) << ",";
                if (t < dump.predicted.size())
                    out << dump.predicted[t](i, j);
                out << "," << (dump.informative[static_cast<size_t>(i * h + j)] ? 1 : 0) << "\n";
            }
}

}  // namespace aroma::eval
