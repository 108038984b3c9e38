#pragma once

// DEC-style pseudo-supervision (Student-t soft assignments sharpened into a
// target distribution, KL loss). Used only as the P3 comparison phase of the
// ablation harness.

#include "clustering.hpp"
#include "data.hpp"
#include "model.hpp"
#include "proximity.hpp"
#include "trace.hpp"

#include <cmath>
#include <numeric>

namespace rdc {

/// Row-normalized Student-t (one degree of freedom) similarities to centers.
inline Matrix soft_assignments(const Matrix& Z, const Matrix& centers) {
    Matrix Q(Z.rows(), centers.rows());
    for (Eigen::Index i = 0; i < Z.rows(); ++i) {
        for (Eigen::Index j = 0; j < centers.rows(); ++j) Q(i, j) = 1.0 / (1.0 + (Z.row(i) - centers.row(j)).squaredNorm());
        Q.row(i) /= Q.row(i).sum();
    }
    return Q;
}

/// p_ij proportional to q_ij^2 / sum_i q_ij.
inline Matrix target_distribution(const Matrix& Q) {
    const RowVector freq = Q.colwise().sum();
    Matrix P(Q.rows(), Q.cols());
    for (Eigen::Index i = 0; i < Q.rows(); ++i) {
        for (Eigen::Index j = 0; j < Q.cols(); ++j) P(i, j) = Q(i, j) * Q(i, j) / freq[j];
        P.row(i) /= P.row(i).sum();
    }
    return P;
}

struct DecLoss {
    double loss = 0.0;
    Matrix latent_grad;  // B x p
    Matrix center_grad;  // K x p
};

/// Batch mean of KL(P_i || Q_i) with P fixed; gradients for latents and centers.
inline DecLoss dec_kl(const Matrix& Z, const Matrix& centers, const Matrix& P) {
    if (P.rows() != Z.rows() || P.cols() != centers.rows()) throw ShapeError("dec_kl: target shape mismatch");
    const Matrix Q = soft_assignments(Z, centers);
    const double scale = 1.0 / static_cast<double>(Z.rows());
    DecLoss out;
    out.latent_grad = Matrix::Zero(Z.rows(), Z.cols());
    out.center_grad = Matrix::Zero(centers.rows(), centers.cols());
    for (Eigen::Index i = 0; i < Z.rows(); ++i) {
        for (Eigen::Index j = 0; j < centers.rows(); ++j) {
            if (P(i, j) > 0.0) out.loss += scale * P(i, j) * std::log(P(i, j) / Q(i, j));
            const RowVector diff = Z.row(i) - centers.row(j);
            const double kernel = 1.0 / (1.0 + diff.squaredNorm());
            const RowVector g = 2.0 * scale * (P(i, j) - Q(i, j)) * kernel * diff;
            out.latent_grad.row(i) += g;
            out.center_grad.row(j) -= g;
        }
    }
    return out;
}

struct DecConfig {
    std::size_t k = 4;
    double lr = 1e-3;
    std::size_t batch = 256;
    long long epochs = 50;
    std::uint64_t seed = 0;
};

/// Encoder-only finetuning on the DEC loss. Centers start from k-means on the
/// pretrained latent codes; the target distribution is refreshed every epoch.
inline RunTrace dec_finetune(AutoencoderParams& ae, const Dataset& data, const DecConfig& cfg, const EpochHook& hook = {}) {
    if (data.size() == 0) throw std::invalid_argument("DEC phase needs data");
    if (cfg.batch < 1 || cfg.epochs < 1) throw std::invalid_argument("DEC phase needs batch >= 1 and epochs >= 1");
    const Matrix Z0 = encode(ae, data.X);
    Matrix centers = kmeans(Z0, KMeansConfig{cfg.k, cfg.seed, 300, 1}).centroids;

    AdamState adam = make_adam(ae.encoder, cfg.lr);
    AdamState adam_centers;
    adam_centers.lr = cfg.lr;
    adam_centers.moments.push_back({Matrix::Zero(centers.rows(), centers.cols()), Matrix::Zero(centers.rows(), centers.cols()),
                                    RowVector::Zero(0), RowVector::Zero(0)});
    Network center_holder{LayerParams{centers, RowVector::Zero(0), Activation::Identity}};

    Engine shuffle_rng = stream(cfg.seed, "dec-shuffle");
    const std::size_t N = data.size();
    std::vector<std::size_t> order(N);
    std::iota(order.begin(), order.end(), std::size_t{0});

    RunTrace trace;
    for (long long epoch = 1; epoch <= cfg.epochs; ++epoch) {
        const Matrix Z = encode(ae, data.X);
        const Matrix P = target_distribution(soft_assignments(Z, center_holder[0].weights));
        EpochRecord rec;
        rec.epoch = epoch;
        if (hook) hook(Z, rec);
        std::shuffle(order.begin(), order.end(), shuffle_rng);
        double total = 0.0;
        std::size_t steps = 0;
        for (std::size_t start = 0; start < N; start += cfg.batch) {
            const std::vector<std::size_t> idx(order.begin() + static_cast<long>(start),
                                               order.begin() + static_cast<long>(std::min(N, start + cfg.batch)));
            const Matrix x = gather_rows(data.X, idx);
            const Matrix Pb = gather_rows(P, idx);
            const auto acts = forward(ae.encoder, x);
            DecLoss l = dec_kl(acts.back(), center_holder[0].weights, Pb);
            if (!std::isfinite(l.loss)) throw NumericError("DEC phase diverged in epoch " + std::to_string(epoch));
            adam_step(ae.encoder, backward(ae.encoder, acts, l.latent_grad), adam);
            Gradients gc;
            gc.layers.push_back({std::move(l.center_grad), RowVector::Zero(0)});
            adam_step(center_holder, gc, adam_centers);
            total += l.loss;
            ++steps;
        }
        rec.loss = total / static_cast<double>(steps);
        trace.epochs.push_back(rec);
    }
    trace.stop_reason = StopReason::MaxEpochs;
    return trace;
}

}  // namespace rdc
