#pragma once

// Phase two: dual kNN filtering (core points, then reliable neighbours of each
// core point), nearest-neighbour centroid construction (L1), proximity-level
// encoding (L2) and the tau-stability finetuning loop.

#include "data.hpp"
#include "knn.hpp"
#include "model.hpp"
#include "numeric.hpp"
#include "rng.hpp"
#include "trace.hpp"

#include <algorithm>
#include <functional>
#include <numeric>
#include <vector>

namespace rdc {

/// Per-epoch neighbourhood structure over the latent codes. Immutable once built.
struct NeighborhoodState {
    Matrix distances;                                  // N x M, rows ascending
    std::vector<std::vector<std::size_t>> neighbor_ids;  // N x M
    std::vector<double> ratios;                        // r_i
    std::vector<std::size_t> core;                     // ascending indices
    std::vector<long> core_slot;                       // N entries, -1 for border points
    std::vector<std::vector<std::size_t>> reliable;    // per core point, neighbour ranks (0-based)
    Matrix centroids;                                  // |core| x p
    double tau = 0.0;

    std::size_t size() const { return ratios.size(); }
    bool is_core(std::size_t i) const { return core_slot[i] >= 0; }
};

/// r_i = min_m d_im / max_m d_im. A zero farthest distance (duplicates) gives 1.
inline std::vector<double> density_ratios(const Matrix& D) {
    std::vector<double> r(static_cast<std::size_t>(D.rows()));
    for (Eigen::Index i = 0; i < D.rows(); ++i) {
        const double lo = D.row(i).minCoeff();
        const double hi = D.row(i).maxCoeff();
        r[static_cast<std::size_t>(i)] = hi > 0.0 ? lo / hi : 1.0;
    }
    return r;
}

inline std::vector<std::size_t> select_core(const std::vector<double>& r, double alpha) {
    std::vector<std::size_t> core;
    for (std::size_t i = 0; i < r.size(); ++i)
        if (r[i] >= alpha) core.push_back(i);
    return core;
}

/// For each core point, the ranks m with d_im - min_m' d_im' <= beta.
inline std::vector<std::vector<std::size_t>> reliable_neighbors(const Matrix& D, const std::vector<std::size_t>& core,
                                                               double beta) {
    std::vector<std::vector<std::size_t>> out;
    out.reserve(core.size());
    for (std::size_t i : core) {
        const auto row = D.row(static_cast<Eigen::Index>(i));
        const double nearest = row.minCoeff();
        std::vector<std::size_t> keep;
        for (Eigen::Index m = 0; m < row.size(); ++m)
            if (row[m] - nearest <= beta) keep.push_back(static_cast<std::size_t>(m));
        out.push_back(std::move(keep));
    }
    return out;
}

/// Mean latent code of the reliable neighbours of point i.
inline RowVector neighbor_centroid(const Matrix& Z, const std::vector<std::vector<std::size_t>>& neighbor_ids,
                                   const std::vector<std::size_t>& reliable, std::size_t i) {
    if (reliable.empty()) throw std::logic_error("neighbor_centroid: empty reliable set");
    RowVector c = RowVector::Zero(Z.cols());
    for (std::size_t m : reliable) c += Z.row(static_cast<Eigen::Index>(neighbor_ids[i].at(m)));
    return c / static_cast<double>(reliable.size());
}

struct FilterParams {
    double alpha = 0.8;
    double beta = 1.0;
    std::size_t M = 5;

    void validate() const {
        if (!(alpha > 0.0 && alpha <= 1.0)) throw std::invalid_argument("alpha must be in (0, 1]");
        if (!(beta >= 0.0)) throw std::invalid_argument("beta must be >= 0");
        if (M < 1) throw std::invalid_argument("M must be >= 1");
    }
};

/// Builds the neighbourhood state. alpha is not range-checked here so that
/// callers can probe the vacuous threshold alpha = 0.
inline NeighborhoodState build_neighborhood(const Matrix& Z, std::size_t M, double alpha, double beta) {
    NeighborhoodState s;
    auto knn = knn_distances(Z, M);
    s.distances = std::move(knn.distances);
    s.neighbor_ids = std::move(knn.ids);
    s.ratios = density_ratios(s.distances);
    s.core = select_core(s.ratios, alpha);
    s.reliable = reliable_neighbors(s.distances, s.core, beta);
    s.core_slot.assign(s.size(), -1);
    s.centroids.resize(static_cast<Eigen::Index>(s.core.size()), Z.cols());
    for (std::size_t c = 0; c < s.core.size(); ++c) {
        s.core_slot[s.core[c]] = static_cast<long>(c);
        s.centroids.row(static_cast<Eigen::Index>(c)) = neighbor_centroid(Z, s.neighbor_ids, s.reliable[c], s.core[c]);
    }
    s.tau = s.size() ? static_cast<double>(s.core.size()) / static_cast<double>(s.size()) : 0.0;
    return s;
}

inline NeighborhoodState build_neighborhood(const Matrix& Z, const FilterParams& p) {
    return build_neighborhood(Z, p.M, p.alpha, p.beta);
}

/// Mini-batch rows together with their dataset indices.
struct IndexedBatch {
    Matrix x;
    std::vector<std::size_t> index;
};

struct ProximityLoss {
    double l1 = 0.0;
    double l2 = 0.0;
    double loss = 0.0;
    Gradients encoder;
    Gradients decoder;
};

namespace detail {

inline void check_batch(const IndexedBatch& b, const NeighborhoodState& s) {
    if (static_cast<std::size_t>(b.x.rows()) != b.index.size()) throw ShapeError("batch rows and indices differ");
    for (std::size_t i : b.index)
        if (i >= s.size())
            throw std::out_of_range("batch index " + std::to_string(i) + " outside neighbourhood state of size " +
                                    std::to_string(s.size()));
}

}  // namespace detail

/// L1 and/or L2 on one mini-batch with a shared forward pass. Targets
/// g(sigma_i) and sigma_i are constants (no gradient through the centroid).
inline ProximityLoss proximity_loss(const AutoencoderParams& ae, const IndexedBatch& batch,
                                    const NeighborhoodState& state, bool with_l1, bool with_l2) {
    detail::check_batch(batch, state);
    const auto B = batch.x.rows();
    const auto enc_acts = forward(ae.encoder, batch.x);
    const Matrix& Z = enc_acts.back();
    if (state.centroids.rows() > 0 && state.centroids.cols() != Z.cols())
        throw ShapeError("neighbourhood centroids do not match the latent dimension");

    std::vector<Eigen::Index> core_rows, core_slots;
    for (Eigen::Index r = 0; r < B; ++r) {
        const long slot = state.core_slot[batch.index[static_cast<std::size_t>(r)]];
        if (slot >= 0) {
            core_rows.push_back(r);
            core_slots.push_back(slot);
        }
    }
    Matrix sigma(static_cast<Eigen::Index>(core_rows.size()), Z.cols());
    for (std::size_t c = 0; c < core_rows.size(); ++c)
        sigma.row(static_cast<Eigen::Index>(c)) = state.centroids.row(core_slots[c]);

    ProximityLoss out;
    Matrix dZ = Matrix::Zero(B, Z.cols());
    if (with_l1) {
        const auto dec_acts = forward(ae.decoder, Z);
        const Matrix& Xh = dec_acts.back();
        Matrix target = batch.x;
        if (!core_rows.empty()) {
            const Matrix decoded = decode(ae, sigma);
            for (std::size_t c = 0; c < core_rows.size(); ++c) target.row(core_rows[c]) = decoded.row(static_cast<Eigen::Index>(c));
        }
        out.l1 = mse(target, Xh);
        out.decoder = backward(ae.decoder, dec_acts, mse_grad(Xh, target));
        dZ = out.decoder.input;
    } else {
        out.decoder = zero_gradients(ae.decoder);
    }
    if (with_l2 && !core_rows.empty()) {
        const double scale = 1.0 / static_cast<double>(B);
        for (std::size_t c = 0; c < core_rows.size(); ++c) {
            const RowVector diff = Z.row(core_rows[c]) - sigma.row(static_cast<Eigen::Index>(c));
            out.l2 += scale * diff.squaredNorm();
            dZ.row(core_rows[c]) += 2.0 * scale * diff;
        }
    }
    out.loss = out.l1 + out.l2;
    out.encoder = backward(ae.encoder, enc_acts, dZ);
    return out;
}

/// Border rows: ||x_i - x_hat_i||^2; core rows: ||g(sigma_i) - x_hat_i||^2. Batch mean.
inline ProximityLoss loss_l1(const AutoencoderParams& ae, const IndexedBatch& batch, const NeighborhoodState& state) {
    return proximity_loss(ae, batch, state, true, false);
}

/// Sum over core rows of ||f(x_i) - sigma_i||^2 divided by the batch size.
inline ProximityLoss loss_l2(const AutoencoderParams& ae, const IndexedBatch& batch, const NeighborhoodState& state) {
    return proximity_loss(ae, batch, state, false, true);
}

// ---------------------------------------------------------------------------

struct FinetuneConfig {
    FilterParams filter;
    double lr = 1e-3;
    std::size_t batch = 256;
    long long max_epochs = 200;
    long long stability_window = 5;
    std::uint64_t seed = 0;
    bool augment = false;

    void validate() const {
        filter.validate();
        if (batch < 1) throw std::invalid_argument("finetuning batch must be >= 1");
        if (max_epochs < 1) throw std::invalid_argument("max_epochs must be >= 1");
        if (stability_window < 1) throw std::invalid_argument("stability_window must be >= 1");
        if (!(lr >= 0.0)) throw std::invalid_argument("learning rate must be >= 0");
    }
};

/// Called once per epoch with the latent codes the neighbourhood was built
/// from; may fill the optional id/lid/acc fields.
using EpochHook = std::function<void(const Matrix& Z, EpochRecord& rec)>;

/// Repeats: encode everything, rebuild the neighbourhood, one pass of
/// L1 + L2 over shuffled mini-batches. Stops once stability_window epochs in
/// a row (counting the one that set it) bring no new maximum of the core
/// count, or at max_epochs. A constant count therefore stops after exactly
/// stability_window epochs.
inline RunTrace finetune(AutoencoderParams& ae, const Dataset& data, const FinetuneConfig& cfg,
                         const EpochHook& hook = {}) {
    cfg.validate();
    data.validate();
    if (data.size() == 0) throw std::invalid_argument("finetuning needs a non-empty dataset");
    if (data.dim() != ae.input_dim()) throw ShapeError("dataset dimension does not match the autoencoder");

    AdamState adam_enc = make_adam(ae.encoder, cfg.lr);
    AdamState adam_dec = make_adam(ae.decoder, cfg.lr);
    Engine shuffle_rng = stream(cfg.seed, "finetune-shuffle");
    Engine augment_rng = stream(cfg.seed, "finetune-augment");
    const std::size_t N = data.size();
    std::vector<std::size_t> order(N);
    std::iota(order.begin(), order.end(), std::size_t{0});

    RunTrace trace;
    long long stale = 0;
    std::size_t best_core = 0;
    for (long long epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
        const Matrix Z = encode(ae, data.X);
        const NeighborhoodState state = build_neighborhood(Z, cfg.filter);

        EpochRecord rec;
        rec.epoch = epoch;
        rec.tau = state.tau;
        rec.n_core = state.core.size();
        if (hook) hook(Z, rec);

        std::shuffle(order.begin(), order.end(), shuffle_rng);
        double l1 = 0.0, l2 = 0.0;
        std::size_t steps = 0;
        for (std::size_t start = 0; start < N; start += cfg.batch) {
            IndexedBatch b;
            b.index.assign(order.begin() + static_cast<long>(start),
                           order.begin() + static_cast<long>(std::min(N, start + cfg.batch)));
            b.x = gather_rows(data.X, b.index);
            if (cfg.augment) b.x = augment(b.x, data.grid, augment_rng);
            ProximityLoss l = proximity_loss(ae, b, state, true, true);
            if (!std::isfinite(l.loss))
                throw NumericError("finetuning diverged: non-finite loss in epoch " + std::to_string(epoch));
            adam_step(ae.encoder, l.encoder, adam_enc);
            adam_step(ae.decoder, l.decoder, adam_dec);
            l1 += l.l1;
            l2 += l.l2;
            ++steps;
        }
        rec.l1 = l1 / static_cast<double>(steps);
        rec.l2 = l2 / static_cast<double>(steps);
        rec.loss = rec.l1 + rec.l2;

        if (trace.epochs.empty() || rec.n_core > best_core) {
            best_core = rec.n_core;
            stale = 1;
        } else {
            ++stale;
        }
        trace.epochs.push_back(rec);
        if (stale >= cfg.stability_window) {
            trace.stop_reason = StopReason::Stability;
            return trace;
        }
    }
    trace.stop_reason = StopReason::MaxEpochs;
    return trace;
}

}  // namespace rdc
