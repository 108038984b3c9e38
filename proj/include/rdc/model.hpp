#pragma once

// Autoencoder + critic and the adversarially constrained interpolation
// pretraining loop (phase one).

#include "data.hpp"
#include "numeric.hpp"
#include "rng.hpp"

#include <algorithm>
#include <numeric>
#include <span>
#include <string>
#include <vector>

namespace rdc {

struct ArchitectureConfig {
    std::vector<std::size_t> hidden{500, 500, 2000};
    std::size_t latent = 10;
};

struct AutoencoderParams {
    Network encoder;
    Network decoder;

    std::size_t input_dim() const { return encoder.empty() ? 0 : encoder.front().fan_in(); }
    std::size_t latent_dim() const { return encoder.empty() ? 0 : encoder.back().fan_out(); }
};

struct CriticParams {
    Network layers;
};

/// Encoder d -> hidden... -> latent, decoder mirrored.
template <class Rng>
AutoencoderParams make_autoencoder(std::size_t input_dim, const ArchitectureConfig& arch, Rng& rng) {
    std::vector<std::size_t> enc{input_dim};
    enc.insert(enc.end(), arch.hidden.begin(), arch.hidden.end());
    enc.push_back(arch.latent);
    std::vector<std::size_t> dec(enc.rbegin(), enc.rend());
    AutoencoderParams ae;
    ae.encoder = make_network(enc, rng);
    ae.decoder = make_network(dec, rng);
    return ae;
}

/// Critic d -> hidden... -> latent -> 1, ReLU everywhere but the scalar head.
template <class Rng>
CriticParams make_critic(std::size_t input_dim, const ArchitectureConfig& arch, Rng& rng) {
    std::vector<std::size_t> w{input_dim};
    w.insert(w.end(), arch.hidden.begin(), arch.hidden.end());
    w.push_back(arch.latent);
    w.push_back(1);
    return CriticParams{make_network(w, rng)};
}

inline Matrix encode(const AutoencoderParams& ae, const Matrix& X) { return predict(ae.encoder, X); }
inline Matrix decode(const AutoencoderParams& ae, const Matrix& Z) { return predict(ae.decoder, Z); }

inline RowVector interpolate_latent(const RowVector& z1, const RowVector& z2, double phi) {
    if (!(phi >= 0.0 && phi <= 1.0)) throw std::invalid_argument("interpolation coefficient outside [0, 1]");
    if (z1.size() != z2.size()) throw ShapeError("interpolate_latent: latent sizes differ");
    return phi * z1 + (1.0 - phi) * z2;
}

namespace detail {

inline void check_coefficients(std::span<const double> v, const char* what) {
    for (double x : v)
        if (!(x >= 0.0 && x <= 1.0)) throw std::invalid_argument(std::string(what) + " coefficient outside [0, 1]");
}

// Rows 2k and 2k+1 mixed with phi_k.
inline Matrix interpolate_pairs(const Matrix& Z, std::span<const double> phis) {
    const Eigen::Index pairs = Z.rows() / 2;
    Matrix out(pairs, Z.cols());
    for (Eigen::Index k = 0; k < pairs; ++k) {
        const double p = phis[static_cast<std::size_t>(k)];
        out.row(k) = p * Z.row(2 * k) + (1.0 - p) * Z.row(2 * k + 1);
    }
    return out;
}

inline void check_pairing(const Matrix& batch, std::span<const double> phis) {
    if (batch.rows() < 2 || batch.rows() % 2 != 0)
        throw std::invalid_argument("interpolation needs an even batch of at least two rows, got " +
                                    std::to_string(batch.rows()));
    if (phis.size() != static_cast<std::size_t>(batch.rows() / 2))
        throw std::invalid_argument("need one interpolation coefficient per pair");
    check_coefficients(phis, "interpolation");
}

}  // namespace detail

struct AeLoss {
    double loss = 0.0;
    double reconstruction = 0.0;
    double fooling = 0.0;
    Gradients encoder;
    Gradients decoder;
};

/// mse(x, x_hat) + lambda * mean_k c(x_hat_phi_k)^2. The critic is a constant
/// here; gradients reach encoder and decoder only.
inline AeLoss ae_loss(const AutoencoderParams& ae, const CriticParams& critic, const Matrix& batch,
                      std::span<const double> phis, double lambda) {
    detail::check_pairing(batch, phis);
    if (lambda < 0.0) throw std::invalid_argument("lambda must be non-negative");

    const auto enc_acts = forward(ae.encoder, batch);
    const Matrix& Z = enc_acts.back();
    const auto dec_acts = forward(ae.decoder, Z);
    const Matrix& Xh = dec_acts.back();

    AeLoss out;
    out.reconstruction = mse(batch, Xh);
    Matrix dZ;
    {
        Gradients g = backward(ae.decoder, dec_acts, mse_grad(Xh, batch));
        out.decoder = std::move(g);
        dZ = std::move(out.decoder.input);
    }

    if (lambda > 0.0) {
        const Matrix Zphi = detail::interpolate_pairs(Z, phis);
        const auto mix_acts = forward(ae.decoder, Zphi);
        const auto crit_acts = forward(critic.layers, mix_acts.back());
        const Matrix& c = crit_acts.back();
        const Matrix zero = Matrix::Zero(c.rows(), c.cols());
        out.fooling = mse(c, zero);
        Gradients gc = backward(critic.layers, crit_acts, lambda * mse_grad(c, zero));
        Gradients gd = backward(ae.decoder, mix_acts, gc.input);
        accumulate(out.decoder, gd);
        for (Eigen::Index k = 0; k < Zphi.rows(); ++k) {
            const double p = phis[static_cast<std::size_t>(k)];
            dZ.row(2 * k) += p * gd.input.row(k);
            dZ.row(2 * k + 1) += (1.0 - p) * gd.input.row(k);
        }
    }
    out.loss = out.reconstruction + lambda * out.fooling;
    out.encoder = backward(ae.encoder, enc_acts, dZ);
    return out;
}

struct CriticLoss {
    double loss = 0.0;
    double regression = 0.0;
    double realism = 0.0;
    Gradients critic;
};

/// mean_k (c(x_hat_phi_k) - phi_k)^2 + mean_i c(eta_i x_i + (1 - eta_i) x_hat_i)^2.
/// The autoencoder is a constant here.
inline CriticLoss critic_loss(const AutoencoderParams& ae, const CriticParams& critic, const Matrix& batch,
                              std::span<const double> phis, std::span<const double> etas) {
    detail::check_pairing(batch, phis);
    if (etas.size() != static_cast<std::size_t>(batch.rows()))
        throw std::invalid_argument("need one mixing coefficient per sample");
    detail::check_coefficients(etas, "mixing");

    const Matrix Z = encode(ae, batch);
    const Matrix Xh = decode(ae, Z);
    const Matrix Xphi = decode(ae, detail::interpolate_pairs(Z, phis));

    Matrix mixed(batch.rows(), batch.cols());
    for (Eigen::Index i = 0; i < batch.rows(); ++i) {
        const double e = etas[static_cast<std::size_t>(i)];
        mixed.row(i) = e * batch.row(i) + (1.0 - e) * Xh.row(i);
    }

    CriticLoss out;
    const auto acts_phi = forward(critic.layers, Xphi);
    Matrix target(acts_phi.back().rows(), 1);
    for (Eigen::Index k = 0; k < target.rows(); ++k) target(k, 0) = phis[static_cast<std::size_t>(k)];
    out.regression = mse(acts_phi.back(), target);
    out.critic = backward(critic.layers, acts_phi, mse_grad(acts_phi.back(), target));

    const auto acts_mix = forward(critic.layers, mixed);
    const Matrix zero = Matrix::Zero(acts_mix.back().rows(), 1);
    out.realism = mse(acts_mix.back(), zero);
    accumulate(out.critic, backward(critic.layers, acts_mix, mse_grad(acts_mix.back(), zero)));
    out.loss = out.regression + out.realism;
    return out;
}

/// Plain reconstruction loss with encoder/decoder gradients.
inline AeLoss reconstruction_loss(const AutoencoderParams& ae, const Matrix& batch) {
    const auto enc_acts = forward(ae.encoder, batch);
    const auto dec_acts = forward(ae.decoder, enc_acts.back());
    AeLoss out;
    out.reconstruction = mse(batch, dec_acts.back());
    out.loss = out.reconstruction;
    out.decoder = backward(ae.decoder, dec_acts, mse_grad(dec_acts.back(), batch));
    out.encoder = backward(ae.encoder, enc_acts, out.decoder.input);
    return out;
}

// ---------------------------------------------------------------------------
// Pretraining

struct PretrainConfig {
    long long iterations = 10000;  // T1
    double lr = 1e-3;
    std::size_t batch = 256;
    double lambda = 0.5;
    std::uint64_t seed = 0;
    bool augment = false;
    bool train_critic = true;
    ArchitectureConfig arch;

    void validate() const {
        if (iterations < 1) throw std::invalid_argument("T1 must be >= 1");
        if (lambda < 0.0) throw std::invalid_argument("lambda must be >= 0");
        if (batch < 2) throw std::invalid_argument("pretraining batch must be >= 2");
        if (!(lr >= 0.0)) throw std::invalid_argument("learning rate must be >= 0");
        if (arch.latent < 1) throw std::invalid_argument("latent dimension must be >= 1");
    }
};

/// Everything needed to continue pretraining bit-for-bit.
struct PretrainState {
    AutoencoderParams ae;
    CriticParams critic;
    AdamState adam_ae_encoder;
    AdamState adam_ae_decoder;
    AdamState adam_critic;
    long long iteration = 0;  // completed iterations
    Engine shuffle_rng;
    Engine coef_rng;
    Engine augment_rng;
};

struct PretrainRecord {
    long long iteration = 0;
    bool ae_step = false;
    double loss = 0.0;
    double reconstruction = 0.0;  // only meaningful on autoencoder steps
};

struct PretrainTrace {
    std::vector<PretrainRecord> records;
};

inline PretrainState init_pretrain(std::size_t input_dim, const PretrainConfig& cfg) {
    cfg.validate();
    Engine init = stream(cfg.seed, "init");
    PretrainState s;
    s.ae = make_autoencoder(input_dim, cfg.arch, init);
    s.critic = make_critic(input_dim, cfg.arch, init);
    s.adam_ae_encoder = make_adam(s.ae.encoder, cfg.lr);
    s.adam_ae_decoder = make_adam(s.ae.decoder, cfg.lr);
    s.adam_critic = make_adam(s.critic.layers, cfg.lr);
    s.shuffle_rng = stream(cfg.seed, "shuffle");
    s.coef_rng = stream(cfg.seed, "phi-eta");
    s.augment_rng = stream(cfg.seed, "augment");
    return s;
}

/// Random subset of min(batch, n) indices rounded down to an even count, in
/// random order (partial Fisher-Yates).
inline std::vector<std::size_t> sample_pairs_batch(std::size_t n, std::size_t batch, Engine& rng) {
    std::size_t b = std::min(batch, n);
    b -= b % 2;
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    for (std::size_t i = 0; i < b; ++i) {
        std::uniform_int_distribution<std::size_t> pick(i, n - 1);
        std::swap(idx[i], idx[pick(rng)]);
    }
    idx.resize(b);
    return idx;
}

/// Runs iterations state.iteration+1 .. cfg.iterations. Iteration i (1-based)
/// updates the autoencoder when i is even and the critic when i is odd.
inline PretrainTrace pretrain(PretrainState& s, const Dataset& data, const PretrainConfig& cfg) {
    cfg.validate();
    data.validate();
    if (data.size() < 2) throw std::invalid_argument("pretraining needs at least two samples");
    if (data.dim() != s.ae.input_dim()) throw ShapeError("dataset dimension does not match the autoencoder");
    s.adam_ae_encoder.lr = s.adam_ae_decoder.lr = s.adam_critic.lr = cfg.lr;

    PretrainTrace trace;
    for (long long i = s.iteration + 1; i <= cfg.iterations; ++i) {
        const auto idx = sample_pairs_batch(data.size(), cfg.batch, s.shuffle_rng);
        Matrix batch = gather_rows(data.X, idx);
        if (cfg.augment) batch = augment(batch, data.grid, s.augment_rng);
        std::vector<double> phis(idx.size() / 2), etas(idx.size());
        for (auto& p : phis) p = uniform01(s.coef_rng);
        for (auto& e : etas) e = uniform01(s.coef_rng);

        PretrainRecord rec;
        rec.iteration = i;
        if (i % 2 == 0) {
            AeLoss l = ae_loss(s.ae, s.critic, batch, phis, cfg.lambda);
            if (!std::isfinite(l.loss))
                throw NumericError("pretraining diverged: non-finite autoencoder loss at iteration " + std::to_string(i));
            adam_step(s.ae.encoder, l.encoder, s.adam_ae_encoder);
            adam_step(s.ae.decoder, l.decoder, s.adam_ae_decoder);
            rec.ae_step = true;
            rec.loss = l.loss;
            rec.reconstruction = l.reconstruction;
        } else {
            CriticLoss l = critic_loss(s.ae, s.critic, batch, phis, etas);
            if (!std::isfinite(l.loss))
                throw NumericError("pretraining diverged: non-finite critic loss at iteration " + std::to_string(i));
            if (cfg.train_critic) adam_step(s.critic.layers, l.critic, s.adam_critic);
            rec.loss = l.loss;
        }
        s.iteration = i;
        trace.records.push_back(rec);
    }
    return trace;
}

}  // namespace rdc
