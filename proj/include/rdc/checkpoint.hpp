#pragma once

// rdc-ckpt-v1: JSON checkpoints. Weights are row-major flat arrays written
// with shortest round-trip decimal formatting, so save -> load -> save is
// byte-identical. Pretraining checkpoints also carry optimizer moments,
// the iteration counter and random engine states for exact resumption.

#include "model.hpp"
#include "numeric.hpp"
#include "rng.hpp"
#include "trace.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <optional>
#include <string>

namespace rdc {

inline constexpr const char* kCheckpointFormat = "rdc-ckpt-v1";

class CheckpointError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct PretrainResume {
    AdamState adam_encoder;
    AdamState adam_decoder;
    AdamState adam_critic;
    long long iteration = 0;
    std::string shuffle_rng;
    std::string coef_rng;
    std::string augment_rng;
};

struct Checkpoint {
    std::string phase;  // "pretrain" or "finetune"
    AutoencoderParams ae;
    std::optional<CriticParams> critic;
    std::optional<PretrainResume> resume;
};

namespace detail {

using ojson = nlohmann::ordered_json;

template <class M>
ojson flat(const M& m) {
    ojson a = ojson::array();
    for (Eigen::Index i = 0; i < m.size(); ++i) a.push_back(m.data()[i]);
    return a;
}

inline Matrix matrix_from(const ojson& j, Eigen::Index rows, Eigen::Index cols, const char* what) {
    if (!j.is_array() || static_cast<Eigen::Index>(j.size()) != rows * cols)
        throw CheckpointError(std::string(what) + ": expected " + std::to_string(rows * cols) + " values");
    Matrix m(rows, cols);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = j[static_cast<std::size_t>(i)].get<double>();
    return m;
}

inline RowVector rowvec_from(const ojson& j, Eigen::Index n, const char* what) {
    if (!j.is_array() || static_cast<Eigen::Index>(j.size()) != n)
        throw CheckpointError(std::string(what) + ": expected " + std::to_string(n) + " values");
    RowVector v(n);
    for (Eigen::Index i = 0; i < n; ++i) v[i] = j[static_cast<std::size_t>(i)].get<double>();
    return v;
}

inline ojson network_json(const Network& net) {
    ojson a = ojson::array();
    for (const auto& l : net) {
        ojson o;
        o["fan_in"] = l.fan_in();
        o["fan_out"] = l.fan_out();
        o["activation"] = to_string(l.activation);
        o["weights"] = flat(l.weights);
        o["bias"] = flat(l.bias);
        a.push_back(std::move(o));
    }
    return a;
}

inline Network network_from(const ojson& j) {
    if (!j.is_array() || j.empty()) throw CheckpointError("network must be a non-empty array of layers");
    Network net;
    for (const auto& o : j) {
        const auto in = o.at("fan_in").get<Eigen::Index>();
        const auto out = o.at("fan_out").get<Eigen::Index>();
        LayerParams l;
        l.activation = activation_from_string(o.at("activation").get<std::string>());
        l.weights = matrix_from(o.at("weights"), in, out, "weights");
        l.bias = rowvec_from(o.at("bias"), out, "bias");
        if (!net.empty() && net.back().fan_out() != l.fan_in()) throw CheckpointError("consecutive layer widths disagree");
        net.push_back(std::move(l));
    }
    return net;
}

inline ojson adam_json(const AdamState& s) {
    ojson o;
    o["step"] = s.step;
    o["lr"] = s.lr;
    o["beta1"] = s.beta1;
    o["beta2"] = s.beta2;
    o["eps"] = s.eps;
    ojson layers = ojson::array();
    for (const auto& m : s.moments) {
        ojson l;
        l["m_w"] = flat(m.m_w);
        l["v_w"] = flat(m.v_w);
        l["m_b"] = flat(m.m_b);
        l["v_b"] = flat(m.v_b);
        layers.push_back(std::move(l));
    }
    o["moments"] = std::move(layers);
    return o;
}

inline AdamState adam_from(const ojson& o, const Network& net) {
    AdamState s;
    s.step = o.at("step").get<long long>();
    s.lr = o.at("lr").get<double>();
    s.beta1 = o.at("beta1").get<double>();
    s.beta2 = o.at("beta2").get<double>();
    s.eps = o.at("eps").get<double>();
    const auto& layers = o.at("moments");
    if (layers.size() != net.size()) throw CheckpointError("optimizer state does not match network depth");
    for (std::size_t l = 0; l < net.size(); ++l) {
        const auto r = net[l].weights.rows(), c = net[l].weights.cols();
        s.moments.push_back({matrix_from(layers[l].at("m_w"), r, c, "m_w"), matrix_from(layers[l].at("v_w"), r, c, "v_w"),
                             rowvec_from(layers[l].at("m_b"), c, "m_b"), rowvec_from(layers[l].at("v_b"), c, "v_b")});
    }
    return s;
}

}  // namespace detail

inline std::string checkpoint_json(const Checkpoint& ck) {
    detail::ojson o;
    o["format"] = kCheckpointFormat;
    o["phase"] = ck.phase;
    o["encoder"] = detail::network_json(ck.ae.encoder);
    o["decoder"] = detail::network_json(ck.ae.decoder);
    if (ck.critic) o["critic"] = detail::network_json(ck.critic->layers);
    if (ck.resume) {
        detail::ojson r;
        r["iteration"] = ck.resume->iteration;
        r["adam_encoder"] = detail::adam_json(ck.resume->adam_encoder);
        r["adam_decoder"] = detail::adam_json(ck.resume->adam_decoder);
        r["adam_critic"] = detail::adam_json(ck.resume->adam_critic);
        r["shuffle_rng"] = ck.resume->shuffle_rng;
        r["coef_rng"] = ck.resume->coef_rng;
        r["augment_rng"] = ck.resume->augment_rng;
        o["resume"] = std::move(r);
    }
    return o.dump() + "\n";
}

inline Checkpoint parse_checkpoint(const std::string& text) {
    detail::ojson o;
    try {
        o = detail::ojson::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw CheckpointError(std::string("checkpoint is not valid JSON: ") + e.what());
    }
    if (o.value("format", "") != kCheckpointFormat) throw CheckpointError("not an rdc-ckpt-v1 checkpoint");
    try {
        Checkpoint ck;
        ck.phase = o.value("phase", "pretrain");
        ck.ae.encoder = detail::network_from(o.at("encoder"));
        ck.ae.decoder = detail::network_from(o.at("decoder"));
        if (ck.ae.encoder.back().fan_out() != ck.ae.decoder.front().fan_in())
            throw CheckpointError("encoder output does not match decoder input");
        if (o.contains("critic")) ck.critic = CriticParams{detail::network_from(o["critic"])};
        if (o.contains("resume")) {
            if (!ck.critic) throw CheckpointError("resume state without a critic");
            const auto& r = o["resume"];
            PretrainResume p;
            p.iteration = r.at("iteration").get<long long>();
            p.adam_encoder = detail::adam_from(r.at("adam_encoder"), ck.ae.encoder);
            p.adam_decoder = detail::adam_from(r.at("adam_decoder"), ck.ae.decoder);
            p.adam_critic = detail::adam_from(r.at("adam_critic"), ck.critic->layers);
            p.shuffle_rng = r.at("shuffle_rng").get<std::string>();
            p.coef_rng = r.at("coef_rng").get<std::string>();
            p.augment_rng = r.at("augment_rng").get<std::string>();
            ck.resume = std::move(p);
        }
        return ck;
    } catch (const nlohmann::json::exception& e) {
        throw CheckpointError(std::string("malformed checkpoint: ") + e.what());
    }
}

inline void save_checkpoint(const Checkpoint& ck, const std::filesystem::path& path) { write_text(path, checkpoint_json(ck)); }

inline Checkpoint load_checkpoint(const std::filesystem::path& path) {
    if (!std::filesystem::exists(path)) throw CheckpointError("checkpoint not found: " + path.string());
    return parse_checkpoint(read_text(path));
}

inline Checkpoint pretrain_checkpoint(const PretrainState& s) {
    Checkpoint ck;
    ck.phase = "pretrain";
    ck.ae = s.ae;
    ck.critic = s.critic;
    ck.resume = PretrainResume{s.adam_ae_encoder, s.adam_ae_decoder, s.adam_critic, s.iteration,
                               engine_state(s.shuffle_rng), engine_state(s.coef_rng), engine_state(s.augment_rng)};
    return ck;
}

inline PretrainState pretrain_state_from(const Checkpoint& ck) {
    if (!ck.critic || !ck.resume) throw CheckpointError("checkpoint carries no pretraining state to resume from");
    PretrainState s;
    s.ae = ck.ae;
    s.critic = *ck.critic;
    s.adam_ae_encoder = ck.resume->adam_encoder;
    s.adam_ae_decoder = ck.resume->adam_decoder;
    s.adam_critic = ck.resume->adam_critic;
    s.iteration = ck.resume->iteration;
    s.shuffle_rng = engine_from_state(ck.resume->shuffle_rng);
    s.coef_rng = engine_from_state(ck.resume->coef_rng);
    s.augment_rng = engine_from_state(ck.resume->augment_rng);
    return s;
}

}  // namespace rdc
