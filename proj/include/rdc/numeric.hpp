#pragma once

// Dense layers, losses and the Adam update. Everything downstream (autoencoder,
// critic, proximity losses) is expressed as compositions of these pieces.

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace rdc {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using RowVector = Eigen::Matrix<double, 1, Eigen::Dynamic>;

class ShapeError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

class NumericError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

enum class Activation { ReLU, Identity };

inline const char* to_string(Activation a) { return a == Activation::ReLU ? "relu" : "identity"; }

inline Activation activation_from_string(const std::string& s) {
    if (s == "relu") return Activation::ReLU;
    if (s == "identity") return Activation::Identity;
    throw std::invalid_argument("unknown activation '" + s + "'");
}

struct LayerParams {
    Matrix weights;  // fan_in x fan_out
    RowVector bias;  // fan_out
    Activation activation = Activation::Identity;

    std::size_t fan_in() const { return static_cast<std::size_t>(weights.rows()); }
    std::size_t fan_out() const { return static_cast<std::size_t>(weights.cols()); }
};

using Network = std::vector<LayerParams>;

struct LayerGrad {
    Matrix weights;
    RowVector bias;
};

struct Gradients {
    std::vector<LayerGrad> layers;
    Matrix input;  // d loss / d network input
};

/// Layer stack from a list of widths, e.g. {d, 500, 500, 2000, 10}. Hidden
/// layers use ReLU, the last layer is linear. Glorot-uniform weights, zero bias.
template <class Rng>
Network make_network(const std::vector<std::size_t>& widths, Rng& rng) {
    if (widths.size() < 2) throw ShapeError("network needs at least two widths");
    Network net;
    net.reserve(widths.size() - 1);
    for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
        const auto fan_in = widths[l];
        const auto fan_out = widths[l + 1];
        if (fan_in == 0 || fan_out == 0) throw ShapeError("zero-width layer");
        const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
        std::uniform_real_distribution<double> dist(-limit, limit);
        LayerParams layer;
        layer.weights.resize(static_cast<Eigen::Index>(fan_in), static_cast<Eigen::Index>(fan_out));
        for (Eigen::Index i = 0; i < layer.weights.size(); ++i) layer.weights.data()[i] = dist(rng);
        layer.bias = RowVector::Zero(static_cast<Eigen::Index>(fan_out));
        layer.activation = (l + 2 == widths.size()) ? Activation::Identity : Activation::ReLU;
        net.push_back(std::move(layer));
    }
    return net;
}

inline std::vector<std::size_t> widths_of(const Network& net) {
    std::vector<std::size_t> w;
    if (net.empty()) return w;
    w.push_back(net.front().fan_in());
    for (const auto& l : net) w.push_back(l.fan_out());
    return w;
}

inline std::size_t parameter_count(const Network& net) {
    std::size_t n = 0;
    for (const auto& l : net) n += static_cast<std::size_t>(l.weights.size() + l.bias.size());
    return n;
}

/// Activations of every layer. Element 0 is the input itself, so the result
/// has layers.size() + 1 entries and back() is the network output.
inline std::vector<Matrix> forward(const Network& layers, const Matrix& input) {
    std::vector<Matrix> acts;
    acts.reserve(layers.size() + 1);
    acts.push_back(input);
    for (std::size_t l = 0; l < layers.size(); ++l) {
        const auto& layer = layers[l];
        if (layer.bias.size() != layer.weights.cols())
            throw ShapeError("layer " + std::to_string(l) + ": bias length does not match fan_out");
        if (acts.back().cols() != layer.weights.rows())
            throw ShapeError("layer " + std::to_string(l) + ": expected " +
                             std::to_string(layer.weights.rows()) + " input columns, got " +
                             std::to_string(acts.back().cols()));
        Matrix out = acts.back() * layer.weights;
        out.rowwise() += layer.bias;
        if (layer.activation == Activation::ReLU) out = out.cwiseMax(0.0);
        acts.push_back(std::move(out));
    }
    return acts;
}

inline Matrix predict(const Network& layers, const Matrix& input) {
    return std::move(forward(layers, input).back());
}

/// Reverse pass for activations produced by forward(). ReLU derivatives are
/// read off the stored outputs (out > 0).
inline Gradients backward(const Network& layers, const std::vector<Matrix>& acts, const Matrix& output_grad) {
    if (acts.size() != layers.size() + 1) throw ShapeError("activation list does not match layer count");
    if (output_grad.rows() != acts.back().rows() || output_grad.cols() != acts.back().cols())
        throw ShapeError("output gradient shape does not match network output");

    Gradients g;
    g.layers.resize(layers.size());
    Matrix delta = output_grad;
    for (std::size_t l = layers.size(); l-- > 0;) {
        const auto& layer = layers[l];
        if (layer.activation == Activation::ReLU)
            delta = delta.cwiseProduct((acts[l + 1].array() > 0.0).cast<double>().matrix());
        g.layers[l].weights = acts[l].transpose() * delta;
        g.layers[l].bias = delta.colwise().sum();
        delta = delta * layer.weights.transpose();
    }
    g.input = std::move(delta);
    return g;
}

/// Element-wise sum of two gradient sets for the same network.
inline void accumulate(Gradients& into, const Gradients& other) {
    if (into.layers.size() != other.layers.size()) throw ShapeError("gradient layer count mismatch");
    for (std::size_t l = 0; l < into.layers.size(); ++l) {
        into.layers[l].weights += other.layers[l].weights;
        into.layers[l].bias += other.layers[l].bias;
    }
}

inline Gradients zero_gradients(const Network& net) {
    Gradients g;
    for (const auto& l : net)
        g.layers.push_back({Matrix::Zero(l.weights.rows(), l.weights.cols()), RowVector::Zero(l.bias.size())});
    return g;
}

inline void require_same_shape(const Matrix& a, const Matrix& b, const char* what) {
    if (a.rows() != b.rows() || a.cols() != b.cols())
        throw ShapeError(std::string(what) + ": shape mismatch (" + std::to_string(a.rows()) + "x" +
                         std::to_string(a.cols()) + " vs " + std::to_string(b.rows()) + "x" +
                         std::to_string(b.cols()) + ")");
}

/// Batch mean of row-wise squared Euclidean distances.
inline double mse(const Matrix& a, const Matrix& b) {
    require_same_shape(a, b, "mse");
    if (a.rows() == 0) return 0.0;
    return (a - b).squaredNorm() / static_cast<double>(a.rows());
}

/// d mse(a, b) / d a.
inline Matrix mse_grad(const Matrix& a, const Matrix& b) {
    require_same_shape(a, b, "mse_grad");
    if (a.rows() == 0) return Matrix::Zero(a.rows(), a.cols());
    return (2.0 / static_cast<double>(a.rows())) * (a - b);
}

inline bool all_finite(const Matrix& m) { return m.allFinite(); }

struct AdamState {
    struct Moments {
        Matrix m_w, v_w;
        RowVector m_b, v_b;
    };
    std::vector<Moments> moments;
    long long step = 0;
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

inline AdamState make_adam(const Network& net, double lr) {
    AdamState s;
    s.lr = lr;
    for (const auto& l : net) {
        s.moments.push_back({Matrix::Zero(l.weights.rows(), l.weights.cols()),
                             Matrix::Zero(l.weights.rows(), l.weights.cols()), RowVector::Zero(l.bias.size()),
                             RowVector::Zero(l.bias.size())});
    }
    return s;
}

/// Bias-corrected Adam update, in place.
inline void adam_step(Network& net, const Gradients& grads, AdamState& state) {
    if (grads.layers.size() != net.size() || state.moments.size() != net.size())
        throw ShapeError("adam_step: layer count mismatch");
    for (std::size_t l = 0; l < net.size(); ++l) {
        require_same_shape(net[l].weights, grads.layers[l].weights, "adam_step weights");
        require_same_shape(net[l].weights, state.moments[l].m_w, "adam_step moments");
        if (net[l].bias.size() != grads.layers[l].bias.size() || net[l].bias.size() != state.moments[l].m_b.size())
            throw ShapeError("adam_step: bias shape mismatch");
    }
    ++state.step;
    const double t = static_cast<double>(state.step);
    const double c1 = 1.0 - std::pow(state.beta1, t);
    const double c2 = 1.0 - std::pow(state.beta2, t);
    const double b1 = state.beta1, b2 = state.beta2, eps = state.eps, lr = state.lr;

    auto update = [&](auto& param, const auto& grad, auto& m, auto& v) {
        m = b1 * m + (1.0 - b1) * grad;
        v = b2 * v + (1.0 - b2) * grad.cwiseAbs2();
        const auto m_hat = (m / c1).array();
        const auto v_hat = (v / c2).array();
        param.array() -= lr * m_hat / (v_hat.sqrt() + eps);
    };
    for (std::size_t l = 0; l < net.size(); ++l) {
        auto& mo = state.moments[l];
        update(net[l].weights, grads.layers[l].weights, mo.m_w, mo.v_w);
        update(net[l].bias, grads.layers[l].bias, mo.m_b, mo.v_b);
    }
}

}  // namespace rdc
