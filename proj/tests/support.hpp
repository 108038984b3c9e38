#pragma once

#include <rdc/rdc.hpp>

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <vector>

namespace rdc::test {

inline Matrix random_matrix(Eigen::Index rows, Eigen::Index cols, Engine& rng, double scale = 1.0) {
    std::normal_distribution<double> n(0.0, scale);
    Matrix m(rows, cols);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = n(rng);
    return m;
}

/// Glorot weights plus small random biases so ReLU units are not all tied at zero.
inline Network random_network(const std::vector<std::size_t>& widths, Engine& rng) {
    Network net = make_network(widths, rng);
    std::normal_distribution<double> n(0.0, 0.1);
    for (auto& l : net)
        for (Eigen::Index j = 0; j < l.bias.size(); ++j) l.bias[j] = n(rng);
    return net;
}

inline AutoencoderParams random_autoencoder(std::size_t d, std::vector<std::size_t> hidden, std::size_t p, Engine& rng) {
    ArchitectureConfig arch;
    arch.hidden = std::move(hidden);
    arch.latent = p;
    AutoencoderParams ae = make_autoencoder(d, arch, rng);
    std::normal_distribution<double> n(0.0, 0.1);
    for (Network* net : {&ae.encoder, &ae.decoder})
        for (auto& l : *net)
            for (Eigen::Index j = 0; j < l.bias.size(); ++j) l.bias[j] = n(rng);
    return ae;
}

inline double rel_error(double a, double b) { return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-6}); }

/// Largest relative error between analytic gradients of one network and
/// central differences of f with step h.
inline double max_fd_error(Network& net, const Gradients& g, const std::function<double()>& f, double h = 1e-5) {
    double worst = 0.0;
    auto probe = [&](double& param, double analytic) {
        const double keep = param;
        param = keep + h;
        const double up = f();
        param = keep - h;
        const double down = f();
        param = keep;
        worst = std::max(worst, rel_error(analytic, (up - down) / (2.0 * h)));
    };
    for (std::size_t l = 0; l < net.size(); ++l) {
        for (Eigen::Index i = 0; i < net[l].weights.size(); ++i)
            probe(net[l].weights.data()[i], g.layers[l].weights.data()[i]);
        for (Eigen::Index i = 0; i < net[l].bias.size(); ++i) probe(net[l].bias[i], g.layers[l].bias[i]);
    }
    return worst;
}

inline std::vector<double> uniform_vector(std::size_t n, Engine& rng) {
    std::vector<double> v(n);
    for (auto& x : v) x = uniform01(rng);
    return v;
}

/// Brute-force M nearest neighbours: sort all others by (distance, index).
inline KnnResult brute_knn(const Matrix& Z, std::size_t M) {
    const auto N = static_cast<std::size_t>(Z.rows());
    KnnResult out;
    out.distances.resize(static_cast<Eigen::Index>(N), static_cast<Eigen::Index>(M));
    out.ids.assign(N, std::vector<std::size_t>(M));
    for (std::size_t i = 0; i < N; ++i) {
        std::vector<std::pair<double, std::size_t>> all;
        for (std::size_t j = 0; j < N; ++j) {
            if (j == i) continue;
            double s = 0.0;
            for (Eigen::Index c = 0; c < Z.cols(); ++c) {
                const double d = Z(static_cast<Eigen::Index>(i), c) - Z(static_cast<Eigen::Index>(j), c);
                s += d * d;
            }
            all.emplace_back(s, j);
        }
        std::sort(all.begin(), all.end());
        for (std::size_t m = 0; m < M; ++m) {
            out.distances(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(m)) = std::sqrt(all[m].first);
            out.ids[i][m] = all[m].second;
        }
    }
    return out;
}

}  // namespace rdc::test

#ifdef RDC_SOURCE_DIR
#include <fstream>

namespace rdc::test {

/// Small-network configuration used for synthetic end-to-end runs.
inline RunConfig desk_config(std::uint64_t seed) {
    RunConfig c;
    std::ifstream in(std::string(RDC_SOURCE_DIR) + "/configs/desk-synthetic.json");
    apply_config_json(c, nlohmann::json::parse(in));
    c.seed = seed;
    c.propagate_seed();
    return c;
}

}  // namespace rdc::test
#endif
