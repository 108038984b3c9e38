#pragma once

// Manifold diagnostics: TwoNN intrinsic dimension and PCA linear intrinsic
// dimension. Their gap (LID - ID) grows with the curvature of the latent
// manifold.

#include "knn.hpp"
#include "numeric.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <iostream>
#include <map>
#include <optional>
#include <vector>

namespace rdc {

class GeometryError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Maximum-likelihood TwoNN estimate from the ratios mu_i = r2 / r1.
///
/// ln(mu) is exponential with rate d. The largest `discard_fraction` of the
/// ratios are treated as right-censored at the largest kept value, so the
/// estimate is n_kept / (sum_kept ln mu + n_censored * ln mu_cut). With no
/// discard this is n / sum ln mu.
inline double twonn_from_ratios(std::vector<double> mu, double discard_fraction = 0.1) {
    if (mu.empty()) throw GeometryError("twonn: no ratios");
    if (!(discard_fraction >= 0.0 && discard_fraction < 1.0)) throw std::invalid_argument("discard fraction must be in [0, 1)");
    std::sort(mu.begin(), mu.end());
    const std::size_t n = mu.size();
    const auto kept = static_cast<std::size_t>(std::floor(static_cast<double>(n) * (1.0 - discard_fraction)));
    if (kept == 0) throw GeometryError("twonn: nothing left after discarding");
    double sum = 0.0;
    for (std::size_t i = 0; i < kept; ++i) sum += std::log(mu[i]);
    sum += static_cast<double>(n - kept) * std::log(mu[kept - 1]);
    if (!(sum > 0.0)) throw GeometryError("twonn: degenerate neighbour ratios");
    return static_cast<double>(kept) / sum;
}

inline constexpr std::size_t kTwoNnMinPoints = 20;

inline double twonn_id(const Matrix& Z, double discard_fraction = 0.1) {
    const auto N = static_cast<std::size_t>(Z.rows());
    if (N < kTwoNnMinPoints) throw GeometryError("twonn: need at least 20 points, got " + std::to_string(N));
    const auto knn = knn_distances(Z, 2);
    std::vector<double> mu;
    mu.reserve(N);
    std::size_t dropped = 0;
    for (std::size_t i = 0; i < N; ++i) {
        const double r1 = knn.distances(static_cast<Eigen::Index>(i), 0);
        const double r2 = knn.distances(static_cast<Eigen::Index>(i), 1);
        if (r1 > 0.0) {
            mu.push_back(r2 / r1);
        } else {
            ++dropped;
        }
    }
    if (mu.empty()) throw GeometryError("twonn: every point has a duplicate");
    if (dropped) std::cerr << "warning: twonn dropped " << dropped << " duplicated points\n";
    if (mu.size() < kTwoNnMinPoints) throw GeometryError("twonn: too few distinct points");
    return twonn_from_ratios(std::move(mu), discard_fraction);
}

/// Eigenvalues of the sample covariance (divisor N - 1), descending.
inline std::vector<double> covariance_spectrum(const Matrix& Z) {
    if (Z.rows() < 2) throw GeometryError("pca: need at least two points");
    const Matrix centered = Z.rowwise() - Z.colwise().mean();
    const Matrix cov = (centered.transpose() * centered) / static_cast<double>(Z.rows() - 1);
    Eigen::SelfAdjointEigenSolver<Matrix> es(cov, Eigen::EigenvaluesOnly);
    std::vector<double> ev(es.eigenvalues().data(), es.eigenvalues().data() + es.eigenvalues().size());
    for (double& e : ev) e = std::max(e, 0.0);
    std::sort(ev.rbegin(), ev.rend());
    return ev;
}

/// Smallest k whose top-k covariance eigenvalues reach variance_fraction of
/// the total. All-identical points give 1.
inline std::size_t pca_lid(const Matrix& Z, double variance_fraction = 0.9) {
    if (!(variance_fraction > 0.0 && variance_fraction <= 1.0)) throw std::invalid_argument("variance fraction must be in (0, 1]");
    const auto ev = covariance_spectrum(Z);
    double total = 0.0;
    for (double e : ev) total += e;
    if (!(total > 0.0)) return 1;
    const double goal = variance_fraction * total * (1.0 - 1e-12);
    double cum = 0.0;
    for (std::size_t k = 0; k < ev.size(); ++k) {
        cum += ev[k];
        if (cum >= goal) return k + 1;
    }
    return ev.size();
}

struct GeometryReport {
    double id_estimate = 0.0;
    double lid_estimate = 0.0;  // integer for pooled reports; mean over clusters otherwise
    double gap = 0.0;
    std::size_t n_points = 0;
};

inline GeometryReport geometry_report(const Matrix& Z) {
    GeometryReport r;
    r.n_points = static_cast<std::size_t>(Z.rows());
    r.id_estimate = twonn_id(Z);
    r.lid_estimate = static_cast<double>(pca_lid(Z));
    r.gap = r.lid_estimate - r.id_estimate;
    return r;
}

/// Per-label ID and LID averaged over the labelled groups that have enough points.
inline GeometryReport geometry_report_per_cluster(const Matrix& Z, const std::vector<int>& labels) {
    if (labels.size() != static_cast<std::size_t>(Z.rows())) throw ShapeError("labels do not match latent rows");
    std::map<int, std::vector<std::size_t>> groups;
    for (std::size_t i = 0; i < labels.size(); ++i) groups[labels[i]].push_back(i);
    GeometryReport r;
    r.n_points = labels.size();
    std::size_t used = 0;
    for (const auto& [label, idx] : groups) {
        if (idx.size() < kTwoNnMinPoints) continue;
        Matrix sub(static_cast<Eigen::Index>(idx.size()), Z.cols());
        for (std::size_t k = 0; k < idx.size(); ++k) sub.row(static_cast<Eigen::Index>(k)) = Z.row(static_cast<Eigen::Index>(idx[k]));
        r.id_estimate += twonn_id(sub);
        r.lid_estimate += static_cast<double>(pca_lid(sub));
        ++used;
    }
    if (!used) throw GeometryError("no labelled group has enough points for TwoNN");
    r.id_estimate /= static_cast<double>(used);
    r.lid_estimate /= static_cast<double>(used);
    r.gap = r.lid_estimate - r.id_estimate;
    return r;
}

/// Per-epoch ID and LID. Each estimate is attempted independently; a failure
/// leaves that value empty and never propagates.
inline void track_geometry(const Matrix& Z, std::optional<double>& id, std::optional<double>& lid,
                           const std::vector<int>* per_cluster_labels = nullptr) {
    id.reset();
    lid.reset();
    if (per_cluster_labels) {
        try {
            const GeometryReport g = geometry_report_per_cluster(Z, *per_cluster_labels);
            id = g.id_estimate;
            lid = g.lid_estimate;
        } catch (const std::exception& e) {
            std::cerr << "warning: geometry tracking skipped: " << e.what() << "\n";
        }
        return;
    }
    try {
        id = twonn_id(Z);
    } catch (const std::exception& e) {
        std::cerr << "warning: ID estimate skipped: " << e.what() << "\n";
    }
    try {
        lid = static_cast<double>(pca_lid(Z));
    } catch (const std::exception& e) {
        std::cerr << "warning: LID estimate skipped: " << e.what() << "\n";
    }
}

}  // namespace rdc
