#pragma once

// K-means on latent codes and the clustering metrics: accuracy under the best
// cluster-to-label matching (Hungarian method), macro and micro F1.

#include "numeric.hpp"
#include "rng.hpp"

#include <algorithm>
#include <limits>
#include <map>
#include <numeric>
#include <set>
#include <vector>

namespace rdc {

struct ClusterResult {
    std::vector<int> assignments;  // 0-based cluster ids
    Matrix centroids;              // K x p
    double inertia = 0.0;
    int iterations = 0;
    std::vector<double> inertia_history;  // after each assignment step
};

struct KMeansConfig {
    std::size_t k = 4;
    std::uint64_t seed = 0;
    int max_iters = 300;
    int restarts = 1;
};

namespace detail {

inline double row_dist2(const Matrix& A, Eigen::Index a, const Matrix& B, Eigen::Index b) {
    return (A.row(a) - B.row(b)).squaredNorm();
}

inline Matrix kmeanspp_seed(const Matrix& Z, std::size_t k, Engine& rng) {
    const auto N = Z.rows();
    Matrix C(static_cast<Eigen::Index>(k), Z.cols());
    std::uniform_int_distribution<Eigen::Index> first(0, N - 1);
    C.row(0) = Z.row(first(rng));
    std::vector<double> d2(static_cast<std::size_t>(N));
    for (Eigen::Index i = 0; i < N; ++i) d2[static_cast<std::size_t>(i)] = row_dist2(Z, i, C, 0);
    for (std::size_t c = 1; c < k; ++c) {
        const double total = std::accumulate(d2.begin(), d2.end(), 0.0);
        Eigen::Index pick = 0;
        if (total > 0.0) {
            double u = uniform01(rng) * total;
            pick = N - 1;
            for (Eigen::Index i = 0; i < N; ++i) {
                u -= d2[static_cast<std::size_t>(i)];
                if (u < 0.0) {
                    pick = i;
                    break;
                }
            }
        } else {
            pick = std::uniform_int_distribution<Eigen::Index>(0, N - 1)(rng);
        }
        C.row(static_cast<Eigen::Index>(c)) = Z.row(pick);
        for (Eigen::Index i = 0; i < N; ++i)
            d2[static_cast<std::size_t>(i)] =
                std::min(d2[static_cast<std::size_t>(i)], row_dist2(Z, i, C, static_cast<Eigen::Index>(c)));
    }
    return C;
}

inline ClusterResult lloyd(const Matrix& Z, Matrix C, int max_iters) {
    const auto N = Z.rows();
    const auto K = C.rows();
    ClusterResult res;
    res.assignments.assign(static_cast<std::size_t>(N), -1);
    for (int it = 0; it < max_iters; ++it) {
        bool changed = false;
        double inertia = 0.0;
        for (Eigen::Index i = 0; i < N; ++i) {
            int best = 0;
            double bd = std::numeric_limits<double>::infinity();
            for (Eigen::Index c = 0; c < K; ++c) {
                const double d = row_dist2(Z, i, C, c);
                if (d < bd) {
                    bd = d;
                    best = static_cast<int>(c);
                }
            }
            inertia += bd;
            if (res.assignments[static_cast<std::size_t>(i)] != best) {
                res.assignments[static_cast<std::size_t>(i)] = best;
                changed = true;
            }
        }
        res.inertia_history.push_back(inertia);
        res.iterations = it + 1;
        if (!changed && it > 0) break;

        Matrix sums = Matrix::Zero(K, Z.cols());
        std::vector<std::size_t> counts(static_cast<std::size_t>(K), 0);
        for (Eigen::Index i = 0; i < N; ++i) {
            const int a = res.assignments[static_cast<std::size_t>(i)];
            sums.row(a) += Z.row(i);
            ++counts[static_cast<std::size_t>(a)];
        }
        for (Eigen::Index c = 0; c < K; ++c) {
            if (counts[static_cast<std::size_t>(c)] > 0) {
                C.row(c) = sums.row(c) / static_cast<double>(counts[static_cast<std::size_t>(c)]);
                continue;
            }
            // Empty cluster: move it to the point farthest from its centroid.
            Eigen::Index far = 0;
            double fd = -1.0;
            for (Eigen::Index i = 0; i < N; ++i) {
                const double d = row_dist2(Z, i, C, res.assignments[static_cast<std::size_t>(i)]);
                if (d > fd) {
                    fd = d;
                    far = i;
                }
            }
            C.row(c) = Z.row(far);
            res.assignments[static_cast<std::size_t>(far)] = static_cast<int>(c);
        }
    }
    double inertia = 0.0;
    for (Eigen::Index i = 0; i < N; ++i) inertia += row_dist2(Z, i, C, res.assignments[static_cast<std::size_t>(i)]);
    res.inertia = inertia;
    res.centroids = std::move(C);
    return res;
}

}  // namespace detail

/// Lloyd iterations from k-means++ seeding; the lowest-inertia restart wins.
inline ClusterResult kmeans(const Matrix& Z, const KMeansConfig& cfg) {
    if (cfg.k < 1) throw std::invalid_argument("kmeans: K must be >= 1");
    if (cfg.k > static_cast<std::size_t>(Z.rows()))
        throw std::invalid_argument("kmeans: K = " + std::to_string(cfg.k) + " exceeds N = " + std::to_string(Z.rows()));
    Engine rng = stream(cfg.seed, "kmeans");
    ClusterResult best;
    for (int r = 0; r < std::max(1, cfg.restarts); ++r) {
        ClusterResult res = detail::lloyd(Z, detail::kmeanspp_seed(Z, cfg.k, rng), cfg.max_iters);
        if (r == 0 || res.inertia < best.inertia) best = std::move(res);
    }
    return best;
}

/// Minimum-cost perfect matching on a square cost matrix (Kuhn-Munkres with
/// potentials, O(n^3)). Returns row -> column.
inline std::vector<std::size_t> hungarian_min_cost(const std::vector<std::vector<double>>& cost) {
    const std::size_t n = cost.size();
    for (const auto& row : cost)
        if (row.size() != n) throw ShapeError("hungarian: cost matrix must be square");
    constexpr double inf = std::numeric_limits<double>::infinity();
    // 1-based arrays; column 0 is a virtual start.
    std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
    std::vector<std::size_t> p(n + 1, 0), way(n + 1, 0);
    for (std::size_t i = 1; i <= n; ++i) {
        p[0] = i;
        std::size_t j0 = 0;
        std::vector<double> minv(n + 1, inf);
        std::vector<char> used(n + 1, 0);
        do {
            used[j0] = 1;
            const std::size_t i0 = p[j0];
            double delta = inf;
            std::size_t j1 = 0;
            for (std::size_t j = 1; j <= n; ++j) {
                if (used[j]) continue;
                const double cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
                if (cur < minv[j]) {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if (minv[j] < delta) {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for (std::size_t j = 0; j <= n; ++j) {
                if (used[j]) {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
        } while (p[j0] != 0);
        do {
            const std::size_t j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
        } while (j0 != 0);
    }
    std::vector<std::size_t> row_to_col(n);
    for (std::size_t j = 1; j <= n; ++j)
        if (p[j] != 0) row_to_col[p[j] - 1] = j - 1;
    return row_to_col;
}

struct MetricReport {
    double acc = 0.0;
    double f1_macro = 0.0;
    double f1_micro = 0.0;
    std::map<int, int> mapping;  // cluster id -> label
};

struct AccuracyResult {
    double acc = 0.0;
    std::map<int, int> mapping;
};

/// Best matched fraction over cluster -> label bijections. Clusters or labels
/// in excess are matched against padding and map to nothing.
inline AccuracyResult accuracy(const std::vector<int>& pred, const std::vector<int>& truth) {
    if (pred.size() != truth.size()) throw std::invalid_argument("accuracy: prediction and label lengths differ");
    AccuracyResult out;
    if (pred.empty()) return out;
    const std::set<int> clusters(pred.begin(), pred.end());
    const std::set<int> labels(truth.begin(), truth.end());
    const std::vector<int> cl(clusters.begin(), clusters.end()), lb(labels.begin(), labels.end());
    const std::size_t n = std::max(cl.size(), lb.size());
    std::map<int, std::size_t> ci, li;
    for (std::size_t i = 0; i < cl.size(); ++i) ci[cl[i]] = i;
    for (std::size_t i = 0; i < lb.size(); ++i) li[lb[i]] = i;
    std::vector<std::vector<double>> count(n, std::vector<double>(n, 0.0));
    for (std::size_t s = 0; s < pred.size(); ++s) count[ci[pred[s]]][li[truth[s]]] += 1.0;
    double max_count = 0.0;
    for (const auto& row : count)
        for (double c : row) max_count = std::max(max_count, c);
    std::vector<std::vector<double>> cost(n, std::vector<double>(n));
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) cost[i][j] = max_count - count[i][j];
    const auto assign = hungarian_min_cost(cost);
    double matched = 0.0;
    for (std::size_t i = 0; i < cl.size(); ++i) {
        if (assign[i] < lb.size()) {
            out.mapping[cl[i]] = lb[assign[i]];
            matched += count[i][assign[i]];
        }
    }
    out.acc = matched / static_cast<double>(pred.size());
    return out;
}

struct F1Scores {
    double macro = 0.0;
    double micro = 0.0;
};

/// Predictions are relabelled through mapping (unmapped clusters predict no
/// class). Per-class F1 with no support on either side counts as 0.
inline F1Scores f1_scores(const std::vector<int>& pred, const std::vector<int>& truth, const std::map<int, int>& mapping) {
    if (pred.size() != truth.size()) throw std::invalid_argument("f1_scores: prediction and label lengths differ");
    std::set<int> classes(truth.begin(), truth.end());
    for (const auto& [c, l] : mapping) classes.insert(l);
    std::map<int, std::size_t> tp, fp, fn;
    for (std::size_t s = 0; s < pred.size(); ++s) {
        const auto it = mapping.find(pred[s]);
        const bool has = it != mapping.end();
        if (has && it->second == truth[s]) {
            ++tp[truth[s]];
        } else {
            if (has) ++fp[it->second];
            ++fn[truth[s]];
        }
    }
    F1Scores f;
    std::size_t TP = 0, FP = 0, FN = 0;
    for (int c : classes) {
        const std::size_t denom = 2 * tp[c] + fp[c] + fn[c];
        f.macro += denom ? 2.0 * static_cast<double>(tp[c]) / static_cast<double>(denom) : 0.0;
        TP += tp[c];
        FP += fp[c];
        FN += fn[c];
    }
    if (!classes.empty()) f.macro /= static_cast<double>(classes.size());
    const std::size_t denom = 2 * TP + FP + FN;
    f.micro = denom ? 2.0 * static_cast<double>(TP) / static_cast<double>(denom) : 0.0;
    return f;
}

inline MetricReport evaluate_clustering(const std::vector<int>& pred, const std::vector<int>& truth) {
    const auto a = accuracy(pred, truth);
    const auto f = f1_scores(pred, truth, a.mapping);
    return MetricReport{a.acc, f.macro, f.micro, a.mapping};
}

}  // namespace rdc
