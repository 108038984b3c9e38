#pragma once

// Exact k-nearest neighbours in Euclidean space. A kd-tree handles low and
// medium dimensions, brute force covers the rest. Both produce identical
// output: ascending distance, ties broken by lower index, self excluded.

#include "numeric.hpp"
#include "parallel.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <memory>
#include <numeric>
#include <queue>
#include <vector>

namespace rdc {

struct KnnResult {
    Matrix distances;                         // N x M, rows ascending
    std::vector<std::vector<std::size_t>> ids;  // N x M

    std::size_t size() const { return ids.size(); }
    std::size_t k() const { return static_cast<std::size_t>(distances.cols()); }
};

namespace detail {

inline double squared_distance(const Matrix& Z, std::size_t a, std::size_t b) {
    double s = 0.0;
    const double* pa = Z.data() + static_cast<Eigen::Index>(a) * Z.cols();
    const double* pb = Z.data() + static_cast<Eigen::Index>(b) * Z.cols();
    for (Eigen::Index j = 0; j < Z.cols(); ++j) {
        const double d = pa[j] - pb[j];
        s += d * d;
    }
    return s;
}

struct Candidate {
    double dist2;
    std::size_t id;
    bool operator<(const Candidate& o) const { return dist2 < o.dist2 || (dist2 == o.dist2 && id < o.id); }
};

// Max-heap of the k best candidates seen so far.
class BestK {
public:
    explicit BestK(std::size_t k) : k_(k) {}
    void offer(const Candidate& c) {
        if (heap_.size() < k_) {
            heap_.push(c);
        } else if (c < heap_.top()) {
            heap_.pop();
            heap_.push(c);
        }
    }
    bool full() const { return heap_.size() == k_; }
    double worst() const { return heap_.top().dist2; }
    std::vector<Candidate> sorted() {
        std::vector<Candidate> out;
        while (!heap_.empty()) {
            out.push_back(heap_.top());
            heap_.pop();
        }
        std::reverse(out.begin(), out.end());
        return out;
    }

private:
    std::size_t k_;
    std::priority_queue<Candidate> heap_;
};

class KdTree {
public:
    explicit KdTree(const Matrix& Z) : Z_(Z), order_(static_cast<std::size_t>(Z.rows())) {
        std::iota(order_.begin(), order_.end(), std::size_t{0});
        if (!order_.empty()) root_ = build(0, order_.size());
    }

    void query(std::size_t self, BestK& best) const {
        if (root_) search(*root_, self, best);
    }

private:
    static constexpr std::size_t kLeafSize = 16;

    struct Node {
        std::size_t begin = 0, end = 0;  // leaf range in order_
        Eigen::Index axis = -1;
        double split = 0.0;
        std::unique_ptr<Node> left, right;
    };

    std::unique_ptr<Node> build(std::size_t begin, std::size_t end) {
        auto node = std::make_unique<Node>();
        node->begin = begin;
        node->end = end;
        if (end - begin <= kLeafSize) return node;
        Eigen::Index axis = 0;
        double best_spread = -1.0;
        for (Eigen::Index j = 0; j < Z_.cols(); ++j) {
            double lo = Z_(static_cast<Eigen::Index>(order_[begin]), j), hi = lo;
            for (std::size_t i = begin; i < end; ++i) {
                const double v = Z_(static_cast<Eigen::Index>(order_[i]), j);
                lo = std::min(lo, v);
                hi = std::max(hi, v);
            }
            if (hi - lo > best_spread) {
                best_spread = hi - lo;
                axis = j;
            }
        }
        if (best_spread <= 0.0) return node;  // all points coincide
        const std::size_t mid = begin + (end - begin) / 2;
        std::nth_element(order_.begin() + static_cast<long>(begin), order_.begin() + static_cast<long>(mid),
                         order_.begin() + static_cast<long>(end), [&](std::size_t a, std::size_t b) {
                             return Z_(static_cast<Eigen::Index>(a), axis) < Z_(static_cast<Eigen::Index>(b), axis);
                         });
        node->axis = axis;
        node->split = Z_(static_cast<Eigen::Index>(order_[mid]), axis);
        node->left = build(begin, mid);
        node->right = build(mid, end);
        return node;
    }

    void search(const Node& node, std::size_t self, BestK& best) const {
        if (!node.left) {
            for (std::size_t i = node.begin; i < node.end; ++i) {
                const std::size_t j = order_[i];
                if (j != self) best.offer({squared_distance(Z_, self, j), j});
            }
            return;
        }
        // Left holds values <= split, right holds values >= split.
        const double diff = Z_(static_cast<Eigen::Index>(self), node.axis) - node.split;
        const Node& near = diff <= 0.0 ? *node.left : *node.right;
        const Node& far = diff <= 0.0 ? *node.right : *node.left;
        search(near, self, best);
        // <= keeps equal-distance candidates with a lower index reachable
        if (!best.full() || diff * diff <= best.worst()) search(far, self, best);
    }

    const Matrix& Z_;
    std::vector<std::size_t> order_;
    std::unique_ptr<Node> root_;
};

inline void write_row(KnnResult& out, std::size_t i, std::vector<Candidate> cands) {
    for (std::size_t m = 0; m < cands.size(); ++m) {
        out.distances(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(m)) = std::sqrt(cands[m].dist2);
        out.ids[i][m] = cands[m].id;
    }
}

}  // namespace detail

enum class KnnMethod { Auto, KdTree, BruteForce };

/// For every row of Z, its M nearest other rows.
inline KnnResult knn_distances(const Matrix& Z, std::size_t M, KnnMethod method = KnnMethod::Auto) {
    const auto N = static_cast<std::size_t>(Z.rows());
    if (M < 1) throw std::invalid_argument("knn_distances: M must be >= 1");
    if (M >= N)
        throw std::invalid_argument("knn_distances: M = " + std::to_string(M) + " must be smaller than N = " +
                                    std::to_string(N));
    KnnResult out;
    out.distances.resize(static_cast<Eigen::Index>(N), static_cast<Eigen::Index>(M));
    out.ids.assign(N, std::vector<std::size_t>(M));

    if (method == KnnMethod::Auto) method = (Z.cols() <= 16 && N > 64) ? KnnMethod::KdTree : KnnMethod::BruteForce;

    if (method == KnnMethod::KdTree) {
        const detail::KdTree tree(Z);
        parallel_for(N, [&](std::size_t i) {
            detail::BestK best(M);
            tree.query(i, best);
            detail::write_row(out, i, best.sorted());
        });
    } else {
        parallel_for(N, [&](std::size_t i) {
            detail::BestK best(M);
            for (std::size_t j = 0; j < N; ++j)
                if (j != i) best.offer({detail::squared_distance(Z, i, j), j});
            detail::write_row(out, i, best.sorted());
        });
    }
    return out;
}

}  // namespace rdc
