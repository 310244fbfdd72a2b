#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <queue>
#include <vector>

#include "landmarkloc/common.hpp"
#include "landmarkloc/geometry.hpp"

namespace lloc {

using Descriptor = Eigen::VectorXd;

inline double descriptor_distance(const Descriptor& a, const Descriptor& b) {
    if (a.size() != b.size()) throw DimensionMismatch();
    return (a - b).norm();
}

struct Keypoint {
    Vec2 pixel;
    Descriptor descriptor;
};

struct Frame {
    int id = 0;
    double timestamp = 0.0;
    std::vector<Keypoint> keypoints;
    std::optional<std::vector<std::int64_t>> intensity_histogram;  // 256 bins
};

struct Match {
    int query_index = 0;
    int train_index = 0;
    double distance = 0.0;
};

struct Neighbor {
    int index;
    double distance;
};

/// Exact nearest-neighbor index. Uses a k-d tree with full backtracking for
/// low dimensions and a brute-force scan above dimension 16, where the tree
/// degenerates anyway. Immutable after construction.
class NeighborIndex {
  public:
    explicit NeighborIndex(std::vector<Eigen::VectorXd> points) : points_(std::move(points)) {
        if (points_.empty()) throw EmptyIndex();
        dim_ = static_cast<int>(points_[0].size());
        if (dim_ <= kMaxTreeDim) {
            order_.resize(points_.size());
            std::iota(order_.begin(), order_.end(), 0);
            nodes_.reserve(points_.size());
            root_ = build(0, static_cast<int>(order_.size()), 0);
        }
    }

    std::vector<Neighbor> knn(const Eigen::VectorXd& query, int k) const {
        // max-heap on distance keeps the current k best
        std::priority_queue<std::pair<double, int>> best;
        if (root_ >= 0) {
            search_knn(root_, query, k, best);
        } else {
            for (int i = 0; i < static_cast<int>(points_.size()); ++i) {
                const double d = (points_[i] - query).norm();
                if (static_cast<int>(best.size()) < k) {
                    best.emplace(d, i);
                } else if (d < best.top().first) {
                    best.pop();
                    best.emplace(d, i);
                }
            }
        }
        std::vector<Neighbor> out(best.size());
        for (int i = static_cast<int>(best.size()) - 1; !best.empty(); --i) {
            out[i] = {best.top().second, best.top().first};
            best.pop();
        }
        return out;
    }

    std::vector<Neighbor> radius(const Eigen::VectorXd& query, double r) const {
        std::vector<Neighbor> out;
        if (root_ >= 0) {
            search_radius(root_, query, r, out);
        } else {
            for (int i = 0; i < static_cast<int>(points_.size()); ++i) {
                const double d = (points_[i] - query).norm();
                if (d <= r) out.push_back({i, d});
            }
        }
        std::sort(out.begin(), out.end(),
                  [](const Neighbor& a, const Neighbor& b) { return a.distance < b.distance; });
        return out;
    }

    int size() const { return static_cast<int>(points_.size()); }
    const Eigen::VectorXd& point(int i) const { return points_[i]; }

  private:
    static constexpr int kMaxTreeDim = 16;

    struct Node {
        int point_index;
        int axis;
        int left = -1, right = -1;
    };

    int build(int begin, int end, int depth) {
        if (begin >= end) return -1;
        const int axis = depth % dim_;
        const int mid = begin + (end - begin) / 2;
        std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end,
                         [&](int a, int b) { return points_[a][axis] < points_[b][axis]; });
        const int node_index = static_cast<int>(nodes_.size());
        nodes_.push_back({order_[mid], axis});
        nodes_[node_index].left = build(begin, mid, depth + 1);
        nodes_[node_index].right = build(mid + 1, end, depth + 1);
        return node_index;
    }

    void search_knn(int node_index, const Eigen::VectorXd& query, int k,
                    std::priority_queue<std::pair<double, int>>& best) const {
        const Node& node = nodes_[node_index];
        const double d = (points_[node.point_index] - query).norm();
        if (static_cast<int>(best.size()) < k) {
            best.emplace(d, node.point_index);
        } else if (d < best.top().first) {
            best.pop();
            best.emplace(d, node.point_index);
        }
        const double delta = query[node.axis] - points_[node.point_index][node.axis];
        const int near = delta < 0 ? node.left : node.right;
        const int far = delta < 0 ? node.right : node.left;
        if (near >= 0) search_knn(near, query, k, best);
        if (far >= 0 &&
            (static_cast<int>(best.size()) < k || std::abs(delta) < best.top().first)) {
            search_knn(far, query, k, best);
        }
    }

    void search_radius(int node_index, const Eigen::VectorXd& query, double r,
                       std::vector<Neighbor>& out) const {
        const Node& node = nodes_[node_index];
        const double d = (points_[node.point_index] - query).norm();
        if (d <= r) out.push_back({node.point_index, d});
        const double delta = query[node.axis] - points_[node.point_index][node.axis];
        const int near = delta < 0 ? node.left : node.right;
        const int far = delta < 0 ? node.right : node.left;
        if (near >= 0) search_radius(near, query, r, out);
        if (far >= 0 && std::abs(delta) <= r) search_radius(far, query, r, out);
    }

    std::vector<Eigen::VectorXd> points_;
    std::vector<int> order_;
    std::vector<Node> nodes_;
    int root_ = -1;
    int dim_ = 0;
};

/// Lowe ratio test on squared distances: a query matches its nearest train
/// descriptor iff |d - dN1|^2 / |d - dN2|^2 <= tol. Note tol therefore is the
/// square of the conventional distance ratio (0.8 -> 0.64).
inline std::vector<Match> match_ratio_test(const std::vector<Descriptor>& query,
                                           const std::vector<Descriptor>& train, double tol) {
    if (train.size() < 2) throw TooFewTrainDescriptors();
    NeighborIndex index(std::vector<Eigen::VectorXd>(train.begin(), train.end()));
    std::vector<Match> matches;
    for (int qi = 0; qi < static_cast<int>(query.size()); ++qi) {
        const auto nn = index.knn(query[qi], 2);
        const double d1sq = nn[0].distance * nn[0].distance;
        const double d2sq = nn[1].distance * nn[1].distance;
        if (d2sq == 0.0 || d1sq / d2sq <= tol) {
            matches.push_back({qi, nn[0].index, nn[0].distance});
        }
    }
    return matches;
}

/// Shannon entropy of a normalized intensity histogram, in bits.
inline double frame_entropy(const std::vector<std::int64_t>& histogram) {
    std::int64_t total = 0;
    for (const auto c : histogram) total += c;
    if (total <= 0) throw EmptyHistogram();
    double bits = 0.0;
    for (const auto c : histogram) {
        if (c <= 0) continue;
        const double q = static_cast<double>(c) / static_cast<double>(total);
        bits -= q * std::log2(q);
    }
    return bits;
}

}  // namespace lloc
