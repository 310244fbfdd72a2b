#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <vector>

#include "landmarkloc/common.hpp"
#include "landmarkloc/geometry.hpp"

namespace lloc {

struct RansacConfig {
    double success_prob = 0.99;
    double inlier_threshold = 1.5;
    int sample_size = 0;
    int max_iterations = 10000;
    int min_iterations = 1;
    std::uint64_t rng_seed = 0;
};

template <typename Model>
struct RansacResult {
    Model model{};
    std::vector<bool> inlier_mask;
    int iterations_run = 0;
    double final_outlier_ratio = 0.0;

    std::vector<int> inlier_indices() const {
        std::vector<int> out;
        for (int i = 0; i < static_cast<int>(inlier_mask.size()); ++i) {
            if (inlier_mask[i]) out.push_back(i);
        }
        return out;
    }
};

/// Number of RANSAC iterations N = log(1-p) / log(1-(1-e)^s), rounded up and
/// clamped to [1, max_iterations].
inline int ransac_iterations(double p, double e, int s, int max_iterations = 10000) {
    if (e >= 1.0) throw InvalidRatio();
    if (e <= 0.0) return 1;
    const double inlier_sample_prob = std::pow(1.0 - e, s);
    if (inlier_sample_prob <= 0.0) return max_iterations;
    const double n = std::log(1.0 - p) / std::log(1.0 - inlier_sample_prob);
    if (!std::isfinite(n) || n >= static_cast<double>(max_iterations)) return max_iterations;
    return std::max(1, static_cast<int>(std::ceil(n)));
}

/// IRLS weight of the Huber loss: 1 inside the breakpoint, delta/r beyond.
inline double huber_weight(double residual_norm, double delta) {
    return residual_norm <= delta ? 1.0 : delta / residual_norm;
}

/// Huber loss value (quadratic core, linear tail).
inline double huber_loss(double residual_norm, double delta) {
    if (residual_norm <= delta) return 0.5 * residual_norm * residual_norm;
    return delta * (residual_norm - 0.5 * delta);
}

/// Adaptive RANSAC over a pluggable minimal solver. The solver maps a sample
/// index set to zero or more candidate models; the residual function scores a
/// single datum; the optional refiner least-squares refits on all inliers.
/// Fully deterministic under the configured seed.
template <typename Model, typename Solver, typename Residual,
          typename Refine = std::nullptr_t>
RansacResult<Model> run_ransac(int data_count, Solver&& solve, Residual&& residual,
                               const RansacConfig& config, Refine&& refine = nullptr) {
    const int s = config.sample_size;
    if (data_count < s) throw NotEnoughData();

    std::mt19937_64 rng(config.rng_seed);
    std::vector<int> indices(data_count);
    std::iota(indices.begin(), indices.end(), 0);

    auto score = [&](const Model& model, std::vector<bool>& mask) {
        int count = 0;
        mask.assign(data_count, false);
        for (int i = 0; i < data_count; ++i) {
            if (residual(model, i) <= config.inlier_threshold) {
                mask[i] = true;
                ++count;
            }
        }
        return count;
    };

    // The outlier ratio is rarely known up front; start pessimistic and let
    // observed inlier counts shrink the schedule.
    double outlier_ratio = 0.5;
    int needed = ransac_iterations(config.success_prob, outlier_ratio, s, config.max_iterations);

    RansacResult<Model> best;
    int best_count = 0;
    int iter = 0;
    std::vector<bool> mask;
    std::vector<int> sample(s);
    while (iter < std::max(config.min_iterations, std::min(needed, config.max_iterations))) {
        // partial Fisher-Yates draw of s distinct indices
        for (int j = 0; j < s; ++j) {
            std::uniform_int_distribution<int> pick(j, data_count - 1);
            std::swap(indices[j], indices[pick(rng)]);
            sample[j] = indices[j];
        }
        ++iter;
        for (const Model& candidate : solve(sample)) {
            const int count = score(candidate, mask);
            if (count > best_count) {
                best_count = count;
                best.model = candidate;
                best.inlier_mask = mask;
                outlier_ratio = 1.0 - static_cast<double>(count) / data_count;
                needed = ransac_iterations(config.success_prob, outlier_ratio, s,
                                           config.max_iterations);
            }
        }
    }

    if (best_count < s) throw NoModelFound();

    if constexpr (!std::is_same_v<std::decay_t<Refine>, std::nullptr_t>) {
        if (auto refined = refine(best.model, best.inlier_indices())) {
            const int count = score(*refined, mask);
            if (count >= best_count) {
                best_count = count;
                best.model = *refined;
                best.inlier_mask = mask;
            }
        }
    }

    best.iterations_run = iter;
    best.final_outlier_ratio = 1.0 - static_cast<double>(best_count) / data_count;
    return best;
}

struct Correspondence3D2D {
    Vec3 world;
    Vec2 pixel;
};

struct PnpResult {
    ProjectionMatrix projection;
    std::optional<Pose> pose;  // present when intrinsics were supplied
};

/// DLT Perspective-n-Point. Stacks three rows per correspondence, including a
/// per-point depth column, and takes the smallest right singular vector of the
/// resulting system. Needs at least 6 points (3n > 11 + n).
inline PnpResult solve_pnp_dlt(const std::vector<Correspondence3D2D>& correspondences,
                               const std::optional<CameraIntrinsics>& intrinsics = std::nullopt) {
    const int n = static_cast<int>(correspondences.size());
    if (n < 6) throw TooFewPoints();

    // condition the system: zero-mean, unit-RMS pixels and world points
    Vec2 px_mean = Vec2::Zero();
    Vec3 w_mean = Vec3::Zero();
    for (const auto& c : correspondences) {
        px_mean += c.pixel;
        w_mean += c.world;
    }
    px_mean /= n;
    w_mean /= n;
    double px_rms = 0, w_rms = 0;
    for (const auto& c : correspondences) {
        px_rms += (c.pixel - px_mean).squaredNorm();
        w_rms += (c.world - w_mean).squaredNorm();
    }
    const double px_scale = px_rms > 0 ? std::sqrt(2.0 * n / px_rms) : 1.0;
    const double w_scale = w_rms > 0 ? std::sqrt(3.0 * n / w_rms) : 1.0;
    Mat3 t_px = Mat3::Identity();
    t_px(0, 0) = t_px(1, 1) = px_scale;
    t_px.col(2).head<2>() = -px_scale * px_mean;
    Eigen::Matrix4d s_world = Eigen::Matrix4d::Identity();
    s_world.topLeftCorner<3, 3>() *= w_scale;
    s_world.col(3).head<3>() = -w_scale * w_mean;

    Eigen::MatrixXd m = Eigen::MatrixXd::Zero(3 * n, 12 + n);
    for (int i = 0; i < n; ++i) {
        const Eigen::Vector4d xh = s_world * correspondences[i].world.homogeneous();
        const Vec2 px = (t_px * correspondences[i].pixel.homogeneous()).head<2>();
        m.block<1, 4>(3 * i + 0, 0) = xh.transpose();
        m.block<1, 4>(3 * i + 1, 4) = xh.transpose();
        m.block<1, 4>(3 * i + 2, 8) = xh.transpose();
        m(3 * i + 0, 12 + i) = -px.x();
        m(3 * i + 1, 12 + i) = -px.y();
        m(3 * i + 2, 12 + i) = -1.0;
    }

    Eigen::BDCSVD<Eigen::MatrixXd> svd(m, Eigen::ComputeThinV);
    const auto& sv = svd.singularValues();
    const int k = static_cast<int>(sv.size());
    if (sv[k - 2] <= 1e-9 * sv[0]) throw DegenerateConfiguration();

    Eigen::VectorXd v = svd.matrixV().col(k - 1);
    // fix the global sign so a majority of recovered depths are positive
    int positive = 0;
    for (int i = 0; i < n; ++i) {
        if (v[12 + i] > 0) ++positive;
    }
    if (2 * positive < n) v = -v;

    Mat34 p_norm;
    p_norm.row(0) = v.segment<4>(0).transpose();
    p_norm.row(1) = v.segment<4>(4).transpose();
    p_norm.row(2) = v.segment<4>(8).transpose();

    PnpResult result;
    result.projection = t_px.inverse() * p_norm * s_world;
    // keep the third row (metric depth direction) at unit rotation scale when
    // possible; the caller only ever uses P projectively
    result.projection /= result.projection.norm();
    // renormalizing may flip the overall sign; re-check depth majority
    int positive_depth = 0;
    for (const auto& c : correspondences) {
        if ((result.projection * c.world.homogeneous()).z() > 0) ++positive_depth;
    }
    if (2 * positive_depth < n) result.projection = -result.projection;

    if (intrinsics) {
        const Mat34 p_metric = intrinsics->matrix().inverse() * result.projection;
        Eigen::JacobiSVD<Mat3> rsvd(p_metric.leftCols<3>(),
                                    Eigen::ComputeFullU | Eigen::ComputeFullV);
        const Mat3 u = rsvd.matrixU();
        const Mat3 vt = rsvd.matrixV().transpose();
        const double det = (u * vt).determinant();
        Pose pose;
        pose.rotation = u * Eigen::DiagonalMatrix<double, 3>(1, 1, det) * vt;
        const double scale = rsvd.singularValues().mean() * det;
        pose.translation = p_metric.col(3) / scale;
        result.pose = pose;
    }
    return result;
}

struct PixelMatch {
    Vec2 first;
    Vec2 second;
};

/// First-order (Sampson) geometric distance of a match to a fundamental
/// matrix, in pixels.
inline double sampson_distance(const Mat3& f, const Vec2& x1, const Vec2& x2) {
    const Vec3 l1 = f * x1.homogeneous();
    const Vec3 l2 = f.transpose() * x2.homogeneous();
    const double algebraic = x2.homogeneous().dot(l1);
    const double denom =
        l1.x() * l1.x() + l1.y() * l1.y() + l2.x() * l2.x() + l2.y() * l2.y();
    if (denom <= 0) return std::abs(algebraic) > 0 ? std::numeric_limits<double>::infinity() : 0.0;
    return std::abs(algebraic) / std::sqrt(denom);
}

/// Hartley-normalized 8-point fundamental matrix with rank-2 enforcement.
inline Mat3 estimate_fundamental_8pt(const std::vector<PixelMatch>& matches) {
    const int n = static_cast<int>(matches.size());
    if (n < 8) throw TooFewPoints();

    auto normalizer = [&](auto&& get) {
        Vec2 centroid = Vec2::Zero();
        for (const auto& m : matches) centroid += get(m);
        centroid /= n;
        double mean_dist = 0;
        for (const auto& m : matches) mean_dist += (get(m) - centroid).norm();
        mean_dist /= n;
        const double s = mean_dist > 0 ? std::sqrt(2.0) / mean_dist : 1.0;
        Mat3 t;
        t << s, 0, -s * centroid.x(), 0, s, -s * centroid.y(), 0, 0, 1;
        return t;
    };
    const Mat3 t1 = normalizer([](const PixelMatch& m) { return m.first; });
    const Mat3 t2 = normalizer([](const PixelMatch& m) { return m.second; });

    Eigen::MatrixXd a(n, 9);
    for (int i = 0; i < n; ++i) {
        const Vec3 p1 = t1 * matches[i].first.homogeneous();
        const Vec3 p2 = t2 * matches[i].second.homogeneous();
        a.row(i) << p2.x() * p1.x(), p2.x() * p1.y(), p2.x(), p2.y() * p1.x(), p2.y() * p1.y(),
            p2.y(), p1.x(), p1.y(), 1.0;
    }
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeFullV);
    const auto& sv = svd.singularValues();
    // a rank below 8 leaves the nullspace (and thus F) underdetermined
    if (sv[7] <= 1e-9 * sv[0]) throw DegenerateConfiguration();

    const Eigen::VectorXd fv = svd.matrixV().col(8);
    Mat3 f;
    f << fv[0], fv[1], fv[2], fv[3], fv[4], fv[5], fv[6], fv[7], fv[8];

    // enforce rank 2 by zeroing the smallest singular value
    Eigen::JacobiSVD<Mat3> fsvd(f, Eigen::ComputeFullU | Eigen::ComputeFullV);
    Vec3 s = fsvd.singularValues();
    s[2] = 0.0;
    f = fsvd.matrixU() * s.asDiagonal() * fsvd.matrixV().transpose();

    f = (t2.transpose() * f * t1).eval();
    const double norm = f.norm();
    if (norm > 0) f /= norm;
    return f;
}

}  // namespace lloc
