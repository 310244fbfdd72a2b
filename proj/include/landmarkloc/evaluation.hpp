#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "landmarkloc/common.hpp"
#include "landmarkloc/geometry.hpp"

namespace lloc {

struct TrajectoryEntry {
    double timestamp = 0.0;
    Pose pose;  // world-to-camera, like everywhere else
};

struct Trajectory {
    std::vector<TrajectoryEntry> entries;
};

/// Closed-form least-squares similarity fit (Umeyama) mapping src points onto
/// dst points. with_scale=false constrains s = 1.
inline SimilarityTransform align_point_sets(const std::vector<Vec3>& src,
                                            const std::vector<Vec3>& dst, bool with_scale) {
    const int n = static_cast<int>(src.size());
    if (n < 3 || dst.size() != src.size()) throw TooFewPairs();

    Vec3 mu_src = Vec3::Zero(), mu_dst = Vec3::Zero();
    for (int i = 0; i < n; ++i) {
        mu_src += src[i];
        mu_dst += dst[i];
    }
    mu_src /= n;
    mu_dst /= n;

    Mat3 sigma = Mat3::Zero();
    double src_var = 0.0;
    for (int i = 0; i < n; ++i) {
        const Vec3 ds = src[i] - mu_src;
        sigma += (dst[i] - mu_dst) * ds.transpose();
        src_var += ds.squaredNorm();
    }
    sigma /= n;
    src_var /= n;

    Eigen::JacobiSVD<Mat3> svd(sigma, Eigen::ComputeFullU | Eigen::ComputeFullV);
    const Vec3 d = svd.singularValues();
    // rotation is underdetermined when the points are (near) collinear
    if (d[1] <= 1e-9 * std::max(d[0], 1e-300) || src_var <= 0.0) throw CollinearDegenerate();

    // at the fixed point src == dst the solution is exactly the identity;
    // return it directly instead of a reconstruction that is 1 ulp off
    bool identical = true;
    for (int i = 0; identical && i < n; ++i) identical = src[i] == dst[i];
    if (identical) return SimilarityTransform::identity();

    Vec3 s_fix = Vec3::Ones();
    if ((svd.matrixU() * svd.matrixV().transpose()).determinant() < 0) s_fix[2] = -1.0;

    SimilarityTransform t;
    t.rotation = svd.matrixU() * s_fix.asDiagonal() * svd.matrixV().transpose();
    t.scale = with_scale ? d.dot(s_fix) / src_var : 1.0;
    t.translation = mu_dst - t.scale * (t.rotation * mu_src);
    return t;
}

/// Pairs of trajectory indices matched by nearest timestamp within tolerance.
inline std::vector<std::pair<int, int>> associate_by_timestamp(const Trajectory& gt,
                                                               const Trajectory& est,
                                                               double tolerance = 0.02) {
    std::vector<std::pair<int, int>> pairs;
    int j = 0;
    for (int i = 0; i < static_cast<int>(gt.entries.size()); ++i) {
        const double tg = gt.entries[i].timestamp;
        while (j + 1 < static_cast<int>(est.entries.size()) &&
               std::abs(est.entries[j + 1].timestamp - tg) <=
                   std::abs(est.entries[j].timestamp - tg)) {
            ++j;
        }
        if (j < static_cast<int>(est.entries.size()) &&
            std::abs(est.entries[j].timestamp - tg) <= tolerance) {
            pairs.emplace_back(i, j);
            ++j;
            if (j >= static_cast<int>(est.entries.size())) break;
        }
    }
    return pairs;
}

/// Similarity transform that maps estimated camera positions toward ground
/// truth, fit over timestamp-associated pairs.
inline SimilarityTransform align_trajectories(const Trajectory& gt, const Trajectory& est,
                                              bool with_scale) {
    const auto pairs = associate_by_timestamp(gt, est);
    std::vector<Vec3> src, dst;
    src.reserve(pairs.size());
    dst.reserve(pairs.size());
    for (const auto& [gi, ei] : pairs) {
        dst.push_back(gt.entries[gi].pose.center());
        src.push_back(est.entries[ei].pose.center());
    }
    return align_point_sets(src, dst, with_scale);
}

struct AteOptions {
    bool with_scale = true;
    bool align = true;  // false: compare raw trajectories (identity alignment)
    // Use the per-frame position error with the rotation product folded in,
    // instead of the plain aligned position difference.
    bool rotated_position_error = false;
};

struct AteReport {
    double ate_pos = 0.0;  // meters, RMSE
    double ate_rot = 0.0;  // degrees, RMSE
    std::vector<std::pair<double, double>> per_frame;  // (delta_p, delta_r_deg)
    SimilarityTransform alignment;
    std::vector<double> timestamps;
};

inline AteReport compute_ate(const Trajectory& gt, const Trajectory& est,
                             const AteOptions& options = {}) {
    const auto pairs = associate_by_timestamp(gt, est);
    if (pairs.size() < 3) throw TooFewPairs();

    AteReport report;
    report.alignment =
        options.align ? align_trajectories(gt, est, options.with_scale) : SimilarityTransform{};

    double sum_p2 = 0.0, sum_r2 = 0.0;
    for (const auto& [gi, ei] : pairs) {
        const Pose& pose_gt = gt.entries[gi].pose;
        // transform rotation and center separately: rebuilding a Pose and
        // re-deriving its center loses exactness for identical trajectories
        const Pose& pose_est = est.entries[ei].pose;
        const Mat3 r_aligned = pose_est.rotation * report.alignment.rotation.transpose();
        const Vec3 c_aligned = report.alignment.apply(pose_est.center());
        double dp;
        if (options.rotated_position_error) {
            const Mat3 rcw_gt = pose_gt.rotation.transpose();
            dp = (pose_gt.center() - rcw_gt * r_aligned * c_aligned).norm();
        } else {
            dp = (pose_gt.center() - c_aligned).norm();
        }
        const double dr = rotation_angle_between(pose_gt.rotation, r_aligned);
        report.per_frame.emplace_back(dp, dr);
        report.timestamps.push_back(gt.entries[gi].timestamp);
        sum_p2 += dp * dp;
        sum_r2 += dr * dr;
    }
    const double n = static_cast<double>(pairs.size());
    report.ate_pos = std::sqrt(sum_p2 / n);
    report.ate_rot = std::sqrt(sum_r2 / n);
    return report;
}

// --- TUM trajectory text format -------------------------------------------
// One line per pose: "timestamp tx ty tz qx qy qz qw", camera-to-world.

inline Trajectory load_tum_trajectory(std::istream& in) {
    Trajectory trajectory;
    std::string line;
    int line_number = 0;
    while (std::getline(in, line)) {
        ++line_number;
        const auto first = line.find_first_not_of(" \t\r");
        if (first == std::string::npos || line[first] == '#') continue;
        std::istringstream fields(line);
        double ts, tx, ty, tz, qx, qy, qz, qw;
        if (!(fields >> ts >> tx >> ty >> tz >> qx >> qy >> qz >> qw)) {
            throw ParseError("malformed TUM trajectory line", line_number);
        }
        Eigen::Quaterniond q(qw, qx, qy, qz);
        if (q.norm() < 1e-12) throw ParseError("zero quaternion", line_number);
        q.normalize();
        Pose camera_to_world{q.toRotationMatrix(), Vec3(tx, ty, tz)};
        trajectory.entries.push_back({ts, camera_to_world.inverse()});
    }
    return trajectory;
}

inline Trajectory load_tum_trajectory(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open trajectory file: " + path);
    return load_tum_trajectory(in);
}

inline void save_tum_trajectory(const Trajectory& trajectory, std::ostream& out) {
    out << "# timestamp tx ty tz qx qy qz qw\n";
    char buf[256];
    for (const auto& entry : trajectory.entries) {
        const Pose cw = entry.pose.inverse();
        const Eigen::Quaterniond q = to_quaternion(cw.rotation);
        std::snprintf(buf, sizeof(buf), "%.9f %.12g %.12g %.12g %.12g %.12g %.12g %.12g\n",
                      entry.timestamp, cw.translation.x(), cw.translation.y(), cw.translation.z(),
                      q.x(), q.y(), q.z(), q.w());
        out << buf;
    }
}

inline void save_tum_trajectory(const Trajectory& trajectory, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write trajectory file: " + path);
    save_tum_trajectory(trajectory, out);
}

}  // namespace lloc
