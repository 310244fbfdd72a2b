#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "landmarkloc/common.hpp"
#include "landmarkloc/evaluation.hpp"
#include "landmarkloc/features.hpp"
#include "landmarkloc/geometry.hpp"
#include "landmarkloc/mapping.hpp"
#include "landmarkloc/robust.hpp"

namespace lloc {

enum class MotionModel { Static, ConstantSpeed };

struct TrackerConfig {
    double radius_px = 10.0;
    double max_descriptor_distance = 0.7;
    int min_observations = 10;
    double min_entropy_bits = 4.0;
    double huber_delta_px = 2.0;
    int gn_max_iterations = 50;
    double gn_tolerance = 1e-10;
    std::optional<double> landmark_prior_sigma;  // absent: landmarks fixed
    std::optional<Vec6> pose_prior_sigma;
    MotionModel motion_model = MotionModel::Static;
    double min_inlier_ratio = 0.3;  // below this the update is rejected
};

struct Correspondence2D3D {
    std::int64_t landmark_id = 0;
    Vec2 pixel = Vec2::Zero();
    Vec3 landmark_position = Vec3::Zero();
    double descriptor_distance = 0.0;
};

enum class FrameStatus { Tracked, SkippedEntropy, SkippedAssociation, Diverged };

inline const char* to_string(FrameStatus s) {
    switch (s) {
        case FrameStatus::Tracked: return "Tracked";
        case FrameStatus::SkippedEntropy: return "SkippedEntropy";
        case FrameStatus::SkippedAssociation: return "SkippedAssociation";
        case FrameStatus::Diverged: return "Diverged";
    }
    return "?";
}

struct FrameDiagnostics {
    int frame_id = 0;
    FrameStatus status = FrameStatus::Tracked;
    int n_associations = 0;
    int n_inliers = 0;
    int iterations = 0;
    double rms_px = 0.0;
};

struct TrackState {
    std::vector<TrajectoryEntry> history;
    std::vector<FrameDiagnostics> diagnostics;
};

/// Motion-model prediction from pose history. Static repeats the last pose;
/// ConstantSpeed replays the last relative transform (and degrades to Static
/// with a single pose in history).
inline Pose predict_pose(const std::vector<TrajectoryEntry>& history, MotionModel model) {
    if (history.empty()) throw EmptyHistory();
    const Pose& last = history.back().pose;
    if (model == MotionModel::Static || history.size() < 2) return last;
    const Pose& prev = history[history.size() - 2].pose;
    const Pose relative = last.compose(prev.inverse());
    Pose predicted = relative.compose(last);
    predicted.rotation = orthonormalized(predicted.rotation);
    return predicted;
}

struct ProjectedLandmark {
    std::int64_t landmark_id = 0;
    Vec2 pixel = Vec2::Zero();
};

/// Projects every map landmark at the given pose, discarding points behind
/// the camera or outside the image.
inline std::vector<ProjectedLandmark> project_landmarks(const SfmModel& map, const Pose& pose,
                                                        const CameraIntrinsics& intrinsics) {
    const ProjectionMatrix p = compose_projection(intrinsics, pose);
    std::vector<ProjectedLandmark> out;
    out.reserve(map.landmarks.size());
    for (const auto& [id, lm] : map.landmarks) {
        const Vec3 h = p * lm.position.homogeneous();
        if (h.z() <= 0) continue;
        const Vec2 px(h.x() / h.z(), h.y() / h.z());
        if (!intrinsics.in_bounds(px)) continue;
        out.push_back({id, px});
    }
    return out;
}

/// Windowed 2D-3D association. For each extracted keypoint, radius-search the
/// projected landmarks, take the one with the smallest descriptor distance,
/// and accept it below the distance threshold. Each landmark can be claimed
/// by at most one keypoint; on conflict the smaller descriptor distance wins
/// and the loser is discarded.
inline std::vector<Correspondence2D3D> associate_2d3d(const std::vector<Keypoint>& keypoints,
                                                      const std::vector<ProjectedLandmark>& projections,
                                                      const SfmModel& map,
                                                      const TrackerConfig& config) {
    if (projections.empty() || keypoints.empty()) return {};

    std::vector<Eigen::VectorXd> pixels;
    pixels.reserve(projections.size());
    for (const auto& p : projections) pixels.push_back(p.pixel);
    const NeighborIndex index(std::move(pixels));

    struct Candidate {
        int keypoint;
        int projection;
        double descriptor_distance;
    };
    std::vector<Candidate> candidates;
    for (int ki = 0; ki < static_cast<int>(keypoints.size()); ++ki) {
        const auto in_window = index.radius(keypoints[ki].pixel, config.radius_px);
        int best = -1;
        double best_dist = std::numeric_limits<double>::infinity();
        for (const auto& nb : in_window) {
            const auto& lm = map.landmarks.at(projections[nb.index].landmark_id);
            const double d = descriptor_distance(keypoints[ki].descriptor, lm.descriptor);
            if (d < best_dist) {
                best_dist = d;
                best = nb.index;
            }
        }
        if (best >= 0 && best_dist < config.max_descriptor_distance) {
            candidates.push_back({ki, best, best_dist});
        }
    }

    // one keypoint per landmark: smaller descriptor distance wins
    std::map<std::int64_t, const Candidate*> by_landmark;
    for (const auto& c : candidates) {
        const std::int64_t id = projections[c.projection].landmark_id;
        const auto it = by_landmark.find(id);
        if (it == by_landmark.end() || c.descriptor_distance < it->second->descriptor_distance) {
            by_landmark[id] = &c;
        }
    }

    std::vector<Correspondence2D3D> out;
    for (const auto& c : candidates) {
        const std::int64_t id = projections[c.projection].landmark_id;
        if (by_landmark.at(id) != &c) continue;
        out.push_back({id, keypoints[c.keypoint].pixel, map.landmarks.at(id).position,
                       c.descriptor_distance});
    }
    return out;
}

struct OptimizeDiagnostics {
    int iterations = 0;
    int n_inliers = 0;
    double rms_px = 0.0;
    double final_cost = 0.0;
};

namespace detail {

/// 2x6 Jacobian of the reprojection residual w.r.t. the left pose
/// perturbation [omega; dt].
inline Eigen::Matrix<double, 2, 6> pose_reprojection_jacobian(const CameraIntrinsics& k,
                                                              const Pose& pose, const Vec3& x) {
    const Vec3 x_cam = pose.apply(x);
    const auto a = projection_jacobian(k, x_cam);
    Eigen::Matrix<double, 2, 6> j;
    j.leftCols<3>() = -a * skew_matrix(x_cam);
    j.rightCols<3>() = a;
    return j;
}

inline Vec2 reprojection_residual(const CameraIntrinsics& k, const Pose& pose, const Vec3& x,
                                  const Vec2& measured) {
    const Vec3 x_cam = pose.apply(x);
    return k.project_normalized(x_cam.hnormalized()) - measured;
}

}  // namespace detail

/// Single-frame pose refinement: Huber-robustified Gauss-Newton over the
/// 6-DoF pose. Landmarks are fixed unless landmark_prior_sigma is set, in
/// which case they become variables tied to the map by Gaussian priors and
/// are optimized jointly.
inline std::pair<Pose, OptimizeDiagnostics> optimize_pose(
    const std::vector<Correspondence2D3D>& correspondences, const CameraIntrinsics& intrinsics,
    const Pose& initial, const TrackerConfig& config) {
    const int n = static_cast<int>(correspondences.size());
    if (n < config.min_observations) throw TooFewObservations();

    const bool soft_landmarks = config.landmark_prior_sigma.has_value();
    const int dim = 6 + (soft_landmarks ? 3 * n : 0);

    Pose pose = initial;
    std::vector<Vec3> points(n);
    for (int i = 0; i < n; ++i) points[i] = correspondences[i].landmark_position;

    auto cost_of = [&](const Pose& p, const std::vector<Vec3>& pts) {
        double cost = 0.0;
        for (int i = 0; i < n; ++i) {
            const Vec3 x_cam = p.apply(pts[i]);
            if (x_cam.z() <= 1e-12) {
                cost += huber_loss(1e6, config.huber_delta_px);
                continue;
            }
            const Vec2 r =
                intrinsics.project_normalized(x_cam.hnormalized()) - correspondences[i].pixel;
            cost += huber_loss(r.norm(), config.huber_delta_px);
        }
        if (soft_landmarks) {
            const double inv_s2 = 1.0 / (*config.landmark_prior_sigma *
                                         *config.landmark_prior_sigma);
            for (int i = 0; i < n; ++i) {
                cost += 0.5 * inv_s2 *
                        (pts[i] - correspondences[i].landmark_position).squaredNorm();
            }
        }
        if (config.pose_prior_sigma) {
            Vec6 r;
            r.head<3>() = so3_log(p.rotation * initial.rotation.transpose());
            r.tail<3>() = p.translation - initial.translation;
            cost += 0.5 * (r.cwiseQuotient(*config.pose_prior_sigma)).squaredNorm();
        }
        return cost;
    };

    OptimizeDiagnostics diag;
    double cost = cost_of(pose, points);
    double lambda = 0.0;
    const double cost_floor = 1e-14 * std::max(n, 1);

    for (int iter = 0; iter < config.gn_max_iterations && cost > cost_floor; ++iter) {
        Eigen::MatrixXd h = Eigen::MatrixXd::Zero(dim, dim);
        Eigen::VectorXd b = Eigen::VectorXd::Zero(dim);
        for (int i = 0; i < n; ++i) {
            const Vec3 x_cam = pose.apply(points[i]);
            if (x_cam.z() <= 1e-12) continue;
            const Vec2 r =
                intrinsics.project_normalized(x_cam.hnormalized()) - correspondences[i].pixel;
            const double w = huber_weight(r.norm(), config.huber_delta_px);
            const auto a = detail::projection_jacobian(intrinsics, x_cam);
            Eigen::Matrix<double, 2, 6> j_pose;
            j_pose.leftCols<3>() = -a * skew_matrix(x_cam);
            j_pose.rightCols<3>() = a;
            h.topLeftCorner<6, 6>() += w * j_pose.transpose() * j_pose;
            b.head<6>() -= w * j_pose.transpose() * r;
            if (soft_landmarks) {
                const Eigen::Matrix<double, 2, 3> j_pt = a * pose.rotation;
                const int o = 6 + 3 * i;
                h.block<3, 3>(o, o) += w * j_pt.transpose() * j_pt;
                h.block<6, 3>(0, o) += w * j_pose.transpose() * j_pt;
                h.block<3, 6>(o, 0) += w * j_pt.transpose() * j_pose;
                b.segment<3>(o) -= w * j_pt.transpose() * r;
            }
        }
        if (soft_landmarks) {
            const double inv_s2 =
                1.0 / (*config.landmark_prior_sigma * *config.landmark_prior_sigma);
            for (int i = 0; i < n; ++i) {
                const int o = 6 + 3 * i;
                h.block<3, 3>(o, o) += inv_s2 * Mat3::Identity();
                b.segment<3>(o) -=
                    inv_s2 * (points[i] - correspondences[i].landmark_position);
            }
        }
        if (config.pose_prior_sigma) {
            const Vec6 inv_s2 = config.pose_prior_sigma->cwiseProduct(*config.pose_prior_sigma)
                                    .cwiseInverse();
            Vec6 r;
            r.head<3>() = so3_log(pose.rotation * initial.rotation.transpose());
            r.tail<3>() = pose.translation - initial.translation;
            h.topLeftCorner<6, 6>() += inv_s2.asDiagonal();
            b.head<6>() -= inv_s2.cwiseProduct(r);
        }

        bool accepted = false;
        for (int attempt = 0; attempt < 8; ++attempt) {
            Eigen::MatrixXd h_damped = h;
            if (lambda > 0) h_damped.diagonal() += lambda * h.diagonal().cwiseMax(1e-12);
            Eigen::LDLT<Eigen::MatrixXd> ldlt(h_damped);
            Eigen::VectorXd step;
            if (ldlt.info() == Eigen::Success) step = ldlt.solve(b);
            if (ldlt.info() != Eigen::Success || !step.allFinite()) {
                if (lambda == 0 && attempt == 0) {
                    lambda = 1e-6;
                    continue;
                }
                throw SingularSystem();
            }
            const Pose candidate_pose = pose.retract(step.head<6>());
            std::vector<Vec3> candidate_points = points;
            if (soft_landmarks) {
                for (int i = 0; i < n; ++i) candidate_points[i] += step.segment<3>(6 + 3 * i);
            }
            const double new_cost = cost_of(candidate_pose, candidate_points);
            if (new_cost < cost) {
                const double decrease = cost - new_cost;
                pose = candidate_pose;
                points = std::move(candidate_points);
                cost = new_cost;
                ++diag.iterations;
                lambda = lambda > 0 ? lambda * 0.1 : 0.0;
                accepted = true;
                if (decrease < config.gn_tolerance * std::max(cost, 1e-300)) {
                    iter = config.gn_max_iterations;
                }
                break;
            }
            lambda = lambda > 0 ? lambda * 10.0 : 1e-4;
        }
        if (!accepted) break;
    }

    double sum2 = 0.0;
    for (int i = 0; i < n; ++i) {
        const Vec3 x_cam = pose.apply(points[i]);
        double r = 1e6;
        if (x_cam.z() > 1e-12) {
            r = (intrinsics.project_normalized(x_cam.hnormalized()) - correspondences[i].pixel)
                    .norm();
        }
        sum2 += r * r;
        if (r < 3.0 * config.huber_delta_px) ++diag.n_inliers;
    }
    diag.rms_px = std::sqrt(sum2 / n);
    diag.final_cost = cost;
    return {pose, diag};
}

/// Incremental localization over a frame sequence: motion-model prediction,
/// entropy gate, landmark projection and culling, windowed association, and
/// robust pose optimization. Skipped frames carry the predicted pose forward.
inline TrackState track_sequence(const std::vector<Frame>& frames, const SfmModel& map,
                                 const Pose& initial_pose, const TrackerConfig& config) {
    TrackState state;
    const double t0 = frames.empty() ? 0.0 : frames.front().timestamp - 1.0;
    state.history.push_back({t0, initial_pose});

    for (const auto& frame : frames) {
        const Pose predicted = predict_pose(state.history, config.motion_model);
        FrameDiagnostics diag;
        diag.frame_id = frame.id;

        auto emit = [&](const Pose& pose, FrameStatus status) {
            diag.status = status;
            state.history.push_back({frame.timestamp, pose});
            state.diagnostics.push_back(diag);
        };

        // frames without a histogram pass the entropy gate unconditionally
        if (frame.intensity_histogram &&
            frame_entropy(*frame.intensity_histogram) <= config.min_entropy_bits) {
            emit(predicted, FrameStatus::SkippedEntropy);
            continue;
        }

        const auto projections = project_landmarks(map, predicted, map.intrinsics);
        const auto correspondences =
            associate_2d3d(frame.keypoints, projections, map, config);
        diag.n_associations = static_cast<int>(correspondences.size());
        if (diag.n_associations <= config.min_observations) {
            emit(predicted, FrameStatus::SkippedAssociation);
            continue;
        }

        try {
            const auto [pose, opt] = optimize_pose(correspondences, map.intrinsics, predicted,
                                                   config);
            diag.n_inliers = opt.n_inliers;
            diag.iterations = opt.iterations;
            diag.rms_px = opt.rms_px;
            const double inlier_ratio =
                static_cast<double>(opt.n_inliers) / diag.n_associations;
            if (inlier_ratio < config.min_inlier_ratio) {
                emit(predicted, FrameStatus::Diverged);
            } else {
                emit(pose, FrameStatus::Tracked);
            }
        } catch (const Error&) {
            emit(predicted, FrameStatus::Diverged);
        }
    }
    return state;
}

inline Trajectory tracked_trajectory(const TrackState& state) {
    Trajectory t;
    // drop the synthetic initial-pose entry; one pose per processed frame
    t.entries.assign(state.history.begin() + 1, state.history.end());
    return t;
}

}  // namespace lloc
