#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <set>
#include <vector>

#include "landmarkloc/common.hpp"
#include "landmarkloc/evaluation.hpp"
#include "landmarkloc/features.hpp"
#include "landmarkloc/geometry.hpp"
#include "landmarkloc/robust.hpp"

namespace lloc {

struct TrackObservation {
    int frame_id = 0;
    int keypoint_index = 0;
};

struct Track {
    std::vector<TrackObservation> observations;
    std::optional<std::int64_t> point_id;
};

struct Landmark {
    std::int64_t id = 0;
    Vec3 position = Vec3::Zero();
    Descriptor descriptor;
    int observation_count = 0;
};

struct LandmarkObservation {
    int frame_id = 0;
    int keypoint_index = 0;
    Vec2 pixel = Vec2::Zero();
};

struct SfmModel {
    std::map<std::int64_t, Landmark> landmarks;
    std::map<int, Pose> camera_poses;  // keyed by frame id
    std::map<std::int64_t, std::vector<LandmarkObservation>> observations;
    CameraIntrinsics intrinsics;
    std::optional<SimilarityTransform> registration;
    double mean_reprojection_error = 0.0;
};

/// Linear two-view triangulation from the cross-product constraint rows.
inline Vec3 triangulate_dlt(const ProjectionMatrix& p1, const ProjectionMatrix& p2,
                            const Vec2& x1, const Vec2& x2) {
    const Vec3 c1 = -p1.leftCols<3>().inverse() * p1.col(3);
    const Vec3 c2 = -p2.leftCols<3>().inverse() * p2.col(3);
    if ((c1 - c2).norm() < 1e-9) throw DegenerateBaseline();

    Eigen::Matrix4d a;
    a.row(0) = x1.x() * p1.row(2) - p1.row(0);
    a.row(1) = x1.y() * p1.row(2) - p1.row(1);
    a.row(2) = x2.x() * p2.row(2) - p2.row(0);
    a.row(3) = x2.y() * p2.row(2) - p2.row(1);

    Eigen::JacobiSVD<Eigen::Matrix4d> svd(a, Eigen::ComputeFullV);
    const Eigen::Vector4d xh = svd.matrixV().col(3);
    if (std::abs(xh.w()) < 1e-14) throw CheiralityViolation("point at infinity");
    const Vec3 x = xh.hnormalized();
    if ((p1 * x.homogeneous()).z() <= 0 || (p2 * x.homogeneous()).z() <= 0) {
        throw CheiralityViolation();
    }
    return x;
}

struct FramePairMatches {
    int frame_a = 0;
    int frame_b = 0;
    std::vector<Match> matches;  // query index in frame_a, train index in frame_b
};

/// Connected components of the match graph. Components that place two
/// distinct keypoints in the same frame are inconsistent and discarded, as
/// are tracks shorter than two observations.
inline std::vector<Track> build_tracks(const std::vector<FramePairMatches>& pairwise) {
    std::map<std::pair<int, int>, int> node_ids;
    std::vector<TrackObservation> nodes;
    auto node_of = [&](int frame, int keypoint) {
        const auto [it, inserted] =
            node_ids.try_emplace({frame, keypoint}, static_cast<int>(nodes.size()));
        if (inserted) nodes.push_back({frame, keypoint});
        return it->second;
    };

    std::vector<int> parent;
    std::function<int(int)> find = [&](int x) {
        while (parent[x] != x) {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        return x;
    };

    std::vector<std::pair<int, int>> edges;
    for (const auto& pair : pairwise) {
        for (const auto& m : pair.matches) {
            edges.emplace_back(node_of(pair.frame_a, m.query_index),
                               node_of(pair.frame_b, m.train_index));
        }
    }
    parent.resize(nodes.size());
    std::iota(parent.begin(), parent.end(), 0);
    for (const auto& [a, b] : edges) parent[find(a)] = find(b);

    std::map<int, Track> components;
    for (int i = 0; i < static_cast<int>(nodes.size()); ++i) {
        components[find(i)].observations.push_back(nodes[i]);
    }

    std::vector<Track> tracks;
    for (auto& [root, track] : components) {
        if (track.observations.size() < 2) continue;
        std::sort(track.observations.begin(), track.observations.end(),
                  [](const TrackObservation& a, const TrackObservation& b) {
                      return std::tie(a.frame_id, a.keypoint_index) <
                             std::tie(b.frame_id, b.keypoint_index);
                  });
        bool consistent = true;
        for (size_t i = 1; i < track.observations.size(); ++i) {
            if (track.observations[i].frame_id == track.observations[i - 1].frame_id) {
                consistent = false;
                break;
            }
        }
        if (consistent) tracks.push_back(std::move(track));
    }
    return tracks;
}

struct BundleAdjustConfig {
    double huber_delta_px = 2.0;
    int max_iterations = 100;
    double relative_tolerance = 1e-8;
    std::optional<int> fixed_frame_id;  // gauge: this camera is frozen
    // gauge: distance between these two camera centers is held constant
    std::optional<std::pair<int, int>> scale_frames;
};

struct BundleAdjustStats {
    int iterations_accepted = 0;
    double initial_cost = 0.0;
    double final_cost = 0.0;
};

namespace detail {

/// d(pixel)/d(camera-frame point) for the pinhole model.
inline Eigen::Matrix<double, 2, 3> projection_jacobian(const CameraIntrinsics& k,
                                                       const Vec3& x_cam) {
    const double z = x_cam.z();
    const double inv_z = 1.0 / z;
    const double inv_z2 = inv_z * inv_z;
    Eigen::Matrix<double, 2, 3> j;
    j << k.fx * inv_z, k.skew * inv_z, -(k.fx * x_cam.x() + k.skew * x_cam.y()) * inv_z2,
        0.0, k.fy * inv_z, -k.fy * x_cam.y() * inv_z2;
    return j;
}

}  // namespace detail

/// Joint Gauss-Newton refinement of all poses and landmark positions under a
/// Huber-weighted reprojection cost, with Levenberg damping when a step would
/// increase the cost. Solves the dense normal equations; intended for
/// desk-scale models. The robust cost never increases on an accepted step.
inline BundleAdjustStats bundle_adjust(SfmModel& model, const BundleAdjustConfig& config) {
    std::vector<int> frame_ids;
    for (const auto& [fid, pose] : model.camera_poses) {
        if (config.fixed_frame_id && fid == *config.fixed_frame_id) continue;
        frame_ids.push_back(fid);
    }
    std::vector<std::int64_t> point_ids;
    for (const auto& [pid, lm] : model.landmarks) point_ids.push_back(pid);

    std::map<int, int> frame_offset;
    for (size_t i = 0; i < frame_ids.size(); ++i) {
        frame_offset[frame_ids[i]] = static_cast<int>(6 * i);
    }
    const int point_base = static_cast<int>(6 * frame_ids.size());
    std::map<std::int64_t, int> point_offset;
    for (size_t i = 0; i < point_ids.size(); ++i) {
        point_offset[point_ids[i]] = point_base + static_cast<int>(3 * i);
    }
    const int dim = point_base + 3 * static_cast<int>(point_ids.size());
    if (dim == 0) return {};

    struct Obs {
        std::int64_t point_id;
        int frame_id;
        Vec2 pixel;
    };
    std::vector<Obs> observations;
    for (const auto& [pid, obs_list] : model.observations) {
        if (!model.landmarks.count(pid)) continue;
        for (const auto& obs : obs_list) {
            if (!model.camera_poses.count(obs.frame_id)) continue;
            observations.push_back({pid, obs.frame_id, obs.pixel});
        }
    }

    auto total_cost = [&](const SfmModel& m) {
        double cost = 0.0;
        for (const auto& obs : observations) {
            const Vec3 x_cam = m.camera_poses.at(obs.frame_id).apply(
                m.landmarks.at(obs.point_id).position);
            if (x_cam.z() <= 1e-12) {
                cost += huber_loss(1e6, config.huber_delta_px);
                continue;
            }
            const Vec2 px = m.intrinsics.project_normalized(x_cam.hnormalized());
            cost += huber_loss((px - obs.pixel).norm(), config.huber_delta_px);
        }
        return cost;
    };

    double baseline_target = 0.0;
    if (config.scale_frames) {
        baseline_target = (model.camera_poses.at(config.scale_frames->first).center() -
                           model.camera_poses.at(config.scale_frames->second).center())
                              .norm();
    }
    // Scaling landmark positions and camera translations jointly is an exact
    // gauge motion (reprojections unchanged); used to pin the model scale.
    auto fix_scale = [&](SfmModel& m) {
        if (!config.scale_frames || baseline_target <= 0) return;
        const double baseline = (m.camera_poses.at(config.scale_frames->first).center() -
                                 m.camera_poses.at(config.scale_frames->second).center())
                                    .norm();
        if (baseline <= 0) return;
        const double s = baseline_target / baseline;
        for (auto& [pid, lm] : m.landmarks) lm.position *= s;
        for (auto& [fid, pose] : m.camera_poses) pose.translation *= s;
    };

    BundleAdjustStats stats;
    double cost = total_cost(model);
    stats.initial_cost = cost;
    stats.final_cost = cost;
    if (cost <= 1e-13 * std::max<size_t>(observations.size(), 1)) return stats;

    double lambda = 0.0;
    for (int iter = 0; iter < config.max_iterations; ++iter) {
        Eigen::MatrixXd h = Eigen::MatrixXd::Zero(dim, dim);
        Eigen::VectorXd b = Eigen::VectorXd::Zero(dim);
        for (const auto& obs : observations) {
            const Pose& pose = model.camera_poses.at(obs.frame_id);
            const Vec3& x = model.landmarks.at(obs.point_id).position;
            const Vec3 x_cam = pose.apply(x);
            if (x_cam.z() <= 1e-12) continue;
            const Vec2 r = model.intrinsics.project_normalized(x_cam.hnormalized()) - obs.pixel;
            const double w = huber_weight(r.norm(), config.huber_delta_px);
            const auto a = detail::projection_jacobian(model.intrinsics, x_cam);

            const int po = point_offset.at(obs.point_id);
            const Eigen::Matrix<double, 2, 3> j_point = a * pose.rotation;
            const auto fo_it = frame_offset.find(obs.frame_id);
            if (fo_it != frame_offset.end()) {
                Eigen::Matrix<double, 2, 6> j_pose;
                j_pose.leftCols<3>() = -a * skew_matrix(x_cam);
                j_pose.rightCols<3>() = a;
                const int fo = fo_it->second;
                h.block<6, 6>(fo, fo) += w * j_pose.transpose() * j_pose;
                h.block<6, 3>(fo, po) += w * j_pose.transpose() * j_point;
                h.block<3, 6>(po, fo) += w * j_point.transpose() * j_pose;
                b.segment<6>(fo) -= w * j_pose.transpose() * r;
            }
            h.block<3, 3>(po, po) += w * j_point.transpose() * j_point;
            b.segment<3>(po) -= w * j_point.transpose() * r;
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
                throw SingularNormalEquations();
            }

            SfmModel candidate = model;
            for (const int fid : frame_ids) {
                candidate.camera_poses[fid] =
                    model.camera_poses[fid].retract(step.segment<6>(frame_offset[fid]));
            }
            for (const auto pid : point_ids) {
                candidate.landmarks[pid].position += step.segment<3>(point_offset.at(pid));
            }
            fix_scale(candidate);
            const double new_cost = total_cost(candidate);
            if (new_cost < cost) {
                model = std::move(candidate);
                const double decrease = cost - new_cost;
                cost = new_cost;
                ++stats.iterations_accepted;
                lambda = lambda > 0 ? lambda * 0.1 : 0.0;
                if (lambda < 1e-9) lambda = 0.0;
                accepted = true;
                if (decrease < config.relative_tolerance * std::max(cost, 1e-300)) {
                    iter = config.max_iterations;  // converged
                }
                break;
            }
            lambda = lambda > 0 ? lambda * 10.0 : 1e-4;
        }
        if (!accepted) break;
    }

    stats.final_cost = cost;

    // refresh the reported mean reprojection error
    double err_sum = 0.0;
    for (const auto& obs : observations) {
        const Vec3 x_cam =
            model.camera_poses.at(obs.frame_id).apply(model.landmarks.at(obs.point_id).position);
        if (x_cam.z() <= 1e-12) continue;
        err_sum += (model.intrinsics.project_normalized(x_cam.hnormalized()) - obs.pixel).norm();
    }
    model.mean_reprojection_error =
        observations.empty() ? 0.0 : err_sum / static_cast<double>(observations.size());
    return stats;
}

/// Per-landmark mean reprojection error in pixels.
inline std::map<std::int64_t, double> per_landmark_reprojection_error(const SfmModel& model) {
    std::map<std::int64_t, double> out;
    for (const auto& [pid, obs_list] : model.observations) {
        const auto lm = model.landmarks.find(pid);
        if (lm == model.landmarks.end()) continue;
        double sum = 0.0;
        int n = 0;
        for (const auto& obs : obs_list) {
            const auto pose_it = model.camera_poses.find(obs.frame_id);
            if (pose_it == model.camera_poses.end()) continue;
            ++n;
            const Vec3 x_cam = pose_it->second.apply(lm->second.position);
            if (x_cam.z() <= 1e-12) {
                sum += 1e6;
                continue;
            }
            sum += (model.intrinsics.project_normalized(x_cam.hnormalized()) - obs.pixel).norm();
        }
        if (n > 0) out[pid] = sum / static_cast<double>(n);
    }
    return out;
}

/// Assigns each landmark the elementwise mean of its observing keypoints'
/// descriptors. Observations are reduced in a canonical order with compensated
/// summation, so the result is independent of observation order.
inline void compute_landmark_descriptors(SfmModel& model, const std::vector<Frame>& frames) {
    std::map<int, const Frame*> frame_by_id;
    for (const auto& f : frames) frame_by_id[f.id] = &f;

    for (auto& [pid, lm] : model.landmarks) {
        auto obs_it = model.observations.find(pid);
        if (obs_it == model.observations.end() || obs_it->second.empty()) {
            throw MissingDescriptor("landmark " + std::to_string(pid) + " has no observations");
        }
        auto obs = obs_it->second;
        std::sort(obs.begin(), obs.end(), [](const LandmarkObservation& a,
                                             const LandmarkObservation& b) {
            return std::tie(a.frame_id, a.keypoint_index) < std::tie(b.frame_id, b.keypoint_index);
        });

        Eigen::VectorXd sum, comp;
        int count = 0;
        for (const auto& o : obs) {
            const auto fit = frame_by_id.find(o.frame_id);
            if (fit == frame_by_id.end() ||
                o.keypoint_index >= static_cast<int>(fit->second->keypoints.size())) {
                throw MissingDescriptor("observation of landmark " + std::to_string(pid) +
                                        " references missing keypoint");
            }
            const Descriptor& d = fit->second->keypoints[o.keypoint_index].descriptor;
            if (count == 0) {
                sum = Eigen::VectorXd::Zero(d.size());
                comp = Eigen::VectorXd::Zero(d.size());
            }
            if (d.size() != sum.size()) throw DimensionMismatch();
            // Kahan update
            for (Eigen::Index i = 0; i < d.size(); ++i) {
                const double y = d[i] - comp[i];
                const double t = sum[i] + y;
                comp[i] = (t - sum[i]) - y;
                sum[i] = t;
            }
            ++count;
        }
        lm.descriptor = sum / static_cast<double>(count);
        lm.observation_count = count;
    }
}

struct RegistrationResult {
    SimilarityTransform transform;
    double rms_residual = 0.0;
};

/// Fits the similarity transform mapping model-frame points onto world-frame
/// points and stores it on the model.
inline RegistrationResult register_model(SfmModel& model,
                                         const std::vector<std::pair<Vec3, Vec3>>& pairs) {
    if (pairs.size() < 3) throw TooFewPairs();
    std::vector<Vec3> src, dst;
    for (const auto& [model_pt, world_pt] : pairs) {
        src.push_back(model_pt);
        dst.push_back(world_pt);
    }
    RegistrationResult result;
    try {
        result.transform = align_point_sets(src, dst, /*with_scale=*/true);
    } catch (const CollinearDegenerate&) {
        throw CollinearPoints();
    }
    double sum2 = 0.0;
    for (const auto& [model_pt, world_pt] : pairs) {
        sum2 += (result.transform.apply(model_pt) - world_pt).squaredNorm();
    }
    result.rms_residual = std::sqrt(sum2 / static_cast<double>(pairs.size()));
    model.registration = result.transform;
    return result;
}

struct ReconstructionConfig {
    int ba_interval = 5;
    BundleAdjustConfig ba;
    double pnp_inlier_threshold_px = 4.0;
    double pnp_success_prob = 0.99;
    int pnp_max_iterations = 500;
    std::uint64_t rng_seed = 0;
    double prune_error_factor = 3.0;  // drop landmarks above factor * huber delta
};

struct SeedPair {
    int frame_a = 0;
    int frame_b = 0;
    Pose relative_pose;  // pose of frame_b with frame_a as the world frame
};

namespace detail {

inline std::optional<Vec3> try_triangulate_track(const Track& track, const SfmModel& model,
                                                 const std::map<int, const Frame*>& frame_by_id) {
    // pick the two registered views with the widest baseline
    std::vector<const TrackObservation*> registered;
    for (const auto& obs : track.observations) {
        if (model.camera_poses.count(obs.frame_id)) registered.push_back(&obs);
    }
    if (registered.size() < 2) return std::nullopt;

    const TrackObservation* best_a = nullptr;
    const TrackObservation* best_b = nullptr;
    double best_baseline = 0.0;
    for (size_t i = 0; i < registered.size(); ++i) {
        for (size_t j = i + 1; j < registered.size(); ++j) {
            const double baseline = (model.camera_poses.at(registered[i]->frame_id).center() -
                                     model.camera_poses.at(registered[j]->frame_id).center())
                                        .norm();
            if (baseline > best_baseline) {
                best_baseline = baseline;
                best_a = registered[i];
                best_b = registered[j];
            }
        }
    }
    if (!best_a || best_baseline < 1e-9) return std::nullopt;

    const auto pixel_of = [&](const TrackObservation& obs) {
        return frame_by_id.at(obs.frame_id)->keypoints[obs.keypoint_index].pixel;
    };
    try {
        return triangulate_dlt(
            compose_projection(model.intrinsics, model.camera_poses.at(best_a->frame_id)),
            compose_projection(model.intrinsics, model.camera_poses.at(best_b->frame_id)),
            pixel_of(*best_a), pixel_of(*best_b));
    } catch (const Error&) {
        return std::nullopt;
    }
}

}  // namespace detail

/// Incremental structure from motion: bootstraps from a supplied seed pair,
/// then alternates PnP registration of the best next frame, triangulation of
/// newly completable tracks, and periodic bundle adjustment.
inline SfmModel incremental_reconstruct(const std::vector<Frame>& frames,
                                        const std::vector<FramePairMatches>& matches,
                                        const SeedPair& seed, const CameraIntrinsics& intrinsics,
                                        ReconstructionConfig config = {}) {
    std::map<int, const Frame*> frame_by_id;
    for (const auto& f : frames) frame_by_id[f.id] = &f;
    if (!frame_by_id.count(seed.frame_a) || !frame_by_id.count(seed.frame_b)) {
        throw SeedDegenerate("seed frames not present");
    }

    std::vector<Track> tracks = build_tracks(matches);

    int seed_shared = 0;
    for (const auto& track : tracks) {
        bool has_a = false, has_b = false;
        for (const auto& obs : track.observations) {
            has_a |= obs.frame_id == seed.frame_a;
            has_b |= obs.frame_id == seed.frame_b;
        }
        if (has_a && has_b) ++seed_shared;
    }
    if (seed_shared < 8) throw SeedDegenerate("seed pair shares fewer than 8 tracks");

    SfmModel model;
    model.intrinsics = intrinsics;
    model.camera_poses[seed.frame_a] = Pose::identity();
    Pose second = seed.relative_pose;
    const double baseline = second.translation.norm();
    if (baseline < 1e-12) throw SeedDegenerate("zero-baseline seed pose");
    second.translation /= baseline;  // model scale: unit seed baseline
    model.camera_poses[seed.frame_b] = second;

    config.ba.fixed_frame_id = seed.frame_a;
    config.ba.scale_frames = {{seed.frame_a, seed.frame_b}};

    std::int64_t next_point_id = 0;
    auto triangulate_new = [&]() {
        for (auto& track : tracks) {
            if (track.point_id) continue;
            const auto point = detail::try_triangulate_track(track, model, frame_by_id);
            if (!point) continue;
            const std::int64_t pid = next_point_id++;
            track.point_id = pid;
            Landmark lm;
            lm.id = pid;
            lm.position = *point;
            model.landmarks[pid] = std::move(lm);
            for (const auto& obs : track.observations) {
                model.observations[pid].push_back(
                    {obs.frame_id, obs.keypoint_index,
                     frame_by_id.at(obs.frame_id)->keypoints[obs.keypoint_index].pixel});
            }
        }
    };

    auto prune = [&]() {
        const auto errors = per_landmark_reprojection_error(model);
        const double limit = config.prune_error_factor * config.ba.huber_delta_px;
        std::vector<std::int64_t> drop;
        for (const auto& [pid, lm] : model.landmarks) {
            const auto it = errors.find(pid);
            const auto obs_it = model.observations.find(pid);
            const int n_obs =
                obs_it == model.observations.end() ? 0 : static_cast<int>(obs_it->second.size());
            if (n_obs < 2 || (it != errors.end() && it->second > limit)) drop.push_back(pid);
        }
        for (const auto pid : drop) {
            model.landmarks.erase(pid);
            model.observations.erase(pid);
            for (auto& track : tracks) {
                if (track.point_id == pid) track.point_id.reset();
            }
        }
    };

    triangulate_new();
    if (model.landmarks.empty()) throw SeedDegenerate("no seed track triangulated");

    std::set<int> unregistered;
    for (const auto& f : frames) {
        if (!model.camera_poses.count(f.id)) unregistered.insert(f.id);
    }

    // per-frame lookup: which (track, keypoint) pairs does a frame observe
    std::map<int, std::vector<std::pair<int, int>>> frame_tracks;  // frame -> (track idx, kp)
    for (int ti = 0; ti < static_cast<int>(tracks.size()); ++ti) {
        for (const auto& obs : tracks[ti].observations) {
            frame_tracks[obs.frame_id].emplace_back(ti, obs.keypoint_index);
        }
    }

    int added_since_ba = 0;
    std::uint64_t ransac_salt = 0;
    while (!unregistered.empty()) {
        int best_frame = -1;
        int best_visible = 0;
        for (const int fid : unregistered) {
            int visible = 0;
            for (const auto& [ti, kp] : frame_tracks[fid]) {
                if (tracks[ti].point_id) ++visible;
            }
            if (visible > best_visible) {
                best_visible = visible;
                best_frame = fid;
            }
        }
        if (best_frame < 0 || best_visible < 6) throw RegistrationStalled();

        std::vector<Correspondence3D2D> corrs;
        for (const auto& [ti, kp] : frame_tracks[best_frame]) {
            if (!tracks[ti].point_id) continue;
            corrs.push_back({model.landmarks.at(*tracks[ti].point_id).position,
                             frame_by_id.at(best_frame)->keypoints[kp].pixel});
        }

        RansacConfig rc;
        rc.success_prob = config.pnp_success_prob;
        rc.inlier_threshold = config.pnp_inlier_threshold_px;
        rc.sample_size = 6;
        rc.max_iterations = config.pnp_max_iterations;
        rc.rng_seed = config.rng_seed + ransac_salt++;

        auto solve = [&](const std::vector<int>& sample) {
            std::vector<Pose> models;
            std::vector<Correspondence3D2D> subset;
            for (const int i : sample) subset.push_back(corrs[i]);
            try {
                const auto r = solve_pnp_dlt(subset, intrinsics);
                if (r.pose) models.push_back(*r.pose);
            } catch (const Error&) {
            }
            return models;
        };
        auto residual = [&](const Pose& pose, int i) {
            const Vec3 x_cam = pose.apply(corrs[i].world);
            if (x_cam.z() <= 1e-12) return std::numeric_limits<double>::infinity();
            return (intrinsics.project_normalized(x_cam.hnormalized()) - corrs[i].pixel).norm();
        };
        auto refine = [&](const Pose&, const std::vector<int>& inliers) -> std::optional<Pose> {
            if (inliers.size() < 6) return std::nullopt;
            std::vector<Correspondence3D2D> subset;
            for (const int i : inliers) subset.push_back(corrs[i]);
            try {
                const auto r = solve_pnp_dlt(subset, intrinsics);
                return r.pose;
            } catch (const Error&) {
                return std::nullopt;
            }
        };

        Pose registered;
        try {
            const auto result = run_ransac<Pose>(static_cast<int>(corrs.size()), solve, residual,
                                                 rc, refine);
            registered = result.model;
        } catch (const Error&) {
            throw RegistrationStalled("PnP registration failed for frame " +
                                      std::to_string(best_frame));
        }
        model.camera_poses[best_frame] = registered;
        unregistered.erase(best_frame);

        triangulate_new();
        if (++added_since_ba >= config.ba_interval) {
            bundle_adjust(model, config.ba);
            prune();
            added_since_ba = 0;
        }
    }

    bundle_adjust(model, config.ba);
    prune();
    bundle_adjust(model, config.ba);
    compute_landmark_descriptors(model, frames);
    return model;
}

}  // namespace lloc
