#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "landmarkloc/common.hpp"
#include "landmarkloc/evaluation.hpp"
#include "landmarkloc/features.hpp"
#include "landmarkloc/geometry.hpp"
#include "landmarkloc/mapping.hpp"

namespace lloc {

struct SceneConfig {
    int n_landmarks = 500;
    Vec3 box_min = Vec3(-10, -10, -2);
    Vec3 box_max = Vec3(10, 10, 4);
    int descriptor_dim = 32;
    double descriptor_noise = 0.0;  // unused at generation; kept with the scene
    double min_descriptor_separation = 0.5;
    std::uint64_t rng_seed = 0;
};

struct ObservationConfig {
    double pixel_noise = 0.0;
    double outlier_rate = 0.0;
    double dropout_rate = 0.0;
    double descriptor_noise = 0.0;
    CameraIntrinsics intrinsics;
};

namespace detail {

inline Eigen::VectorXd random_unit_descriptor(int dim, std::mt19937_64& rng) {
    std::normal_distribution<double> gauss(0.0, 1.0);
    Eigen::VectorXd d(dim);
    do {
        for (int i = 0; i < dim; ++i) d[i] = gauss(rng);
    } while (d.norm() < 1e-9);
    return d / d.norm();
}

}  // namespace detail

/// Uniform landmark positions inside the box, with unit-norm descriptors kept
/// pairwise separated by rejection so zero-noise association is unambiguous.
inline std::vector<Landmark> generate_scene(const SceneConfig& config) {
    std::mt19937_64 rng(config.rng_seed);
    std::uniform_real_distribution<double> ux(config.box_min.x(), config.box_max.x());
    std::uniform_real_distribution<double> uy(config.box_min.y(), config.box_max.y());
    std::uniform_real_distribution<double> uz(config.box_min.z(), config.box_max.z());

    std::vector<Landmark> scene;
    scene.reserve(config.n_landmarks);
    long attempts = 0;
    const long max_attempts = 1000L * config.n_landmarks;
    while (static_cast<int>(scene.size()) < config.n_landmarks) {
        if (++attempts > max_attempts) throw PackingFailure();
        Eigen::VectorXd d = detail::random_unit_descriptor(config.descriptor_dim, rng);
        bool separated = true;
        for (const auto& lm : scene) {
            if ((lm.descriptor - d).norm() < config.min_descriptor_separation) {
                separated = false;
                break;
            }
        }
        if (!separated) continue;
        Landmark lm;
        lm.id = static_cast<std::int64_t>(scene.size());
        lm.position = Vec3(ux(rng), uy(rng), uz(rng));
        lm.descriptor = std::move(d);
        lm.observation_count = 2;
        scene.push_back(std::move(lm));
    }
    return scene;
}

inline SfmModel scene_to_map(const std::vector<Landmark>& scene,
                             const CameraIntrinsics& intrinsics) {
    SfmModel map;
    map.intrinsics = intrinsics;
    for (const auto& lm : scene) map.landmarks[lm.id] = lm;
    return map;
}

/// World-to-camera look-at pose: camera at eye, +z toward target.
inline Pose look_at(const Vec3& eye, const Vec3& target, const Vec3& up = Vec3(0, 0, 1)) {
    const Vec3 z = (target - eye).normalized();
    Vec3 x = up.cross(z);
    if (x.norm() < 1e-9) x = Vec3(1, 0, 0).cross(z);  // forward parallel to up
    x.normalize();
    const Vec3 y = z.cross(x);
    Mat3 r_cw;  // columns: camera axes in world coordinates
    r_cw.col(0) = x;
    r_cw.col(1) = y;
    r_cw.col(2) = z;
    Pose pose;
    pose.rotation = r_cw.transpose();
    pose.translation = -pose.rotation * eye;
    return pose;
}

struct CircleShape {
    Vec3 center = Vec3::Zero();
    double radius = 5.0;
    int n_poses = 100;
    double height = 0.0;
    bool look_at_center = true;
    double angle_span = 2.0 * M_PI;  // full loop by default
};

struct LineShape {
    Vec3 from = Vec3::Zero();
    Vec3 to = Vec3(1, 0, 0);
    int n_poses = 2;
};

/// Evenly spaced inward-facing poses on a circle; consecutive relative
/// transforms are constant, so a constant-speed motion model is exact on it.
inline Trajectory generate_circle_trajectory(const CircleShape& shape,
                                             double t_start = 0.0, double dt = 0.1) {
    Trajectory trajectory;
    for (int i = 0; i < shape.n_poses; ++i) {
        const double theta = shape.angle_span * i / shape.n_poses;
        const Vec3 eye = shape.center + Vec3(shape.radius * std::cos(theta),
                                             shape.radius * std::sin(theta), shape.height);
        Pose pose;
        if (shape.look_at_center) {
            pose = look_at(eye, shape.center + Vec3(0, 0, shape.height));
        } else {
            const double next = shape.angle_span * (i + 1) / shape.n_poses;
            const Vec3 ahead = shape.center + Vec3(shape.radius * std::cos(next),
                                                   shape.radius * std::sin(next), shape.height);
            pose = look_at(eye, ahead);
        }
        trajectory.entries.push_back({t_start + i * dt, pose});
    }
    return trajectory;
}

inline Trajectory generate_line_trajectory(const LineShape& shape, double t_start = 0.0,
                                           double dt = 0.1) {
    Trajectory trajectory;
    const Vec3 dir = shape.to - shape.from;
    for (int i = 0; i < shape.n_poses; ++i) {
        const double a =
            shape.n_poses > 1 ? static_cast<double>(i) / (shape.n_poses - 1) : 0.0;
        const Vec3 eye = shape.from + a * dir;
        trajectory.entries.push_back({t_start + i * dt, look_at(eye, eye + dir)});
    }
    return trajectory;
}

struct RenderLabel {
    int keypoint_index = 0;
    std::int64_t landmark_id = -1;  // -1: injected outlier
};

struct RenderedFrame {
    Frame frame;
    std::vector<RenderLabel> labels;
};

/// Projects the scene at the given pose and corrupts the observations per the
/// configuration: dropout, pixel noise, descriptor noise (renormalized), and
/// outlier injection. Keypoints come back in shuffled order with the true
/// keypoint-to-landmark labels attached.
inline RenderedFrame render_frame(const std::vector<Landmark>& scene, const Pose& pose,
                                  const ObservationConfig& config, int frame_id,
                                  double timestamp, std::uint64_t rng_seed) {
    std::mt19937_64 rng(rng_seed);
    std::uniform_real_distribution<double> coin(0.0, 1.0);
    std::normal_distribution<double> gauss(0.0, 1.0);
    const CameraIntrinsics& k = config.intrinsics;
    const ProjectionMatrix p = compose_projection(k, pose);

    struct Raw {
        Vec2 pixel;
        Descriptor descriptor;
        std::int64_t landmark_id;
    };
    std::vector<Raw> raws;
    for (const auto& lm : scene) {
        const Vec3 h = p * lm.position.homogeneous();
        if (h.z() <= 0) continue;
        Vec2 px(h.x() / h.z(), h.y() / h.z());
        if (!k.in_bounds(px)) continue;
        if (config.dropout_rate > 0 && coin(rng) < config.dropout_rate) continue;

        if (config.pixel_noise > 0) {
            px += config.pixel_noise * Vec2(gauss(rng), gauss(rng));
        }
        Descriptor d = lm.descriptor;
        if (config.descriptor_noise > 0) {
            for (Eigen::Index i = 0; i < d.size(); ++i) d[i] += config.descriptor_noise * gauss(rng);
            d.normalize();
        }
        if (config.outlier_rate > 0 && coin(rng) < config.outlier_rate) {
            px = Vec2(coin(rng) * k.width, coin(rng) * k.height);
            d = detail::random_unit_descriptor(static_cast<int>(d.size()), rng);
            raws.push_back({px, std::move(d), -1});
        } else {
            raws.push_back({px, std::move(d), lm.id});
        }
    }

    std::shuffle(raws.begin(), raws.end(), rng);

    RenderedFrame out;
    out.frame.id = frame_id;
    out.frame.timestamp = timestamp;
    for (int i = 0; i < static_cast<int>(raws.size()); ++i) {
        out.frame.keypoints.push_back({raws[i].pixel, std::move(raws[i].descriptor)});
        out.labels.push_back({i, raws[i].landmark_id});
    }
    // mid-entropy synthetic histogram: uniform over 64 bins = 6 bits
    std::vector<std::int64_t> histogram(256, 0);
    for (int i = 0; i < 64; ++i) histogram[i * 4] = 10;
    out.frame.intensity_histogram = std::move(histogram);
    return out;
}

}  // namespace lloc
