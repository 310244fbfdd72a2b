#pragma once

#include <Eigen/Dense>
#include <Eigen/Geometry>
#include <cmath>
#include <utility>

#include "landmarkloc/common.hpp"

namespace lloc {

using Mat3 = Eigen::Matrix3d;
using Mat34 = Eigen::Matrix<double, 3, 4>;
using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Vec6 = Eigen::Matrix<double, 6, 1>;

inline Mat3 skew_matrix(const Vec3& w) {
    Mat3 s;
    s << 0, -w.z(), w.y(), w.z(), 0, -w.x(), -w.y(), w.x(), 0;
    return s;
}

/// Rodrigues exponential: axis-angle vector to rotation matrix.
inline Mat3 so3_exp(const Vec3& w) {
    const double theta = w.norm();
    if (theta < 1e-12) {
        return Mat3::Identity() + skew_matrix(w);
    }
    const Mat3 k = skew_matrix(w / theta);
    return Mat3::Identity() + std::sin(theta) * k + (1.0 - std::cos(theta)) * k * k;
}

/// Rotation log-map: returns the axis-angle vector with norm in [0, pi].
inline Vec3 so3_log(const Mat3& r) {
    const double cos_theta = std::clamp((r.trace() - 1.0) * 0.5, -1.0, 1.0);
    const double theta = std::acos(cos_theta);
    if (theta < 1e-5) {
        // near identity: vee of the antisymmetric part
        return 0.5 * Vec3(r(2, 1) - r(1, 2), r(0, 2) - r(2, 0), r(1, 0) - r(0, 1));
    }
    if (theta > M_PI - 1e-5) {
        // near pi: extract axis from the symmetric part
        Mat3 s = 0.5 * (r + Mat3::Identity());
        Vec3 axis = s.diagonal().cwiseMax(0.0).cwiseSqrt();
        // fix signs using off-diagonals relative to the largest component
        int m = 0;
        s.diagonal().maxCoeff(&m);
        for (int i = 0; i < 3; ++i) {
            if (i != m && s(m, i) < 0) axis[i] = -axis[i];
        }
        if (axis.norm() < 1e-12) return Vec3::Zero();
        return theta * axis.normalized();
    }
    Vec3 v(r(2, 1) - r(1, 2), r(0, 2) - r(2, 0), r(1, 0) - r(0, 1));
    return (theta / (2.0 * std::sin(theta))) * v;
}

/// Nearest rotation matrix in the Frobenius sense (polar factor). Keeps
/// repeatedly composed rotations from drifting off the manifold.
inline Mat3 orthonormalized(const Mat3& r) {
    const Eigen::JacobiSVD<Mat3> svd(r, Eigen::ComputeFullU | Eigen::ComputeFullV);
    Vec3 signs(1.0, 1.0, (svd.matrixU() * svd.matrixV().transpose()).determinant() < 0 ? -1.0
                                                                                       : 1.0);
    return svd.matrixU() * signs.asDiagonal() * svd.matrixV().transpose();
}

/// Rigid transform mapping world coordinates into the camera frame:
/// X_cam = R * X_world + t.
struct Pose {
    Mat3 rotation = Mat3::Identity();
    Vec3 translation = Vec3::Zero();

    static Pose identity() { return {}; }

    Vec3 apply(const Vec3& x_world) const { return rotation * x_world + translation; }

    Pose inverse() const { return {rotation.transpose(), -rotation.transpose() * translation}; }

    /// this ∘ other: first apply other, then this.
    Pose compose(const Pose& other) const {
        return {rotation * other.rotation, rotation * other.translation + translation};
    }

    /// Camera center in world coordinates.
    Vec3 center() const { return -rotation.transpose() * translation; }

    /// Left-multiplicative retraction with delta = [omega; dt].
    Pose retract(const Vec6& delta) const {
        const Mat3 dr = so3_exp(delta.head<3>());
        return {orthonormalized(dr * rotation), dr * translation + delta.tail<3>()};
    }

    bool is_valid(double tol = 1e-9) const {
        return (rotation * rotation.transpose() - Mat3::Identity()).cwiseAbs().maxCoeff() < tol &&
               std::abs(rotation.determinant() - 1.0) < tol && translation.allFinite();
    }
};

/// Scaled rigid transform X -> s * R * X + t, s > 0.
struct SimilarityTransform {
    double scale = 1.0;
    Mat3 rotation = Mat3::Identity();
    Vec3 translation = Vec3::Zero();

    static SimilarityTransform identity() { return {}; }

    Vec3 apply(const Vec3& x) const { return scale * (rotation * x) + translation; }

    SimilarityTransform inverse() const {
        const Mat3 rt = rotation.transpose();
        return {1.0 / scale, rt, -(rt * translation) / scale};
    }

    SimilarityTransform compose(const SimilarityTransform& other) const {
        return {scale * other.scale, rotation * other.rotation,
                scale * (rotation * other.translation) + translation};
    }
};

struct CameraIntrinsics {
    double fx = 1.0, fy = 1.0;
    double skew = 0.0;
    double cx = 0.0, cy = 0.0;
    double width = 0.0, height = 0.0;

    Mat3 matrix() const {
        Mat3 k;
        k << fx, skew, cx, 0, fy, cy, 0, 0, 1;
        return k;
    }

    Vec2 project_normalized(const Vec2& n) const {
        return {fx * n.x() + skew * n.y() + cx, fy * n.y() + cy};
    }

    Vec2 to_normalized(const Vec2& pixel) const {
        const double y = (pixel.y() - cy) / fy;
        const double x = (pixel.x() - cx - skew * y) / fx;
        return {x, y};
    }

    bool in_bounds(const Vec2& pixel) const {
        return pixel.x() >= 0 && pixel.x() < width && pixel.y() >= 0 && pixel.y() < height;
    }
};

/// Radial (k1,k2,k3) and tangential (p1,p2) coefficients on normalized coordinates.
struct DistortionCoeffs {
    double k1 = 0, k2 = 0, k3 = 0;
    double p1 = 0, p2 = 0;

    bool is_zero() const { return k1 == 0 && k2 == 0 && k3 == 0 && p1 == 0 && p2 == 0; }
};

using ProjectionMatrix = Mat34;

inline ProjectionMatrix compose_projection(const CameraIntrinsics& k, const Pose& pose) {
    Mat34 rt;
    rt.leftCols<3>() = pose.rotation;
    rt.col(3) = pose.translation;
    return k.matrix() * rt;
}

/// Projects a world point; returns (pixel, depth). The caller inspects the
/// depth sign for cheirality.
inline std::pair<Vec2, double> project_point(const ProjectionMatrix& p, const Vec3& x) {
    const Vec3 h = p * x.homogeneous();
    if (std::abs(h.z()) < 1e-12) throw DegenerateDepth();
    return {Vec2(h.x() / h.z(), h.y() / h.z()), h.z()};
}

inline Vec2 distort_normalized(const Vec2& pt, const DistortionCoeffs& d) {
    const double x = pt.x(), y = pt.y();
    const double r2 = x * x + y * y;
    const double radial = 1.0 + r2 * (d.k1 + r2 * (d.k2 + r2 * d.k3));
    return {x * radial + 2.0 * d.p1 * x * y + d.p2 * (r2 + 2.0 * x * x),
            y * radial + d.p1 * (r2 + 2.0 * y * y) + 2.0 * d.p2 * x * y};
}

/// Inverts the distortion model by fixed-point iteration on normalized
/// coordinates, then reprojects through K.
inline Vec2 undistort_pixel(const Vec2& pixel, const CameraIntrinsics& k,
                            const DistortionCoeffs& d) {
    const Vec2 distorted = k.to_normalized(pixel);
    if (d.is_zero()) return pixel;
    Vec2 undistorted = distorted;
    for (int i = 0; i < 20; ++i) {
        const Vec2 offset = distort_normalized(undistorted, d) - undistorted;
        const Vec2 next = distorted - offset;
        const double step = (next - undistorted).norm();
        undistorted = next;
        if (step < 1e-10) return k.project_normalized(undistorted);
    }
    if ((distort_normalized(undistorted, d) - distorted).norm() > 1e-8) throw NoConvergence();
    return k.project_normalized(undistorted);
}

inline Vec3 apply_similarity(const SimilarityTransform& t, const Vec3& point) {
    return t.apply(point);
}

/// Transforms a world-to-camera pose so its camera center maps as a point and
/// its orientation composes with the transform's rotation.
inline Pose apply_similarity(const SimilarityTransform& t, const Pose& pose) {
    const Mat3 r_new = pose.rotation * t.rotation.transpose();
    const Vec3 c_new = t.apply(pose.center());
    return {r_new, -r_new * c_new};
}

/// Geodesic angle between two rotations, in degrees, in [0, 180].
inline double rotation_angle_between(const Mat3& ra, const Mat3& rb) {
    const Mat3 rel = ra * rb.transpose();
    return so3_log(rel).norm() * 180.0 / M_PI;
}

inline Eigen::Quaterniond to_quaternion(const Mat3& r) {
    Eigen::Quaterniond q(r);
    q.normalize();
    if (q.w() < 0) q.coeffs() = -q.coeffs();
    return q;
}

}  // namespace lloc
