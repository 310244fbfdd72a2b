#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <json.hpp>
#include <sstream>
#include <string>
#include <vector>

#include "landmarkloc/common.hpp"
#include "landmarkloc/evaluation.hpp"
#include "landmarkloc/features.hpp"
#include "landmarkloc/geometry.hpp"
#include "landmarkloc/mapping.hpp"

namespace lloc {

using json = nlohmann::json;

inline constexpr const char* kMapFormatTag = "landmark-map/1";
inline constexpr const char* kFrameFormatTag = "frame-file/1";

// --- calibration -----------------------------------------------------------

inline json intrinsics_to_json(const CameraIntrinsics& k) {
    return {{"fx", k.fx},       {"fy", k.fy},     {"skew", k.skew}, {"cx", k.cx},
            {"cy", k.cy},       {"width", k.width}, {"height", k.height}};
}

inline CameraIntrinsics intrinsics_from_json(const json& j) {
    CameraIntrinsics k;
    k.fx = j.at("fx").get<double>();
    k.fy = j.at("fy").get<double>();
    k.skew = j.value("skew", 0.0);
    k.cx = j.at("cx").get<double>();
    k.cy = j.at("cy").get<double>();
    k.width = j.at("width").get<double>();
    k.height = j.at("height").get<double>();
    return k;
}

struct Calibration {
    CameraIntrinsics intrinsics;
    DistortionCoeffs distortion;
};

/// Key-value calibration document. Missing distortion fields default to 0.
inline Calibration load_calibration(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open calibration file: " + path);
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw ParseError(std::string("calibration: ") + e.what());
    }
    Calibration c;
    c.intrinsics = intrinsics_from_json(j);
    c.distortion.k1 = j.value("k1", 0.0);
    c.distortion.k2 = j.value("k2", 0.0);
    c.distortion.k3 = j.value("k3", 0.0);
    c.distortion.p1 = j.value("p1", 0.0);
    c.distortion.p2 = j.value("p2", 0.0);
    return c;
}

// --- frame file -------------------------------------------------------------

inline json frames_to_json(const std::vector<Frame>& frames, int descriptor_dim) {
    json out;
    out["format"] = kFrameFormatTag;
    out["descriptor_dim"] = descriptor_dim;
    json jframes = json::array();
    for (const auto& f : frames) {
        json jf;
        jf["id"] = f.id;
        jf["timestamp"] = f.timestamp;
        json kps = json::array();
        for (const auto& kp : f.keypoints) {
            json jk;
            jk["u"] = kp.pixel.x();
            jk["v"] = kp.pixel.y();
            jk["descriptor"] = std::vector<double>(kp.descriptor.data(),
                                                   kp.descriptor.data() + kp.descriptor.size());
            kps.push_back(std::move(jk));
        }
        jf["keypoints"] = std::move(kps);
        if (f.intensity_histogram) jf["histogram"] = *f.intensity_histogram;
        jframes.push_back(std::move(jf));
    }
    out["frames"] = std::move(jframes);
    return out;
}

inline std::vector<Frame> frames_from_json(const json& j, int* descriptor_dim_out = nullptr) {
    if (j.value("format", "") != kFrameFormatTag) {
        throw ParseError("missing or wrong frame file format tag");
    }
    const int dim = j.at("descriptor_dim").get<int>();
    if (descriptor_dim_out) *descriptor_dim_out = dim;
    std::vector<Frame> frames;
    for (const auto& jf : j.at("frames")) {
        Frame f;
        f.id = jf.at("id").get<int>();
        f.timestamp = jf.at("timestamp").get<double>();
        for (const auto& jk : jf.at("keypoints")) {
            Keypoint kp;
            kp.pixel = Vec2(jk.at("u").get<double>(), jk.at("v").get<double>());
            const auto vals = jk.at("descriptor").get<std::vector<double>>();
            if (static_cast<int>(vals.size()) != dim) {
                throw ParseError("descriptor length differs from declared descriptor_dim");
            }
            kp.descriptor = Eigen::Map<const Eigen::VectorXd>(vals.data(), vals.size());
            f.keypoints.push_back(std::move(kp));
        }
        if (jf.contains("histogram")) {
            const auto hist = jf.at("histogram").get<std::vector<std::int64_t>>();
            if (hist.size() != 256) throw ParseError("histogram must have 256 bins");
            f.intensity_histogram = hist;
        }
        frames.push_back(std::move(f));
    }
    return frames;
}

inline void save_frames(const std::vector<Frame>& frames, int descriptor_dim,
                        const std::string& path) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write frame file: " + path);
    out << frames_to_json(frames, descriptor_dim).dump(1) << "\n";
}

inline std::vector<Frame> load_frames(const std::string& path,
                                      int* descriptor_dim_out = nullptr) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open frame file: " + path);
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw ParseError(std::string("frame file: ") + e.what());
    }
    return frames_from_json(j, descriptor_dim_out);
}

// --- map file ---------------------------------------------------------------

inline json model_to_json(const SfmModel& model) {
    json out;
    out["format"] = kMapFormatTag;
    int dim = 0;
    for (const auto& [id, lm] : model.landmarks) {
        dim = static_cast<int>(lm.descriptor.size());
        break;
    }
    out["descriptor_dim"] = dim;
    out["intrinsics"] = intrinsics_to_json(model.intrinsics);
    if (model.registration) {
        const auto& r = *model.registration;
        const auto q = to_quaternion(r.rotation);
        out["registration"] = {{"s", r.scale},
                               {"q", {q.w(), q.x(), q.y(), q.z()}},
                               {"t", {r.translation.x(), r.translation.y(), r.translation.z()}}};
    }
    json landmarks = json::array();
    for (const auto& [id, lm] : model.landmarks) {
        json jl;
        jl["id"] = id;
        jl["xyz"] = {lm.position.x(), lm.position.y(), lm.position.z()};
        jl["descriptor"] = std::vector<double>(lm.descriptor.data(),
                                               lm.descriptor.data() + lm.descriptor.size());
        jl["obs_count"] = lm.observation_count;
        landmarks.push_back(std::move(jl));
    }
    out["landmarks"] = std::move(landmarks);
    json poses = json::array();
    for (const auto& [fid, pose] : model.camera_poses) {
        const auto q = to_quaternion(pose.rotation);
        poses.push_back({{"frame_id", fid},
                         {"qw", q.w()},
                         {"qx", q.x()},
                         {"qy", q.y()},
                         {"qz", q.z()},
                         {"tx", pose.translation.x()},
                         {"ty", pose.translation.y()},
                         {"tz", pose.translation.z()}});
    }
    out["poses"] = std::move(poses);
    return out;
}

inline SfmModel model_from_json(const json& j) {
    if (j.value("format", "") != kMapFormatTag) {
        throw ParseError("missing or wrong map format tag (expected landmark-map/1)");
    }
    SfmModel model;
    model.intrinsics = intrinsics_from_json(j.at("intrinsics"));
    const int dim = j.at("descriptor_dim").get<int>();
    if (j.contains("registration")) {
        const auto& jr = j.at("registration");
        SimilarityTransform t;
        t.scale = jr.at("s").get<double>();
        const auto q = jr.at("q").get<std::vector<double>>();
        if (q.size() != 4) throw ParseError("registration quaternion must have 4 entries");
        Eigen::Quaterniond quat(q[0], q[1], q[2], q[3]);
        if (quat.norm() < 1e-12) throw ParseError("zero registration quaternion");
        // only renormalize when actually needed, so save/load is byte-stable
        if (std::abs(quat.norm() - 1.0) > 1e-12) quat.normalize();
        t.rotation = quat.toRotationMatrix();
        const auto tv = jr.at("t").get<std::vector<double>>();
        if (tv.size() != 3) throw ParseError("registration translation must have 3 entries");
        t.translation = Vec3(tv[0], tv[1], tv[2]);
        model.registration = t;
    }
    for (const auto& jl : j.at("landmarks")) {
        Landmark lm;
        lm.id = jl.at("id").get<std::int64_t>();
        const auto xyz = jl.at("xyz").get<std::vector<double>>();
        if (xyz.size() != 3) throw ParseError("landmark xyz must have 3 entries");
        lm.position = Vec3(xyz[0], xyz[1], xyz[2]);
        const auto desc = jl.at("descriptor").get<std::vector<double>>();
        if (static_cast<int>(desc.size()) != dim) {
            throw ParseError("landmark descriptor length differs from header descriptor_dim");
        }
        lm.descriptor = Eigen::Map<const Eigen::VectorXd>(desc.data(), desc.size());
        lm.observation_count = jl.at("obs_count").get<int>();
        model.landmarks[lm.id] = std::move(lm);
    }
    for (const auto& jp : j.at("poses")) {
        Eigen::Quaterniond q(jp.at("qw").get<double>(), jp.at("qx").get<double>(),
                             jp.at("qy").get<double>(), jp.at("qz").get<double>());
        if (q.norm() < 1e-12) throw ParseError("zero pose quaternion");
        if (std::abs(q.norm() - 1.0) > 1e-12) q.normalize();
        Pose pose;
        pose.rotation = q.toRotationMatrix();
        pose.translation = Vec3(jp.at("tx").get<double>(), jp.at("ty").get<double>(),
                                jp.at("tz").get<double>());
        model.camera_poses[jp.at("frame_id").get<int>()] = pose;
    }
    return model;
}

inline void save_model(const SfmModel& model, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write map file: " + path);
    out << model_to_json(model).dump(1) << "\n";
}

inline SfmModel load_model(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open map file: " + path);
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw ParseError(std::string("map file: ") + e.what());
    }
    return model_from_json(j);
}

// --- COLMAP text model import ----------------------------------------------

namespace detail {

struct ColmapCamera {
    CameraIntrinsics intrinsics;
};

inline std::map<int, ColmapCamera> parse_colmap_cameras(std::istream& in) {
    std::map<int, ColmapCamera> cameras;
    std::string line;
    int line_number = 0;
    while (std::getline(in, line)) {
        ++line_number;
        const auto first = line.find_first_not_of(" \t\r");
        if (first == std::string::npos || line[first] == '#') continue;
        std::istringstream fields(line);
        int camera_id = 0;
        std::string model;
        double width = 0, height = 0;
        if (!(fields >> camera_id >> model >> width >> height)) {
            throw ParseError("cameras.txt: malformed camera row", line_number);
        }
        ColmapCamera cam;
        cam.intrinsics.width = width;
        cam.intrinsics.height = height;
        if (model == "PINHOLE") {
            if (!(fields >> cam.intrinsics.fx >> cam.intrinsics.fy >> cam.intrinsics.cx >>
                  cam.intrinsics.cy)) {
                throw ParseError("cameras.txt: PINHOLE needs fx fy cx cy", line_number);
            }
        } else if (model == "SIMPLE_RADIAL") {
            double f = 0, k = 0;
            if (!(fields >> f >> cam.intrinsics.cx >> cam.intrinsics.cy >> k)) {
                throw ParseError("cameras.txt: SIMPLE_RADIAL needs f cx cy k", line_number);
            }
            cam.intrinsics.fx = cam.intrinsics.fy = f;
        } else {
            throw UnsupportedCameraModel("unsupported COLMAP camera model: " + model);
        }
        cameras[camera_id] = cam;
    }
    if (cameras.empty()) throw ParseError("cameras.txt: no cameras", line_number);
    return cameras;
}

}  // namespace detail

/// Parses a COLMAP text model (cameras.txt, images.txt, points3D.txt) into an
/// SfmModel. Descriptors are not part of COLMAP output; supply them afterwards
/// via compute_landmark_descriptors from a frame file.
inline SfmModel import_colmap_text(const std::string& cameras_path,
                                   const std::string& images_path,
                                   const std::string& points_path) {
    std::ifstream cameras_in(cameras_path);
    if (!cameras_in) throw Error("cannot open " + cameras_path);
    const auto cameras = detail::parse_colmap_cameras(cameras_in);

    SfmModel model;
    model.intrinsics = cameras.begin()->second.intrinsics;

    std::map<std::int64_t, std::vector<LandmarkObservation>> observations;

    std::ifstream images_in(images_path);
    if (!images_in) throw Error("cannot open " + images_path);
    std::string line;
    int line_number = 0;
    while (std::getline(images_in, line)) {
        ++line_number;
        const auto first = line.find_first_not_of(" \t\r");
        if (first == std::string::npos || line[first] == '#') continue;
        std::istringstream fields(line);
        int image_id = 0, camera_id = 0;
        double qw, qx, qy, qz, tx, ty, tz;
        std::string name;
        if (!(fields >> image_id >> qw >> qx >> qy >> qz >> tx >> ty >> tz >> camera_id >>
              name)) {
            throw ParseError("images.txt: malformed image row", line_number);
        }
        Eigen::Quaterniond q(qw, qx, qy, qz);
        if (q.norm() < 1e-12) throw ParseError("images.txt: zero quaternion", line_number);
        Pose pose;
        pose.rotation = q.normalized().toRotationMatrix();
        pose.translation = Vec3(tx, ty, tz);
        model.camera_poses[image_id] = pose;

        // second line: observations (X Y POINT3D_ID triplets)
        if (!std::getline(images_in, line)) {
            throw ParseError("images.txt: missing points2D row", line_number);
        }
        ++line_number;
        std::istringstream points2d(line);
        double x, y;
        std::string point_id_token;
        int keypoint_index = 0;
        while (points2d >> x >> y >> point_id_token) {
            if (point_id_token != "-1") {
                std::int64_t pid = 0;
                try {
                    pid = std::stoll(point_id_token);
                } catch (...) {
                    throw ParseError("images.txt: bad point3D id", line_number);
                }
                observations[pid].push_back({image_id, keypoint_index, Vec2(x, y)});
            }
            ++keypoint_index;
        }
    }

    std::ifstream points_in(points_path);
    if (!points_in) throw Error("cannot open " + points_path);
    line_number = 0;
    while (std::getline(points_in, line)) {
        ++line_number;
        const auto first = line.find_first_not_of(" \t\r");
        if (first == std::string::npos || line[first] == '#') continue;
        std::istringstream fields(line);
        std::int64_t pid = 0;
        double x, y, z, error;
        int r, g, b;
        if (!(fields >> pid >> x >> y >> z >> r >> g >> b >> error)) {
            throw ParseError("points3D.txt: malformed point row", line_number);
        }
        Landmark lm;
        lm.id = pid;
        lm.position = Vec3(x, y, z);
        int track_length = 0;
        int image_id, point2d_idx;
        while (fields >> image_id >> point2d_idx) ++track_length;
        lm.observation_count = std::max(track_length, 1);
        model.landmarks[pid] = std::move(lm);
        if (const auto it = observations.find(pid); it != observations.end()) {
            model.observations[pid] = it->second;
        }
    }
    return model;
}

// --- reports ----------------------------------------------------------------

inline json ate_report_to_json(const AteReport& report) {
    const auto q = to_quaternion(report.alignment.rotation);
    json out;
    out["ate_pos_m"] = report.ate_pos;
    out["ate_rot_deg"] = report.ate_rot;
    out["n_frames"] = report.per_frame.size();
    out["alignment"] = {{"s", report.alignment.scale},
                        {"q", {q.w(), q.x(), q.y(), q.z()}},
                        {"t",
                         {report.alignment.translation.x(), report.alignment.translation.y(),
                          report.alignment.translation.z()}}};
    json per_frame = json::array();
    for (size_t i = 0; i < report.per_frame.size(); ++i) {
        per_frame.push_back({{"timestamp", i < report.timestamps.size() ? report.timestamps[i] : 0.0},
                             {"dp_m", report.per_frame[i].first},
                             {"dr_deg", report.per_frame[i].second}});
    }
    out["per_frame"] = std::move(per_frame);
    return out;
}

}  // namespace lloc
