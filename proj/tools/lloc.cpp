// Command-line front end: simulate -> map -> localize -> evaluate.

#include <CLI11.hpp>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "landmarkloc/evaluation.hpp"
#include "landmarkloc/io.hpp"
#include "landmarkloc/mapping.hpp"
#include "landmarkloc/simulation.hpp"
#include "landmarkloc/tracking.hpp"

namespace fs = std::filesystem;
using lloc::json;

namespace {

// --- logging -----------------------------------------------------------------

enum class LogLevel { Error = 0, Info = 1, Debug = 2 };

LogLevel log_level() {
    static const LogLevel level = [] {
        const char* env = std::getenv("LANDMARKLOC_LOG");
        if (!env) return LogLevel::Info;
        const std::string v(env);
        if (v == "error") return LogLevel::Error;
        if (v == "debug") return LogLevel::Debug;
        return LogLevel::Info;
    }();
    return level;
}

void log_info(const std::string& msg) {
    if (log_level() >= LogLevel::Info) std::cerr << "[info] " << msg << "\n";
}

void log_debug(const std::string& msg) {
    if (log_level() >= LogLevel::Debug) std::cerr << "[debug] " << msg << "\n";
}

// --- configuration -------------------------------------------------------------

json default_config() {
    return {
        // simulation
        {"n_landmarks", 500},
        {"n_poses", 200},
        {"descriptor_dim", 32},
        {"circle_radius", 5.0},
        {"pixel_noise", 0.0},
        {"outlier_rate", 0.0},
        {"dropout_rate", 0.0},
        {"descriptor_noise", 0.0},
        {"min_descriptor_separation", 0.5},
        {"fx", 500.0},
        {"fy", 500.0},
        {"cx", 320.0},
        {"cy", 240.0},
        {"width", 640.0},
        {"height", 480.0},
        // tracker
        {"radius_px", 10.0},
        {"max_descriptor_distance", 0.7},
        {"min_observations", 10},
        {"min_entropy_bits", 4.0},
        {"huber_delta_px", 2.0},
        {"min_inlier_ratio", 0.3},
        // mapping
        {"ba_interval", 5},
        {"pnp_inlier_threshold_px", 4.0},
        {"ratio_tolerance", 0.64},
        {"fransac_threshold_px", 1.5},
        {"match_overlap", 3},
        // evaluation
        {"with_scale", true},
        // shared
        {"seed", 0},
    };
}

struct RunContext {
    json config = default_config();
    std::string config_path;
    std::uint64_t seed_flag = 0;
    bool seed_given = false;

    void resolve() {
        if (!config_path.empty()) {
            std::ifstream in(config_path);
            if (!in) throw lloc::Error("cannot open config file: " + config_path);
            json file;
            try {
                in >> file;
            } catch (const json::exception& e) {
                throw lloc::ParseError(std::string("config: ") + e.what());
            }
            for (const auto& [key, value] : file.items()) {
                if (!config.contains(key)) {
                    throw lloc::Error("unknown config key: " + key);
                }
                config[key] = value;
            }
        }
        if (seed_given) config["seed"] = seed_flag;
        log_info("resolved config (seed " + config.at("seed").dump() + "): " + config.dump());
    }

    std::uint64_t seed() const { return config.at("seed").get<std::uint64_t>(); }

    lloc::CameraIntrinsics intrinsics() const {
        lloc::CameraIntrinsics k;
        k.fx = config.at("fx").get<double>();
        k.fy = config.at("fy").get<double>();
        k.cx = config.at("cx").get<double>();
        k.cy = config.at("cy").get<double>();
        k.width = config.at("width").get<double>();
        k.height = config.at("height").get<double>();
        return k;
    }

    lloc::TrackerConfig tracker(lloc::MotionModel motion) const {
        lloc::TrackerConfig t;
        t.radius_px = config.at("radius_px").get<double>();
        t.max_descriptor_distance = config.at("max_descriptor_distance").get<double>();
        t.min_observations = config.at("min_observations").get<int>();
        t.min_entropy_bits = config.at("min_entropy_bits").get<double>();
        t.huber_delta_px = config.at("huber_delta_px").get<double>();
        t.min_inlier_ratio = config.at("min_inlier_ratio").get<double>();
        t.motion_model = motion;
        return t;
    }

    void write_sidecar(const fs::path& out_dir) const {
        std::ofstream out(out_dir / "effective_config.json");
        out << config.dump(1) << "\n";
    }
};

fs::path ensure_out_dir(const std::string& out) {
    fs::path dir(out.empty() ? "." : out);
    fs::create_directories(dir);
    return dir;
}

// "tx ty tz qx qy qz qw", camera-to-world (TUM convention); returned as the
// library's world-to-camera pose
lloc::Pose parse_pose_string(const std::string& s) {
    std::istringstream in(s);
    double tx, ty, tz, qx, qy, qz, qw;
    if (!(in >> tx >> ty >> tz >> qx >> qy >> qz >> qw)) {
        throw lloc::Error("pose must be \"tx ty tz qx qy qz qw\", got: " + s);
    }
    Eigen::Quaterniond q(qw, qx, qy, qz);
    if (q.norm() < 1e-12) throw lloc::Error("zero pose quaternion");
    q.normalize();
    lloc::Pose c2w{q.toRotationMatrix(), lloc::Vec3(tx, ty, tz)};
    return c2w.inverse();
}

// --- SVG plots ---------------------------------------------------------------

struct SvgPlot {
    double width = 720, height = 480, margin = 50;
    double x_min = 0, x_max = 1, y_min = 0, y_max = 1;
    std::ostringstream body;

    void fit(const std::vector<lloc::Vec2>& pts) {
        if (pts.empty()) return;
        x_min = x_max = pts[0].x();
        y_min = y_max = pts[0].y();
        for (const auto& p : pts) {
            x_min = std::min(x_min, p.x());
            x_max = std::max(x_max, p.x());
            y_min = std::min(y_min, p.y());
            y_max = std::max(y_max, p.y());
        }
        if (x_max - x_min < 1e-12) x_max = x_min + 1;
        if (y_max - y_min < 1e-12) y_max = y_min + 1;
    }

    double px(double x) const {
        return margin + (x - x_min) / (x_max - x_min) * (width - 2 * margin);
    }
    double py(double y) const {
        return height - margin - (y - y_min) / (y_max - y_min) * (height - 2 * margin);
    }

    void polyline(const std::vector<lloc::Vec2>& pts, const std::string& color) {
        body << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
        for (const auto& p : pts) body << px(p.x()) << "," << py(p.y()) << " ";
        body << "\"/>\n";
    }

    void text(double x, double y, const std::string& s, const std::string& color = "black") {
        body << "<text x=\"" << x << "\" y=\"" << y << "\" font-size=\"12\" fill=\"" << color
             << "\">" << s << "</text>\n";
    }

    void save(const fs::path& path, const std::string& x_label, const std::string& y_label) {
        std::ofstream out(path);
        out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\""
            << height << "\">\n";
        out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
        // axes
        out << "<line x1=\"" << margin << "\" y1=\"" << height - margin << "\" x2=\""
            << width - margin << "\" y2=\"" << height - margin
            << "\" stroke=\"black\" stroke-width=\"1\"/>\n";
        out << "<line x1=\"" << margin << "\" y1=\"" << margin << "\" x2=\"" << margin
            << "\" y2=\"" << height - margin << "\" stroke=\"black\" stroke-width=\"1\"/>\n";
        std::ostringstream labels;
        labels.precision(4);
        labels << "<text x=\"" << width / 2 << "\" y=\"" << height - 10
               << "\" font-size=\"12\">" << x_label << " [" << x_min << ", " << x_max
               << "]</text>\n";
        labels << "<text x=\"8\" y=\"" << height / 2 << "\" font-size=\"12\" transform=\"rotate(-90 14 "
               << height / 2 << ")\">" << y_label << " [" << y_min << ", " << y_max
               << "]</text>\n";
        out << labels.str() << body.str() << "</svg>\n";
    }
};

// --- subcommands ---------------------------------------------------------------

int cmd_simulate(const RunContext& ctx, const std::string& out) {
    const fs::path dir = ensure_out_dir(out);

    lloc::SceneConfig sc;
    sc.n_landmarks = ctx.config.at("n_landmarks").get<int>();
    sc.descriptor_dim = ctx.config.at("descriptor_dim").get<int>();
    sc.min_descriptor_separation = ctx.config.at("min_descriptor_separation").get<double>();
    sc.rng_seed = ctx.seed();
    const auto scene = lloc::generate_scene(sc);

    lloc::CircleShape shape;
    shape.radius = ctx.config.at("circle_radius").get<double>();
    shape.n_poses = ctx.config.at("n_poses").get<int>();
    const auto trajectory = lloc::generate_circle_trajectory(shape);

    lloc::ObservationConfig oc;
    oc.pixel_noise = ctx.config.at("pixel_noise").get<double>();
    oc.outlier_rate = ctx.config.at("outlier_rate").get<double>();
    oc.dropout_rate = ctx.config.at("dropout_rate").get<double>();
    oc.descriptor_noise = ctx.config.at("descriptor_noise").get<double>();
    oc.intrinsics = ctx.intrinsics();

    std::vector<lloc::Frame> frames;
    for (int i = 0; i < shape.n_poses; ++i) {
        frames.push_back(lloc::render_frame(scene, trajectory.entries[i].pose, oc, i,
                                            trajectory.entries[i].timestamp,
                                            ctx.seed() * 1000003 + i)
                             .frame);
    }

    lloc::save_model(lloc::scene_to_map(scene, oc.intrinsics), (dir / "map.json").string());
    lloc::save_frames(frames, sc.descriptor_dim, (dir / "frames.json").string());
    lloc::save_tum_trajectory(trajectory, (dir / "gt.txt").string());
    ctx.write_sidecar(dir);
    log_info("simulate: wrote map.json, frames.json, gt.txt to " + dir.string());
    return 0;
}

std::vector<lloc::FramePairMatches> load_matches_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw lloc::Error("cannot open matches file: " + path);
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw lloc::ParseError(std::string("matches file: ") + e.what());
    }
    std::vector<lloc::FramePairMatches> out;
    for (const auto& jp : j.at("pairs")) {
        lloc::FramePairMatches pm;
        pm.frame_a = jp.at("frame_a").get<int>();
        pm.frame_b = jp.at("frame_b").get<int>();
        for (const auto& jm : jp.at("matches")) {
            pm.matches.push_back({jm.at(0).get<int>(), jm.at(1).get<int>(), 0.0});
        }
        out.push_back(std::move(pm));
    }
    return out;
}

// ratio-test matching per frame pair, filtered by fundamental-matrix RANSAC
std::vector<lloc::FramePairMatches> compute_matches(const std::vector<lloc::Frame>& frames,
                                                    const RunContext& ctx) {
    const double ratio_tol = ctx.config.at("ratio_tolerance").get<double>();
    const int overlap = ctx.config.at("match_overlap").get<int>();

    std::vector<std::vector<lloc::Descriptor>> descriptors(frames.size());
    for (size_t i = 0; i < frames.size(); ++i) {
        for (const auto& kp : frames[i].keypoints) descriptors[i].push_back(kp.descriptor);
    }

    std::vector<lloc::FramePairMatches> out;
    std::uint64_t salt = 0;
    for (size_t a = 0; a < frames.size(); ++a) {
        for (size_t b = a + 1; b < std::min(frames.size(), a + 1 + overlap); ++b) {
            if (descriptors[b].size() < 2) continue;
            auto matches = lloc::match_ratio_test(descriptors[a], descriptors[b], ratio_tol);
            if (matches.size() < 8) continue;

            std::vector<lloc::PixelMatch> pixel_matches;
            for (const auto& m : matches) {
                pixel_matches.push_back({frames[a].keypoints[m.query_index].pixel,
                                         frames[b].keypoints[m.train_index].pixel});
            }
            lloc::RansacConfig rc;
            rc.inlier_threshold = ctx.config.at("fransac_threshold_px").get<double>();
            rc.sample_size = 8;
            rc.rng_seed = ctx.seed() + salt++;
            auto solve = [&](const std::vector<int>& sample) {
                std::vector<lloc::Mat3> models;
                std::vector<lloc::PixelMatch> subset;
                for (const int i : sample) subset.push_back(pixel_matches[i]);
                try {
                    models.push_back(lloc::estimate_fundamental_8pt(subset));
                } catch (const lloc::Error&) {
                }
                return models;
            };
            auto residual = [&](const lloc::Mat3& f, int i) {
                return lloc::sampson_distance(f, pixel_matches[i].first, pixel_matches[i].second);
            };
            lloc::FramePairMatches pm;
            pm.frame_a = frames[a].id;
            pm.frame_b = frames[b].id;
            try {
                const auto result = lloc::run_ransac<lloc::Mat3>(
                    static_cast<int>(pixel_matches.size()), solve, residual, rc);
                for (size_t i = 0; i < matches.size(); ++i) {
                    if (result.inlier_mask[i]) pm.matches.push_back(matches[i]);
                }
            } catch (const lloc::Error&) {
                continue;
            }
            log_debug("pair " + std::to_string(pm.frame_a) + "-" + std::to_string(pm.frame_b) +
                      ": " + std::to_string(pm.matches.size()) + " matches");
            if (!pm.matches.empty()) out.push_back(std::move(pm));
        }
    }
    return out;
}

int cmd_map_build(const RunContext& ctx, const std::string& frames_path,
                  const std::string& matches_path, int seed_a, int seed_b,
                  const std::string& seed_pose, const std::string& out) {
    const fs::path dir = ensure_out_dir(out);
    const auto frames = lloc::load_frames(frames_path);
    if (frames.size() < 2) throw lloc::Error("map build needs at least two frames");

    const auto matches =
        matches_path.empty() ? compute_matches(frames, ctx) : load_matches_file(matches_path);

    lloc::SeedPair seed;
    seed.frame_a = seed_a < 0 ? frames[0].id : seed_a;
    seed.frame_b = seed_b < 0 ? frames[1].id : seed_b;
    // seed pose flag: camera-to-world pose of frame B in frame A coordinates
    seed.relative_pose = parse_pose_string(seed_pose);

    lloc::ReconstructionConfig rc;
    rc.ba_interval = ctx.config.at("ba_interval").get<int>();
    rc.ba.huber_delta_px = ctx.config.at("huber_delta_px").get<double>();
    rc.pnp_inlier_threshold_px = ctx.config.at("pnp_inlier_threshold_px").get<double>();
    rc.rng_seed = ctx.seed();

    const auto model =
        lloc::incremental_reconstruct(frames, matches, seed, ctx.intrinsics(), rc);
    lloc::save_model(model, (dir / "map.json").string());
    ctx.write_sidecar(dir);
    log_info("map build: " + std::to_string(model.landmarks.size()) + " landmarks, " +
             std::to_string(model.camera_poses.size()) + " poses, mean reprojection error " +
             std::to_string(model.mean_reprojection_error) + " px");
    return 0;
}

int cmd_import_colmap(const RunContext& ctx, const std::string& cameras,
                      const std::string& images, const std::string& points,
                      const std::string& out) {
    const fs::path dir = ensure_out_dir(out);
    const auto model = lloc::import_colmap_text(cameras, images, points);
    lloc::save_model(model, (dir / "map.json").string());
    ctx.write_sidecar(dir);
    log_info("import-colmap: " + std::to_string(model.landmarks.size()) + " landmarks, " +
             std::to_string(model.camera_poses.size()) + " poses");
    return 0;
}

int cmd_map_register(const RunContext& ctx, const std::string& map_path,
                     const std::string& pairs_path, const std::string& out) {
    const fs::path dir = ensure_out_dir(out);
    auto model = lloc::load_model(map_path);

    std::ifstream in(pairs_path);
    if (!in) throw lloc::Error("cannot open pairs file: " + pairs_path);
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw lloc::ParseError(std::string("pairs file: ") + e.what());
    }
    std::vector<std::pair<lloc::Vec3, lloc::Vec3>> pairs;
    for (const auto& jp : j.at("pairs")) {
        const auto m = jp.at("model").get<std::vector<double>>();
        const auto w = jp.at("world").get<std::vector<double>>();
        if (m.size() != 3 || w.size() != 3) {
            throw lloc::ParseError("pair entries must be 3-vectors");
        }
        pairs.emplace_back(lloc::Vec3(m[0], m[1], m[2]), lloc::Vec3(w[0], w[1], w[2]));
    }

    const auto result = lloc::register_model(model, pairs);
    lloc::save_model(model, (dir / "map.json").string());
    ctx.write_sidecar(dir);
    log_info("map register: scale " + std::to_string(result.transform.scale) +
             ", rms residual " + std::to_string(result.rms_residual) + " m");
    return 0;
}

int cmd_localize(const RunContext& ctx, const std::string& map_path,
                 const std::string& frames_path, const std::string& initial_pose,
                 const std::string& motion_model, const std::string& out) {
    const fs::path dir = ensure_out_dir(out);
    const auto map = lloc::load_model(map_path);
    const auto frames = lloc::load_frames(frames_path);

    lloc::MotionModel motion;
    if (motion_model == "static") {
        motion = lloc::MotionModel::Static;
    } else if (motion_model == "const-speed") {
        motion = lloc::MotionModel::ConstantSpeed;
    } else {
        throw lloc::Error("motion model must be static or const-speed, got: " + motion_model);
    }

    const auto state = lloc::track_sequence(frames, map, parse_pose_string(initial_pose),
                                            ctx.tracker(motion));
    lloc::save_tum_trajectory(lloc::tracked_trajectory(state), (dir / "trajectory.txt").string());

    std::ofstream csv(dir / "diagnostics.csv");
    csv << "frame_id,status,n_associations,n_inliers,iterations,rms_px\n";
    int tracked = 0;
    for (const auto& d : state.diagnostics) {
        csv << d.frame_id << "," << lloc::to_string(d.status) << "," << d.n_associations << ","
            << d.n_inliers << "," << d.iterations << "," << d.rms_px << "\n";
        tracked += d.status == lloc::FrameStatus::Tracked;
    }
    ctx.write_sidecar(dir);
    log_info("localize: tracked " + std::to_string(tracked) + " of " +
             std::to_string(frames.size()) + " frames");
    return 0;
}

int cmd_evaluate(const RunContext& ctx, const std::string& gt_path, const std::string& est_path,
                 const std::string& out) {
    const fs::path dir = ensure_out_dir(out);
    const auto gt = lloc::load_tum_trajectory(gt_path);
    const auto est = lloc::load_tum_trajectory(est_path);

    lloc::AteOptions options;
    options.with_scale = ctx.config.at("with_scale").get<bool>();
    const auto report = lloc::compute_ate(gt, est, options);

    std::ofstream json_out(dir / "ate.json");
    json_out << lloc::ate_report_to_json(report).dump(1) << "\n";

    // position error over time
    SvgPlot errors;
    std::vector<lloc::Vec2> error_pts;
    for (size_t i = 0; i < report.per_frame.size(); ++i) {
        error_pts.emplace_back(static_cast<double>(i), report.per_frame[i].first);
    }
    errors.fit(error_pts);
    errors.polyline(error_pts, "crimson");
    errors.text(errors.width - 200, 20, "position error per frame", "crimson");
    errors.save(dir / "error_vs_frame.svg", "frame", "error m");

    // top-down overlay of both trajectories, estimate aligned onto reference
    SvgPlot overlay;
    std::vector<lloc::Vec2> gt_xy, est_xy;
    for (const auto& e : gt.entries) {
        gt_xy.emplace_back(e.pose.center().x(), e.pose.center().y());
    }
    for (const auto& e : est.entries) {
        const lloc::Vec3 c = report.alignment.apply(e.pose.center());
        est_xy.emplace_back(c.x(), c.y());
    }
    std::vector<lloc::Vec2> all = gt_xy;
    all.insert(all.end(), est_xy.begin(), est_xy.end());
    overlay.fit(all);
    overlay.polyline(gt_xy, "green");
    overlay.polyline(est_xy, "crimson");
    overlay.text(overlay.width - 200, 20, "reference", "green");
    overlay.text(overlay.width - 200, 36, "estimate (aligned)", "crimson");
    overlay.save(dir / "trajectory.svg", "x m", "y m");

    ctx.write_sidecar(dir);
    log_info("evaluate: ate_pos " + std::to_string(report.ate_pos) + " m, ate_rot " +
             std::to_string(report.ate_rot) + " deg over " +
             std::to_string(report.per_frame.size()) + " frames");
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Map-based incremental visual localization toolkit"};
    app.require_subcommand(1);

    RunContext ctx;
    app.add_option("--config", ctx.config_path, "JSON config file; unknown keys are rejected");
    app.add_option("--seed", ctx.seed_flag, "RNG seed; overrides the config file")
        ->each([&](const std::string&) { ctx.seed_given = true; });

    std::string out = ".";
    std::string map_path, frames_path, matches_path, initial_pose, motion_model = "static";
    std::string gt_path, est_path, cameras_path, images_path, points_path, pairs_path;
    std::string seed_pose = "0 0 0 0 0 0 1";
    int seed_a = -1, seed_b = -1;

    auto* simulate = app.add_subcommand("simulate", "Generate a synthetic scene and sequence");
    simulate->add_option("--out", out, "Output directory");

    auto* map_cmd = app.add_subcommand("map", "Map construction commands");
    map_cmd->require_subcommand(1);

    auto* build = map_cmd->add_subcommand("build", "Reconstruct a landmark map from frames");
    build->add_option("--frames", frames_path, "Frame file")->required();
    build->add_option("--matches", matches_path, "Precomputed matches file (optional)");
    build->add_option("--seed-a", seed_a, "Seed frame A id (default: first frame)");
    build->add_option("--seed-b", seed_b, "Seed frame B id (default: second frame)");
    build->add_option("--seed-pose", seed_pose,
                      "\"tx ty tz qx qy qz qw\" camera-to-world pose of seed frame B in seed "
                      "frame A coordinates")
        ->required();
    build->add_option("--out", out, "Output directory");

    auto* import = map_cmd->add_subcommand("import-colmap", "Import a COLMAP text model");
    import->add_option("--cameras", cameras_path, "cameras.txt")->required();
    import->add_option("--images", images_path, "images.txt")->required();
    import->add_option("--points", points_path, "points3D.txt")->required();
    import->add_option("--out", out, "Output directory");

    auto* reg = map_cmd->add_subcommand("register", "Fit a map-to-world similarity transform");
    reg->add_option("--map", map_path, "Map file")->required();
    reg->add_option("--pairs", pairs_path, "JSON file with model/world point pairs")->required();
    reg->add_option("--out", out, "Output directory");

    auto* localize = app.add_subcommand("localize", "Track a frame sequence against a map");
    localize->add_option("--map", map_path, "Map file")->required();
    localize->add_option("--frames", frames_path, "Frame file")->required();
    localize->add_option("--initial-pose", initial_pose,
                         "\"tx ty tz qx qy qz qw\" camera-to-world initial pose")
        ->required();
    localize->add_option("--motion-model", motion_model, "static|const-speed");
    localize->add_option("--out", out, "Output directory");

    auto* evaluate = app.add_subcommand("evaluate", "Compare trajectories and report ATE");
    evaluate->add_option("--gt", gt_path, "Reference TUM trajectory")->required();
    evaluate->add_option("--est", est_path, "Estimated TUM trajectory")->required();
    evaluate->add_option("--out", out, "Output directory");

    // let --config/--seed appear after the subcommand name
    for (auto* sub : app.get_subcommands(nullptr)) {
        sub->fallthrough();
        for (auto* nested : sub->get_subcommands(nullptr)) nested->fallthrough();
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);  // --help
        std::cerr << e.what() << "\n\n";
        const CLI::App* failed = &app;
        while (!failed->get_subcommands().empty()) failed = failed->get_subcommands().front();
        std::cerr << failed->help();
        return 1;
    }

    try {
        ctx.resolve();
        if (simulate->parsed()) return cmd_simulate(ctx, out);
        if (build->parsed()) {
            return cmd_map_build(ctx, frames_path, matches_path, seed_a, seed_b, seed_pose, out);
        }
        if (import->parsed()) {
            return cmd_import_colmap(ctx, cameras_path, images_path, points_path, out);
        }
        if (reg->parsed()) return cmd_map_register(ctx, map_path, pairs_path, out);
        if (localize->parsed()) {
            return cmd_localize(ctx, map_path, frames_path, initial_pose, motion_model, out);
        }
        if (evaluate->parsed()) return cmd_evaluate(ctx, gt_path, est_path, out);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 1;
}
