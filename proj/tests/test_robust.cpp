#include <doctest.h>

#include <random>

#include "landmarkloc/robust.hpp"
#include "test_helpers.hpp"

using namespace lloc;
using lloc::testing::random_pose;
using lloc::testing::random_similarity;
using lloc::testing::random_vec3;
using lloc::testing::vga_camera;

namespace {

// 2D line ax+by+c=0 with a^2+b^2=1, fit from two points
struct Line {
    double a = 0, b = 0, c = 0;
};

Line line_through(const Vec2& p, const Vec2& q) {
    const Vec2 d = q - p;
    Line l;
    l.a = -d.y();
    l.b = d.x();
    const double n = std::hypot(l.a, l.b);
    l.a /= n;
    l.b /= n;
    l.c = -(l.a * p.x() + l.b * p.y());
    return l;
}

double line_distance(const Line& l, const Vec2& p) {
    return std::abs(l.a * p.x() + l.b * p.y() + l.c);
}

struct Plane {
    Vec3 normal = Vec3::UnitZ();
    double d = 0;
};

std::vector<Correspondence3D2D> noiseless_pnp_data(std::mt19937_64& rng, const Pose& pose,
                                                   int n) {
    const auto k = vga_camera();
    const ProjectionMatrix p = compose_projection(k, pose);
    std::vector<Correspondence3D2D> out;
    while (static_cast<int>(out.size()) < n) {
        const Vec3 x = pose.center() + pose.rotation.transpose() *
                                           (random_vec3(rng, 2.0) + Vec3(0, 0, 4.0));
        const Vec3 h = p * x.homogeneous();
        if (h.z() < 0.5) continue;
        const Vec2 px = h.hnormalized();
        if (!k.in_bounds(px)) continue;
        out.push_back({x, px});
    }
    return out;
}

double max_reprojection_residual(const ProjectionMatrix& p,
                                 const std::vector<Correspondence3D2D>& corrs) {
    double worst = 0.0;
    for (const auto& c : corrs) {
        const Vec3 h = p * c.world.homogeneous();
        worst = std::max(worst, (Vec2(h.hnormalized()) - c.pixel).norm());
    }
    return worst;
}

}  // namespace

TEST_CASE("ransac_iterations matches the closed form") {
    CHECK(ransac_iterations(0.99, 0.5, 6) == 293);
    CHECK(ransac_iterations(0.99, 0.0, 6) == 1);
    CHECK(ransac_iterations(0.99, 0.0, 2) == 1);
    CHECK(ransac_iterations(0.99, 0.5, 2) == 17);
}

TEST_CASE("ransac_iterations rejects outlier ratio >= 1") {
    CHECK_THROWS_AS(ransac_iterations(0.99, 1.0, 3), InvalidRatio);
}

TEST_CASE("ransac_iterations is monotone in p and in the outlier ratio") {
    for (int pi = 1; pi < 9; ++pi) {
        for (int ei = 0; ei < 8; ++ei) {
            const double p = 0.1 * pi, e = 0.1 * ei;
            CHECK(ransac_iterations(p, e, 4) <= ransac_iterations(p + 0.09, e, 4));
            CHECK(ransac_iterations(p, e, 4) <= ransac_iterations(p, e + 0.09, 4));
        }
    }
}

TEST_CASE("huber_weight values") {
    CHECK(huber_weight(0.0, 2.0) == 1.0);
    CHECK(huber_weight(2.0, 2.0) == 1.0);
    CHECK(huber_weight(4.0, 2.0) == doctest::Approx(0.5));
}

TEST_CASE("huber loss is quadratic below the breakpoint") {
    // all residuals below delta: robust weights are exactly 1, so weighted
    // least squares degenerates to the unweighted problem
    for (const double r : {0.0, 0.3, 1.2, 1.999}) {
        CHECK(huber_weight(r, 2.0) == 1.0);
        CHECK(huber_loss(r, 2.0) == doctest::Approx(0.5 * r * r));
    }
}

TEST_CASE("run_ransac recovers an exact line from clean data") {
    const Line truth = line_through(Vec2(0, 1), Vec2(2, 2));
    std::vector<Vec2> data;
    for (int i = 0; i < 30; ++i) data.emplace_back(i * 0.5, 1.0 + i * 0.25);

    RansacConfig config;
    config.sample_size = 2;
    config.inlier_threshold = 1e-6;
    config.rng_seed = 42;
    const auto result = run_ransac<Line>(
        static_cast<int>(data.size()),
        [&](const std::vector<int>& s) {
            return std::vector<Line>{line_through(data[s[0]], data[s[1]])};
        },
        [&](const Line& l, int i) { return line_distance(l, data[i]); }, config);

    CHECK(std::count(result.inlier_mask.begin(), result.inlier_mask.end(), true) == 30);
    CHECK(std::abs(std::abs(result.model.a) - std::abs(truth.a)) < 1e-9);
    CHECK(std::abs(std::abs(result.model.c) - std::abs(truth.c)) < 1e-9);
}

TEST_CASE("run_ransac separates plane inliers from outliers across seeds") {
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
        std::mt19937_64 rng(1000 + seed);
        std::uniform_real_distribution<double> u(-5.0, 5.0);
        std::vector<Vec3> data;
        for (int i = 0; i < 70; ++i) {
            data.emplace_back(u(rng), u(rng), 0.0);  // plane z = 0
        }
        for (int i = 0; i < 30; ++i) {
            double z = u(rng);
            while (std::abs(z) < 0.5) z = u(rng);
            data.emplace_back(u(rng), u(rng), z);
        }

        RansacConfig config;
        config.sample_size = 3;
        config.inlier_threshold = 1e-3;
        config.rng_seed = seed;
        const auto result = run_ransac<Plane>(
            100,
            [&](const std::vector<int>& s) -> std::vector<Plane> {
                const Vec3 n =
                    (data[s[1]] - data[s[0]]).cross(data[s[2]] - data[s[0]]);
                if (n.norm() < 1e-9) return {};
                Plane plane;
                plane.normal = n.normalized();
                plane.d = -plane.normal.dot(data[s[0]]);
                return {plane};
            },
            [&](const Plane& pl, int i) { return std::abs(pl.normal.dot(data[i]) + pl.d); },
            config);

        int true_inliers = 0, false_inliers = 0;
        for (int i = 0; i < 100; ++i) {
            if (result.inlier_mask[i]) (i < 70 ? true_inliers : false_inliers) += 1;
        }
        CHECK(true_inliers >= 68);
        CHECK(false_inliers <= 2);
    }
}

TEST_CASE("run_ransac rejects too little data") {
    RansacConfig config;
    config.sample_size = 3;
    CHECK_THROWS_AS(run_ransac<Line>(
                        2, [](const std::vector<int>&) { return std::vector<Line>{}; },
                        [](const Line&, int) { return 0.0; }, config),
                    NotEnoughData);
}

TEST_CASE("run_ransac is reproducible under a fixed seed") {
    std::mt19937_64 rng(55);
    std::uniform_real_distribution<double> u(-3.0, 3.0);
    std::vector<Vec2> data;
    for (int i = 0; i < 40; ++i) data.emplace_back(u(rng), u(rng));
    for (int i = 0; i < 20; ++i) data.emplace_back(i * 0.1, 2.0 + i * 0.05);

    RansacConfig config;
    config.sample_size = 2;
    config.inlier_threshold = 1e-6;
    config.rng_seed = 99;
    auto run = [&]() {
        return run_ransac<Line>(
            static_cast<int>(data.size()),
            [&](const std::vector<int>& s) {
                return std::vector<Line>{line_through(data[s[0]], data[s[1]])};
            },
            [&](const Line& l, int i) { return line_distance(l, data[i]); }, config);
    };
    const auto a = run();
    const auto b = run();
    CHECK(a.inlier_mask == b.inlier_mask);
    CHECK(a.iterations_run == b.iterations_run);
    CHECK(a.model.a == b.model.a);
    CHECK(a.model.c == b.model.c);
}

TEST_CASE("solve_pnp_dlt is exact in the noiseless case") {
    std::mt19937_64 rng(61);
    for (int trial = 0; trial < 20; ++trial) {
        const Pose pose = random_pose(rng, 1.0);
        const auto corrs = noiseless_pnp_data(rng, pose, 8);
        const auto result = solve_pnp_dlt(corrs, vga_camera());
        CHECK(max_reprojection_residual(result.projection, corrs) < 1e-6);
        REQUIRE(result.pose.has_value());
        CHECK(rotation_angle_between(result.pose->rotation, pose.rotation) < 1e-6);
        CHECK((result.pose->translation - pose.translation).norm() < 1e-6);
    }
}

TEST_CASE("solve_pnp_dlt needs at least six points") {
    std::mt19937_64 rng(67);
    const Pose pose = random_pose(rng);
    auto corrs = noiseless_pnp_data(rng, pose, 5);
    CHECK_THROWS_AS(solve_pnp_dlt(corrs), TooFewPoints);
}

TEST_CASE("solve_pnp_dlt reprojection residuals are invariant to a joint similarity") {
    std::mt19937_64 rng(71);
    const Pose pose = random_pose(rng, 1.0);
    auto corrs = noiseless_pnp_data(rng, pose, 10);
    const double base = max_reprojection_residual(solve_pnp_dlt(corrs).projection, corrs);

    const SimilarityTransform t = random_similarity(rng);
    auto transformed = corrs;
    for (auto& c : transformed) c.world = t.apply(c.world);
    const double moved =
        max_reprojection_residual(solve_pnp_dlt(transformed).projection, transformed);
    CHECK(std::abs(base - moved) < 1e-9);
}

TEST_CASE("solve_pnp_dlt flags coplanar-degenerate input") {
    // all world points and pixels identical: nullspace dimension > 1
    std::vector<Correspondence3D2D> corrs(8, {Vec3(1, 2, 5), Vec2(320, 240)});
    CHECK_THROWS_AS(solve_pnp_dlt(corrs), DegenerateConfiguration);
}

namespace {

std::vector<PixelMatch> two_view_matches(std::mt19937_64& rng, const Pose& first,
                                         const Pose& second, int n) {
    const auto k = vga_camera();
    const ProjectionMatrix p1 = compose_projection(k, first);
    const ProjectionMatrix p2 = compose_projection(k, second);
    std::vector<PixelMatch> matches;
    while (static_cast<int>(matches.size()) < n) {
        const Vec3 x = random_vec3(rng, 3.0) + Vec3(0, 0, 8.0);
        const Vec3 h1 = p1 * x.homogeneous();
        const Vec3 h2 = p2 * x.homogeneous();
        if (h1.z() < 0.5 || h2.z() < 0.5) continue;
        const Vec2 px1 = h1.hnormalized(), px2 = h2.hnormalized();
        if (!k.in_bounds(px1) || !k.in_bounds(px2)) continue;
        matches.push_back({px1, px2});
    }
    return matches;
}

}  // namespace

TEST_CASE("estimate_fundamental_8pt fits noiseless two-view geometry") {
    std::mt19937_64 rng(73);
    const Pose first = Pose::identity();
    Pose second;
    second.rotation = so3_exp(Vec3(0.02, -0.3, 0.01));
    second.translation = Vec3(1.0, 0.1, 0.05);
    const auto matches = two_view_matches(rng, first, second, 25);
    const Mat3 f = estimate_fundamental_8pt(matches);
    for (const auto& m : matches) {
        CHECK(sampson_distance(f, m.first, m.second) < 1e-8);
    }
    // rank exactly 2
    Eigen::JacobiSVD<Mat3> svd(f);
    CHECK(svd.singularValues()[2] < 1e-12 * svd.singularValues()[0]);
}

TEST_CASE("estimate_fundamental_8pt needs eight matches") {
    std::mt19937_64 rng(79);
    Pose second;
    second.translation = Vec3(1, 0, 0);
    auto matches = two_view_matches(rng, Pose::identity(), second, 7);
    CHECK_THROWS_AS(estimate_fundamental_8pt(matches), TooFewPoints);
}

TEST_CASE("fundamental RANSAC with Sampson residual rejects contamination") {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        std::mt19937_64 rng(200 + seed);
        Pose second;
        second.rotation = so3_exp(Vec3(0.05, -0.2, 0.02));
        second.translation = Vec3(1.0, -0.2, 0.1);
        auto matches = two_view_matches(rng, Pose::identity(), second, 70);
        const Mat3 f_true = estimate_fundamental_8pt(matches);
        std::uniform_real_distribution<double> ux(0, 640), uy(0, 480);
        const int n_true = static_cast<int>(matches.size());
        // contamination that is genuinely off the true epipolar geometry
        int added = 0;
        while (added < 30) {
            const PixelMatch outlier{Vec2(ux(rng), uy(rng)), Vec2(ux(rng), uy(rng))};
            if (sampson_distance(f_true, outlier.first, outlier.second) < 5.0) continue;
            matches.push_back(outlier);
            ++added;
        }

        RansacConfig config;
        config.sample_size = 8;
        config.inlier_threshold = 1e-5;  // zero-noise data
        config.rng_seed = seed;
        const auto result = run_ransac<Mat3>(
            static_cast<int>(matches.size()),
            [&](const std::vector<int>& s) -> std::vector<Mat3> {
                std::vector<PixelMatch> subset;
                for (const int i : s) subset.push_back(matches[i]);
                try {
                    return {estimate_fundamental_8pt(subset)};
                } catch (const Error&) {
                    return {};
                }
            },
            [&](const Mat3& f, int i) {
                return sampson_distance(f, matches[i].first, matches[i].second);
            },
            config);

        for (int i = 0; i < n_true; ++i) CHECK(result.inlier_mask[i]);
        int false_in = 0;
        for (int i = n_true; i < static_cast<int>(matches.size()); ++i) {
            false_in += result.inlier_mask[i];
        }
        CHECK(false_in == 0);
    }
}
