#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "foldkit/benchmark.hpp"
#include "foldkit/fold.hpp"

using namespace foldkit;

namespace {

// Unit square with the fold side on the x=0 edge: ordered corners CCW
// starting at (0,1) so side (c0,c1) is that edge.
TowelFrame unit_square_frame() {
    return towel_frame_from_ordered(
        {Vec3{0, 1, 0}, Vec3{0, 0, 0}, Vec3{1, 0, 0}, Vec3{1, 1, 0}}, TablePlane{});
}

TowelGeometry simple_towel(double w = 0.4, double h = 0.3, double yaw = 0.0,
                           Vec2 center = {0.0, 0.0}) {
    TowelGeometry t;
    t.width = w;
    t.height = h;
    t.yaw = yaw;
    t.center = center;
    t.wrinkle_amplitude = 0.0;
    return t;
}

TowelFrame frame_of(const TowelGeometry& t) {
    std::array<Vec3, 4> corners = t.corners_3d();
    for (Vec3& c : corners) c.z = 0.0;
    return towel_frame(corners, TablePlane{});
}

}  // namespace

TEST_CASE("plan_fold grasps the side midpoint and mirrors it across the center line",
          "[fold]") {
    const FoldParams params;
    const FoldPlan plan = plan_fold(unit_square_frame(), params);
    REQUIRE((plan.grasp_position - Vec3{0.0, 0.5, 0.0}).norm() < 1e-12);
    REQUIRE((plan.arc_waypoints.back() - Vec3{1.0, 0.5, 0.0}).norm() < 1e-9);
    REQUIRE((plan.arc_waypoints.front() - plan.grasp_position).norm() == 0.0);
    REQUIRE(plan.arc_waypoints.size() == size_t(params.n_waypoints));
    for (const Vec3& w : plan.arc_waypoints) REQUIRE(w.z >= -1e-12);
}

TEST_CASE("arc apex is min(arc_height, half travel)", "[fold]") {
    FoldParams params;
    params.n_waypoints = 17;  // odd: the middle waypoint samples the apex
    params.arc_height = 0.15;
    const FoldPlan low = plan_fold(unit_square_frame(), params);
    double apex = 0.0;
    for (const Vec3& w : low.arc_waypoints) apex = std::max(apex, w.z);
    REQUIRE(apex == Catch::Approx(0.15).margin(1e-9));

    params.arc_height = 2.0;  // taller than the semicircle allows
    const FoldPlan high = plan_fold(unit_square_frame(), params);
    apex = 0.0;
    for (const Vec3& w : high.arc_waypoints) apex = std::max(apex, w.z);
    REQUIRE(apex == Catch::Approx(0.5).margin(1e-9));
}

TEST_CASE("plans are equivariant under towel translation", "[fold]") {
    const FoldParams params;
    const FoldPlan base = plan_fold(unit_square_frame(), params);
    const Vec3 offset{1.0, 2.0, 0.0};
    const TowelFrame moved = towel_frame_from_ordered(
        {Vec3{0, 1, 0} + offset, Vec3{0, 0, 0} + offset, Vec3{1, 0, 0} + offset,
         Vec3{1, 1, 0} + offset},
        TablePlane{});
    const FoldPlan shifted = plan_fold(moved, params);
    const FoldPlan expected = base.translated(offset);
    REQUIRE((shifted.grasp_position - expected.grasp_position).norm() < 1e-12);
    REQUIRE((shifted.pregrasp_position - expected.pregrasp_position).norm() < 1e-12);
    for (size_t i = 0; i < shifted.arc_waypoints.size(); ++i)
        REQUIRE((shifted.arc_waypoints[i] - expected.arc_waypoints[i]).norm() < 1e-12);
}

TEST_CASE("pregrasp sits outside the towel along the horizontal approach", "[fold]") {
    FoldParams params;
    params.pregrasp_offset = 0.07;
    const FoldPlan plan = plan_fold(unit_square_frame(), params);
    // Fold side x=0, towel interior toward +x: pregrasp at x = -0.07.
    REQUIRE(plan.pregrasp_position.x == Catch::Approx(-0.07).margin(1e-12));
    REQUIRE(plan.pregrasp_position.z == Catch::Approx(0.0).margin(1e-12));
    REQUIRE((plan.grasp_position - plan.pregrasp_position).normalized().dot(
                plan.pregrasp_approach) == Catch::Approx(1.0).margin(1e-12));
}

TEST_CASE("oracle plans fold perfectly for rectangular towels", "[fold]") {
    for (double yaw : {0.0, 0.4, 2.2}) {
        const TowelGeometry towel = simple_towel(0.4, 0.25, yaw, {0.05, -0.08});
        const FoldPlan plan = plan_fold(frame_of(towel), FoldParams{});
        const FoldOutcome out = simulate_fold(towel, plan, ToleranceParams{});
        REQUIRE_FALSE(out.aborted);
        REQUIRE(out.grasp_success);
        REQUIRE(out.fold_success);
        REQUIRE(out.grasp_error_m < 1e-9);
        REQUIRE(out.corner_errors_m[0] < 1e-9);
        REQUIRE(out.corner_errors_m[1] < 1e-9);
    }
}

TEST_CASE("a grasp 0.1 m off the edge midpoint fails grasp and fold", "[fold]") {
    const TowelGeometry towel = simple_towel();
    FoldPlan plan = plan_fold(frame_of(towel), FoldParams{});
    plan.grasp_position += plan.fold_line_direction * 0.1;
    const FoldOutcome out = simulate_fold(towel, plan, ToleranceParams{});
    REQUIRE_FALSE(out.grasp_success);
    REQUIRE_FALSE(out.fold_success);
    REQUIRE(out.grasp_error_m == Catch::Approx(0.1).margin(1e-9));
}

namespace {

// Test-local reimplementation of the geometric fold for the noisy-corner
// comparison: rotates into a frame where the fold line is the y axis,
// negates x to reflect, and redoes the threshold logic from scratch.
FoldOutcome reference_outcome(const TowelGeometry& towel, const FoldPlan& plan,
                              const ToleranceParams& tol) {
    FoldOutcome ref;
    std::array<Vec2, 4> corners;
    const auto c3 = towel.corners_3d();
    for (int i = 0; i < 4; ++i) corners[size_t(i)] = c3[size_t(i)].xy();

    const Vec2 g = plan.grasp_position.xy();
    ref.grasp_error_m = 1e30;
    for (int i = 0; i < 4; ++i)
        ref.grasp_error_m = std::min(
            ref.grasp_error_m,
            (g - (corners[size_t(i)] + corners[size_t((i + 1) % 4)]) / 2.0).norm());
    ref.grasp_success = ref.grasp_error_m <= tol.grasp_m;

    const Vec2 p0 = plan.fold_line_point.xy();
    const double ang = std::atan2(plan.fold_line_direction.y, plan.fold_line_direction.x);
    auto to_line = [&](const Vec2& p) {
        const Vec2 d = p - p0;
        const double c = std::cos(-ang), s = std::sin(-ang);
        return Vec2{c * d.x - s * d.y, s * d.x + c * d.y};
    };
    auto from_line = [&](const Vec2& p) {
        const double c = std::cos(ang), s = std::sin(ang);
        return Vec2{c * p.x - s * p.y, s * p.x + c * p.y} + p0;
    };
    const double gside = to_line(g).y;
    std::vector<int> near, far;
    for (int i = 0; i < 4; ++i)
        (to_line(corners[size_t(i)]).y * gside >= 0.0 ? near : far).push_back(i);
    if (near.size() != 2) {
        const double span = std::max(towel.width, towel.height);
        ref.corner_errors_m = {span, span};
        return ref;
    }
    auto reflect = [&](const Vec2& p) {
        Vec2 q = to_line(p);
        q.y = -q.y;
        return from_line(q);
    };
    const Vec2 r0 = reflect(corners[size_t(near[0])]);
    const Vec2 r1 = reflect(corners[size_t(near[1])]);
    const Vec2 t0 = corners[size_t(far[0])];
    const Vec2 t1 = corners[size_t(far[1])];
    std::array<double, 2> straight{(r0 - t0).norm(), (r1 - t1).norm()};
    std::array<double, 2> crossed{(r0 - t1).norm(), (r1 - t0).norm()};
    ref.corner_errors_m =
        (straight[0] + straight[1] <= crossed[0] + crossed[1]) ? straight : crossed;
    const double len = ((corners[size_t(near[0])] + corners[size_t(near[1])]) / 2.0 -
                        (corners[size_t(far[0])] + corners[size_t(far[1])]) / 2.0)
                           .norm();
    ref.fold_success = ref.grasp_success && ref.corner_errors_m[0] <= tol.fold_frac * len &&
                       ref.corner_errors_m[1] <= tol.fold_frac * len;
    return ref;
}

}  // namespace

TEST_CASE("noisy-corner folds match an independent reflection oracle over 20 seeds",
          "[fold][acceptance-oracle]") {
    const CameraModel cam = look_at({0.0, 0.0, 1.0}, {0.0, 0.0, 0.0}, 128, 128, 63.5, 63.5);
    const TablePlane plane;
    const ToleranceParams tol;
    for (uint64_t seed = 0; seed < 20; ++seed) {
        RandomStream rng(seed, 0xf01d);
        const TowelGeometry towel = simple_towel(
            rng.uniform(0.2, 0.5), rng.uniform(0.2, 0.5), rng.uniform(0.0, 2 * kPi),
            {rng.uniform(-0.05, 0.05), rng.uniform(-0.05, 0.05)});
        // Perturb the projected corners by 2 px of noise, then reproject.
        std::array<Vec3, 4> noisy;
        const auto corners = towel.corners_3d();
        for (int i = 0; i < 4; ++i) {
            Vec2 px = project(cam, {corners[size_t(i)].x, corners[size_t(i)].y, 0.0});
            px.x += 2.0 * rng.normal();
            px.y += 2.0 * rng.normal();
            noisy[size_t(i)] = reproject_to_plane(cam, px, plane);
        }
        const FoldPlan plan = plan_fold(towel_frame(noisy, plane), FoldParams{});
        const FoldOutcome got = simulate_fold(towel, plan, tol);
        const FoldOutcome ref = reference_outcome(towel, plan, tol);
        REQUIRE(got.grasp_success == ref.grasp_success);
        REQUIRE(got.fold_success == ref.fold_success);
        REQUIRE(got.grasp_error_m == Catch::Approx(ref.grasp_error_m).margin(1e-9));
        REQUIRE(got.corner_errors_m[0] ==
                Catch::Approx(ref.corner_errors_m[0]).margin(1e-9));
        REQUIRE(got.corner_errors_m[1] ==
                Catch::Approx(ref.corner_errors_m[1]).margin(1e-9));
        // Outcome implication chain.
        if (got.fold_success) REQUIRE(got.grasp_success);
        if (got.grasp_success) REQUIRE_FALSE(got.aborted);
    }
}

namespace {

BenchmarkConfig small_bench(uint64_t seed, bool oracle, double noise_px = 0.0) {
    BenchmarkConfig cfg;
    cfg.n_trials = 50;
    cfg.seed = seed;
    cfg.gen.resolution = 64;
    cfg.oracle = oracle;
    cfg.noise_px = noise_px;
    cfg.threads = 2;
    return cfg;
}

}  // namespace

TEST_CASE("oracle benchmark folds every trial", "[fold][bench]") {
    const BenchmarkReport report = run_benchmark(small_bench(5, true), nullptr);
    REQUIRE(report.n_trials == 50);
    REQUIRE(report.n_aborted == 0);
    REQUIRE(report.grasp_successes == 50);
    REQUIRE(report.fold_successes == 50);
    REQUIRE(report.grasp_rate == 1.0);
    REQUIRE(report.fold_rate == 1.0);
}

TEST_CASE("benchmark reports are deterministic and thread-count invariant",
          "[fold][bench]") {
    BenchmarkConfig a = small_bench(9, true, 2.0);
    BenchmarkConfig b = small_bench(9, true, 2.0);
    a.threads = 1;
    b.threads = 4;
    const BenchmarkReport ra = run_benchmark(a, nullptr);
    const BenchmarkReport rb = run_benchmark(b, nullptr);
    REQUIRE(ra.grasp_successes == rb.grasp_successes);
    REQUIRE(ra.fold_successes == rb.fold_successes);
    for (size_t i = 0; i < ra.trials.size(); ++i) {
        REQUIRE(ra.trials[i].grasp_error_m == rb.trials[i].grasp_error_m);
        REQUIRE(ra.trials[i].fold_success == rb.trials[i].fold_success);
    }
}

TEST_CASE("mean fold success never increases along a small noise sweep",
          "[fold][bench]") {
    double prev_rate = 1.1;
    for (double noise : {0.0, 2.0, 8.0}) {
        BenchmarkConfig cfg = small_bench(31, true, noise);
        cfg.n_trials = 200;
        const BenchmarkReport report = run_benchmark(cfg, nullptr);
        REQUIRE(report.fold_rate <= prev_rate);
        prev_rate = report.fold_rate;
    }
    REQUIRE(prev_rate < 0.5);  // 8 px of noise must break most folds
}

TEST_CASE("fewer than four keypoints aborts the trial with no plan", "[fold][bench]") {
    // Three-blob heatmap through the real extraction path.
    const Heatmap h = render_target({{20.0, 20.0}, {40.0, 20.0}, {30.0, 44.0}}, 2.0, 64, 64);
    const auto found = extract_keypoints(h, 0.3, 5);
    REQUIRE(found.size() == 3);

    BenchmarkConfig cfg = small_bench(1, true);
    const SceneSpec scene = sample_scene(dataset_sample_seed(cfg.seed, 0), cfg.gen);
    std::vector<ScoredPoint> detections;
    for (const DetectedKeypoint& k : found)
        detections.push_back({{double(k.u), double(k.v)}, k.probability});
    const TrialResult result = execute_trial(scene, detections, cfg);
    REQUIRE(result.outcome.aborted);
    REQUIRE_FALSE(result.plan.has_value());
    REQUIRE_FALSE(result.outcome.grasp_success);
    REQUIRE_FALSE(result.outcome.fold_success);
    REQUIRE(result.n_detected == 3);
}

TEST_CASE("a fixed calibrated camera pins every trial's viewpoint", "[fold][bench]") {
    BenchmarkConfig cfg = small_bench(17, true);
    cfg.n_trials = 30;
    CameraCalibration cal;
    const double c = (cfg.gen.resolution - 1) * 0.5;
    cal.camera = look_at({0.0, 0.0, 1.0}, {0.0, 0.0, 0.0}, cfg.gen.resolution,
                         cfg.gen.resolution, c, c);
    cfg.fixed_camera = cal;
    const BenchmarkReport report = run_benchmark(cfg, nullptr);
    REQUIRE(report.grasp_successes == 30);
    REQUIRE(report.fold_successes == 30);
}

TEST_CASE("benchmark JSON carries rates, totals and the proxy-model note",
          "[fold][bench]") {
    BenchmarkConfig cfg = small_bench(2, true);
    cfg.n_trials = 10;
    const BenchmarkReport report = run_benchmark(cfg, nullptr);
    const Json j = benchmark_report_to_json(report, cfg, true);
    REQUIRE(j["n_trials"] == 10);
    REQUIRE(j["grasp_rate"] == 1.0);
    REQUIRE(j["trials"].size() == 10);
    REQUIRE(j["model_notes"].get<std::string>().find("out of model") != std::string::npos);
    const std::string csv = benchmark_trials_csv(report);
    REQUIRE(csv.find("trial,aborted") == 0);
}
