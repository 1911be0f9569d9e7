#include <catch2/catch_amalgamated.hpp>

#include <array>
#include <cstdio>
#include <string>

#include "foldkit/dataset.hpp"
#include "foldkit/nn/checkpoint.hpp"
#include "support/temp_dir.hpp"

using namespace foldkit;

namespace {

struct CommandResult {
    int exit_code = -1;
    std::string output;  // stdout + stderr
};

CommandResult run_cli(const std::string& args) {
    const std::string cmd = std::string(FOLDKIT_CLI_PATH) + " " + args + " 2>&1";
    std::array<char, 4096> buf{};
    CommandResult r;
    FILE* pipe = popen(cmd.c_str(), "r");
    REQUIRE(pipe != nullptr);
    while (fgets(buf.data(), buf.size(), pipe)) r.output += buf.data();
    const int status = pclose(pipe);
    r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return r;
}

Json json_of(const std::string& text) {
    Json j = Json::parse(text, nullptr, false);
    REQUIRE_FALSE(j.is_discarded());
    return j;
}

}  // namespace

TEST_CASE("datagen runs are reproducible through the CLI", "[cli]") {
    testutil::TempDir a("cli_dg_a"), b("cli_dg_b");
    const auto ra = run_cli("datagen --n 12 --seed 1 --out " + a.path().string() + " --json");
    const auto rb = run_cli("datagen --n 12 --seed 1 --out " + b.path().string() + " --json");
    REQUIRE(ra.exit_code == 0);
    REQUIRE(rb.exit_code == 0);
    const Json ja = json_of(ra.output), jb = json_of(rb.output);
    REQUIRE(ja["content_hash"] == jb["content_hash"]);
    REQUIRE(ja["n"] == 12);
}

TEST_CASE("detect prints an empty keypoint list for a dead heatmap and exits 0",
          "[cli]") {
    testutil::TempDir dir("cli_detect");
    // A checkpoint whose head bias is pushed far negative predicts an
    // all-zero heatmap on any input.
    nn::ModelSpec spec;
    spec.base_channels = 4;
    spec.bottleneck_blocks = 1;
    nn::KeypointNet<float> model(spec);
    RandomStream rng(1);
    model.init_params(rng);
    model.for_each_param([](const std::string& name, Tensor<float>& t) {
        if (name == "head.bias") t.fill(-100.0f);
    });
    nn::AdamOptimizer<float> opt;
    nn::save_checkpoint(dir.path() / "dead.fkc", model, opt, Json::object(), {0, 0, 0, 0});

    const SceneSpec scene = sample_scene(3, GenConfig{});
    write_ppm(render_scene(scene, 128), dir.path() / "img.ppm");

    const auto r = run_cli("detect --image " + (dir.path() / "img.ppm").string() +
                           " --checkpoint " + (dir.path() / "dead.fkc").string());
    REQUIRE(r.exit_code == 0);
    const Json j = json_of(r.output);
    REQUIRE(j["keypoints"].is_array());
    REQUIRE(j["keypoints"].empty());
}

TEST_CASE("detect writes a keypoint overlay when asked", "[cli]") {
    testutil::TempDir dir("cli_overlay");
    nn::ModelSpec spec;
    spec.base_channels = 4;
    spec.bottleneck_blocks = 1;
    nn::KeypointNet<float> model(spec);
    RandomStream rng(2);
    model.init_params(rng);
    // Saturate the head bias positive: every pixel peaks, giving at least
    // one plateau detection to draw.
    model.for_each_param([](const std::string& name, Tensor<float>& t) {
        if (name == "head.bias") t.fill(20.0f);
    });
    nn::AdamOptimizer<float> opt;
    nn::save_checkpoint(dir.path() / "hot.fkc", model, opt, Json::object(), {0, 0, 0, 0});
    const SceneSpec scene = sample_scene(4, GenConfig{});
    write_ppm(render_scene(scene, 128), dir.path() / "img.ppm");

    const auto r = run_cli("detect --image " + (dir.path() / "img.ppm").string() +
                           " --checkpoint " + (dir.path() / "hot.fkc").string() +
                           " --overlay " + (dir.path() / "overlay.ppm").string() +
                           " --marker-color 1,1,0");
    REQUIRE(r.exit_code == 0);
    REQUIRE(std::filesystem::exists(dir.path() / "overlay.ppm"));
    const Image overlay = read_ppm(dir.path() / "overlay.ppm");
    const Json j = json_of(r.output);
    REQUIRE_FALSE(j["keypoints"].empty());
    const int u = j["keypoints"][0]["u"].get<int>();
    const int v = j["keypoints"][0]["v"].get<int>();
    REQUIRE(overlay.pixel(u, v)[0] == 1.0f);
    REQUIRE(overlay.pixel(u, v)[1] == 1.0f);
    REQUIRE(overlay.pixel(u, v)[2] == 0.0f);
}

TEST_CASE("oracle fold-bench reports all-success through the CLI", "[cli]") {
    testutil::TempDir dir("cli_bench");
    const auto r = run_cli("fold-bench --oracle --n 50 --seed 2 --out " +
                           dir.path().string() + " --json");
    REQUIRE(r.exit_code == 0);
    const Json j = json_of(r.output);
    REQUIRE(j["n_trials"] == 50);
    REQUIRE(j["grasp_successes"] == 50);
    REQUIRE(j["fold_successes"] == 50);
    REQUIRE(std::filesystem::exists(dir.path() / "fold_bench.json"));
}

TEST_CASE("usage errors exit with code 2", "[cli]") {
    REQUIRE(run_cli("--definitely-not-a-flag").exit_code == 2);
    REQUIRE(run_cli("datagen --no-such-option 3").exit_code == 2);

    testutil::TempDir dir("cli_badcfg");
    write_file(dir.path() / "bad.json",
               {'{', '"', 'z', 'z', '"', ':', '1', '}'});
    const auto r = run_cli("datagen --n 1 --config " + (dir.path() / "bad.json").string() +
                           " --out " + dir.path().string());
    REQUIRE(r.exit_code == 2);
    REQUIRE(r.output.find("unknown key") != std::string::npos);

    const auto missing = run_cli("train --data /nonexistent/manifest.json --out " +
                                 dir.path().string());
    REQUIRE(missing.exit_code == 2);
}

TEST_CASE("flags override config-file values", "[cli]") {
    testutil::TempDir dir("cli_override");
    const std::string cfg = R"({"seed": 1, "generation": {"resolution": 48}})";
    write_file(dir.path() / "cfg.json", std::vector<unsigned char>(cfg.begin(), cfg.end()));
    const auto r = run_cli("datagen --n 3 --config " + (dir.path() / "cfg.json").string() +
                           " --seed 9 --out " + dir.path().string() + " --json");
    REQUIRE(r.exit_code == 0);
    const Json j = json_of(r.output);
    REQUIRE(j["seed"] == 9);
    REQUIRE(j["resolution"] == 48);
}
