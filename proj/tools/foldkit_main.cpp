// foldkit command-line entry point: dataset generation, detector training
// and evaluation, single-image detection, and the closed-loop fold
// benchmark. Every command echoes its fully resolved configuration into its
// report so a run can be reproduced from the artifacts alone.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "foldkit/benchmark.hpp"
#include "foldkit/config.hpp"
#include "foldkit/dataset.hpp"
#include "foldkit/fold.hpp"
#include "foldkit/nn/checkpoint.hpp"
#include "foldkit/trainer.hpp"

namespace fs = std::filesystem;
using namespace foldkit;

namespace {

struct RunConfig {
    uint64_t seed = 0;
    std::string out = "foldkit_out";
    GenConfig gen;
    TrainConfig train;
    ExtractionConfig extraction;
    FoldParams fold;
    int64_t bench_trials = 100;
    bool bench_oracle = false;
    double bench_noise_px = 0.0;
    ToleranceParams tol;
};

RunConfig run_config_from_json(const Json& j) {
    RunConfig c;
    JsonReader r(j, "config");
    r.get("seed", c.seed);
    r.get("out", c.out);
    if (r.has("generation")) c.gen = gen_config_from_json(r.sub("generation"), "generation");
    if (r.has("training")) c.train = train_config_from_json(r.sub("training"), "training");
    if (r.has("extraction")) {
        JsonReader e(r.sub("extraction"), "extraction");
        e.get("min_probability", c.extraction.min_probability);
        e.get("window", c.extraction.window);
        e.finish();
    }
    if (r.has("fold")) {
        JsonReader f(r.sub("fold"), "fold");
        f.get("arc_height", c.fold.arc_height);
        f.get("n_waypoints", c.fold.n_waypoints);
        f.get("pregrasp_offset", c.fold.pregrasp_offset);
        f.finish();
    }
    if (r.has("benchmark")) {
        JsonReader b(r.sub("benchmark"), "benchmark");
        b.get("n_trials", c.bench_trials);
        b.get("oracle", c.bench_oracle);
        b.get("noise_px", c.bench_noise_px);
        b.get("grasp_tol_m", c.tol.grasp_m);
        b.get("fold_tol_frac", c.tol.fold_frac);
        b.finish();
    }
    r.finish();
    return c;
}

void write_text(const fs::path& path, const std::string& text) {
    write_file(path, std::vector<unsigned char>(text.begin(), text.end()));
}

Json extraction_to_json(const ExtractionConfig& e) {
    return Json{{"min_probability", e.min_probability}, {"window", e.window}};
}

Json metrics_to_json(const DetectionMetrics& m) {
    return Json{{"ap", m.ap},
                {"threshold_px", m.threshold_px},
                {"n_images", m.n_images},
                {"n_detections", m.n_detections}};
}

struct CliState {
    RunConfig cfg;
    bool json = false;
};

int cmd_datagen(CliState& st, int64_t n, int workers) {
    const fs::path dir = fs::path(st.cfg.out) / "dataset";
    const DatasetManifest manifest = generate_dataset(n, st.cfg.seed, dir, st.cfg.gen, workers);
    Json j;
    j["out"] = dir.string();
    j["n"] = manifest.n;
    j["seed"] = manifest.seed;
    j["resolution"] = manifest.resolution;
    j["format"] = manifest.format;
    j["content_hash"] = manifest.content_hash;
    if (st.json)
        std::cout << j.dump(2) << "\n";
    else
        std::cout << "generated " << manifest.n << " samples in " << dir.string()
                  << " (content_hash " << manifest.content_hash << ")\n";
    return 0;
}

int cmd_train(CliState& st, const std::string& data) {
    const fs::path manifest =
        data.empty() ? fs::path(st.cfg.out) / "dataset" / "manifest.json" : fs::path(data);
    TrainConfig tc = st.cfg.train;
    tc.seed = st.cfg.seed;
    const LoadedDataset dataset = load_dataset(manifest, tc.resolution);
    const fs::path out = fs::path(st.cfg.out) / "train";
    const TrainReport report = train(dataset, tc, out);
    Json j;
    j["checkpoint"] = report.checkpoint_path;
    j["best_epoch"] = report.best_epoch;
    j["best_val_ap"] = report.best_val_ap;
    j["wall_seconds"] = report.wall_seconds;
    j["report"] = (out / "train_report.json").string();
    if (st.json)
        std::cout << j.dump(2) << "\n";
    else
        std::cout << "trained " << report.epochs.size() << " epochs in " << report.wall_seconds
                  << " s; best val AP " << report.best_val_ap << " (epoch "
                  << report.best_epoch << "), checkpoint " << report.checkpoint_path << "\n";
    return 0;
}

int cmd_eval(CliState& st, const std::string& data, const std::string& checkpoint,
             std::vector<double> thresholds, bool val_only) {
    const fs::path manifest =
        data.empty() ? fs::path(st.cfg.out) / "dataset" / "manifest.json" : fs::path(data);
    const fs::path ckpt_path = checkpoint.empty()
                                   ? fs::path(st.cfg.out) / "train" / "checkpoint_best.fkc"
                                   : fs::path(checkpoint);
    if (thresholds.empty()) thresholds = {st.cfg.train.ap_threshold_px};
    nn::LoadedCheckpoint ckpt = nn::load_checkpoint(ckpt_path);
    int resolution = st.cfg.train.resolution;
    if (ckpt.config.contains("training") && ckpt.config["training"].contains("resolution"))
        resolution = ckpt.config["training"]["resolution"].get<int>();
    const LoadedDataset dataset = load_dataset(manifest, resolution);
    const EvalReport report = evaluate_checkpoint(ckpt, dataset, st.cfg.extraction,
                                                  thresholds, val_only, st.cfg.train.threads);
    Json j;
    j["checkpoint"] = ckpt_path.string();
    j["data"] = manifest.string();
    j["val_split_only"] = val_only;
    j["extraction"] = extraction_to_json(st.cfg.extraction);
    Json ms = Json::array();
    for (const DetectionMetrics& m : report.metrics) ms.push_back(metrics_to_json(m));
    j["metrics"] = ms;
    j["val_loss"] = report.val_loss;
    std::error_code ec;
    fs::create_directories(st.cfg.out, ec);
    write_text(fs::path(st.cfg.out) / "eval.json", j.dump(2));
    if (st.json)
        std::cout << j.dump(2) << "\n";
    else
        for (const DetectionMetrics& m : report.metrics)
            std::cout << "AP@" << m.threshold_px << "px = " << m.ap << " over " << m.n_images
                      << " images (" << m.n_detections << " detections)\n";
    return 0;
}

int cmd_detect(CliState& st, const std::string& image_path, const std::string& checkpoint,
               const std::string& overlay, const std::string& marker_color) {
    nn::LoadedCheckpoint ckpt = nn::load_checkpoint(
        checkpoint.empty() ? (fs::path(st.cfg.out) / "train" / "checkpoint_best.fkc").string()
                           : checkpoint);
    const Image img = read_ppm(image_path);
    Tensor<float> x({1, 3, img.height, img.width});
    const int64_t plane = int64_t(img.width) * img.height;
    for (int64_t p = 0; p < plane; ++p)
        for (int64_t c = 0; c < 3; ++c) x[c * plane + p] = img.rgb[size_t(3 * p + c)];
    const Tensor<float> pred = ckpt.model.forward(x);
    const auto found = extract_keypoints(Heatmap::from_tensor(pred),
                                         st.cfg.extraction.min_probability,
                                         st.cfg.extraction.window);
    Json j;
    j["image"] = image_path;
    j["extraction"] = extraction_to_json(st.cfg.extraction);
    Json kp = Json::array();
    for (const DetectedKeypoint& k : found)
        kp.push_back(Json{{"u", k.u}, {"v", k.v}, {"probability", k.probability}});
    j["keypoints"] = kp;
    if (!overlay.empty()) {
        Vec3 color{1.0, 1.0, 0.0};
        if (!marker_color.empty() &&
            std::sscanf(marker_color.c_str(), "%lf,%lf,%lf", &color.x, &color.y, &color.z) != 3)
            throw ConfigError("detect: --marker-color expects r,g,b in [0,1]");
        Image marked = img;
        for (const DetectedKeypoint& k : found)
            draw_disc(marked, k.u, k.v, 3.0, color);
        write_ppm(marked, overlay);
        j["overlay"] = overlay;
    }
    std::cout << j.dump(2) << "\n";
    return 0;
}

int cmd_fold_bench(CliState& st, int64_t n, bool oracle, double noise_px,
                   const std::string& checkpoint, bool per_trial_csv,
                   const std::string& camera_file) {
    BenchmarkConfig bc;
    bc.n_trials = n > 0 ? n : st.cfg.bench_trials;
    bc.seed = st.cfg.seed;
    bc.gen = st.cfg.gen;
    bc.extraction = st.cfg.extraction;
    bc.fold = st.cfg.fold;
    bc.tol = st.cfg.tol;
    bc.oracle = oracle || st.cfg.bench_oracle;
    bc.noise_px = noise_px >= 0.0 ? noise_px : st.cfg.bench_noise_px;
    bc.threads = st.cfg.train.threads;
    if (!camera_file.empty())
        bc.fixed_camera = calibration_from_json(parse_json_file(camera_file), "camera");

    std::optional<nn::LoadedCheckpoint> ckpt;
    nn::KeypointNet<float>* detector = nullptr;
    if (!bc.oracle) {
        const fs::path path = checkpoint.empty()
                                  ? fs::path(st.cfg.out) / "train" / "checkpoint_best.fkc"
                                  : fs::path(checkpoint);
        ckpt.emplace(nn::load_checkpoint(path));
        detector = &ckpt->model;
        if (ckpt->config.contains("training") &&
            ckpt->config["training"].contains("resolution") &&
            ckpt->config["training"]["resolution"].get<int>() != bc.gen.resolution)
            throw ShapeError("fold-bench: checkpoint resolution does not match generation "
                             "resolution");
    }

    const BenchmarkReport report = run_benchmark(bc, detector);
    Json j = benchmark_report_to_json(report, bc, false);
    std::error_code ec;
    fs::create_directories(st.cfg.out, ec);
    write_text(fs::path(st.cfg.out) / "fold_bench.json", j.dump(2));
    if (per_trial_csv)
        write_text(fs::path(st.cfg.out) / "fold_bench_trials.csv",
                   benchmark_trials_csv(report));
    if (st.json)
        std::cout << j.dump(2) << "\n";
    else
        std::cout << "trials " << report.n_trials << ": grasp " << report.grasp_successes
                  << "/" << report.n_trials << " (" << 100.0 * report.grasp_rate
                  << "%), fold " << report.fold_successes << "/" << report.n_trials << " ("
                  << 100.0 * report.fold_rate << "%), aborted " << report.n_aborted << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"synthetic towel-corner pipeline: data generation, heatmap detector "
                 "training, and scripted fold benchmarking"};
    app.require_subcommand(1);

    std::string config_path;
    std::optional<uint64_t> seed_flag;
    std::optional<std::string> out_flag;
    bool json_out = false;
    std::optional<int> threads_flag;
    app.add_option("--config", config_path, "JSON config file (flags override it)");
    app.add_option("--seed", seed_flag, "global seed");
    app.add_option("--out", out_flag, "output directory");
    app.add_option("--threads", threads_flag, "worker threads (0 = all cores, 1 = strict sequential)");
    app.add_flag("--json", json_out, "machine-readable JSON on stdout");

    auto* datagen = app.add_subcommand("datagen", "render an annotated synthetic dataset");
    int64_t dg_n = 2000;
    int dg_workers = 0;
    std::optional<int> dg_resolution;
    datagen->add_option("--n", dg_n, "number of samples");
    datagen->add_option("--workers", dg_workers, "parallel workers (0 = all cores)");
    datagen->add_option("--resolution", dg_resolution, "image resolution");

    auto* train_cmd = app.add_subcommand("train", "train the corner detector");
    std::string tr_data;
    std::optional<int> tr_epochs, tr_batch, tr_base, tr_depth, tr_resolution;
    std::optional<double> tr_lr, tr_sigma, tr_split;
    train_cmd->add_option("--data", tr_data, "dataset manifest path");
    train_cmd->add_option("--epochs", tr_epochs, "training epochs");
    train_cmd->add_option("--batch-size", tr_batch, "batch size");
    train_cmd->add_option("--lr", tr_lr, "Adam learning rate");
    train_cmd->add_option("--sigma", tr_sigma, "target Gaussian sigma, px");
    train_cmd->add_option("--split", tr_split, "train fraction");
    train_cmd->add_option("--base-channels", tr_base, "model base channels");
    train_cmd->add_option("--depth", tr_depth, "model depth");
    train_cmd->add_option("--resolution", tr_resolution, "training resolution");

    auto* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint on a dataset");
    std::string ev_data, ev_ckpt;
    std::vector<double> ev_thresholds;
    bool ev_val = false;
    eval_cmd->add_option("--data", ev_data, "dataset manifest path");
    eval_cmd->add_option("--checkpoint", ev_ckpt, "checkpoint path");
    eval_cmd->add_option("--threshold", ev_thresholds, "AP threshold(s) in px");
    eval_cmd->add_flag("--val", ev_val, "evaluate the trainer's validation split only");

    auto* detect_cmd = app.add_subcommand("detect", "detect corners in one image");
    std::string de_image, de_ckpt, de_overlay, de_color;
    detect_cmd->add_option("--image", de_image, "input PPM image")->required();
    detect_cmd->add_option("--checkpoint", de_ckpt, "checkpoint path");
    detect_cmd->add_option("--overlay", de_overlay, "write an overlay image here");
    detect_cmd->add_option("--marker-color", de_color, "overlay marker color r,g,b");
    std::optional<double> de_minprob;
    std::optional<int> de_window;
    detect_cmd->add_option("--min-probability", de_minprob, "extraction threshold");
    detect_cmd->add_option("--window", de_window, "extraction window, px (odd)");

    auto* bench_cmd = app.add_subcommand("fold-bench", "closed-loop fold benchmark");
    for (CLI::App* sc : {datagen, train_cmd, eval_cmd, detect_cmd, bench_cmd})
        sc->fallthrough();
    int64_t fb_n = 0;
    bool fb_oracle = false, fb_csv = false;
    double fb_noise = -1.0;
    std::string fb_ckpt;
    std::string fb_camera;
    bench_cmd->add_option("--n", fb_n, "number of trials");
    bench_cmd->add_option("--camera", fb_camera, "fixed camera calibration JSON");
    bench_cmd->add_flag("--oracle", fb_oracle, "use ground-truth corners, no detector");
    bench_cmd->add_option("--noise-px", fb_noise, "Gaussian noise on oracle corners, px");
    bench_cmd->add_option("--checkpoint", fb_ckpt, "detector checkpoint");
    bench_cmd->add_flag("--per-trial-csv", fb_csv, "also write per-trial CSV");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        CliState st;
        if (!config_path.empty()) st.cfg = run_config_from_json(parse_json_file(config_path));
        if (seed_flag) st.cfg.seed = *seed_flag;
        if (out_flag) st.cfg.out = *out_flag;
        if (threads_flag) st.cfg.train.threads = *threads_flag;
        st.json = json_out;

        if (*datagen) {
            if (dg_resolution) st.cfg.gen.resolution = *dg_resolution;
            return cmd_datagen(st, dg_n, dg_workers);
        }
        if (*train_cmd) {
            if (tr_epochs) st.cfg.train.epochs = *tr_epochs;
            if (tr_batch) st.cfg.train.batch_size = *tr_batch;
            if (tr_lr) st.cfg.train.learning_rate = *tr_lr;
            if (tr_sigma) st.cfg.train.sigma_px = *tr_sigma;
            if (tr_split) st.cfg.train.train_fraction = *tr_split;
            if (tr_base) st.cfg.train.model.base_channels = *tr_base;
            if (tr_depth) st.cfg.train.model.depth = *tr_depth;
            if (tr_resolution) st.cfg.train.resolution = *tr_resolution;
            return cmd_train(st, tr_data);
        }
        if (*eval_cmd) return cmd_eval(st, ev_data, ev_ckpt, ev_thresholds, ev_val);
        if (*detect_cmd) {
            if (de_minprob) st.cfg.extraction.min_probability = *de_minprob;
            if (de_window) st.cfg.extraction.window = *de_window;
            return cmd_detect(st, de_image, de_ckpt, de_overlay, de_color);
        }
        if (*bench_cmd)
            return cmd_fold_bench(st, fb_n, fb_oracle, fb_noise, fb_ckpt, fb_csv, fb_camera);
        return 2;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const IoError& e) {
        std::cerr << "io error: " << e.what() << "\n";
        return 2;
    } catch (const ArgumentError& e) {
        std::cerr << "argument error: " << e.what() << "\n";
        return 2;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
