#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "foldkit/config.hpp"
#include "foldkit/dataset.hpp"
#include "foldkit/heatmap.hpp"
#include "foldkit/nn/adam.hpp"
#include "foldkit/nn/checkpoint.hpp"
#include "foldkit/nn/model.hpp"
#include "foldkit/parallel.hpp"

namespace foldkit {

struct ExtractionConfig {
    double min_probability = 0.3;
    int window = 5;
};

struct TrainConfig {
    int epochs = 15;
    int batch_size = 8;
    double learning_rate = 1e-3;
    double sigma_px = 2.0;
    int resolution = 128;
    double train_fraction = 0.9;  // remainder is the validation split
    uint64_t seed = 0;
    int threads = 0;  // 0 = hardware concurrency, 1 = strict sequential
    nn::ModelSpec model;
    ExtractionConfig extraction;
    double ap_threshold_px = 2.0;

    void validate() const {
        if (epochs < 1) throw ConfigError("train config: 'epochs' must be >= 1");
        if (batch_size < 1) throw ConfigError("train config: 'batch_size' must be >= 1");
        if (!(train_fraction > 0.0 && train_fraction < 1.0))
            throw ConfigError("train config: 'train_fraction' must be in (0,1)");
        if (sigma_px <= 0.0) throw ConfigError("train config: 'sigma_px' must be > 0");
        if (resolution % model.spatial_divisor() != 0)
            throw ConfigError("train config: 'resolution' not divisible by 2^depth");
    }
};

inline Json train_config_to_json(const TrainConfig& c) {
    Json j;
    j["epochs"] = c.epochs;
    j["batch_size"] = c.batch_size;
    j["learning_rate"] = c.learning_rate;
    j["sigma_px"] = c.sigma_px;
    j["resolution"] = c.resolution;
    j["train_fraction"] = c.train_fraction;
    j["seed"] = c.seed;
    j["threads"] = c.threads;
    j["model"] = model_spec_to_json(c.model);
    j["min_probability"] = c.extraction.min_probability;
    j["window"] = c.extraction.window;
    j["ap_threshold_px"] = c.ap_threshold_px;
    return j;
}

inline TrainConfig train_config_from_json(const Json& j, const std::string& context = "training") {
    TrainConfig c;
    JsonReader r(j, context);
    r.get("epochs", c.epochs);
    r.get("batch_size", c.batch_size);
    r.get("learning_rate", c.learning_rate);
    r.get("sigma_px", c.sigma_px);
    r.get("resolution", c.resolution);
    r.get("train_fraction", c.train_fraction);
    r.get("seed", c.seed);
    r.get("threads", c.threads);
    if (r.has("model")) c.model = model_spec_from_json(r.sub("model"), context + ".model");
    r.get("min_probability", c.extraction.min_probability);
    r.get("window", c.extraction.window);
    r.get("ap_threshold_px", c.ap_threshold_px);
    r.finish();
    return c;
}

struct EpochRecord {
    int epoch = 0;
    double train_loss = 0.0;
    double val_loss = 0.0;
    double val_ap = 0.0;
};

struct TrainReport {
    std::vector<EpochRecord> epochs;
    double wall_seconds = 0.0;
    std::string checkpoint_path;
    int best_epoch = 0;
    double best_val_ap = 0.0;
    TrainConfig config;
};

// RandomStream stream ids used by training; fixed so runs are reproducible.
inline constexpr uint64_t kTrainInitStream = 0x1a17;
inline constexpr uint64_t kTrainSplitStream = 0x59f1;
inline constexpr uint64_t kTrainEpochStreamBase = 0x100;

// Deterministic shuffled train/val split of [0, n).
inline std::pair<std::vector<int64_t>, std::vector<int64_t>> train_val_split(
    int64_t n, double train_fraction, uint64_t seed) {
    std::vector<int64_t> idx(static_cast<size_t>(n));
    std::iota(idx.begin(), idx.end(), int64_t(0));
    RandomStream rng(seed, kTrainSplitStream);
    for (int64_t i = n - 1; i > 0; --i)
        std::swap(idx[size_t(i)], idx[size_t(rng.uniform_int(uint64_t(i) + 1))]);
    int64_t n_train = static_cast<int64_t>(std::llround(n * train_fraction));
    n_train = std::clamp<int64_t>(n_train, 1, std::max<int64_t>(1, n - 1));
    if (n < 2) n_train = n;
    return {std::vector<int64_t>(idx.begin(), idx.begin() + n_train),
            std::vector<int64_t>(idx.begin() + n_train, idx.end())};
}

namespace detail {

inline std::vector<Vec2> visible_corners(const KeypointAnnotation& ann) {
    std::vector<Vec2> out;
    for (int c = 0; c < 4; ++c)
        if (ann.visible[size_t(c)]) out.push_back(ann.corners_px[size_t(c)]);
    return out;
}

inline Tensor<float> target_tensor(const DatasetSample& sample, double sigma_px) {
    const Heatmap h = render_target(visible_corners(sample.annotation), sigma_px,
                                    sample.width, sample.height);
    Tensor<float> t({1, 1, sample.height, sample.width});
    std::copy(h.values.begin(), h.values.end(), t.data());
    return t;
}

inline Tensor<float> input_tensor(const DatasetSample& sample) {
    Tensor<float> t({1, 3, sample.height, sample.width});
    const int64_t plane = int64_t(sample.width) * sample.height;
    for (int64_t p = 0; p < plane; ++p)
        for (int64_t c = 0; c < 3; ++c)
            t[c * plane + p] = static_cast<float>(sample.pixels[size_t(3 * p + c)]) / 255.0f;
    return t;
}

}  // namespace detail

struct ValResult {
    double loss = 0.0;
    DetectionMetrics metrics;
};

// Forward + extraction + pooled AP over a subset of the dataset.
inline ValResult evaluate_subset(nn::KeypointNet<float>& model, const LoadedDataset& data,
                                 const std::vector<int64_t>& indices, double sigma_px,
                                 const ExtractionConfig& extraction, double threshold_px,
                                 int threads) {
    const int64_t n = static_cast<int64_t>(indices.size());
    std::vector<double> losses(static_cast<size_t>(n), 0.0);
    std::vector<ImageDetections> detections(static_cast<size_t>(n));
    std::vector<KeypointAnnotation> truths(static_cast<size_t>(n));
    parallel_for(n, threads, [&](int64_t k) {
        const DatasetSample& sample = data.samples[size_t(indices[size_t(k)])];
        const Tensor<float> x = detail::input_tensor(sample);
        const Tensor<float> target = detail::target_tensor(sample, sigma_px);
        const Tensor<float> pred = model.forward(x);
        losses[size_t(k)] = nn::bce_loss(pred, target);
        detections[size_t(k)].image_id = sample.annotation.image_id;
        detections[size_t(k)].keypoints = extract_keypoints(
            Heatmap::from_tensor(pred), extraction.min_probability, extraction.window);
        truths[size_t(k)] = sample.annotation;
    });
    ValResult r;
    for (double l : losses) r.loss += l;
    if (n > 0) r.loss /= static_cast<double>(n);
    r.metrics = average_precision(detections, truths, threshold_px);
    return r;
}

// Train the detector. Targets come from heatmap render_target over visible
// corners only; the loss is pixel-wise BCE minimized with Adam. Per-image
// forward/backward passes run in parallel but gradients accumulate in index
// order, so any thread count reproduces the strict sequential result.
inline TrainReport train(const LoadedDataset& data, const TrainConfig& cfg,
                         const std::filesystem::path& out_dir) {
    cfg.validate();
    if (data.samples.empty()) throw ArgumentError("train: dataset is empty");
    if (data.resolution != cfg.resolution)
        throw ShapeError("train: dataset resolution " + std::to_string(data.resolution) +
                         " does not match configured " + std::to_string(cfg.resolution));
    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    if (ec) throw IoError("train: cannot create '" + out_dir.string() + "'");

    const auto t_start = std::chrono::steady_clock::now();
    nn::KeypointNet<float> model(cfg.model);
    RandomStream rng(cfg.seed, kTrainInitStream);
    model.init_params(rng);
    nn::AdamOptimizer<float> optimizer({cfg.learning_rate, 0.9, 0.999, 1e-8});

    const auto [train_idx, val_idx] =
        train_val_split(static_cast<int64_t>(data.samples.size()), cfg.train_fraction, cfg.seed);

    const int threads = cfg.threads;
    std::vector<Tensor<float>*> params = model.param_tensors();

    TrainReport report;
    report.config = cfg;
    report.checkpoint_path = (out_dir / "checkpoint_best.fkc").string();
    report.best_val_ap = -1.0;

    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
        std::vector<int64_t> order = train_idx;
        RandomStream shuffle_rng(cfg.seed, kTrainEpochStreamBase + uint64_t(epoch));
        for (int64_t i = static_cast<int64_t>(order.size()) - 1; i > 0; --i)
            std::swap(order[size_t(i)], order[size_t(shuffle_rng.uniform_int(uint64_t(i) + 1))]);

        double loss_sum = 0.0;
        int64_t batch_index = 0;
        for (size_t start = 0; start < order.size(); start += size_t(cfg.batch_size)) {
            const int64_t b_count =
                std::min<int64_t>(cfg.batch_size, static_cast<int64_t>(order.size() - start));
            std::vector<nn::ModelGrads<float>> grads(static_cast<size_t>(b_count));
            std::vector<double> losses(static_cast<size_t>(b_count), 0.0);
            parallel_for(b_count, threads, [&](int64_t b) {
                const DatasetSample& sample = data.samples[size_t(order[start + size_t(b)])];
                const Tensor<float> x = detail::input_tensor(sample);
                const Tensor<float> target = detail::target_tensor(sample, cfg.sigma_px);
                nn::ForwardTrace<float> trace;
                nn::Workspace<float> ws;
                const Tensor<float> pred = model.forward(x, trace, ws);
                losses[size_t(b)] = nn::bce_loss(pred, target);
                grads[size_t(b)] =
                    model.backward(trace, nn::bce_loss_backward(pred, target), ws);
            });
            // Fixed-order reduction keeps results thread-count invariant.
            nn::ModelGrads<float>& total = grads[0];
            for (int64_t b = 1; b < b_count; ++b) total.accumulate(grads[size_t(b)]);
            total.scale(1.0f / static_cast<float>(b_count));

            double batch_loss = 0.0;
            for (int64_t b = 0; b < b_count; ++b) batch_loss += losses[size_t(b)];
            batch_loss /= static_cast<double>(b_count);
            if (!std::isfinite(batch_loss))
                throw TrainError("train: non-finite loss at epoch " + std::to_string(epoch) +
                                 ", batch " + std::to_string(batch_index));
            loss_sum += batch_loss * static_cast<double>(b_count);

            std::vector<const Tensor<float>*> grad_ptrs;
            grad_ptrs.reserve(total.params.size());
            for (const auto& g : total.params) grad_ptrs.push_back(&g);
            optimizer.step(params, grad_ptrs);
            ++batch_index;
        }

        EpochRecord rec;
        rec.epoch = epoch;
        rec.train_loss = loss_sum / static_cast<double>(order.size());
        if (!val_idx.empty()) {
            const ValResult val = evaluate_subset(model, data, val_idx, cfg.sigma_px,
                                                  cfg.extraction, cfg.ap_threshold_px, threads);
            rec.val_loss = val.loss;
            rec.val_ap = val.metrics.ap;
        }
        report.epochs.push_back(rec);

        if (rec.val_ap > report.best_val_ap || val_idx.empty()) {
            report.best_val_ap = rec.val_ap;
            report.best_epoch = epoch;
            Json echo;
            echo["training"] = train_config_to_json(cfg);
            echo["epoch"] = epoch;
            echo["val_ap"] = rec.val_ap;
            nn::save_checkpoint(report.checkpoint_path, model, optimizer, echo, rng.state());
        }
    }

    report.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();

    // Report JSON plus a flat CSV for plotting.
    Json rj;
    rj["config"] = train_config_to_json(cfg);
    rj["wall_seconds"] = report.wall_seconds;
    rj["checkpoint"] = report.checkpoint_path;
    rj["best_epoch"] = report.best_epoch;
    rj["best_val_ap"] = report.best_val_ap;
    rj["n_train"] = train_idx.size();
    rj["n_val"] = val_idx.size();
    Json epochs = Json::array();
    for (const EpochRecord& r : report.epochs) {
        Json e;
        e["epoch"] = r.epoch;
        e["train_loss"] = r.train_loss;
        e["val_loss"] = r.val_loss;
        e["val_ap"] = r.val_ap;
        epochs.push_back(e);
    }
    rj["epochs"] = epochs;
    const std::string rs = rj.dump(2);
    write_file(out_dir / "train_report.json", std::vector<unsigned char>(rs.begin(), rs.end()));

    std::ostringstream csv;
    csv << "epoch,train_loss,val_loss,val_ap\n";
    for (const EpochRecord& r : report.epochs)
        csv << r.epoch << "," << r.train_loss << "," << r.val_loss << "," << r.val_ap << "\n";
    const std::string cs = csv.str();
    write_file(out_dir / "epochs.csv", std::vector<unsigned char>(cs.begin(), cs.end()));
    return report;
}

// Evaluate a checkpoint against a dataset at one or more AP thresholds.
// Throws ShapeError when the checkpoint was trained at a different
// resolution than the dataset provides.
struct EvalReport {
    std::vector<DetectionMetrics> metrics;  // one per threshold
    double val_loss = 0.0;
};

inline EvalReport evaluate_checkpoint(nn::LoadedCheckpoint& ckpt, const LoadedDataset& data,
                                      const ExtractionConfig& extraction,
                                      const std::vector<double>& thresholds,
                                      bool val_split_only = false, int threads = 0) {
    double sigma_px = 2.0;
    if (ckpt.config.contains("training")) {
        const Json& tc = ckpt.config["training"];
        if (tc.contains("resolution") && tc["resolution"].get<int>() != data.resolution)
            throw ShapeError("evaluate: checkpoint resolution " +
                             std::to_string(tc["resolution"].get<int>()) +
                             " does not match dataset resolution " +
                             std::to_string(data.resolution));
        if (tc.contains("sigma_px")) sigma_px = tc["sigma_px"].get<double>();
    }
    std::vector<int64_t> indices;
    if (val_split_only && ckpt.config.contains("training")) {
        const TrainConfig tc =
            train_config_from_json(ckpt.config["training"], "checkpoint.training");
        indices = train_val_split(static_cast<int64_t>(data.samples.size()),
                                  tc.train_fraction, tc.seed)
                      .second;
    } else {
        indices.resize(data.samples.size());
        std::iota(indices.begin(), indices.end(), int64_t(0));
    }
    EvalReport out;
    for (double t : thresholds) {
        const ValResult r = evaluate_subset(ckpt.model, data, indices, sigma_px, extraction,
                                            t, threads);
        out.metrics.push_back(r.metrics);
        out.val_loss = r.loss;
    }
    return out;
}

}  // namespace foldkit
