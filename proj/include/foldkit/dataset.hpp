#pragma once

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "foldkit/annotation.hpp"
#include "foldkit/config.hpp"
#include "foldkit/hash.hpp"
#include "foldkit/image.hpp"
#include "foldkit/rasterizer.hpp"
#include "foldkit/scene.hpp"

namespace foldkit {

struct DatasetManifest {
    int64_t n = 0;
    uint64_t seed = 0;
    int resolution = 0;
    std::string format = "ppm";
    std::string content_hash;  // 16 hex chars, covers images + annotations
    GenConfig config;
};

// Seed for sample i of a run; depends only on (seed, i), so generation
// order and worker count cannot change the dataset.
inline uint64_t dataset_sample_seed(uint64_t seed, int64_t index) {
    return detail::mix64(detail::mix64(seed) ^
                         detail::mix64(0x5a17ad5e5eedull + static_cast<uint64_t>(index)));
}

inline std::string sample_image_id(int64_t index) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "im_%05lld", static_cast<long long>(index));
    return buf;
}

namespace detail {

inline Json annotation_to_json(const KeypointAnnotation& ann, const std::string& file,
                               double towel_w, double towel_h) {
    Json rec;
    rec["image_id"] = ann.image_id;
    rec["file"] = file;
    Json corners = Json::array();
    for (const Vec2& c : ann.corners_px) corners.push_back(Json::array({c.x, c.y}));
    rec["corners_px"] = corners;
    Json vis = Json::array();
    for (bool v : ann.visible) vis.push_back(v);
    rec["visible"] = vis;
    rec["towel_size_m"] = Json::array({towel_w, towel_h});
    return rec;
}

}  // namespace detail

// Render n annotated samples into out_dir:
//   out_dir/images/im_#####.ppm, out_dir/annotations.json, out_dir/manifest.json.
// Workers split the index range; every byte of output is identical for any
// worker count.
inline DatasetManifest generate_dataset(int64_t n, uint64_t seed,
                                        const std::filesystem::path& out_dir,
                                        const GenConfig& config, int workers = 1) {
    config.validate();
    if (n < 0) throw ArgumentError("generate_dataset: n must be >= 0");
    if (workers < 1) workers = 1;
    if (std::filesystem::exists(out_dir / "manifest.json"))
        throw IoError("generate_dataset: '" + out_dir.string() +
                      "' already contains a dataset; refusing to overwrite");
    std::error_code ec;
    std::filesystem::create_directories(out_dir / "images", ec);
    if (ec)
        throw IoError("generate_dataset: cannot create '" + (out_dir / "images").string() +
                      "': " + ec.message());

    std::vector<Json> annotation_records(static_cast<size_t>(n));
    std::vector<uint64_t> sample_hashes(static_cast<size_t>(n), 0);
    std::atomic<int64_t> next{0};
    std::atomic<bool> failed{false};
    std::string failure;
    std::mutex failure_mutex;

    auto work = [&]() {
        while (true) {
            const int64_t i = next.fetch_add(1);
            if (i >= n || failed.load()) break;
            try {
                const SceneSpec scene = sample_scene(dataset_sample_seed(seed, i), config);
                const Image img = render_scene(scene, config.resolution);
                KeypointAnnotation ann = annotate_corners(scene, config.resolution);
                ann.image_id = sample_image_id(i);
                const std::string file = "images/" + ann.image_id + ".ppm";
                const auto bytes = encode_ppm(img);
                write_file(out_dir / file, bytes);
                const Json rec = detail::annotation_to_json(ann, file, scene.towel.width,
                                                            scene.towel.height);
                Fnv1a64 h;
                h.update(bytes);
                h.update(rec.dump());
                sample_hashes[static_cast<size_t>(i)] = h.value();
                annotation_records[static_cast<size_t>(i)] = rec;
            } catch (const std::exception& e) {
                std::lock_guard<std::mutex> lock(failure_mutex);
                failed.store(true);
                failure = e.what();
            }
        }
    };

    if (workers == 1) {
        work();
    } else {
        std::vector<std::thread> pool;
        for (int w = 0; w < workers; ++w) pool.emplace_back(work);
        for (auto& t : pool) t.join();
    }
    if (failed.load())
        throw IoError("generate_dataset: aborted with partial output in '" +
                      out_dir.string() + "': " + failure);

    Json annotations = Json::array();
    for (auto& rec : annotation_records) annotations.push_back(std::move(rec));
    write_file(out_dir / "annotations.json", [&annotations] {
        const std::string s = annotations.dump(2);
        return std::vector<unsigned char>(s.begin(), s.end());
    }());

    Fnv1a64 content;
    content.update_u64(static_cast<uint64_t>(n));
    content.update_u64(static_cast<uint64_t>(config.resolution));
    for (uint64_t h : sample_hashes) content.update_u64(h);

    DatasetManifest manifest;
    manifest.n = n;
    manifest.seed = seed;
    manifest.resolution = config.resolution;
    manifest.format = "ppm";
    manifest.content_hash = content.hex();
    manifest.config = config;

    Json mj;
    mj["n"] = manifest.n;
    mj["seed"] = manifest.seed;
    mj["resolution"] = manifest.resolution;
    mj["format"] = manifest.format;
    mj["content_hash"] = manifest.content_hash;
    mj["config"] = gen_config_to_json(config);
    write_file(out_dir / "manifest.json", [&mj] {
        const std::string s = mj.dump(2);
        return std::vector<unsigned char>(s.begin(), s.end());
    }());
    return manifest;
}

// One loaded training sample: quantized RGB pixels plus the (possibly
// rescaled) annotation.
struct DatasetSample {
    int width = 0;
    int height = 0;
    std::vector<unsigned char> pixels;  // interleaved RGB
    KeypointAnnotation annotation;

    Tensor<float> to_tensor() const {
        Tensor<float> t({3, height, width});
        const int64_t plane = int64_t(width) * height;
        for (int64_t p = 0; p < plane; ++p)
            for (int64_t c = 0; c < 3; ++c)
                t[c * plane + p] =
                    static_cast<float>(pixels[size_t(3 * p + c)]) / 255.0f;
        return t;
    }
};

struct LoadedDataset {
    int resolution = 0;
    std::vector<DatasetSample> samples;
};

inline Json parse_json_file(const std::filesystem::path& path) {
    const auto bytes = read_file(path);
    Json j = Json::parse(bytes.begin(), bytes.end(), nullptr, false);
    if (j.is_discarded()) throw IoError("malformed JSON in '" + path.string() + "'");
    return j;
}

inline DatasetManifest read_manifest(const std::filesystem::path& manifest_path) {
    const Json j = parse_json_file(manifest_path);
    DatasetManifest m;
    try {
        m.n = j.at("n").get<int64_t>();
        m.seed = j.at("seed").get<uint64_t>();
        m.resolution = j.at("resolution").get<int>();
        m.format = j.at("format").get<std::string>();
        m.content_hash = j.at("content_hash").get<std::string>();
        m.config = gen_config_from_json(j.at("config"), "manifest.config");
    } catch (const Json::exception& e) {
        throw IoError("manifest '" + manifest_path.string() + "': " + e.what());
    }
    return m;
}

// Load a generated dataset, rescaling images and annotations when the file
// resolution differs from the requested one.
inline LoadedDataset load_dataset(const std::filesystem::path& manifest_path,
                                  int resolution) {
    const DatasetManifest manifest = read_manifest(manifest_path);
    const auto dir = manifest_path.parent_path();
    const Json annotations = parse_json_file(dir / "annotations.json");
    if (!annotations.is_array())
        throw IoError("annotations in '" + (dir / "annotations.json").string() +
                      "' must be an array");

    LoadedDataset data;
    data.resolution = resolution;
    const double scale = static_cast<double>(resolution) / manifest.resolution;
    for (const Json& rec : annotations) {
        DatasetSample sample;
        std::string file;
        try {
            sample.annotation.image_id = rec.at("image_id").get<std::string>();
            file = rec.at("file").get<std::string>();
            for (int c = 0; c < 4; ++c) {
                sample.annotation.corners_px[size_t(c)] = {
                    rec.at("corners_px").at(size_t(c)).at(0).get<double>() * scale,
                    rec.at("corners_px").at(size_t(c)).at(1).get<double>() * scale};
                sample.annotation.visible[size_t(c)] =
                    rec.at("visible").at(size_t(c)).get<bool>();
            }
        } catch (const Json::exception& e) {
            throw IoError("annotation record in '" + (dir / "annotations.json").string() +
                          "': " + e.what());
        }
        Image img = read_ppm(dir / file);
        if (img.width != manifest.resolution || img.height != manifest.resolution)
            throw IoError("image '" + file + "' does not match manifest resolution " +
                          std::to_string(manifest.resolution));
        if (resolution != manifest.resolution) img = resize_bilinear(img, resolution, resolution);
        for (int c = 0; c < 4; ++c) {
            if (!sample.annotation.visible[size_t(c)]) continue;
            const Vec2& px = sample.annotation.corners_px[size_t(c)];
            if (px.x < 0.0 || px.x >= resolution || px.y < 0.0 || px.y >= resolution)
                throw IoError("annotation for '" + sample.annotation.image_id +
                              "' has a visible corner out of bounds");
        }
        sample.width = img.width;
        sample.height = img.height;
        sample.pixels.resize(img.rgb.size());
        for (size_t i = 0; i < img.rgb.size(); ++i)
            sample.pixels[i] = static_cast<unsigned char>(
                std::lround(std::clamp(img.rgb[i], 0.0f, 1.0f) * 255.0f));
        data.samples.push_back(std::move(sample));
    }
    return data;
}

}  // namespace foldkit
