#pragma once

#include <array>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "foldkit/common.hpp"
#include "foldkit/config.hpp"
#include "foldkit/nn/adam.hpp"
#include "foldkit/nn/model.hpp"

namespace foldkit::nn {

// Versioned binary checkpoint:
//   bytes 0..7   magic "FKCKPT01"
//   bytes 8..15  header length (little-endian u64)
//   header       JSON: model spec, optimizer config/step, rng state,
//                free-form config echo, tensor directory
//   data         raw float32 blobs in directory order
inline constexpr char kCheckpointMagic[8] = {'F', 'K', 'C', 'K', 'P', 'T', '0', '1'};

namespace detail {

inline std::string u64_hex(uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

inline uint64_t hex_u64(const std::string& s) {
    return std::strtoull(s.c_str(), nullptr, 16);
}

}  // namespace detail

inline void save_checkpoint(const std::filesystem::path& path, KeypointNet<float>& model,
                            const AdamOptimizer<float>& optimizer, const Json& config_echo,
                            const std::array<uint64_t, 4>& rng_state) {
    std::vector<std::pair<std::string, const Tensor<float>*>> entries;
    model.for_each_param([&entries](const std::string& name, Tensor<float>& t) {
        entries.emplace_back(name, &t);
    });
    const size_t n_params = entries.size();
    if (!optimizer.states().empty()) {
        if (optimizer.states().size() != n_params)
            throw ShapeError("checkpoint: optimizer state count does not match parameters");
        for (size_t i = 0; i < n_params; ++i)
            entries.emplace_back("adam_m." + entries[i].first, &optimizer.states()[i].m);
        for (size_t i = 0; i < n_params; ++i)
            entries.emplace_back("adam_v." + entries[i].first, &optimizer.states()[i].v);
    }

    Json dir = Json::array();
    int64_t offset = 0;
    for (const auto& [name, tensor] : entries) {
        Json e;
        e["name"] = name;
        e["shape"] = tensor->shape();
        e["offset"] = offset;
        e["count"] = tensor->numel();
        dir.push_back(e);
        offset += tensor->numel();
    }

    Json header;
    header["spec"] = model_spec_to_json(model.spec());
    header["adam"] = {{"lr", optimizer.config().lr},
                      {"beta1", optimizer.config().beta1},
                      {"beta2", optimizer.config().beta2},
                      {"eps", optimizer.config().eps},
                      {"step", optimizer.step_count()},
                      {"has_state", !optimizer.states().empty()}};
    Json rng = Json::array();
    for (uint64_t w : rng_state) rng.push_back(detail::u64_hex(w));
    header["rng"] = rng;
    header["config"] = config_echo;
    header["tensors"] = dir;
    const std::string header_str = header.dump();

    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("checkpoint: cannot open '" + path.string() + "' for writing");
    out.write(kCheckpointMagic, 8);
    const uint64_t hlen = header_str.size();
    char lenbuf[8];
    for (int i = 0; i < 8; ++i) lenbuf[i] = static_cast<char>((hlen >> (8 * i)) & 0xff);
    out.write(lenbuf, 8);
    out.write(header_str.data(), static_cast<std::streamsize>(header_str.size()));
    for (const auto& [name, tensor] : entries)
        out.write(reinterpret_cast<const char*>(tensor->data()),
                  static_cast<std::streamsize>(sizeof(float) * size_t(tensor->numel())));
    if (!out) throw IoError("checkpoint: short write to '" + path.string() + "'");
}

struct LoadedCheckpoint {
    ModelSpec spec;
    KeypointNet<float> model;
    AdamConfig adam_config;
    int64_t adam_step = 0;
    std::vector<AdamState<float>> adam_states;
    Json config;  // free-form echo stored at save time
    std::array<uint64_t, 4> rng_state{};

    explicit LoadedCheckpoint(const ModelSpec& s) : spec(s), model(s) {}
};

inline LoadedCheckpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("checkpoint: cannot open '" + path.string() + "'");
    char magic[8];
    in.read(magic, 8);
    if (!in || std::memcmp(magic, kCheckpointMagic, 8) != 0)
        throw IoError("checkpoint '" + path.string() + "': bad magic (wrong or corrupt file)");
    char lenbuf[8];
    in.read(lenbuf, 8);
    uint64_t hlen = 0;
    for (int i = 0; i < 8; ++i)
        hlen |= static_cast<uint64_t>(static_cast<unsigned char>(lenbuf[i])) << (8 * i);
    std::string header_str(hlen, '\0');
    in.read(header_str.data(), static_cast<std::streamsize>(hlen));
    if (!in) throw IoError("checkpoint '" + path.string() + "': truncated header");
    Json header = Json::parse(header_str, nullptr, false);
    if (header.is_discarded())
        throw IoError("checkpoint '" + path.string() + "': malformed header JSON");

    LoadedCheckpoint ckpt(model_spec_from_json(header.at("spec"), "checkpoint.spec"));
    const Json& adam = header.at("adam");
    ckpt.adam_config = {adam.at("lr").get<double>(), adam.at("beta1").get<double>(),
                        adam.at("beta2").get<double>(), adam.at("eps").get<double>()};
    ckpt.adam_step = adam.at("step").get<int64_t>();
    for (int i = 0; i < 4; ++i)
        ckpt.rng_state[size_t(i)] =
            detail::hex_u64(header.at("rng").at(size_t(i)).get<std::string>());
    ckpt.config = header.value("config", Json::object());

    std::vector<Tensor<float>*> params = ckpt.model.param_tensors();
    const bool has_state = adam.value("has_state", false);
    if (has_state) ckpt.adam_states.resize(params.size());

    const Json& dir = header.at("tensors");
    const size_t expected = params.size() * (has_state ? 3 : 1);
    if (dir.size() != expected)
        throw IoError("checkpoint '" + path.string() + "': tensor directory size " +
                      std::to_string(dir.size()) + " does not match model");
    for (size_t i = 0; i < dir.size(); ++i) {
        const Json& e = dir[i];
        const auto count = e.at("count").get<int64_t>();
        Tensor<float>* dst = nullptr;
        if (i < params.size()) {
            dst = params[i];
        } else if (i < 2 * params.size()) {
            auto& st = ckpt.adam_states[i - params.size()];
            st.m = Tensor<float>(e.at("shape").get<std::vector<int64_t>>());
            dst = &st.m;
        } else {
            auto& st = ckpt.adam_states[i - 2 * params.size()];
            st.v = Tensor<float>(e.at("shape").get<std::vector<int64_t>>());
            dst = &st.v;
        }
        if (dst->numel() != count)
            throw IoError("checkpoint '" + path.string() + "': tensor '" +
                          e.at("name").get<std::string>() + "' count mismatch");
        in.read(reinterpret_cast<char*>(dst->data()),
                static_cast<std::streamsize>(sizeof(float) * size_t(count)));
        if (!in) throw IoError("checkpoint '" + path.string() + "': truncated tensor data");
    }
    return ckpt;
}

}  // namespace foldkit::nn
