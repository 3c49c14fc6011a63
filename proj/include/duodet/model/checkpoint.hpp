#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>

#include <nlohmann/json.hpp>

#include "duodet/core/error.hpp"
#include "duodet/model/config.hpp"
#include "duodet/model/params.hpp"

namespace duodet {

// Container layout (all integers u32 little-endian):
//   "DUODETCK" | version | config_len | config JSON | entry_count |
//   entries: name_len | name | trainable | ndim | dims... | float32 LE data
inline constexpr char kCheckpointMagic[8] = {'D', 'U', 'O', 'D', 'E', 'T', 'C', 'K'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

inline nlohmann::json model_config_to_json(const ModelConfig& c)
{
    return {{"num_classes", c.num_classes},
            {"stem_channels", c.stem_channels},
            {"channels", c.channels},
            {"blocks_per_stage", c.blocks_per_stage},
            {"fusion_heads", c.fusion_heads},
            {"fusion_dim", c.fusion_dim},
            {"head_channels", c.head_channels},
            {"aux_weights", {{"pre", c.aux_weights.pre}, {"post", c.aux_weights.post}}},
            {"conf_thresh", c.conf_thresh},
            {"nms_iou", c.nms_iou}};
}

inline ModelConfig model_config_from_json(const nlohmann::json& j)
{
    ModelConfig c;
    c.num_classes = j.at("num_classes").get<int>();
    c.stem_channels = j.at("stem_channels").get<int>();
    c.channels = j.at("channels").get<std::array<int, 3>>();
    c.blocks_per_stage = j.at("blocks_per_stage").get<int>();
    c.fusion_heads = j.at("fusion_heads").get<int>();
    c.fusion_dim = j.at("fusion_dim").get<int>();
    c.head_channels = j.at("head_channels").get<int>();
    c.aux_weights.pre = j.at("aux_weights").at("pre").get<double>();
    c.aux_weights.post = j.at("aux_weights").at("post").get<double>();
    c.conf_thresh = j.at("conf_thresh").get<double>();
    c.nms_iou = j.at("nms_iou").get<double>();
    return c;
}

namespace detail {

inline void put_u32(std::ostream& out, std::uint32_t v)
{
    const unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                                static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
    out.write(reinterpret_cast<const char*>(b), 4);
}

inline std::uint32_t get_u32(std::istream& in)
{
    unsigned char b[4];
    if (!in.read(reinterpret_cast<char*>(b), 4)) {
        throw ValidationError("checkpoint truncated");
    }
    return b[0] | (b[1] << 8) | (b[2] << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

}   // namespace detail

/// Bytes one entry occupies in the container.
inline std::size_t checkpoint_entry_bytes(const std::string& name, const std::vector<int>& shape)
{
    return 4 + name.size() + 4 + 4 + 4 * shape.size() + 4 * nn::Tensor<float>::count(shape);
}

/// `input_size` is the square training resolution inference should resize to.
template <typename T>
void save_checkpoint(const std::filesystem::path& path, const ModelParams<T>& params, const ModelConfig& cfg,
                     int input_size)
{
    if (path.has_parent_path()) {
        std::filesystem::create_directories(path.parent_path());
    }
    const auto tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary);
        if (!out) {
            throw RuntimeFailure("cannot write checkpoint: " + path.string());
        }
        out.write(kCheckpointMagic, 8);
        detail::put_u32(out, kCheckpointVersion);
        const auto cfg_text = nlohmann::json{{"model", model_config_to_json(cfg)}, {"input_size", input_size}}.dump();
        detail::put_u32(out, static_cast<std::uint32_t>(cfg_text.size()));
        out.write(cfg_text.data(), static_cast<std::streamsize>(cfg_text.size()));
        detail::put_u32(out, static_cast<std::uint32_t>(params.size()));
        for (const auto& e : params.entries()) {
            detail::put_u32(out, static_cast<std::uint32_t>(e.name.size()));
            out.write(e.name.data(), static_cast<std::streamsize>(e.name.size()));
            detail::put_u32(out, e.trainable ? 1u : 0u);
            detail::put_u32(out, static_cast<std::uint32_t>(e.value.shape.size()));
            for (int d : e.value.shape) {
                detail::put_u32(out, static_cast<std::uint32_t>(d));
            }
            for (const T v : e.value.data) {
                detail::put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
            }
        }
        if (!out) {
            throw RuntimeFailure("failed writing checkpoint: " + path.string());
        }
    }
    std::filesystem::rename(tmp, path);
}

struct Checkpoint {
    ModelConfig config;
    int input_size = 0;
    ModelParams<float> params;
};

inline Checkpoint load_checkpoint(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw ValidationError("checkpoint not found: " + path.string());
    }
    char magic[8];
    if (!in.read(magic, 8) || std::memcmp(magic, kCheckpointMagic, 8) != 0) {
        throw ValidationError("not a checkpoint file: " + path.string());
    }
    if (detail::get_u32(in) != kCheckpointVersion) {
        throw ValidationError("unsupported checkpoint version");
    }
    Checkpoint ck;
    std::string cfg_text(detail::get_u32(in), '\0');
    in.read(cfg_text.data(), static_cast<std::streamsize>(cfg_text.size()));
    try {
        const auto j = nlohmann::json::parse(cfg_text);
        ck.config = model_config_from_json(j.at("model"));
        ck.input_size = j.at("input_size").get<int>();
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(std::string("checkpoint config unreadable: ") + e.what());
    }
    const auto count = detail::get_u32(in);
    for (std::uint32_t i = 0; i < count; ++i) {
        std::string name(detail::get_u32(in), '\0');
        in.read(name.data(), static_cast<std::streamsize>(name.size()));
        const bool trainable = detail::get_u32(in) != 0;
        std::vector<int> shape(detail::get_u32(in));
        for (auto& d : shape) {
            d = static_cast<int>(detail::get_u32(in));
        }
        nn::Tensor<float> t(shape);
        for (auto& v : t.data) {
            v = std::bit_cast<float>(detail::get_u32(in));
        }
        ck.params.add(name, std::move(t), trainable);
    }
    if (!in) {
        throw ValidationError("checkpoint truncated: " + path.string());
    }
    return ck;
}

}   // namespace duodet
