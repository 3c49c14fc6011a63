#pragma once

#include <filesystem>
#include <fstream>
#include <set>
#include <string>

#include <nlohmann/json.hpp>

#include "duodet/core/error.hpp"
#include "duodet/model/checkpoint.hpp"
#include "duodet/traineval/config.hpp"

namespace duodet {

inline nlohmann::json range_to_json(const Range& r)
{
    return nlohmann::json::array({r.lo, r.hi});
}

inline nlohmann::json augment_config_to_json(const AugmentConfig& c)
{
    return {{"p_rotate", c.p_rotate},
            {"rotate_range", range_to_json(c.rotate_range)},
            {"p_shift", c.p_shift},
            {"shift_range", range_to_json(c.shift_range)},
            {"p_noise", c.p_noise},
            {"noise_sigma", c.noise_sigma},
            {"p_brightness", c.p_brightness},
            {"brightness_range", range_to_json(c.brightness_range)},
            {"p_edge", c.p_edge},
            {"edge_strength", range_to_json(c.edge_strength)},
            {"p_blur", c.p_blur},
            {"blur_sigma_range", range_to_json(c.blur_sigma_range)},
            {"p_mosaic", c.p_mosaic},
            {"p_one_sided", c.p_one_sided},
            {"min_area_frac", c.min_area_frac},
            {"global_seed", c.global_seed}};
}

/// Effective configuration, every field spelled out (the run-log echo).
inline nlohmann::json train_config_to_json(const TrainConfig& c)
{
    return {{"manifest", c.manifest},
            {"epochs", c.epochs},
            {"batch_size", c.batch_size},
            {"learning_rate", c.learning_rate},
            {"momentum", c.momentum},
            {"weight_decay", c.weight_decay},
            {"seed", c.seed},
            {"input_size", c.input_size},
            {"max_steps", c.max_steps},
            {"checkpoint_dir", c.checkpoint_dir},
            {"aug", augment_config_to_json(c.aug)},
            {"model", model_config_to_json(c.model)}};
}

namespace detail {

/// Reads known keys of one JSON object into fields; anything else is an error.
class StrictObject {
public:
    StrictObject(const nlohmann::json& j, std::string prefix) : j_(j), prefix_(std::move(prefix))
    {
        if (!j_.is_object()) {
            throw ValidationError((prefix_.empty() ? std::string("config") : prefix_) + " must be an object");
        }
    }

    template <typename V>
    void read(const std::string& key, V& field)
    {
        known_.insert(key);
        if (!j_.contains(key)) {
            return;
        }
        try {
            field = j_.at(key).get<V>();
        } catch (const nlohmann::json::exception&) {
            throw ValidationError("config key '" + path(key) + "' has the wrong type");
        }
    }

    void read(const std::string& key, Range& r)
    {
        std::array<double, 2> v{r.lo, r.hi};
        read(key, v);
        r = {v[0], v[1]};
    }

    bool has(const std::string& key) const { return j_.contains(key); }

    const nlohmann::json* child(const std::string& key)
    {
        known_.insert(key);
        return j_.contains(key) ? &j_.at(key) : nullptr;
    }

    std::string path(const std::string& key) const { return prefix_.empty() ? key : prefix_ + "." + key; }

    void reject_unknown() const
    {
        for (const auto& [key, _] : j_.items()) {
            if (!known_.contains(key)) {
                throw ValidationError("unknown config key '" + path(key) + "'");
            }
        }
    }

private:
    const nlohmann::json& j_;
    std::string prefix_;
    std::set<std::string> known_;
};

}   // namespace detail

/// Parses and validates a training config. Unknown keys are errors; missing
/// keys take defaults. A relative `manifest` is resolved against the config's
/// directory. `aug.global_seed` defaults to `seed`.
inline TrainConfig parse_config_json(const nlohmann::json& j, const std::filesystem::path& base_dir = {})
{
    TrainConfig c;
    detail::StrictObject top(j, "");
    if (!top.has("manifest")) {
        throw ValidationError("config key 'manifest' is required");
    }
    top.read("manifest", c.manifest);
    top.read("epochs", c.epochs);
    top.read("batch_size", c.batch_size);
    top.read("learning_rate", c.learning_rate);
    top.read("momentum", c.momentum);
    top.read("weight_decay", c.weight_decay);
    top.read("seed", c.seed);
    top.read("input_size", c.input_size);
    top.read("max_steps", c.max_steps);
    top.read("checkpoint_dir", c.checkpoint_dir);
    c.aug.global_seed = c.seed;
    if (const auto* a = top.child("aug")) {
        detail::StrictObject aug(*a, "aug");
        aug.read("p_rotate", c.aug.p_rotate);
        aug.read("rotate_range", c.aug.rotate_range);
        aug.read("p_shift", c.aug.p_shift);
        aug.read("shift_range", c.aug.shift_range);
        aug.read("p_noise", c.aug.p_noise);
        aug.read("noise_sigma", c.aug.noise_sigma);
        aug.read("p_brightness", c.aug.p_brightness);
        aug.read("brightness_range", c.aug.brightness_range);
        aug.read("p_edge", c.aug.p_edge);
        aug.read("edge_strength", c.aug.edge_strength);
        aug.read("p_blur", c.aug.p_blur);
        aug.read("blur_sigma_range", c.aug.blur_sigma_range);
        aug.read("p_mosaic", c.aug.p_mosaic);
        aug.read("p_one_sided", c.aug.p_one_sided);
        aug.read("min_area_frac", c.aug.min_area_frac);
        aug.read("global_seed", c.aug.global_seed);
        aug.reject_unknown();
    }
    if (const auto* m = top.child("model")) {
        detail::StrictObject model(*m, "model");
        model.read("num_classes", c.model.num_classes);
        model.read("stem_channels", c.model.stem_channels);
        model.read("channels", c.model.channels);
        model.read("blocks_per_stage", c.model.blocks_per_stage);
        model.read("fusion_heads", c.model.fusion_heads);
        model.read("fusion_dim", c.model.fusion_dim);
        model.read("head_channels", c.model.head_channels);
        if (const auto* w = model.child("aux_weights")) {
            detail::StrictObject aux(*w, "model.aux_weights");
            aux.read("pre", c.model.aux_weights.pre);
            aux.read("post", c.model.aux_weights.post);
            aux.reject_unknown();
        }
        model.read("conf_thresh", c.model.conf_thresh);
        model.read("nms_iou", c.model.nms_iou);
        model.reject_unknown();
    }
    top.reject_unknown();
    if (!c.manifest.empty() && !base_dir.empty() && std::filesystem::path(c.manifest).is_relative()) {
        c.manifest = (base_dir / c.manifest).lexically_normal().string();
    }
    validate(c);
    return c;
}

inline TrainConfig parse_config(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) {
        throw ValidationError("config not found: " + path.string());
    }
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw ValidationError("config " + path.string() + " is not valid JSON: " + e.what());
    }
    return parse_config_json(j, path.parent_path());
}

}   // namespace duodet
