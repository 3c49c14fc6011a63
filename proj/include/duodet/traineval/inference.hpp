#pragma once

#include <algorithm>
#include <chrono>
#include <fstream>
#include <string>
#include <thread>
#include <vector>

#include "duodet/augment/geometric.hpp"
#include "duodet/augment/rng.hpp"
#include "duodet/model/checkpoint.hpp"
#include "duodet/model/model.hpp"
#include "duodet/traineval/nms.hpp"

namespace duodet {

/// Detections for one pair in its original pixel frame: auxiliary heads
/// stripped, resize to the training resolution, main head, decode, per-class NMS.
inline std::vector<BoundingBox> infer(const ModelParams<float>& params, const ModelConfig& cfg, int input_size,
                                      const PairedSample& sample)
{
    auto stripped = strip_aux(params);
    const auto s = resize_sample(sample, input_size, input_size);
    const auto raw = predict_raw(stripped, cfg, images_to_tensor<float>({&s.rgb}), images_to_tensor<float>({&s.tir}));
    auto dets = nms(decode(raw, 0, cfg.conf_thresh), cfg.nms_iou);
    const double sx = static_cast<double>(sample.width()) / input_size;
    const double sy = static_cast<double>(sample.height()) / input_size;
    std::vector<BoundingBox> out;
    for (auto b : dets) {
        b.x_min *= sx;
        b.x_max *= sx;
        b.y_min *= sy;
        b.y_max *= sy;
        if (auto c = clip_box(b, sample.width(), sample.height(), 0.0)) {
            out.push_back(*c);
        }
    }
    return out;
}

inline std::vector<BoundingBox> infer(const Checkpoint& ck, const PairedSample& sample)
{
    return infer(ck.params, ck.config, ck.input_size, sample);
}

inline std::string hardware_description()
{
    std::string model = "unknown cpu";
    std::ifstream in("/proc/cpuinfo");
    for (std::string line; std::getline(in, line);) {
        if (line.rfind("model name", 0) == 0) {
            model = line.substr(line.find(':') + 2);
            break;
        }
    }
    return model + ", " + std::to_string(std::max(1u, std::thread::hardware_concurrency())) + " hw threads";
}

struct FpsReport {
    double fps = 0;
    double median_seconds = 0;
    std::string hardware;
};

/// Median single-image end-to-end inference time over `n_iters` runs after
/// `warmup` discarded runs, on a fixed pseudo-random input.
inline FpsReport benchmark_fps(const ModelParams<float>& params, const ModelConfig& cfg, int input_size, int n_iters,
                               int warmup = 1)
{
    if (n_iters < 3) {
        throw ValidationError("benchmark: n_iters must be >= 3");
    }
    if (input_size <= 0 || input_size % 32 != 0) {
        throw ValidationError("benchmark: size must be a positive multiple of 32");
    }
    PairedSample s;
    s.rgb = Image(input_size, input_size, 3);
    s.tir = Image(input_size, input_size, 1);
    RngStream rng(12345);
    for (auto& p : s.rgb.data) {
        p = static_cast<std::uint8_t>(rng.uniform_int(0, 255));
    }
    for (auto& p : s.tir.data) {
        p = static_cast<std::uint8_t>(rng.uniform_int(0, 255));
    }
    std::vector<double> times;
    for (int i = 0; i < warmup + n_iters; ++i) {
        const auto t0 = std::chrono::steady_clock::now();
        auto dets = infer(params, cfg, input_size, s);
        const double dt = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        if (i >= warmup) {
            times.push_back(dt);
        }
    }
    std::sort(times.begin(), times.end());
    const double median = times.size() % 2 ? times[times.size() / 2]
                                           : 0.5 * (times[times.size() / 2 - 1] + times[times.size() / 2]);
    return {1.0 / median, median, hardware_description()};
}

}   // namespace duodet
