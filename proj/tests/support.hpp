#pragma once

#include <filesystem>
#include <fstream>
#include <string>

#include <unistd.h>

#include "duodet/augment/rng.hpp"
#include "duodet/core/sample.hpp"
#include "duodet/model/config.hpp"

namespace testing_support {

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& tag)
    {
        static int counter = 0;
        path_ = std::filesystem::temp_directory_path() /
                ("duodet_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
        std::filesystem::remove_all(path_);
        std::filesystem::create_directories(path_);
    }
    ~TempDir() { std::filesystem::remove_all(path_); }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& s) const { return path_ / s; }

private:
    std::filesystem::path path_;
};

inline void write_text(const std::filesystem::path& p, const std::string& text)
{
    std::filesystem::create_directories(p.parent_path());
    std::ofstream(p) << text;
}

inline duodet::Image random_image(int w, int h, int c, duodet::RngStream& rng)
{
    duodet::Image img(w, h, c);
    for (auto& v : img.data) {
        v = static_cast<std::uint8_t>(rng.uniform_int(0, 255));
    }
    return img;
}

inline duodet::PairedSample random_sample(int w, int h, int n_boxes, duodet::RngStream& rng, int num_classes = 2)
{
    duodet::PairedSample s;
    s.rgb = random_image(w, h, 3, rng);
    s.tir = random_image(w, h, 1, rng);
    for (int i = 0; i < n_boxes; ++i) {
        const double bw = rng.uniform(4, w / 3.0), bh = rng.uniform(4, h / 3.0);
        const double x = rng.uniform(0, w - bw), y = rng.uniform(0, h - bh);
        s.boxes.push_back({x, y, x + bw, y + bh, rng.uniform_int(0, num_classes - 1), std::nullopt});
    }
    return s;
}

/// Small network for gradient and equivalence checks.
inline duodet::ModelConfig tiny_config(int num_classes = 2)
{
    duodet::ModelConfig c;
    c.num_classes = num_classes;
    c.stem_channels = 4;
    c.channels = {8, 8, 8};
    c.blocks_per_stage = 1;
    c.fusion_heads = 2;
    c.head_channels = 4;
    return c;
}

}   // namespace testing_support
