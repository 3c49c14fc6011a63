#pragma once

#include <filesystem>
#include <vector>

#include "duodet/augment/geometric.hpp"
#include "duodet/core/image_io.hpp"
#include "duodet/core/manifest.hpp"
#include "duodet/core/sample.hpp"

namespace duodet {

inline PairedSample load_sample(const std::filesystem::path& manifest_path, const ManifestRecord& r)
{
    PairedSample s;
    s.rgb = read_rgb(resolve_path(manifest_path, r.rgb_path));
    s.tir = read_gray(resolve_path(manifest_path, r.tir_path));
    s.boxes = r.boxes;
    s.meta = {r.source, r.rgb_path, r.tir_path, r.split};
    if (!s.rgb.same_size(s.tir)) {
        throw ValidationError("rgb/tir size mismatch for " + r.rgb_path);
    }
    return s;
}

/// Records of one split, or all records when `split` is empty.
inline std::vector<PairedSample> load_samples(const std::filesystem::path& manifest_path, const DatasetManifest& m,
                                              const std::string& split = {})
{
    std::vector<PairedSample> out;
    for (const auto& r : m.records) {
        if (split.empty() || r.split == split) {
            out.push_back(load_sample(manifest_path, r));
        }
    }
    return out;
}

/// Image id used in detection files: the RGB file stem.
inline std::string image_id_of(const std::string& rgb_path)
{
    return std::filesystem::path(rgb_path).stem().string();
}

}   // namespace duodet
