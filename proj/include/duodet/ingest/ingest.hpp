#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "duodet/core/box.hpp"
#include "duodet/core/error.hpp"
#include "duodet/core/image.hpp"
#include "duodet/core/image_io.hpp"
#include "duodet/core/manifest.hpp"
#include "duodet/core/sample.hpp"

namespace duodet {

inline constexpr double kDefaultMinAreaFrac = 0.25;

/// Square crop window inside a source image.
struct CropRect {
    int x = 0;
    int y = 0;
    int size = 0;

    friend bool operator==(const CropRect&, const CropRect&) = default;
};

namespace detail {

// Evenly spaced origins along one axis; the first and last windows touch the
// image edges, a lone window is centered.
inline std::vector<int> crop_origins(int extent, int size)
{
    const int n = std::max(1, extent / size);
    std::vector<int> out;
    if (n == 1) {
        out.push_back(static_cast<int>(std::nearbyint((extent - size) / 2.0)));
        return out;
    }
    for (int i = 0; i < n; ++i) {
        out.push_back(static_cast<int>(std::nearbyint(static_cast<double>(i) * (extent - size) / (n - 1))));
    }
    return out;
}

}   // namespace detail

/// Maximum number of non-resized square crops that fit along each side, spread to
/// cover the whole image. Row-major order.
inline std::vector<CropRect> compute_crop_grid(int width, int height, int size)
{
    if (width <= 0 || height <= 0 || size <= 0) {
        throw ValidationError("compute_crop_grid: width, height and crop size must be positive");
    }
    if (size > std::min(width, height)) {
        return {CropRect{0, 0, std::min(width, height)}};
    }
    const auto xs = detail::crop_origins(width, size);
    const auto ys = detail::crop_origins(height, size);
    std::vector<CropRect> out;
    out.reserve(xs.size() * ys.size());
    for (int y : ys) {
        for (int x : xs) {
            out.push_back({x, y, size});
        }
    }
    return out;
}

/// Crops both modalities to `r`. Returns nothing when no box survives clipping.
inline std::optional<PairedSample> crop_sample(const PairedSample& s, const CropRect& r,
                                               double min_area_frac = kDefaultMinAreaFrac)
{
    if (r.x < 0 || r.y < 0 || r.size <= 0 || r.x + r.size > s.width() || r.y + r.size > s.height()) {
        throw ValidationError("crop_sample: crop rect out of bounds");
    }
    PairedSample out;
    out.rgb = crop_image(s.rgb, r.x, r.y, r.size, r.size);
    out.tir = crop_image(s.tir, r.x, r.y, r.size, r.size);
    out.meta = s.meta;
    for (const auto& b : s.boxes) {
        BoundingBox t = b;
        t.x_min -= r.x;
        t.x_max -= r.x;
        t.y_min -= r.y;
        t.y_max -= r.y;
        if (auto c = clip_box(t, r.size, r.size, min_area_frac)) {
            out.boxes.push_back(*c);
        }
    }
    if (out.boxes.empty()) {
        return std::nullopt;
    }
    return out;
}

/// BT.601 luma, rounded half-to-even and clamped to 8 bits.
inline Image synthesize_tir(const Image& rgb)
{
    if (rgb.channels != 3) {
        throw ValidationError("synthesize_tir: expected a 3-channel image");
    }
    Image out(rgb.width, rgb.height, 1);
    const std::size_t n = static_cast<std::size_t>(rgb.width) * rgb.height;
    for (std::size_t i = 0; i < n; ++i) {
        const double y = 0.299 * rgb.data[3 * i] + 0.587 * rgb.data[3 * i + 1] + 0.114 * rgb.data[3 * i + 2];
        out.data[i] = saturate_u8(y);
    }
    return out;
}

// Toy dataset layout read by the importers:
//   DIR/classes.txt           one class name per line
//   DIR/rgb/<stem>.png|jpg    visible images
//   DIR/tir/<stem>.png|jpg    thermal images (paired layout only)
//   DIR/labels/<stem>.json    [[x_min,y_min,x_max,y_max,class_id],...]; missing file = no objects
namespace detail {

inline bool is_image_file(const std::filesystem::path& p)
{
    auto ext = p.extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
    return ext == ".png" || ext == ".jpg" || ext == ".jpeg";
}

inline std::map<std::string, std::filesystem::path> images_by_stem(const std::filesystem::path& dir)
{
    std::map<std::string, std::filesystem::path> out;
    if (!std::filesystem::is_directory(dir)) {
        return out;
    }
    for (const auto& e : std::filesystem::directory_iterator(dir)) {
        if (e.is_regular_file() && is_image_file(e.path())) {
            out[e.path().stem().string()] = e.path();
        }
    }
    return out;
}

inline std::vector<std::string> read_class_names(const std::filesystem::path& dir)
{
    std::ifstream in(dir / "classes.txt");
    if (!in) {
        throw ValidationError("missing classes.txt in " + dir.string());
    }
    std::vector<std::string> names;
    for (std::string line; std::getline(in, line);) {
        while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) {
            line.pop_back();
        }
        if (!line.empty()) {
            names.push_back(line);
        }
    }
    if (names.empty()) {
        throw ValidationError("classes.txt lists no classes");
    }
    return names;
}

inline std::vector<BoundingBox> read_labels(const std::filesystem::path& dir, const std::string& stem, int num_classes)
{
    const auto path = dir / "labels" / (stem + ".json");
    if (!std::filesystem::exists(path)) {
        return {};
    }
    std::ifstream in(path);
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw ValidationError(path.string() + ": " + e.what());
    }
    std::vector<BoundingBox> boxes;
    try {
        boxes = boxes_from_json(j);
    } catch (const ValidationError& e) {
        throw ValidationError(path.string() + ": " + e.what());
    }
    for (const auto& b : boxes) {
        if (b.class_id < 0 || b.class_id >= num_classes) {
            throw ValidationError(path.string() + ": annotation references missing class " +
                                  std::to_string(b.class_id));
        }
    }
    return boxes;
}

inline std::string path_for_manifest(const std::filesystem::path& p, const std::filesystem::path& base)
{
    if (base.empty()) {
        return std::filesystem::absolute(p).lexically_normal().string();
    }
    return std::filesystem::absolute(p).lexically_normal().lexically_relative(
        std::filesystem::absolute(base).lexically_normal()).string();
}

}   // namespace detail

/// Imports a paired RGB/TIR directory. Record paths are written relative to
/// `manifest_dir` when given, absolute otherwise.
inline DatasetManifest import_paired(const std::filesystem::path& dir, const std::string& format_tag = "toy",
                                     const std::filesystem::path& manifest_dir = {})
{
    if (format_tag != "toy") {
        throw ValidationError("import_paired: unsupported format '" + format_tag + "'");
    }
    const auto rgb = detail::images_by_stem(dir / "rgb");
    const auto tir = detail::images_by_stem(dir / "tir");
    if (rgb.empty() && tir.empty()) {
        throw ValidationError("no pairs found in " + dir.string());
    }
    std::vector<std::string> unmatched;
    for (const auto& [stem, _] : rgb) {
        if (!tir.contains(stem)) {
            unmatched.push_back(stem);
        }
    }
    for (const auto& [stem, _] : tir) {
        if (!rgb.contains(stem)) {
            unmatched.push_back(stem);
        }
    }
    if (!unmatched.empty()) {
        std::string list;
        for (const auto& s : unmatched) {
            list += (list.empty() ? "" : ", ") + s;
        }
        throw ValidationError("unmatched stems: " + list);
    }

    DatasetManifest m;
    m.class_names = detail::read_class_names(dir);
    m.num_classes = static_cast<int>(m.class_names.size());
    for (const auto& [stem, rgb_path] : rgb) {
        PairedSample s;
        s.rgb = read_rgb(rgb_path);
        s.tir = read_gray(tir.at(stem));
        s.boxes = detail::read_labels(dir, stem, m.num_classes);
        if (auto v = validate_sample(s, m.num_classes); !v.empty()) {
            throw ValidationError("pair '" + stem + "' invalid: " + v.front());
        }
        m.records.push_back({detail::path_for_manifest(rgb_path, manifest_dir),
                             detail::path_for_manifest(tir.at(stem), manifest_dir), s.boxes, "train", "paired"});
    }
    return m;
}

/// Grid-crops every RGB image, drops object-free crops, synthesizes TIR from
/// luma, and writes crops to `out_dir/rgb` and `out_dir/tir`. Record paths are
/// relative to `out_dir`.
inline DatasetManifest import_rgb_only(const std::filesystem::path& dir, int crop_size,
                                       const std::filesystem::path& out_dir,
                                       double min_area_frac = kDefaultMinAreaFrac)
{
    const auto rgb = detail::images_by_stem(dir / "rgb");
    if (rgb.empty()) {
        throw ValidationError("no images found in " + (dir / "rgb").string());
    }
    DatasetManifest m;
    m.class_names = detail::read_class_names(dir);
    m.num_classes = static_cast<int>(m.class_names.size());
    std::filesystem::create_directories(out_dir / "rgb");
    std::filesystem::create_directories(out_dir / "tir");

    for (const auto& [stem, path] : rgb) {
        PairedSample s;
        s.rgb = read_rgb(path);
        s.tir = Image(s.rgb.width, s.rgb.height, 1);
        s.boxes = detail::read_labels(dir, stem, m.num_classes);
        for (const auto& r : compute_crop_grid(s.width(), s.height(), crop_size)) {
            auto c = crop_sample(s, r, min_area_frac);
            if (!c) {
                continue;
            }
            c->tir = synthesize_tir(c->rgb);
            const std::string name = stem + "_y" + std::to_string(r.y) + "_x" + std::to_string(r.x) + ".png";
            write_image(out_dir / "rgb" / name, c->rgb);
            write_image(out_dir / "tir" / name, c->tir);
            m.records.push_back({"rgb/" + name, "tir/" + name, c->boxes, "train", "synthetic-tir"});
        }
    }
    return m;
}

}   // namespace duodet
