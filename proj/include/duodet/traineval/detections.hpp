#pragma once

#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "duodet/core/box.hpp"
#include "duodet/core/error.hpp"

namespace duodet {

struct Detection {
    std::string image_id;
    BoundingBox box;

    friend bool operator==(const Detection&, const Detection&) = default;
};

/// One JSON object per line:
/// {"image_id","x_min","y_min","x_max","y_max","class_id","score"}.
inline void write_detections(const std::filesystem::path& path, const std::vector<Detection>& dets)
{
    if (path.has_parent_path()) {
        std::filesystem::create_directories(path.parent_path());
    }
    std::ofstream out(path);
    if (!out) {
        throw RuntimeFailure("cannot write detections: " + path.string());
    }
    for (const auto& d : dets) {
        nlohmann::json j{{"image_id", d.image_id},     {"x_min", d.box.x_min},       {"y_min", d.box.y_min},
                         {"x_max", d.box.x_max},       {"y_max", d.box.y_max},       {"class_id", d.box.class_id},
                         {"score", d.box.score.value_or(0.0)}};
        out << j.dump() << '\n';
    }
}

inline std::vector<Detection> read_detections(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) {
        throw ValidationError("cannot read detections: " + path.string());
    }
    std::vector<Detection> out;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) {
            continue;
        }
        try {
            const auto j = nlohmann::json::parse(line);
            Detection d;
            d.image_id = j.at("image_id").get<std::string>();
            d.box = {j.at("x_min").get<double>(), j.at("y_min").get<double>(), j.at("x_max").get<double>(),
                     j.at("y_max").get<double>(), j.at("class_id").get<int>(), j.at("score").get<double>()};
            out.push_back(d);
        } catch (const nlohmann::json::exception& e) {
            throw ValidationError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
        }
    }
    return out;
}

/// Groups detections by image id (sorted by id, input order kept within an image).
inline std::map<std::string, std::vector<BoundingBox>> group_by_image(const std::vector<Detection>& dets)
{
    std::map<std::string, std::vector<BoundingBox>> out;
    for (const auto& d : dets) {
        out[d.image_id].push_back(d.box);
    }
    return out;
}

}   // namespace duodet
