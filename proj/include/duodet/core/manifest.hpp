#pragma once

#include <filesystem>
#include <fstream>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "duodet/core/box.hpp"
#include "duodet/core/error.hpp"

namespace duodet {

struct ManifestRecord {
    std::string rgb_path;
    std::string tir_path;
    std::vector<BoundingBox> boxes;
    std::string split = "train";
    std::string source;

    friend bool operator==(const ManifestRecord&, const ManifestRecord&) = default;
};

/// Ordered sample list. Serialized as one JSON header line followed by one
/// JSON record per line.
struct DatasetManifest {
    std::vector<ManifestRecord> records;
    int num_classes = 0;
    std::vector<std::string> class_names;

    friend bool operator==(const DatasetManifest&, const DatasetManifest&) = default;
};

inline bool is_valid_split(const std::string& s)
{
    return s == "train" || s == "val" || s == "test";
}

inline nlohmann::json boxes_to_json(const std::vector<BoundingBox>& boxes)
{
    auto arr = nlohmann::json::array();
    for (const auto& b : boxes) {
        arr.push_back({b.x_min, b.y_min, b.x_max, b.y_max, b.class_id});
    }
    return arr;
}

/// Parses `[[x_min,y_min,x_max,y_max,class_id],...]`; throws on shape errors.
inline std::vector<BoundingBox> boxes_from_json(const nlohmann::json& arr)
{
    if (!arr.is_array()) {
        throw ValidationError("boxes must be an array");
    }
    std::vector<BoundingBox> out;
    for (const auto& e : arr) {
        if (!e.is_array() || e.size() != 5) {
            throw ValidationError("box must be [x_min,y_min,x_max,y_max,class_id]");
        }
        for (int k = 0; k < 4; ++k) {
            if (!e[k].is_number()) {
                throw ValidationError("box coordinate is not a number");
            }
        }
        if (!e[4].is_number_integer()) {
            throw ValidationError("class_id must be an integer");
        }
        BoundingBox b{e[0].get<double>(), e[1].get<double>(), e[2].get<double>(), e[3].get<double>(),
                      e[4].get<int>(), std::nullopt};
        out.push_back(b);
    }
    return out;
}

/// Checks one box against the manifest's type invariants. Empty string when valid.
inline std::string box_violation(const BoundingBox& b, int num_classes)
{
    if (!(b.x_min < b.x_max)) {
        return "x_min must be less than x_max";
    }
    if (!(b.y_min < b.y_max)) {
        return "y_min must be less than y_max";
    }
    if (b.class_id < 0 || b.class_id >= num_classes) {
        return "class_id " + std::to_string(b.class_id) + " out of range [0," + std::to_string(num_classes) + ")";
    }
    return {};
}

inline void save_manifest(const DatasetManifest& m, const std::filesystem::path& path)
{
    std::ofstream out(path);
    if (!out) {
        throw RuntimeFailure("cannot write manifest: " + path.string());
    }
    nlohmann::json header{{"num_classes", m.num_classes}, {"class_names", m.class_names}};
    out << header.dump() << '\n';
    for (const auto& r : m.records) {
        nlohmann::json rec{{"rgb_path", r.rgb_path},
                           {"tir_path", r.tir_path},
                           {"boxes", boxes_to_json(r.boxes)},
                           {"split", r.split},
                           {"source", r.source}};
        out << rec.dump() << '\n';
    }
    if (!out) {
        throw RuntimeFailure("failed writing manifest: " + path.string());
    }
}

inline DatasetManifest load_manifest(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) {
        throw ValidationError("manifest not found: " + path.string());
    }
    auto fail = [&](int line, const std::string& what) {
        throw ValidationError(path.string() + ":" + std::to_string(line) + ": " + what);
    };

    DatasetManifest m;
    std::string text;
    int line_no = 0;
    bool have_header = false;
    std::set<std::string> seen;
    const std::set<std::string> record_keys{"rgb_path", "tir_path", "boxes", "split", "source"};
    while (std::getline(in, text)) {
        ++line_no;
        if (text.find_first_not_of(" \t\r") == std::string::npos) {
            continue;
        }
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(text);
        } catch (const nlohmann::json::parse_error& e) {
            fail(line_no, std::string("malformed record: ") + e.what());
        }
        if (!j.is_object()) {
            fail(line_no, "record is not an object");
        }
        if (!have_header) {
            if (!j.contains("num_classes") || !j["num_classes"].is_number_integer()) {
                fail(line_no, "header must carry integer num_classes");
            }
            m.num_classes = j["num_classes"].get<int>();
            if (m.num_classes <= 0) {
                fail(line_no, "num_classes must be positive");
            }
            if (j.contains("class_names")) {
                m.class_names = j["class_names"].get<std::vector<std::string>>();
                if (static_cast<int>(m.class_names.size()) != m.num_classes) {
                    fail(line_no, "class_names length differs from num_classes");
                }
            }
            have_header = true;
            continue;
        }
        for (const auto& [key, _] : j.items()) {
            if (!record_keys.contains(key)) {
                fail(line_no, "unknown field '" + key + "'");
            }
        }
        for (const auto& key : record_keys) {
            if (!j.contains(key)) {
                fail(line_no, "missing field '" + key + "'");
            }
        }
        ManifestRecord r;
        try {
            r.rgb_path = j["rgb_path"].get<std::string>();
            r.tir_path = j["tir_path"].get<std::string>();
            r.split = j["split"].get<std::string>();
            r.source = j["source"].get<std::string>();
            r.boxes = boxes_from_json(j["boxes"]);
        } catch (const nlohmann::json::exception& e) {
            fail(line_no, std::string("malformed record: ") + e.what());
        } catch (const ValidationError& e) {
            fail(line_no, e.what());
        }
        if (!is_valid_split(r.split)) {
            fail(line_no, "split must be train, val or test, got '" + r.split + "'");
        }
        for (std::size_t i = 0; i < r.boxes.size(); ++i) {
            if (auto v = box_violation(r.boxes[i], m.num_classes); !v.empty()) {
                fail(line_no, "boxes[" + std::to_string(i) + "]: " + v);
            }
        }
        if (!seen.insert(r.rgb_path).second || !seen.insert(r.tir_path).second) {
            fail(line_no, "duplicate image path");
        }
        m.records.push_back(std::move(r));
    }
    if (!have_header) {
        throw ValidationError(path.string() + ": missing header line");
    }
    return m;
}

/// Resolves a record path relative to the directory holding the manifest.
inline std::filesystem::path resolve_path(const std::filesystem::path& manifest_path, const std::string& p)
{
    std::filesystem::path q(p);
    if (q.is_absolute()) {
        return q;
    }
    return manifest_path.parent_path() / q;
}

}   // namespace duodet
