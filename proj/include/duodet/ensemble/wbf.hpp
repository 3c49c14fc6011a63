#pragma once

#include <algorithm>
#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "duodet/core/box.hpp"
#include "duodet/core/error.hpp"
#include "duodet/traineval/detections.hpp"

namespace duodet {

/// Weighted box fusion of per-model detection lists for one image.
///
/// Per class, boxes from all models are visited in descending score order and
/// joined to the existing cluster whose fused box overlaps best (IoU >=
/// `iou_thresh`) and that has no member from the same model yet; otherwise they
/// start a new cluster. The fused box is the (weight * score)-weighted mean of
/// its members; the fused score is the weight-averaged member score times
/// (contributing models / total models).
inline std::vector<BoundingBox> wbf(const std::vector<std::vector<BoundingBox>>& det_sets,
                                    const std::vector<double>& weights, double iou_thresh)
{
    if (det_sets.size() != weights.size()) {
        throw ValidationError("wbf: " + std::to_string(weights.size()) + " weights for " +
                              std::to_string(det_sets.size()) + " models");
    }
    for (double w : weights) {
        if (!(w > 0)) {
            throw ValidationError("wbf: weights must be positive");
        }
    }
    struct Member {
        std::size_t model;
        const BoundingBox* box;
    };
    struct Cluster {
        std::vector<Member> members;
        BoundingBox fused;
    };
    const double total_models = static_cast<double>(det_sets.size());

    auto refit = [&](Cluster& c) {
        double wsum = 0;
        for (const auto& m : c.members) {
            wsum += weights[m.model] * m.box->score.value_or(0.0);
        }
        BoundingBox f = *c.members.front().box;
        f.x_min = f.y_min = f.x_max = f.y_max = 0;
        double lo[4] = {1e300, 1e300, 1e300, 1e300};
        double hi[4] = {-1e300, -1e300, -1e300, -1e300};
        for (const auto& m : c.members) {
            const double a = wsum > 0 ? weights[m.model] * m.box->score.value_or(0.0) / wsum
                                      : 1.0 / static_cast<double>(c.members.size());
            const double v[4] = {m.box->x_min, m.box->y_min, m.box->x_max, m.box->y_max};
            f.x_min += a * v[0];
            f.y_min += a * v[1];
            f.x_max += a * v[2];
            f.y_max += a * v[3];
            for (int k = 0; k < 4; ++k) {
                lo[k] = std::min(lo[k], v[k]);
                hi[k] = std::max(hi[k], v[k]);
            }
        }
        f.x_min = std::clamp(f.x_min, lo[0], hi[0]);
        f.y_min = std::clamp(f.y_min, lo[1], hi[1]);
        f.x_max = std::clamp(f.x_max, lo[2], hi[2]);
        f.y_max = std::clamp(f.y_max, lo[3], hi[3]);
        c.fused = f;
    };

    std::map<int, std::vector<Member>> by_class;
    for (std::size_t m = 0; m < det_sets.size(); ++m) {
        for (const auto& b : det_sets[m]) {
            by_class[b.class_id].push_back({m, &b});
        }
    }
    std::vector<BoundingBox> out;
    for (auto& [cls, members] : by_class) {
        std::stable_sort(members.begin(), members.end(), [](const Member& a, const Member& b) {
            return a.box->score.value_or(0.0) > b.box->score.value_or(0.0);
        });
        std::vector<Cluster> clusters;
        for (const auto& m : members) {
            int best = -1;
            double best_iou = iou_thresh;
            for (std::size_t c = 0; c < clusters.size(); ++c) {
                const auto& cm = clusters[c].members;
                if (std::any_of(cm.begin(), cm.end(), [&](const Member& x) { return x.model == m.model; })) {
                    continue;
                }
                const double v = iou(clusters[c].fused, *m.box);
                if (v >= best_iou && (best < 0 || v > best_iou)) {
                    best = static_cast<int>(c);
                    best_iou = v;
                }
            }
            if (best < 0) {
                clusters.push_back({{m}, *m.box});
            } else {
                clusters[best].members.push_back(m);
                refit(clusters[best]);
            }
        }
        for (auto& c : clusters) {
            double wsum = 0;
            for (const auto& m : c.members) {
                wsum += weights[m.model];
            }
            double score = 0;
            for (const auto& m : c.members) {
                score += weights[m.model] / wsum * m.box->score.value_or(0.0);
            }
            score *= static_cast<double>(c.members.size()) / total_models;
            BoundingBox f = c.fused;
            f.class_id = cls;
            f.score = std::min(score, 1.0);
            out.push_back(f);
        }
    }
    std::stable_sort(out.begin(), out.end(),
                     [](const auto& a, const auto& b) { return a.score.value_or(0) > b.score.value_or(0); });
    return out;
}

struct EnsembleStats {
    std::size_t images = 0;
    std::size_t boxes_in = 0;
    std::size_t boxes_out = 0;
    int image_mismatches = 0;   // images absent from at least one input
};

/// Fuses detection files image by image; every image id present in any input
/// appears in the output (in id order).
inline EnsembleStats ensemble_run(const std::vector<std::filesystem::path>& det_files,
                                  const std::vector<double>& weights, double iou_thresh,
                                  const std::filesystem::path& out_path)
{
    if (det_files.size() != weights.size()) {
        throw ValidationError("ensemble: " + std::to_string(weights.size()) + " weights for " +
                              std::to_string(det_files.size()) + " inputs");
    }
    if (det_files.empty()) {
        throw ValidationError("ensemble: no inputs");
    }
    std::vector<std::map<std::string, std::vector<BoundingBox>>> per_model;
    std::set<std::string> ids;
    EnsembleStats stats;
    for (const auto& f : det_files) {
        auto dets = read_detections(f);
        stats.boxes_in += dets.size();
        per_model.push_back(group_by_image(dets));
        for (const auto& [id, _] : per_model.back()) {
            ids.insert(id);
        }
    }
    std::vector<Detection> out;
    for (const auto& id : ids) {
        std::vector<std::vector<BoundingBox>> sets;
        for (const auto& m : per_model) {
            auto it = m.find(id);
            if (it == m.end()) {
                sets.emplace_back();
                if (!m.empty()) {
                    ++stats.image_mismatches;
                }
            } else {
                sets.push_back(it->second);
            }
        }
        for (auto& b : wbf(sets, weights, iou_thresh)) {
            out.push_back({id, b});
        }
        ++stats.images;
    }
    stats.boxes_out = out.size();
    write_detections(out_path, out);
    return stats;
}

}   // namespace duodet
