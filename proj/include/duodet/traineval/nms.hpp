#pragma once

#include <algorithm>
#include <map>
#include <numeric>
#include <vector>

#include "duodet/core/box.hpp"

namespace duodet {

/// Greedy per-class suppression in descending score order (ties keep the lower
/// index first). A box is suppressed when its IoU with a kept box exceeds
/// `iou_thresh`. Output is sorted by descending score.
inline std::vector<BoundingBox> nms(const std::vector<BoundingBox>& dets, double iou_thresh)
{
    std::vector<std::size_t> order(dets.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](auto a, auto b) { return dets[a].score.value_or(0) > dets[b].score.value_or(0); });
    std::map<int, std::vector<std::size_t>> kept_by_class;
    std::vector<BoundingBox> out;
    for (auto i : order) {
        auto& kept = kept_by_class[dets[i].class_id];
        const bool suppressed =
            std::any_of(kept.begin(), kept.end(), [&](auto k) { return iou(dets[k], dets[i]) > iou_thresh; });
        if (!suppressed) {
            kept.push_back(i);
            out.push_back(dets[i]);
        }
    }
    return out;
}

}   // namespace duodet
