#pragma once

#include <algorithm>
#include <chrono>
#include <map>
#include <numeric>
#include <vector>

#include "duodet/core/box.hpp"
#include "duodet/core/error.hpp"

namespace duodet {

struct ClassCounts {
    int tp = 0;
    int fp = 0;
    int fn = 0;
};

/// Per-class AP at one IoU threshold. Classes without ground truth carry no AP
/// and are excluded from the mean.
struct EvalReport {
    double iou_thresh = 0.5;
    std::map<int, double> ap;
    std::map<int, ClassCounts> counts;
    double map = 0.0;
    double seconds = 0.0;
};

/// 101-point interpolated AP of a ranked detection list. `tp_flags` follows
/// descending score order; `num_gt` > 0.
inline double interpolated_ap(const std::vector<bool>& tp_flags, int num_gt)
{
    const std::size_t n = tp_flags.size();
    std::vector<double> precision(n);
    std::vector<double> recall(n);
    int tp = 0;
    for (std::size_t k = 0; k < n; ++k) {
        tp += tp_flags[k] ? 1 : 0;
        precision[k] = static_cast<double>(tp) / static_cast<double>(k + 1);
        recall[k] = static_cast<double>(tp) / static_cast<double>(num_gt);
    }
    // Max precision at this or any higher recall.
    for (std::size_t k = n; k-- > 1;) {
        precision[k - 1] = std::max(precision[k - 1], precision[k]);
    }
    double sum = 0.0;
    for (int i = 0; i <= 100; ++i) {
        const double r = i / 100.0;
        const auto it = std::lower_bound(recall.begin(), recall.end(), r);
        if (it != recall.end()) {
            sum += precision[static_cast<std::size_t>(it - recall.begin())];
        }
    }
    return sum / 101.0;
}

/// mAP over images: per class, detections ranked by score; each one matches the
/// unmatched ground truth of its image with the highest IoU >= `iou_thresh`.
inline EvalReport evaluate_map(const std::vector<std::vector<BoundingBox>>& preds,
                               const std::vector<std::vector<BoundingBox>>& gts, int num_classes,
                               double iou_thresh = 0.5)
{
    const auto start = std::chrono::steady_clock::now();
    if (preds.size() != gts.size()) {
        throw ValidationError("evaluate_map: " + std::to_string(preds.size()) + " prediction lists for " +
                              std::to_string(gts.size()) + " images");
    }
    auto check = [&](const BoundingBox& b) {
        if (b.class_id < 0 || b.class_id >= num_classes) {
            throw ValidationError("evaluate_map: class id " + std::to_string(b.class_id) + " outside [0," +
                                  std::to_string(num_classes) + ")");
        }
    };
    std::vector<int> num_gt(num_classes, 0);
    for (const auto& g : gts) {
        for (const auto& b : g) {
            check(b);
            ++num_gt[b.class_id];
        }
    }
    for (const auto& p : preds) {
        for (const auto& b : p) {
            check(b);
        }
    }

    EvalReport report;
    report.iou_thresh = iou_thresh;
    struct Ranked {
        double score;
        std::size_t image;
        std::size_t index;
    };
    double ap_sum = 0.0;
    int classes_with_gt = 0;
    for (int c = 0; c < num_classes; ++c) {
        std::vector<Ranked> ranked;
        for (std::size_t i = 0; i < preds.size(); ++i) {
            for (std::size_t k = 0; k < preds[i].size(); ++k) {
                if (preds[i][k].class_id == c) {
                    ranked.push_back({preds[i][k].score.value_or(0.0), i, k});
                }
            }
        }
        std::stable_sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) { return a.score > b.score; });

        std::vector<std::vector<bool>> matched(gts.size());
        for (std::size_t i = 0; i < gts.size(); ++i) {
            matched[i].assign(gts[i].size(), false);
        }
        std::vector<bool> flags;
        ClassCounts counts;
        for (const auto& r : ranked) {
            const auto& det = preds[r.image][r.index];
            int best = -1;
            double best_iou = iou_thresh;
            for (std::size_t g = 0; g < gts[r.image].size(); ++g) {
                const auto& gt = gts[r.image][g];
                if (gt.class_id != c || matched[r.image][g]) {
                    continue;
                }
                const double v = iou(det, gt);
                if (v >= best_iou && (best < 0 || v > best_iou)) {
                    best = static_cast<int>(g);
                    best_iou = v;
                }
            }
            if (best >= 0) {
                matched[r.image][best] = true;
                ++counts.tp;
                flags.push_back(true);
            } else {
                ++counts.fp;
                flags.push_back(false);
            }
        }
        counts.fn = num_gt[c] - counts.tp;
        if (num_gt[c] > 0 || !ranked.empty()) {
            report.counts[c] = counts;
        }
        if (num_gt[c] > 0) {
            const double ap = interpolated_ap(flags, num_gt[c]);
            report.ap[c] = ap;
            ap_sum += ap;
            ++classes_with_gt;
        }
    }
    report.map = classes_with_gt ? ap_sum / classes_with_gt : 0.0;
    report.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return report;
}

}   // namespace duodet
