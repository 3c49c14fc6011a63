#pragma once

#include <optional>
#include <vector>

#include "duodet/augment/rng.hpp"
#include "duodet/core/box.hpp"

namespace checks {

using duodet::BoundingBox;
using duodet::RngStream;

struct Scenario {
    std::vector<std::vector<BoundingBox>> preds;
    std::vector<std::vector<BoundingBox>> gts;
};

/// Up to 5 images with up to 6 gt each; predictions are jittered copies plus stray boxes.
inline Scenario random_scenario(RngStream& rng, int num_classes)
{
    auto box = [](double x0, double y0, double x1, double y1, int cls, std::optional<double> score = std::nullopt) {
        return BoundingBox{x0, y0, x1, y1, cls, score};
    };
    Scenario sc;
    const int images = rng.uniform_int(1, 5);
    for (int i = 0; i < images; ++i) {
        std::vector<BoundingBox> g, p;
        const int n = rng.uniform_int(0, 6);
        for (int k = 0; k < n; ++k) {
            const double x = rng.uniform(0, 200), y = rng.uniform(0, 200);
            const double w = rng.uniform(5, 60), h = rng.uniform(5, 60);
            g.push_back(box(x, y, x + w, y + h, rng.uniform_int(0, num_classes - 1)));
            const int copies = rng.uniform_int(0, 2);
            for (int c = 0; c < copies; ++c) {
                const double j = rng.uniform(0, 0.4);
                p.push_back(box(x + j * w * rng.uniform(-1, 1), y + j * h * rng.uniform(-1, 1), x + w, y + h,
                                rng.bernoulli(0.85) ? g.back().class_id : rng.uniform_int(0, num_classes - 1),
                                rng.uniform()));
            }
        }
        const int fp = rng.uniform_int(0, 3);
        for (int k = 0; k < fp; ++k) {
            const double x = rng.uniform(0, 200), y = rng.uniform(0, 200);
            p.push_back(box(x, y, x + rng.uniform(5, 60), y + rng.uniform(5, 60), rng.uniform_int(0, num_classes - 1),
                            rng.uniform()));
        }
        sc.gts.push_back(g);
        sc.preds.push_back(p);
    }
    return sc;
}

}   // namespace checks
