#pragma once

#include <array>
#include <cmath>
#include <vector>

#include "duodet/core/box.hpp"
#include "duodet/core/image.hpp"

namespace duodet {

/// 1-px rectangle outlines, for previews only.
inline Image draw_boxes(Image img, const std::vector<BoundingBox>& boxes, std::array<std::uint8_t, 3> color = {255, 255, 0})
{
    auto put = [&](int x, int y) {
        if (x < 0 || y < 0 || x >= img.width || y >= img.height) {
            return;
        }
        for (int c = 0; c < img.channels; ++c) {
            img.at(y, x, c) = img.channels == 1 ? 255 : color[c];
        }
    };
    for (const auto& b : boxes) {
        const int x0 = static_cast<int>(std::floor(b.x_min)), x1 = static_cast<int>(std::ceil(b.x_max)) - 1;
        const int y0 = static_cast<int>(std::floor(b.y_min)), y1 = static_cast<int>(std::ceil(b.y_max)) - 1;
        for (int x = x0; x <= x1; ++x) {
            put(x, y0);
            put(x, y1);
        }
        for (int y = y0; y <= y1; ++y) {
            put(x0, y);
            put(x1, y);
        }
    }
    return img;
}

}   // namespace duodet
