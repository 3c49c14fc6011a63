#pragma once

#include <filesystem>
#include <string>

#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include "duodet/core/error.hpp"
#include "duodet/core/image.hpp"

namespace duodet {

/// Reads a PNG/JPEG as 3-channel RGB (grayscale files are replicated).
inline Image read_rgb(const std::filesystem::path& path)
{
    cv::Mat m = cv::imread(path.string(), cv::IMREAD_COLOR);
    if (m.empty()) {
        throw RuntimeFailure("cannot read image: " + path.string());
    }
    cv::cvtColor(m, m, cv::COLOR_BGR2RGB);
    Image img(m.cols, m.rows, 3);
    for (int y = 0; y < m.rows; ++y) {
        const auto* row = m.ptr<std::uint8_t>(y);
        std::copy(row, row + 3 * m.cols, &img.data[static_cast<std::size_t>(y) * m.cols * 3]);
    }
    return img;
}

/// Reads a PNG/JPEG as one channel. Color files are converted by OpenCV's
/// grayscale conversion; thermal images are normally stored single-channel.
inline Image read_gray(const std::filesystem::path& path)
{
    cv::Mat m = cv::imread(path.string(), cv::IMREAD_GRAYSCALE);
    if (m.empty()) {
        throw RuntimeFailure("cannot read image: " + path.string());
    }
    Image img(m.cols, m.rows, 1);
    for (int y = 0; y < m.rows; ++y) {
        const auto* row = m.ptr<std::uint8_t>(y);
        std::copy(row, row + m.cols, &img.data[static_cast<std::size_t>(y) * m.cols]);
    }
    return img;
}

/// Writes lossless PNG (or whatever the extension selects).
inline void write_image(const std::filesystem::path& path, const Image& img)
{
    if (img.channels != 1 && img.channels != 3) {
        throw ValidationError("only 1 or 3 channel images can be written");
    }
    const int type = img.channels == 3 ? CV_8UC3 : CV_8UC1;
    cv::Mat m(img.height, img.width, type, const_cast<std::uint8_t*>(img.data.data()));
    cv::Mat out = m;
    if (img.channels == 3) {
        cv::cvtColor(m, out, cv::COLOR_RGB2BGR);
    }
    if (path.has_parent_path()) {
        std::filesystem::create_directories(path.parent_path());
    }
    if (!cv::imwrite(path.string(), out)) {
        throw RuntimeFailure("cannot write image: " + path.string());
    }
}

}   // namespace duodet
