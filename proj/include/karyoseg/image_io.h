#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "karyoseg/image.h"

namespace karyoseg {

/// Interleaved 8-bit RGB, used only for overlays and exported figures.
struct RgbImage {
    RgbImage(int w, int h, std::uint8_t fill = 255)
        : width(w), height(h), data(static_cast<std::size_t>(w) * h * 3, fill) {}
    explicit RgbImage(const GrayImage& gray);

    void set(int x, int y, std::uint8_t r, std::uint8_t g, std::uint8_t b) {
        auto* px = &data[(static_cast<std::size_t>(y) * width + x) * 3];
        px[0] = r;
        px[1] = g;
        px[2] = b;
    }

    int width;
    int height;
    std::vector<std::uint8_t> data;
};

/// Luminance conversion: Y = (299 R + 587 G + 114 B + 500) / 1000 (BT.601 weights).
std::uint8_t luminance(std::uint8_t r, std::uint8_t g, std::uint8_t b);

/// Decodes PNG or TIFF (sniffed by signature). Color inputs are converted by
/// `luminance`, alpha is composited over white, 16-bit samples are scaled to 8.
/// Throws Decode on malformed or unsupported data.
GrayImage decode_image(std::span<const std::uint8_t> bytes);
GrayImage read_image(const std::filesystem::path& path);

std::vector<std::uint8_t> encode_png(const GrayImage& img);
std::vector<std::uint8_t> encode_png(const RgbImage& img);
/// 8-bit grayscale PNG; also accepts label-free 3-channel figures via RgbImage.
void write_png(const std::filesystem::path& path, const GrayImage& img);
void write_png(const std::filesystem::path& path, const RgbImage& img);
void write_tiff(const std::filesystem::path& path, const GrayImage& img);

std::vector<std::uint8_t> read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);
void write_text(const std::filesystem::path& path, const std::string& text);

}  // namespace karyoseg
