// Presentation layer, automatic part: SSIM over rendered chart images.
#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <vector>

#include "evallm/level_score.hpp"

namespace evallm {

struct GrayImage {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> pixels;  // row-major

  GrayImage() = default;
  GrayImage(int width, int height, std::uint8_t fill = 0);

  std::uint8_t at(int x, int y) const { return pixels[static_cast<std::size_t>(y) * width + x]; }
  std::uint8_t& at(int x, int y) { return pixels[static_cast<std::size_t>(y) * width + x]; }

  friend bool operator==(const GrayImage&, const GrayImage&) = default;
};

class ImageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Decodes a PNG to 8-bit luma (Rec.601), alpha composited over white.
GrayImage load_gray(const std::filesystem::path& path);

/// 8-bit RGBA, row-major, 4 bytes per pixel.
void write_rgba_png(const std::filesystem::path& path, int width, int height, const std::vector<std::uint8_t>& rgba);
void write_gray_png(const std::filesystem::path& path, const GrayImage& image);

GrayImage resample_bilinear(const GrayImage& source, int width, int height);

struct SsimParameters {
  int window = 11;
  double sigma = 1.5;
  double k1 = 0.01;
  double k2 = 0.03;
  double dynamic_range = 255.0;
};

/// Normalized window x window Gaussian weights, row-major.
std::vector<double> gaussian_window(const SsimParameters& parameters = {});

/// Mean SSIM over all valid (fully inside) windows. Images must share
/// dimensions and be at least window x window.
double mean_ssim(const GrayImage& a, const GrayImage& b, const SsimParameters& parameters = {});

/// clamp(mean SSIM, 0, 1) * 100; gen is resampled to gt's size when they
/// differ. Throws ImageError when either image is smaller than the window.
LevelScore ssim_score(const GrayImage& gt, const GrayImage& gen, const SsimParameters& parameters = {});

}  // namespace evallm
