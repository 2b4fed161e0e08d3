#include "evallm/image_similarity.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <string>

namespace evallm {

namespace fs = std::filesystem;

namespace {

std::vector<double> gaussian_1d(const SsimParameters& parameters) {
  std::vector<double> weights(static_cast<std::size_t>(parameters.window));
  const double center = (parameters.window - 1) / 2.0;
  double sum = 0;
  for (int k = 0; k < parameters.window; ++k) {
    const double d = k - center;
    weights[static_cast<std::size_t>(k)] = std::exp(-(d * d) / (2.0 * parameters.sigma * parameters.sigma));
    sum += weights[static_cast<std::size_t>(k)];
  }
  for (double& w : weights) w /= sum;
  return weights;
}

// "Valid" separable filtering: output is (W - n + 1) x (H - n + 1).
std::vector<double> filter_valid(const std::vector<double>& input, int width, int height,
                                 const std::vector<double>& kernel) {
  const int n = static_cast<int>(kernel.size());
  const int out_w = width - n + 1;
  const int out_h = height - n + 1;
  std::vector<double> horizontal(static_cast<std::size_t>(out_w) * height);
  for (int y = 0; y < height; ++y) {
    const double* row = input.data() + static_cast<std::size_t>(y) * width;
    for (int x = 0; x < out_w; ++x) {
      double acc = 0;
      for (int k = 0; k < n; ++k) acc += kernel[static_cast<std::size_t>(k)] * row[x + k];
      horizontal[static_cast<std::size_t>(y) * out_w + x] = acc;
    }
  }
  std::vector<double> out(static_cast<std::size_t>(out_w) * out_h);
  for (int y = 0; y < out_h; ++y) {
    for (int x = 0; x < out_w; ++x) {
      double acc = 0;
      for (int k = 0; k < n; ++k) acc += kernel[static_cast<std::size_t>(k)] * horizontal[static_cast<std::size_t>(y + k) * out_w + x];
      out[static_cast<std::size_t>(y) * out_w + x] = acc;
    }
  }
  return out;
}

void check_window_fits(const GrayImage& image, const SsimParameters& parameters, const char* which) {
  if (image.width < parameters.window || image.height < parameters.window) {
    throw ImageError(std::string(which) + " image is " + std::to_string(image.width) + "x" +
                     std::to_string(image.height) + ", smaller than the " + std::to_string(parameters.window) + "x" +
                     std::to_string(parameters.window) + " SSIM window");
  }
}

}  // namespace

GrayImage::GrayImage(int w, int h, std::uint8_t fill)
    : width(w), height(h), pixels(static_cast<std::size_t>(w) * static_cast<std::size_t>(h), fill) {}

GrayImage load_gray(const fs::path& path) {
  png_image image;
  std::memset(&image, 0, sizeof(image));
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&image, path.c_str())) {
    throw ImageError("cannot decode PNG " + path.string() + ": " + image.message);
  }
  image.format = PNG_FORMAT_RGBA;
  std::vector<std::uint8_t> rgba(PNG_IMAGE_SIZE(image));
  if (!png_image_finish_read(&image, nullptr, rgba.data(), 0, nullptr)) {
    const std::string message = image.message;
    png_image_free(&image);
    throw ImageError("cannot decode PNG " + path.string() + ": " + message);
  }

  GrayImage gray(static_cast<int>(image.width), static_cast<int>(image.height));
  for (std::size_t i = 0; i < gray.pixels.size(); ++i) {
    const double alpha = rgba[4 * i + 3] / 255.0;
    auto over_white = [&](std::uint8_t c) { return c * alpha + 255.0 * (1.0 - alpha); };
    const double luma =
        0.299 * over_white(rgba[4 * i]) + 0.587 * over_white(rgba[4 * i + 1]) + 0.114 * over_white(rgba[4 * i + 2]);
    gray.pixels[i] = static_cast<std::uint8_t>(std::clamp(std::lround(luma), 0L, 255L));
  }
  return gray;
}

void write_rgba_png(const fs::path& path, int width, int height, const std::vector<std::uint8_t>& rgba) {
  if (rgba.size() != static_cast<std::size_t>(width) * height * 4) throw ImageError("RGBA buffer size mismatch");
  png_image image;
  std::memset(&image, 0, sizeof(image));
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(width);
  image.height = static_cast<png_uint_32>(height);
  image.format = PNG_FORMAT_RGBA;
  if (!png_image_write_to_file(&image, path.c_str(), 0, rgba.data(), 0, nullptr)) {
    throw ImageError("cannot write PNG " + path.string() + ": " + image.message);
  }
}

void write_gray_png(const fs::path& path, const GrayImage& gray) {
  png_image image;
  std::memset(&image, 0, sizeof(image));
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(gray.width);
  image.height = static_cast<png_uint_32>(gray.height);
  image.format = PNG_FORMAT_GRAY;
  if (!png_image_write_to_file(&image, path.c_str(), 0, gray.pixels.data(), 0, nullptr)) {
    throw ImageError("cannot write PNG " + path.string() + ": " + image.message);
  }
}

GrayImage resample_bilinear(const GrayImage& source, int width, int height) {
  GrayImage out(width, height);
  const double scale_x = static_cast<double>(source.width) / width;
  const double scale_y = static_cast<double>(source.height) / height;
  for (int y = 0; y < height; ++y) {
    const double sy = std::clamp((y + 0.5) * scale_y - 0.5, 0.0, source.height - 1.0);
    const int y0 = static_cast<int>(sy);
    const int y1 = std::min(y0 + 1, source.height - 1);
    const double fy = sy - y0;
    for (int x = 0; x < width; ++x) {
      const double sx = std::clamp((x + 0.5) * scale_x - 0.5, 0.0, source.width - 1.0);
      const int x0 = static_cast<int>(sx);
      const int x1 = std::min(x0 + 1, source.width - 1);
      const double fx = sx - x0;
      const double top = source.at(x0, y0) * (1 - fx) + source.at(x1, y0) * fx;
      const double bottom = source.at(x0, y1) * (1 - fx) + source.at(x1, y1) * fx;
      out.at(x, y) = static_cast<std::uint8_t>(std::clamp(std::lround(top * (1 - fy) + bottom * fy), 0L, 255L));
    }
  }
  return out;
}

std::vector<double> gaussian_window(const SsimParameters& parameters) {
  const auto g = gaussian_1d(parameters);
  std::vector<double> window;
  window.reserve(g.size() * g.size());
  for (double row : g) {
    for (double col : g) window.push_back(row * col);
  }
  return window;
}

double mean_ssim(const GrayImage& a, const GrayImage& b, const SsimParameters& parameters) {
  if (a.width != b.width || a.height != b.height) throw ImageError("SSIM inputs differ in size");
  check_window_fits(a, parameters, "input");

  const std::size_t n = a.pixels.size();
  std::vector<double> xa(n), xb(n), xaa(n), xbb(n), xab(n);
  for (std::size_t i = 0; i < n; ++i) {
    xa[i] = a.pixels[i];
    xb[i] = b.pixels[i];
    xaa[i] = xa[i] * xa[i];
    xbb[i] = xb[i] * xb[i];
    xab[i] = xa[i] * xb[i];
  }
  const auto kernel = gaussian_1d(parameters);
  const auto mu_a = filter_valid(xa, a.width, a.height, kernel);
  const auto mu_b = filter_valid(xb, a.width, a.height, kernel);
  const auto e_aa = filter_valid(xaa, a.width, a.height, kernel);
  const auto e_bb = filter_valid(xbb, a.width, a.height, kernel);
  const auto e_ab = filter_valid(xab, a.width, a.height, kernel);

  const double c1 = std::pow(parameters.k1 * parameters.dynamic_range, 2);
  const double c2 = std::pow(parameters.k2 * parameters.dynamic_range, 2);
  double sum = 0;
  for (std::size_t i = 0; i < mu_a.size(); ++i) {
    const double var_a = e_aa[i] - mu_a[i] * mu_a[i];
    const double var_b = e_bb[i] - mu_b[i] * mu_b[i];
    const double cov = e_ab[i] - mu_a[i] * mu_b[i];
    sum += ((2 * mu_a[i] * mu_b[i] + c1) * (2 * cov + c2)) /
           ((mu_a[i] * mu_a[i] + mu_b[i] * mu_b[i] + c1) * (var_a + var_b + c2));
  }
  return sum / static_cast<double>(mu_a.size());
}

LevelScore ssim_score(const GrayImage& gt, const GrayImage& gen, const SsimParameters& parameters) {
  check_window_fits(gt, parameters, "ground-truth");
  check_window_fits(gen, parameters, "generated");
  Json details = {{"resampled", false}, {"lpips", nullptr}};
  double raw;
  if (gt.width != gen.width || gt.height != gen.height) {
    details["resampled"] = true;
    details["gen_original_size"] = {gen.width, gen.height};
    raw = mean_ssim(gt, resample_bilinear(gen, gt.width, gt.height), parameters);
  } else {
    raw = mean_ssim(gt, gen, parameters);
  }
  details["raw_mean_ssim"] = raw;
  details["size"] = {gt.width, gt.height};
  return LevelScore::computed(LevelId::image_similarity, std::clamp(raw, 0.0, 1.0) * 100.0, std::move(details));
}

}  // namespace evallm
