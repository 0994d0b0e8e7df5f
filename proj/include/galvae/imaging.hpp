#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace galvae {

/// Row-major, channel-interleaved pixel grid with values in [0, 1].
class Image {
 public:
  Image() = default;
  Image(std::size_t width, std::size_t height, std::size_t channels, double fill = 0.0);
  Image(std::size_t width, std::size_t height, std::size_t channels, std::vector<double> pixels);

  std::size_t width() const noexcept { return width_; }
  std::size_t height() const noexcept { return height_; }
  std::size_t channels() const noexcept { return channels_; }
  std::size_t pixel_count() const noexcept { return width_ * height_; }
  bool empty() const noexcept { return pixels_.empty(); }

  double& at(std::size_t x, std::size_t y, std::size_t c = 0) {
    return pixels_[(y * width_ + x) * channels_ + c];
  }
  double at(std::size_t x, std::size_t y, std::size_t c = 0) const {
    return pixels_[(y * width_ + x) * channels_ + c];
  }

  std::span<double> pixels() noexcept { return pixels_; }
  std::span<const double> pixels() const noexcept { return pixels_; }
  const std::vector<double>& values() const noexcept { return pixels_; }

  bool operator==(const Image&) const = default;

 private:
  std::size_t width_ = 0;
  std::size_t height_ = 0;
  std::size_t channels_ = 0;
  std::vector<double> pixels_;
};

class BinaryMask {
 public:
  BinaryMask() = default;
  BinaryMask(std::size_t width, std::size_t height)
      : width_(width), height_(height), bits_(width * height, 0) {}

  std::size_t width() const noexcept { return width_; }
  std::size_t height() const noexcept { return height_; }
  bool get(std::size_t x, std::size_t y) const { return bits_[y * width_ + x] != 0; }
  void set(std::size_t x, std::size_t y, bool v = true) { bits_[y * width_ + x] = v ? 1 : 0; }
  std::size_t count() const;

  bool operator==(const BinaryMask&) const = default;

 private:
  std::size_t width_ = 0;
  std::size_t height_ = 0;
  std::vector<unsigned char> bits_;
};

/// Hexcone RGB -> HSV. Channel 0 holds hue/360 in [0, 1); achromatic hue is 0.
Image rgb_to_hsv(const Image& rgb);

struct GreenWindow {
  double hue_lo = 90.0;  // degrees
  double hue_hi = 150.0;
  double s_min = 0.3;
  double v_min = 0.2;
};

BinaryMask extract_green_mask(const Image& rgb, const GreenWindow& window = {});

/// Onion-peel fill: each pass assigns every masked pixel that touches a known
/// 8-neighbour the mean of those neighbours (values as of the start of the
/// pass), then marks it known. Unmasked pixels are copied untouched.
Image inpaint(const Image& img, const BinaryMask& mask);

/// ITU-R BT.601 luma.
Image to_grayscale(const Image& rgb);

/// Bilinear resize with half-pixel centres and edge clamping. Same-size
/// input is returned unchanged.
Image resize_bilinear(const Image& img, std::size_t out_width, std::size_t out_height);

/// Crops the centred square of side min(w, h), then resizes to target x target.
Image center_crop_resize(const Image& img, std::size_t target);

struct PreprocessConfig {
  std::size_t side = 32;
  GreenWindow window;
};

/// Per image: RGB input is masked, inpainted and converted to luma; every
/// image is then centre-cropped and resized. Output is 1-channel side x side.
Image preprocess_image(const Image& img, const PreprocessConfig& cfg);
std::vector<Image> preprocess_dataset(std::span<const Image> imgs, const PreprocessConfig& cfg);

// Binary netpbm: P5 for 1 channel, P6 for 3 channels, maxval 255.
Image read_pnm(const std::filesystem::path& path);
void write_pnm(const Image& img, const std::filesystem::path& path);
std::string encode_pnm(const Image& img);
Image decode_pnm(std::string_view bytes);

/// Tiles equally sized 1-channel images into rows; short rows are padded black.
Image montage(std::span<const std::vector<Image>> rows, std::size_t pad = 1);

}  // namespace galvae
