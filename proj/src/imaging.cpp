#include "galvae/imaging.hpp"

#include <omp.h>

#include <algorithm>
#include <cmath>
#include <string>

#include "galvae/error.hpp"

namespace galvae {

Image::Image(std::size_t width, std::size_t height, std::size_t channels, double fill)
    : width_(width), height_(height), channels_(channels),
      pixels_(width * height * channels, fill) {
  if (channels != 1 && channels != 3) throw DataError("Image: channels must be 1 or 3");
}

Image::Image(std::size_t width, std::size_t height, std::size_t channels,
             std::vector<double> pixels)
    : width_(width), height_(height), channels_(channels), pixels_(std::move(pixels)) {
  if (channels != 1 && channels != 3) throw DataError("Image: channels must be 1 or 3");
  if (pixels_.size() != width * height * channels)
    throw DataError("Image: pixel buffer does not match dimensions");
}

std::size_t BinaryMask::count() const {
  return static_cast<std::size_t>(std::count(bits_.begin(), bits_.end(), 1));
}

namespace {

struct Hsv {
  double h_deg, s, v;
};

Hsv hsv_of(double r, double g, double b) {
  const double mx = std::max({r, g, b});
  const double mn = std::min({r, g, b});
  const double delta = mx - mn;
  Hsv out{0.0, mx > 0.0 ? delta / mx : 0.0, mx};
  if (delta > 0.0) {
    double h;
    if (mx == r) {
      h = 60.0 * std::fmod((g - b) / delta, 6.0);
    } else if (mx == g) {
      h = 60.0 * ((b - r) / delta + 2.0);
    } else {
      h = 60.0 * ((r - g) / delta + 4.0);
    }
    if (h < 0.0) h += 360.0;
    if (h >= 360.0) h -= 360.0;
    out.h_deg = h;
  }
  return out;
}

void require_rgb(const Image& img, const char* op) {
  if (img.channels() != 3) throw DataError(std::string(op) + ": expected a 3-channel image");
}

}  // namespace

Image rgb_to_hsv(const Image& rgb) {
  require_rgb(rgb, "rgb_to_hsv");
  Image out(rgb.width(), rgb.height(), 3);
  auto src = rgb.pixels();
  auto dst = out.pixels();
  for (std::size_t i = 0; i < rgb.pixel_count(); ++i) {
    const Hsv hsv = hsv_of(src[3 * i], src[3 * i + 1], src[3 * i + 2]);
    dst[3 * i] = hsv.h_deg / 360.0;
    dst[3 * i + 1] = hsv.s;
    dst[3 * i + 2] = hsv.v;
  }
  return out;
}

BinaryMask extract_green_mask(const Image& rgb, const GreenWindow& w) {
  require_rgb(rgb, "extract_green_mask");
  if (w.hue_lo > w.hue_hi) throw DataError("extract_green_mask: hue_lo > hue_hi");
  BinaryMask mask(rgb.width(), rgb.height());
  for (std::size_t y = 0; y < rgb.height(); ++y)
    for (std::size_t x = 0; x < rgb.width(); ++x) {
      const Hsv hsv = hsv_of(rgb.at(x, y, 0), rgb.at(x, y, 1), rgb.at(x, y, 2));
      if (hsv.h_deg >= w.hue_lo && hsv.h_deg <= w.hue_hi && hsv.s >= w.s_min &&
          hsv.v >= w.v_min)
        mask.set(x, y);
    }
  return mask;
}

Image inpaint(const Image& img, const BinaryMask& mask) {
  if (mask.width() != img.width() || mask.height() != img.height())
    throw DataError("inpaint: mask dimensions do not match image");
  const std::size_t w = img.width();
  const std::size_t h = img.height();
  const std::size_t ch = img.channels();

  std::vector<unsigned char> known(w * h);
  std::size_t remaining = 0;
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x) {
      known[y * w + x] = mask.get(x, y) ? 0 : 1;
      remaining += mask.get(x, y) ? 1 : 0;
    }
  if (remaining == w * h) throw DataError("inpaint: every pixel is masked");

  Image out = img;
  std::vector<std::size_t> layer;
  std::vector<double> fill;
  while (remaining > 0) {
    layer.clear();
    fill.clear();
    for (std::size_t y = 0; y < h; ++y)
      for (std::size_t x = 0; x < w; ++x) {
        if (known[y * w + x]) continue;
        std::size_t n = 0;
        double sums[3] = {0.0, 0.0, 0.0};
        for (int dy = -1; dy <= 1; ++dy)
          for (int dx = -1; dx <= 1; ++dx) {
            if (dx == 0 && dy == 0) continue;
            const auto nx = static_cast<std::ptrdiff_t>(x) + dx;
            const auto ny = static_cast<std::ptrdiff_t>(y) + dy;
            if (nx < 0 || ny < 0 || nx >= static_cast<std::ptrdiff_t>(w) ||
                ny >= static_cast<std::ptrdiff_t>(h))
              continue;
            const auto ux = static_cast<std::size_t>(nx);
            const auto uy = static_cast<std::size_t>(ny);
            if (!known[uy * w + ux]) continue;
            ++n;
            for (std::size_t c = 0; c < ch; ++c) sums[c] += out.at(ux, uy, c);
          }
        if (n == 0) continue;
        layer.push_back(y * w + x);
        for (std::size_t c = 0; c < ch; ++c) fill.push_back(sums[c] / static_cast<double>(n));
      }
    // A layer is written only after it has been fully computed.
    for (std::size_t k = 0; k < layer.size(); ++k) {
      const std::size_t idx = layer[k];
      for (std::size_t c = 0; c < ch; ++c) out.pixels()[idx * ch + c] = fill[k * ch + c];
      known[idx] = 1;
    }
    remaining -= layer.size();
  }
  return out;
}

Image to_grayscale(const Image& rgb) {
  require_rgb(rgb, "to_grayscale");
  Image out(rgb.width(), rgb.height(), 1);
  auto src = rgb.pixels();
  auto dst = out.pixels();
  for (std::size_t i = 0; i < rgb.pixel_count(); ++i) {
    const double y = 0.299 * src[3 * i] + 0.587 * src[3 * i + 1] + 0.114 * src[3 * i + 2];
    dst[i] = std::clamp(y, 0.0, 1.0);
  }
  return out;
}

Image resize_bilinear(const Image& img, std::size_t out_w, std::size_t out_h) {
  if (out_w == 0 || out_h == 0) throw DataError("resize: target size must be positive");
  if (img.width() == 0 || img.height() == 0) throw DataError("resize: empty image");
  if (out_w == img.width() && out_h == img.height()) return img;

  const std::size_t ch = img.channels();
  Image out(out_w, out_h, ch);
  const double sx = static_cast<double>(img.width()) / static_cast<double>(out_w);
  const double sy = static_cast<double>(img.height()) / static_cast<double>(out_h);
  const double max_x = static_cast<double>(img.width() - 1);
  const double max_y = static_cast<double>(img.height() - 1);

  for (std::size_t y = 0; y < out_h; ++y) {
    const double fy_src = std::clamp((static_cast<double>(y) + 0.5) * sy - 0.5, 0.0, max_y);
    const auto y0 = static_cast<std::size_t>(fy_src);
    const std::size_t y1 = std::min(y0 + 1, img.height() - 1);
    const double fy = fy_src - static_cast<double>(y0);
    for (std::size_t x = 0; x < out_w; ++x) {
      const double fx_src = std::clamp((static_cast<double>(x) + 0.5) * sx - 0.5, 0.0, max_x);
      const auto x0 = static_cast<std::size_t>(fx_src);
      const std::size_t x1 = std::min(x0 + 1, img.width() - 1);
      const double fx = fx_src - static_cast<double>(x0);
      for (std::size_t c = 0; c < ch; ++c) {
        const double top = std::lerp(img.at(x0, y0, c), img.at(x1, y0, c), fx);
        const double bottom = std::lerp(img.at(x0, y1, c), img.at(x1, y1, c), fx);
        out.at(x, y, c) = std::lerp(top, bottom, fy);
      }
    }
  }
  return out;
}

Image center_crop_resize(const Image& img, std::size_t target) {
  if (target == 0) throw DataError("center_crop_resize: target must be positive");
  if (img.width() == 0 || img.height() == 0)
    throw DataError("center_crop_resize: empty image");
  const std::size_t side = std::min(img.width(), img.height());
  const std::size_t ox = (img.width() - side) / 2;
  const std::size_t oy = (img.height() - side) / 2;
  const std::size_t ch = img.channels();

  Image cropped(side, side, ch);
  for (std::size_t y = 0; y < side; ++y)
    for (std::size_t x = 0; x < side; ++x)
      for (std::size_t c = 0; c < ch; ++c) cropped.at(x, y, c) = img.at(x + ox, y + oy, c);
  return resize_bilinear(cropped, target, target);
}

Image preprocess_image(const Image& img, const PreprocessConfig& cfg) {
  if (img.channels() == 3) {
    const BinaryMask mask = extract_green_mask(img, cfg.window);
    const Image clean = mask.count() > 0 ? inpaint(img, mask) : img;
    return center_crop_resize(to_grayscale(clean), cfg.side);
  }
  if (img.channels() != 1) throw DataError("preprocess: unsupported channel count");
  return center_crop_resize(img, cfg.side);
}

std::vector<Image> preprocess_dataset(std::span<const Image> imgs, const PreprocessConfig& cfg) {
  std::vector<Image> out(imgs.size());
  std::exception_ptr failure;
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(imgs.size()); ++i) {
    try {
      out[static_cast<std::size_t>(i)] = preprocess_image(imgs[static_cast<std::size_t>(i)], cfg);
    } catch (...) {
#pragma omp critical(galvae_preprocess_error)
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);
  return out;
}

Image montage(std::span<const std::vector<Image>> rows, std::size_t pad) {
  std::size_t tile = 0;
  std::size_t max_cols = 0;
  for (const auto& row : rows) {
    max_cols = std::max(max_cols, row.size());
    for (const auto& img : row) {
      if (img.channels() != 1 || img.width() != img.height())
        throw DataError("montage: tiles must be square 1-channel images");
      if (tile == 0) tile = img.width();
      if (img.width() != tile) throw DataError("montage: tile sizes differ");
    }
  }
  if (tile == 0) throw DataError("montage: no tiles");
  const std::size_t width = max_cols * (tile + pad) + pad;
  const std::size_t height = rows.size() * (tile + pad) + pad;
  Image out(width, height, 1);
  for (std::size_t r = 0; r < rows.size(); ++r)
    for (std::size_t c = 0; c < rows[r].size(); ++c) {
      const std::size_t ox = pad + c * (tile + pad);
      const std::size_t oy = pad + r * (tile + pad);
      for (std::size_t y = 0; y < tile; ++y)
        for (std::size_t x = 0; x < tile; ++x) out.at(ox + x, oy + y) = rows[r][c].at(x, y);
    }
  return out;
}

}  // namespace galvae
