#include "galvae/synthdata.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "galvae/error.hpp"
#include "galvae/rng.hpp"

namespace galvae {

const char* label_name(Label l) { return l == Label::cardiomegaly ? "cardiomegaly" : "normal"; }

Label parse_label(const std::string& s) {
  if (s == "cardiomegaly") return Label::cardiomegaly;
  if (s == "normal") return Label::normal;
  throw DataError("unknown label '" + s + "'");
}

void validate(const PhantomSpec& spec) {
  if (!(spec.heart_ratio > 0.0 && spec.heart_ratio < 1.0))
    throw DataError("phantom: heart_ratio must lie in (0, 1)");
  if (spec.label == Label::cardiomegaly && spec.heart_ratio < kCardiomegalyMinRatio)
    throw DataError("phantom: cardiomegaly requires heart_ratio >= 0.55");
  if (spec.label == Label::normal && spec.heart_ratio > kNormalMaxRatio)
    throw DataError("phantom: normal requires heart_ratio <= 0.45");
  if (!(spec.noise_sigma >= 0.0)) throw DataError("phantom: noise_sigma must be >= 0");
}

namespace {

struct Ellipse {
  double cx, cy, ax, ay, angle;

  // Normalised radius: 1 on the boundary.
  double rho(double x, double y) const {
    const double dx = x - cx;
    const double dy = y - cy;
    const double c = std::cos(angle);
    const double s = std::sin(angle);
    const double u = (c * dx + s * dy) / ax;
    const double v = (-s * dx + c * dy) / ay;
    return std::sqrt(u * u + v * v);
  }

  // Anti-aliased coverage with a roughly one-pixel ramp.
  double coverage(double x, double y) const {
    const double dist_px = (rho(x, y) - 1.0) * std::sqrt(ax * ay);
    return std::clamp(0.5 - dist_px, 0.0, 1.0);
  }

  std::pair<double, double> boundary_point(double t) const {
    const double u = ax * std::cos(t);
    const double v = ay * std::sin(t);
    const double c = std::cos(angle);
    const double s = std::sin(angle);
    return {cx + c * u - s * v, cy + s * u + c * v};
  }
};

double segment_distance(double px, double py, double x0, double y0, double x1, double y1) {
  const double dx = x1 - x0;
  const double dy = y1 - y0;
  const double len2 = dx * dx + dy * dy;
  double t = len2 > 0.0 ? ((px - x0) * dx + (py - y0) * dy) / len2 : 0.0;
  t = std::clamp(t, 0.0, 1.0);
  const double ex = x0 + t * dx - px;
  const double ey = y0 + t * dy - py;
  return std::sqrt(ex * ex + ey * ey);
}

constexpr double kStrokeRgb[3] = {0.15, 0.80, 0.20};
constexpr double kStrokeHalfWidth = 0.8;
constexpr int kStrokeVertices = 36;

}  // namespace

Phantom render_phantom(const PhantomSpec& spec, std::size_t side) {
  if (side < 16) throw DataError("phantom: side must be >= 16");
  validate(spec);
  Rng rng(spec.seed);
  const double s = static_cast<double>(side);

  // Geometry jitter: a fixed number of draws, independent of annotation.
  const double bg_top = rng.uniform(0.04, 0.08);
  const double bg_gain = rng.uniform(0.06, 0.10);
  const Ellipse thorax{0.5 * s + rng.uniform(-0.02, 0.02) * s,
                       0.5 * s + rng.uniform(-0.02, 0.02) * s,
                       0.40 * s * rng.uniform(0.97, 1.03),
                       0.37 * s * rng.uniform(0.97, 1.03),
                       0.0};
  const double thorax_level = rng.uniform(0.36, 0.40);
  const Ellipse heart{thorax.cx + rng.uniform(-0.015, 0.015) * s,
                      thorax.cy + rng.uniform(0.0, 0.03) * s,
                      spec.heart_ratio * thorax.ax * 0.9,
                      spec.heart_ratio * thorax.ay * 0.9,
                      rng.uniform(-0.3, 0.3)};
  const double heart_level = rng.uniform(0.76, 0.80);

  Image gray(side, side, 1);
  for (std::size_t y = 0; y < side; ++y) {
    const double fy = static_cast<double>(y) + 0.5;
    for (std::size_t x = 0; x < side; ++x) {
      const double fx = static_cast<double>(x) + 0.5;
      double v = bg_top + bg_gain * fy / s;
      v = std::lerp(v, thorax_level, thorax.coverage(fx, fy));
      v = std::lerp(v, heart_level, heart.coverage(fx, fy));
      gray.at(x, y) = v;
    }
  }
  if (spec.noise_sigma > 0.0)
    for (auto& p : gray.pixels()) p += spec.noise_sigma * rng.gaussian();
  for (auto& p : gray.pixels()) p = std::clamp(p, 0.0, 1.0);

  Phantom out;
  if (!spec.annotate) {
    out.image = std::move(gray);
    return out;
  }

  std::vector<std::pair<double, double>> poly;
  for (int i = 0; i <= kStrokeVertices; ++i)
    poly.push_back(heart.boundary_point(2.0 * std::numbers::pi * i / kStrokeVertices));

  out.image = Image(side, side, 3);
  out.stroke = BinaryMask(side, side);
  for (std::size_t y = 0; y < side; ++y)
    for (std::size_t x = 0; x < side; ++x) {
      const double fx = static_cast<double>(x) + 0.5;
      const double fy = static_cast<double>(y) + 0.5;
      double best = 1e300;
      for (std::size_t k = 0; k + 1 < poly.size(); ++k)
        best = std::min(best, segment_distance(fx, fy, poly[k].first, poly[k].second,
                                               poly[k + 1].first, poly[k + 1].second));
      const bool on_stroke = best <= kStrokeHalfWidth;
      for (std::size_t c = 0; c < 3; ++c)
        out.image.at(x, y, c) = on_stroke ? kStrokeRgb[c] : gray.at(x, y);
      if (on_stroke) out.stroke.set(x, y);
    }
  return out;
}

Image make_phantom(const PhantomSpec& spec, std::size_t side) {
  return render_phantom(spec, side).image;
}

std::vector<LabeledImage> make_dataset(const DatasetOptions& opts) {
  if (opts.n_per_label < 1) throw DataError("make_dataset: n_per_label must be >= 1");
  if (!(opts.annotate_frac >= 0.0 && opts.annotate_frac <= 1.0))
    throw DataError("make_dataset: annotate_frac must lie in [0, 1]");
  const RatioBands& b = opts.bands;
  if (!(b.disease_lo >= kCardiomegalyMinRatio && b.disease_lo <= b.disease_hi &&
        b.disease_hi < 1.0 && b.normal_lo > 0.0 && b.normal_lo <= b.normal_hi &&
        b.normal_hi <= kNormalMaxRatio))
    throw DataError("make_dataset: ratio bands violate the label gap");

  Rng ratios(derive_seed(opts.seed, "ratios"));
  const std::size_t total = 2 * opts.n_per_label;
  std::vector<LabeledImage> out;
  out.reserve(total);
  for (std::size_t i = 0; i < total; ++i) {
    PhantomSpec spec;
    spec.label = i < opts.n_per_label ? Label::cardiomegaly : Label::normal;
    spec.heart_ratio = spec.label == Label::cardiomegaly
                           ? ratios.uniform(b.disease_lo, b.disease_hi)
                           : ratios.uniform(b.normal_lo, b.normal_hi);
    spec.noise_sigma = opts.noise_sigma;
    const auto before = static_cast<std::size_t>(std::floor(opts.annotate_frac * i));
    const auto after = static_cast<std::size_t>(std::floor(opts.annotate_frac * (i + 1)));
    spec.annotate = after > before;
    spec.seed = derive_seed(opts.seed, "phantom:" + std::to_string(i));
    Phantom ph = render_phantom(spec, opts.side);
    out.push_back({std::move(ph.image), spec.label, spec, std::move(ph.stroke)});
  }
  return out;
}

double center_disc_mean(const Image& img) {
  if (img.channels() != 1) throw DataError("center_disc_mean: expected 1 channel");
  const double cx = img.width() / 2.0;
  const double cy = img.height() / 2.0;
  const double r = std::min(img.width(), img.height()) / 4.0;
  double sum = 0.0;
  std::size_t n = 0;
  for (std::size_t y = 0; y < img.height(); ++y)
    for (std::size_t x = 0; x < img.width(); ++x) {
      const double dx = x + 0.5 - cx;
      const double dy = y + 0.5 - cy;
      if (dx * dx + dy * dy <= r * r) {
        sum += img.at(x, y);
        ++n;
      }
    }
  return n ? sum / static_cast<double>(n) : 0.0;
}

}  // namespace galvae
