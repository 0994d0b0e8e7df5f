#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "galvae/imaging.hpp"

namespace galvae {

// Index order doubles as the classifier's class index (disease first).
enum class Label : int { cardiomegaly = 0, normal = 1 };

inline constexpr int kNumClasses = 2;

const char* label_name(Label l);
Label parse_label(const std::string& s);

// heart_ratio gap that keeps the two labels separable.
inline constexpr double kCardiomegalyMinRatio = 0.55;
inline constexpr double kNormalMaxRatio = 0.45;

struct PhantomSpec {
  Label label = Label::normal;
  double heart_ratio = 0.35;  // heart half-axis / thorax half-axis
  double noise_sigma = 0.0;
  bool annotate = false;
  std::uint64_t seed = 0;
};

/// Throws DataError when heart_ratio is outside (0, 1) or on the wrong side
/// of the label gap.
void validate(const PhantomSpec& spec);

struct Phantom {
  Image image;        // 1 channel, or 3 channels when annotated
  BinaryMask stroke;  // ground-truth annotation pixels (empty when not annotated)
};

/// Full render including the ground-truth stroke mask. The gray content is
/// identical with or without annotation for the same spec.
Phantom render_phantom(const PhantomSpec& spec, std::size_t side);
Image make_phantom(const PhantomSpec& spec, std::size_t side);

struct RatioBands {
  double disease_lo = 0.55;
  double disease_hi = 0.75;
  double normal_lo = 0.25;
  double normal_hi = 0.45;
};

struct LabeledImage {
  Image image;
  Label label;
  PhantomSpec spec;
  BinaryMask stroke;
};

struct DatasetOptions {
  std::size_t n_per_label = 50;
  std::size_t side = 64;
  double annotate_frac = 0.0;
  double noise_sigma = 0.02;
  std::uint64_t seed = 0;
  RatioBands bands;
};

/// n_per_label cardiomegaly phantoms followed by n_per_label normal ones.
/// Exactly floor(annotate_frac * 2n) images are annotated, spread evenly by
/// quota over that ordering.
std::vector<LabeledImage> make_dataset(const DatasetOptions& opts);

/// Mean intensity of the centred disc of radius side/4 (1-channel input).
double center_disc_mean(const Image& img);

}  // namespace galvae
