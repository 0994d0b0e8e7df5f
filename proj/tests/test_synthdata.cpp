#include <doctest.h>

#include <set>

#include "galvae/error.hpp"
#include "galvae/hash.hpp"
#include "galvae/synthdata.hpp"

using namespace galvae;

TEST_CASE("make_phantom is deterministic and sized") {
  PhantomSpec spec{Label::cardiomegaly, 0.65, 0.03, false, 17};
  const Image a = make_phantom(spec, 32);
  CHECK(a == make_phantom(spec, 32));
  CHECK(a.width() == 32);
  CHECK(a.channels() == 1);
  for (double p : a.pixels()) CHECK((p >= 0.0 && p <= 1.0));
  spec.seed = 18;
  CHECK_FALSE(a == make_phantom(spec, 32));

  CHECK_THROWS_AS(make_phantom(spec, 15), DataError);
}

TEST_CASE("larger heart gives a brighter centre disc") {
  // the 0.7 / 0.3 pair straddles the gap, so labels follow the ratio
  const Image big = make_phantom({Label::cardiomegaly, 0.7, 0.0, false, 5}, 64);
  const Image small = make_phantom({Label::normal, 0.3, 0.0, false, 5}, 64);
  CHECK(center_disc_mean(big) > center_disc_mean(small));
}

TEST_CASE("spec validation enforces the label gap") {
  CHECK_THROWS_AS(validate({Label::cardiomegaly, 0.5, 0.0, false, 0}), DataError);
  CHECK_THROWS_AS(validate({Label::normal, 0.5, 0.0, false, 0}), DataError);
  CHECK_THROWS_AS(validate({Label::normal, 0.0, 0.0, false, 0}), DataError);
  CHECK_THROWS_AS(validate({Label::normal, 0.3, -0.1, false, 0}), DataError);
  CHECK_NOTHROW(validate({Label::normal, 0.45, 0.0, false, 0}));
  CHECK_NOTHROW(validate({Label::cardiomegaly, 0.55, 0.0, false, 0}));
}

TEST_CASE("annotation stroke is found by the green mask") {
  const Phantom ph = render_phantom({Label::cardiomegaly, 0.62, 0.02, true, 9}, 64);
  CHECK(ph.image.channels() == 3);
  const BinaryMask found = extract_green_mask(ph.image);
  CHECK(found.count() >= ph.stroke.count());
  std::size_t hit = 0;
  for (std::size_t y = 0; y < 64; ++y)
    for (std::size_t x = 0; x < 64; ++x)
      if (ph.stroke.get(x, y) && found.get(x, y)) ++hit;
  CHECK(hit == ph.stroke.count());

  // gray content is the same with or without the annotation
  const Phantom plain = render_phantom({Label::cardiomegaly, 0.62, 0.02, false, 9}, 64);
  for (std::size_t y = 0; y < 64; ++y)
    for (std::size_t x = 0; x < 64; ++x)
      if (!ph.stroke.get(x, y))
        for (std::size_t c = 0; c < 3; ++c) CHECK(ph.image.at(x, y, c) == plain.image.at(x, y));
}

TEST_CASE("make_dataset composition") {
  DatasetOptions opts;
  opts.n_per_label = 50;
  opts.side = 32;
  opts.seed = 4;
  const auto data = make_dataset(opts);
  REQUIRE(data.size() == 100);
  for (std::size_t i = 0; i < 100; ++i) {
    CHECK(data[i].label == (i < 50 ? Label::cardiomegaly : Label::normal));
    if (data[i].label == Label::cardiomegaly)
      CHECK(data[i].spec.heart_ratio >= kCardiomegalyMinRatio);
    else
      CHECK(data[i].spec.heart_ratio <= kNormalMaxRatio);
  }

  opts.seed = 5;
  const auto other = make_dataset(opts);
  CHECK(other.size() == 100);
  CHECK_FALSE(other[0].image == data[0].image);
  CHECK(other[0].image.width() == data[0].image.width());

  opts.annotate_frac = 0.5;
  std::size_t annotated = 0;
  for (const auto& li : make_dataset(opts)) annotated += li.spec.annotate ? 1 : 0;
  CHECK(annotated == 50);

  opts.annotate_frac = 0.33;
  annotated = 0;
  for (const auto& li : make_dataset(opts)) annotated += li.spec.annotate ? 1 : 0;
  CHECK(annotated == 33);

  opts.annotate_frac = 1.5;
  CHECK_THROWS_AS(make_dataset(opts), DataError);
  opts.annotate_frac = 0.0;
  opts.n_per_label = 0;
  CHECK_THROWS_AS(make_dataset(opts), DataError);
}

TEST_CASE("dataset images have distinct content hashes") {
  DatasetOptions opts;
  opts.n_per_label = 60;
  opts.side = 32;
  opts.noise_sigma = 0.0;
  std::set<std::string> hashes;
  for (const auto& li : make_dataset(opts)) hashes.insert(image_hash(li.image));
  CHECK(hashes.size() == 120);
}

TEST_CASE("centre-disc threshold separates noise-free labels") {
  DatasetOptions opts;
  opts.n_per_label = 40;
  opts.side = 32;
  opts.noise_sigma = 0.0;
  opts.seed = 12;
  double min_disease = 1e9, max_normal = -1e9;
  for (const auto& li : make_dataset(opts)) {
    const double m = center_disc_mean(li.image);
    if (li.label == Label::cardiomegaly)
      min_disease = std::min(min_disease, m);
    else
      max_normal = std::max(max_normal, m);
  }
  CHECK(min_disease > max_normal);
}

TEST_CASE("labels round-trip through their names") {
  CHECK(parse_label(label_name(Label::cardiomegaly)) == Label::cardiomegaly);
  CHECK(parse_label(label_name(Label::normal)) == Label::normal);
  CHECK_THROWS_AS(parse_label("kidney"), DataError);
}
