#include "eaaslab/datagen.hpp"

#include <algorithm>
#include <cmath>

#include "eaaslab/errors.hpp"
#include "eaaslab/rng.hpp"

namespace eaaslab {

namespace {

constexpr int kNumCombos = 20;  // 4 pattern types x 5 scales
const double kFreqs[5] = {1.5, 2.5, 4.0, 6.0, 9.0};

enum class ColorMode { colorful, grayscale, tinted };

struct Style {
  ColorMode color = ColorMode::colorful;
  double amp_lo = 0.30, amp_hi = 0.50;
  double bg_lo = 0.25, bg_hi = 0.60;
  double noise = 0.03;
  bool mixture = false;  // two-pattern mixtures (broad surrogate source)
  std::vector<int> class_combos;
};

Style dataset_style(const std::string& name, int classes) {
  Style s;
  auto combos = [&](std::initializer_list<int> l) { return std::vector<int>(l); };
  if (name == "cifar10" || name == "stl10") {
    s.class_combos = combos({0, 9, 18, 3, 12, 5, 14, 7, 16, 11});
  } else if (name == "mnist") {
    // several classes share a pattern type and differ only in scale, which
    // keeps the task from saturating
    s.color = ColorMode::grayscale;
    s.amp_lo = 0.30;
    s.amp_hi = 0.55;
    s.bg_lo = 0.05;
    s.bg_hi = 0.30;
    s.noise = 0.05;
    s.class_combos = combos({1, 5, 9, 13, 17, 2, 6, 10, 14, 18});
  } else if (name == "fashionmnist") {
    s.color = ColorMode::grayscale;
    s.amp_lo = 0.35;
    s.amp_hi = 0.60;
    s.bg_lo = 0.10;
    s.bg_hi = 0.35;
    s.class_combos = combos({0, 4, 8, 1, 5, 9, 2, 6, 10, 3});
  } else if (name == "svhn") {
    s.class_combos = combos({2, 6, 10, 14, 18, 3, 7, 11, 15, 19});
    s.noise = 0.05;
  } else if (name == "gtsrb") {
    s.color = ColorMode::tinted;
    s.noise = 0.04;
  } else if (name == "food101") {
    s.noise = 0.05;
  } else if (name == "imagenet") {
    s.mixture = true;
    s.amp_lo = 0.25;
    s.amp_hi = 0.55;
    s.bg_lo = 0.20;
    s.bg_hi = 0.70;
    s.noise = 0.05;
  } else {
    throw ConfigError("no generator profile for dataset: " + name);
  }
  // classes beyond the explicit list wrap around the combo table
  while (static_cast<int>(s.class_combos.size()) < classes)
    s.class_combos.push_back(static_cast<int>(s.class_combos.size()) % kNumCombos);
  return s;
}

// pattern value in [-1,1] at normalized coordinates (u,v) in [-1,1]
double pattern_value(int combo, double u, double v, double freq_jit, double phase, double cu,
                     double cv, int stripe_sign) {
  const int type = combo % 4;
  const double f = kFreqs[combo / 4] * freq_jit;
  switch (type) {
    case 0: {  // concentric rings
      const double r = std::sqrt((u - cu) * (u - cu) + (v - cv) * (v - cv));
      return std::cos(M_PI * f * r + phase);
    }
    case 1: {  // checkerboard
      return std::cos(M_PI * f * (u + cu) + phase) * std::cos(M_PI * f * (v + cv) + phase);
    }
    case 2: {  // diagonal stripes (either diagonal, so the class is flip-closed)
      const double t = stripe_sign > 0 ? (u + v) : (u - v);
      return std::cos(M_PI * f * (t * 0.70710678 + cu) + phase);
    }
    default: {  // spot grid; scale index sets the grid density
      const int g = 1 + combo / 4;
      const double sig = 0.45 / g;
      double acc = 0;
      for (int i = 0; i < g; ++i) {
        for (int j = 0; j < g; ++j) {
          const double ci = -1.0 + (2.0 * i + 1.0) / g + cu * 0.5;
          const double cj = -1.0 + (2.0 * j + 1.0) / g + cv * 0.5;
          const double d2 = (u - ci) * (u - ci) + (v - cj) * (v - cj);
          acc += std::exp(-d2 / (2 * sig * sig));
        }
      }
      return std::clamp(2.0 * acc - 1.0, -1.0, 1.0);
    }
  }
}

void render_image(uint8_t* out, ImageShape sh, int combo, int combo2, double mix,
                  const Style& st, Rng& rng) {
  const double freq_jit = rng.uniform(0.85, 1.15);
  const double phase = rng.uniform(0.0, 2 * M_PI);
  const double cu = rng.uniform(-0.25, 0.25);
  const double cv = rng.uniform(-0.25, 0.25);
  const int stripe_sign = rng.bernoulli(0.5) ? 1 : -1;
  const double freq_jit2 = rng.uniform(0.85, 1.15);
  const double phase2 = rng.uniform(0.0, 2 * M_PI);
  const double amp = rng.uniform(st.amp_lo, st.amp_hi);
  const double bg = rng.uniform(st.bg_lo, st.bg_hi);

  // Nuisance factors deliberately dominate raw pixel statistics: a strong
  // unrelated backdrop texture, a smooth brightness ramp, and wide color
  // tints. They line up with the augmentation invariances, so contrastive
  // features suppress them while raw projections stay entangled.
  const int backdrop = static_cast<int>(rng.index(kNumCombos));
  const double backdrop_w = rng.uniform(0.40, 0.60);
  const double backdrop_phase = rng.uniform(0.0, 2 * M_PI);
  const double grad_x = rng.uniform(-0.22, 0.22);
  const double grad_y = rng.uniform(-0.22, 0.22);

  double tint[3] = {1.0, 1.0, 1.0};
  double bg_rgb[3] = {bg, bg, bg};
  if (st.color == ColorMode::colorful || st.color == ColorMode::tinted) {
    for (double& t : tint) t = rng.uniform(0.35, 1.0);
    for (double& b : bg_rgb) b = std::clamp(b + rng.uniform(-0.12, 0.12), 0.0, 1.0);
  }

  for (int y = 0; y < sh.h; ++y) {
    const double v = 2.0 * (y + 0.5) / sh.h - 1.0;
    for (int x = 0; x < sh.w; ++x) {
      const double u = 2.0 * (x + 0.5) / sh.w - 1.0;
      double val = pattern_value(combo, u, v, freq_jit, phase, cu, cv, stripe_sign);
      if (combo2 >= 0)
        val = mix * val +
              (1.0 - mix) * pattern_value(combo2, u, v, freq_jit2, phase2, -cu, -cv, stripe_sign);
      val = (1.0 - backdrop_w) * val +
            backdrop_w * pattern_value(backdrop, u, v, freq_jit2, backdrop_phase, -cv, cu,
                                       -stripe_sign);
      const double ramp = grad_x * u + grad_y * v;
      for (int c = 0; c < sh.c; ++c) {
        double p = bg_rgb[c] + ramp + amp * val * tint[c] + rng.normal() * st.noise;
        p = std::clamp(p, 0.0, 1.0);
        out[(static_cast<size_t>(y) * sh.w + x) * sh.c + c] =
            static_cast<uint8_t>(std::lround(p * 255.0));
      }
    }
  }
}

void generate_split(const std::string& name, const std::filesystem::path& root, Split split,
                    size_t count, ImageShape shape, int classes, const Style& st, uint64_t seed,
                    bool labeled) {
  std::vector<uint8_t> images(count * static_cast<size_t>(shape.pixels()));
  std::vector<int32_t> labels(count);

#pragma omp parallel for schedule(static)
  for (long long i = 0; i < static_cast<long long>(count); ++i) {
    Rng rng = named_rng(seed, "datagen", fnv1a64(name + "/" + split_name(split)),
                        static_cast<uint64_t>(i));
    int cls = static_cast<int>(rng.index(static_cast<uint64_t>(classes)));
    int combo = st.class_combos[cls];
    int combo2 = -1;
    double mix = 1.0;
    if (st.mixture) {
      combo = static_cast<int>(rng.index(kNumCombos));
      combo2 = static_cast<int>(rng.index(kNumCombos));
      mix = rng.uniform(0.35, 0.65);
      cls = combo;  // nominal label for an unlabeled-style source
    }
    labels[i] = cls;
    render_image(images.data() + static_cast<size_t>(i) * shape.pixels(), shape, combo, combo2,
                 mix, st, rng);
  }

  save_split(root, name, split, shape, st.mixture ? 0 : classes, images,
             labeled && !st.mixture ? &labels : nullptr);
}

}  // namespace

DatasetProfile dataset_profile(const std::string& name) {
  // sizes follow the usual published splits; shapes are source-native and
  // normalized by the loader
  if (name == "cifar10") return {name, 50000, 10000, 0, {32, 32, 3}, 10};
  if (name == "stl10") return {name, 5000, 8000, 100000, {96, 96, 3}, 10};
  if (name == "food101") return {name, 90900, 10100, 0, {64, 64, 3}, 101};
  if (name == "mnist") return {name, 60000, 10000, 0, {28, 28, 1}, 10};
  if (name == "fashionmnist") return {name, 60000, 10000, 0, {28, 28, 1}, 10};
  if (name == "svhn") return {name, 73257, 26032, 0, {32, 32, 3}, 10};
  if (name == "gtsrb") return {name, 39209, 12630, 0, {32, 32, 3}, 43};
  if (name == "imagenet") return {name, 0, 0, 20000, {32, 32, 3}, 0};
  throw ConfigError("no generator profile for dataset: " + name);
}

void generate_dataset(const std::string& name, const std::filesystem::path& root, uint64_t seed,
                      const GenOverrides& ov) {
  DatasetProfile p = dataset_profile(name);
  if (ov.train >= 0) p.train = static_cast<size_t>(ov.train);
  if (ov.test >= 0) p.test = static_cast<size_t>(ov.test);
  if (ov.unlabeled >= 0) p.unlabeled = static_cast<size_t>(ov.unlabeled);
  if (ov.classes > 0) p.classes = ov.classes;
  if (ov.h > 0) p.shape.h = ov.h;
  if (ov.w > 0) p.shape.w = ov.w;

  const Style st = dataset_style(name, std::max(p.classes, 1));
  const int classes = std::max(p.classes, 1);
  if (p.train) generate_split(name, root, Split::train, p.train, p.shape, classes, st, seed, true);
  if (p.test) generate_split(name, root, Split::test, p.test, p.shape, classes, st, seed, true);
  if (p.unlabeled)
    generate_split(name, root, Split::unlabeled, p.unlabeled, p.shape, classes, st, seed, false);
}

}  // namespace eaaslab
