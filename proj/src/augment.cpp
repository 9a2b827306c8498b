#include "eaaslab/augment.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "eaaslab/errors.hpp"

namespace eaaslab {

AugmentationSpec AugmentationSpec::parse(const std::string& ops) {
  AugmentationSpec s;
  if (ops.empty() || ops == "none") return s;
  std::stringstream ss(ops);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    tok.erase(std::remove_if(tok.begin(), tok.end(), ::isspace), tok.end());
    if (tok == "crop")
      s.crop = true;
    else if (tok == "hflip")
      s.hflip = true;
    else if (tok == "jitter")
      s.jitter = true;
    else if (tok == "gray")
      s.gray = true;
    else if (!tok.empty())
      throw ConfigError("unknown augmentation op: " + tok);
  }
  return s;
}

std::string AugmentationSpec::ops_string() const {
  std::string s;
  auto add = [&](const char* name) {
    if (!s.empty()) s += ",";
    s += name;
  };
  if (crop) add("crop");
  if (hflip) add("hflip");
  if (jitter) add("jitter");
  if (gray) add("gray");
  return s.empty() ? "none" : s;
}

std::string AugmentationSpec::describe() const {
  std::ostringstream os;
  os << "ops=" << ops_string();
  if (crop)
    os << ";crop_scale=[" << crop_scale_min << "," << crop_scale_max << "];crop_ratio=["
       << crop_ratio_min << "," << crop_ratio_max << "]";
  if (hflip) os << ";flip_p=" << flip_prob;
  if (jitter)
    os << ";jitter_p=" << jitter_prob << ";b=" << jitter_brightness << ";c=" << jitter_contrast
       << ";s=" << jitter_saturation;
  if (gray) os << ";gray_p=" << gray_prob;
  return os.str();
}

static void clamp01(std::vector<float>& v) {
  for (float& x : v) x = std::clamp(x, 0.0f, 1.0f);
}

static std::vector<float> random_resized_crop(const std::vector<float>& img, ImageShape sh,
                                              const AugmentationSpec& s, Rng& rng) {
  // sample target area and aspect ratio, fall back to full frame when the
  // sampled box does not fit
  int ch = sh.h, cw = sh.w, cy = 0, cx = 0;
  for (int attempt = 0; attempt < 10; ++attempt) {
    double area = sh.h * static_cast<double>(sh.w) *
                  rng.uniform(s.crop_scale_min, s.crop_scale_max);
    double logr = rng.uniform(std::log(s.crop_ratio_min), std::log(s.crop_ratio_max));
    double ratio = std::exp(logr);
    int w = static_cast<int>(std::lround(std::sqrt(area * ratio)));
    int h = static_cast<int>(std::lround(std::sqrt(area / ratio)));
    if (w < 1 || h < 1 || w > sh.w || h > sh.h) continue;
    cy = static_cast<int>(rng.index(sh.h - h + 1));
    cx = static_cast<int>(rng.index(sh.w - w + 1));
    ch = h;
    cw = w;
    break;
  }
  std::vector<float> crop(static_cast<size_t>(ch) * cw * sh.c);
  for (int y = 0; y < ch; ++y)
    std::copy_n(img.data() + ((static_cast<size_t>(cy + y) * sh.w) + cx) * sh.c,
                static_cast<size_t>(cw) * sh.c,
                crop.data() + static_cast<size_t>(y) * cw * sh.c);
  return resize_bilinear(crop, ImageShape{ch, cw, sh.c}, sh.h, sh.w);
}

static void horizontal_flip(std::vector<float>& img, ImageShape sh) {
  for (int y = 0; y < sh.h; ++y)
    for (int x = 0; x < sh.w / 2; ++x)
      for (int c = 0; c < sh.c; ++c)
        std::swap(img[(static_cast<size_t>(y) * sh.w + x) * sh.c + c],
                  img[(static_cast<size_t>(y) * sh.w + (sh.w - 1 - x)) * sh.c + c]);
}

static void color_jitter(std::vector<float>& img, ImageShape sh, const AugmentationSpec& s,
                         Rng& rng) {
  const float fb = static_cast<float>(rng.uniform(1.0 - s.jitter_brightness,
                                                  1.0 + s.jitter_brightness));
  const float fc = static_cast<float>(rng.uniform(1.0 - s.jitter_contrast,
                                                  1.0 + s.jitter_contrast));
  const float fs = static_cast<float>(rng.uniform(1.0 - s.jitter_saturation,
                                                  1.0 + s.jitter_saturation));
  double mean = 0;
  for (float v : img) mean += v;
  const float gmean = static_cast<float>(mean / img.size());
  const size_t npix = static_cast<size_t>(sh.h) * sh.w;
  for (size_t i = 0; i < npix; ++i) {
    float r = img[3 * i], g = img[3 * i + 1], b = img[3 * i + 2];
    r *= fb;
    g *= fb;
    b *= fb;
    r = (r - gmean) * fc + gmean;
    g = (g - gmean) * fc + gmean;
    b = (b - gmean) * fc + gmean;
    float lum = 0.299f * r + 0.587f * g + 0.114f * b;
    img[3 * i] = (r - lum) * fs + lum;
    img[3 * i + 1] = (g - lum) * fs + lum;
    img[3 * i + 2] = (b - lum) * fs + lum;
  }
}

static void to_grayscale(std::vector<float>& img, ImageShape sh) {
  const size_t npix = static_cast<size_t>(sh.h) * sh.w;
  for (size_t i = 0; i < npix; ++i) {
    float lum = 0.299f * img[3 * i] + 0.587f * img[3 * i + 1] + 0.114f * img[3 * i + 2];
    img[3 * i] = img[3 * i + 1] = img[3 * i + 2] = lum;
  }
}

std::vector<float> augment(const std::vector<float>& image, ImageShape shape,
                           const AugmentationSpec& spec, Rng& rng) {
  if (image.size() != static_cast<size_t>(shape.pixels()))
    throw PreconditionError("augment: image does not match declared shape");
  std::vector<float> out;
  if (spec.crop)
    out = random_resized_crop(image, shape, spec, rng);
  else
    out = image;
  if (spec.hflip && rng.bernoulli(spec.flip_prob)) horizontal_flip(out, shape);
  if (spec.jitter && rng.bernoulli(spec.jitter_prob)) color_jitter(out, shape, spec, rng);
  if (spec.gray && rng.bernoulli(spec.gray_prob)) to_grayscale(out, shape);
  clamp01(out);
  return out;
}

}  // namespace eaaslab
