#pragma once

#include <string>
#include <vector>

#include "eaaslab/dataset.hpp"
#include "eaaslab/rng.hpp"

namespace eaaslab {

// Stochastic augmentation composition. Ops apply in the fixed order
// crop -> hflip -> jitter -> gray; any subset of the four may be enabled
// (16 combinations including the empty one). Output shape and [0,1] range
// are always preserved.
struct AugmentationSpec {
  bool crop = false;    // RandomResizedCrop
  bool hflip = false;   // RandomHorizontalFlip
  bool jitter = false;  // ColorJitter
  bool gray = false;    // RandomGrayScale

  // per-op parameters
  float crop_scale_min = 0.6f, crop_scale_max = 1.0f;
  float crop_ratio_min = 0.75f, crop_ratio_max = 1.3333333f;
  float flip_prob = 0.5f;
  float jitter_prob = 0.8f;
  float jitter_brightness = 0.4f, jitter_contrast = 0.4f, jitter_saturation = 0.4f;
  float gray_prob = 0.2f;

  bool any() const { return crop || hflip || jitter || gray; }
  // "crop,hflip,jitter,gray" / "none"; order-insensitive, strict
  static AugmentationSpec parse(const std::string& ops);
  std::string ops_string() const;
  std::string describe() const;  // includes parameters, for manifests/digests
};

// Applies the composition with randomness drawn from `rng`. The caller owns
// the stream policy; training loops derive one per (epoch, image index).
std::vector<float> augment(const std::vector<float>& image, ImageShape shape,
                           const AugmentationSpec& spec, Rng& rng);

}  // namespace eaaslab
