#pragma once

#include <filesystem>
#include <string>

#include "eaaslab/dataset.hpp"

namespace eaaslab {

// Synthetic stand-ins for the registered dataset names. Each dataset draws
// class-conditioned procedural textures (rings / checkers / diagonal stripes
// / spot grids at class-specific scales) with instance-level jitter, noise
// and dataset-specific color statistics, then stores them in the on-disk
// layout the loader reads. Class identity lives in pattern geometry, so it
// survives the augmentation family (crop/flip/jitter/grayscale).
struct DatasetProfile {
  std::string name;
  size_t train = 0, test = 0, unlabeled = 0;
  ImageShape shape;
  int classes = 0;
};

DatasetProfile dataset_profile(const std::string& name);

struct GenOverrides {
  long long train = -1, test = -1, unlabeled = -1;  // -1 = profile default
  int classes = -1;
  int h = -1, w = -1;
};

void generate_dataset(const std::string& name, const std::filesystem::path& root, uint64_t seed,
                      const GenOverrides& ov = {});

}  // namespace eaaslab
