#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace eaaslab {

enum class Split { train, test, unlabeled };

std::string split_name(Split s);
Split split_from_name(const std::string& s);

struct ImageShape {
  int h = 32, w = 32, c = 3;
  bool operator==(const ImageShape&) const = default;
  int pixels() const { return h * w * c; }
};

// A loaded image split. Pixels are floats in [0,1], one flat H*W*C
// (row-major, channels-last) vector per image. All images share `shape`.
struct ImageSet {
  std::string name;
  Split split = Split::train;
  ImageShape shape;
  int num_classes = 0;
  std::vector<std::vector<float>> images;
  std::optional<std::vector<int>> labels;

  // provenance for surrogate samples
  std::string source_name;
  std::vector<int> source_indices;

  size_t size() const { return images.size(); }
  bool empty() const { return images.empty(); }
  std::string digest() const;  // content digest for cache keys
};

// Framework on-disk layout: <root>/<name>/manifest.json plus one npy array
// per split ("<split>_images.npy" u8 NxHxWxC, optional "<split>_labels.npy" i4 N).
struct DatasetManifest {
  std::string name;
  ImageShape shape;
  int num_classes = 0;
  // split -> image count (absent split = not available)
  std::vector<std::pair<std::string, size_t>> splits;
};

DatasetManifest read_manifest(const std::filesystem::path& dataset_dir);
void write_manifest(const std::filesystem::path& dataset_dir, const DatasetManifest& m);

// Registered dataset names (lowercased) accepted by load_dataset.
bool is_known_dataset(const std::string& name);
std::vector<std::string> known_datasets();

// Loads a split and normalizes it to the canonical shape: pixel values scaled
// to [0,1], single-channel sources expanded to three identical channels,
// then bilinear-resized (resize happens before any augmentation downstream).
ImageSet load_dataset(const std::string& name, Split split, const std::filesystem::path& root,
                      ImageShape canonical = ImageShape{});

// Writes a split in the on-disk layout (used by the generator and tests).
void save_split(const std::filesystem::path& root, const std::string& name, Split split,
                ImageShape shape, int num_classes, const std::vector<uint8_t>& images_u8,
                const std::vector<int32_t>* labels);

// H x W x 1 -> H x W x 3 with all three channels identical to the input one.
std::vector<float> expand_channels(const std::vector<float>& image, int h, int w, int c);

// Bilinear resize of an HWC float image.
std::vector<float> resize_bilinear(const std::vector<float>& src, ImageShape in, int out_h,
                                   int out_w);

// Uniform sample of `count` images without replacement; deterministic in
// `seed`; provenance (source name + indices) recorded on the result.
ImageSet sample_surrogate(const ImageSet& source, size_t count, uint64_t seed);

// Keeps only images whose label is < num_classes (downstream subset tasks).
ImageSet filter_classes(const ImageSet& src, int num_classes);

// First `count` images (order-preserving); count > size is clamped.
ImageSet take_prefix(const ImageSet& src, size_t count);

}  // namespace eaaslab
