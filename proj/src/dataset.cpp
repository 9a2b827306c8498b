#include "eaaslab/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <nlohmann/json.hpp>

#include "eaaslab/digest.hpp"
#include "eaaslab/errors.hpp"
#include "eaaslab/npy.hpp"
#include "eaaslab/rng.hpp"

namespace eaaslab {

using nlohmann::json;
namespace fs = std::filesystem;

std::string split_name(Split s) {
  switch (s) {
    case Split::train: return "train";
    case Split::test: return "test";
    case Split::unlabeled: return "unlabeled";
  }
  return "?";
}

Split split_from_name(const std::string& s) {
  if (s == "train") return Split::train;
  if (s == "test") return Split::test;
  if (s == "unlabeled") return Split::unlabeled;
  throw ConfigError("unknown split: " + s);
}

static std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char ch) { return std::tolower(ch); });
  return s;
}

static const std::vector<std::string> kKnownDatasets = {
    "cifar10", "stl10", "food101", "mnist", "fashionmnist", "svhn", "gtsrb", "imagenet"};

bool is_known_dataset(const std::string& name) {
  return std::find(kKnownDatasets.begin(), kKnownDatasets.end(), lower(name)) !=
         kKnownDatasets.end();
}

std::vector<std::string> known_datasets() { return kKnownDatasets; }

std::string ImageSet::digest() const {
  DigestStream d;
  d.update(name);
  d.update(split_name(split));
  d.update_pod(shape);
  d.update_pod(num_classes);
  size_t n = images.size();
  d.update_pod(n);
  for (const auto& img : images) d.update(img.data(), img.size() * sizeof(float));
  if (labels) d.update(labels->data(), labels->size() * sizeof(int));
  return d.hex();
}

DatasetManifest read_manifest(const fs::path& dataset_dir) {
  fs::path p = dataset_dir / "manifest.json";
  std::ifstream f(p);
  if (!f) throw LoadError("missing dataset manifest: " + p.string());
  json j;
  try {
    f >> j;
  } catch (const json::exception& e) {
    throw LoadError("bad dataset manifest " + p.string() + ": " + e.what());
  }
  DatasetManifest m;
  m.name = j.at("name").get<std::string>();
  auto sh = j.at("image_shape");
  m.shape = ImageShape{sh.at(0).get<int>(), sh.at(1).get<int>(), sh.at(2).get<int>()};
  m.num_classes = j.at("num_classes").get<int>();
  for (auto& [k, v] : j.at("splits").items()) m.splits.emplace_back(k, v.get<size_t>());
  return m;
}

void write_manifest(const fs::path& dataset_dir, const DatasetManifest& m) {
  json j;
  j["name"] = m.name;
  j["image_shape"] = {m.shape.h, m.shape.w, m.shape.c};
  j["num_classes"] = m.num_classes;
  json splits = json::object();
  for (auto& [k, v] : m.splits) splits[k] = v;
  j["splits"] = splits;
  fs::create_directories(dataset_dir);
  std::ofstream f(dataset_dir / "manifest.json");
  f << j.dump(2) << "\n";
  if (!f) throw LoadError("cannot write manifest in " + dataset_dir.string());
}

void save_split(const fs::path& root, const std::string& name, Split split, ImageShape shape,
                int num_classes, const std::vector<uint8_t>& images_u8,
                const std::vector<int32_t>* labels) {
  const std::string n = lower(name);
  fs::path dir = root / n;
  fs::create_directories(dir);

  size_t per = static_cast<size_t>(shape.pixels());
  size_t count = images_u8.size() / per;
  if (count * per != images_u8.size())
    throw PreconditionError("image byte count not divisible by pixel count");

  DatasetManifest m;
  if (fs::exists(dir / "manifest.json")) {
    m = read_manifest(dir);
    if (!(m.shape == shape)) throw PreconditionError("shape mismatch with existing splits");
  } else {
    m.name = n;
    m.shape = shape;
  }
  m.num_classes = std::max(m.num_classes, num_classes);
  std::erase_if(m.splits, [&](auto& kv) { return kv.first == split_name(split); });
  m.splits.emplace_back(split_name(split), count);

  std::vector<size_t> ish = {count, static_cast<size_t>(shape.h), static_cast<size_t>(shape.w),
                             static_cast<size_t>(shape.c)};
  npy::save_u8(dir / (split_name(split) + "_images.npy"), ish, images_u8.data());
  if (labels) {
    if (labels->size() != count) throw PreconditionError("labels/images length mismatch");
    npy::save_i32(dir / (split_name(split) + "_labels.npy"), {count}, labels->data());
  }
  write_manifest(dir, m);
}

std::vector<float> expand_channels(const std::vector<float>& image, int h, int w, int c) {
  if (c != 1) throw PreconditionError("expand_channels requires a single-channel image");
  if (image.size() != static_cast<size_t>(h) * w)
    throw PreconditionError("expand_channels: image size does not match h*w");
  std::vector<float> out(static_cast<size_t>(h) * w * 3);
  for (size_t i = 0; i < image.size(); ++i) {
    out[3 * i] = image[i];
    out[3 * i + 1] = image[i];
    out[3 * i + 2] = image[i];
  }
  return out;
}

std::vector<float> resize_bilinear(const std::vector<float>& src, ImageShape in, int out_h,
                                   int out_w) {
  if (in.h == out_h && in.w == out_w) return src;
  std::vector<float> out(static_cast<size_t>(out_h) * out_w * in.c);
  const float sy = static_cast<float>(in.h) / out_h;
  const float sx = static_cast<float>(in.w) / out_w;
  for (int y = 0; y < out_h; ++y) {
    float fy = (y + 0.5f) * sy - 0.5f;
    int y0 = static_cast<int>(std::floor(fy));
    float wy = fy - y0;
    int y0c = std::clamp(y0, 0, in.h - 1), y1c = std::clamp(y0 + 1, 0, in.h - 1);
    for (int x = 0; x < out_w; ++x) {
      float fx = (x + 0.5f) * sx - 0.5f;
      int x0 = static_cast<int>(std::floor(fx));
      float wx = fx - x0;
      int x0c = std::clamp(x0, 0, in.w - 1), x1c = std::clamp(x0 + 1, 0, in.w - 1);
      for (int ch = 0; ch < in.c; ++ch) {
        auto at = [&](int yy, int xx) {
          return src[(static_cast<size_t>(yy) * in.w + xx) * in.c + ch];
        };
        float v = (1 - wy) * ((1 - wx) * at(y0c, x0c) + wx * at(y0c, x1c)) +
                  wy * ((1 - wx) * at(y1c, x0c) + wx * at(y1c, x1c));
        out[(static_cast<size_t>(y) * out_w + x) * in.c + ch] = v;
      }
    }
  }
  return out;
}

ImageSet load_dataset(const std::string& name, Split split, const fs::path& root,
                      ImageShape canonical) {
  const std::string n = lower(name);
  if (!is_known_dataset(n)) throw ConfigError("unknown dataset: " + name);
  fs::path dir = root / n;
  DatasetManifest m = read_manifest(dir);

  fs::path ipath = dir / (split_name(split) + "_images.npy");
  if (!fs::exists(ipath))
    throw LoadError("dataset " + n + " has no " + split_name(split) + " split at " +
                    ipath.string());
  npy::Array arr = npy::load(ipath);
  if (arr.dtype != "|u1" || arr.shape.size() != 4)
    throw LoadError("expected u8 NxHxWxC image array: " + ipath.string());
  ImageShape src{static_cast<int>(arr.shape[1]), static_cast<int>(arr.shape[2]),
                 static_cast<int>(arr.shape[3])};
  if (!(src == m.shape)) throw LoadError("manifest/array shape mismatch for " + n);
  size_t count = arr.shape[0];

  ImageSet out;
  out.name = n;
  out.split = split;
  out.shape = canonical;
  out.num_classes = m.num_classes;
  out.images.resize(count);

  const size_t per = static_cast<size_t>(src.pixels());
  const bool gray = src.c == 1;
  if (!gray && src.c != 3) throw LoadError("unsupported channel count in " + n);
  if (canonical.c != 3) throw ConfigError("canonical shape must have 3 channels");

#pragma omp parallel for schedule(static)
  for (long long i = 0; i < static_cast<long long>(count); ++i) {
    const uint8_t* p = arr.raw.data() + static_cast<size_t>(i) * per;
    std::vector<float> img(per);
    for (size_t k = 0; k < per; ++k) img[k] = static_cast<float>(p[k]) * (1.0f / 255.0f);
    if (gray) img = expand_channels(img, src.h, src.w, 1);
    ImageShape rgb{src.h, src.w, 3};
    if (src.h != canonical.h || src.w != canonical.w)
      img = resize_bilinear(img, rgb, canonical.h, canonical.w);
    out.images[i] = std::move(img);
  }

  fs::path lpath = dir / (split_name(split) + "_labels.npy");
  if (fs::exists(lpath)) {
    npy::Array larr = npy::load(lpath);
    if (larr.dtype != "<i4" || larr.count() != count)
      throw LoadError("bad label array: " + lpath.string());
    const int32_t* lp = reinterpret_cast<const int32_t*>(larr.raw.data());
    std::vector<int> labels(lp, lp + count);
    for (int v : labels)
      if (v < 0 || v >= m.num_classes) throw LoadError("label out of range in " + n);
    out.labels = std::move(labels);
  }
  return out;
}

ImageSet sample_surrogate(const ImageSet& source, size_t count, uint64_t seed) {
  if (count > source.size())
    throw PreconditionError("sample_surrogate: count exceeds source size");
  std::vector<int> idx(source.size());
  for (size_t i = 0; i < idx.size(); ++i) idx[i] = static_cast<int>(i);
  Rng rng = named_rng(seed, "surrogate-sampling");
  // partial Fisher-Yates: first `count` entries are a uniform sample without replacement
  for (size_t i = 0; i < count; ++i) {
    size_t j = i + static_cast<size_t>(rng.index(idx.size() - i));
    std::swap(idx[i], idx[j]);
  }
  idx.resize(count);

  ImageSet out;
  out.name = source.name + "-surrogate";
  out.split = Split::unlabeled;
  out.shape = source.shape;
  out.num_classes = 0;
  out.source_name = source.name;
  out.source_indices = idx;
  out.images.reserve(count);
  for (int i : idx) out.images.push_back(source.images[i]);
  return out;
}

ImageSet filter_classes(const ImageSet& src, int num_classes) {
  if (!src.labels) throw PreconditionError("filter_classes requires labels");
  ImageSet out;
  out.name = src.name;
  out.split = src.split;
  out.shape = src.shape;
  out.num_classes = num_classes;
  std::vector<int> labels;
  for (size_t i = 0; i < src.images.size(); ++i) {
    if ((*src.labels)[i] < num_classes) {
      out.images.push_back(src.images[i]);
      labels.push_back((*src.labels)[i]);
    }
  }
  out.labels = std::move(labels);
  return out;
}

ImageSet take_prefix(const ImageSet& src, size_t count) {
  count = std::min(count, src.size());
  ImageSet out;
  out.name = src.name;
  out.split = src.split;
  out.shape = src.shape;
  out.num_classes = src.num_classes;
  out.images.assign(src.images.begin(), src.images.begin() + count);
  if (src.labels) out.labels = std::vector<int>(src.labels->begin(), src.labels->begin() + count);
  return out;
}

}  // namespace eaaslab
