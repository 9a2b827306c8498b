#include "eaaslab/encoder.hpp"

#include <algorithm>

namespace eaaslab {

std::string provenance_name(Provenance p) {
  switch (p) {
    case Provenance::pretrained_target: return "pretrained-target";
    case Provenance::stolen: return "stolen";
    case Provenance::defender_surrogate: return "defender-surrogate";
    case Provenance::local_baseline: return "local-baseline";
    case Provenance::unset: return "unset";
  }
  return "unset";
}

Provenance provenance_from_name(const std::string& s) {
  if (s == "pretrained-target") return Provenance::pretrained_target;
  if (s == "stolen") return Provenance::stolen;
  if (s == "defender-surrogate") return Provenance::defender_surrogate;
  if (s == "local-baseline") return Provenance::local_baseline;
  return Provenance::unset;
}

const std::vector<ArchInfo>& arch_registry() {
  // rank orders the families by how expressive the desk-scale variant is;
  // a stolen encoder defaults to one rank above its target
  static const std::vector<ArchInfo> kRegistry = {
      {"shufflenet-small", 0, 16}, {"mobilenet-small", 1, 16}, {"densenet-small", 2, 16},
      {"vgg-small", 3, 12},        {"small-conv", 4, 16},      {"resnet-small", 5, 16},
      {"resnet-medium", 6, 16},
  };
  return kRegistry;
}

bool is_known_arch(const std::string& id) {
  const auto& r = arch_registry();
  return std::any_of(r.begin(), r.end(), [&](const ArchInfo& a) { return a.id == id; });
}

const ArchInfo& arch_info(const std::string& id) {
  for (const auto& a : arch_registry())
    if (a.id == id) return a;
  throw ConfigError("unknown architecture: " + id);
}

std::string next_more_expressive(const std::string& id) {
  const int rank = arch_info(id).rank;
  const ArchInfo* best = nullptr;
  for (const auto& a : arch_registry())
    if (a.rank == rank + 1) best = &a;
  return best ? best->id : id;
}

FeatureBatch encode(const Encoder& enc, const std::vector<std::vector<float>>& images) {
  FeatureBatch fb;
  fb.source = FeatureSource::direct;
  fb.vectors = enc.encode_images(images);
  if (fb.vectors.rows() != static_cast<Eigen::Index>(images.size()) ||
      (fb.vectors.rows() > 0 && fb.vectors.cols() != enc.feature_dim()))
    throw std::logic_error("encode produced a wrongly shaped feature batch");
  if (fb.vectors.rows() == 0) fb.vectors.resize(0, enc.feature_dim());
  return fb;
}

}  // namespace eaaslab
