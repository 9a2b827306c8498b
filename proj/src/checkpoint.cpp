#include "eaaslab/checkpoint.hpp"

#include <cstring>
#include <fstream>

#include <nlohmann/json.hpp>

#include "eaaslab/errors.hpp"

namespace eaaslab {

using nlohmann::json;

static constexpr char kMagic[8] = {'E', 'A', 'A', 'S', 'C', 'K', 'P', 'T'};
static constexpr uint32_t kVersion = 1;

void save_checkpoint(const Encoder& enc, const std::filesystem::path& path) {
  Encoder& e = const_cast<Encoder&>(enc);  // flat_params needs non-const param access
  std::vector<float> w = e.flat_params();

  json meta;
  meta["arch_id"] = enc.arch_id();
  meta["width"] = enc.width();
  meta["feature_dim"] = enc.feature_dim();
  meta["input_shape"] = {enc.input_shape().h, enc.input_shape().w, enc.input_shape().c};
  meta["init_seed"] = enc.init_seed();
  meta["provenance"] = provenance_name(enc.provenance());
  meta["training_digest"] = enc.training_digest();
  meta["weight_count"] = w.size();
  meta["scalar"] = "f32";
  const std::string mjson = meta.dump();

  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary);
    if (!f) throw LoadError("cannot open checkpoint for write: " + path.string());
    f.write(kMagic, 8);
    uint32_t ver = kVersion;
    f.write(reinterpret_cast<const char*>(&ver), 4);
    uint64_t mlen = mjson.size();
    f.write(reinterpret_cast<const char*>(&mlen), 8);
    f.write(mjson.data(), static_cast<std::streamsize>(mjson.size()));
    f.write(reinterpret_cast<const char*>(w.data()),
            static_cast<std::streamsize>(w.size() * sizeof(float)));
    if (!f) throw LoadError("short write: " + path.string());
  }
  std::filesystem::rename(tmp, path);  // atomic publish
}

Encoder load_checkpoint(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw LoadError("cannot open checkpoint: " + path.string());
  char magic[8];
  f.read(magic, 8);
  if (!f || std::memcmp(magic, kMagic, 8) != 0)
    throw LoadError("not a checkpoint file: " + path.string());
  uint32_t ver = 0;
  f.read(reinterpret_cast<char*>(&ver), 4);
  if (!f || ver != kVersion)
    throw LoadError("unsupported checkpoint version " + std::to_string(ver) + ": " +
                    path.string());
  uint64_t mlen = 0;
  f.read(reinterpret_cast<char*>(&mlen), 8);
  if (!f || mlen > (1ull << 20)) throw LoadError("corrupted checkpoint header: " + path.string());
  std::string mjson(mlen, '\0');
  f.read(mjson.data(), static_cast<std::streamsize>(mlen));
  if (!f) throw LoadError("truncated checkpoint metadata: " + path.string());

  json meta;
  try {
    meta = json::parse(mjson);
  } catch (const json::exception& e) {
    throw LoadError("bad checkpoint metadata in " + path.string() + ": " + e.what());
  }

  const std::string arch = meta.at("arch_id").get<std::string>();
  const int width = meta.at("width").get<int>();
  const int feature_dim = meta.at("feature_dim").get<int>();
  const auto shp = meta.at("input_shape");
  ImageShape in{shp.at(0).get<int>(), shp.at(1).get<int>(), shp.at(2).get<int>()};
  const uint64_t seed = meta.at("init_seed").get<uint64_t>();
  const uint64_t count = meta.at("weight_count").get<uint64_t>();
  if (meta.at("scalar").get<std::string>() != "f32")
    throw LoadError("unsupported checkpoint scalar type: " + path.string());

  Encoder enc = Encoder::init(arch, feature_dim, in, seed, width);
  const uint64_t expected = static_cast<uint64_t>(enc.net().param_count());
  if (count != expected)
    throw LoadError("checkpoint metadata inconsistent with stored weights (" +
                    std::to_string(count) + " vs expected " + std::to_string(expected) + "): " +
                    path.string());

  std::vector<float> w(count);
  f.read(reinterpret_cast<char*>(w.data()), static_cast<std::streamsize>(count * sizeof(float)));
  if (!f || f.gcount() != static_cast<std::streamsize>(count * sizeof(float)))
    throw LoadError("truncated checkpoint payload: " + path.string());
  for (float v : w)
    if (!std::isfinite(v)) throw LoadError("non-finite weight in checkpoint: " + path.string());
  enc.set_flat_params(w);
  enc.set_provenance(provenance_from_name(meta.at("provenance").get<std::string>()));
  enc.set_training_digest(meta.at("training_digest").get<std::string>());
  return enc;
}

}  // namespace eaaslab
