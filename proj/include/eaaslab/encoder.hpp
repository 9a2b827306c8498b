#pragma once

#include <memory>
#include <string>
#include <vector>

#include "eaaslab/dataset.hpp"
#include "eaaslab/feature.hpp"
#include "eaaslab/nn.hpp"

namespace eaaslab {

enum class Provenance { unset, pretrained_target, stolen, defender_surrogate, local_baseline };

std::string provenance_name(Provenance p);
Provenance provenance_from_name(const std::string& s);

// Registered architecture families, desk-scale variants of the usual image
// backbones, ordered by expressiveness rank (used for the "one step more
// expressive than the target" default of a stolen encoder).
struct ArchInfo {
  std::string id;
  int rank;
  int default_width;
};

const std::vector<ArchInfo>& arch_registry();
bool is_known_arch(const std::string& id);
const ArchInfo& arch_info(const std::string& id);
// next arch up the rank order (the top entry maps to itself)
std::string next_more_expressive(const std::string& id);

// A differentiable image -> feature-vector map plus its metadata. Parameters
// are owned; read-only encode calls are thread-safe, training mutates the
// single owner's copy through net().
template <class T>
class EncoderT {
 public:
  EncoderT() = default;

  static EncoderT init(const std::string& arch_id, int feature_dim, ImageShape input_shape,
                       uint64_t seed, int width = 0);

  // Evaluation-mode forward (no stochastic layers exist in these nets).
  nn::Mat<T> encode_images(const std::vector<std::vector<float>>& images) const;
  nn::Mat<T> encode_act(const nn::Act<T>& batch) const;

  nn::Act<T> to_act(const std::vector<std::vector<float>>& images) const;
  nn::Act<T> to_act(const std::vector<const std::vector<float>*>& images) const;

  nn::Sequential<T>& net() { return net_; }
  const nn::Sequential<T>& net() const { return net_; }

  const std::string& arch_id() const { return arch_id_; }
  int width() const { return width_; }
  int feature_dim() const { return feature_dim_; }
  ImageShape input_shape() const { return input_shape_; }
  uint64_t init_seed() const { return init_seed_; }
  Provenance provenance() const { return provenance_; }
  void set_provenance(Provenance p) { provenance_ = p; }
  const std::string& training_digest() const { return training_digest_; }
  void set_training_digest(std::string d) { training_digest_ = std::move(d); }

  std::vector<T> flat_params() { return net_.flat_params(); }
  void set_flat_params(const std::vector<T>& p) { net_.set_flat_params(p); }

 private:
  nn::Sequential<T> net_;
  std::string arch_id_;
  int width_ = 0;
  int feature_dim_ = 0;
  ImageShape input_shape_;
  uint64_t init_seed_ = 0;
  Provenance provenance_ = Provenance::unset;
  std::string training_digest_;  // digest of the config that trained these weights
};

using Encoder = EncoderT<float>;

// encode with contract checks: images match input shape, output is
// N x feature_dim, finite.
FeatureBatch encode(const Encoder& enc, const std::vector<std::vector<float>>& images);

// Elementwise momentum interpolation: new = m*momentum + (1-m)*query.
template <class T>
EncoderT<T> momentum_update(const EncoderT<T>& query, const EncoderT<T>& momentum, double m);

// --------------------------- implementation -------------------------------

namespace detail {

template <class T>
void build_net(nn::Sequential<T>& net, const std::string& arch_id, int width, int feature_dim,
               ImageShape in);

}  // namespace detail

template <class T>
EncoderT<T> EncoderT<T>::init(const std::string& arch_id, int feature_dim, ImageShape input_shape,
                              uint64_t seed, int width) {
  if (!is_known_arch(arch_id)) throw ConfigError("unknown architecture: " + arch_id);
  if (feature_dim <= 0) throw PreconditionError("feature_dim must be positive");
  EncoderT<T> e;
  e.arch_id_ = arch_id;
  e.width_ = width > 0 ? width : arch_info(arch_id).default_width;
  e.feature_dim_ = feature_dim;
  e.input_shape_ = input_shape;
  e.init_seed_ = seed;
  e.net_.set_input_shape(nn::Shape3{input_shape.h, input_shape.w, input_shape.c});
  detail::build_net(e.net_, arch_id, e.width_, feature_dim, input_shape);
  e.net_.init(seed);
  return e;
}

template <class T>
nn::Act<T> EncoderT<T>::to_act(const std::vector<std::vector<float>>& images) const {
  std::vector<const std::vector<float>*> ptrs;
  ptrs.reserve(images.size());
  for (const auto& im : images) ptrs.push_back(&im);
  return to_act(ptrs);
}

template <class T>
nn::Act<T> EncoderT<T>::to_act(const std::vector<const std::vector<float>*>& images) const {
  const int pixels = input_shape_.pixels();
  nn::Act<T> a;
  a.sh = nn::Shape3{input_shape_.h, input_shape_.w, input_shape_.c};
  a.m.resize(static_cast<Eigen::Index>(images.size()), pixels);
  for (size_t i = 0; i < images.size(); ++i) {
    if (static_cast<int>(images[i]->size()) != pixels)
      throw PreconditionError("encode: image does not match encoder input shape");
    for (int k = 0; k < pixels; ++k) a.m(static_cast<Eigen::Index>(i), k) =
        static_cast<T>((*images[i])[k]);
  }
  return a;
}

template <class T>
nn::Mat<T> EncoderT<T>::encode_act(const nn::Act<T>& batch) const {
  if (batch.n() == 0) return nn::Mat<T>(0, feature_dim_);
  return net_.eval_forward(batch).m;
}

template <class T>
nn::Mat<T> EncoderT<T>::encode_images(const std::vector<std::vector<float>>& images) const {
  return encode_act(to_act(images));
}

template <class T>
EncoderT<T> momentum_update(const EncoderT<T>& query, const EncoderT<T>& momentum, double m) {
  if (query.arch_id() != momentum.arch_id() || query.width() != momentum.width() ||
      query.feature_dim() != momentum.feature_dim())
    throw PreconditionError("momentum_update: architecture mismatch");
  if (m < 0.0 || m > 1.0) throw PreconditionError("momentum coefficient must be in [0,1]");
  EncoderT<T> out = momentum;
  // params() is non-const for gradient access; only weights are read here
  auto qp = const_cast<EncoderT<T>&>(query).net().params();
  auto op = out.net().params();
  for (size_t i = 0; i < op.size(); ++i)
    op[i]->w = static_cast<T>(m) * op[i]->w + static_cast<T>(1.0 - m) * qp[i]->w;
  return out;
}

namespace detail {

template <class T>
void build_net(nn::Sequential<T>& net, const std::string& arch_id, int w, int feature_dim,
               ImageShape in) {
  using namespace nn;
  // pool any remaining spatial extent down to <=4x4 before a flatten head,
  // so large canonical shapes (e.g. 224x224) stay tractable
  auto pool_to_4 = [&] {
    while (std::min(net.output_shape().h, net.output_shape().w) > 4)
      net.add(std::make_unique<MaxPool2<T>>());
  };
  auto add_head_flatten = [&] {
    pool_to_4();
    net.add(std::make_unique<Flatten<T>>());
    net.add(std::make_unique<Dense<T>>(net.output_shape().pixels(), feature_dim, 1.0));
  };
  auto add_head_gap = [&](int channels) {
    net.add(std::make_unique<GlobalAvgPool<T>>());
    net.add(std::make_unique<Dense<T>>(channels, feature_dim, 1.0));
  };

  if (arch_id == "small-conv") {
    int c = in.c;
    int width = w;
    for (int i = 0; i < 3; ++i) {
      net.add(std::make_unique<Conv2d<T>>(c, width, 3));
      net.add(std::make_unique<ReLU<T>>());
      net.add(std::make_unique<MaxPool2<T>>());
      c = width;
      width *= 2;
    }
    add_head_flatten();
  } else if (arch_id == "vgg-small") {
    int c = in.c;
    int width = w;
    for (int i = 0; i < 3; ++i) {
      net.add(std::make_unique<Conv2d<T>>(c, width, 3));
      net.add(std::make_unique<ReLU<T>>());
      net.add(std::make_unique<Conv2d<T>>(width, width, 3));
      net.add(std::make_unique<ReLU<T>>());
      net.add(std::make_unique<MaxPool2<T>>());
      c = width;
      width *= 2;
    }
    add_head_flatten();
  } else if (arch_id == "resnet-small" || arch_id == "resnet-medium") {
    const int blocks = arch_id == "resnet-small" ? 1 : 2;
    net.add(std::make_unique<Conv2d<T>>(in.c, w, 3));
    net.add(std::make_unique<ReLU<T>>());
    int c = w;
    for (int stage = 0; stage < 3; ++stage) {
      const int oc = w << stage;
      for (int b = 0; b < blocks; ++b) {
        const int stride = (stage > 0 && b == 0) ? 2 : 1;
        net.add(std::make_unique<ResidualBlock<T>>(c, oc, stride));
        c = oc;
      }
    }
    add_head_flatten();
  } else if (arch_id == "densenet-small") {
    net.add(std::make_unique<Conv2d<T>>(in.c, w, 3));
    net.add(std::make_unique<ReLU<T>>());
    net.add(std::make_unique<MaxPool2<T>>());
    net.add(std::make_unique<DenseBlock<T>>(w, w / 2, 3));
    int c = w + 3 * (w / 2);
    net.add(std::make_unique<Conv2d<T>>(c, w * 2, 1, 1, 0));
    net.add(std::make_unique<ReLU<T>>());
    net.add(std::make_unique<MaxPool2<T>>());
    net.add(std::make_unique<DenseBlock<T>>(w * 2, w / 2, 3));
    add_head_gap(w * 2 + 3 * (w / 2));
  } else if (arch_id == "mobilenet-small") {
    net.add(std::make_unique<Conv2d<T>>(in.c, w, 3));
    net.add(std::make_unique<ReLU<T>>());
    int c = w;
    for (int stage = 0; stage < 3; ++stage) {
      const int oc = w << stage;
      const int stride = stage == 0 ? 1 : 2;
      // depthwise separable: depthwise 3x3 then pointwise 1x1
      net.add(std::make_unique<Conv2d<T>>(c, c, 3, stride, -1, c));
      net.add(std::make_unique<ReLU<T>>());
      net.add(std::make_unique<Conv2d<T>>(c, oc, 1, 1, 0));
      net.add(std::make_unique<ReLU<T>>());
      c = oc;
    }
    add_head_gap(c);
  } else if (arch_id == "shufflenet-small") {
    net.add(std::make_unique<Conv2d<T>>(in.c, w, 3));
    net.add(std::make_unique<ReLU<T>>());
    int c = w;
    for (int stage = 0; stage < 3; ++stage) {
      const int oc = w << stage;
      const int stride = stage == 0 ? 1 : 2;
      net.add(std::make_unique<Conv2d<T>>(c, oc, 1, 1, 0, 2));
      net.add(std::make_unique<ReLU<T>>());
      net.add(std::make_unique<ChannelShuffle<T>>(2));
      net.add(std::make_unique<Conv2d<T>>(oc, oc, 3, stride, -1, oc));
      net.add(std::make_unique<Conv2d<T>>(oc, oc, 1, 1, 0, 2));
      net.add(std::make_unique<ReLU<T>>());
      c = oc;
    }
    add_head_gap(c);
  } else {
    throw ConfigError("unknown architecture: " + arch_id);
  }
}

}  // namespace detail

}  // namespace eaaslab
