#pragma once

#include <Eigen/Core>

#include <cmath>
#include <cstring>
#include <memory>
#include <string>
#include <vector>

#include "eaaslab/errors.hpp"
#include "eaaslab/rng.hpp"

namespace eaaslab::nn {

template <class T>
using Mat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct Shape3 {
  int h = 1, w = 1, c = 1;
  int pixels() const { return h * w * c; }
  bool operator==(const Shape3&) const = default;
};

// Activation batch in channels-last layout: rows = N samples, cols = h*w*c.
template <class T>
struct Act {
  Mat<T> m;
  Shape3 sh;
  int n() const { return static_cast<int>(m.rows()); }
};

template <class T>
struct Param {
  Mat<T> w;
  Mat<T> g;
  void alloc(Eigen::Index rows, Eigen::Index cols) {
    w.setZero(rows, cols);
    g.setZero(rows, cols);
  }
  Eigen::Index size() const { return w.size(); }
};

// Layers separate a stateless, thread-safe eval path from a stateful train
// path. Only one owner may drive train_forward/backward at a time; eval
// never mutates the layer.
template <class T>
class Layer {
 public:
  virtual ~Layer() = default;
  virtual std::string kind() const = 0;
  virtual Shape3 out_shape(Shape3 in) const = 0;
  virtual void eval_forward(const Act<T>& x, Act<T>& y) const = 0;
  virtual void train_forward(const Act<T>& x, Act<T>& y) = 0;
  // dy is consumed; dx must be produced (same shape as the forward input)
  virtual void backward(const Act<T>& x, const Act<T>& dy, Act<T>& dx) = 0;
  virtual void collect_params(std::vector<Param<T>*>& out) { (void)out; }
  virtual void init_params(uint64_t seed, int& layer_index) { (void)seed; (void)layer_index; }
  virtual std::unique_ptr<Layer<T>> clone() const = 0;
};

namespace detail {

template <class T>
void kaiming_init(Mat<T>& w, int fan_in, double gain, Rng& rng) {
  const double stddev = gain / std::sqrt(static_cast<double>(fan_in));
  for (Eigen::Index i = 0; i < w.size(); ++i)
    w.data()[i] = static_cast<T>(rng.normal() * stddev);
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Conv2d: kxk convolution, zero padding, optional stride and channel groups.
// Weights are stored per group as [k*k*(in_c/groups) x (out_c/groups)] blocks
// stacked column-wise; im2col + GEMM implementation.
// ---------------------------------------------------------------------------
template <class T>
class Conv2d : public Layer<T> {
 public:
  Conv2d(int in_c, int out_c, int k, int stride = 1, int pad = -1, int groups = 1,
         double init_gain = std::sqrt(2.0))
      : in_c_(in_c), out_c_(out_c), k_(k), stride_(stride),
        pad_(pad < 0 ? k / 2 : pad), groups_(groups), gain_(init_gain) {
    if (in_c % groups || out_c % groups)
      throw ConfigError("conv: channels not divisible by groups");
    icg_ = in_c / groups;
    ocg_ = out_c / groups;
    weight_.alloc(static_cast<Eigen::Index>(k_) * k_ * icg_, out_c_);
    bias_.alloc(1, out_c_);
  }

  std::string kind() const override { return "conv"; }

  Shape3 out_shape(Shape3 in) const override {
    if (in.c != in_c_) throw PreconditionError("conv: channel mismatch");
    return Shape3{(in.h + 2 * pad_ - k_) / stride_ + 1, (in.w + 2 * pad_ - k_) / stride_ + 1,
                  out_c_};
  }

  void eval_forward(const Act<T>& x, Act<T>& y) const override {
    Mat<T> scratch;
    run_forward(x, y, scratch);
  }

  void train_forward(const Act<T>& x, Act<T>& y) override { run_forward(x, y, scratch_); }

  void backward(const Act<T>& x, const Act<T>& dy, Act<T>& dx) override {
    const Shape3 os = out_shape(x.sh);
    const Eigen::Index rows = static_cast<Eigen::Index>(x.n()) * os.h * os.w;
    Eigen::Map<const Mat<T>> dyp(dy.m.data(), rows, out_c_);

    dx.sh = x.sh;
    dx.m.setZero(x.n(), x.sh.pixels());

    Mat<T> dpatch;
    for (int g = 0; g < groups_; ++g) {
      im2col(x, g, scratch_);
      auto wg = weight_.w.middleCols(g * ocg_, ocg_);
      auto dyg = dyp.middleCols(g * ocg_, ocg_);
      weight_.g.middleCols(g * ocg_, ocg_).noalias() += scratch_.transpose() * dyg;
      dpatch.noalias() = dyg * wg.transpose();
      col2im_add(dpatch, x.sh, os, g, dx);
    }
    bias_.g.noalias() += dyp.colwise().sum();
  }

  void collect_params(std::vector<Param<T>*>& out) override {
    out.push_back(&weight_);
    out.push_back(&bias_);
  }

  void init_params(uint64_t seed, int& layer_index) override {
    Rng rng = named_rng(seed, "param-init", static_cast<uint64_t>(layer_index++));
    detail::kaiming_init(weight_.w, k_ * k_ * icg_, gain_, rng);
    bias_.w.setZero();
  }

  std::unique_ptr<Layer<T>> clone() const override {
    auto c = std::make_unique<Conv2d<T>>(in_c_, out_c_, k_, stride_, pad_, groups_, gain_);
    c->weight_.w = weight_.w;
    c->bias_.w = bias_.w;
    return c;
  }

 private:
  void run_forward(const Act<T>& x, Act<T>& y, Mat<T>& scratch) const {
    const Shape3 os = out_shape(x.sh);
    y.sh = os;
    y.m.resize(x.n(), os.pixels());
    const Eigen::Index rows = static_cast<Eigen::Index>(x.n()) * os.h * os.w;
    Eigen::Map<Mat<T>> yp(y.m.data(), rows, out_c_);
    for (int g = 0; g < groups_; ++g) {
      im2col(x, g, scratch);
      yp.middleCols(g * ocg_, ocg_).noalias() = scratch * weight_.w.middleCols(g * ocg_, ocg_);
    }
    yp.rowwise() += bias_.w.row(0);
  }

  // patches for group g: [N*oh*ow x k*k*icg]
  void im2col(const Act<T>& x, int g, Mat<T>& patches) const {
    const Shape3 is = x.sh;
    const Shape3 os = out_shape(is);
    const Eigen::Index rows = static_cast<Eigen::Index>(x.n()) * os.h * os.w;
    patches.resize(rows, static_cast<Eigen::Index>(k_) * k_ * icg_);
    const int coff = g * icg_;
#pragma omp parallel for schedule(static)
    for (long long n = 0; n < x.n(); ++n) {
      const T* xrow = x.m.data() + n * is.pixels();
      for (int oy = 0; oy < os.h; ++oy) {
        for (int ox = 0; ox < os.w; ++ox) {
          T* prow = patches.data() +
                    ((n * os.h + oy) * os.w + ox) * patches.cols();
          for (int ky = 0; ky < k_; ++ky) {
            const int iy = oy * stride_ + ky - pad_;
            for (int kx = 0; kx < k_; ++kx) {
              const int ix = ox * stride_ + kx - pad_;
              T* dst = prow + (ky * k_ + kx) * icg_;
              if (iy < 0 || iy >= is.h || ix < 0 || ix >= is.w) {
                std::memset(dst, 0, sizeof(T) * icg_);
              } else {
                const T* src = xrow + (static_cast<size_t>(iy) * is.w + ix) * is.c + coff;
                std::memcpy(dst, src, sizeof(T) * icg_);
              }
            }
          }
        }
      }
    }
  }

  void col2im_add(const Mat<T>& dpatch, Shape3 is, Shape3 os, int g, Act<T>& dx) const {
    const int coff = g * icg_;
#pragma omp parallel for schedule(static)
    for (long long n = 0; n < dx.n(); ++n) {
      T* dxrow = dx.m.data() + n * is.pixels();
      for (int oy = 0; oy < os.h; ++oy) {
        for (int ox = 0; ox < os.w; ++ox) {
          const T* prow = dpatch.data() +
                          ((n * os.h + oy) * os.w + ox) * dpatch.cols();
          for (int ky = 0; ky < k_; ++ky) {
            const int iy = oy * stride_ + ky - pad_;
            if (iy < 0 || iy >= is.h) continue;
            for (int kx = 0; kx < k_; ++kx) {
              const int ix = ox * stride_ + kx - pad_;
              if (ix < 0 || ix >= is.w) continue;
              T* dst = dxrow + (static_cast<size_t>(iy) * is.w + ix) * is.c + coff;
              const T* src = prow + (ky * k_ + kx) * icg_;
              for (int c = 0; c < icg_; ++c) dst[c] += src[c];
            }
          }
        }
      }
    }
  }

  int in_c_, out_c_, k_, stride_, pad_, groups_, icg_ = 0, ocg_ = 0;
  double gain_;
  Param<T> weight_, bias_;
  Mat<T> scratch_;
};

// ---------------------------------------------------------------------------
template <class T>
class ReLU : public Layer<T> {
 public:
  std::string kind() const override { return "relu"; }
  Shape3 out_shape(Shape3 in) const override { return in; }

  void eval_forward(const Act<T>& x, Act<T>& y) const override {
    y.sh = x.sh;
    y.m = x.m.cwiseMax(T(0));
  }
  void train_forward(const Act<T>& x, Act<T>& y) override { eval_forward(x, y); }
  void backward(const Act<T>& x, const Act<T>& dy, Act<T>& dx) override {
    dx.sh = x.sh;
    dx.m = ((x.m.array() > T(0)).template cast<T>() * dy.m.array()).matrix();
  }
  std::unique_ptr<Layer<T>> clone() const override { return std::make_unique<ReLU<T>>(); }
};

// ---------------------------------------------------------------------------
template <class T>
class MaxPool2 : public Layer<T> {
 public:
  std::string kind() const override { return "maxpool2"; }
  Shape3 out_shape(Shape3 in) const override { return Shape3{in.h / 2, in.w / 2, in.c}; }

  void eval_forward(const Act<T>& x, Act<T>& y) const override { run(x, y, nullptr); }
  void train_forward(const Act<T>& x, Act<T>& y) override { run(x, y, &argmax_); }

  void backward(const Act<T>& x, const Act<T>& dy, Act<T>& dx) override {
    dx.sh = x.sh;
    dx.m.setZero(x.n(), x.sh.pixels());
    const Eigen::Index per_out = dy.sh.pixels();
#pragma omp parallel for schedule(static)
    for (long long n = 0; n < x.n(); ++n) {
      const T* dyp = dy.m.data() + n * per_out;
      T* dxp = dx.m.data() + n * x.sh.pixels();
      const int* am = argmax_.data() + n * per_out;
      for (Eigen::Index i = 0; i < per_out; ++i) dxp[am[i]] += dyp[i];
    }
  }
  std::unique_ptr<Layer<T>> clone() const override { return std::make_unique<MaxPool2<T>>(); }

 private:
  void run(const Act<T>& x, Act<T>& y, std::vector<int>* am) const {
    const Shape3 is = x.sh;
    const Shape3 os = out_shape(is);
    y.sh = os;
    y.m.resize(x.n(), os.pixels());
    if (am) am->resize(static_cast<size_t>(x.n()) * os.pixels());
#pragma omp parallel for schedule(static)
    for (long long n = 0; n < x.n(); ++n) {
      const T* xp = x.m.data() + n * is.pixels();
      T* yp = y.m.data() + n * os.pixels();
      int* amp = am ? am->data() + n * os.pixels() : nullptr;
      for (int oy = 0; oy < os.h; ++oy) {
        for (int ox = 0; ox < os.w; ++ox) {
          for (int c = 0; c < is.c; ++c) {
            int best = ((2 * oy) * is.w + 2 * ox) * is.c + c;
            T bv = xp[best];
            for (int dy2 = 0; dy2 < 2; ++dy2) {
              for (int dx2 = 0; dx2 < 2; ++dx2) {
                const int iy = 2 * oy + dy2, ix = 2 * ox + dx2;
                if (iy >= is.h || ix >= is.w) continue;
                const int idx = (iy * is.w + ix) * is.c + c;
                if (xp[idx] > bv) {
                  bv = xp[idx];
                  best = idx;
                }
              }
            }
            const int o = (oy * os.w + ox) * is.c + c;
            yp[o] = bv;
            if (amp) amp[o] = best;
          }
        }
      }
    }
  }

  std::vector<int> argmax_;  // train-path cache
};

// ---------------------------------------------------------------------------
template <class T>
class GlobalAvgPool : public Layer<T> {
 public:
  std::string kind() const override { return "gap"; }
  Shape3 out_shape(Shape3 in) const override { return Shape3{1, 1, in.c}; }

  void eval_forward(const Act<T>& x, Act<T>& y) const override {
    const int np = x.sh.h * x.sh.w;
    y.sh = out_shape(x.sh);
    y.m.setZero(x.n(), x.sh.c);
    for (int n = 0; n < x.n(); ++n) {
      Eigen::Map<const Mat<T>> px(x.m.data() + static_cast<size_t>(n) * x.sh.pixels(), np,
                                  x.sh.c);
      y.m.row(n) = px.colwise().sum() / T(np);
    }
  }
  void train_forward(const Act<T>& x, Act<T>& y) override { eval_forward(x, y); }
  void backward(const Act<T>& x, const Act<T>& dy, Act<T>& dx) override {
    const int np = x.sh.h * x.sh.w;
    dx.sh = x.sh;
    dx.m.resize(x.n(), x.sh.pixels());
    for (int n = 0; n < x.n(); ++n) {
      Eigen::Map<Mat<T>> pdx(dx.m.data() + static_cast<size_t>(n) * x.sh.pixels(), np, x.sh.c);
      pdx = (dy.m.row(n) / T(np)).replicate(np, 1);
    }
  }
  std::unique_ptr<Layer<T>> clone() const override {
    return std::make_unique<GlobalAvgPool<T>>();
  }
};

// ---------------------------------------------------------------------------
// Reinterprets the activation as a flat vector (no data movement).
template <class T>
class Flatten : public Layer<T> {
 public:
  std::string kind() const override { return "flatten"; }
  Shape3 out_shape(Shape3 in) const override { return Shape3{1, 1, in.pixels()}; }
  void eval_forward(const Act<T>& x, Act<T>& y) const override {
    y.sh = out_shape(x.sh);
    y.m = x.m;
  }
  void train_forward(const Act<T>& x, Act<T>& y) override { eval_forward(x, y); }
  void backward(const Act<T>& x, const Act<T>& dy, Act<T>& dx) override {
    dx.sh = x.sh;
    dx.m = dy.m;
  }
  std::unique_ptr<Layer<T>> clone() const override { return std::make_unique<Flatten<T>>(); }
};

// ---------------------------------------------------------------------------
template <class T>
class Dense : public Layer<T> {
 public:
  Dense(int in, int out, double init_gain = std::sqrt(2.0))
      : in_(in), out_(out), gain_(init_gain) {
    weight_.alloc(in, out);
    bias_.alloc(1, out);
  }
  std::string kind() const override { return "dense"; }
  Shape3 out_shape(Shape3 in) const override {
    if (in.pixels() != in_) throw PreconditionError("dense: input size mismatch");
    return Shape3{1, 1, out_};
  }
  void eval_forward(const Act<T>& x, Act<T>& y) const override {
    y.sh = Shape3{1, 1, out_};
    y.m.noalias() = x.m * weight_.w;
    y.m.rowwise() += bias_.w.row(0);
  }
  void train_forward(const Act<T>& x, Act<T>& y) override { eval_forward(x, y); }
  void backward(const Act<T>& x, const Act<T>& dy, Act<T>& dx) override {
    weight_.g.noalias() += x.m.transpose() * dy.m;
    bias_.g.noalias() += dy.m.colwise().sum();
    dx.sh = x.sh;
    dx.m.noalias() = dy.m * weight_.w.transpose();
  }
  void collect_params(std::vector<Param<T>*>& out) override {
    out.push_back(&weight_);
    out.push_back(&bias_);
  }
  void init_params(uint64_t seed, int& layer_index) override {
    Rng rng = named_rng(seed, "param-init", static_cast<uint64_t>(layer_index++));
    detail::kaiming_init(weight_.w, in_, gain_, rng);
    bias_.w.setZero();
  }
  std::unique_ptr<Layer<T>> clone() const override {
    auto c = std::make_unique<Dense<T>>(in_, out_, gain_);
    c->weight_.w = weight_.w;
    c->bias_.w = bias_.w;
    return c;
  }

 private:
  int in_, out_;
  double gain_;
  Param<T> weight_, bias_;
};

// ---------------------------------------------------------------------------
// Channel shuffle for grouped convolutions: channel i of group g moves to
// interleaved position. Pure permutation.
template <class T>
class ChannelShuffle : public Layer<T> {
 public:
  explicit ChannelShuffle(int groups) : groups_(groups) {}
  std::string kind() const override { return "shuffle"; }
  Shape3 out_shape(Shape3 in) const override {
    if (in.c % groups_) throw PreconditionError("shuffle: channels not divisible");
    return in;
  }
  void eval_forward(const Act<T>& x, Act<T>& y) const override {
    permute(x, y, /*inverse=*/false);
  }
  void train_forward(const Act<T>& x, Act<T>& y) override { eval_forward(x, y); }
  void backward(const Act<T>& x, const Act<T>& dy, Act<T>& dx) override {
    (void)x;
    permute(dy, dx, /*inverse=*/true);
  }
  std::unique_ptr<Layer<T>> clone() const override {
    return std::make_unique<ChannelShuffle<T>>(groups_);
  }

 private:
  void permute(const Act<T>& x, Act<T>& y, bool inverse) const {
    const int c = x.sh.c, cg = c / groups_;
    y.sh = x.sh;
    y.m.resize(x.n(), x.m.cols());
    const Eigen::Index np = static_cast<Eigen::Index>(x.n()) * x.sh.h * x.sh.w;
    Eigen::Map<const Mat<T>> xin(x.m.data(), np, c);
    Eigen::Map<Mat<T>> yout(y.m.data(), np, c);
    for (int g = 0; g < groups_; ++g)
      for (int i = 0; i < cg; ++i) {
        const int src = g * cg + i, dst = i * groups_ + g;
        if (inverse)
          yout.col(src) = xin.col(dst);
        else
          yout.col(dst) = xin.col(src);
      }
  }
  int groups_;
};

// ---------------------------------------------------------------------------
// relu(conv(relu(conv(x))) + shortcut(x)); shortcut is a 1x1 conv when the
// channel count or stride changes, identity otherwise.
template <class T>
class ResidualBlock : public Layer<T> {
 public:
  ResidualBlock(int in_c, int out_c, int stride)
      : conv1_(in_c, out_c, 3, stride), conv2_(out_c, out_c, 3, 1) {
    if (in_c != out_c || stride != 1)
      shortcut_ = std::make_unique<Conv2d<T>>(in_c, out_c, 1, stride, 0, 1, 1.0);
  }
  ResidualBlock(const ResidualBlock& o)
      : conv1_(o.conv1_), conv2_(o.conv2_),
        shortcut_(o.shortcut_ ? std::make_unique<Conv2d<T>>(*o.shortcut_) : nullptr) {}
  std::string kind() const override { return "resblock"; }
  Shape3 out_shape(Shape3 in) const override { return conv2_.out_shape(conv1_.out_shape(in)); }

  void eval_forward(const Act<T>& x, Act<T>& y) const override {
    Act<T> a, b;
    conv1_.eval_forward(x, a);
    relu1_.eval_forward(a, b);
    conv2_.eval_forward(b, y);
    if (shortcut_) {
      Act<T> s;
      shortcut_->eval_forward(x, s);
      y.m += s.m;
    } else {
      y.m += x.m;
    }
    y.m = y.m.cwiseMax(T(0));
  }

  void train_forward(const Act<T>& x, Act<T>& y) override {
    conv1_.train_forward(x, a_);
    relu1_.train_forward(a_, b_);
    conv2_.train_forward(b_, pre_);
    if (shortcut_) {
      shortcut_->train_forward(x, s_);
      pre_.m += s_.m;
    } else {
      pre_.m += x.m;
    }
    y.sh = pre_.sh;
    y.m = pre_.m.cwiseMax(T(0));
  }

  void backward(const Act<T>& x, const Act<T>& dy, Act<T>& dx) override {
    Act<T> dpre;
    dpre.sh = pre_.sh;
    dpre.m = ((pre_.m.array() > T(0)).template cast<T>() * dy.m.array()).matrix();

    Act<T> db, da, dmain;
    conv2_.backward(b_, dpre, db);
    relu1_.backward(a_, db, da);
    conv1_.backward(x, da, dmain);

    if (shortcut_) {
      Act<T> dshort;
      shortcut_->backward(x, dpre, dshort);
      dx.sh = x.sh;
      dx.m = dmain.m + dshort.m;
    } else {
      dx.sh = x.sh;
      dx.m = dmain.m + dpre.m;
    }
  }

  void collect_params(std::vector<Param<T>*>& out) override {
    conv1_.collect_params(out);
    conv2_.collect_params(out);
    if (shortcut_) shortcut_->collect_params(out);
  }
  void init_params(uint64_t seed, int& layer_index) override {
    conv1_.init_params(seed, layer_index);
    conv2_.init_params(seed, layer_index);
    if (shortcut_) shortcut_->init_params(seed, layer_index);
  }
  std::unique_ptr<Layer<T>> clone() const override {
    return std::make_unique<ResidualBlock<T>>(*this);
  }

 private:
  Conv2d<T> conv1_, conv2_;
  ReLU<T> relu1_;
  std::unique_ptr<Conv2d<T>> shortcut_;
  Act<T> a_, b_, pre_, s_;  // train-path caches
};

// ---------------------------------------------------------------------------
// DenseNet-style block: `layers` times, append relu(conv3x3(...)) of `growth`
// channels to the running channel stack.
template <class T>
class DenseBlock : public Layer<T> {
 public:
  DenseBlock(int in_c, int growth, int layers) : in_c_(in_c), growth_(growth) {
    for (int i = 0; i < layers; ++i)
      convs_.emplace_back(std::make_unique<Conv2d<T>>(in_c + i * growth, growth, 3, 1));
  }
  DenseBlock(const DenseBlock& o) : in_c_(o.in_c_), growth_(o.growth_) {
    for (const auto& c : o.convs_) convs_.emplace_back(std::make_unique<Conv2d<T>>(*c));
  }
  std::string kind() const override { return "denseblock"; }
  Shape3 out_shape(Shape3 in) const override {
    return Shape3{in.h, in.w, in.c + static_cast<int>(convs_.size()) * growth_};
  }

  void eval_forward(const Act<T>& x, Act<T>& y) const override {
    Act<T> cur = x;
    for (const auto& conv : convs_) {
      Act<T> t;
      conv->eval_forward(cur, t);
      t.m = t.m.cwiseMax(T(0));
      cur = concat(cur, t);
    }
    y = std::move(cur);
  }

  void train_forward(const Act<T>& x, Act<T>& y) override {
    stack_.clear();
    pre_.clear();
    stack_.push_back(x);
    for (auto& conv : convs_) {
      Act<T> t;
      conv->train_forward(stack_.back(), t);
      pre_.push_back(t);  // pre-activation cache for the relu mask
      t.m = t.m.cwiseMax(T(0));
      stack_.push_back(concat(stack_.back(), t));
    }
    y = stack_.back();
  }

  void backward(const Act<T>& x, const Act<T>& dy, Act<T>& dx) override {
    (void)x;
    Act<T> dcur = dy;
    for (int i = static_cast<int>(convs_.size()) - 1; i >= 0; --i) {
      const Act<T>& input = stack_[i];
      Act<T> dinput_part, dnew;
      split(dcur, input.sh.c, dinput_part, dnew);
      dnew.m = ((pre_[i].m.array() > T(0)).template cast<T>() * dnew.m.array()).matrix();
      Act<T> dthrough;
      convs_[i]->backward(input, dnew, dthrough);
      dcur.sh = input.sh;
      dcur.m = dinput_part.m + dthrough.m;
    }
    dx = std::move(dcur);
  }

  void collect_params(std::vector<Param<T>*>& out) override {
    for (auto& c : convs_) c->collect_params(out);
  }
  void init_params(uint64_t seed, int& layer_index) override {
    for (auto& c : convs_) c->init_params(seed, layer_index);
  }
  std::unique_ptr<Layer<T>> clone() const override {
    return std::make_unique<DenseBlock<T>>(*this);
  }

 private:
  static Act<T> concat(const Act<T>& a, const Act<T>& b) {
    Act<T> out;
    out.sh = Shape3{a.sh.h, a.sh.w, a.sh.c + b.sh.c};
    out.m.resize(a.n(), out.sh.pixels());
    const Eigen::Index np = static_cast<Eigen::Index>(a.n()) * a.sh.h * a.sh.w;
    Eigen::Map<Mat<T>> po(out.m.data(), np, out.sh.c);
    po.leftCols(a.sh.c) = Eigen::Map<const Mat<T>>(a.m.data(), np, a.sh.c);
    po.rightCols(b.sh.c) = Eigen::Map<const Mat<T>>(b.m.data(), np, b.sh.c);
    return out;
  }
  static void split(const Act<T>& d, int c_first, Act<T>& first, Act<T>& second) {
    const Eigen::Index np = static_cast<Eigen::Index>(d.n()) * d.sh.h * d.sh.w;
    Eigen::Map<const Mat<T>> pd(d.m.data(), np, d.sh.c);
    first.sh = Shape3{d.sh.h, d.sh.w, c_first};
    first.m.resize(d.n(), first.sh.pixels());
    Eigen::Map<Mat<T>>(first.m.data(), np, c_first) = pd.leftCols(c_first);
    const int c_rest = d.sh.c - c_first;
    second.sh = Shape3{d.sh.h, d.sh.w, c_rest};
    second.m.resize(d.n(), second.sh.pixels());
    Eigen::Map<Mat<T>>(second.m.data(), np, c_rest) = pd.rightCols(c_rest);
  }

  int in_c_, growth_;
  std::vector<std::unique_ptr<Conv2d<T>>> convs_;
  std::vector<Act<T>> stack_, pre_;  // train-path caches
};

// ---------------------------------------------------------------------------
template <class T>
class Sequential {
 public:
  Sequential() = default;
  Sequential(const Sequential& o) { *this = o; }
  Sequential& operator=(const Sequential& o) {
    layers_.clear();
    for (const auto& l : o.layers_) layers_.push_back(l->clone());
    in_shape_ = o.in_shape_;
    return *this;
  }
  Sequential(Sequential&&) = default;
  Sequential& operator=(Sequential&&) = default;

  void set_input_shape(Shape3 s) { in_shape_ = s; }
  Shape3 input_shape() const { return in_shape_; }
  void add(std::unique_ptr<Layer<T>> l) { layers_.push_back(std::move(l)); }
  size_t depth() const { return layers_.size(); }

  Shape3 output_shape() const {
    Shape3 s = in_shape_;
    for (const auto& l : layers_) s = l->out_shape(s);
    return s;
  }

  void init(uint64_t seed) {
    int idx = 0;
    for (auto& l : layers_) l->init_params(seed, idx);
  }

  std::vector<Param<T>*> params() {
    std::vector<Param<T>*> out;
    for (auto& l : layers_) l->collect_params(out);
    return out;
  }

  Eigen::Index param_count() {
    Eigen::Index n = 0;
    for (auto* p : params()) n += p->size();
    return n;
  }

  std::vector<T> flat_params() {
    std::vector<T> out;
    out.reserve(static_cast<size_t>(param_count()));
    for (auto* p : params()) out.insert(out.end(), p->w.data(), p->w.data() + p->size());
    return out;
  }

  void set_flat_params(const std::vector<T>& flat) {
    size_t off = 0;
    for (auto* p : params()) {
      if (off + static_cast<size_t>(p->size()) > flat.size())
        throw PreconditionError("flat parameter vector too short");
      std::memcpy(p->w.data(), flat.data() + off, sizeof(T) * p->size());
      off += static_cast<size_t>(p->size());
    }
    if (off != flat.size()) throw PreconditionError("flat parameter vector size mismatch");
  }

  void zero_grad() {
    for (auto* p : params()) p->g.setZero();
  }

  // Thread-safe inference.
  Act<T> eval_forward(const Act<T>& x) const {
    Act<T> cur = x, next;
    for (const auto& l : layers_) {
      l->eval_forward(cur, next);
      std::swap(cur, next);
    }
    return cur;
  }

  // Training forward; caches activations for backward. Single owner.
  const Act<T>& train_forward(const Act<T>& x) {
    acts_.resize(layers_.size() + 1);
    acts_[0] = x;
    for (size_t i = 0; i < layers_.size(); ++i)
      layers_[i]->train_forward(acts_[i], acts_[i + 1]);
    return acts_.back();
  }

  // Backpropagates dLoss/dOutput; accumulates parameter gradients.
  Act<T> backward(const Act<T>& dout) {
    Act<T> dcur = dout, dprev;
    for (size_t i = layers_.size(); i-- > 0;) {
      layers_[i]->backward(acts_[i], dcur, dprev);
      std::swap(dcur, dprev);
    }
    return dcur;
  }

  void drop_caches() {
    acts_.clear();
    acts_.shrink_to_fit();
  }

 private:
  std::vector<std::unique_ptr<Layer<T>>> layers_;
  std::vector<Act<T>> acts_;
  Shape3 in_shape_;
};

// ---------------------------------------------------------------------------
// Optimizers. Adam is the default across all training loops; plain SGD is
// selectable where a schematic gradient-descent step is wanted.
// ---------------------------------------------------------------------------
template <class T>
class Adam {
 public:
  Adam(double lr, double b1 = 0.9, double b2 = 0.999, double eps = 1e-8)
      : lr_(lr), b1_(b1), b2_(b2), eps_(eps) {}

  void step(const std::vector<Param<T>*>& ps) {
    if (m_.empty()) {
      for (auto* p : ps) {
        m_.emplace_back(Mat<T>::Zero(p->w.rows(), p->w.cols()));
        v_.emplace_back(Mat<T>::Zero(p->w.rows(), p->w.cols()));
      }
    }
    ++t_;
    const T bc1 = static_cast<T>(1.0 - std::pow(b1_, t_));
    const T bc2 = static_cast<T>(1.0 - std::pow(b2_, t_));
    for (size_t i = 0; i < ps.size(); ++i) {
      auto& m = m_[i];
      auto& v = v_[i];
      const auto& g = ps[i]->g;
      m = static_cast<T>(b1_) * m + static_cast<T>(1.0 - b1_) * g;
      v = (static_cast<T>(b2_) * v.array() + static_cast<T>(1.0 - b2_) * g.array().square())
              .matrix();
      ps[i]->w.array() -= static_cast<T>(lr_) * (m.array() / bc1) /
                          ((v.array() / bc2).sqrt() + static_cast<T>(eps_));
    }
  }

 private:
  double lr_, b1_, b2_, eps_;
  int t_ = 0;
  std::vector<Mat<T>> m_, v_;
};

template <class T>
class Sgd {
 public:
  explicit Sgd(double lr) : lr_(lr) {}
  void step(const std::vector<Param<T>*>& ps) {
    for (auto* p : ps) p->w -= static_cast<T>(lr_) * p->g;
  }

 private:
  double lr_;
};

enum class OptimizerKind { adam, sgd };

template <class T>
class Optimizer {
 public:
  Optimizer(OptimizerKind kind, double lr) : kind_(kind), adam_(lr), sgd_(lr) {}
  void step(const std::vector<Param<T>*>& ps) {
    if (kind_ == OptimizerKind::adam)
      adam_.step(ps);
    else
      sgd_.step(ps);
  }
  OptimizerKind kind() const { return kind_; }

 private:
  OptimizerKind kind_;
  Adam<T> adam_;
  Sgd<T> sgd_;
};

}  // namespace eaaslab::nn
