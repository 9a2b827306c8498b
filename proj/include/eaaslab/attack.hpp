#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "eaaslab/contrastive.hpp"
#include "eaaslab/distance.hpp"
#include "eaaslab/eaas.hpp"
#include "eaaslab/encoder.hpp"

namespace eaaslab {

enum class AttackVariant { stolen_encoder, no_aug, query_aug, local_pretrain };

std::string variant_name(AttackVariant v);
AttackVariant variant_from_name(const std::string& s);

// All knobs of the stealing loop. `stolen_arch` must be resolved by the
// caller ("one registry step more expressive than the target" is the
// pipeline default when the target architecture is unknown to the attacker).
struct AttackConfig {
  AttackVariant variant = AttackVariant::stolen_encoder;
  double lambda = 20.0;
  int epochs = 100;
  double lr = 1e-3;
  int batch_size = 64;
  Metric metric = Metric::l2;
  AugmentationSpec aug = AugmentationSpec::parse("hflip,jitter,gray");
  std::string stolen_arch = "resnet-small";
  int stolen_width = 0;  // 0 = registry default
  uint64_t seed = 0;
  nn::OptimizerKind opt = nn::OptimizerKind::adam;
  // mirror of the target's pre-training settings, used by the local_pretrain
  // baseline only
  std::optional<PretrainConfig> local_pretrain;

  double effective_lambda() const {
    return variant == AttackVariant::no_aug ? 0.0 : lambda;
  }
  std::string describe() const;
};

// Image-index -> feature vector map obtained from the API in exactly one
// pass over the surrogate dataset; immutable afterwards.
class FeatureCache {
 public:
  static FeatureCache from_api(ApiClient& api, const ImageSet& surrogate, int chunk = 256);
  static FeatureCache from_encoder(const Encoder& enc, const ImageSet& surrogate,
                                   int chunk = 256);

  RowVecF row(int index) const {
    if (index < 0 || index >= static_cast<int>(cached_.size()) || !cached_[index])
      throw std::logic_error("feature cache miss: index " + std::to_string(index));
    return features_.row(index);
  }
  const MatF& all() const { return features_; }
  int size() const { return static_cast<int>(features_.rows()); }
  int dim() const { return static_cast<int>(features_.cols()); }

 private:
  MatF features_;
  std::vector<char> cached_;
};

// ---------------------------------------------------------------------------
// Loss terms of the stealing objective (values; training uses the gradient
// path below). `batch` holds indices into the surrogate set.
// ---------------------------------------------------------------------------

// mean over the minibatch of d(v(x), f_s(x))
double loss_L1(const FeatureCache& cache, const Encoder& fs, const ImageSet& surrogate,
               const std::vector<int>& batch, Metric metric);

// mean of d(v(x), f_s(A(x))); issues no API queries. The augmentation draw
// is the counter-based (seed, epoch, index) stream used by training.
double loss_L2(const FeatureCache& cache, const Encoder& fs, const ImageSet& surrogate,
               const std::vector<int>& batch, Metric metric, const AugmentationSpec& aug,
               uint64_t seed, int epoch);

// mean of d(API(A(x)), f_s(A(x))) with the same augmented sample on both
// sides; increments the ledger by |batch|.
double loss_L2_prime(ApiClient& api, const Encoder& fs, const ImageSet& surrogate,
                     const std::vector<int>& batch, Metric metric, const AugmentationSpec& aug,
                     uint64_t seed, int epoch);

// ---------------------------------------------------------------------------
// Gradient path shared by the training loop and the finite-difference tests.
// Runs forward+backward through f_s and accumulates parameter gradients for
// (1/B) sum d(target1_b, f_s(x_b)) + (lambda/B) sum d(target2_b, f_s(a_b)).
// The augmented term is skipped entirely when lambda == 0, which keeps the
// no-aug path bit-identical to lambda=0.
// ---------------------------------------------------------------------------
template <class T>
struct AttackBatchLoss {
  T l1 = 0, l2 = 0, total = 0;
};

template <class T>
AttackBatchLoss<T> attack_batch_loss_grad(EncoderT<T>& fs, const nn::Mat<T>& targets1,
                                          const nn::Act<T>& x_batch, const nn::Mat<T>& targets2,
                                          const nn::Act<T>& aug_batch, Metric metric,
                                          double lambda);

// value-only variant (no gradient accumulation, eval forward)
template <class T>
AttackBatchLoss<T> attack_batch_loss(const EncoderT<T>& fs, const nn::Mat<T>& targets1,
                                     const nn::Act<T>& x_batch, const nn::Mat<T>& targets2,
                                     const nn::Act<T>& aug_batch, Metric metric, double lambda);

// ---------------------------------------------------------------------------
// The stealing loop.
// ---------------------------------------------------------------------------
struct EpochLoss {
  double total = 0, l1 = 0, l2 = 0;
};

struct StealResult {
  Encoder encoder;
  std::vector<EpochLoss> loss_curve;
  LedgerReport ledger_before, ledger_after;
  long long queries_used = 0;
  bool completed = false;
  std::string abort_reason;
};

StealResult steal(ApiClient& api, const ImageSet& surrogate, const AttackConfig& cfg);

// --------------------------- implementation -------------------------------

namespace detail {

// per-row distance + gradient wrt the produced features; returns mean
template <class T>
T batch_distance_grad(Metric metric, const nn::Mat<T>& targets, const nn::Mat<T>& produced,
                      nn::Mat<T>* grad) {
  const Eigen::Index b = produced.rows();
  if (targets.rows() != b) throw PreconditionError("target/feature row mismatch");
  if (grad) grad->setZero(b, produced.cols());
  T sum = 0;
  for (Eigen::Index i = 0; i < b; ++i) {
    Eigen::Matrix<T, 1, Eigen::Dynamic> t = targets.row(i), p = produced.row(i);
    if (grad) {
      Eigen::Matrix<T, 1, Eigen::Dynamic> g(produced.cols());
      sum += feature_distance<T>(metric, t, p, &g);
      grad->row(i) = g / static_cast<T>(b);
    } else {
      sum += feature_distance<T>(metric, t, p);
    }
  }
  return sum / static_cast<T>(b);
}

}  // namespace detail

template <class T>
AttackBatchLoss<T> attack_batch_loss_grad(EncoderT<T>& fs, const nn::Mat<T>& targets1,
                                          const nn::Act<T>& x_batch, const nn::Mat<T>& targets2,
                                          const nn::Act<T>& aug_batch, Metric metric,
                                          double lambda) {
  AttackBatchLoss<T> out;
  {
    const nn::Act<T>& y1 = fs.net().train_forward(x_batch);
    nn::Mat<T> d1;
    out.l1 = detail::batch_distance_grad<T>(metric, targets1, y1.m, &d1);
    nn::Act<T> d1act{d1, y1.sh};
    fs.net().backward(d1act);
  }
  if (lambda != 0.0) {
    const nn::Act<T>& y2 = fs.net().train_forward(aug_batch);
    nn::Mat<T> d2;
    out.l2 = detail::batch_distance_grad<T>(metric, targets2, y2.m, &d2);
    d2 *= static_cast<T>(lambda);
    nn::Act<T> d2act{d2, y2.sh};
    fs.net().backward(d2act);
  }
  out.total = out.l1 + static_cast<T>(lambda) * out.l2;
  return out;
}

template <class T>
AttackBatchLoss<T> attack_batch_loss(const EncoderT<T>& fs, const nn::Mat<T>& targets1,
                                     const nn::Act<T>& x_batch, const nn::Mat<T>& targets2,
                                     const nn::Act<T>& aug_batch, Metric metric, double lambda) {
  AttackBatchLoss<T> out;
  nn::Mat<T> y1 = fs.net().eval_forward(x_batch).m;
  out.l1 = detail::batch_distance_grad<T>(metric, targets1, y1, nullptr);
  if (lambda != 0.0) {
    nn::Mat<T> y2 = fs.net().eval_forward(aug_batch).m;
    out.l2 = detail::batch_distance_grad<T>(metric, targets2, y2, nullptr);
  }
  out.total = out.l1 + static_cast<T>(lambda) * out.l2;
  return out;
}

}  // namespace eaaslab
