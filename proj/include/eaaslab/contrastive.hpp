#pragma once

#include <deque>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "eaaslab/augment.hpp"
#include "eaaslab/encoder.hpp"

namespace eaaslab {

// ---------------------------------------------------------------------------
// Contrastive losses. Both return the paper-form SUM over positive pairs
// (all 2N ordered pairs for the SimCLR form, the N (query,key) pairs for the
// MoCo form); training loops scale gradients by the pair count so the
// optimizer step is batch-size independent.
//
// Gradients are hand-derived through the cosine similarity and verified
// against central finite differences in the test suite.
// ---------------------------------------------------------------------------

// pairing[i] = index of i's positive partner; must be a perfect matching
// (pairing[pairing[i]] == i, pairing[i] != i).
template <class T>
T simclr_loss(const nn::Mat<T>& projected, const std::vector<int>& pairing, double tau,
              nn::Mat<T>* dz = nullptr);

// Dictionary entries are the denominator candidate set (the training loop
// enqueues the current keys before computing the loss, so each positive is a
// dictionary member). positive_index[i] locates key i inside the dictionary.
// Gradients flow to the queries only; keys come from the momentum encoder.
template <class T>
T moco_loss(const nn::Mat<T>& queries, const nn::Mat<T>& keys,
            const std::vector<int>& positive_index, const nn::Mat<T>& dictionary, double tau,
            nn::Mat<T>* dq = nullptr);

// ---------------------------------------------------------------------------
// Pre-training
// ---------------------------------------------------------------------------

struct PretrainConfig {
  std::string algo = "simclr";  // simclr | moco
  std::string arch = "small-conv";
  int width = 0;  // 0 = registry default
  int feature_dim = 512;
  int epochs = 200;
  int batch_size = 128;
  double lr = 1e-3;
  double tau = 0.0;  // 0 = per-algorithm default (0.5 SimCLR, 0.07 MoCo)
  AugmentationSpec aug = AugmentationSpec::parse("crop,hflip,jitter,gray");
  uint64_t seed = 0;
  // MoCo
  double momentum = 0.999;
  int queue_capacity = 4096;
  // SimCLR projection head output width (hidden width = feature_dim)
  int proj_dim = 128;
  nn::OptimizerKind opt = nn::OptimizerKind::adam;

  // optional per-epoch monitor (not part of the config identity)
  std::function<void(int epoch, double mean_loss, EncoderT<float>& current)> progress;

  double effective_tau() const { return tau > 0 ? tau : (algo == "moco" ? 0.07 : 0.5); }
  std::string describe() const;
};

struct PretrainResult {
  Encoder encoder;
  std::vector<double> epoch_loss;  // mean per-pair loss per epoch
};

// Contrastive pre-training of a target encoder. Run on a surrogate dataset
// this is also the local pre-training baseline (provenance is set by the
// caller in that case).
PretrainResult pretrain(const ImageSet& dataset, const PretrainConfig& cfg);

// Projection head used only during SimCLR pre-training: one hidden layer,
// ReLU, linear output.
template <class T>
nn::Sequential<T> make_projection_head(int feature_dim, int proj_dim, uint64_t seed);

// FIFO dictionary of key vectors with bounded capacity.
template <class T>
class KeyQueue {
 public:
  explicit KeyQueue(int capacity) : capacity_(capacity) {}

  // returns the dictionary positions of the enqueued rows (valid until the
  // next eviction)
  std::vector<int> enqueue(const nn::Mat<T>& keys) {
    std::vector<int> pos;
    const int base = static_cast<int>(keys_.size());
    for (Eigen::Index i = 0; i < keys.rows(); ++i) {
      keys_.emplace_back(keys.row(i));
      pos.push_back(base + static_cast<int>(i));
    }
    return pos;
  }

  // strictly FIFO eviction down to capacity
  void evict_to_capacity() {
    while (static_cast<int>(keys_.size()) > capacity_) keys_.pop_front();
  }

  int size() const { return static_cast<int>(keys_.size()); }
  int capacity() const { return capacity_; }

  nn::Mat<T> as_matrix() const {
    if (keys_.empty()) return nn::Mat<T>(0, 0);
    nn::Mat<T> m(static_cast<Eigen::Index>(keys_.size()), keys_.front().size());
    for (size_t i = 0; i < keys_.size(); ++i) m.row(static_cast<Eigen::Index>(i)) = keys_[i];
    return m;
  }

 private:
  int capacity_;
  std::deque<Eigen::Matrix<T, 1, Eigen::Dynamic>> keys_;
};

// Momentum-encoder state for MoCo pre-training.
struct MoCoState {
  Encoder momentum_encoder;
  KeyQueue<float> dictionary{4096};
  double momentum_coeff = 0.999;
  double tau = 0.07;
};

// --------------------------- implementation -------------------------------

namespace detail {

// row-normalize; returns norms
template <class T>
nn::Mat<T> normalize_rows(const nn::Mat<T>& z, Eigen::Matrix<T, Eigen::Dynamic, 1>& norms) {
  norms = z.rowwise().norm();
  nn::Mat<T> u = z;
  for (Eigen::Index i = 0; i < z.rows(); ++i) {
    T n = norms(i);
    if (n > T(0)) u.row(i) /= n;
  }
  return u;
}

}  // namespace detail

template <class T>
T simclr_loss(const nn::Mat<T>& projected, const std::vector<int>& pairing, double tau,
              nn::Mat<T>* dz) {
  const Eigen::Index n2 = projected.rows();
  if (tau <= 0) throw PreconditionError("temperature must be positive");
  if (n2 < 2 || n2 % 2 != 0) throw PreconditionError("simclr_loss expects 2N rows");
  if (static_cast<Eigen::Index>(pairing.size()) != n2)
    throw PreconditionError("pairing size mismatch");
  for (Eigen::Index i = 0; i < n2; ++i) {
    const int j = pairing[i];
    if (j < 0 || j >= n2 || j == i || pairing[j] != i)
      throw PreconditionError("pairing is not a perfect matching");
  }

  Eigen::Matrix<T, Eigen::Dynamic, 1> norms;
  nn::Mat<T> u = detail::normalize_rows(projected, norms);
  nn::Mat<T> logits = (u * u.transpose()) / static_cast<T>(tau);

  T loss = 0;
  nn::Mat<T> g;  // dLoss/dlogits
  if (dz) g.setZero(n2, n2);
  for (Eigen::Index i = 0; i < n2; ++i) {
    // log-sum-exp over k != i
    T mx = -std::numeric_limits<T>::infinity();
    for (Eigen::Index k = 0; k < n2; ++k)
      if (k != i) mx = std::max(mx, logits(i, k));
    T denom = 0;
    for (Eigen::Index k = 0; k < n2; ++k)
      if (k != i) denom += std::exp(logits(i, k) - mx);
    const T lse = mx + std::log(denom);
    loss += lse - logits(i, pairing[i]);
    if (dz) {
      for (Eigen::Index k = 0; k < n2; ++k)
        if (k != i) g(i, k) = std::exp(logits(i, k) - lse);
      g(i, pairing[i]) -= T(1);
    }
  }

  if (dz) {
    g /= static_cast<T>(tau);
    // cosine-similarity backward, query side + candidate side
    nn::Mat<T> cosm = u * u.transpose();
    Eigen::Matrix<T, Eigen::Dynamic, 1> row_gc = (g.array() * cosm.array()).rowwise().sum();
    Eigen::Matrix<T, Eigen::Dynamic, 1> col_gc =
        (g.array() * cosm.array()).colwise().sum().transpose();
    nn::Mat<T> acc = g * u + g.transpose() * u;
    for (Eigen::Index i = 0; i < n2; ++i)
      acc.row(i) -= (row_gc(i) + col_gc(i)) * u.row(i);
    dz->resize(n2, projected.cols());
    for (Eigen::Index i = 0; i < n2; ++i) {
      const T r = norms(i) > T(0) ? norms(i) : T(1);
      dz->row(i) = acc.row(i) / r;
    }
  }
  return loss;
}

template <class T>
T moco_loss(const nn::Mat<T>& queries, const nn::Mat<T>& keys,
            const std::vector<int>& positive_index, const nn::Mat<T>& dictionary, double tau,
            nn::Mat<T>* dq) {
  if (tau <= 0) throw PreconditionError("temperature must be positive");
  const Eigen::Index n = queries.rows();
  if (keys.rows() != n || static_cast<Eigen::Index>(positive_index.size()) != n)
    throw PreconditionError("moco_loss: query/key count mismatch");
  if (dictionary.rows() == 0) throw PreconditionError("moco_loss: empty dictionary");
  for (int p : positive_index)
    if (p < 0 || p >= dictionary.rows())
      throw PreconditionError("moco_loss: positive index outside dictionary");

  Eigen::Matrix<T, Eigen::Dynamic, 1> qn, dn;
  nn::Mat<T> uq = detail::normalize_rows(queries, qn);
  nn::Mat<T> ud = detail::normalize_rows(dictionary, dn);
  nn::Mat<T> logits = (uq * ud.transpose()) / static_cast<T>(tau);

  // positive similarity comes from the key vectors themselves
  Eigen::Matrix<T, Eigen::Dynamic, 1> kn;
  nn::Mat<T> uk = detail::normalize_rows(keys, kn);

  T loss = 0;
  nn::Mat<T> g;
  if (dq) g.setZero(n, dictionary.rows());
  for (Eigen::Index i = 0; i < n; ++i) {
    const T pos_logit = uq.row(i).dot(uk.row(i)) / static_cast<T>(tau);
    const T mx = logits.row(i).maxCoeff();
    T denom = 0;
    for (Eigen::Index k = 0; k < dictionary.rows(); ++k)
      denom += std::exp(logits(i, k) - mx);
    const T lse = mx + std::log(denom);
    loss += lse - pos_logit;
    if (dq) {
      for (Eigen::Index k = 0; k < dictionary.rows(); ++k)
        g(i, k) = std::exp(logits(i, k) - lse);
    }
  }

  if (dq) {
    g /= static_cast<T>(tau);
    nn::Mat<T> cosm = uq * ud.transpose();
    Eigen::Matrix<T, Eigen::Dynamic, 1> row_gc = (g.array() * cosm.array()).rowwise().sum();
    nn::Mat<T> acc = g * ud;
    for (Eigen::Index i = 0; i < n; ++i) acc.row(i) -= row_gc(i) * uq.row(i);
    // the positive term -sim(q,k+)/tau differentiates through q as well
    for (Eigen::Index i = 0; i < n; ++i) {
      const T c = uq.row(i).dot(uk.row(i));
      acc.row(i) -= (uk.row(i) - c * uq.row(i)) / static_cast<T>(tau);
    }
    dq->resize(n, queries.cols());
    for (Eigen::Index i = 0; i < n; ++i) {
      const T r = qn(i) > T(0) ? qn(i) : T(1);
      dq->row(i) = acc.row(i) / r;
    }
  }
  return loss;
}

template <class T>
nn::Sequential<T> make_projection_head(int feature_dim, int proj_dim, uint64_t seed) {
  nn::Sequential<T> head;
  head.set_input_shape(nn::Shape3{1, 1, feature_dim});
  head.add(std::make_unique<nn::Dense<T>>(feature_dim, feature_dim));
  head.add(std::make_unique<nn::ReLU<T>>());
  head.add(std::make_unique<nn::Dense<T>>(feature_dim, proj_dim, 1.0));
  head.init(splitmix64(seed ^ 0x68656164ull));  // distinct stream from the encoder init
  return head;
}

}  // namespace eaaslab
