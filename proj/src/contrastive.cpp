#include "eaaslab/contrastive.hpp"

#include <cmath>
#include <sstream>

namespace eaaslab {

std::string PretrainConfig::describe() const {
  std::ostringstream os;
  os << "algo=" << algo << ";arch=" << arch << ";width=" << width << ";dim=" << feature_dim
     << ";epochs=" << epochs << ";batch=" << batch_size << ";lr=" << lr
     << ";tau=" << effective_tau() << ";aug=" << aug.describe() << ";seed=" << seed
     << ";opt=" << (opt == nn::OptimizerKind::adam ? "adam" : "sgd");
  if (algo == "moco") os << ";m=" << momentum << ";K=" << queue_capacity;
  if (algo == "simclr") os << ";proj=" << proj_dim;
  return os.str();
}

namespace {

std::vector<int> epoch_permutation(size_t n, uint64_t seed, int epoch) {
  std::vector<int> idx(n);
  for (size_t i = 0; i < n; ++i) idx[i] = static_cast<int>(i);
  Rng rng = named_rng(seed, "pretrain-shuffle", static_cast<uint64_t>(epoch));
  for (size_t i = n; i > 1; --i) {
    size_t j = static_cast<size_t>(rng.index(i));
    std::swap(idx[i - 1], idx[j]);
  }
  return idx;
}

nn::Act<float> make_view_batch(const ImageSet& data, const std::vector<int>& indices,
                               const AugmentationSpec& aug, uint64_t seed, int epoch,
                               const char* stream, ImageShape shape) {
  nn::Act<float> a;
  a.sh = nn::Shape3{shape.h, shape.w, shape.c};
  a.m.resize(static_cast<Eigen::Index>(indices.size()), shape.pixels());
#pragma omp parallel for schedule(static)
  for (long long i = 0; i < static_cast<long long>(indices.size()); ++i) {
    Rng rng = named_rng(seed, stream, static_cast<uint64_t>(epoch),
                        static_cast<uint64_t>(indices[i]));
    std::vector<float> v = augment(data.images[indices[i]], shape, aug, rng);
    for (int k = 0; k < shape.pixels(); ++k) a.m(i, k) = v[k];
  }
  return a;
}

}  // namespace

PretrainResult pretrain(const ImageSet& dataset, const PretrainConfig& cfg) {
  if (dataset.empty()) throw PreconditionError("pretrain: empty dataset");
  if (cfg.algo != "simclr" && cfg.algo != "moco")
    throw ConfigError("unknown contrastive algorithm: " + cfg.algo);
  if (cfg.epochs < 0 || cfg.batch_size < 2)
    throw PreconditionError("pretrain: bad epochs/batch size");

  const ImageShape shape = dataset.shape;
  const double tau = cfg.effective_tau();
  const int batch = std::min<int>(cfg.batch_size, static_cast<int>(dataset.size()));

  Encoder enc = Encoder::init(cfg.arch, cfg.feature_dim, shape, cfg.seed, cfg.width);
  enc.set_provenance(Provenance::pretrained_target);

  PretrainResult out{std::move(enc), {}};
  Encoder& f = out.encoder;

  nn::Optimizer<float> opt(cfg.opt, cfg.lr);

  if (cfg.algo == "simclr") {
    auto head = make_projection_head<float>(cfg.feature_dim, cfg.proj_dim, cfg.seed);
    std::vector<nn::Param<float>*> params = f.net().params();
    for (auto* p : head.params()) params.push_back(p);

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
      auto perm = epoch_permutation(dataset.size(), cfg.seed, epoch);
      const int steps = static_cast<int>(dataset.size()) / batch;
      double epoch_sum = 0;
      long long epoch_pairs = 0;
      for (int s = 0; s < steps; ++s) {
        std::vector<int> mb(perm.begin() + static_cast<long>(s) * batch,
                            perm.begin() + static_cast<long>(s + 1) * batch);
        // two stochastic views per image, interleaved so partner(i) = i^1
        nn::Act<float> va = make_view_batch(dataset, mb, cfg.aug, cfg.seed, epoch, "aug-a", shape);
        nn::Act<float> vb = make_view_batch(dataset, mb, cfg.aug, cfg.seed, epoch, "aug-b", shape);
        nn::Act<float> both;
        both.sh = va.sh;
        both.m.resize(2 * va.m.rows(), va.m.cols());
        for (Eigen::Index i = 0; i < va.m.rows(); ++i) {
          both.m.row(2 * i) = va.m.row(i);
          both.m.row(2 * i + 1) = vb.m.row(i);
        }
        std::vector<int> pairing(2 * mb.size());
        for (size_t i = 0; i < pairing.size(); ++i) pairing[i] = static_cast<int>(i ^ 1);

        const nn::Act<float>& feats = f.net().train_forward(both);
        const nn::Act<float>& z = head.train_forward(feats);

        nn::Mat<float> dz;
        float loss = simclr_loss<float>(z.m, pairing, tau, &dz);
        if (!std::isfinite(loss))
          throw DivergenceError("simclr pre-training diverged (non-finite loss) at epoch " +
                                std::to_string(epoch));
        const float scale = 1.0f / static_cast<float>(pairing.size());

        f.net().zero_grad();
        head.zero_grad();
        nn::Act<float> dzact{dz * scale, z.sh};
        nn::Act<float> dfeat = head.backward(dzact);
        f.net().backward(dfeat);
        opt.step(params);

        epoch_sum += loss;
        epoch_pairs += static_cast<long long>(pairing.size());
      }
      out.epoch_loss.push_back(epoch_pairs ? epoch_sum / static_cast<double>(epoch_pairs) : 0.0);
      if (cfg.progress) cfg.progress(epoch, out.epoch_loss.back(), f);
    }
    f.net().drop_caches();
  } else {
    // MoCo: no projection head (similarities on raw features); momentum
    // encoder supplies keys, FIFO dictionary supplies negatives.
    MoCoState st;
    st.momentum_encoder = f;
    st.dictionary = KeyQueue<float>(cfg.queue_capacity);
    st.momentum_coeff = cfg.momentum;
    st.tau = tau;
    std::vector<nn::Param<float>*> params = f.net().params();

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
      auto perm = epoch_permutation(dataset.size(), cfg.seed, epoch);
      const int steps = static_cast<int>(dataset.size()) / batch;
      double epoch_sum = 0;
      long long epoch_pairs = 0;
      for (int s = 0; s < steps; ++s) {
        std::vector<int> mb(perm.begin() + static_cast<long>(s) * batch,
                            perm.begin() + static_cast<long>(s + 1) * batch);
        nn::Act<float> vq = make_view_batch(dataset, mb, cfg.aug, cfg.seed, epoch, "aug-a", shape);
        nn::Act<float> vk = make_view_batch(dataset, mb, cfg.aug, cfg.seed, epoch, "aug-b", shape);

        const nn::Act<float>& q = f.net().train_forward(vq);
        nn::Mat<float> keys = st.momentum_encoder.encode_act(vk);

        // current keys join the dictionary before the loss so the positive
        // sits inside the denominator
        std::vector<int> pos = st.dictionary.enqueue(keys);
        nn::Mat<float> dict = st.dictionary.as_matrix();

        nn::Mat<float> dq;
        float loss = moco_loss<float>(q.m, keys, pos, dict, tau, &dq);
        if (!std::isfinite(loss))
          throw DivergenceError("moco pre-training diverged (non-finite loss) at epoch " +
                                std::to_string(epoch));
        const float scale = 1.0f / static_cast<float>(mb.size());

        f.net().zero_grad();
        nn::Act<float> dqact{dq * scale, q.sh};
        f.net().backward(dqact);
        opt.step(params);

        st.momentum_encoder = momentum_update(f, st.momentum_encoder, st.momentum_coeff);
        st.dictionary.evict_to_capacity();

        epoch_sum += loss;
        epoch_pairs += static_cast<long long>(mb.size());
      }
      out.epoch_loss.push_back(epoch_pairs ? epoch_sum / static_cast<double>(epoch_pairs) : 0.0);
      if (cfg.progress) cfg.progress(epoch, out.epoch_loss.back(), f);
    }
    f.net().drop_caches();
  }
  return out;
}

}  // namespace eaaslab
