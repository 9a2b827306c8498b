#include "eaaslab/attack.hpp"

#include <cmath>
#include <sstream>

namespace eaaslab {

std::string variant_name(AttackVariant v) {
  switch (v) {
    case AttackVariant::stolen_encoder: return "stolen_encoder";
    case AttackVariant::no_aug: return "no_aug";
    case AttackVariant::query_aug: return "query_aug";
    case AttackVariant::local_pretrain: return "local_pretrain";
  }
  return "?";
}

AttackVariant variant_from_name(const std::string& s) {
  if (s == "stolen_encoder") return AttackVariant::stolen_encoder;
  if (s == "no_aug") return AttackVariant::no_aug;
  if (s == "query_aug") return AttackVariant::query_aug;
  if (s == "local_pretrain") return AttackVariant::local_pretrain;
  throw ConfigError("unknown attack variant: " + s);
}

std::string AttackConfig::describe() const {
  std::ostringstream os;
  os << "variant=" << variant_name(variant) << ";lambda=" << lambda << ";epochs=" << epochs
     << ";lr=" << lr << ";batch=" << batch_size << ";metric=" << metric_name(metric)
     << ";aug=" << aug.describe() << ";arch=" << stolen_arch << ";width=" << stolen_width
     << ";seed=" << seed << ";opt=" << (opt == nn::OptimizerKind::adam ? "adam" : "sgd");
  if (variant == AttackVariant::local_pretrain && local_pretrain)
    os << ";local=[" << local_pretrain->describe() << "]";
  return os.str();
}

namespace {

std::vector<int> epoch_permutation(size_t n, uint64_t seed, int epoch) {
  std::vector<int> idx(n);
  for (size_t i = 0; i < n; ++i) idx[i] = static_cast<int>(i);
  Rng rng = named_rng(seed, "attack-shuffle", static_cast<uint64_t>(epoch));
  for (size_t i = n; i > 1; --i) {
    size_t j = static_cast<size_t>(rng.index(i));
    std::swap(idx[i - 1], idx[j]);
  }
  return idx;
}

// augmented view of one surrogate image, counter-based (seed, epoch, index)
std::vector<float> aug_view(const ImageSet& surrogate, int index, const AugmentationSpec& aug,
                            uint64_t seed, int epoch) {
  Rng rng = named_rng(seed, "attack-aug", static_cast<uint64_t>(epoch),
                      static_cast<uint64_t>(index));
  return augment(surrogate.images[index], surrogate.shape, aug, rng);
}

nn::Act<float> to_act(const std::vector<std::vector<float>>& rows, ImageShape sh) {
  nn::Act<float> a;
  a.sh = nn::Shape3{sh.h, sh.w, sh.c};
  a.m.resize(static_cast<Eigen::Index>(rows.size()), sh.pixels());
  for (size_t i = 0; i < rows.size(); ++i)
    for (int k = 0; k < sh.pixels(); ++k) a.m(static_cast<Eigen::Index>(i), k) = rows[i][k];
  return a;
}

nn::Act<float> gather_act(const ImageSet& set, const std::vector<int>& idx) {
  nn::Act<float> a;
  a.sh = nn::Shape3{set.shape.h, set.shape.w, set.shape.c};
  a.m.resize(static_cast<Eigen::Index>(idx.size()), set.shape.pixels());
  for (size_t i = 0; i < idx.size(); ++i)
    for (int k = 0; k < set.shape.pixels(); ++k)
      a.m(static_cast<Eigen::Index>(i), k) = set.images[idx[i]][k];
  return a;
}

MatF gather_rows(const MatF& m, const std::vector<int>& idx) {
  MatF out(static_cast<Eigen::Index>(idx.size()), m.cols());
  for (size_t i = 0; i < idx.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = m.row(idx[i]);
  return out;
}

}  // namespace

FeatureCache FeatureCache::from_api(ApiClient& api, const ImageSet& surrogate, int chunk) {
  FeatureCache c;
  c.features_.resize(static_cast<Eigen::Index>(surrogate.size()), api.feature_dim());
  c.cached_.assign(surrogate.size(), 0);
  for (size_t off = 0; off < surrogate.size(); off += static_cast<size_t>(chunk)) {
    const size_t end = std::min(surrogate.size(), off + static_cast<size_t>(chunk));
    std::vector<const std::vector<float>*> batch;
    for (size_t i = off; i < end; ++i) batch.push_back(&surrogate.images[i]);
    FeatureBatch fb = api.embed(batch);
    for (size_t i = off; i < end; ++i) {
      c.features_.row(static_cast<Eigen::Index>(i)) = fb.vectors.row(static_cast<Eigen::Index>(i - off));
      c.cached_[i] = 1;
    }
  }
  return c;
}

FeatureCache FeatureCache::from_encoder(const Encoder& enc, const ImageSet& surrogate,
                                        int chunk) {
  FeatureCache c;
  c.features_.resize(static_cast<Eigen::Index>(surrogate.size()), enc.feature_dim());
  c.cached_.assign(surrogate.size(), 0);
  for (size_t off = 0; off < surrogate.size(); off += static_cast<size_t>(chunk)) {
    const size_t end = std::min(surrogate.size(), off + static_cast<size_t>(chunk));
    std::vector<const std::vector<float>*> batch;
    for (size_t i = off; i < end; ++i) batch.push_back(&surrogate.images[i]);
    MatF feats = enc.encode_act(enc.to_act(batch));
    for (size_t i = off; i < end; ++i) {
      c.features_.row(static_cast<Eigen::Index>(i)) = feats.row(static_cast<Eigen::Index>(i - off));
      c.cached_[i] = 1;
    }
  }
  return c;
}

double loss_L1(const FeatureCache& cache, const Encoder& fs, const ImageSet& surrogate,
               const std::vector<int>& batch, Metric metric) {
  MatF targets(static_cast<Eigen::Index>(batch.size()), cache.dim());
  for (size_t i = 0; i < batch.size(); ++i)
    targets.row(static_cast<Eigen::Index>(i)) = cache.row(batch[i]);
  nn::Act<float> x = gather_act(surrogate, batch);
  MatF y = fs.net().eval_forward(x).m;
  return detail::batch_distance_grad<float>(metric, targets, y, nullptr);
}

double loss_L2(const FeatureCache& cache, const Encoder& fs, const ImageSet& surrogate,
               const std::vector<int>& batch, Metric metric, const AugmentationSpec& aug,
               uint64_t seed, int epoch) {
  MatF targets(static_cast<Eigen::Index>(batch.size()), cache.dim());
  std::vector<std::vector<float>> views(batch.size());
  for (size_t i = 0; i < batch.size(); ++i) {
    targets.row(static_cast<Eigen::Index>(i)) = cache.row(batch[i]);
    views[i] = aug_view(surrogate, batch[i], aug, seed, epoch);
  }
  nn::Act<float> a = to_act(views, surrogate.shape);
  MatF y = fs.net().eval_forward(a).m;
  return detail::batch_distance_grad<float>(metric, targets, y, nullptr);
}

double loss_L2_prime(ApiClient& api, const Encoder& fs, const ImageSet& surrogate,
                     const std::vector<int>& batch, Metric metric, const AugmentationSpec& aug,
                     uint64_t seed, int epoch) {
  std::vector<std::vector<float>> views(batch.size());
  for (size_t i = 0; i < batch.size(); ++i)
    views[i] = aug_view(surrogate, batch[i], aug, seed, epoch);
  FeatureBatch fb = api.embed(views);  // one query per augmented image
  nn::Act<float> a = to_act(views, surrogate.shape);
  MatF y = fs.net().eval_forward(a).m;
  return detail::batch_distance_grad<float>(metric, fb.vectors, y, nullptr);
}

StealResult steal(ApiClient& api, const ImageSet& surrogate, const AttackConfig& cfg) {
  if (static_cast<int>(surrogate.size()) < cfg.batch_size)
    throw PreconditionError("steal: surrogate smaller than the batch size");

  StealResult out;
  out.ledger_before = api.ledger();

  // local pre-training baseline: no queries at all
  if (cfg.variant == AttackVariant::local_pretrain) {
    PretrainConfig pc = cfg.local_pretrain ? *cfg.local_pretrain : PretrainConfig{};
    pc.arch = cfg.stolen_arch;
    pc.width = cfg.stolen_width;
    pc.feature_dim = api.feature_dim();
    pc.seed = cfg.seed;
    PretrainResult pr = pretrain(surrogate, pc);
    out.encoder = std::move(pr.encoder);
    out.encoder.set_provenance(Provenance::local_baseline);
    out.loss_curve.reserve(pr.epoch_loss.size());
    for (double l : pr.epoch_loss) out.loss_curve.push_back(EpochLoss{l, 0, 0});
    out.ledger_after = api.ledger();
    out.queries_used = out.ledger_after.query_count - out.ledger_before.query_count;
    out.completed = true;
    return out;
  }

  const double lambda = cfg.effective_lambda();
  Encoder fs = Encoder::init(cfg.stolen_arch, api.feature_dim(), surrogate.shape, cfg.seed,
                             cfg.stolen_width);
  fs.set_provenance(Provenance::stolen);
  nn::Optimizer<float> opt(cfg.opt, cfg.lr);
  std::vector<nn::Param<float>*> params = fs.net().params();

  try {
    // one API pass over the surrogate dataset
    FeatureCache cache = FeatureCache::from_api(api, surrogate, 256);

    const int steps = static_cast<int>(surrogate.size()) / cfg.batch_size;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
      // the high-query variant refreshes augmented-view features once per
      // epoch for the whole surrogate set: e*|D| extra queries in total
      std::vector<std::vector<float>> epoch_views;
      MatF epoch_view_feats;
      if (cfg.variant == AttackVariant::query_aug) {
        epoch_views.resize(surrogate.size());
        for (size_t i = 0; i < surrogate.size(); ++i)
          epoch_views[i] = aug_view(surrogate, static_cast<int>(i), cfg.aug, cfg.seed, epoch);
        epoch_view_feats.resize(static_cast<Eigen::Index>(surrogate.size()), cache.dim());
        for (size_t off = 0; off < surrogate.size(); off += 256) {
          const size_t end = std::min(surrogate.size(), off + 256);
          std::vector<const std::vector<float>*> chunk;
          for (size_t i = off; i < end; ++i) chunk.push_back(&epoch_views[i]);
          FeatureBatch fb = api.embed(chunk);
          for (size_t i = off; i < end; ++i)
            epoch_view_feats.row(static_cast<Eigen::Index>(i)) =
                fb.vectors.row(static_cast<Eigen::Index>(i - off));
        }
      }

      auto perm = epoch_permutation(surrogate.size(), cfg.seed, epoch);
      EpochLoss acc;
      for (int s = 0; s < steps; ++s) {
        std::vector<int> mb(perm.begin() + static_cast<long>(s) * cfg.batch_size,
                            perm.begin() + static_cast<long>(s + 1) * cfg.batch_size);
        MatF targets1 = gather_rows(cache.all(), mb);
        nn::Act<float> x = gather_act(surrogate, mb);

        MatF targets2;
        nn::Act<float> a;
        if (lambda != 0.0) {
          if (cfg.variant == AttackVariant::query_aug) {
            std::vector<std::vector<float>> views(mb.size());
            for (size_t i = 0; i < mb.size(); ++i) views[i] = epoch_views[mb[i]];
            a = to_act(views, surrogate.shape);
            targets2 = gather_rows(epoch_view_feats, mb);
          } else {
            std::vector<std::vector<float>> views(mb.size());
            for (size_t i = 0; i < mb.size(); ++i)
              views[i] = aug_view(surrogate, mb[i], cfg.aug, cfg.seed, epoch);
            a = to_act(views, surrogate.shape);
            targets2 = targets1;
          }
        }

        fs.net().zero_grad();
        AttackBatchLoss<float> l =
            attack_batch_loss_grad<float>(fs, targets1, x, targets2, a, cfg.metric, lambda);
        if (!std::isfinite(l.total))
          throw DivergenceError("stealing loop diverged (non-finite loss) at epoch " +
                                std::to_string(epoch));
        opt.step(params);
        acc.total += l.total;
        acc.l1 += l.l1;
        acc.l2 += l.l2;
      }
      out.loss_curve.push_back(
          EpochLoss{acc.total / steps, acc.l1 / steps, acc.l2 / steps});
    }
    out.completed = true;
  } catch (const QuotaError& e) {
    out.abort_reason = e.what();
  }

  fs.net().drop_caches();
  out.encoder = std::move(fs);
  out.ledger_after = api.ledger();
  out.queries_used = out.ledger_after.query_count - out.ledger_before.query_count;
  return out;
}

Encoder train_defender_surrogate(const ImageSet& pretraining_set, const Encoder& target,
                                 const AttackConfig& attack_cfg_mirror) {
  // the defender runs the attacker's own loop against the undefended target,
  // with its pre-training data standing in for the surrogate dataset
  Service svc(target, DefenseConfig{});
  svc.add_account("defender");
  InProcessApi api(svc, "defender");
  StealResult r = steal(api, pretraining_set, attack_cfg_mirror);
  if (!r.completed) throw PipelineError("defender-surrogate", r.abort_reason);
  r.encoder.set_provenance(Provenance::defender_surrogate);
  return r.encoder;
}

}  // namespace eaaslab
