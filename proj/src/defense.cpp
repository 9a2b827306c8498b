#include "eaaslab/defense.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <numeric>
#include <sstream>

namespace eaaslab {

namespace {

std::vector<std::pair<std::string, std::string>> parse_kv(const std::string& s) {
  std::vector<std::pair<std::string, std::string>> out;
  std::stringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    auto eq = tok.find('=');
    if (eq == std::string::npos) throw ConfigError("bad defense option: " + tok);
    out.emplace_back(tok.substr(0, eq), tok.substr(eq + 1));
  }
  return out;
}

}  // namespace

DefenseConfig DefenseConfig::parse(const std::string& s) {
  DefenseConfig cfg;
  if (s.empty() || s == "none") return cfg;
  auto colon = s.find(':');
  const std::string kind = s.substr(0, colon);
  const std::string rest = colon == std::string::npos ? "" : s.substr(colon + 1);
  if (kind == "top_k") {
    cfg.kind = Kind::top_k;
    for (auto& [k, v] : parse_kv(rest)) {
      if (k == "k")
        cfg.k = std::stoi(v);
      else
        throw ConfigError("unknown top_k option: " + k);
    }
    if (cfg.k < 1) throw ConfigError("top_k requires k >= 1");
  } else if (kind == "round") {
    cfg.kind = Kind::rounding;
    for (auto& [k, v] : parse_kv(rest)) {
      if (k == "m")
        cfg.decimals = std::stoi(v);
      else
        throw ConfigError("unknown rounding option: " + k);
    }
    if (cfg.decimals < 1) throw ConfigError("rounding requires m >= 1");
  } else if (kind == "poison") {
    cfg.kind = Kind::poisoning;
    for (auto& [k, v] : parse_kv(rest)) {
      if (k == "eps")
        cfg.poison.eps = std::stod(v);
      else if (k == "norm")
        cfg.poison.norm = v;
      else if (k == "lambda")
        cfg.poison.lambda = std::stod(v);
      else if (k == "metric")
        cfg.poison.metric = metric_from_name(v);
      else if (k == "steps")
        cfg.poison.steps = std::stoi(v);
      else if (k == "step_size")
        cfg.poison.step_size = std::stod(v);
      else if (k == "aug")
        cfg.poison.aug = AugmentationSpec::parse(v);
      else
        throw ConfigError("unknown poison option: " + k);
    }
    if (cfg.poison.norm != "l2" && cfg.poison.norm != "linf")
      throw ConfigError("poison norm must be l2 or linf");
    if (cfg.poison.eps < 0) throw ConfigError("poison eps must be >= 0");
  } else {
    throw ConfigError("unknown defense kind: " + kind);
  }
  return cfg;
}

std::string DefenseConfig::describe() const {
  switch (kind) {
    case Kind::none: return "none";
    case Kind::top_k: return "top_k:k=" + std::to_string(k);
    case Kind::rounding: return "round:m=" + std::to_string(decimals);
    case Kind::poisoning: {
      std::ostringstream os;
      os << "poison:eps=" << poison.eps << ",norm=" << poison.norm
         << ",lambda=" << poison.lambda << ",metric=" << metric_name(poison.metric)
         << ",steps=" << poison.steps << ",step_size="
         << (poison.step_size > 0 ? poison.step_size : poison.eps / 10.0)
         << ",aug=" << poison.aug.ops_string();
      return os.str();
    }
  }
  return "none";
}

RowVecF top_k(const RowVecF& v, int k) {
  const int dim = static_cast<int>(v.size());
  if (k < 1 || k > dim) throw PreconditionError("top_k: k out of range");
  if (k == dim) return v;
  std::vector<int> idx(dim);
  std::iota(idx.begin(), idx.end(), 0);
  // |value| descending, lowest index wins ties
  std::stable_sort(idx.begin(), idx.end(), [&](int a, int b) {
    return std::abs(v(a)) > std::abs(v(b));
  });
  RowVecF out = RowVecF::Zero(dim);
  for (int i = 0; i < k; ++i) out(idx[i]) = v(idx[i]);
  return out;
}

RowVecF round_features(const RowVecF& v, int m) {
  if (m < 1) throw PreconditionError("round_features: m must be >= 1");
  const double p = std::pow(10.0, m);
  RowVecF out(v.size());
  for (Eigen::Index i = 0; i < v.size(); ++i)
    out(i) = static_cast<float>(std::round(static_cast<double>(v(i)) * p) / p);
  return out;
}

RowVecF project_l2(const RowVecF& delta, double eps) {
  const double n = delta.norm();
  if (n <= eps) return delta;
  if (eps == 0.0) return RowVecF::Zero(delta.size());
  return delta * static_cast<float>(eps / n);
}

RowVecF project_linf(const RowVecF& delta, double eps) {
  return delta.cwiseMax(static_cast<float>(-eps)).cwiseMin(static_cast<float>(eps));
}

double poison_objective(const RowVecF& perturbed, const RowVecF& fsp_x, const RowVecF& fsp_ax,
                        Metric metric, double lambda) {
  return static_cast<double>(feature_distance<float>(metric, perturbed, fsp_x)) +
         lambda * static_cast<double>(feature_distance<float>(metric, perturbed, fsp_ax));
}

RowVecF poison(const std::vector<float>& image, ImageShape shape, const RowVecF& clean_feature,
               const PoisonConfig& cfg, uint64_t aug_seed) {
  if (!cfg.surrogate) throw ConfigError("poisoning defense requires a defender surrogate f_s'");
  if (cfg.eps < 0) throw PreconditionError("poison: eps must be >= 0");

  const Encoder& fsp = *cfg.surrogate;
  Rng rng(aug_seed);
  std::vector<float> aug_img = augment(image, shape, cfg.aug, rng);
  std::vector<std::vector<float>> pair = {image, aug_img};
  MatF feats = fsp.encode_images(pair);
  RowVecF fsp_x = feats.row(0);
  RowVecF fsp_ax = feats.row(1);

  const bool linf = cfg.norm == "linf";
  auto project = [&](const RowVecF& d) {
    return linf ? project_linf(d, cfg.eps) : project_l2(d, cfg.eps);
  };
  const double step = cfg.step_size > 0 ? cfg.step_size : cfg.eps / 10.0;

  RowVecF delta = RowVecF::Zero(clean_feature.size());
  RowVecF best_delta = delta;
  double best_obj = poison_objective(clean_feature, fsp_x, fsp_ax, cfg.metric, cfg.lambda);

  if (cfg.eps > 0) {
    for (int it = 0; it < cfg.steps; ++it) {
      RowVecF perturbed = clean_feature + delta;
      // ascent direction: gradient of the objective w.r.t. the perturbation
      RowVecF g1(delta.size()), g2(delta.size());
      feature_distance<float>(cfg.metric, fsp_x, perturbed, &g1);
      feature_distance<float>(cfg.metric, fsp_ax, perturbed, &g2);
      RowVecF g = g1 + static_cast<float>(cfg.lambda) * g2;
      if (linf) {
        delta = project((delta.array() + static_cast<float>(step) * g.array().sign()).matrix());
      } else {
        const float gn = g.norm();
        if (gn > 0) delta = project(delta + static_cast<float>(step) * g / gn);
      }
      const double obj =
          poison_objective(clean_feature + delta, fsp_x, fsp_ax, cfg.metric, cfg.lambda);
      if (obj > best_obj) {
        best_obj = obj;
        best_delta = delta;
      }
    }
  }
  return clean_feature + best_delta;
}

MatF apply_defense(const DefenseConfig& cfg, const MatF& clean,
                   const std::vector<const std::vector<float>*>& images, ImageShape shape,
                   uint64_t seed_salt) {
  switch (cfg.kind) {
    case DefenseConfig::Kind::none: return clean;
    case DefenseConfig::Kind::top_k: {
      MatF out(clean.rows(), clean.cols());
      for (Eigen::Index i = 0; i < clean.rows(); ++i) out.row(i) = top_k(clean.row(i), cfg.k);
      return out;
    }
    case DefenseConfig::Kind::rounding: {
      MatF out(clean.rows(), clean.cols());
      for (Eigen::Index i = 0; i < clean.rows(); ++i)
        out.row(i) = round_features(clean.row(i), cfg.decimals);
      return out;
    }
    case DefenseConfig::Kind::poisoning: {
      if (static_cast<Eigen::Index>(images.size()) != clean.rows())
        throw PreconditionError("poisoning defense needs the query images");
      MatF out(clean.rows(), clean.cols());
      for (Eigen::Index i = 0; i < clean.rows(); ++i) {
        // seed from image content so the defense is replay-stable
        const auto& img = *images[i];
        uint64_t h = seed_salt;
        for (float v : img) {
          uint32_t bits;
          std::memcpy(&bits, &v, 4);
          h = splitmix64(h ^ bits);
        }
        out.row(i) = poison(img, shape, clean.row(i), cfg.poison, h);
      }
      return out;
    }
  }
  return clean;
}

}  // namespace eaaslab
