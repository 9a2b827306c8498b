#pragma once

#include <memory>
#include <optional>
#include <string>

#include "eaaslab/augment.hpp"
#include "eaaslab/distance.hpp"
#include "eaaslab/encoder.hpp"
#include "eaaslab/feature.hpp"

namespace eaaslab {

// Feature-poisoning knobs: maximize the mirrored training loss of a
// defender-trained surrogate within an lp ball around the clean feature.
struct PoisonConfig {
  double eps = 0.0;
  std::string norm = "l2";  // l2 | linf
  double lambda = 20.0;
  Metric metric = Metric::l2;
  AugmentationSpec aug = AugmentationSpec::parse("hflip,jitter,gray");
  int steps = 20;
  double step_size = 0.0;  // 0 = eps/10
  std::shared_ptr<const Encoder> surrogate;  // f_s', read-only at serving time
};

// Exactly one perturbation kind is active per service configuration.
struct DefenseConfig {
  enum class Kind { none, top_k, rounding, poisoning };
  Kind kind = Kind::none;
  int k = 0;         // top_k
  int decimals = 0;  // rounding
  PoisonConfig poison;

  // "none" | "top_k:k=50" | "round:m=2" | "poison:eps=5,norm=l2,lambda=20,steps=20"
  static DefenseConfig parse(const std::string& s);
  std::string describe() const;
  bool is_none() const { return kind == Kind::none; }
};

// Keeps the k largest-|value| entries, zeroes the rest; ties broken by
// lowest index. k = dim leaves the vector untouched.
RowVecF top_k(const RowVecF& v, int k);

// Rounds every entry to m decimals, half away from zero.
RowVecF round_features(const RowVecF& v, int m);

// lp-ball projections (closed forms, unit-tested directly).
RowVecF project_l2(const RowVecF& delta, double eps);
RowVecF project_linf(const RowVecF& delta, double eps);

// Objective of the poisoning optimization at a given perturbation.
double poison_objective(const RowVecF& perturbed, const RowVecF& fsp_x, const RowVecF& fsp_ax,
                        Metric metric, double lambda);

// Projected-gradient-ascent perturbation of one clean feature vector.
// The augmented view inside the objective is drawn once per query from
// `aug_seed`, so the defense is a pure function of (image, config, seed).
RowVecF poison(const std::vector<float>& image, ImageShape shape, const RowVecF& clean_feature,
               const PoisonConfig& cfg, uint64_t aug_seed);

// Applies the configured defense to every row of a feature batch.
// `images` are the query inputs (needed by poisoning).
MatF apply_defense(const DefenseConfig& cfg, const MatF& clean,
                   const std::vector<const std::vector<float>*>& images, ImageShape shape,
                   uint64_t seed_salt);

// Trains the defender-side surrogate f_s' by running the attacker's training
// loop against the undefended target, with the defender's own pre-training
// data as the surrogate set and the attacker's mirrored hyperparameters.
// Defined with the attack module (it reuses the same loop).
struct AttackConfig;
Encoder train_defender_surrogate(const ImageSet& pretraining_set, const Encoder& target,
                                 const AttackConfig& attack_cfg_mirror);

}  // namespace eaaslab
