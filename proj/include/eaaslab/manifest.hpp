#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "eaaslab/attack.hpp"
#include "eaaslab/contrastive.hpp"
#include "eaaslab/defense.hpp"
#include "eaaslab/downstream.hpp"

namespace eaaslab {

// One downstream task: dataset name plus optional class-count cap
// ("gtsrb:12" keeps the first 12 classes).
struct TaskSpec {
  std::string dataset;
  int classes = 0;  // 0 = all
  std::string label() const {
    return classes > 0 ? dataset + ":" + std::to_string(classes) : dataset;
  }
};

// Experiment manifest: strict INI-style sections, unknown keys rejected.
// Every artifact a pipeline emits embeds this manifest's digest.
struct ExperimentManifest {
  // [experiment]
  std::string name = "experiment";
  std::string output_dir = "out";
  uint64_t seed = 42;
  bool deterministic = true;
  int canonical = 32;  // canonical H = W (3 channels)

  // [data]
  std::string data_root = "data";
  std::string pretrain_dataset = "cifar10";
  long long pretrain_count = 0;  // 0 = full split
  std::string surrogate_dataset = "imagenet";
  std::string surrogate_split = "unlabeled";
  long long surrogate_size = 500;
  std::vector<TaskSpec> downstream = {{"mnist", 0}, {"gtsrb", 12}};
  long long downstream_train = 1500;  // 0 = full
  long long downstream_test = 1000;

  // [pretrain]
  PretrainConfig pretrain;

  // [service]
  std::string defense = "none";
  double price_per_1000 = 3.2;
  long long budget_cap = 0;              // 0 = disabled
  long long poison_surrogate_size = 1000;  // defender's f_s' training subset

  // [attack]
  std::vector<std::string> attack_variants = {"stolen_encoder"};
  double attack_lambda = 20.0;
  int attack_epochs = 100;
  double attack_lr = 1e-3;
  int attack_batch = 64;
  std::string attack_metric = "l2";
  std::string attack_aug = "hflip,jitter,gray";
  std::string attack_arch = "auto";  // auto = one registry step above the target
  int attack_width = 0;
  std::string attack_optimizer = "adam";

  // [downstream]
  ClassifierConfig classifier{{512, 256}, 100, 1e-4, 256, 0};

  // [sweep] (optional)
  std::string sweep_axis;  // lambda | surrogate_size | defense | metric | variant
  std::vector<std::string> sweep_values;

  static ExperimentManifest parse_file(const std::filesystem::path& p);
  static ExperimentManifest parse_string(const std::string& text);

  std::string canonical_text() const;  // stable serialization
  std::string digest() const;
};

// Sweep expansion: one manifest per axis value (sweep section cleared).
struct SweepPoint {
  ExperimentManifest manifest;
  std::string label;
};
std::vector<SweepPoint> expand_sweep(const ExperimentManifest& m);

}  // namespace eaaslab
