#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "eaaslab/eaas.hpp"
#include "eaaslab/encoder.hpp"
#include "eaaslab/feature.hpp"

namespace eaaslab {

// Either a direct encoder or a metered API account serves as the feature
// extractor for downstream work.
struct FeatureExtractor {
  const Encoder* direct = nullptr;
  ApiClient* api = nullptr;

  static FeatureExtractor from_encoder(const Encoder& e) { return {&e, nullptr}; }
  static FeatureExtractor from_api(ApiClient& a) { return {nullptr, &a}; }
};

// One feature row per image, order preserving. API extraction meters the
// ledger and returns defense-perturbed vectors.
FeatureBatch extract_features(const FeatureExtractor& src, const ImageSet& dataset,
                              int chunk = 256);

struct ClassifierConfig {
  std::vector<int> hidden = {512, 256};
  int epochs = 500;
  double lr = 1e-4;
  int batch_size = 256;
  uint64_t seed = 0;
  std::string describe() const;
};

// Fully connected softmax classifier over frozen encoder features.
struct Classifier {
  nn::Sequential<float> net;
  int num_classes = 0;
  std::vector<double> train_accuracy_curve;

  std::vector<int> predict(const MatF& features) const;
};

Classifier train_classifier(const MatF& features, const std::vector<int>& labels,
                            int num_classes, const ClassifierConfig& cfg);

// Exact accuracy: fraction of test examples whose argmax prediction matches.
double evaluate(const Classifier& cls, const MatF& features, const std::vector<int>& labels);

// Convenience composition g(f(x)) over a labeled image set.
double evaluate_task(const Classifier& cls, const FeatureExtractor& src, const ImageSet& test);

// ---------------------------------------------------------------------------
// Reports
// ---------------------------------------------------------------------------

struct TaskResult {
  std::string task;
  double ta = 0, sa = 0;
  long long queries_downstream = 0;

  // SA/TA as a fraction; empty when TA == 0
  std::optional<double> ratio() const {
    if (ta <= 0) return std::nullopt;
    return sa / ta;
  }
  // whole-percent presentation
  std::optional<int> ratio_pct() const {
    auto r = ratio();
    if (!r) return std::nullopt;
    return static_cast<int>(std::lround(*r * 100.0));
  }
};

struct EvalReport {
  int schema_version = 1;
  std::string manifest_digest;
  std::string attack_desc;
  std::string defense_desc = "none";
  std::string variant = "stolen_encoder";
  double lambda = 0;
  std::string metric = "l2";
  long long queries_attack = 0;
  double cost_dollars = 0;
  long long surrogate_size = 0;
  std::vector<TaskResult> tasks;

  std::string to_json() const;             // stable key order
  static EvalReport from_json(const std::string& s);
  std::string digest() const;              // sha256 of the canonical JSON

  double mean_sa() const;
  double mean_ta() const;
};

void write_report(const EvalReport& r, const std::filesystem::path& json_path);
EvalReport read_report(const std::filesystem::path& json_path);

// Side-by-side comparison CSV over several reports (one row per report+task).
void write_comparison_csv(const std::vector<EvalReport>& reports,
                          const std::filesystem::path& csv_path);

}  // namespace eaaslab
