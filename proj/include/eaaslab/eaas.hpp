#pragma once

#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "eaaslab/defense.hpp"
#include "eaaslab/encoder.hpp"
#include "eaaslab/feature.hpp"

namespace eaaslab {

struct LedgerReport {
  long long query_count = 0;
  double cost_dollars = 0.0;
  std::optional<long long> remaining_budget;
};

// Per-account query metering. One query = one image; cost follows the
// per-1000 price. Counts never decrease.
struct LedgerEntry {
  long long query_count = 0;
  std::optional<long long> budget_cap;
};

// In-process EaaS facade: serves defense-transformed target-encoder features
// through account-scoped queries and meters them. The target's raw weights
// are owned privately and never surface through the API.
class Service {
 public:
  Service(Encoder target, DefenseConfig defense, double price_per_1000 = 3.2,
          uint64_t defense_seed = 0);

  void add_account(const std::string& token, std::optional<long long> budget_cap = std::nullopt);

  // Returns defense-transformed features; increments the account's ledger by
  // the batch size atomically with the response. Thread-safe.
  FeatureBatch query(const std::string& account,
                     const std::vector<const std::vector<float>*>& images);
  FeatureBatch query(const std::string& account, const std::vector<std::vector<float>>& images);

  LedgerReport ledger_report(const std::string& account) const;

  int feature_dim() const { return target_.feature_dim(); }
  ImageShape input_shape() const { return target_.input_shape(); }
  const DefenseConfig& defense() const { return defense_; }
  double price_per_1000() const { return price_; }

 private:
  Encoder target_;
  DefenseConfig defense_;
  double price_;
  uint64_t defense_seed_;
  mutable std::mutex mu_;
  std::map<std::string, LedgerEntry> accounts_;
};

// Uniform client surface over the in-process service and the HTTP binding,
// used by the attack and evaluation pipelines.
class ApiClient {
 public:
  virtual ~ApiClient() = default;
  virtual FeatureBatch embed(const std::vector<const std::vector<float>*>& images) = 0;
  virtual LedgerReport ledger() = 0;
  virtual int feature_dim() = 0;

  FeatureBatch embed(const std::vector<std::vector<float>>& images) {
    std::vector<const std::vector<float>*> ptrs;
    ptrs.reserve(images.size());
    for (const auto& im : images) ptrs.push_back(&im);
    return embed(ptrs);
  }
};

class InProcessApi : public ApiClient {
 public:
  InProcessApi(Service& service, std::string account)
      : service_(service), account_(std::move(account)) {}
  FeatureBatch embed(const std::vector<const std::vector<float>*>& images) override {
    return service_.query(account_, images);
  }
  LedgerReport ledger() override { return service_.ledger_report(account_); }
  int feature_dim() override { return service_.feature_dim(); }

 private:
  Service& service_;
  std::string account_;
};

}  // namespace eaaslab
