#include "eaaslab/eaas.hpp"

namespace eaaslab {

Service::Service(Encoder target, DefenseConfig defense, double price_per_1000,
                 uint64_t defense_seed)
    : target_(std::move(target)), defense_(std::move(defense)), price_(price_per_1000),
      defense_seed_(defense_seed) {}

void Service::add_account(const std::string& token, std::optional<long long> budget_cap) {
  std::lock_guard<std::mutex> lock(mu_);
  LedgerEntry e;
  e.budget_cap = budget_cap;
  accounts_.emplace(token, e);
}

FeatureBatch Service::query(const std::string& account,
                            const std::vector<const std::vector<float>*>& images) {
  const int pixels = target_.input_shape().pixels();
  for (const auto* im : images)
    if (static_cast<int>(im->size()) != pixels)
      throw PreconditionError("query: image does not match the service input shape");

  // reserve quota atomically before computing, so the ledger and the
  // response stay consistent under concurrency
  {
    std::lock_guard<std::mutex> lock(mu_);
    auto it = accounts_.find(account);
    if (it == accounts_.end()) throw AuthError("unknown account: " + account);
    LedgerEntry& e = it->second;
    const long long want = static_cast<long long>(images.size());
    if (e.budget_cap && e.query_count + want > *e.budget_cap)
      throw QuotaError("budget cap exceeded for account " + account, 0);
    e.query_count += want;
  }

  FeatureBatch fb;
  fb.source = FeatureSource::eaas;
  fb.defense_applied = defense_.is_none() ? "" : defense_.describe();
  MatF clean = target_.encode_act(target_.to_act(images));
  if (clean.rows() == 0) clean.resize(0, target_.feature_dim());
  fb.vectors = apply_defense(defense_, clean, images, target_.input_shape(), defense_seed_);
  return fb;
}

FeatureBatch Service::query(const std::string& account,
                            const std::vector<std::vector<float>>& images) {
  std::vector<const std::vector<float>*> ptrs;
  ptrs.reserve(images.size());
  for (const auto& im : images) ptrs.push_back(&im);
  return query(account, ptrs);
}

LedgerReport Service::ledger_report(const std::string& account) const {
  std::lock_guard<std::mutex> lock(mu_);
  auto it = accounts_.find(account);
  if (it == accounts_.end()) throw AuthError("unknown account: " + account);
  LedgerReport r;
  r.query_count = it->second.query_count;
  r.cost_dollars = static_cast<double>(it->second.query_count) * price_ / 1000.0;
  if (it->second.budget_cap)
    r.remaining_budget = *it->second.budget_cap - it->second.query_count;
  return r;
}

}  // namespace eaaslab
