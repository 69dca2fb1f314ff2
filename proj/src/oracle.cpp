#include "seqrex/oracle.hpp"

namespace seqrex {

ChargeMode charge_mode_from_string(const std::string& s) {
  if (s == "per-sequence") return ChargeMode::kPerSequence;
  if (s == "per-call") return ChargeMode::kPerCall;
  throw ConfigError({"unknown charging mode: " + s});
}

std::string charge_mode_name(ChargeMode m) {
  return m == ChargeMode::kPerSequence ? "per-sequence" : "per-call";
}

const char* ledger_name(Ledger l) {
  return l == Ledger::kAttack ? "attack" : "supervision";
}

VictimOracle::VictimOracle(ScoreFn scorer, int num_items, BudgetConfig budget)
    : scorer_(std::move(scorer)), num_items_(num_items), cfg_(budget) {
  if (num_items_ <= 0) throw ConfigError({"oracle: num_items must be > 0"});
  if (cfg_.attack_limit < 0 || cfg_.supervision_limit < 0)
    throw ConfigError({"oracle: budget limits must be >= 0"});
}

std::shared_ptr<VictimOracle> VictimOracle::over_model(
    std::shared_ptr<const SequentialRecommender> victim, BudgetConfig budget) {
  int n = victim->config().num_items;
  ScoreFn fn = [victim](const std::vector<int>& prefix) { return victim->score_next(prefix); };
  return std::make_shared<VictimOracle>(std::move(fn), n, budget);
}

TopKList VictimOracle::query_topk(const std::vector<int>& prefix, int k, Ledger ledger,
                                  const std::string* token) {
  if (prefix.empty()) throw DataError("empty prefix");
  if (k < 1) throw DataError("k must be >= 1");
  if (k > num_items_)
    throw DataError("k=" + std::to_string(k) + " exceeds item count " +
                    std::to_string(num_items_));

  std::lock_guard<std::mutex> lock(mu_);
  auto key = std::make_pair(prefix, k);
  auto hit = cache_.find(key);
  if (hit != cache_.end()) return hit->second;

  if (ledger == Ledger::kSupervision) {
    if (supervision_used_ >= cfg_.supervision_limit)
      throw BudgetExhausted("supervision", cfg_.supervision_limit, supervision_used_);
    ++supervision_used_;
  } else if (cfg_.mode == ChargeMode::kPerSequence) {
    if (token == nullptr)
      throw StateError("per-sequence charging requires an open sequence token");
    if (!open_tokens_.count(*token))
      throw StateError("use of a closed or unknown sequence token: " + *token);
  } else {
    if (attack_used_ >= cfg_.attack_limit)
      throw BudgetExhausted("attack", cfg_.attack_limit, attack_used_);
    ++attack_used_;
  }

  std::vector<float> scores = scorer_(prefix);
  if (static_cast<int>(scores.size()) != num_items_)
    throw ShapeError("oracle scorer returned a vector of the wrong length");
  TopKList list;
  list.items = topk_ids(scores, k);
  list.prefix_hash = hash_prefix(prefix, k);
  cache_.emplace(std::move(key), list);
  return list;
}

std::string VictimOracle::open_sequence() {
  std::lock_guard<std::mutex> lock(mu_);
  if (cfg_.mode != ChargeMode::kPerSequence)
    throw StateError("open_sequence is only valid under per-sequence charging");
  if (attack_used_ >= cfg_.attack_limit)
    throw BudgetExhausted("attack", cfg_.attack_limit, attack_used_);
  ++attack_used_;
  ++sequences_opened_;
  std::string token = "seq-" + std::to_string(++next_token_);
  open_tokens_.insert(token);
  return token;
}

void VictimOracle::close_sequence(const std::string& token) {
  std::lock_guard<std::mutex> lock(mu_);
  if (!open_tokens_.erase(token))
    throw StateError("use of a closed or unknown sequence token: " + token);
}

BudgetSnapshot VictimOracle::budget() const {
  std::lock_guard<std::mutex> lock(mu_);
  BudgetSnapshot s;
  s.attack_limit = cfg_.attack_limit;
  s.attack_used = attack_used_;
  s.supervision_limit = cfg_.supervision_limit;
  s.supervision_used = supervision_used_;
  s.sequences_opened = sequences_opened_;
  return s;
}

size_t VictimOracle::cache_entries() const {
  std::lock_guard<std::mutex> lock(mu_);
  return cache_.size();
}

}  // namespace seqrex
