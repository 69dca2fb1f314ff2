#pragma once

#include "seqrex/evaluator.hpp"
#include "seqrex/models.hpp"
#include "seqrex/topk.hpp"

#include <map>
#include <memory>
#include <mutex>
#include <set>
#include <string>

namespace seqrex {

// Per-sequence: opening a synthetic sequence costs one attack unit and every
// per-prefix query under its token is free. Per-call: each non-cached top-k
// query costs one unit. Supervision queries always charge their own ledger
// per non-cached call, independent of the mode.
enum class ChargeMode { kPerSequence, kPerCall };

ChargeMode charge_mode_from_string(const std::string& s);
std::string charge_mode_name(ChargeMode m);

enum class Ledger { kAttack, kSupervision };

const char* ledger_name(Ledger l);

struct BudgetConfig {
  long long attack_limit = 5000;
  long long supervision_limit = 1'000'000'000;
  ChargeMode mode = ChargeMode::kPerSequence;
};

struct BudgetSnapshot {
  long long attack_limit = 0;
  long long attack_used = 0;
  long long supervision_limit = 0;
  long long supervision_used = 0;
  long long sequences_opened = 0;
};

// Black-box facade over a victim model: only item-id lists ever cross it.
// Budget mutation is mutex-protected and linearizable; the scorer is queried
// read-only. Cache hits return bit-identical lists and are never charged.
class VictimOracle {
 public:
  VictimOracle(ScoreFn scorer, int num_items, BudgetConfig budget);

  static std::shared_ptr<VictimOracle> over_model(
      std::shared_ptr<const SequentialRecommender> victim, BudgetConfig budget);

  TopKList query_topk(const std::vector<int>& prefix, int k, Ledger ledger = Ledger::kAttack,
                      const std::string* token = nullptr);

  // Per-sequence charging only: open charges one attack unit, close
  // invalidates the token.
  std::string open_sequence();
  void close_sequence(const std::string& token);

  BudgetSnapshot budget() const;
  ChargeMode mode() const { return cfg_.mode; }
  int num_items() const { return num_items_; }
  size_t cache_entries() const;

 private:
  ScoreFn scorer_;
  int num_items_;
  BudgetConfig cfg_;
  long long attack_used_ = 0;
  long long supervision_used_ = 0;
  long long sequences_opened_ = 0;
  long long next_token_ = 0;
  std::set<std::string> open_tokens_;
  std::map<std::pair<std::vector<int>, int>, TopKList> cache_;
  mutable std::mutex mu_;
};

}  // namespace seqrex
