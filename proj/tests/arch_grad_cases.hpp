#pragma once

// Finite-difference cases for the full recommender architectures on tiny
// (<= 1000 parameter) configurations. Shared by the model unit suite and the
// acceptance suite.

#include "seqrex/models.hpp"

#include <memory>

namespace seqrex::testing {

struct ArchGradCase {
  std::string name;
  std::shared_ptr<SequentialRecommender> model;
  std::function<Var(Tape&)> loss;
};

inline ArchGradCase arch_grad_case(Arch arch, uint64_t seed) {
  ModelConfig cfg;
  cfg.arch = arch;
  cfg.num_items = 6;
  cfg.embed_dim = 4;
  cfg.trm_layers = 1;
  cfg.heads = 2;
  cfg.gru_layers = 1;
  cfg.dropout = 0.0f;
  cfg.mask_prob = 0.3f;
  cfg.max_len = 6;
  auto model = std::make_shared<SequentialRecommender>(cfg, seed);
  std::vector<int> items{0, 2, 4, 1};
  std::vector<int> targets{2, 4, 1, 3};
  auto loss = [model, items, targets](Tape& t) {
    Var logits = model->prefix_logits(t, items, /*train=*/false, nullptr);
    return cross_entropy_mean(logits, targets);
  };
  return ArchGradCase{arch_name(arch), model, loss};
}

inline std::vector<ArchGradCase> all_arch_grad_cases(uint64_t seed) {
  return {arch_grad_case(Arch::kNarm, seed), arch_grad_case(Arch::kSasrec, seed + 1),
          arch_grad_case(Arch::kBert4rec, seed + 2)};
}

}  // namespace seqrex::testing
