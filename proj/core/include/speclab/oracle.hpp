// Copyright 2026 The speclab Authors
// SPDX-License-Identifier: Apache-2.0
//
// Self-contained correctness checks with independent oracles: greedy decode
// equality, sampled-law total variation, merge arithmetic, packing
// invariance, and top-k distillation. Shared by the `speclab oracle` verb
// and the acceptance suite.

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "speclab/decode.hpp"

namespace speclab {

struct CheckResult {
    std::string name;
    bool passed = false;
    std::string detail;
};

// Random instance helpers (deterministic in the rng stream).

// Model whose contexts carry independent normal logits; a slice of contexts
// is left absent so the uniform fallback stays on the tested path.
NGramModel random_table_model(Rng& rng, int vocab_size, int order,
                              double present_fraction = 0.85);

// Random topological tree: each node picks a parent among the earlier ones.
DraftTree random_draft_tree(Rng& rng, TokenId root_token, int node_count, int vocab_size);

// Greedy speculative output must equal autoregressive greedy output token
// for token, across single, averaged, routed (both signals) and merged
// strategies on randomized models and prompts.
CheckResult check_greedy_losslessness(int instances, int new_tokens, std::uint64_t seed);

// Sampled speculative law vs the exact chain-rule law. For each strategy the
// empirical TV must stay within 1.5x the TV of an equally sized plain target
// resample, plus 0.005 absolute.
std::vector<CheckResult> check_sampling_losslessness(int n_samples, std::uint64_t seed);

// merge_trees postconditions on random tree pairs: sizes, block structure of
// the mask, positions, retrieve rows and index shifts, token layout.
CheckResult check_merge_arithmetic(int instances, int max_nodes, std::uint64_t seed);

// Per-node conditionals and masked reference logits of a merged tree must
// equal those of the two standalone trees exactly.
CheckResult check_packing_invariance(int instances, std::uint64_t seed);

// distill_topk vs brute-force subset selection (every k-subset scored, ties
// resolved toward lexicographically smaller index sets) plus a local
// optimality probe of the top-k cross entropy.
CheckResult check_topk_distillation(int instances, std::uint64_t seed);

}  // namespace speclab
