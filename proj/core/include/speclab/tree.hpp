// Copyright 2026 The speclab Authors
// SPDX-License-Identifier: Apache-2.0
//
// Draft trees and their packed (verifier side) representation.

#pragma once

#include <string>
#include <vector>

#include "speclab/models.hpp"

namespace speclab {

// Non-root draft node. Node ids are 1-based: id i lives at nodes[i - 1] of
// the owning DraftTree and parent 0 means the root. Parents always have a
// smaller id than their children (topological order).
struct DraftNode {
    int parent = 0;
    TokenId token = 0;
    double confidence = 0.0;  // drafter probability of `token` given the parent path
    int depth = 1;
};

// Rooted draft tree. The root is implicit: it carries the last committed
// token and has depth 0 and confidence 1.
struct DraftTree {
    TokenId root_token = 0;
    std::vector<DraftNode> nodes;

    int node_count() const { return static_cast<int>(nodes.size()); }
    const DraftNode& node(int id) const;

    // Tokens along the path root -> id, excluding the root token.
    std::vector<TokenId> path_tokens(int id) const;
};

struct TreeParams {
    int total_nodes = 15;
    int max_depth = 5;
    int branch_k = 4;
};

// Product of confidences along the path from the root to `id`. This is the
// score the best-first builder ranks candidates by: it approximates the
// probability that the whole path survives verification.
double path_value(const DraftTree& tree, int id);

// Best-first tree construction. Starting from the root (the last token of
// `prefix`), repeatedly materialize the pending candidate with the highest
// path value until total_nodes nodes exist or no candidates remain. Each
// materialized node shallower than max_depth offers its branch_k most
// probable continuations under the drafter (zero probability tokens are
// never offered). Ties are broken by lower token id, then lower parent id.
// Deterministic given its inputs.
DraftTree build_draft_tree(const NGramModel& drafter, std::span<const TokenId> prefix,
                           const TreeParams& params);

// Flat tree layout consumed by verification. Index 0 is the root; non-root
// nodes follow in draft id order, so ancestors always precede descendants.
//
//   tokens            per node token; tokens[0] is the root token
//   mask              N x N ancestor-or-self visibility (row i sees column j)
//   positions         depth of each node
//   retrieve_indices  one row per leaf: node indices from the root to that
//                     leaf, right-padded with -1 to a common width
//
// confidences and drafter_ids mirror the draft side (1.0 and 0 for the
// root); they ride along for verification statistics and are not part of
// the JSON serialization.
struct PackedTree {
    std::vector<TokenId> tokens;
    std::vector<std::vector<std::uint8_t>> mask;
    std::vector<int> positions;
    std::vector<std::vector<int>> retrieve_indices;

    std::vector<double> confidences;
    std::vector<int> drafter_ids;

    int size() const { return static_cast<int>(tokens.size()); }

    // Deepest visible node below index i, or -1 for the root.
    int parent_of(int i) const;
};

PackedTree pack_tree(const DraftTree& tree);

// JSON with fields tokens, mask, positions, retrieve_indices.
std::string packed_tree_to_json(const PackedTree& packed);

}  // namespace speclab
