// Copyright 2026 The speclab Authors
// SPDX-License-Identifier: Apache-2.0
//
// Lossless verification of packed draft trees against a target model.
//
// Both modes walk the tree from the root, judge the children of the current
// node in descending draft confidence order, and stop at the first accepted
// child. Greedy mode accepts exactly the target argmax, so the committed
// stream equals greedy autoregressive decoding token for token. Sampling
// mode accepts a child with probability equal to the target's current
// probability of its token and, on rejection, removes that token's mass and
// renormalizes before judging the next child; the committed stream is then
// distributed exactly like target autoregressive sampling, conditionally on
// the tree. Because the guarantee holds for every fixed tree, it survives
// draft-side tree selection (routing) and the merging of two trees.

#pragma once

#include <vector>

#include "speclab/models.hpp"
#include "speclab/tree.hpp"

namespace speclab {

// One judged child. draft_confidence is the drafter's probability of the
// node's token given its parent path; draft_entropy and verifier_entropy are
// the entropies of the full drafter and target conditionals at the parent,
// i.e. of the distributions that proposed and judged the node.
struct NodeRecord {
    int node_id = 0;
    int depth = 0;
    bool accepted = false;
    double draft_confidence = 0.0;
    double draft_entropy = 0.0;
    double verifier_entropy = 0.0;
};

struct VerificationOutcome {
    std::vector<int> accepted_node_ids;  // root-to-last accepted path, in order
    int accepted_length = 0;             // == accepted_node_ids.size()
    TokenId bonus_token = 0;
    std::vector<NodeRecord> records;     // in judge order
};

// Target conditionals for every node of the packed tree, computed in one
// pass. Entry i conditions on committed_prefix extended by the tokens along
// the path from the root's first child down to node i; entry 0 conditions on
// committed_prefix alone. Each entry consults only node i's visible set per
// the mask (itself, its ancestors and the root), never cross-subtree tokens,
// so a merged tree yields exactly the conditionals of its parts.
// committed_prefix must end with packed.tokens[0].
std::vector<Distribution> node_conditionals(const NGramModel& target,
                                            std::span<const TokenId> committed_prefix,
                                            const PackedTree& packed);

// min(1, q_prob / p_prob). Throws if p_prob is 0.
double accept_probability(double q_prob, double p_prob);

// Leftover target distribution after a rejection: max(0, q - p) elementwise,
// renormalized. If the residual mass is below 1e-12 returns q unchanged.
Distribution residual_distribution(const Distribution& q, const Distribution& p);

// Greedy walk: at each node the child whose token equals the target argmax
// is accepted (children are judged in confidence order until the match);
// the bonus token is the argmax at the deepest accepted node. drafters must
// line up with packed.drafter_ids; they are consulted only for the entropy
// statistics in the records, never for the accept decision.
VerificationOutcome verify_greedy(const NGramModel& target,
                                  std::span<const TokenId> committed_prefix,
                                  const PackedTree& packed,
                                  std::span<const NGramModel* const> drafters);

// Sampling walk. At the current node with (residual-updated) target
// conditional q, a child carrying token t is accepted with probability
// min(1, q(t)); the tree already names the candidate, so the draft proposal
// law conditional on the tree is the point mass at t and rejection leaves
// residual_distribution(q, onehot(t)), i.e. q with t's mass removed. When
// every child is rejected the bonus token is drawn from the final q. Tokens
// drafted with zero recorded confidence are rejected as invalid trees.
VerificationOutcome verify_sampling(const NGramModel& target,
                                    std::span<const TokenId> committed_prefix,
                                    const PackedTree& packed,
                                    std::span<const NGramModel* const> drafters,
                                    Rng& rng);

}  // namespace speclab
