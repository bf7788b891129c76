// Copyright 2026 The speclab Authors
// SPDX-License-Identifier: Apache-2.0

#include "speclab/verify.hpp"

#include <algorithm>
#include <stdexcept>

namespace speclab {

namespace {

// Children of every node, judged in descending confidence order with ties
// broken by lower token id, then lower node index.
std::vector<std::vector<int>> children_in_judge_order(const PackedTree& packed) {
    std::vector<std::vector<int>> children(static_cast<size_t>(packed.size()));
    for (int i = 1; i < packed.size(); ++i) {
        children[static_cast<size_t>(packed.parent_of(i))].push_back(i);
    }
    for (auto& list : children) {
        std::sort(list.begin(), list.end(), [&](int a, int b) {
            double ca = packed.confidences[static_cast<size_t>(a)];
            double cb = packed.confidences[static_cast<size_t>(b)];
            if (ca != cb) return ca > cb;
            TokenId ta = packed.tokens[static_cast<size_t>(a)];
            TokenId tb = packed.tokens[static_cast<size_t>(b)];
            if (ta != tb) return ta < tb;
            return a < b;
        });
    }
    return children;
}

void check_drafters(const PackedTree& packed, std::span<const NGramModel* const> drafters) {
    for (int i = 1; i < packed.size(); ++i) {
        int d = packed.drafter_ids[static_cast<size_t>(i)];
        if (d < 0 || static_cast<size_t>(d) >= drafters.size() || drafters[static_cast<size_t>(d)] == nullptr) {
            throw std::invalid_argument("drafter id out of range");
        }
    }
}

// Drafter conditional entropies at each node's parent, computed once per
// (parent, drafter) pair actually judged.
struct EntropyScratch {
    const PackedTree& packed;
    std::span<const NGramModel* const> drafters;
    std::vector<TokenId> prefix;
    size_t base_len;
    std::map<std::pair<int, int>, double> cache;

    EntropyScratch(const PackedTree& packed_, std::span<const NGramModel* const> drafters_,
                   std::span<const TokenId> committed_prefix)
        : packed(packed_), drafters(drafters_),
          prefix(committed_prefix.begin(), committed_prefix.end()),
          base_len(committed_prefix.size()) {}

    double at(int parent, int drafter_id) {
        auto key = std::make_pair(parent, drafter_id);
        auto it = cache.find(key);
        if (it != cache.end()) {
            return it->second;
        }
        prefix.resize(base_len);
        for (int j = 1; j <= parent; ++j) {
            if (packed.mask[static_cast<size_t>(parent)][static_cast<size_t>(j)] != 0) {
                prefix.push_back(packed.tokens[static_cast<size_t>(j)]);
            }
        }
        double h = entropy(drafters[static_cast<size_t>(drafter_id)]->next_distribution(prefix));
        cache.emplace(key, h);
        return h;
    }
};

NodeRecord make_record(const PackedTree& packed, int node, bool accepted,
                       double verifier_entropy, EntropyScratch& scratch) {
    NodeRecord rec;
    rec.node_id = node;
    rec.depth = packed.positions[static_cast<size_t>(node)];
    rec.accepted = accepted;
    rec.draft_confidence = packed.confidences[static_cast<size_t>(node)];
    rec.draft_entropy = scratch.at(packed.parent_of(node),
                                   packed.drafter_ids[static_cast<size_t>(node)]);
    rec.verifier_entropy = verifier_entropy;
    return rec;
}

}  // namespace

std::vector<Distribution> node_conditionals(const NGramModel& target,
                                            std::span<const TokenId> committed_prefix,
                                            const PackedTree& packed) {
    if (packed.size() < 1) {
        throw std::invalid_argument("empty packing");
    }
    if (committed_prefix.empty() || committed_prefix.back() != packed.tokens[0]) {
        throw std::invalid_argument("prefix mismatch with packed root");
    }

    std::vector<Distribution> conds(static_cast<size_t>(packed.size()));
    std::vector<TokenId> context(committed_prefix.begin(), committed_prefix.end());
    for (int i = 0; i < packed.size(); ++i) {
        // Only node i's visible set is consulted; ascending index order is
        // root-to-node path order because packings are topological.
        context.resize(committed_prefix.size());
        for (int j = 1; j <= i; ++j) {
            if (packed.mask[static_cast<size_t>(i)][static_cast<size_t>(j)] != 0) {
                context.push_back(packed.tokens[static_cast<size_t>(j)]);
            }
        }
        conds[static_cast<size_t>(i)] = target.next_distribution(context);
    }
    return conds;
}

double accept_probability(double q_prob, double p_prob) {
    if (p_prob == 0.0) {
        throw std::invalid_argument("drafted token with zero draft probability");
    }
    return std::min(1.0, q_prob / p_prob);
}

Distribution residual_distribution(const Distribution& q, const Distribution& p) {
    validate_distribution(q);
    validate_distribution(p);
    if (q.size() != p.size()) {
        throw std::invalid_argument("mismatched supports");
    }
    Distribution res(q.size());
    double total = 0.0;
    for (size_t i = 0; i < q.size(); ++i) {
        res[i] = std::max(0.0, q[i] - p[i]);
        total += res[i];
    }
    if (total < 1e-12) {
        return q;
    }
    for (double& v : res) {
        v /= total;
    }
    return res;
}

VerificationOutcome verify_greedy(const NGramModel& target,
                                  std::span<const TokenId> committed_prefix,
                                  const PackedTree& packed,
                                  std::span<const NGramModel* const> drafters) {
    check_drafters(packed, drafters);
    auto conds = node_conditionals(target, committed_prefix, packed);
    auto children = children_in_judge_order(packed);
    EntropyScratch scratch(packed, drafters, committed_prefix);

    VerificationOutcome out;
    int cur = 0;
    while (true) {
        const Distribution& q = conds[static_cast<size_t>(cur)];
        double q_entropy = entropy(q);
        TokenId best = argmax_token(q);
        int next = -1;
        for (int child : children[static_cast<size_t>(cur)]) {
            bool match = packed.tokens[static_cast<size_t>(child)] == best;
            out.records.push_back(make_record(packed, child, match, q_entropy, scratch));
            if (match) {
                next = child;
                break;
            }
        }
        if (next < 0) {
            out.bonus_token = best;
            break;
        }
        out.accepted_node_ids.push_back(next);
        cur = next;
    }
    out.accepted_length = static_cast<int>(out.accepted_node_ids.size());
    return out;
}

VerificationOutcome verify_sampling(const NGramModel& target,
                                    std::span<const TokenId> committed_prefix,
                                    const PackedTree& packed,
                                    std::span<const NGramModel* const> drafters,
                                    Rng& rng) {
    check_drafters(packed, drafters);
    for (int i = 1; i < packed.size(); ++i) {
        if (!(packed.confidences[static_cast<size_t>(i)] > 0.0)) {
            throw std::invalid_argument("drafted token with zero draft probability");
        }
    }
    auto conds = node_conditionals(target, committed_prefix, packed);
    auto children = children_in_judge_order(packed);
    EntropyScratch scratch(packed, drafters, committed_prefix);

    VerificationOutcome out;
    int cur = 0;
    while (true) {
        double q_entropy = entropy(conds[static_cast<size_t>(cur)]);
        // Judged children consume mass from a working copy of the node's
        // conditional; a rejected token can then never be committed here,
        // including a duplicate proposal of it from the other subtree.
        Distribution q = conds[static_cast<size_t>(cur)];
        int next = -1;
        for (int child : children[static_cast<size_t>(cur)]) {
            TokenId token = packed.tokens[static_cast<size_t>(child)];
            // The tree names this candidate outright, so the proposal law
            // given the tree is the point mass at `token`.
            double accept = accept_probability(q[static_cast<size_t>(token)], 1.0);
            bool accepted = rng.uniform() < accept;
            out.records.push_back(make_record(packed, child, accepted, q_entropy, scratch));
            if (accepted) {
                next = child;
                break;
            }
            Distribution onehot(q.size(), 0.0);
            onehot[static_cast<size_t>(token)] = 1.0;
            q = residual_distribution(q, onehot);
        }
        if (next < 0) {
            out.bonus_token = sample_token(q, rng);
            break;
        }
        out.accepted_node_ids.push_back(next);
        cur = next;
    }
    out.accepted_length = static_cast<int>(out.accepted_node_ids.size());
    return out;
}

}  // namespace speclab
