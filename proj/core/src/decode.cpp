// Copyright 2026 The speclab Authors
// SPDX-License-Identifier: Apache-2.0

#include "speclab/decode.hpp"

#include <stdexcept>

#include "speclab/merge.hpp"

namespace speclab {

const char* strategy_kind_name(StrategyKind kind) {
    switch (kind) {
        case StrategyKind::single: return "single";
        case StrategyKind::averaged: return "averaged";
        case StrategyKind::routed: return "routed";
        case StrategyKind::merged: return "merged";
    }
    return "unknown";
}

const char* decode_mode_name(DecodeMode mode) {
    return mode == DecodeMode::greedy ? "greedy" : "sampling";
}

Strategy make_single_strategy(std::string label, std::shared_ptr<const NGramModel> drafter,
                              const TreeParams& tree, DecodeMode mode) {
    if (drafter == nullptr) {
        throw std::invalid_argument("strategy needs a drafter");
    }
    Strategy s;
    s.kind = StrategyKind::single;
    s.mode = mode;
    s.tree = tree;
    s.labels = {std::move(label)};
    s.drafters = {std::move(drafter)};
    return s;
}

Strategy make_averaged_strategy(std::string label_a, const NGramModel& a,
                                std::string label_b, const NGramModel& b, double lambda,
                                const TreeParams& tree, DecodeMode mode) {
    Strategy s;
    s.kind = StrategyKind::averaged;
    s.mode = mode;
    s.tree = tree;
    s.lambda = lambda;
    s.labels = {std::move(label_a), std::move(label_b)};
    s.drafters = {std::make_shared<const NGramModel>(average_models(a, b, lambda))};
    return s;
}

Strategy make_routed_strategy(std::string label_a, std::shared_ptr<const NGramModel> a,
                              std::string label_b, std::shared_ptr<const NGramModel> b,
                              RoutingSignal signal, const TreeParams& tree, DecodeMode mode) {
    if (a == nullptr || b == nullptr) {
        throw std::invalid_argument("strategy needs two drafters");
    }
    Strategy s;
    s.kind = StrategyKind::routed;
    s.mode = mode;
    s.tree = tree;
    s.signal = signal;
    s.labels = {std::move(label_a), std::move(label_b)};
    s.drafters = {std::move(a), std::move(b)};
    return s;
}

Strategy make_merged_strategy(std::string label_a, std::shared_ptr<const NGramModel> a,
                              std::string label_b, std::shared_ptr<const NGramModel> b,
                              const TreeParams& tree, DecodeMode mode) {
    if (a == nullptr || b == nullptr) {
        throw std::invalid_argument("strategy needs two drafters");
    }
    Strategy s;
    s.kind = StrategyKind::merged;
    s.mode = mode;
    s.tree = tree;
    s.labels = {std::move(label_a), std::move(label_b)};
    s.drafters = {std::move(a), std::move(b)};
    return s;
}

namespace {

int required_prompt_length(const NGramModel& target, const Strategy& strategy) {
    int need = target.order();
    for (const auto& drafter : strategy.drafters) {
        need = std::max(need, drafter->order());
    }
    return need;
}

struct CallResult {
    VerificationOutcome outcome;
    std::vector<TokenId> committed;
    RoutingRecord routing;
    bool routed = false;
};

CallResult run_one_call(const NGramModel& target, const Strategy& strategy,
                        std::span<const TokenId> prefix, Rng& rng) {
    PackedTree packed;
    std::vector<const NGramModel*> drafters;
    CallResult result;

    switch (strategy.kind) {
        case StrategyKind::single:
        case StrategyKind::averaged: {
            packed = pack_tree(build_draft_tree(*strategy.drafters[0], prefix, strategy.tree));
            drafters = {strategy.drafters[0].get()};
            break;
        }
        case StrategyKind::routed: {
            DraftTree tree_a = build_draft_tree(*strategy.drafters[0], prefix, strategy.tree);
            DraftTree tree_b = build_draft_tree(*strategy.drafters[1], prefix, strategy.tree);
            RouteCandidate candidates[2] = {
                {strategy.labels[0], &tree_a, strategy.drafters[0].get()},
                {strategy.labels[1], &tree_b, strategy.drafters[1].get()},
            };
            result.routing = route(candidates, prefix, strategy.signal);
            result.routed = true;
            const DraftTree& chosen = result.routing.chosen_index == 0 ? tree_a : tree_b;
            packed = pack_tree(chosen);
            drafters = {strategy.drafters[static_cast<size_t>(result.routing.chosen_index)].get()};
            break;
        }
        case StrategyKind::merged: {
            PackedTree pa =
                pack_tree(build_draft_tree(*strategy.drafters[0], prefix, strategy.tree));
            PackedTree pb =
                pack_tree(build_draft_tree(*strategy.drafters[1], prefix, strategy.tree));
            packed = merge_trees(pa, pb);
            drafters = {strategy.drafters[0].get(), strategy.drafters[1].get()};
            break;
        }
    }

    result.outcome = strategy.mode == DecodeMode::greedy
                         ? verify_greedy(target, prefix, packed, drafters)
                         : verify_sampling(target, prefix, packed, drafters, rng);
    for (int id : result.outcome.accepted_node_ids) {
        result.committed.push_back(packed.tokens[static_cast<size_t>(id)]);
    }
    result.committed.push_back(result.outcome.bonus_token);
    return result;
}

}  // namespace

DecodeResult speculative_decode(const NGramModel& target, const Strategy& strategy,
                                std::span<const TokenId> prompt, int max_new_tokens,
                                Rng& rng) {
    if (max_new_tokens < 1) {
        throw std::invalid_argument("max_new_tokens must be positive");
    }
    if (static_cast<int>(prompt.size()) < required_prompt_length(target, strategy)) {
        throw std::invalid_argument("prefix too short");
    }

    DecodeResult result;
    std::vector<TokenId> prefix(prompt.begin(), prompt.end());
    while (static_cast<int>(prefix.size()) - static_cast<int>(prompt.size()) < max_new_tokens) {
        CallResult call = run_one_call(target, strategy, prefix, rng);
        prefix.insert(prefix.end(), call.committed.begin(), call.committed.end());
        result.outcomes.push_back(std::move(call.outcome));
        if (call.routed) {
            result.routing_records.push_back(std::move(call.routing));
        }
    }
    result.output_tokens.assign(prefix.begin() + static_cast<long>(prompt.size()),
                                prefix.begin() + static_cast<long>(prompt.size()) + max_new_tokens);
    return result;
}

std::vector<TokenId> autoregressive_decode(const NGramModel& target,
                                           std::span<const TokenId> prompt,
                                           int max_new_tokens, DecodeMode mode, Rng& rng) {
    if (max_new_tokens < 1) {
        throw std::invalid_argument("max_new_tokens must be positive");
    }
    std::vector<TokenId> prefix(prompt.begin(), prompt.end());
    for (int i = 0; i < max_new_tokens; ++i) {
        Distribution dist = target.next_distribution(prefix);
        prefix.push_back(mode == DecodeMode::greedy ? argmax_token(dist)
                                                    : sample_token(dist, rng));
    }
    return {prefix.begin() + static_cast<long>(prompt.size()), prefix.end()};
}

}  // namespace speclab
