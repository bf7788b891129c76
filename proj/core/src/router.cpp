// Copyright 2026 The speclab Authors
// SPDX-License-Identifier: Apache-2.0

#include "speclab/router.hpp"

#include <cstdio>
#include <stdexcept>

namespace speclab {

double score_tree_confidence(const DraftTree& tree) {
    if (tree.node_count() == 0) {
        throw std::invalid_argument("empty tree");
    }
    double total = 0.0;
    for (const DraftNode& node : tree.nodes) {
        total += node.confidence;
    }
    return total / tree.node_count();
}

double score_tree_entropy(const DraftTree& tree, const NGramModel& drafter,
                          std::span<const TokenId> prefix) {
    if (tree.node_count() == 0) {
        throw std::invalid_argument("empty tree");
    }
    std::vector<TokenId> context(prefix.begin(), prefix.end());
    double total = 0.0;
    for (int id = 1; id <= tree.node_count(); ++id) {
        // Entropy of the conditional the node was drafted from: the
        // drafter's distribution at the node's parent context.
        context.resize(prefix.size());
        for (TokenId t : tree.path_tokens(tree.node(id).parent)) {
            context.push_back(t);
        }
        total += entropy(drafter.next_distribution(context));
    }
    return total / tree.node_count();
}

RoutingRecord route(std::span<const RouteCandidate> candidates,
                    std::span<const TokenId> prefix, RoutingSignal signal) {
    if (candidates.size() < 2) {
        throw std::invalid_argument("need at least two trees to route");
    }
    RoutingRecord record;
    record.signal = signal;
    for (const RouteCandidate& c : candidates) {
        if (c.tree == nullptr || c.drafter == nullptr) {
            throw std::invalid_argument("route candidate missing tree or drafter");
        }
        double score = signal == RoutingSignal::confidence
                           ? score_tree_confidence(*c.tree)
                           : score_tree_entropy(*c.tree, *c.drafter, prefix);
        record.scores.push_back(score);
    }
    int best = 0;
    for (int i = 1; i < static_cast<int>(record.scores.size()); ++i) {
        bool better = signal == RoutingSignal::confidence
                          ? record.scores[static_cast<size_t>(i)] > record.scores[static_cast<size_t>(best)]
                          : record.scores[static_cast<size_t>(i)] < record.scores[static_cast<size_t>(best)];
        if (better) {
            best = i;
        }
    }
    record.chosen_index = best;
    record.chosen = candidates[static_cast<size_t>(best)].label;
    return record;
}

const char* routing_signal_name(RoutingSignal signal) {
    return signal == RoutingSignal::confidence ? "confidence" : "entropy";
}

std::string routing_record_csv_row(const RoutingRecord& record) {
    std::string row = record.prompt_domain;
    row += ',';
    row += routing_signal_name(record.signal);
    row += ',';
    row += record.chosen;
    char buf[64];
    for (double score : record.scores) {
        std::snprintf(buf, sizeof(buf), ",%.10g", score);
        row += buf;
    }
    return row;
}

}  // namespace speclab
