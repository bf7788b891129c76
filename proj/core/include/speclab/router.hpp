// Copyright 2026 The speclab Authors
// SPDX-License-Identifier: Apache-2.0
//
// Draft-side routing between specialist trees. Routing sees only the drafted
// trees and the drafters that built them; the target model is deliberately
// absent from every signature, so a routed step costs no verifier queries
// beyond the one tree that wins.

#pragma once

#include <string>
#include <vector>

#include "speclab/models.hpp"
#include "speclab/tree.hpp"

namespace speclab {

enum class RoutingSignal { confidence, entropy };

struct RouteCandidate {
    std::string label;
    const DraftTree* tree = nullptr;
    const NGramModel* drafter = nullptr;  // needed for the entropy signal
};

struct RoutingRecord {
    std::string prompt_domain;  // filled in by the caller that knows it
    RoutingSignal signal = RoutingSignal::confidence;
    std::string chosen;
    int chosen_index = 0;
    std::vector<double> scores;  // one per candidate, in candidate order
};

// Mean confidence over the non-root nodes. Throws on an empty tree.
double score_tree_confidence(const DraftTree& tree);

// Mean over the non-root nodes of the drafter's conditional entropy at each
// node's parent context (prefix plus the path to the parent), i.e. the
// average uncertainty of the distributions the tree was drafted from.
double score_tree_entropy(const DraftTree& tree, const NGramModel& drafter,
                          std::span<const TokenId> prefix);

// Picks the candidate with the highest mean confidence, or the lowest mean
// entropy under the entropy signal. Ties go to the earliest candidate.
// Requires at least two candidates.
RoutingRecord route(std::span<const RouteCandidate> candidates,
                    std::span<const TokenId> prefix, RoutingSignal signal);

const char* routing_signal_name(RoutingSignal signal);

// CSV row "domain,signal,chosen,score_1,score_2".
std::string routing_record_csv_row(const RoutingRecord& record);

}  // namespace speclab
