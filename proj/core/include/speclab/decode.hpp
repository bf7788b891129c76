// Copyright 2026 The speclab Authors
// SPDX-License-Identifier: Apache-2.0
//
// Decoding sessions: the draft / verify loop for each drafting strategy.

#pragma once

#include <memory>
#include <string>
#include <vector>

#include "speclab/models.hpp"
#include "speclab/router.hpp"
#include "speclab/tree.hpp"
#include "speclab/verify.hpp"

namespace speclab {

enum class StrategyKind { single, averaged, routed, merged };
enum class DecodeMode { greedy, sampling };

const char* strategy_kind_name(StrategyKind kind);
const char* decode_mode_name(DecodeMode mode);

// A fully resolved drafting strategy. `drafters` holds one model for single
// and averaged (the averaged table is materialized once, at construction)
// and two for routed and merged.
struct Strategy {
    StrategyKind kind = StrategyKind::single;
    DecodeMode mode = DecodeMode::greedy;
    TreeParams tree;
    RoutingSignal signal = RoutingSignal::confidence;  // routed only
    double lambda = 0.5;                               // averaged only
    std::vector<std::string> labels;
    std::vector<std::shared_ptr<const NGramModel>> drafters;
};

Strategy make_single_strategy(std::string label, std::shared_ptr<const NGramModel> drafter,
                              const TreeParams& tree, DecodeMode mode);
Strategy make_averaged_strategy(std::string label_a, const NGramModel& a,
                                std::string label_b, const NGramModel& b, double lambda,
                                const TreeParams& tree, DecodeMode mode);
Strategy make_routed_strategy(std::string label_a, std::shared_ptr<const NGramModel> a,
                              std::string label_b, std::shared_ptr<const NGramModel> b,
                              RoutingSignal signal, const TreeParams& tree, DecodeMode mode);
Strategy make_merged_strategy(std::string label_a, std::shared_ptr<const NGramModel> a,
                              std::string label_b, std::shared_ptr<const NGramModel> b,
                              const TreeParams& tree, DecodeMode mode);

struct DecodeResult {
    std::vector<TokenId> output_tokens;           // the committed continuation
    std::vector<VerificationOutcome> outcomes;    // one per verifier call
    std::vector<RoutingRecord> routing_records;   // one per call, routed only
};

// Repeatedly drafts from the current prefix, verifies, and commits the
// accepted path plus the bonus token until max_new_tokens tokens exist; the
// output is truncated to exactly max_new_tokens. Every call commits at
// least one token, so the loop always terminates. In greedy mode the output
// equals autoregressive_decode's exactly, for every strategy; in sampling
// mode it is distributed identically to the target chain.
DecodeResult speculative_decode(const NGramModel& target, const Strategy& strategy,
                                std::span<const TokenId> prompt, int max_new_tokens,
                                Rng& rng);

// Plain one-token-at-a-time decoding with the target. The baseline every
// speculative configuration is checked against.
std::vector<TokenId> autoregressive_decode(const NGramModel& target,
                                           std::span<const TokenId> prompt,
                                           int max_new_tokens, DecodeMode mode, Rng& rng);

}  // namespace speclab
