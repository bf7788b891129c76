// Copyright 2026 The speclab Authors
// SPDX-License-Identifier: Apache-2.0
//
// Measurement: acceptance statistics, entropy tables, routing tallies, and
// the brute-force distribution oracles used to check losslessness.

#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "speclab/decode.hpp"

namespace speclab {

// Mean accepted draft tokens per verifier call, over all results.
// Throws on empty input or inputs with no calls.
double acceptance_stats(std::span<const DecodeResult> results);

// Per-depth acceptance: accepted records at depth d divided by all records
// at depth d. Depths with no records are absent.
std::map<int, double> depth_acceptance(std::span<const DecodeResult> results);

struct EntropyReport {
    std::optional<double> accepted_draft;
    std::optional<double> rejected_draft;
    std::optional<double> accepted_verifier;
    std::optional<double> rejected_verifier;
    std::optional<double> delta_draft;     // rejected - accepted
    std::optional<double> delta_verifier;  // rejected - accepted
    std::uint64_t accepted_count = 0;
    std::uint64_t rejected_count = 0;
};

// Mean draft and verifier entropies split by record acceptance. A class with
// no records stays empty and its delta is undefined.
EntropyReport entropy_report(std::span<const DecodeResult> results);

struct RoutingCounts {
    // (signal, domain) -> chosen label -> count.
    std::map<std::pair<std::string, std::string>, std::map<std::string, std::uint64_t>> counts;

    double fraction(const std::string& signal, const std::string& domain,
                    const std::string& label) const;
};

RoutingCounts routing_counts(std::span<const RoutingRecord> records);

// Exact target law of the next `horizon` tokens by chain-rule enumeration.
// The result is indexed by mixed radix: continuation (t1 .. th) lives at
// ((t1 * V + t2) * V + ...) and the whole vector sums to 1. Throws when
// vocab^horizon exceeds 100000.
std::vector<double> exact_target_distribution(const NGramModel& target,
                                              std::span<const TokenId> prompt, int horizon);

// Empirical law of the first `horizon` committed tokens over n_samples
// independently seeded sampling decodes, same indexing as above. The
// strategy must be in sampling mode.
std::vector<double> empirical_decode_distribution(const NGramModel& target,
                                                  const Strategy& strategy,
                                                  std::span<const TokenId> prompt,
                                                  int horizon, int n_samples,
                                                  std::uint64_t seed);

// Same indexing, but each sample is a plain autoregressive decode. Gives the
// sampling-noise floor the speculative law is compared against.
std::vector<double> empirical_target_distribution(const NGramModel& target,
                                                  std::span<const TokenId> prompt,
                                                  int horizon, int n_samples,
                                                  std::uint64_t seed);

// Total variation distance: half the L1 difference. Sizes must match.
double tv_distance(std::span<const double> a, std::span<const double> b);

constexpr int kReferenceLogitDim = 8;

// Deterministic stand-in for a verifier forward pass: node i's vector is a
// hash mix of the multiset of (token, position) pairs visible to it under
// the mask. Any change to a visible pair changes the vector; nodes with
// equal visible multisets get equal vectors even across different packings,
// which is exactly the property tree merging must preserve.
std::vector<std::array<double, kReferenceLogitDim>> masked_reference_logits(
    const PackedTree& packed);

}  // namespace speclab
