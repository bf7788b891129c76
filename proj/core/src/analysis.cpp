// Copyright 2026 The speclab Authors
// SPDX-License-Identifier: Apache-2.0

#include "speclab/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "speclab/rng.hpp"

namespace speclab {

double acceptance_stats(std::span<const DecodeResult> results) {
    std::uint64_t calls = 0;
    std::uint64_t accepted = 0;
    for (const DecodeResult& r : results) {
        calls += r.outcomes.size();
        for (const VerificationOutcome& o : r.outcomes) {
            accepted += static_cast<std::uint64_t>(o.accepted_length);
        }
    }
    if (calls == 0) {
        throw std::invalid_argument("no verifier calls to average");
    }
    return static_cast<double>(accepted) / static_cast<double>(calls);
}

std::map<int, double> depth_acceptance(std::span<const DecodeResult> results) {
    std::map<int, std::pair<std::uint64_t, std::uint64_t>> tally;  // depth -> (accepted, total)
    for (const DecodeResult& r : results) {
        for (const VerificationOutcome& o : r.outcomes) {
            for (const NodeRecord& rec : o.records) {
                auto& cell = tally[rec.depth];
                cell.second += 1;
                if (rec.accepted) {
                    cell.first += 1;
                }
            }
        }
    }
    std::map<int, double> out;
    for (const auto& [depth, cell] : tally) {
        out[depth] = static_cast<double>(cell.first) / static_cast<double>(cell.second);
    }
    return out;
}

EntropyReport entropy_report(std::span<const DecodeResult> results) {
    double sum_ad = 0.0, sum_rd = 0.0, sum_av = 0.0, sum_rv = 0.0;
    EntropyReport report;
    for (const DecodeResult& r : results) {
        for (const VerificationOutcome& o : r.outcomes) {
            for (const NodeRecord& rec : o.records) {
                if (rec.accepted) {
                    report.accepted_count += 1;
                    sum_ad += rec.draft_entropy;
                    sum_av += rec.verifier_entropy;
                } else {
                    report.rejected_count += 1;
                    sum_rd += rec.draft_entropy;
                    sum_rv += rec.verifier_entropy;
                }
            }
        }
    }
    if (report.accepted_count > 0) {
        report.accepted_draft = sum_ad / static_cast<double>(report.accepted_count);
        report.accepted_verifier = sum_av / static_cast<double>(report.accepted_count);
    }
    if (report.rejected_count > 0) {
        report.rejected_draft = sum_rd / static_cast<double>(report.rejected_count);
        report.rejected_verifier = sum_rv / static_cast<double>(report.rejected_count);
    }
    if (report.accepted_count > 0 && report.rejected_count > 0) {
        report.delta_draft = *report.rejected_draft - *report.accepted_draft;
        report.delta_verifier = *report.rejected_verifier - *report.accepted_verifier;
    }
    return report;
}

double RoutingCounts::fraction(const std::string& signal, const std::string& domain,
                               const std::string& label) const {
    auto it = counts.find({signal, domain});
    if (it == counts.end()) {
        return 0.0;
    }
    std::uint64_t total = 0;
    std::uint64_t hits = 0;
    for (const auto& [chosen, n] : it->second) {
        total += n;
        if (chosen == label) {
            hits += n;
        }
    }
    return total == 0 ? 0.0 : static_cast<double>(hits) / static_cast<double>(total);
}

RoutingCounts routing_counts(std::span<const RoutingRecord> records) {
    RoutingCounts out;
    for (const RoutingRecord& rec : records) {
        out.counts[{routing_signal_name(rec.signal), rec.prompt_domain}][rec.chosen] += 1;
    }
    return out;
}

namespace {

constexpr int kEnumerationLimit = 100000;

void enumerate(const NGramModel& target, std::vector<TokenId>& prefix, int remaining,
               double mass, std::size_t base, std::vector<double>& out) {
    if (remaining == 0) {
        out[base] += mass;
        return;
    }
    Distribution dist = target.next_distribution(prefix);
    for (TokenId t = 0; t < static_cast<TokenId>(dist.size()); ++t) {
        if (dist[static_cast<size_t>(t)] <= 0.0) {
            continue;
        }
        prefix.push_back(t);
        enumerate(target, prefix, remaining - 1, mass * dist[static_cast<size_t>(t)],
                  base * static_cast<std::size_t>(dist.size()) + static_cast<std::size_t>(t),
                  out);
        prefix.pop_back();
    }
}

std::size_t continuation_space(int vocab, int horizon) {
    std::size_t space = 1;
    for (int i = 0; i < horizon; ++i) {
        space *= static_cast<std::size_t>(vocab);
        if (space > kEnumerationLimit) {
            throw std::invalid_argument("enumeration space too large");
        }
    }
    return space;
}

std::size_t continuation_index(std::span<const TokenId> tokens, int vocab, int horizon) {
    std::size_t idx = 0;
    for (int i = 0; i < horizon; ++i) {
        idx = idx * static_cast<std::size_t>(vocab) + static_cast<std::size_t>(tokens[static_cast<size_t>(i)]);
    }
    return idx;
}

}  // namespace

std::vector<double> exact_target_distribution(const NGramModel& target,
                                              std::span<const TokenId> prompt, int horizon) {
    if (horizon < 1) {
        throw std::invalid_argument("horizon must be positive");
    }
    std::vector<double> out(continuation_space(target.vocab_size(), horizon), 0.0);
    std::vector<TokenId> prefix(prompt.begin(), prompt.end());
    enumerate(target, prefix, horizon, 1.0, 0, out);
    return out;
}

std::vector<double> empirical_decode_distribution(const NGramModel& target,
                                                  const Strategy& strategy,
                                                  std::span<const TokenId> prompt,
                                                  int horizon, int n_samples,
                                                  std::uint64_t seed) {
    if (strategy.mode != DecodeMode::sampling) {
        throw std::invalid_argument("empirical law needs a sampling strategy");
    }
    if (n_samples < 1) {
        throw std::invalid_argument("n_samples must be positive");
    }
    std::vector<double> out(continuation_space(target.vocab_size(), horizon), 0.0);
    const double w = 1.0 / static_cast<double>(n_samples);
    for (int i = 0; i < n_samples; ++i) {
        Rng rng(derive_seed({seed, static_cast<std::uint64_t>(i)}));
        DecodeResult r = speculative_decode(target, strategy, prompt, horizon, rng);
        out[continuation_index(r.output_tokens, target.vocab_size(), horizon)] += w;
    }
    return out;
}

std::vector<double> empirical_target_distribution(const NGramModel& target,
                                                  std::span<const TokenId> prompt,
                                                  int horizon, int n_samples,
                                                  std::uint64_t seed) {
    if (n_samples < 1) {
        throw std::invalid_argument("n_samples must be positive");
    }
    std::vector<double> out(continuation_space(target.vocab_size(), horizon), 0.0);
    const double w = 1.0 / static_cast<double>(n_samples);
    for (int i = 0; i < n_samples; ++i) {
        Rng rng(derive_seed({seed, static_cast<std::uint64_t>(i)}));
        std::vector<TokenId> tokens =
            autoregressive_decode(target, prompt, horizon, DecodeMode::sampling, rng);
        out[continuation_index(tokens, target.vocab_size(), horizon)] += w;
    }
    return out;
}

double tv_distance(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) {
        throw std::invalid_argument("mismatched supports");
    }
    double l1 = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        l1 += std::abs(a[i] - b[i]);
    }
    return 0.5 * l1;
}

std::vector<std::array<double, kReferenceLogitDim>> masked_reference_logits(
    const PackedTree& packed) {
    const int n = packed.size();
    std::vector<std::array<double, kReferenceLogitDim>> out(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) {
        // Order-free accumulation over the visible (token, position) multiset,
        // so any packing that exposes the same set produces the same vector.
        std::array<double, kReferenceLogitDim> acc{};
        for (int j = 0; j < n; ++j) {
            if (packed.mask[static_cast<size_t>(i)][static_cast<size_t>(j)] == 0) {
                continue;
            }
            std::uint64_t h = mix_u64(
                (static_cast<std::uint64_t>(static_cast<std::uint32_t>(packed.tokens[static_cast<size_t>(j)])) << 32) ^
                static_cast<std::uint64_t>(static_cast<std::uint32_t>(packed.positions[static_cast<size_t>(j)])));
            for (int d = 0; d < kReferenceLogitDim; ++d) {
                h = mix_u64(h + static_cast<std::uint64_t>(d) + 1);
                acc[static_cast<size_t>(d)] += static_cast<double>(h >> 11) * 0x1.0p-53;
            }
        }
        out[static_cast<size_t>(i)] = acc;
    }
    return out;
}

}  // namespace speclab
