// Copyright 2026 The speclab Authors
// SPDX-License-Identifier: Apache-2.0
//
// The experiment bench: synthetic two-domain workloads, model variants, the
// strategy / mode / domain / seed measurement grid, and report files.

#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "speclab/analysis.hpp"
#include "speclab/decode.hpp"

namespace speclab {

// Two order-2 Markov sources over a split vocabulary: the lower half of the
// token range carries domain A's text, the upper half domain B's. A
// generic_fraction of contexts are generic: both sources emit one shared
// graded block there, the easy common structure any drafter gets right. At
// the remaining, domain-specific contexts a source concentrates
// favored_count tokens of the context's half, with masses graded by that
// source's favored decay so the top continuation is unambiguous, and a
// per-context sharp or soft variation of the whole block; at specific
// contexts of the other half it spreads mass over away_count tokens (broad
// "away" structure). Transitions never leave the half the context ends in,
// so a sequence lives in the half its warmup tokens land in and a
// region-pure prompt pins the domain for the whole decode. home_fraction of
// a corpus starts at home, the rest away, so trained models see both
// regions but a domain's text is dominated by its own structure. The
// default masses put source A's specific home entropy below the away
// entropy and that below source B's; see the README for why each
// inequality matters.
struct DomainGenParams {
    int sequences_per_domain = 900;
    int sequence_length = 80;
    double favored_mass_a = 0.48;    // top favored token, source A at home
    int favored_count_a = 2;
    double favored_mass_b = 0.40;    // top favored token, source B at home
    int favored_count_b = 3;
    double away_mass = 0.24;         // per designated token away from home
    int away_count = 4;
    double favored_decay_a = 0.80;   // mass ratio between favored ranks, source A
    double favored_decay_b = 0.65;   // same for source B; lower keeps its ranks apart
    double sharpness_spread = 0.10;  // +/- fraction on the favored mass
    double home_fraction = 0.80;     // share of a corpus that starts at home
    double generic_fraction = 0.30;  // share of contexts both sources agree on
    double shared_mass = 0.48;       // top shared token at a generic context
    int shared_count = 2;
    double shared_decay = 0.80;
    int prompt_length = 8;
};

struct ExperimentConfig {
    int vocab_size = 32;
    int target_order = 3;
    int drafter_order = 2;
    double smoothing_alpha = 0.01;
    DomainGenParams domains;
    TreeParams tree;
    std::vector<std::string> strategies = {
        "single_a", "single_b", "mixed_small", "mixed_large",
        "averaged", "routed_confidence", "routed_entropy", "merged",
    };
    std::vector<DecodeMode> modes = {DecodeMode::greedy, DecodeMode::sampling};
    std::vector<double> lambda_grid = {0.0, 0.1, 0.2, 0.3, 0.4, 0.5,
                                       0.6, 0.7, 0.8, 0.9, 1.0};
    int eval_prompts_per_domain = 200;
    int eval_new_tokens = 64;
    std::vector<std::uint64_t> seeds = {1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
    std::string output_dir = "out";
};

ExperimentConfig default_config();
ExperimentConfig config_from_json(const std::string& text);
std::string config_to_json(const ExperimentConfig& config);
void validate_config(const ExperimentConfig& config);

// Ground-truth sources, sampled corpora and held-out evaluation prompts for
// one seed. Deterministic: the same config and seed reproduce identical
// bytes.
struct DomainData {
    std::shared_ptr<const NGramModel> source_a;
    std::shared_ptr<const NGramModel> source_b;
    DomainCorpus corpus_a;
    DomainCorpus corpus_b;
    std::vector<std::vector<TokenId>> prompts_a;
    std::vector<std::vector<TokenId>> prompts_b;
};

DomainData generate_domains(const ExperimentConfig& config, std::uint64_t seed);

// The fixed verifier and the draft variants measured against it.
struct VariantSet {
    std::shared_ptr<const NGramModel> target;       // target_order, trained on A + B
    std::shared_ptr<const NGramModel> specialist_a; // drafter_order, trained on A
    std::shared_ptr<const NGramModel> specialist_b; // drafter_order, trained on B
    std::shared_ptr<const NGramModel> mixed_small;  // half of A + half of B
    std::shared_ptr<const NGramModel> mixed_large;  // all of A + all of B
    std::shared_ptr<const NGramModel> averaged;     // logit average, lambda 0.5
};

VariantSet build_variants(const ExperimentConfig& config, const DomainData& data);

// Resolves a strategy name from ExperimentConfig::strategies.
Strategy resolve_strategy(const std::string& name, DecodeMode mode,
                          const VariantSet& variants, const TreeParams& tree);

struct DepthCell {
    std::uint64_t accepted = 0;
    std::uint64_t total = 0;
};

struct EntropyCell {
    double accepted_draft_sum = 0.0;
    double rejected_draft_sum = 0.0;
    double accepted_verifier_sum = 0.0;
    double rejected_verifier_sum = 0.0;
    std::uint64_t accepted = 0;
    std::uint64_t rejected = 0;
};

struct CellStats {
    std::uint64_t calls = 0;
    std::uint64_t accepted_tokens = 0;
    std::uint64_t committed_tokens = 0;
    std::map<int, DepthCell> depth;
    EntropyCell entropy;

    double mean_acceptance() const;
};

struct RoutingTally {
    // First-call decision per prompt, which is what the matched-pick rates
    // are computed from.
    std::map<std::string, std::uint64_t> prompt_picks;
    std::uint64_t prompts = 0;
    // Every per-call decision, for completeness.
    std::map<std::string, std::uint64_t> call_picks;
    std::uint64_t calls = 0;
    std::vector<RoutingRecord> first_call_records;
};

struct SweepPoint {
    double lambda = 0.0;
    double mean_a = 0.0;      // domain A prompts
    double mean_b = 0.0;      // domain B prompts
    double mean_mixed = 0.0;  // pooled over both prompt sets
    std::uint64_t calls_a = 0;
    std::uint64_t calls_b = 0;
    std::uint64_t accepted_a = 0;
    std::uint64_t accepted_b = 0;
};

struct SeedOutcome {
    std::uint64_t seed = 0;
    // key: (strategy, mode name, domain)
    std::map<std::tuple<std::string, std::string, std::string>, CellStats> cells;
    // key: (signal name, domain)
    std::map<std::pair<std::string, std::string>, RoutingTally> routing;
    std::vector<SweepPoint> sweep;  // greedy mode, one point per lambda
};

struct ExperimentRun {
    ExperimentConfig config;
    std::vector<SeedOutcome> seeds;
};

// Runs the full grid. jobs > 1 distributes cells over worker threads; the
// result is identical regardless of jobs because every cell derives its rng
// streams from (seed, domain, prompt, mode) alone.
ExperimentRun run_experiments(const ExperimentConfig& config, int jobs);

// Like run_experiments but only the lambda sweep.
ExperimentRun run_sweep(const ExperimentConfig& config, int jobs);

// report.json, metrics.csv, routing_records.csv, sweep.csv under out_dir.
// Byte-identical across reruns of the same config and seeds.
void write_reports(const ExperimentRun& run, const std::string& out_dir);

// Cross-checks every report quantity (rates in range, counts consistent).
// Returns the failing description or nullopt.
std::optional<std::string> validate_run(const ExperimentRun& run);

}  // namespace speclab
