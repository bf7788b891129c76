// Copyright 2026 The speclab Authors
// SPDX-License-Identifier: Apache-2.0
//
// Microbenchmarks for the hot paths: tree construction, packing, merging,
// verification, and whole decode sessions. The workload mirrors the default
// experiment bench at a reduced corpus size so fixtures build quickly.

#include <benchmark/benchmark.h>

#include "speclab/experiment.hpp"
#include "speclab/merge.hpp"

namespace {

using namespace speclab;

struct Fixture {
    ExperimentConfig config;
    DomainData data;
    VariantSet variants;
    std::vector<TokenId> prompt;

    Fixture() {
        config = default_config();
        config.domains.sequences_per_domain = 200;
        config.eval_prompts_per_domain = 4;
        validate_config(config);
        data = generate_domains(config, 1);
        variants = build_variants(config, data);
        prompt = data.prompts_a.front();
    }
};

const Fixture& fixture() {
    static const Fixture f;
    return f;
}

void BM_TreeBuild(benchmark::State& state) {
    const Fixture& f = fixture();
    for (auto _ : state) {
        benchmark::DoNotOptimize(
            build_draft_tree(*f.variants.specialist_a, f.prompt, f.config.tree));
    }
}
BENCHMARK(BM_TreeBuild);

void BM_PackTree(benchmark::State& state) {
    const Fixture& f = fixture();
    DraftTree tree = build_draft_tree(*f.variants.specialist_a, f.prompt, f.config.tree);
    for (auto _ : state) {
        benchmark::DoNotOptimize(pack_tree(tree));
    }
}
BENCHMARK(BM_PackTree);

void BM_MergeTrees(benchmark::State& state) {
    const Fixture& f = fixture();
    PackedTree a = pack_tree(build_draft_tree(*f.variants.specialist_a, f.prompt, f.config.tree));
    PackedTree b = pack_tree(build_draft_tree(*f.variants.specialist_b, f.prompt, f.config.tree));
    for (auto _ : state) {
        benchmark::DoNotOptimize(merge_trees(a, b));
    }
}
BENCHMARK(BM_MergeTrees);

void BM_VerifyGreedy(benchmark::State& state) {
    const Fixture& f = fixture();
    PackedTree packed =
        pack_tree(build_draft_tree(*f.variants.specialist_a, f.prompt, f.config.tree));
    const NGramModel* drafters[1] = {f.variants.specialist_a.get()};
    for (auto _ : state) {
        benchmark::DoNotOptimize(verify_greedy(*f.variants.target, f.prompt, packed, drafters));
    }
}
BENCHMARK(BM_VerifyGreedy);

void BM_VerifySampling(benchmark::State& state) {
    const Fixture& f = fixture();
    PackedTree packed =
        pack_tree(build_draft_tree(*f.variants.specialist_a, f.prompt, f.config.tree));
    const NGramModel* drafters[1] = {f.variants.specialist_a.get()};
    Rng rng(7);
    for (auto _ : state) {
        benchmark::DoNotOptimize(
            verify_sampling(*f.variants.target, f.prompt, packed, drafters, rng));
    }
}
BENCHMARK(BM_VerifySampling);

void BM_DecodeGreedy(benchmark::State& state) {
    const Fixture& f = fixture();
    Strategy strategy = resolve_strategy("single_a", DecodeMode::greedy, f.variants,
                                         f.config.tree);
    Rng rng(7);
    for (auto _ : state) {
        benchmark::DoNotOptimize(
            speculative_decode(*f.variants.target, strategy, f.prompt, 64, rng));
    }
}
BENCHMARK(BM_DecodeGreedy);

void BM_DecodeMerged(benchmark::State& state) {
    const Fixture& f = fixture();
    Strategy strategy = resolve_strategy("merged", DecodeMode::greedy, f.variants, f.config.tree);
    Rng rng(7);
    for (auto _ : state) {
        benchmark::DoNotOptimize(
            speculative_decode(*f.variants.target, strategy, f.prompt, 64, rng));
    }
}
BENCHMARK(BM_DecodeMerged);

void BM_AutoregressiveDecode(benchmark::State& state) {
    const Fixture& f = fixture();
    Rng rng(7);
    for (auto _ : state) {
        benchmark::DoNotOptimize(
            autoregressive_decode(*f.variants.target, f.prompt, 64, DecodeMode::greedy, rng));
    }
}
BENCHMARK(BM_AutoregressiveDecode);

void BM_AverageModels(benchmark::State& state) {
    const Fixture& f = fixture();
    for (auto _ : state) {
        benchmark::DoNotOptimize(
            average_models(*f.variants.specialist_a, *f.variants.specialist_b, 0.5));
    }
}
BENCHMARK(BM_AverageModels);

}  // namespace

BENCHMARK_MAIN();
