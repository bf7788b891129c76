// Copyright 2026 The speclab Authors
// SPDX-License-Identifier: Apache-2.0
//
// Command line front end. Verbs:
//   config  print the default configuration as JSON
//   gen     write the synthetic corpora, prompts and ground-truth sources
//   train   write the target and drafter variant models
//   run     run the full measurement grid and write reports
//   sweep   run only the lambda sweep and write reports
//   oracle  run the self-contained correctness checks

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "speclab/experiment.hpp"
#include "speclab/oracle.hpp"

namespace {

namespace fs = std::filesystem;

speclab::ExperimentConfig load_config(const std::string& path) {
    if (path.empty()) {
        return speclab::default_config();
    }
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw std::runtime_error("cannot read config file: " + path);
    }
    std::ostringstream text;
    text << in.rdbuf();
    return speclab::config_from_json(text.str());
}

void write_file(const fs::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    out << content;
    if (!out) {
        throw std::runtime_error("cannot write " + path.string());
    }
}

void write_corpus_file(const fs::path& path, const speclab::DomainCorpus& corpus) {
    std::ofstream out(path, std::ios::binary);
    speclab::write_corpus(out, corpus);
    if (!out) {
        throw std::runtime_error("cannot write " + path.string());
    }
}

int run_gen(const speclab::ExperimentConfig& config, std::uint64_t seed,
            const std::string& out_dir) {
    speclab::DomainData data = speclab::generate_domains(config, seed);
    fs::create_directories(out_dir);
    const fs::path dir(out_dir);
    write_corpus_file(dir / "corpus_a.txt", data.corpus_a);
    write_corpus_file(dir / "corpus_b.txt", data.corpus_b);
    speclab::DomainCorpus prompts_a{data.prompts_a, "a"};
    speclab::DomainCorpus prompts_b{data.prompts_b, "b"};
    write_corpus_file(dir / "prompts_a.txt", prompts_a);
    write_corpus_file(dir / "prompts_b.txt", prompts_b);
    write_file(dir / "source_a.json", speclab::model_to_json(*data.source_a));
    write_file(dir / "source_b.json", speclab::model_to_json(*data.source_b));
    std::printf("wrote corpora, prompts and sources for seed %llu to %s\n",
                static_cast<unsigned long long>(seed), out_dir.c_str());
    return 0;
}

int run_train(const speclab::ExperimentConfig& config, std::uint64_t seed,
              const std::string& out_dir) {
    speclab::DomainData data = speclab::generate_domains(config, seed);
    speclab::VariantSet variants = speclab::build_variants(config, data);
    fs::create_directories(out_dir);
    const fs::path dir(out_dir);
    write_file(dir / "target.json", speclab::model_to_json(*variants.target));
    write_file(dir / "specialist_a.json", speclab::model_to_json(*variants.specialist_a));
    write_file(dir / "specialist_b.json", speclab::model_to_json(*variants.specialist_b));
    write_file(dir / "mixed_small.json", speclab::model_to_json(*variants.mixed_small));
    write_file(dir / "mixed_large.json", speclab::model_to_json(*variants.mixed_large));
    write_file(dir / "averaged.json", speclab::model_to_json(*variants.averaged));
    std::printf("wrote model variants for seed %llu to %s\n",
                static_cast<unsigned long long>(seed), out_dir.c_str());
    return 0;
}

int finish_run(const speclab::ExperimentRun& run, const std::string& out_dir) {
    if (auto problem = speclab::validate_run(run)) {
        std::fprintf(stderr, "run failed validation: %s\n", problem->c_str());
        return 1;
    }
    speclab::write_reports(run, out_dir);
    std::printf("wrote report.json, metrics.csv, routing_records.csv and sweep.csv to %s\n",
                out_dir.c_str());
    return 0;
}

int run_oracle(int instances, int samples, std::uint64_t seed) {
    std::vector<speclab::CheckResult> results;
    results.push_back(speclab::check_greedy_losslessness(instances, 48, seed));
    results.push_back(speclab::check_merge_arithmetic(instances, 24, seed));
    results.push_back(speclab::check_packing_invariance(instances, seed));
    results.push_back(speclab::check_topk_distillation(instances, seed));
    for (speclab::CheckResult& r : speclab::check_sampling_losslessness(samples, seed)) {
        results.push_back(std::move(r));
    }
    bool all_passed = true;
    for (const speclab::CheckResult& r : results) {
        std::printf("[%s] %s: %s\n", r.passed ? "PASS" : "FAIL", r.name.c_str(),
                    r.detail.c_str());
        all_passed = all_passed && r.passed;
    }
    return all_passed ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"desk-scale laboratory for lossless speculative decoding over n-gram tables"};
    app.require_subcommand(1);

    std::string config_path;
    std::string out_dir;
    std::uint64_t seed = 1;
    int jobs = 1;
    int instances = 150;
    int samples = 200000;

    CLI::App* config_cmd = app.add_subcommand("config", "print the default config as JSON");

    CLI::App* gen = app.add_subcommand("gen", "generate corpora, prompts and sources");
    gen->add_option("--config", config_path, "config JSON path (defaults built in)");
    gen->add_option("--seed", seed, "generation seed");
    gen->add_option("--out", out_dir, "output directory");

    CLI::App* train = app.add_subcommand("train", "train the model variants");
    train->add_option("--config", config_path, "config JSON path (defaults built in)");
    train->add_option("--seed", seed, "generation seed");
    train->add_option("--out", out_dir, "output directory");

    CLI::App* run = app.add_subcommand("run", "run the full measurement grid");
    run->add_option("--config", config_path, "config JSON path (defaults built in)");
    run->add_option("--jobs", jobs, "worker threads (results are identical for any value)");
    run->add_option("--out", out_dir, "output directory (overrides the config)");

    CLI::App* sweep = app.add_subcommand("sweep", "run only the lambda sweep");
    sweep->add_option("--config", config_path, "config JSON path (defaults built in)");
    sweep->add_option("--jobs", jobs, "worker threads (results are identical for any value)");
    sweep->add_option("--out", out_dir, "output directory (overrides the config)");

    CLI::App* oracle = app.add_subcommand("oracle", "run the correctness self checks");
    oracle->add_option("--instances", instances, "randomized instances per check");
    oracle->add_option("--samples", samples, "samples for the sampled-law check");
    oracle->add_option("--seed", seed, "check seed");

    CLI11_PARSE(app, argc, argv);

    try {
        if (config_cmd->parsed()) {
            std::fputs(speclab::config_to_json(speclab::default_config()).c_str(), stdout);
            return 0;
        }
        if (gen->parsed()) {
            speclab::ExperimentConfig config = load_config(config_path);
            return run_gen(config, seed, out_dir.empty() ? config.output_dir : out_dir);
        }
        if (train->parsed()) {
            speclab::ExperimentConfig config = load_config(config_path);
            return run_train(config, seed, out_dir.empty() ? config.output_dir : out_dir);
        }
        if (run->parsed()) {
            speclab::ExperimentConfig config = load_config(config_path);
            if (!out_dir.empty()) config.output_dir = out_dir;
            return finish_run(speclab::run_experiments(config, jobs), config.output_dir);
        }
        if (sweep->parsed()) {
            speclab::ExperimentConfig config = load_config(config_path);
            if (!out_dir.empty()) config.output_dir = out_dir;
            return finish_run(speclab::run_sweep(config, jobs), config.output_dir);
        }
        if (oracle->parsed()) {
            return run_oracle(instances, samples, seed);
        }
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
