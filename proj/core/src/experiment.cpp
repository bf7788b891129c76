// Copyright 2026 The speclab Authors
// SPDX-License-Identifier: Apache-2.0

#include "speclab/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <stdexcept>
#include <thread>

#include <nlohmann/json.hpp>

namespace speclab {

namespace {

using json = nlohmann::ordered_json;

constexpr int kSourceOrder = 2;

const char* mode_tag_name(DecodeMode mode) { return decode_mode_name(mode); }

DecodeMode mode_from_name(const std::string& name) {
    if (name == "greedy") {
        return DecodeMode::greedy;
    }
    if (name == "sampling") {
        return DecodeMode::sampling;
    }
    throw std::invalid_argument("unknown decode mode: " + name);
}

const std::vector<std::string>& known_strategies() {
    static const std::vector<std::string> names = {
        "single_a", "single_b", "mixed_small", "mixed_large",
        "averaged", "routed_confidence", "routed_entropy", "merged",
    };
    return names;
}

}  // namespace

ExperimentConfig default_config() { return ExperimentConfig{}; }

void validate_config(const ExperimentConfig& config) {
    auto fail = [](const std::string& what) { throw std::invalid_argument(what); };
    if (config.vocab_size < 4) fail("vocab_size must be at least 4");
    if (config.vocab_size % 2 != 0) fail("vocab_size must be even, one half per domain");
    if (config.target_order < 1 || config.drafter_order < 1) fail("model orders must be positive");
    if (config.smoothing_alpha < 0.0) fail("smoothing_alpha must be nonnegative");
    const DomainGenParams& d = config.domains;
    const int half = config.vocab_size / 2;
    if (d.sequences_per_domain < 2) fail("sequences_per_domain must be at least 2");
    const int min_len = std::max({config.target_order, config.drafter_order, kSourceOrder}) + 1;
    if (d.sequence_length < min_len) fail("sequence_length too short for the model orders");
    if (d.favored_count_a < 1 || d.favored_count_b < 1 || d.away_count < 1) {
        fail("favored and away counts must be positive");
    }
    if (d.favored_count_a >= half || d.favored_count_b >= half || d.away_count >= half) {
        fail("favored and away counts must leave room in their half of the vocabulary");
    }
    if (!(d.sharpness_spread >= 0.0 && d.sharpness_spread < 1.0)) {
        fail("sharpness_spread must lie in [0, 1)");
    }
    if (!(d.favored_decay_a > 0.0 && d.favored_decay_a <= 1.0) ||
        !(d.favored_decay_b > 0.0 && d.favored_decay_b <= 1.0)) {
        fail("favored decays must lie in (0, 1]");
    }
    if (!(d.home_fraction > 0.0 && d.home_fraction <= 1.0)) {
        fail("home_fraction must lie in (0, 1]");
    }
    if (!(d.generic_fraction >= 0.0 && d.generic_fraction < 1.0)) {
        fail("generic_fraction must lie in [0, 1)");
    }
    if (d.shared_count < 1 || d.shared_count >= half) {
        fail("shared_count must leave room in a half of the vocabulary");
    }
    if (!(d.shared_decay > 0.0 && d.shared_decay <= 1.0)) {
        fail("shared_decay must lie in (0, 1]");
    }
    auto graded_sum = [](double mass, int count, double decay) {
        double total = 0.0;
        double rank_mass = mass;
        for (int j = 0; j < count; ++j, rank_mass *= decay) {
            total += rank_mass;
        }
        return total;
    };
    const double sharp = 1.0 + d.sharpness_spread;
    if (d.favored_mass_a <= 0.0 ||
        graded_sum(d.favored_mass_a, d.favored_count_a, d.favored_decay_a) * sharp >= 1.0 ||
        d.favored_mass_b <= 0.0 ||
        graded_sum(d.favored_mass_b, d.favored_count_b, d.favored_decay_b) * sharp >= 1.0 ||
        d.shared_mass <= 0.0 ||
        graded_sum(d.shared_mass, d.shared_count, d.shared_decay) * sharp >= 1.0 ||
        d.away_mass <= 0.0 || d.away_mass * d.away_count >= 1.0) {
        fail("favored and away masses must leave positive residual mass");
    }
    if (d.prompt_length < std::max({config.target_order, config.drafter_order, kSourceOrder})) {
        fail("prompt_length too short for the model orders");
    }
    if (config.tree.total_nodes < 1 || config.tree.max_depth < 1 || config.tree.branch_k < 1) {
        fail("tree parameters must be positive");
    }
    if (config.strategies.empty()) fail("no strategies configured");
    for (const std::string& s : config.strategies) {
        const auto& known = known_strategies();
        if (std::find(known.begin(), known.end(), s) == known.end()) {
            fail("unknown strategy: " + s);
        }
    }
    if (config.modes.empty()) fail("no decode modes configured");
    for (double l : config.lambda_grid) {
        if (!(l >= 0.0 && l <= 1.0)) fail("lambda grid entries must lie in [0, 1]");
    }
    if (config.eval_prompts_per_domain < 1) fail("eval_prompts_per_domain must be positive");
    if (config.eval_new_tokens < 1) fail("eval_new_tokens must be positive");
    if (config.seeds.empty()) fail("no seeds configured");
}

std::string config_to_json(const ExperimentConfig& config) {
    json j;
    j["vocab_size"] = config.vocab_size;
    j["target_order"] = config.target_order;
    j["drafter_order"] = config.drafter_order;
    j["smoothing_alpha"] = config.smoothing_alpha;
    j["domains"] = {
        {"sequences_per_domain", config.domains.sequences_per_domain},
        {"sequence_length", config.domains.sequence_length},
        {"favored_mass_a", config.domains.favored_mass_a},
        {"favored_count_a", config.domains.favored_count_a},
        {"favored_mass_b", config.domains.favored_mass_b},
        {"favored_count_b", config.domains.favored_count_b},
        {"away_mass", config.domains.away_mass},
        {"away_count", config.domains.away_count},
        {"favored_decay_a", config.domains.favored_decay_a},
        {"favored_decay_b", config.domains.favored_decay_b},
        {"sharpness_spread", config.domains.sharpness_spread},
        {"home_fraction", config.domains.home_fraction},
        {"generic_fraction", config.domains.generic_fraction},
        {"shared_mass", config.domains.shared_mass},
        {"shared_count", config.domains.shared_count},
        {"shared_decay", config.domains.shared_decay},
        {"prompt_length", config.domains.prompt_length},
    };
    j["tree"] = {
        {"total_nodes", config.tree.total_nodes},
        {"max_depth", config.tree.max_depth},
        {"branch_k", config.tree.branch_k},
    };
    j["strategies"] = config.strategies;
    std::vector<std::string> mode_names;
    for (DecodeMode m : config.modes) {
        mode_names.emplace_back(mode_tag_name(m));
    }
    j["modes"] = mode_names;
    j["lambda_grid"] = config.lambda_grid;
    j["eval_prompts_per_domain"] = config.eval_prompts_per_domain;
    j["eval_new_tokens"] = config.eval_new_tokens;
    j["seeds"] = config.seeds;
    j["output_dir"] = config.output_dir;
    return j.dump(2) + "\n";
}

ExperimentConfig config_from_json(const std::string& text) {
    json j = json::parse(text, nullptr, false);
    if (j.is_discarded()) {
        throw std::invalid_argument("config is not valid JSON");
    }
    if (!j.is_object()) {
        throw std::invalid_argument("config must be a JSON object");
    }
    static const std::vector<std::string> known = {
        "vocab_size", "target_order", "drafter_order", "smoothing_alpha", "domains",
        "tree", "strategies", "modes", "lambda_grid", "eval_prompts_per_domain",
        "eval_new_tokens", "seeds", "output_dir",
    };
    for (const auto& item : j.items()) {
        if (std::find(known.begin(), known.end(), item.key()) == known.end()) {
            throw std::invalid_argument("unknown config field: " + item.key());
        }
    }
    ExperimentConfig c;
    c.vocab_size = j.value("vocab_size", c.vocab_size);
    c.target_order = j.value("target_order", c.target_order);
    c.drafter_order = j.value("drafter_order", c.drafter_order);
    c.smoothing_alpha = j.value("smoothing_alpha", c.smoothing_alpha);
    if (j.contains("domains")) {
        const json& d = j.at("domains");
        c.domains.sequences_per_domain =
            d.value("sequences_per_domain", c.domains.sequences_per_domain);
        c.domains.sequence_length = d.value("sequence_length", c.domains.sequence_length);
        c.domains.favored_mass_a = d.value("favored_mass_a", c.domains.favored_mass_a);
        c.domains.favored_count_a = d.value("favored_count_a", c.domains.favored_count_a);
        c.domains.favored_mass_b = d.value("favored_mass_b", c.domains.favored_mass_b);
        c.domains.favored_count_b = d.value("favored_count_b", c.domains.favored_count_b);
        c.domains.away_mass = d.value("away_mass", c.domains.away_mass);
        c.domains.away_count = d.value("away_count", c.domains.away_count);
        c.domains.favored_decay_a = d.value("favored_decay_a", c.domains.favored_decay_a);
        c.domains.favored_decay_b = d.value("favored_decay_b", c.domains.favored_decay_b);
        c.domains.sharpness_spread = d.value("sharpness_spread", c.domains.sharpness_spread);
        c.domains.home_fraction = d.value("home_fraction", c.domains.home_fraction);
        c.domains.generic_fraction = d.value("generic_fraction", c.domains.generic_fraction);
        c.domains.shared_mass = d.value("shared_mass", c.domains.shared_mass);
        c.domains.shared_count = d.value("shared_count", c.domains.shared_count);
        c.domains.shared_decay = d.value("shared_decay", c.domains.shared_decay);
        c.domains.prompt_length = d.value("prompt_length", c.domains.prompt_length);
    }
    if (j.contains("tree")) {
        const json& t = j.at("tree");
        c.tree.total_nodes = t.value("total_nodes", c.tree.total_nodes);
        c.tree.max_depth = t.value("max_depth", c.tree.max_depth);
        c.tree.branch_k = t.value("branch_k", c.tree.branch_k);
    }
    if (j.contains("strategies")) {
        c.strategies = j.at("strategies").get<std::vector<std::string>>();
    }
    if (j.contains("modes")) {
        c.modes.clear();
        for (const auto& name : j.at("modes")) {
            c.modes.push_back(mode_from_name(name.get<std::string>()));
        }
    }
    if (j.contains("lambda_grid")) {
        c.lambda_grid = j.at("lambda_grid").get<std::vector<double>>();
    }
    c.eval_prompts_per_domain = j.value("eval_prompts_per_domain", c.eval_prompts_per_domain);
    c.eval_new_tokens = j.value("eval_new_tokens", c.eval_new_tokens);
    if (j.contains("seeds")) {
        c.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
    }
    c.output_dir = j.value("output_dir", c.output_dir);
    validate_config(c);
    return c;
}

namespace {

// Ground-truth sources over a split vocabulary. A context belongs to the
// half its last token falls in, and both sources keep all transition mass
// inside that half, so a sequence never changes halves after its first
// step. A generic_fraction of contexts get one shared block both sources
// emit verbatim, the common structure any drafter handles. At the rest, the
// source whose home half matches the context concentrates mass on a few
// favored tokens there (sharp or soft per context); the other source
// spreads a lower mass over `away_count` tokens of the same half. The home
// structure is what a domain's text looks like, the away structure is how
// the other domain's model behaves on it: plausible tokens, less conviction.
void fill_source_tables(NGramModel& a, NGramModel& b, const DomainGenParams& d,
                        int vocab_size, Rng& rng) {
    const int half = vocab_size / 2;
    std::uint64_t contexts = 1;
    for (int i = 0; i < kSourceOrder; ++i) {
        contexts *= static_cast<std::uint64_t>(vocab_size);
    }
    std::vector<TokenId> ctx(kSourceOrder, 0);
    std::vector<TokenId> pool(static_cast<size_t>(half));
    // Picks `count` tokens from [base, base + half); rank j of the picks
    // gets mass * decay^j, so the block has one clear top continuation. The
    // rest of that half shares the remainder and the other half gets
    // nothing, which set_logits stores as -inf.
    auto build = [&](int base, int count, double mass, double decay) {
        for (int t = 0; t < half; ++t) {
            pool[static_cast<size_t>(t)] = static_cast<TokenId>(base + t);
        }
        for (int i = 0; i < count; ++i) {
            const auto j =
                i + static_cast<int>(rng.next_below(static_cast<std::uint64_t>(half - i)));
            std::swap(pool[static_cast<size_t>(i)], pool[static_cast<size_t>(j)]);
        }
        Distribution dist(static_cast<size_t>(vocab_size), 0.0);
        double picked = 0.0;
        double rank_mass = mass;
        for (int i = 0; i < count; ++i, rank_mass *= decay) {
            dist[static_cast<size_t>(pool[static_cast<size_t>(i)])] = rank_mass;
            picked += rank_mass;
        }
        const double residual = (1.0 - picked) / (half - count);
        for (int t = 0; t < half; ++t) {
            double& p = dist[static_cast<size_t>(base + t)];
            if (p == 0.0) {
                p = residual;
            }
        }
        std::vector<double> logits(dist.size());
        for (std::size_t t = 0; t < dist.size(); ++t) {
            logits[t] = dist[t] > 0.0 ? std::log(dist[t])
                                      : -std::numeric_limits<double>::infinity();
        }
        return logits;
    };
    for (std::uint64_t key = 0; key < contexts; ++key) {
        const bool ends_low = ctx.back() < half;
        const int base = ends_low ? 0 : half;
        const bool generic = rng.uniform() < d.generic_fraction;
        // Sharp or soft favored mass, one draw per context. Without this
        // within-domain texture every home context would be equally easy,
        // and rejected and accepted drafts would carry the same entropy.
        const double tilt = rng.next_below(2) == 0 ? 1.0 + d.sharpness_spread
                                                   : 1.0 - d.sharpness_spread;
        if (generic) {
            auto shared = build(base, d.shared_count, d.shared_mass * tilt, d.shared_decay);
            a.set_logits(ctx, shared);
            b.set_logits(ctx, shared);
        } else {
            const int home_count = ends_low ? d.favored_count_a : d.favored_count_b;
            const double home_mass = (ends_low ? d.favored_mass_a : d.favored_mass_b) * tilt;
            const double home_decay = ends_low ? d.favored_decay_a : d.favored_decay_b;
            auto home = build(base, home_count, home_mass, home_decay);
            auto away = build(base, d.away_count, d.away_mass, 1.0);
            a.set_logits(ctx, ends_low ? home : away);
            b.set_logits(ctx, ends_low ? away : home);
        }
        for (int i = kSourceOrder - 1; i >= 0; --i) {
            if (++ctx[static_cast<size_t>(i)] < vocab_size) {
                break;
            }
            ctx[static_cast<size_t>(i)] = 0;
        }
    }
}

// Warmup tokens come from [init_base, init_base + init_span); since the
// sources never move mass across the half boundary, that range decides the
// region the whole sequence lives in.
std::vector<TokenId> sample_sequence(const NGramModel& source, int length,
                                     TokenId init_base, int init_span, Rng& rng) {
    std::vector<TokenId> seq;
    seq.reserve(static_cast<size_t>(length));
    for (int i = 0; i < kSourceOrder && i < length; ++i) {
        seq.push_back(init_base + static_cast<TokenId>(rng.next_below(
                                      static_cast<std::uint64_t>(init_span))));
    }
    while (static_cast<int>(seq.size()) < length) {
        seq.push_back(sample_token(source.next_distribution(seq), rng));
    }
    return seq;
}

}  // namespace

DomainData generate_domains(const ExperimentConfig& config, std::uint64_t seed) {
    validate_config(config);
    DomainData data;
    auto src_a = std::make_shared<NGramModel>(kSourceOrder, config.vocab_size, 0.0);
    auto src_b = std::make_shared<NGramModel>(kSourceOrder, config.vocab_size, 0.0);
    Rng table_rng(derive_seed({seed, 1}));
    fill_source_tables(*src_a, *src_b, config.domains, config.vocab_size, table_rng);
    data.source_a = src_a;
    data.source_b = src_b;

    const int half = config.vocab_size / 2;
    // A corpus is mostly the domain's own region, with the remainder started
    // in the other half so the trained models also see away-region contexts.
    auto sample_corpus = [&](const NGramModel& source, TokenId home_base,
                             std::uint64_t tag, std::string label) {
        DomainCorpus corpus;
        corpus.domain_label = std::move(label);
        Rng rng(derive_seed({seed, tag}));
        const int total = config.domains.sequences_per_domain;
        const int at_home = static_cast<int>(
            std::lround(config.domains.home_fraction * total));
        for (int s = 0; s < total; ++s) {
            const TokenId base = s < at_home ? home_base
                                             : static_cast<TokenId>(half - home_base);
            corpus.sequences.push_back(sample_sequence(
                source, config.domains.sequence_length, base, half, rng));
        }
        return corpus;
    };
    data.corpus_a = sample_corpus(*src_a, 0, 2, "a");
    data.corpus_b = sample_corpus(*src_b, static_cast<TokenId>(half), 3, "b");

    // Eval prompts start in the domain's half, and a sequence never leaves
    // the half of its warmup tokens, so every prompt is region-pure. The
    // check guards the invariant rather than filtering.
    auto sample_prompts = [&](const NGramModel& source, TokenId home_base,
                              std::uint64_t tag) {
        std::vector<std::vector<TokenId>> prompts;
        Rng rng(derive_seed({seed, tag}));
        while (static_cast<int>(prompts.size()) < config.eval_prompts_per_domain) {
            auto seq = sample_sequence(source, config.domains.prompt_length,
                                       home_base, half, rng);
            const bool pure = std::all_of(seq.begin(), seq.end(), [&](TokenId t) {
                return t >= home_base && t < home_base + half;
            });
            if (!pure) {
                throw std::runtime_error("eval prompt escaped its vocabulary half");
            }
            prompts.push_back(std::move(seq));
        }
        return prompts;
    };
    data.prompts_a = sample_prompts(*src_a, 0, 4);
    data.prompts_b = sample_prompts(*src_b, static_cast<TokenId>(half), 5);
    return data;
}

VariantSet build_variants(const ExperimentConfig& config, const DomainData& data) {
    auto combine = [](const DomainCorpus& a, const DomainCorpus& b, std::size_t take_each) {
        DomainCorpus mixed;
        mixed.domain_label = "mixed";
        for (std::size_t i = 0; i < take_each && i < a.sequences.size(); ++i) {
            mixed.sequences.push_back(a.sequences[i]);
        }
        for (std::size_t i = 0; i < take_each && i < b.sequences.size(); ++i) {
            mixed.sequences.push_back(b.sequences[i]);
        }
        return mixed;
    };
    const std::size_t all = data.corpus_a.sequences.size();
    VariantSet v;
    v.target = std::make_shared<const NGramModel>(
        train_ngram(combine(data.corpus_a, data.corpus_b, all), config.target_order,
                    config.vocab_size, config.smoothing_alpha));
    v.specialist_a = std::make_shared<const NGramModel>(train_ngram(
        data.corpus_a, config.drafter_order, config.vocab_size, config.smoothing_alpha));
    v.specialist_b = std::make_shared<const NGramModel>(train_ngram(
        data.corpus_b, config.drafter_order, config.vocab_size, config.smoothing_alpha));
    v.mixed_small = std::make_shared<const NGramModel>(
        train_ngram(combine(data.corpus_a, data.corpus_b, all / 2), config.drafter_order,
                    config.vocab_size, config.smoothing_alpha));
    v.mixed_large = std::make_shared<const NGramModel>(
        train_ngram(combine(data.corpus_a, data.corpus_b, all), config.drafter_order,
                    config.vocab_size, config.smoothing_alpha));
    v.averaged = std::make_shared<const NGramModel>(
        average_models(*v.specialist_a, *v.specialist_b, 0.5));
    return v;
}

Strategy resolve_strategy(const std::string& name, DecodeMode mode, const VariantSet& variants,
                          const TreeParams& tree) {
    if (name == "single_a") {
        return make_single_strategy("a", variants.specialist_a, tree, mode);
    }
    if (name == "single_b") {
        return make_single_strategy("b", variants.specialist_b, tree, mode);
    }
    if (name == "mixed_small") {
        return make_single_strategy("mixed_small", variants.mixed_small, tree, mode);
    }
    if (name == "mixed_large") {
        return make_single_strategy("mixed_large", variants.mixed_large, tree, mode);
    }
    if (name == "averaged") {
        return make_single_strategy("averaged", variants.averaged, tree, mode);
    }
    if (name == "routed_confidence") {
        return make_routed_strategy("a", variants.specialist_a, "b", variants.specialist_b,
                                    RoutingSignal::confidence, tree, mode);
    }
    if (name == "routed_entropy") {
        return make_routed_strategy("a", variants.specialist_a, "b", variants.specialist_b,
                                    RoutingSignal::entropy, tree, mode);
    }
    if (name == "merged") {
        return make_merged_strategy("a", variants.specialist_a, "b", variants.specialist_b,
                                    tree, mode);
    }
    throw std::invalid_argument("unknown strategy: " + name);
}

double CellStats::mean_acceptance() const {
    return calls == 0 ? 0.0
                      : static_cast<double>(accepted_tokens) / static_cast<double>(calls);
}

namespace {

// Every decode draws its randomness from (seed, domain, prompt, mode) only.
// Strategies therefore share rng streams, which cancels sampling noise out
// of cross-strategy comparisons and makes the lambda sweep endpoints land
// exactly on the specialist cells.
std::uint64_t decode_seed(std::uint64_t seed, int domain_index, int prompt_index,
                          DecodeMode mode) {
    return derive_seed({seed, static_cast<std::uint64_t>(domain_index),
                        static_cast<std::uint64_t>(prompt_index),
                        mode == DecodeMode::greedy ? 0ull : 1ull});
}

void accumulate_outcomes(CellStats& stats, const DecodeResult& result) {
    stats.calls += result.outcomes.size();
    for (const VerificationOutcome& o : result.outcomes) {
        stats.accepted_tokens += static_cast<std::uint64_t>(o.accepted_length);
        stats.committed_tokens += static_cast<std::uint64_t>(o.accepted_length) + 1;
        for (const NodeRecord& rec : o.records) {
            DepthCell& cell = stats.depth[rec.depth];
            cell.total += 1;
            EntropyCell& e = stats.entropy;
            if (rec.accepted) {
                cell.accepted += 1;
                e.accepted += 1;
                e.accepted_draft_sum += rec.draft_entropy;
                e.accepted_verifier_sum += rec.verifier_entropy;
            } else {
                e.rejected += 1;
                e.rejected_draft_sum += rec.draft_entropy;
                e.rejected_verifier_sum += rec.verifier_entropy;
            }
        }
    }
}

struct CellJob {
    std::string strategy;
    DecodeMode mode = DecodeMode::greedy;
    int domain_index = 0;  // 0 = a, 1 = b
    bool tally_routing = false;
};

struct CellOutput {
    CellStats stats;
    RoutingTally tally;
    RoutingSignal signal = RoutingSignal::confidence;
    bool has_tally = false;
};

struct SweepJob {
    std::size_t lambda_index = 0;
    int domain_index = 0;
};

struct SweepOutput {
    std::uint64_t calls = 0;
    std::uint64_t accepted = 0;
};

void run_jobs(int jobs, std::size_t count, const std::function<void(std::size_t)>& body) {
    if (jobs <= 1 || count <= 1) {
        for (std::size_t i = 0; i < count; ++i) {
            body(i);
        }
        return;
    }
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next.fetch_add(1); i < count; i = next.fetch_add(1)) {
            body(i);
        }
    };
    std::vector<std::thread> pool;
    const std::size_t n_threads = std::min<std::size_t>(static_cast<std::size_t>(jobs), count);
    pool.reserve(n_threads);
    for (std::size_t t = 0; t < n_threads; ++t) {
        pool.emplace_back(worker);
    }
    for (std::thread& t : pool) {
        t.join();
    }
}

SeedOutcome run_one_seed(const ExperimentConfig& config, std::uint64_t seed, int jobs,
                         bool grid, bool sweep) {
    SeedOutcome outcome;
    outcome.seed = seed;
    DomainData data = generate_domains(config, seed);
    VariantSet variants = build_variants(config, data);
    const std::vector<std::vector<TokenId>>* prompts_by_domain[2] = {&data.prompts_a,
                                                                     &data.prompts_b};
    const char* domain_names[2] = {"a", "b"};

    if (grid) {
        std::vector<CellJob> cell_jobs;
        for (const std::string& strategy : config.strategies) {
            for (std::size_t m = 0; m < config.modes.size(); ++m) {
                for (int domain = 0; domain < 2; ++domain) {
                    CellJob job;
                    job.strategy = strategy;
                    job.mode = config.modes[m];
                    job.domain_index = domain;
                    // The first-call routing decision is a function of the
                    // prompt alone, so tallying one mode per routed strategy
                    // keeps prompt counts equal to the number of prompts.
                    job.tally_routing =
                        m == 0 && (strategy == "routed_confidence" || strategy == "routed_entropy");
                    cell_jobs.push_back(std::move(job));
                }
            }
        }
        std::vector<CellOutput> outputs(cell_jobs.size());
        run_jobs(jobs, cell_jobs.size(), [&](std::size_t idx) {
            const CellJob& job = cell_jobs[idx];
            CellOutput& out = outputs[idx];
            Strategy strategy = resolve_strategy(job.strategy, job.mode, variants, config.tree);
            const auto& prompts = *prompts_by_domain[job.domain_index];
            for (std::size_t p = 0; p < prompts.size(); ++p) {
                Rng rng(decode_seed(seed, job.domain_index, static_cast<int>(p), job.mode));
                DecodeResult result = speculative_decode(*variants.target, strategy, prompts[p],
                                                         config.eval_new_tokens, rng);
                accumulate_outcomes(out.stats, result);
                if (job.tally_routing && !result.routing_records.empty()) {
                    out.has_tally = true;
                    out.signal = strategy.signal;
                    RoutingTally& tally = out.tally;
                    for (RoutingRecord& rec : result.routing_records) {
                        rec.prompt_domain = domain_names[job.domain_index];
                        tally.call_picks[rec.chosen] += 1;
                        tally.calls += 1;
                    }
                    tally.prompt_picks[result.routing_records.front().chosen] += 1;
                    tally.prompts += 1;
                    tally.first_call_records.push_back(result.routing_records.front());
                }
            }
        });
        for (std::size_t idx = 0; idx < cell_jobs.size(); ++idx) {
            const CellJob& job = cell_jobs[idx];
            outcome.cells[{job.strategy, mode_tag_name(job.mode),
                           domain_names[job.domain_index]}] = outputs[idx].stats;
            if (outputs[idx].has_tally) {
                outcome.routing[{routing_signal_name(outputs[idx].signal),
                                 domain_names[job.domain_index]}] = std::move(outputs[idx].tally);
            }
        }
    }

    if (sweep && !config.lambda_grid.empty()) {
        std::vector<SweepJob> sweep_jobs;
        for (std::size_t l = 0; l < config.lambda_grid.size(); ++l) {
            for (int domain = 0; domain < 2; ++domain) {
                sweep_jobs.push_back({l, domain});
            }
        }
        std::vector<SweepOutput> outputs(sweep_jobs.size());
        run_jobs(jobs, sweep_jobs.size(), [&](std::size_t idx) {
            const SweepJob& job = sweep_jobs[idx];
            SweepOutput& out = outputs[idx];
            Strategy strategy = make_averaged_strategy(
                "a", *variants.specialist_a, "b", *variants.specialist_b,
                config.lambda_grid[job.lambda_index], config.tree, DecodeMode::greedy);
            const auto& prompts = *prompts_by_domain[job.domain_index];
            for (std::size_t p = 0; p < prompts.size(); ++p) {
                Rng rng(decode_seed(seed, job.domain_index, static_cast<int>(p),
                                    DecodeMode::greedy));
                DecodeResult result = speculative_decode(*variants.target, strategy, prompts[p],
                                                         config.eval_new_tokens, rng);
                for (const VerificationOutcome& o : result.outcomes) {
                    out.calls += 1;
                    out.accepted += static_cast<std::uint64_t>(o.accepted_length);
                }
            }
        });
        for (std::size_t l = 0; l < config.lambda_grid.size(); ++l) {
            const SweepOutput& oa = outputs[2 * l];
            const SweepOutput& ob = outputs[2 * l + 1];
            SweepPoint point;
            point.lambda = config.lambda_grid[l];
            point.calls_a = oa.calls;
            point.calls_b = ob.calls;
            point.accepted_a = oa.accepted;
            point.accepted_b = ob.accepted;
            point.mean_a = oa.calls == 0 ? 0.0
                                         : static_cast<double>(oa.accepted) /
                                               static_cast<double>(oa.calls);
            point.mean_b = ob.calls == 0 ? 0.0
                                         : static_cast<double>(ob.accepted) /
                                               static_cast<double>(ob.calls);
            const std::uint64_t calls = oa.calls + ob.calls;
            point.mean_mixed = calls == 0 ? 0.0
                                          : static_cast<double>(oa.accepted + ob.accepted) /
                                                static_cast<double>(calls);
            outcome.sweep.push_back(point);
        }
    }
    return outcome;
}

ExperimentRun run_impl(const ExperimentConfig& config, int jobs, bool grid, bool sweep) {
    validate_config(config);
    if (jobs < 1) {
        throw std::invalid_argument("jobs must be positive");
    }
    ExperimentRun run;
    run.config = config;
    for (std::uint64_t seed : config.seeds) {
        run.seeds.push_back(run_one_seed(config, seed, jobs, grid, sweep));
    }
    return run;
}

}  // namespace

ExperimentRun run_experiments(const ExperimentConfig& config, int jobs) {
    return run_impl(config, jobs, true, true);
}

ExperimentRun run_sweep(const ExperimentConfig& config, int jobs) {
    return run_impl(config, jobs, false, true);
}

}  // namespace speclab
