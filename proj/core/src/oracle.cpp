// Copyright 2026 The speclab Authors
// SPDX-License-Identifier: Apache-2.0

#include "speclab/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "speclab/analysis.hpp"
#include "speclab/merge.hpp"

namespace speclab {

namespace {

std::string format_detail(const char* fmt, ...) {
    char buf[512];
    va_list args;
    va_start(args, fmt);
    std::vsnprintf(buf, sizeof(buf), fmt, args);
    va_end(args);
    return buf;
}

double standard_normal(Rng& rng) {
    // Box-Muller; 1 - u keeps the log argument strictly positive.
    double u1 = 1.0 - rng.uniform();
    double u2 = rng.uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * 3.14159265358979323846 * u2);
}

std::vector<TokenId> random_prompt(Rng& rng, int length, int vocab_size) {
    std::vector<TokenId> prompt(static_cast<size_t>(length));
    for (TokenId& t : prompt) {
        t = static_cast<TokenId>(rng.next_below(static_cast<std::uint64_t>(vocab_size)));
    }
    return prompt;
}

}  // namespace

NGramModel random_table_model(Rng& rng, int vocab_size, int order, double present_fraction) {
    NGramModel model(order, vocab_size, 0.0);
    std::uint64_t contexts = 1;
    for (int i = 0; i < order; ++i) {
        contexts *= static_cast<std::uint64_t>(vocab_size);
        if (contexts > 1000000) {
            throw std::invalid_argument("context space too large for a dense random table");
        }
    }
    std::vector<TokenId> ctx(static_cast<size_t>(order), 0);
    for (std::uint64_t key = 0; key < contexts; ++key) {
        if (rng.uniform() < present_fraction) {
            std::vector<double> logits(static_cast<size_t>(vocab_size));
            for (double& l : logits) {
                l = standard_normal(rng);
            }
            model.set_logits(ctx, std::move(logits));
        }
        // Odometer increment in base vocab_size, least significant last.
        for (int d = order - 1; d >= 0; --d) {
            if (++ctx[static_cast<size_t>(d)] < vocab_size) {
                break;
            }
            ctx[static_cast<size_t>(d)] = 0;
        }
    }
    return model;
}

DraftTree random_draft_tree(Rng& rng, TokenId root_token, int node_count, int vocab_size) {
    DraftTree tree;
    tree.root_token = root_token;
    for (int id = 1; id <= node_count; ++id) {
        DraftNode node;
        node.parent = static_cast<int>(rng.next_below(static_cast<std::uint64_t>(id)));
        node.depth = node.parent == 0 ? 1 : tree.node(node.parent).depth + 1;
        node.token = static_cast<TokenId>(rng.next_below(static_cast<std::uint64_t>(vocab_size)));
        node.confidence = 0.05 + 0.9 * rng.uniform();
        tree.nodes.push_back(node);
    }
    return tree;
}

namespace {

struct StrategySet {
    std::vector<std::string> names;
    std::vector<Strategy> strategies;
};

StrategySet all_strategies(std::shared_ptr<const NGramModel> a,
                           std::shared_ptr<const NGramModel> b, const TreeParams& tree,
                           DecodeMode mode) {
    StrategySet set;
    set.names = {"single_a", "single_b", "averaged", "routed_confidence", "routed_entropy",
                 "merged"};
    set.strategies.push_back(make_single_strategy("a", a, tree, mode));
    set.strategies.push_back(make_single_strategy("b", b, tree, mode));
    set.strategies.push_back(make_averaged_strategy("a", *a, "b", *b, 0.5, tree, mode));
    set.strategies.push_back(
        make_routed_strategy("a", a, "b", b, RoutingSignal::confidence, tree, mode));
    set.strategies.push_back(
        make_routed_strategy("a", a, "b", b, RoutingSignal::entropy, tree, mode));
    set.strategies.push_back(make_merged_strategy("a", a, "b", b, tree, mode));
    return set;
}

}  // namespace

CheckResult check_greedy_losslessness(int instances, int new_tokens, std::uint64_t seed) {
    CheckResult result;
    result.name = "greedy_losslessness";
    for (int inst = 0; inst < instances; ++inst) {
        Rng rng(derive_seed({seed, static_cast<std::uint64_t>(inst)}));
        const int vocab = 4 + static_cast<int>(rng.next_below(5));
        const int target_order = 1 + static_cast<int>(rng.next_below(2));
        const int drafter_order = 1 + static_cast<int>(rng.next_below(2));

        NGramModel target = random_table_model(rng, vocab, target_order);
        auto a = std::make_shared<const NGramModel>(random_table_model(rng, vocab, drafter_order));
        auto b = std::make_shared<const NGramModel>(random_table_model(rng, vocab, drafter_order));

        TreeParams tree;
        tree.total_nodes = 1 + static_cast<int>(rng.next_below(12));
        tree.max_depth = 1 + static_cast<int>(rng.next_below(4));
        tree.branch_k = 1 + static_cast<int>(rng.next_below(4));

        const int prompt_len = std::max(target_order, drafter_order) + 2;
        std::vector<TokenId> prompt = random_prompt(rng, prompt_len, vocab);

        Rng unused(0);
        std::vector<TokenId> reference =
            autoregressive_decode(target, prompt, new_tokens, DecodeMode::greedy, unused);

        StrategySet set = all_strategies(a, b, tree, DecodeMode::greedy);
        for (std::size_t s = 0; s < set.strategies.size(); ++s) {
            Rng decode_rng(derive_seed({seed, static_cast<std::uint64_t>(inst), s}));
            DecodeResult got =
                speculative_decode(target, set.strategies[s], prompt, new_tokens, decode_rng);
            if (got.output_tokens != reference) {
                result.passed = false;
                result.detail = format_detail(
                    "instance %d strategy %s diverged from the autoregressive stream", inst,
                    set.names[s].c_str());
                return result;
            }
        }
    }
    result.passed = true;
    result.detail = format_detail("%d randomized instances, all strategies token-exact", instances);
    return result;
}

std::vector<CheckResult> check_sampling_losslessness(int n_samples, std::uint64_t seed) {
    // Small fixed geometry keeps the exact law enumerable: vocab 4, order 1,
    // horizon 3 gives 64 continuations.
    const int vocab = 4;
    const int horizon = 3;
    Rng rng(derive_seed({seed, 0x5a17ull}));
    NGramModel target = random_table_model(rng, vocab, 1);
    auto a = std::make_shared<const NGramModel>(random_table_model(rng, vocab, 1));
    auto b = std::make_shared<const NGramModel>(random_table_model(rng, vocab, 1));
    std::vector<TokenId> prompt = random_prompt(rng, 2, vocab);

    std::vector<double> exact = exact_target_distribution(target, prompt, horizon);
    std::vector<double> baseline = empirical_target_distribution(
        target, prompt, horizon, n_samples, derive_seed({seed, 1}));
    const double tv_floor = tv_distance(baseline, exact);
    const double bound = 1.5 * tv_floor + 0.005;

    TreeParams tree;
    tree.total_nodes = 7;
    tree.max_depth = 3;
    tree.branch_k = 3;

    StrategySet set = all_strategies(a, b, tree, DecodeMode::sampling);
    std::vector<CheckResult> results;
    for (std::size_t s = 0; s < set.strategies.size(); ++s) {
        std::vector<double> emp = empirical_decode_distribution(
            target, set.strategies[s], prompt, horizon, n_samples,
            derive_seed({seed, 2 + static_cast<std::uint64_t>(s)}));
        const double tv = tv_distance(emp, exact);
        CheckResult r;
        r.name = "sampling_law_" + set.names[s];
        r.passed = tv <= bound;
        r.detail = format_detail("tv %.3e vs bound %.3e (resample floor %.3e, n %d)", tv, bound,
                                 tv_floor, n_samples);
        results.push_back(std::move(r));
    }
    return results;
}

namespace {

bool check_one_merge(const PackedTree& pa, const PackedTree& pb, const PackedTree& m,
                     std::string& why) {
    const int n1 = pa.size() - 1;
    const int n2 = pb.size() - 1;
    const int total = n1 + n2 + 1;
    if (m.size() != total) {
        why = format_detail("size %d, want %d", m.size(), total);
        return false;
    }
    for (int i = 0; i < total; ++i) {
        const bool from_a = i <= n1;
        const int src = from_a ? i : i - n1;
        const TokenId want_token = from_a ? pa.tokens[static_cast<size_t>(src)]
                                          : pb.tokens[static_cast<size_t>(src)];
        const int want_pos = from_a ? pa.positions[static_cast<size_t>(src)]
                                    : pb.positions[static_cast<size_t>(src)];
        const double want_conf = from_a ? pa.confidences[static_cast<size_t>(src)]
                                        : pb.confidences[static_cast<size_t>(src)];
        if (m.tokens[static_cast<size_t>(i)] != want_token ||
            m.positions[static_cast<size_t>(i)] != want_pos ||
            m.confidences[static_cast<size_t>(i)] != want_conf) {
            why = format_detail("node payload mismatch at %d", i);
            return false;
        }
        for (int j = 0; j < total; ++j) {
            std::uint8_t want;
            if (i == 0) {
                want = j == 0 ? 1 : 0;
            } else if (i <= n1) {
                want = j <= n1 ? pa.mask[static_cast<size_t>(i)][static_cast<size_t>(j)] : 0;
            } else if (j == 0) {
                want = 1;
            } else if (j <= n1) {
                want = 0;
            } else {
                want = pb.mask[static_cast<size_t>(i - n1)][static_cast<size_t>(j - n1)];
            }
            if (m.mask[static_cast<size_t>(i)][static_cast<size_t>(j)] != want) {
                why = format_detail("mask[%d][%d] = %d, want %d", i, j,
                                    int(m.mask[static_cast<size_t>(i)][static_cast<size_t>(j)]),
                                    int(want));
                return false;
            }
        }
    }

    const std::size_t rows_a = pa.retrieve_indices.size();
    const std::size_t rows_b = pb.retrieve_indices.size();
    if (m.retrieve_indices.size() != rows_a + rows_b) {
        why = "retrieve row count";
        return false;
    }
    std::size_t width = 0;
    if (rows_a > 0) {
        width = std::max(width, pa.retrieve_indices[0].size());
    }
    if (rows_b > 0) {
        width = std::max(width, pb.retrieve_indices[0].size());
    }
    for (std::size_t r = 0; r < rows_a + rows_b; ++r) {
        const std::vector<int>& row = m.retrieve_indices[r];
        if (row.size() != width) {
            why = format_detail("retrieve row %zu width", r);
            return false;
        }
        const std::vector<int>& src =
            r < rows_a ? pa.retrieve_indices[r] : pb.retrieve_indices[r - rows_a];
        for (std::size_t c = 0; c < width; ++c) {
            int want = c < src.size() ? src[c] : -1;
            if (r >= rows_a && want > 0) {
                want += n1;
            }
            if (row[c] != want) {
                why = format_detail("retrieve[%zu][%zu] = %d, want %d", r, c, row[c], want);
                return false;
            }
        }
    }

    int max_a_id = 0;
    for (int id : pa.drafter_ids) {
        max_a_id = std::max(max_a_id, id);
    }
    for (int i = 0; i < total; ++i) {
        const int want = i <= n1 ? pa.drafter_ids[static_cast<size_t>(i)]
                                 : pb.drafter_ids[static_cast<size_t>(i - n1)] + max_a_id + 1;
        if (m.drafter_ids[static_cast<size_t>(i)] != want) {
            why = format_detail("drafter id at %d", i);
            return false;
        }
    }
    return true;
}

}  // namespace

CheckResult check_merge_arithmetic(int instances, int max_nodes, std::uint64_t seed) {
    CheckResult result;
    result.name = "merge_arithmetic";
    for (int inst = 0; inst < instances; ++inst) {
        Rng rng(derive_seed({seed, 0x3e46eull, static_cast<std::uint64_t>(inst)}));
        const int vocab = 6;
        const TokenId root = static_cast<TokenId>(rng.next_below(vocab));
        const int na = 1 + static_cast<int>(rng.next_below(static_cast<std::uint64_t>(max_nodes)));
        const int nb = 1 + static_cast<int>(rng.next_below(static_cast<std::uint64_t>(max_nodes)));
        PackedTree pa = pack_tree(random_draft_tree(rng, root, na, vocab));
        PackedTree pb = pack_tree(random_draft_tree(rng, root, nb, vocab));
        PackedTree merged = merge_trees(pa, pb);
        std::string why;
        if (!check_one_merge(pa, pb, merged, why)) {
            result.passed = false;
            result.detail = format_detail("instance %d: %s", inst, why.c_str());
            return result;
        }

        // Mismatched roots must be refused, not silently merged.
        PackedTree other = pack_tree(random_draft_tree(
            rng, static_cast<TokenId>((root + 1) % vocab), na, vocab));
        bool threw = false;
        try {
            merge_trees(pa, other);
        } catch (const std::invalid_argument&) {
            threw = true;
        }
        if (!threw) {
            result.passed = false;
            result.detail = format_detail("instance %d: differing roots were merged", inst);
            return result;
        }
    }
    result.passed = true;
    result.detail = format_detail("%d random tree pairs match the reference arithmetic", instances);
    return result;
}

CheckResult check_packing_invariance(int instances, std::uint64_t seed) {
    CheckResult result;
    result.name = "packing_invariance";
    for (int inst = 0; inst < instances; ++inst) {
        Rng rng(derive_seed({seed, 0x9acc1ull, static_cast<std::uint64_t>(inst)}));
        const int vocab = 6;
        const int order = 2;
        NGramModel target = random_table_model(rng, vocab, order);
        const TokenId root = static_cast<TokenId>(rng.next_below(vocab));
        PackedTree pa = pack_tree(random_draft_tree(
            rng, root, 1 + static_cast<int>(rng.next_below(16)), vocab));
        PackedTree pb = pack_tree(random_draft_tree(
            rng, root, 1 + static_cast<int>(rng.next_below(16)), vocab));
        PackedTree merged = merge_trees(pa, pb);

        std::vector<TokenId> prefix = random_prompt(rng, order + 1, vocab);
        prefix.push_back(root);

        auto ca = node_conditionals(target, prefix, pa);
        auto cb = node_conditionals(target, prefix, pb);
        auto cm = node_conditionals(target, prefix, merged);
        const int n1 = pa.size() - 1;
        for (int i = 0; i < merged.size(); ++i) {
            const Distribution& want =
                i <= n1 ? ca[static_cast<size_t>(i)] : cb[static_cast<size_t>(i - n1)];
            if (cm[static_cast<size_t>(i)] != want) {
                result.passed = false;
                result.detail =
                    format_detail("instance %d: conditional at node %d changed under merging",
                                  inst, i);
                return result;
            }
        }

        auto la = masked_reference_logits(pa);
        auto lb = masked_reference_logits(pb);
        auto lm = masked_reference_logits(merged);
        for (int i = 0; i < merged.size(); ++i) {
            const auto& want = i <= n1 ? la[static_cast<size_t>(i)] : lb[static_cast<size_t>(i - n1)];
            if (lm[static_cast<size_t>(i)] != want) {
                result.passed = false;
                result.detail = format_detail(
                    "instance %d: reference logits at node %d changed under merging", inst, i);
                return result;
            }
        }
    }
    result.passed = true;
    result.detail =
        format_detail("%d merges leave per-node conditionals and reference logits bit-identical",
                      instances);
    return result;
}

namespace {

// Every k-subset scored by captured mass; ties resolved toward the
// lexicographically smaller index set. Independent of distill_topk's
// sort-based selection.
std::vector<int> brute_force_topk(const Distribution& q, int k) {
    const int v = static_cast<int>(q.size());
    std::vector<int> best;
    double best_mass = -1.0;
    std::vector<int> pick(static_cast<size_t>(k));
    std::iota(pick.begin(), pick.end(), 0);
    while (true) {
        double mass = 0.0;
        for (int idx : pick) {
            mass += q[static_cast<size_t>(idx)];
        }
        if (mass > best_mass + 1e-15 ||
            (std::abs(mass - best_mass) <= 1e-15 && (best.empty() || pick < best))) {
            best_mass = mass;
            best = pick;
        }
        // Advance to the next combination.
        int i = k - 1;
        while (i >= 0 && pick[static_cast<size_t>(i)] == v - k + i) {
            --i;
        }
        if (i < 0) {
            break;
        }
        ++pick[static_cast<size_t>(i)];
        for (int j = i + 1; j < k; ++j) {
            pick[static_cast<size_t>(j)] = pick[static_cast<size_t>(j - 1)] + 1;
        }
    }
    return best;
}

double topk_cross_entropy(const Distribution& q, const std::vector<int>& support,
                          const Distribution& p) {
    double ce = 0.0;
    for (int idx : support) {
        const double qi = q[static_cast<size_t>(idx)];
        if (qi <= 0.0) {
            continue;
        }
        const double pi = p[static_cast<size_t>(idx)];
        if (pi <= 0.0) {
            return std::numeric_limits<double>::infinity();
        }
        ce -= qi * std::log(pi);
    }
    return ce;
}

}  // namespace

CheckResult check_topk_distillation(int instances, std::uint64_t seed) {
    CheckResult result;
    result.name = "topk_distillation";
    for (int inst = 0; inst < instances; ++inst) {
        Rng rng(derive_seed({seed, 0x70b5ull, static_cast<std::uint64_t>(inst)}));
        const int vocab = 3 + static_cast<int>(rng.next_below(6));
        Distribution q(static_cast<size_t>(vocab));
        for (double& x : q) {
            x = std::exp(standard_normal(rng));
        }
        if (rng.uniform() < 0.4) {
            // Exact ties exercise the boundary rule.
            const auto i = rng.next_below(static_cast<std::uint64_t>(vocab));
            const auto j = rng.next_below(static_cast<std::uint64_t>(vocab));
            q[static_cast<size_t>(i)] = q[static_cast<size_t>(j)];
        }
        if (rng.uniform() < 0.4) {
            q[static_cast<size_t>(rng.next_below(static_cast<std::uint64_t>(vocab - 1)) + 1)] = 0.0;
        }
        double total = std::accumulate(q.begin(), q.end(), 0.0);
        for (double& x : q) {
            x /= total;
        }

        const int k = 1 + static_cast<int>(rng.next_below(static_cast<std::uint64_t>(vocab)));
        Distribution p = distill_topk(q, k);
        validate_distribution(p);

        std::vector<int> support = brute_force_topk(q, k);
        double mass = 0.0;
        for (int idx : support) {
            mass += q[static_cast<size_t>(idx)];
        }
        Distribution want(static_cast<size_t>(vocab), 0.0);
        for (int idx : support) {
            want[static_cast<size_t>(idx)] = q[static_cast<size_t>(idx)] / mass;
        }
        for (int t = 0; t < vocab; ++t) {
            if (std::abs(p[static_cast<size_t>(t)] - want[static_cast<size_t>(t)]) > 1e-12) {
                result.passed = false;
                result.detail = format_detail(
                    "instance %d: token %d got %.17g, brute force says %.17g", inst, t,
                    p[static_cast<size_t>(t)], want[static_cast<size_t>(t)]);
                return result;
            }
        }

        // Local optimality of the restriction: nudging mass between two
        // support tokens must not lower the top-k cross entropy.
        const double base_ce = topk_cross_entropy(q, support, p);
        for (int probe = 0; probe < 4 && support.size() >= 2; ++probe) {
            const auto from = support[static_cast<size_t>(
                rng.next_below(static_cast<std::uint64_t>(support.size())))];
            const auto to = support[static_cast<size_t>(
                rng.next_below(static_cast<std::uint64_t>(support.size())))];
            if (from == to || p[static_cast<size_t>(from)] < 1e-3) {
                continue;
            }
            Distribution nudged = p;
            nudged[static_cast<size_t>(from)] -= 1e-4;
            nudged[static_cast<size_t>(to)] += 1e-4;
            if (topk_cross_entropy(q, support, nudged) < base_ce - 1e-12) {
                result.passed = false;
                result.detail =
                    format_detail("instance %d: restriction is not a local optimum", inst);
                return result;
            }
        }
    }
    result.passed = true;
    result.detail =
        format_detail("%d instances match brute-force subset selection exactly", instances);
    return result;
}

}  // namespace speclab
