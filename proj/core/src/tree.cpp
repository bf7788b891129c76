// Copyright 2026 The speclab Authors
// SPDX-License-Identifier: Apache-2.0

#include "speclab/tree.hpp"

#include <algorithm>
#include <queue>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace speclab {

const DraftNode& DraftTree::node(int id) const {
    if (id < 1 || id > node_count()) {
        throw std::invalid_argument("invalid node id");
    }
    return nodes[static_cast<size_t>(id - 1)];
}

std::vector<TokenId> DraftTree::path_tokens(int id) const {
    std::vector<TokenId> reversed;
    for (int cur = id; cur != 0; cur = node(cur).parent) {
        reversed.push_back(node(cur).token);
    }
    return {reversed.rbegin(), reversed.rend()};
}

double path_value(const DraftTree& tree, int id) {
    double v = 1.0;
    for (int cur = id; cur != 0; cur = tree.node(cur).parent) {
        v *= tree.node(cur).confidence;
    }
    return v;
}

namespace {

struct Candidate {
    double value = 0.0;
    TokenId token = 0;
    int parent = 0;
    double confidence = 0.0;
    int depth = 1;
};

// Highest value first; ties by lower token id, then lower parent id.
struct CandidateOrder {
    bool operator()(const Candidate& a, const Candidate& b) const {
        if (a.value != b.value) return a.value < b.value;
        if (a.token != b.token) return a.token > b.token;
        return a.parent > b.parent;
    }
};

// The branch_k most probable continuations, ranked by probability with ties
// toward the lower token id. Zero probability tokens are never drafted.
std::vector<std::pair<TokenId, double>> top_continuations(const Distribution& dist,
                                                          int branch_k) {
    std::vector<TokenId> idx(dist.size());
    for (size_t i = 0; i < dist.size(); ++i) {
        idx[i] = static_cast<TokenId>(i);
    }
    std::sort(idx.begin(), idx.end(), [&](TokenId a, TokenId b) {
        double pa = dist[static_cast<size_t>(a)];
        double pb = dist[static_cast<size_t>(b)];
        if (pa != pb) return pa > pb;
        return a < b;
    });
    std::vector<std::pair<TokenId, double>> out;
    for (TokenId t : idx) {
        if (static_cast<int>(out.size()) == branch_k) break;
        double p = dist[static_cast<size_t>(t)];
        if (p <= 0.0) break;
        out.emplace_back(t, p);
    }
    return out;
}

}  // namespace

DraftTree build_draft_tree(const NGramModel& drafter, std::span<const TokenId> prefix,
                           const TreeParams& params) {
    if (params.total_nodes < 1 || params.max_depth < 1 || params.branch_k < 1) {
        throw std::invalid_argument("tree parameters must be positive");
    }
    if (prefix.empty()) {
        throw std::invalid_argument("prefix too short");
    }

    DraftTree tree;
    tree.root_token = prefix.back();

    std::vector<TokenId> context(prefix.begin(), prefix.end());
    std::priority_queue<Candidate, std::vector<Candidate>, CandidateOrder> frontier;

    auto offer_children = [&](int parent_id, double parent_value, int parent_depth) {
        if (parent_depth >= params.max_depth) {
            return;
        }
        Distribution dist = drafter.next_distribution(context);
        for (const auto& [token, p] : top_continuations(dist, params.branch_k)) {
            frontier.push({parent_value * p, token, parent_id, p, parent_depth + 1});
        }
    };

    offer_children(0, 1.0, 0);

    while (tree.node_count() < params.total_nodes && !frontier.empty()) {
        Candidate best = frontier.top();
        frontier.pop();
        tree.nodes.push_back({best.parent, best.token, best.confidence, best.depth});
        int id = tree.node_count();

        // Confidences never exceed 1, so children cannot outrank their
        // parent and popping in value order stays globally best-first.
        context.resize(prefix.size());
        for (TokenId t : tree.path_tokens(id)) {
            context.push_back(t);
        }
        offer_children(id, best.value, best.depth);
    }
    return tree;
}

int PackedTree::parent_of(int i) const {
    if (i <= 0 || i >= size()) {
        return -1;
    }
    for (int j = i - 1; j >= 0; --j) {
        if (mask[static_cast<size_t>(i)][static_cast<size_t>(j)] != 0) {
            return j;
        }
    }
    return -1;
}

PackedTree pack_tree(const DraftTree& tree) {
    int n = tree.node_count() + 1;
    PackedTree packed;
    packed.tokens.resize(static_cast<size_t>(n));
    packed.positions.resize(static_cast<size_t>(n));
    packed.confidences.resize(static_cast<size_t>(n));
    packed.drafter_ids.assign(static_cast<size_t>(n), 0);
    packed.mask.assign(static_cast<size_t>(n),
                       std::vector<std::uint8_t>(static_cast<size_t>(n), 0));

    packed.tokens[0] = tree.root_token;
    packed.positions[0] = 0;
    packed.confidences[0] = 1.0;
    packed.mask[0][0] = 1;

    std::vector<bool> has_child(static_cast<size_t>(n), false);
    for (int id = 1; id < n; ++id) {
        const DraftNode& node = tree.node(id);
        packed.tokens[static_cast<size_t>(id)] = node.token;
        packed.positions[static_cast<size_t>(id)] = node.depth;
        packed.confidences[static_cast<size_t>(id)] = node.confidence;
        // Visible set: the parent's visible set plus the node itself.
        packed.mask[static_cast<size_t>(id)] = packed.mask[static_cast<size_t>(node.parent)];
        packed.mask[static_cast<size_t>(id)][static_cast<size_t>(id)] = 1;
        has_child[static_cast<size_t>(node.parent)] = true;
    }

    int width = 0;
    std::vector<std::vector<int>> rows;
    for (int id = 0; id < n; ++id) {
        if (has_child[static_cast<size_t>(id)]) {
            continue;
        }
        std::vector<int> row;
        for (int j = 0; j <= id; ++j) {
            if (packed.mask[static_cast<size_t>(id)][static_cast<size_t>(j)] != 0) {
                row.push_back(j);
            }
        }
        width = std::max(width, static_cast<int>(row.size()));
        rows.push_back(std::move(row));
    }
    for (auto& row : rows) {
        row.resize(static_cast<size_t>(width), -1);
    }
    packed.retrieve_indices = std::move(rows);
    return packed;
}

std::string packed_tree_to_json(const PackedTree& packed) {
    nlohmann::json j;
    j["tokens"] = packed.tokens;
    nlohmann::json mask = nlohmann::json::array();
    for (const auto& row : packed.mask) {
        mask.push_back(std::vector<int>(row.begin(), row.end()));
    }
    j["mask"] = std::move(mask);
    j["positions"] = packed.positions;
    j["retrieve_indices"] = packed.retrieve_indices;
    return j.dump(2);
}

}  // namespace speclab
