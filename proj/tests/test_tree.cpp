// Copyright 2026 The speclab Authors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>

#include <doctest.h>
#include <nlohmann/json.hpp>

#include "speclab/tree.hpp"

using namespace speclab;

namespace {

// Order-1 model over 3 tokens with hand-set conditionals:
//   after 0: (0.6, 0.3, 0.1)   after 1: (0.2, 0.5, 0.3)   after 2: uniform
NGramModel make_hand_model() {
    NGramModel m(1, 3, 0.0);
    m.set_logits(std::vector<TokenId>{0},
                 {std::log(0.6), std::log(0.3), std::log(0.1)});
    m.set_logits(std::vector<TokenId>{1},
                 {std::log(0.2), std::log(0.5), std::log(0.3)});
    return m;
}

}  // namespace

TEST_CASE("best-first construction materializes candidates in path-value order") {
    NGramModel m = make_hand_model();
    TreeParams params{5, 3, 2};
    std::vector<TokenId> prefix{0};
    DraftTree tree = build_draft_tree(m, prefix, params);

    // Pops by value: 0.6 (t0), 0.36 (t0 t0), 0.3 (t1), 0.216 (t0 t0 t0),
    // 0.18 (t0 t1). The 0.216 node sits at max depth and offers nothing.
    REQUIRE(tree.node_count() == 5);
    CHECK(tree.root_token == 0);

    CHECK(tree.node(1).parent == 0);
    CHECK(tree.node(1).token == 0);
    CHECK(tree.node(1).depth == 1);
    CHECK(tree.node(1).confidence == doctest::Approx(0.6).epsilon(1e-12));

    CHECK(tree.node(2).parent == 1);
    CHECK(tree.node(2).token == 0);
    CHECK(tree.node(2).depth == 2);

    CHECK(tree.node(3).parent == 0);
    CHECK(tree.node(3).token == 1);
    CHECK(tree.node(3).depth == 1);
    CHECK(tree.node(3).confidence == doctest::Approx(0.3).epsilon(1e-12));

    CHECK(tree.node(4).parent == 2);
    CHECK(tree.node(4).token == 0);
    CHECK(tree.node(4).depth == 3);

    CHECK(tree.node(5).parent == 1);
    CHECK(tree.node(5).token == 1);
    CHECK(tree.node(5).depth == 2);

    CHECK(path_value(tree, 4) == doctest::Approx(0.216).epsilon(1e-9));
    CHECK(tree.path_tokens(4) == std::vector<TokenId>{0, 0, 0});
    CHECK(tree.path_tokens(3) == std::vector<TokenId>{1});
    CHECK(tree.path_tokens(0).empty());
}

TEST_CASE("candidate ties break by token id, then parent id") {
    NGramModel m(1, 2, 0.0);
    m.set_logits(std::vector<TokenId>{0}, {0.0, 0.0});
    m.set_logits(std::vector<TokenId>{1}, {0.0, 0.0});
    std::vector<TokenId> prefix{0};
    DraftTree tree = build_draft_tree(m, prefix, TreeParams{6, 2, 2});

    REQUIRE(tree.node_count() == 6);
    // Depth 1: token 0 then token 1. Depth 2 at equal value 0.25: token
    // ascending first, parent ascending within a token.
    CHECK(tree.node(1).token == 0);
    CHECK(tree.node(2).token == 1);
    CHECK(tree.node(3).token == 0);
    CHECK(tree.node(3).parent == 1);
    CHECK(tree.node(4).token == 0);
    CHECK(tree.node(4).parent == 2);
    CHECK(tree.node(5).token == 1);
    CHECK(tree.node(5).parent == 1);
    CHECK(tree.node(6).token == 1);
    CHECK(tree.node(6).parent == 2);
}

TEST_CASE("zero-probability tokens are never drafted") {
    NGramModel m(1, 2, 0.0);
    constexpr double kNegInf = -std::numeric_limits<double>::infinity();
    m.set_logits(std::vector<TokenId>{0}, {0.0, kNegInf});
    std::vector<TokenId> prefix{0};
    DraftTree tree = build_draft_tree(m, prefix, TreeParams{10, 3, 4});

    // Only the deterministic chain of token 0 exists: 3 nodes, depth capped.
    REQUIRE(tree.node_count() == 3);
    for (int id = 1; id <= 3; ++id) {
        CHECK(tree.node(id).token == 0);
        CHECK(tree.node(id).depth == id);
    }
}

TEST_CASE("construction stops when the frontier runs dry") {
    NGramModel m(1, 2, 0.0);  // every context uniform
    std::vector<TokenId> prefix{1};
    DraftTree tree = build_draft_tree(m, prefix, TreeParams{100, 2, 4});
    // Two children per node, two levels: 2 + 4 nodes in total.
    CHECK(tree.node_count() == 6);
}

TEST_CASE("construction validates its inputs") {
    NGramModel m = make_hand_model();
    std::vector<TokenId> prefix{0};
    std::vector<TokenId> empty;
    CHECK_THROWS_AS(build_draft_tree(m, prefix, TreeParams{0, 3, 2}), std::invalid_argument);
    CHECK_THROWS_AS(build_draft_tree(m, prefix, TreeParams{5, 0, 2}), std::invalid_argument);
    CHECK_THROWS_AS(build_draft_tree(m, prefix, TreeParams{5, 3, 0}), std::invalid_argument);
    CHECK_THROWS_AS(build_draft_tree(m, empty, TreeParams{5, 3, 2}), std::invalid_argument);

    DraftTree tree = build_draft_tree(m, prefix, TreeParams{3, 3, 2});
    CHECK_THROWS_AS(tree.node(0), std::invalid_argument);
    CHECK_THROWS_AS(tree.node(4), std::invalid_argument);
}

TEST_CASE("packing lays out mask, positions and retrieve rows") {
    NGramModel m = make_hand_model();
    std::vector<TokenId> prefix{0};
    PackedTree packed = pack_tree(build_draft_tree(m, prefix, TreeParams{5, 3, 2}));

    REQUIRE(packed.size() == 6);
    CHECK(packed.tokens == std::vector<TokenId>{0, 0, 0, 1, 0, 1});
    CHECK(packed.positions == std::vector<int>{0, 1, 2, 1, 3, 2});

    const std::vector<std::vector<std::uint8_t>> want_mask = {
        {1, 0, 0, 0, 0, 0},
        {1, 1, 0, 0, 0, 0},
        {1, 1, 1, 0, 0, 0},
        {1, 0, 0, 1, 0, 0},
        {1, 1, 1, 0, 1, 0},
        {1, 1, 0, 0, 0, 1},
    };
    CHECK(packed.mask == want_mask);

    const std::vector<std::vector<int>> want_retrieve = {
        {0, 3, -1, -1},
        {0, 1, 2, 4},
        {0, 1, 5, -1},
    };
    CHECK(packed.retrieve_indices == want_retrieve);

    CHECK(packed.parent_of(0) == -1);
    CHECK(packed.parent_of(1) == 0);
    CHECK(packed.parent_of(2) == 1);
    CHECK(packed.parent_of(3) == 0);
    CHECK(packed.parent_of(4) == 2);
    CHECK(packed.parent_of(5) == 1);

    CHECK(packed.confidences[0] == 1.0);
    CHECK(packed.confidences[3] == doctest::Approx(0.3).epsilon(1e-12));
    CHECK(packed.drafter_ids == std::vector<int>(6, 0));
}

TEST_CASE("packing a bare root yields a single retrieve row") {
    DraftTree tree;
    tree.root_token = 5;
    PackedTree packed = pack_tree(tree);
    CHECK(packed.size() == 1);
    CHECK(packed.tokens == std::vector<TokenId>{5});
    CHECK(packed.mask == std::vector<std::vector<std::uint8_t>>{{1}});
    CHECK(packed.retrieve_indices == std::vector<std::vector<int>>{{0}});
}

TEST_CASE("packed JSON carries exactly the four canonical fields") {
    NGramModel m = make_hand_model();
    std::vector<TokenId> prefix{0};
    PackedTree packed = pack_tree(build_draft_tree(m, prefix, TreeParams{3, 2, 2}));
    nlohmann::json j = nlohmann::json::parse(packed_tree_to_json(packed));

    CHECK(j.size() == 4);
    CHECK(j.contains("tokens"));
    CHECK(j.contains("mask"));
    CHECK(j.contains("positions"));
    CHECK(j.contains("retrieve_indices"));
    CHECK(j["tokens"].get<std::vector<TokenId>>() == packed.tokens);
    CHECK(j["positions"].get<std::vector<int>>() == packed.positions);
    CHECK(j["retrieve_indices"].get<std::vector<std::vector<int>>>() == packed.retrieve_indices);
}
