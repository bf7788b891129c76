// Copyright 2026 The speclab Authors
// SPDX-License-Identifier: Apache-2.0

#include <atomic>
#include <cmath>
#include <limits>
#include <sstream>

#include <doctest.h>

#include "speclab/models.hpp"

using namespace speclab;

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
}

TEST_CASE("model construction validates its parameters") {
    CHECK_THROWS_AS(NGramModel(1, 1, 0.0), std::invalid_argument);
    CHECK_THROWS_AS(NGramModel(0, 4, 0.0), std::invalid_argument);
    CHECK_THROWS_AS(NGramModel(1, 4, -0.5), std::invalid_argument);
    // Context keys live in 64-bit integers: 31 tokens of a 4-token vocabulary
    // need 62 bits and still fit, 32 do not.
    CHECK_NOTHROW(NGramModel(31, 4, 0.0));
    CHECK_THROWS_AS(NGramModel(32, 4, 0.0), std::invalid_argument);
}

TEST_CASE("context codes round trip and reject bad input") {
    NGramModel m(3, 5, 0.0);
    std::vector<TokenId> ctx{4, 0, 3};
    CHECK(m.encode_context(ctx) == 103);  // (4 * 5 + 0) * 5 + 3
    CHECK(m.decode_context(103) == ctx);

    std::vector<TokenId> short_ctx{1, 2};
    CHECK_THROWS_AS(m.encode_context(short_ctx), std::invalid_argument);
    std::vector<TokenId> bad_token{1, 2, 5};
    CHECK_THROWS_AS(m.encode_context(bad_token), std::invalid_argument);
}

TEST_CASE("set_logits enforces the table invariants") {
    NGramModel m(1, 3, 0.0);
    std::vector<TokenId> ctx{0};
    CHECK_THROWS_AS(m.set_logits(ctx, {0.0, 1.0}), std::invalid_argument);
    CHECK_THROWS_AS(m.set_logits(ctx, {0.0, 1.0, std::nan("")}), std::invalid_argument);
    CHECK_THROWS_AS(m.set_logits(ctx, {0.0, 1.0, kInf}), std::invalid_argument);
    CHECK_THROWS_AS(m.set_logits(ctx, {-kInf, -kInf, -kInf}), std::invalid_argument);
    CHECK_NOTHROW(m.set_logits(ctx, {-kInf, 0.5, -kInf}));
    CHECK(m.logit_table().size() == 1);
}

TEST_CASE("next_distribution computes softmax over the stored logits") {
    NGramModel m(1, 2, 0.0);
    std::vector<TokenId> ctx{1};
    m.set_logits(ctx, {0.0, std::log(3.0)});

    std::vector<TokenId> prefix{0, 0, 1};  // only the last token matters
    Distribution d = m.next_distribution(prefix);
    CHECK(d[0] == doctest::Approx(0.25).epsilon(1e-12));
    CHECK(d[1] == doctest::Approx(0.75).epsilon(1e-12));

    SUBCASE("a -inf logit is an exact zero") {
        m.set_logits(ctx, {-kInf, 2.0});
        Distribution z = m.next_distribution(prefix);
        CHECK(z[0] == 0.0);
        CHECK(z[1] == 1.0);
    }

    SUBCASE("missing contexts fall back to uniform") {
        std::vector<TokenId> other{0};
        Distribution u = m.next_distribution(other);
        CHECK(u == Distribution{0.5, 0.5});
    }

    SUBCASE("short prefixes are rejected") {
        std::vector<TokenId> empty;
        CHECK_THROWS_AS(m.next_distribution(empty), std::invalid_argument);
    }

    SUBCASE("the query counter sees every call") {
        std::atomic<std::uint64_t> counter{0};
        m.query_counter = &counter;
        m.next_distribution(prefix);
        m.next_distribution(prefix);
        CHECK(counter.load() == 2);
    }
}

TEST_CASE("training reproduces additive-smoothed conditional frequencies") {
    DomainCorpus corpus;
    corpus.sequences = {{0, 1, 0, 1, 0}};

    SUBCASE("alpha 0 gives exact frequencies with -inf for unseen tokens") {
        NGramModel m = train_ngram(corpus, 1, 2, 0.0);
        std::vector<TokenId> c0{0};
        Distribution after0 = m.next_distribution(c0);
        CHECK(after0[0] == 0.0);
        CHECK(after0[1] == 1.0);
        const auto& logits = m.logit_table().at(m.encode_context(c0));
        CHECK(logits[0] == -kInf);
        CHECK(logits[1] == doctest::Approx(0.0));
    }

    SUBCASE("alpha 1 matches the closed form") {
        NGramModel m = train_ngram(corpus, 1, 2, 1.0);
        std::vector<TokenId> c0{0};
        Distribution after0 = m.next_distribution(c0);
        // counts: 0 -> {0: 0, 1: 2}; (0 + 1) / (2 + 2) and (2 + 1) / (2 + 2).
        CHECK(after0[0] == doctest::Approx(0.25).epsilon(1e-12));
        CHECK(after0[1] == doctest::Approx(0.75).epsilon(1e-12));
    }

    SUBCASE("bad corpora are rejected") {
        DomainCorpus empty;
        CHECK_THROWS_AS(train_ngram(empty, 1, 2, 0.0), std::invalid_argument);
        DomainCorpus too_short;
        too_short.sequences = {{0, 1}};
        CHECK_THROWS_AS(train_ngram(too_short, 2, 2, 0.0), std::invalid_argument);
        DomainCorpus bad_token;
        bad_token.sequences = {{0, 7, 0}};
        CHECK_THROWS_AS(train_ngram(bad_token, 1, 2, 0.0), std::invalid_argument);
    }
}

TEST_CASE("top-k distillation keeps the k most probable tokens renormalized") {
    Distribution q{0.1, 0.4, 0.2, 0.3};
    Distribution top2 = distill_topk(q, 2);
    CHECK(top2[0] == 0.0);
    CHECK(top2[1] == doctest::Approx(4.0 / 7.0).epsilon(1e-12));
    CHECK(top2[2] == 0.0);
    CHECK(top2[3] == doctest::Approx(3.0 / 7.0).epsilon(1e-12));

    SUBCASE("ties at the boundary keep the lower token id") {
        Distribution tied{0.25, 0.25, 0.25, 0.25};
        Distribution picked = distill_topk(tied, 2);
        CHECK(picked == Distribution{0.5, 0.5, 0.0, 0.0});
    }

    SUBCASE("k equal to the vocabulary is the identity up to renormalization") {
        Distribution full = distill_topk(q, 4);
        REQUIRE(full.size() == q.size());
        for (size_t i = 0; i < q.size(); ++i) {
            CHECK(full[i] == doctest::Approx(q[i]).epsilon(1e-14));
        }
    }

    SUBCASE("k out of range is rejected") {
        CHECK_THROWS_AS(distill_topk(q, 0), std::invalid_argument);
        CHECK_THROWS_AS(distill_topk(q, 5), std::invalid_argument);
    }
}

TEST_CASE("logit averaging interpolates over the union of contexts") {
    NGramModel a(1, 2, 0.0);
    NGramModel b(1, 2, 0.0);
    std::vector<TokenId> c0{0};
    std::vector<TokenId> c1{1};
    a.set_logits(c0, {1.0, 2.0});
    a.set_logits(c1, {0.0, -kInf});
    b.set_logits(c0, {4.0, 4.0});

    SUBCASE("the endpoints reproduce each input table verbatim") {
        CHECK(average_models(a, b, 1.0).logit_table() == a.logit_table());
        CHECK(average_models(a, b, 0.0).logit_table() == b.logit_table());
    }

    SUBCASE("interior lambdas blend, with zero vectors for missing contexts") {
        NGramModel mid = average_models(a, b, 0.5);
        const auto& shared = mid.logit_table().at(mid.encode_context(c0));
        CHECK(shared[0] == doctest::Approx(2.5).epsilon(1e-12));
        CHECK(shared[1] == doctest::Approx(3.0).epsilon(1e-12));
        // c1 exists only in a; b contributes the zero logit vector there.
        const auto& only_a = mid.logit_table().at(mid.encode_context(c1));
        CHECK(only_a[0] == 0.0);
        CHECK(only_a[1] == -kInf);
    }

    SUBCASE("shape mismatches and bad lambdas are rejected") {
        NGramModel wider(1, 3, 0.0);
        CHECK_THROWS_AS(average_models(a, wider, 0.5), std::invalid_argument);
        NGramModel deeper(2, 2, 0.0);
        CHECK_THROWS_AS(average_models(a, deeper, 0.5), std::invalid_argument);
        CHECK_THROWS_AS(average_models(a, b, 1.5), std::invalid_argument);
        CHECK_THROWS_AS(average_models(a, b, -0.1), std::invalid_argument);
    }
}

TEST_CASE("entropy, sampling and argmax behave on hand distributions") {
    CHECK(entropy({0.25, 0.25, 0.25, 0.25}) == doctest::Approx(std::log(4.0)).epsilon(1e-12));
    CHECK(entropy({0.0, 1.0}) == 0.0);
    CHECK(argmax_token({0.2, 0.5, 0.3}) == 1);
    CHECK(argmax_token({0.4, 0.4, 0.2}) == 0);  // ties keep the lowest id

    SUBCASE("sampling never emits zero-probability tokens") {
        Rng rng(11);
        Distribution d{0.0, 1.0, 0.0};
        for (int i = 0; i < 200; ++i) {
            CHECK(sample_token(d, rng) == 1);
        }
    }

    SUBCASE("sampling frequencies approach the distribution") {
        Rng rng(12);
        Distribution d{0.25, 0.25, 0.5};
        int counts[3] = {0, 0, 0};
        const int n = 40000;
        for (int i = 0; i < n; ++i) {
            counts[sample_token(d, rng)] += 1;
        }
        CHECK(std::abs(counts[0] / double(n) - 0.25) < 0.015);
        CHECK(std::abs(counts[1] / double(n) - 0.25) < 0.015);
        CHECK(std::abs(counts[2] / double(n) - 0.50) < 0.015);
    }

    SUBCASE("validate_distribution rejects malformed vectors") {
        CHECK_THROWS_AS(validate_distribution({}), std::invalid_argument);
        CHECK_THROWS_AS(validate_distribution({0.5, 0.4}), std::invalid_argument);
        CHECK_THROWS_AS(validate_distribution({-0.1, 1.1}), std::invalid_argument);
        CHECK_THROWS_AS(validate_distribution({std::nan(""), 1.0}), std::invalid_argument);
        CHECK_NOTHROW(validate_distribution({0.25, 0.75}));
    }
}

TEST_CASE("corpus files round trip") {
    DomainCorpus corpus;
    corpus.domain_label = "a";
    corpus.sequences = {{0, 1, 2}, {3}, {4, 5}};
    std::ostringstream out;
    write_corpus(out, corpus);
    CHECK(out.str() == "0 1 2\n3\n4 5\n");

    std::istringstream in("0 1 2\n\n   \n3\n4 5\n");
    DomainCorpus back = read_corpus(in, "a");
    CHECK(back.sequences == corpus.sequences);
    CHECK(back.domain_label == "a");

    SUBCASE("malformed lines are rejected") {
        std::istringstream junk("1 2 x\n");
        CHECK_THROWS_AS(read_corpus(junk, "a"), std::invalid_argument);
        std::istringstream negative("-1\n");
        CHECK_THROWS_AS(read_corpus(negative, "a"), std::invalid_argument);
        std::istringstream huge("999999999999999999999999\n");
        CHECK_THROWS_AS(read_corpus(huge, "a"), std::invalid_argument);
    }
}

TEST_CASE("model JSON round trips, storing -inf as null") {
    NGramModel m(2, 3, 0.25);
    std::vector<TokenId> ctx{2, 1};
    m.set_logits(ctx, {-kInf, 0.5, 1.5});
    std::string text = model_to_json(m);
    CHECK(text.find("null") != std::string::npos);

    NGramModel back = model_from_json(text);
    CHECK(back.order() == 2);
    CHECK(back.vocab_size() == 3);
    CHECK(back.smoothing_alpha() == 0.25);
    CHECK(back.logit_table() == m.logit_table());
}
