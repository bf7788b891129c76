// Copyright 2026 The speclab Authors
// SPDX-License-Identifier: Apache-2.0
//
// Table based n-gram probability models.
//
// A model of order k stores one logit vector per observed length-k context.
// Querying a context that is not in the table falls back to the uniform
// distribution, which keeps every model total: any prefix of length >= k
// yields a valid categorical distribution over the vocabulary.

#pragma once

#include <atomic>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "speclab/rng.hpp"

namespace speclab {

using TokenId = std::int32_t;

// Probability vector over the vocabulary, indexed by token id.
using Distribution = std::vector<double>;

// Training data: one token sequence per line in the on-disk format.
struct DomainCorpus {
    std::vector<std::vector<TokenId>> sequences;
    std::string domain_label;
};

class NGramModel {
public:
    // Empty table; contexts can be added with set_logits.
    NGramModel(int order, int vocab_size, double smoothing_alpha);

    int order() const { return order_; }
    int vocab_size() const { return vocab_size_; }
    double smoothing_alpha() const { return smoothing_alpha_; }

    // Conditional distribution for the last `order` tokens of `prefix`.
    // Throws if the prefix is shorter than the order or contains tokens
    // outside the vocabulary. Thread safe.
    Distribution next_distribution(std::span<const TokenId> prefix) const;

    // Stored logits keyed by encoded context, ordered by key. Entries may be
    // -inf (zero probability under alpha = 0) but never NaN or +inf, and
    // every vector has at least one finite entry.
    const std::map<std::uint64_t, std::vector<double>>& logit_table() const { return table_; }

    void set_logits(std::span<const TokenId> context, std::vector<double> logits);

    std::uint64_t encode_context(std::span<const TokenId> context) const;
    std::vector<TokenId> decode_context(std::uint64_t key) const;

    // Optional instrumentation: when set, next_distribution bumps the counter
    // on every query. Used to prove which models a code path consults.
    std::atomic<std::uint64_t>* query_counter = nullptr;

private:
    int order_;
    int vocab_size_;
    double smoothing_alpha_;
    std::map<std::uint64_t, std::vector<double>> table_;
};

// Count based training. For every context observed in the corpus the stored
// logit for token x is log(count + alpha) - log(total + alpha * vocab), i.e.
// the exact log of the additive-smoothed conditional frequency. With
// alpha = 0 unobserved continuations get -inf (exact zero probability).
NGramModel train_ngram(const DomainCorpus& corpus, int order, int vocab_size,
                       double smoothing_alpha);

// Renormalized restriction of q to its top k tokens. Ties at the k-th rank
// are broken toward the lower token id. This is the exact minimizer of the
// top-k cross entropy -sum_{x in topk(q)} q(x) log p(x) over distributions
// supported on the selected set.
Distribution distill_topk(const Distribution& q, int k);

// Elementwise logit interpolation: lambda * a + (1 - lambda) * b over the
// union of both tables. A context missing from one table contributes a zero
// logit vector (the uniform fallback that model would produce anyway), so
// lambda = 1 reproduces a's behavior exactly and lambda = 0 reproduces b's.
NGramModel average_models(const NGramModel& a, const NGramModel& b, double lambda);

// Shannon entropy in nats; 0 * log 0 is treated as 0.
double entropy(const Distribution& dist);

// Inverse-CDF sample walked in ascending token id order.
TokenId sample_token(const Distribution& dist, Rng& rng);

// Lowest token id among the maxima.
TokenId argmax_token(const Distribution& dist);

// Throws std::invalid_argument unless dist is a categorical distribution:
// nonempty, entries in [0, 1], total within 1e-9 of 1.
void validate_distribution(const Distribution& dist);

// Corpus file format: UTF-8 text, one sequence per line, whitespace
// separated decimal token ids.
DomainCorpus read_corpus(std::istream& in, std::string domain_label);
void write_corpus(std::ostream& out, const DomainCorpus& corpus);

// Model file format: JSON object with order, vocab_size, smoothing_alpha and
// a contexts array of {context, logits} entries sorted by context. Logits of
// -inf are stored as null.
std::string model_to_json(const NGramModel& model);
NGramModel model_from_json(const std::string& text);

}  // namespace speclab
