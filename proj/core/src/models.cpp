// Copyright 2026 The speclab Authors
// SPDX-License-Identifier: Apache-2.0

#include "speclab/models.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <limits>
#include <numeric>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace speclab {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

void check_vocab(int vocab_size) {
    if (vocab_size < 2) {
        throw std::invalid_argument("vocabulary size must be at least 2");
    }
}

void check_order(int order, int vocab_size) {
    // Context keys are packed into 64 bits.
    double bits = order * std::log2(static_cast<double>(vocab_size));
    if (order < 1 || bits > 62.0) {
        throw std::invalid_argument("order out of range");
    }
}

void check_token_range(TokenId token, int vocab_size) {
    if (token < 0 || token >= vocab_size) {
        throw std::invalid_argument("token out of vocabulary");
    }
}

Distribution softmax(const std::vector<double>& logits) {
    double m = kNegInf;
    for (double v : logits) {
        m = std::max(m, v);
    }
    Distribution out(logits.size());
    double total = 0.0;
    for (size_t i = 0; i < logits.size(); ++i) {
        out[i] = std::exp(logits[i] - m);  // exp(-inf) is exactly 0
        total += out[i];
    }
    for (double& v : out) {
        v /= total;
    }
    return out;
}

}  // namespace

NGramModel::NGramModel(int order, int vocab_size, double smoothing_alpha)
    : order_(order), vocab_size_(vocab_size), smoothing_alpha_(smoothing_alpha) {
    check_vocab(vocab_size);
    check_order(order, vocab_size);
    if (smoothing_alpha < 0.0) {
        throw std::invalid_argument("smoothing alpha must be nonnegative");
    }
}

std::uint64_t NGramModel::encode_context(std::span<const TokenId> context) const {
    if (static_cast<int>(context.size()) != order_) {
        throw std::invalid_argument("context length must equal the model order");
    }
    std::uint64_t key = 0;
    for (TokenId t : context) {
        check_token_range(t, vocab_size_);
        key = key * static_cast<std::uint64_t>(vocab_size_) + static_cast<std::uint64_t>(t);
    }
    return key;
}

std::vector<TokenId> NGramModel::decode_context(std::uint64_t key) const {
    std::vector<TokenId> context(order_);
    for (int i = order_ - 1; i >= 0; --i) {
        context[i] = static_cast<TokenId>(key % static_cast<std::uint64_t>(vocab_size_));
        key /= static_cast<std::uint64_t>(vocab_size_);
    }
    return context;
}

void NGramModel::set_logits(std::span<const TokenId> context, std::vector<double> logits) {
    if (static_cast<int>(logits.size()) != vocab_size_) {
        throw std::invalid_argument("logit vector size must equal the vocabulary size");
    }
    bool any_finite = false;
    for (double v : logits) {
        if (std::isnan(v) || v == std::numeric_limits<double>::infinity()) {
            throw std::invalid_argument("logits must not contain NaN or +inf");
        }
        any_finite = any_finite || std::isfinite(v);
    }
    if (!any_finite) {
        throw std::invalid_argument("logit vector needs at least one finite entry");
    }
    table_[encode_context(context)] = std::move(logits);
}

Distribution NGramModel::next_distribution(std::span<const TokenId> prefix) const {
    if (static_cast<int>(prefix.size()) < order_) {
        throw std::invalid_argument("prefix too short");
    }
    if (query_counter != nullptr) {
        query_counter->fetch_add(1, std::memory_order_relaxed);
    }
    auto context = prefix.subspan(prefix.size() - static_cast<size_t>(order_));
    auto it = table_.find(encode_context(context));
    if (it == table_.end()) {
        return Distribution(static_cast<size_t>(vocab_size_), 1.0 / vocab_size_);
    }
    return softmax(it->second);
}

NGramModel train_ngram(const DomainCorpus& corpus, int order, int vocab_size,
                       double smoothing_alpha) {
    NGramModel model(order, vocab_size, smoothing_alpha);
    if (corpus.sequences.empty()) {
        throw std::invalid_argument("empty corpus");
    }

    std::map<std::uint64_t, std::vector<std::uint64_t>> counts;
    for (const auto& seq : corpus.sequences) {
        if (static_cast<int>(seq.size()) < order + 1) {
            throw std::invalid_argument("sequence shorter than order + 1");
        }
        for (TokenId t : seq) {
            check_token_range(t, vocab_size);
        }
        for (size_t pos = 0; pos + static_cast<size_t>(order) < seq.size(); ++pos) {
            std::span<const TokenId> ctx(seq.data() + pos, static_cast<size_t>(order));
            TokenId next = seq[pos + static_cast<size_t>(order)];
            auto& row = counts[model.encode_context(ctx)];
            if (row.empty()) {
                row.assign(static_cast<size_t>(vocab_size), 0);
            }
            row[static_cast<size_t>(next)] += 1;
        }
    }

    for (const auto& [key, row] : counts) {
        std::uint64_t total = std::accumulate(row.begin(), row.end(), std::uint64_t{0});
        std::vector<double> logits(row.size());
        double denom = std::log(static_cast<double>(total) + smoothing_alpha * vocab_size);
        for (size_t x = 0; x < row.size(); ++x) {
            logits[x] = std::log(static_cast<double>(row[x]) + smoothing_alpha) - denom;
        }
        model.set_logits(model.decode_context(key), std::move(logits));
    }
    return model;
}

Distribution distill_topk(const Distribution& q, int k) {
    validate_distribution(q);
    if (k < 1 || k > static_cast<int>(q.size())) {
        throw std::invalid_argument("K out of range");
    }
    std::vector<int> idx(q.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(), [&](int a, int b) {
        if (q[a] != q[b]) return q[a] > q[b];
        return a < b;
    });
    Distribution out(q.size(), 0.0);
    double mass = 0.0;
    for (int r = 0; r < k; ++r) {
        mass += q[static_cast<size_t>(idx[static_cast<size_t>(r)])];
    }
    for (int r = 0; r < k; ++r) {
        size_t i = static_cast<size_t>(idx[static_cast<size_t>(r)]);
        out[i] = q[i] / mass;
    }
    return out;
}

NGramModel average_models(const NGramModel& a, const NGramModel& b, double lambda) {
    if (a.order() != b.order() || a.vocab_size() != b.vocab_size()) {
        throw std::invalid_argument("mismatched order or vocabulary");
    }
    if (!(lambda >= 0.0 && lambda <= 1.0)) {
        throw std::invalid_argument("lambda out of range");
    }
    NGramModel out(a.order(), a.vocab_size(),
                   lambda * a.smoothing_alpha() + (1.0 - lambda) * b.smoothing_alpha());

    // Endpoints copy the surviving table verbatim, absent contexts included.
    // A plain lerp would also turn 0 * (-inf) into NaN.
    if (lambda == 1.0 || lambda == 0.0) {
        const NGramModel& keep = lambda == 1.0 ? a : b;
        for (const auto& [key, logits] : keep.logit_table()) {
            out.set_logits(out.decode_context(key), logits);
        }
        return out;
    }

    const std::vector<double> zeros(static_cast<size_t>(a.vocab_size()), 0.0);
    auto blend = [&](const std::vector<double>& la, const std::vector<double>& lb) {
        std::vector<double> merged(la.size());
        for (size_t i = 0; i < la.size(); ++i) {
            merged[i] = lambda * la[i] + (1.0 - lambda) * lb[i];
        }
        return merged;
    };

    auto ia = a.logit_table().begin();
    auto ib = b.logit_table().begin();
    while (ia != a.logit_table().end() || ib != b.logit_table().end()) {
        if (ib == b.logit_table().end() || (ia != a.logit_table().end() && ia->first < ib->first)) {
            out.set_logits(out.decode_context(ia->first), blend(ia->second, zeros));
            ++ia;
        } else if (ia == a.logit_table().end() || ib->first < ia->first) {
            out.set_logits(out.decode_context(ib->first), blend(zeros, ib->second));
            ++ib;
        } else {
            out.set_logits(out.decode_context(ia->first), blend(ia->second, ib->second));
            ++ia;
            ++ib;
        }
    }
    return out;
}

double entropy(const Distribution& dist) {
    validate_distribution(dist);
    double h = 0.0;
    for (double p : dist) {
        if (p > 0.0) {
            h -= p * std::log(p);
        }
    }
    return h;
}

TokenId sample_token(const Distribution& dist, Rng& rng) {
    validate_distribution(dist);
    double u = rng.uniform();
    double acc = 0.0;
    TokenId last_positive = -1;
    for (size_t i = 0; i < dist.size(); ++i) {
        if (dist[i] > 0.0) {
            last_positive = static_cast<TokenId>(i);
        }
        acc += dist[i];
        if (u < acc) {
            return static_cast<TokenId>(i);
        }
    }
    // Rounding left acc a hair under 1; fall back to the last supported id.
    return last_positive;
}

TokenId argmax_token(const Distribution& dist) {
    validate_distribution(dist);
    size_t best = 0;
    for (size_t i = 1; i < dist.size(); ++i) {
        if (dist[i] > dist[best]) {
            best = i;
        }
    }
    return static_cast<TokenId>(best);
}

void validate_distribution(const Distribution& dist) {
    if (dist.empty()) {
        throw std::invalid_argument("invalid distribution: empty");
    }
    double total = 0.0;
    for (double p : dist) {
        if (!(p >= 0.0) || p > 1.0 + 1e-9) {
            throw std::invalid_argument("invalid distribution: entry out of range");
        }
        total += p;
    }
    if (std::abs(total - 1.0) > 1e-9) {
        throw std::invalid_argument("invalid distribution: does not sum to 1");
    }
}

DomainCorpus read_corpus(std::istream& in, std::string domain_label) {
    DomainCorpus corpus;
    corpus.domain_label = std::move(domain_label);
    std::string line;
    while (std::getline(in, line)) {
        if (line.find_first_not_of(" \t\r") == std::string::npos) {
            continue;
        }
        std::istringstream row(line);
        std::vector<TokenId> seq;
        std::string tok;
        while (row >> tok) {
            size_t used = 0;
            long value = 0;
            try {
                value = std::stol(tok, &used);
            } catch (const std::exception&) {
                throw std::invalid_argument("invalid corpus line");
            }
            if (used != tok.size() || value < 0 ||
                value > std::numeric_limits<TokenId>::max()) {
                throw std::invalid_argument("invalid corpus line");
            }
            seq.push_back(static_cast<TokenId>(value));
        }
        corpus.sequences.push_back(std::move(seq));
    }
    return corpus;
}

void write_corpus(std::ostream& out, const DomainCorpus& corpus) {
    for (const auto& seq : corpus.sequences) {
        for (size_t i = 0; i < seq.size(); ++i) {
            if (i > 0) {
                out << ' ';
            }
            out << seq[i];
        }
        out << '\n';
    }
}

std::string model_to_json(const NGramModel& model) {
    nlohmann::json j;
    j["order"] = model.order();
    j["vocab_size"] = model.vocab_size();
    j["smoothing_alpha"] = model.smoothing_alpha();
    nlohmann::json contexts = nlohmann::json::array();
    for (const auto& [key, logits] : model.logit_table()) {
        nlohmann::json entry;
        entry["context"] = model.decode_context(key);
        nlohmann::json row = nlohmann::json::array();
        for (double v : logits) {
            if (std::isinf(v)) {
                row.push_back(nullptr);  // -inf; JSON has no infinity literal
            } else {
                row.push_back(v);
            }
        }
        entry["logits"] = std::move(row);
        contexts.push_back(std::move(entry));
    }
    j["contexts"] = std::move(contexts);
    return j.dump(2);
}

NGramModel model_from_json(const std::string& text) {
    nlohmann::json j = nlohmann::json::parse(text);
    NGramModel model(j.at("order").get<int>(), j.at("vocab_size").get<int>(),
                     j.at("smoothing_alpha").get<double>());
    for (const auto& entry : j.at("contexts")) {
        std::vector<TokenId> context = entry.at("context").get<std::vector<TokenId>>();
        std::vector<double> logits;
        logits.reserve(entry.at("logits").size());
        for (const auto& v : entry.at("logits")) {
            logits.push_back(v.is_null() ? kNegInf : v.get<double>());
        }
        model.set_logits(context, std::move(logits));
    }
    return model;
}

}  // namespace speclab
