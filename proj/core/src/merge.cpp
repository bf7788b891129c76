// Copyright 2026 The speclab Authors
// SPDX-License-Identifier: Apache-2.0

#include "speclab/merge.hpp"

#include <algorithm>
#include <stdexcept>

namespace speclab {

PackedTree merge_trees(const PackedTree& a, const PackedTree& b) {
    if (a.size() < 1 || b.size() < 1) {
        throw std::invalid_argument("cannot merge an empty packing");
    }
    if (a.tokens[0] != b.tokens[0]) {
        throw std::invalid_argument("roots differ");
    }

    const int n1 = a.size() - 1;
    const int n2 = b.size() - 1;
    const int n = n1 + n2 + 1;

    PackedTree merged;
    merged.tokens.reserve(static_cast<size_t>(n));
    merged.tokens = a.tokens;
    merged.tokens.insert(merged.tokens.end(), b.tokens.begin() + 1, b.tokens.end());

    merged.positions = a.positions;
    merged.positions.insert(merged.positions.end(), b.positions.begin() + 1,
                            b.positions.end());

    merged.mask.assign(static_cast<size_t>(n),
                       std::vector<std::uint8_t>(static_cast<size_t>(n), 0));
    merged.mask[0][0] = 1;
    for (int i = 1; i <= n1; ++i) {
        // a's non-root rows over columns 0..n1.
        std::copy(a.mask[static_cast<size_t>(i)].begin(), a.mask[static_cast<size_t>(i)].end(),
                  merged.mask[static_cast<size_t>(i)].begin());
    }
    for (int i = 1; i <= n2; ++i) {
        // b's non-root rows over columns n1+1.., with b's root column dropped
        // and replaced by the shared column 0.
        auto& row = merged.mask[static_cast<size_t>(n1 + i)];
        row[0] = 1;
        std::copy(b.mask[static_cast<size_t>(i)].begin() + 1, b.mask[static_cast<size_t>(i)].end(),
                  row.begin() + n1 + 1);
    }

    const size_t w1 = a.retrieve_indices.empty() ? 0 : a.retrieve_indices[0].size();
    const size_t w2 = b.retrieve_indices.empty() ? 0 : b.retrieve_indices[0].size();
    const size_t width = std::max(w1, w2);
    merged.retrieve_indices.reserve(a.retrieve_indices.size() + b.retrieve_indices.size());
    for (const auto& row : a.retrieve_indices) {
        auto padded = row;
        padded.resize(width, -1);
        merged.retrieve_indices.push_back(std::move(padded));
    }
    for (const auto& row : b.retrieve_indices) {
        std::vector<int> shifted = row;
        for (int& v : shifted) {
            if (v > 0) {
                v += n1;  // the root (0) and the -1 padding stay put
            }
        }
        shifted.resize(width, -1);
        merged.retrieve_indices.push_back(std::move(shifted));
    }

    merged.confidences = a.confidences;
    merged.confidences.insert(merged.confidences.end(), b.confidences.begin() + 1,
                              b.confidences.end());

    int offset = 0;
    for (int id : a.drafter_ids) {
        offset = std::max(offset, id + 1);
    }
    merged.drafter_ids = a.drafter_ids;
    for (size_t i = 1; i < b.drafter_ids.size(); ++i) {
        merged.drafter_ids.push_back(b.drafter_ids[i] + offset);
    }
    return merged;
}

}  // namespace speclab
