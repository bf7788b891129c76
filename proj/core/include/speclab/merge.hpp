// Copyright 2026 The speclab Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "speclab/tree.hpp"

namespace speclab {

// Packs two draft trees that share a root token into one verifier call.
// With n1 = a.size() - 1 and n2 = b.size() - 1 the merged tree has
// N = n1 + n2 + 1 nodes: the shared root, then a's non-root nodes, then b's.
//
//   tokens     a.tokens followed by b.tokens without b's root
//   mask       block diagonal: rows 1..n1 copy a's non-root rows over
//              columns 0..n1; rows n1+1.. see the root (column 0) and copy
//              b's non-root rows over columns n1+1.. (b's root column is
//              dropped, its role taken by the shared column 0)
//   positions  concatenated depths, dropping b's root
//   retrieve   a's rows then b's rows with every strictly positive index
//              shifted by n1, all right-padded with -1 to the wider width
//
// No token in one subtree is ever visible to the other, so per-node
// conditionals are unchanged by the merge. Throws if the root tokens differ.
PackedTree merge_trees(const PackedTree& a, const PackedTree& b);

}  // namespace speclab
