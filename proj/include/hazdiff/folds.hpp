#pragma once

#include "hazdiff/common.hpp"
#include "hazdiff/error.hpp"
#include "hazdiff/rng.hpp"

#include <algorithm>
#include <cstdint>
#include <vector>

namespace hazdiff {

/// Seeded shuffle within each treatment arm, then round-robin over the
/// concatenated arms, so fold sizes differ by at most one and arms are spread evenly.
inline std::vector<int> stratified_fold_assignment(const Vector& treatments, int k, std::uint64_t seed) {
    const Index n = treatments.size();
    if (k < 2) throw Error(ErrorCode::InvalidArgument, "need at least 2 folds");
    if (k > n) throw Error(ErrorCode::FoldTooSmall, "more folds than subjects");
    IndexList treated, control;
    for (Index i = 0; i < n; ++i) (treatments(i) != 0.0 ? treated : control).push_back(i);
    Rng rng(seed);
    std::shuffle(treated.begin(), treated.end(), rng);
    std::shuffle(control.begin(), control.end(), rng);
    std::vector<int> fold(static_cast<std::size_t>(n), 0);
    std::size_t pos = 0;
    for (const IndexList* arm : {&treated, &control}) {
        for (Index i : *arm) fold[static_cast<std::size_t>(i)] = static_cast<int>(pos++ % static_cast<std::size_t>(k));
    }
    return fold;
}

/// Members of each fold, folds ordered by their smallest member so that any
/// relabelling of the same partition yields the same sequence.
inline std::vector<IndexList> fold_members(const std::vector<int>& assignment) {
    int k = 0;
    for (int f : assignment) k = std::max(k, f + 1);
    std::vector<IndexList> members(static_cast<std::size_t>(k));
    for (std::size_t i = 0; i < assignment.size(); ++i) {
        members[static_cast<std::size_t>(assignment[i])].push_back(static_cast<Index>(i));
    }
    std::erase_if(members, [](const IndexList& m) { return m.empty(); });
    std::sort(members.begin(), members.end(), [](const IndexList& a, const IndexList& b) { return a.front() < b.front(); });
    return members;
}

inline IndexList complement(const IndexList& members, Index n) {
    std::vector<char> in(static_cast<std::size_t>(n), 0);
    for (Index i : members) in[static_cast<std::size_t>(i)] = 1;
    IndexList out;
    out.reserve(static_cast<std::size_t>(n) - members.size());
    for (Index i = 0; i < n; ++i) {
        if (!in[static_cast<std::size_t>(i)]) out.push_back(i);
    }
    return out;
}

}  // namespace hazdiff
