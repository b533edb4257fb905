#pragma once

#include <algorithm>
#include <cstdint>
#include <span>
#include <vector>

#include "twdm/core.hpp"

namespace twdm {

enum class Architecture {
    FlexibleSecure,  // group (switch port) and receiver collision domains
    Splitter,        // receiver collision domain only
};

/// One upstream burst as seen at the OLT: [start, end) includes the guard time.
struct Transmission {
    OnuId onu = 0;
    GroupId group = 0;
    ReceiverId receiver = 0;
    Time start;
    Time end;
    Bytes bytes = 0;
};

/// True when the two intervals share at least one instant.
inline bool overlaps(const Transmission& a, const Transmission& b) {
    return std::max(a.start, b.start) < std::min(a.end, b.end);
}

struct CollisionReport {
    std::vector<bool> lost;             // per input transmission
    std::vector<bool> group_collision;  // lost because of a same-group overlap
    std::vector<bool> receiver_collision;

    std::size_t lost_count() const { return static_cast<std::size_t>(std::count(lost.begin(), lost.end(), true)); }
};

namespace detail {

// Marks every interval that overlaps another interval with the same key.
// Sorted by start, an interval overlaps an earlier one iff it starts before the
// largest end seen so far; that end's owner is marked together with it.
// Empty intervals overlap nothing and are left out.
template <class KeyFn>
void mark_overlaps(std::span<const Transmission> txs, KeyFn key, std::vector<bool>& hit) {
    std::vector<std::size_t> order;
    order.reserve(txs.size());
    for (std::size_t i = 0; i < txs.size(); ++i)
        if (txs[i].start < txs[i].end) order.push_back(i);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (key(txs[a]) != key(txs[b])) return key(txs[a]) < key(txs[b]);
        return txs[a].start < txs[b].start;
    });
    std::size_t i = 0;
    while (i < order.size()) {
        const auto k = key(txs[order[i]]);
        std::size_t holder = order[i];
        ++i;
        for (; i < order.size() && key(txs[order[i]]) == k; ++i) {
            const std::size_t cur = order[i];
            if (txs[cur].start < txs[holder].end) {
                hit[cur] = true;
                hit[holder] = true;
            }
            if (txs[cur].end > txs[holder].end) holder = cur;
        }
    }
}

}  // namespace detail

/// Any two transmissions on the same receiver whose intervals overlap are both
/// lost; under FlexibleSecure the same holds for two transmissions of one group.
inline CollisionReport detect_collisions(std::span<const Transmission> txs, Architecture arch) {
    CollisionReport r;
    r.group_collision.assign(txs.size(), false);
    r.receiver_collision.assign(txs.size(), false);
    detail::mark_overlaps(txs, [](const Transmission& t) { return t.receiver; }, r.receiver_collision);
    if (arch == Architecture::FlexibleSecure)
        detail::mark_overlaps(txs, [](const Transmission& t) { return t.group; }, r.group_collision);
    r.lost.resize(txs.size());
    for (std::size_t i = 0; i < txs.size(); ++i) r.lost[i] = r.group_collision[i] || r.receiver_collision[i];
    return r;
}

}  // namespace twdm
