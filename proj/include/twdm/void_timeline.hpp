#pragma once

#include <algorithm>
#include <bit>
#include <cstdint>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "twdm/core.hpp"

namespace twdm {

/// One void tagged with the timeline it belongs to (a receiver id, or a group id).
struct TimelineEntry {
    Void span;
    std::uint32_t owner = 0;

    friend constexpr bool operator==(const TimelineEntry&, const TimelineEntry&) = default;
};

/// Smallest k with 2^k >= n + 1, i.e. ceil(log2(n + 1)).
constexpr std::size_t insertion_comparison_bound(std::size_t n) {
    return static_cast<std::size_t>(std::bit_width(n));
}

/// Start-ordered set of voids. A receiver timeline may carry the voids of every
/// receiver at once (entries ordered by (start, owner)), which is the single
/// ordered sequence the fast scheduler walks; per-owner invariants still hold.
class VoidTimeline {
public:
    enum class Kind { Receiver, Group };

    explicit VoidTimeline(Kind kind = Kind::Receiver) : kind_(kind) {}

    Kind kind() const { return kind_; }
    std::span<const TimelineEntry> entries() const { return entries_; }
    std::size_t size() const { return entries_.size(); }
    const TimelineEntry& operator[](std::size_t i) const { return entries_[i]; }

    /// Voids of a single owner, in start order.
    std::vector<Void> view(std::uint32_t owner) const {
        std::vector<Void> out;
        for (const auto& e : entries_)
            if (e.owner == owner) out.push_back(e.span);
        return out;
    }

    void add_horizon(std::uint32_t owner, Time start) {
        insert_ordered({{start, Time::infinity()}, owner});
    }

    /// Binary-search insertion. Returns the number of key comparisons made,
    /// which never exceeds insertion_comparison_bound(size()).
    /// Throws std::logic_error if the void overlaps a void of the same owner.
    std::size_t insert_ordered(const TimelineEntry& e) {
        if (e.span.finish < e.span.start) throw std::logic_error("insert_ordered: negative-length void");
        std::size_t first = 0;
        std::size_t count = entries_.size();
        std::size_t comparisons = 0;
        while (count > 0) {
            const std::size_t step = count / 2;
            const std::size_t mid = first + step;
            ++comparisons;
            if (key_less(entries_[mid], e)) {
                first = mid + 1;
                count -= step + 1;
            } else {
                count = step;
            }
        }
        check_no_overlap(first, e);
        entries_.insert(entries_.begin() + static_cast<std::ptrdiff_t>(first), e);
        return comparisons;
    }

    /// Index of the void of `owner` starting exactly at `start`, or size() if absent.
    std::size_t find(std::uint32_t owner, Time start) const {
        const TimelineEntry probe{{start, start}, owner};
        auto it = std::lower_bound(entries_.begin(), entries_.end(), probe, key_less);
        if (it != entries_.end() && it->owner == owner && it->span.start == start)
            return static_cast<std::size_t>(it - entries_.begin());
        return entries_.size();
    }

    void erase(std::size_t index) { entries_.erase(entries_.begin() + static_cast<std::ptrdiff_t>(index)); }

    /// Drops finite voids that ended at or before `now`; they can never host a burst again.
    void prune(Time now) {
        std::erase_if(entries_, [now](const TimelineEntry& e) { return !e.span.is_horizon() && e.span.finish <= now; });
    }

    /// Checks every per-owner invariant. Returns an empty string when valid.
    std::string validate(Time t_grd) const {
        std::ostringstream err;
        for (std::size_t i = 1; i < entries_.size(); ++i) {
            if (!key_less(entries_[i - 1], entries_[i])) {
                err << "entries " << i - 1 << "," << i << " out of order";
                return err.str();
            }
        }
        std::vector<const TimelineEntry*> last;
        for (const auto& e : entries_) {
            if (e.owner >= last.size()) last.resize(e.owner + 1, nullptr);
            if (e.span.finish < e.span.start) {
                err << "owner " << e.owner << " void " << e.span << " has negative length";
                return err.str();
            }
            if (const TimelineEntry* prev = last[e.owner]) {
                if (prev->span.is_horizon()) {
                    err << "owner " << e.owner << " has a void after its horizon";
                    return err.str();
                }
                if (prev->span.finish > e.span.start) {
                    err << "owner " << e.owner << " voids " << prev->span << " and " << e.span << " overlap";
                    return err.str();
                }
            }
            if (!e.span.is_horizon() && void_length(e.span) < t_grd + t_grd) {
                err << "owner " << e.owner << " keeps fragment " << e.span << " shorter than 2*t_grd";
                return err.str();
            }
            last[e.owner] = &e;
        }
        for (std::size_t owner = 0; owner < last.size(); ++owner) {
            if (last[owner] && !last[owner]->span.is_horizon()) {
                err << "owner " << owner << " does not end with a horizon void";
                return err.str();
            }
        }
        return {};
    }

    static bool key_less(const TimelineEntry& a, const TimelineEntry& b) {
        if (a.span.start != b.span.start) return a.span.start < b.span.start;
        return a.owner < b.owner;
    }

private:
    void check_no_overlap(std::size_t pos, const TimelineEntry& e) const {
        auto overlaps = [&](const TimelineEntry& o) {
            return o.span.start < e.span.finish && e.span.start < o.span.finish;
        };
        // neighbours of other owners may interleave in a merged receiver timeline
        for (std::size_t i = pos; i-- > 0;) {
            if (entries_[i].owner != e.owner) continue;
            if (overlaps(entries_[i])) throw std::logic_error("insert_ordered: overlapping void");
            break;
        }
        for (std::size_t i = pos; i < entries_.size(); ++i) {
            if (entries_[i].owner != e.owner) continue;
            if (overlaps(entries_[i]) || entries_[i].span.start == e.span.start)
                throw std::logic_error("insert_ordered: overlapping void");
            break;
        }
    }

    Kind kind_;
    std::vector<TimelineEntry> entries_;
};

}  // namespace twdm
