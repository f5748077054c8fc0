#pragma once

#include <vector>

#include "robotseg/errors.hpp"
#include "robotseg/imaging.hpp"
#include "robotseg/tensor.hpp"

namespace robotseg {

struct FrameFeatures {
    Tensor grid;  // [C, h, w], stride-16 patch grid
    std::size_t frame_index = 0;
};

// One temporal-guidance slot. The feature keeps whatever gradient graph it was
// produced under, so losses on later frames reach earlier ones through the bank.
struct MemoryEntry {
    Tensor feature;   // [C, h, w]
    BinaryMask mask;  // feature-resolution foreground of the source frame
    std::size_t source_frame = 0;
};

// FIFO of recent frames, oldest first. The first entry ever pushed (the
// conditioning frame) is pinned: eviction removes the second-oldest instead.
class MemoryBank {
public:
    explicit MemoryBank(std::size_t capacity) : capacity_(capacity) {
        if (capacity == 0) throw ContractError("memory bank capacity must be >= 1");
    }

    void push(MemoryEntry e) {
        if (entries_.size() == capacity_) {
            if (capacity_ == 1) return;  // the pinned entry is the whole bank
            entries_.erase(entries_.begin() + 1);
        }
        entries_.push_back(std::move(e));
    }

    // Drops the most recent entry (a frame being redone re-enters via push).
    void pop_newest() {
        if (entries_.empty()) throw ContractError("pop_newest on empty memory bank");
        entries_.pop_back();
    }

    const std::vector<MemoryEntry>& entries() const { return entries_; }
    std::size_t size() const { return entries_.size(); }
    std::size_t capacity() const { return capacity_; }
    bool empty() const { return entries_.empty(); }
    void clear() { entries_.clear(); }

private:
    std::size_t capacity_;
    std::vector<MemoryEntry> entries_;
};

}  // namespace robotseg
