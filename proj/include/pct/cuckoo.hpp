#pragma once

#include <cstdint>
#include <stdexcept>
#include <vector>

#include "pct/crypto.hpp"

namespace pct {

class CapacityExceeded : public std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Partial-key cuckoo hashing, 4 slots per bucket.
class CuckooFilter {
public:
    static constexpr int kSlots = 4;
    static constexpr int kMaxKicks = 500;

    CuckooFilter(std::size_t capacity, int fingerprint_bits, std::uint64_t seed = 0x5eed);

    void insert(const Digest& item);  // throws CapacityExceeded
    bool contains(const Digest& item) const;

    std::size_t size() const { return count_; }
    std::size_t capacity() const { return buckets_.size() * kSlots; }
    std::size_t num_buckets() const { return buckets_.size(); }
    int fingerprint_bits() const { return fp_bits_; }
    std::size_t serialized_bytes() const;
    Bytes serialize() const;

    static int bits_for(double fp_target);

private:
    std::uint32_t fingerprint(const Digest& d) const;
    std::size_t index1(const Digest& d) const;
    std::size_t alt_index(std::size_t i, std::uint32_t fp) const;
    bool put(std::size_t i, std::uint32_t fp);
    bool has(std::size_t i, std::uint32_t fp) const;

    std::vector<std::array<std::uint32_t, kSlots>> buckets_;
    int fp_bits_;
    std::size_t count_ = 0;
    Rng rng_;
};

// Sizes the table for <= 95% load.
CuckooFilter cuckoo_build(const std::vector<Digest>& items, double fp_target);
bool cuckoo_query(const CuckooFilter& f, const Digest& item);

}  // namespace pct
