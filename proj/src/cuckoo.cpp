#include "pct/cuckoo.hpp"

#include <cmath>
#include <cstring>

namespace pct {

namespace {

std::uint64_t splitmix(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

std::uint64_t load64(const std::uint8_t* p) {
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v = (v << 8) | p[i];
    return v;
}

}  // namespace

int CuckooFilter::bits_for(double fp_target) {
    if (!(fp_target > 0.0 && fp_target < 1.0)) throw std::invalid_argument("fp_target must be in (0,1)");
    int bits = static_cast<int>(std::ceil(std::log2(2.0 * kSlots / fp_target)));
    if (bits < 8) bits = 8;
    if (bits > 32) bits = 32;
    return bits;
}

CuckooFilter::CuckooFilter(std::size_t capacity, int fingerprint_bits, std::uint64_t seed)
    : fp_bits_(fingerprint_bits), rng_(seed) {
    if (fingerprint_bits < 4 || fingerprint_bits > 32) throw std::invalid_argument("fingerprint bits out of range");
    std::size_t nb = 1;
    while (nb * kSlots < capacity) nb <<= 1;
    buckets_.assign(nb, {0, 0, 0, 0});
}

std::uint32_t CuckooFilter::fingerprint(const Digest& d) const {
    std::uint64_t h = load64(d.bytes.data() + 8);
    std::uint64_t mask = fp_bits_ == 32 ? 0xffffffffULL : ((1ULL << fp_bits_) - 1);
    auto fp = static_cast<std::uint32_t>(h & mask);
    // 0 marks an empty slot
    return fp == 0 ? 1 : fp;
}

std::size_t CuckooFilter::index1(const Digest& d) const {
    return static_cast<std::size_t>(load64(d.bytes.data()) & (buckets_.size() - 1));
}

std::size_t CuckooFilter::alt_index(std::size_t i, std::uint32_t fp) const {
    return (i ^ static_cast<std::size_t>(splitmix(fp))) & (buckets_.size() - 1);
}

bool CuckooFilter::put(std::size_t i, std::uint32_t fp) {
    for (auto& s : buckets_[i]) {
        if (s == 0) {
            s = fp;
            return true;
        }
    }
    return false;
}

bool CuckooFilter::has(std::size_t i, std::uint32_t fp) const {
    for (auto s : buckets_[i])
        if (s == fp) return true;
    return false;
}

void CuckooFilter::insert(const Digest& item) {
    std::uint32_t fp = fingerprint(item);
    std::size_t i1 = index1(item);
    std::size_t i2 = alt_index(i1, fp);
    if (put(i1, fp) || put(i2, fp)) {
        ++count_;
        return;
    }
    auto saved = buckets_;
    std::size_t i = (rng_() & 1) ? i1 : i2;
    for (int k = 0; k < kMaxKicks; ++k) {
        auto slot = static_cast<std::size_t>(rng_() % kSlots);
        std::swap(fp, buckets_[i][slot]);
        i = alt_index(i, fp);
        if (put(i, fp)) {
            ++count_;
            return;
        }
    }
    buckets_ = std::move(saved);
    throw CapacityExceeded("cuckoo filter: insertion failed after bounded evictions");
}

bool CuckooFilter::contains(const Digest& item) const {
    if (count_ == 0) return false;
    std::uint32_t fp = fingerprint(item);
    std::size_t i1 = index1(item);
    return has(i1, fp) || has(alt_index(i1, fp), fp);
}

std::size_t CuckooFilter::serialized_bytes() const {
    return 8 + (buckets_.size() * kSlots * static_cast<std::size_t>(fp_bits_) + 7) / 8;
}

Bytes CuckooFilter::serialize() const {
    Bytes out;
    out.reserve(serialized_bytes());
    auto n = static_cast<std::uint32_t>(buckets_.size());
    for (int i = 3; i >= 0; --i) out.push_back(static_cast<std::uint8_t>(n >> (8 * i)));
    for (int i = 3; i >= 0; --i) out.push_back(static_cast<std::uint8_t>(fp_bits_ >> (8 * i)));
    std::uint64_t acc = 0;
    int nbits = 0;
    for (const auto& b : buckets_) {
        for (auto s : b) {
            acc = (acc << fp_bits_) | s;
            nbits += fp_bits_;
            while (nbits >= 8) {
                out.push_back(static_cast<std::uint8_t>(acc >> (nbits - 8)));
                nbits -= 8;
            }
        }
    }
    if (nbits > 0) out.push_back(static_cast<std::uint8_t>(acc << (8 - nbits)));
    return out;
}

CuckooFilter cuckoo_build(const std::vector<Digest>& items, double fp_target) {
    int bits = CuckooFilter::bits_for(fp_target);
    auto cap = static_cast<std::size_t>(std::ceil(static_cast<double>(items.size()) / 0.95));
    CuckooFilter f(cap == 0 ? 1 : cap, bits);
    for (const auto& it : items) f.insert(it);
    return f;
}

bool cuckoo_query(const CuckooFilter& f, const Digest& item) { return f.contains(item); }

}  // namespace pct
