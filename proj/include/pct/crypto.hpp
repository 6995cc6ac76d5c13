#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace pct {

using Bytes = std::vector<std::uint8_t>;
using Rng = std::mt19937_64;

struct Digest {
    std::array<std::uint8_t, 32> bytes{};
    auto operator<=>(const Digest&) const = default;
};

std::string to_hex(std::span<const std::uint8_t> data);
inline std::string to_hex(const Digest& d) { return to_hex(std::span<const std::uint8_t>(d.bytes)); }

Bytes encode_u64(std::uint64_t v);

// HMAC-SHA256. Throws std::invalid_argument on an empty key.
Digest prf(std::span<const std::uint8_t> key, std::span<const std::uint8_t> message);
Digest prf(const std::string& key, std::span<const std::uint8_t> message);

enum class GroupKind { Strong, Medium, Toy };

const char* to_string(GroupKind k);
GroupKind group_kind_from_string(const std::string& s);

class Group;

// Little-endian 32 bytes. For Toy/Medium the value fits in the low 8 bytes.
struct Scalar {
    std::array<std::uint8_t, 32> bytes{};
    bool operator==(const Scalar&) const = default;
    std::uint64_t small() const;
    static Scalar from_small(std::uint64_t v);
};

class GroupElement {
public:
    GroupElement() = default;
    GroupElement(std::uint64_t group_id, Bytes encoding) : group_id_(group_id), enc_(std::move(encoding)) {}

    const Bytes& encoding() const { return enc_; }
    std::uint64_t group_id() const { return group_id_; }
    bool empty() const { return enc_.empty(); }
    std::uint64_t small() const;

    bool operator==(const GroupElement& o) const { return group_id_ == o.group_id_ && enc_ == o.enc_; }
    bool operator<(const GroupElement& o) const { return enc_ < o.enc_; }

private:
    std::uint64_t group_id_ = 0;
    Bytes enc_;
};

class Group {
public:
    static Group strong();
    static Group medium();
    static Group toy();
    // Safe-prime subgroup p = 2q + 1, generator g of order q.
    static Group toy(std::uint64_t p, std::uint64_t q, std::uint64_t g);
    static Group make(GroupKind k);

    GroupKind kind() const { return kind_; }
    std::uint64_t id() const { return id_; }
    std::uint64_t p() const { return p_; }
    std::uint64_t q() const { return q_; }
    std::size_t element_size() const;
    std::string order_decimal() const;

    GroupElement generator() const;
    GroupElement identity() const;
    GroupElement element(std::uint64_t v) const;       // Toy/Medium only
    GroupElement decode(std::span<const std::uint8_t> enc) const;  // throws on malformed
    bool contains(const GroupElement& e) const;
    bool is_identity(const GroupElement& e) const;

    GroupElement exp(const GroupElement& base, const Scalar& e) const;
    GroupElement exp_g(const Scalar& e) const { return exp(generator(), e); }
    GroupElement mul(const GroupElement& a, const GroupElement& b) const;

    Scalar scalar_from_digest(const Digest& d) const;  // (int(d) mod (q-1)) + 1
    Scalar derive_scalar(std::span<const std::uint8_t> seed, std::int64_t slot) const;
    Scalar random_scalar(Rng& rng) const;
    Scalar inverse(const Scalar& s) const;
    Scalar scalar_mul(const Scalar& a, const Scalar& b) const;
    bool valid_scalar(const Scalar& s) const;

    GroupElement hash_to_element(const Digest& d) const;

    bool operator==(const Group& o) const { return id_ == o.id_; }

private:
    void check(const GroupElement& e) const;
    GroupKind kind_ = GroupKind::Toy;
    std::uint64_t p_ = 0, q_ = 0, g_ = 0;
    std::uint64_t id_ = 0;
};

class DegenerateError : public std::runtime_error {
    using std::runtime_error::runtime_error;
};

GroupElement group_exp(const Group& grp, const GroupElement& base, const Scalar& e);
// Rejects the identity element.
GroupElement dh_shared(const Group& grp, const Scalar& my_secret, const GroupElement& their_beacon);
Digest ordered_token(const GroupElement& shared, const GroupElement& mine, const GroupElement& theirs);
Digest ordered_token_for(const GroupElement& shared, std::uint8_t indicator);
std::pair<GroupElement, GroupElement> randomized_receipt(const Group& grp, const GroupElement& received,
                                                         Rng& rng);
GroupElement blind_pow(const Group& grp, const GroupElement& e, const Scalar& secret);
GroupElement unblind_pow(const Group& grp, const GroupElement& e, const Scalar& secret);

}  // namespace pct
