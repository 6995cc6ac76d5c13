#include "pct/crypto.hpp"

#include <sodium.h>

#include <boost/multiprecision/cpp_int.hpp>
#include <cstring>

namespace pct {

namespace {

void ensure_sodium() {
    static const bool ok = [] { return sodium_init() >= 0; }();
    if (!ok) throw std::runtime_error("libsodium initialisation failed");
}

using u128 = unsigned __int128;

std::uint64_t mulmod(std::uint64_t a, std::uint64_t b, std::uint64_t m) {
    return static_cast<std::uint64_t>((static_cast<u128>(a) * b) % m);
}

std::uint64_t powmod(std::uint64_t b, std::uint64_t e, std::uint64_t m) {
    std::uint64_t r = 1 % m;
    b %= m;
    while (e) {
        if (e & 1) r = mulmod(r, b, m);
        b = mulmod(b, b, m);
        e >>= 1;
    }
    return r;
}

// ristretto255 group order minus one, big-endian hex
const char* kStrongOrderMinusOne = "0x1000000000000000000000000000000014def9dea2f79cd65812631a5cf5d3ec";
const char* kStrongOrder = "7237005577332262213973186563042994240857116359379907606001950938285454250989";

constexpr std::uint64_t kStrongId = 1;
constexpr std::uint64_t kMediumId = 2;

}  // namespace

std::string to_hex(std::span<const std::uint8_t> data) {
    static const char* digits = "0123456789abcdef";
    std::string out;
    out.reserve(data.size() * 2);
    for (auto b : data) {
        out.push_back(digits[b >> 4]);
        out.push_back(digits[b & 15]);
    }
    return out;
}

Bytes encode_u64(std::uint64_t v) {
    Bytes out(8);
    for (int i = 7; i >= 0; --i) {
        out[i] = static_cast<std::uint8_t>(v & 0xff);
        v >>= 8;
    }
    return out;
}

Digest prf(std::span<const std::uint8_t> key, std::span<const std::uint8_t> message) {
    if (key.empty()) throw std::invalid_argument("prf: empty key");
    ensure_sodium();
    crypto_auth_hmacsha256_state st;
    crypto_auth_hmacsha256_init(&st, key.data(), key.size());
    crypto_auth_hmacsha256_update(&st, message.data(), message.size());
    Digest d;
    crypto_auth_hmacsha256_final(&st, d.bytes.data());
    return d;
}

Digest prf(const std::string& key, std::span<const std::uint8_t> message) {
    return prf(std::span<const std::uint8_t>(reinterpret_cast<const std::uint8_t*>(key.data()), key.size()),
               message);
}

const char* to_string(GroupKind k) {
    switch (k) {
        case GroupKind::Strong: return "strong";
        case GroupKind::Medium: return "medium";
        case GroupKind::Toy: return "toy";
    }
    return "?";
}

GroupKind group_kind_from_string(const std::string& s) {
    if (s == "strong") return GroupKind::Strong;
    if (s == "medium") return GroupKind::Medium;
    if (s == "toy") return GroupKind::Toy;
    throw std::invalid_argument("unknown group kind: " + s);
}

std::uint64_t Scalar::small() const {
    std::uint64_t v = 0;
    for (int i = 7; i >= 0; --i) v = (v << 8) | bytes[i];
    return v;
}

Scalar Scalar::from_small(std::uint64_t v) {
    Scalar s;
    for (int i = 0; i < 8; ++i) {
        s.bytes[i] = static_cast<std::uint8_t>(v & 0xff);
        v >>= 8;
    }
    return s;
}

std::uint64_t GroupElement::small() const {
    std::uint64_t v = 0;
    for (auto b : enc_) v = (v << 8) | b;
    return v;
}

Group Group::strong() {
    ensure_sodium();
    Group g;
    g.kind_ = GroupKind::Strong;
    g.id_ = kStrongId;
    return g;
}

Group Group::medium() {
    Group g;
    g.kind_ = GroupKind::Medium;
    g.p_ = 4611686018427377339ULL;
    g.q_ = 2305843009213688669ULL;
    g.g_ = 4;
    g.id_ = kMediumId;
    return g;
}

Group Group::toy() { return toy(2097143, 1048571, 4); }

Group Group::toy(std::uint64_t p, std::uint64_t q, std::uint64_t gen) {
    if (q >= (1ULL << 20)) throw std::invalid_argument("toy group order must be below 2^20");
    if (p != 2 * q + 1) throw std::invalid_argument("toy group needs p = 2q + 1");
    if (gen <= 1 || gen >= p || powmod(gen, q, p) != 1) throw std::invalid_argument("generator must have order q");
    Group g;
    g.kind_ = GroupKind::Toy;
    g.p_ = p;
    g.q_ = q;
    g.g_ = gen;
    g.id_ = (3ULL << 60) ^ (p << 20) ^ gen;
    return g;
}

Group Group::make(GroupKind k) {
    switch (k) {
        case GroupKind::Strong: return strong();
        case GroupKind::Medium: return medium();
        case GroupKind::Toy: return toy();
    }
    throw std::invalid_argument("bad group kind");
}

std::size_t Group::element_size() const {
    switch (kind_) {
        case GroupKind::Strong: return 32;
        case GroupKind::Medium: return 8;
        case GroupKind::Toy: return 4;
    }
    return 0;
}

std::string Group::order_decimal() const {
    if (kind_ == GroupKind::Strong) return kStrongOrder;
    return std::to_string(q_);
}

GroupElement Group::element(std::uint64_t v) const {
    if (kind_ == GroupKind::Strong) throw std::logic_error("element(): not available for the strong group");
    Bytes enc(element_size());
    for (std::size_t i = enc.size(); i-- > 0;) {
        enc[i] = static_cast<std::uint8_t>(v & 0xff);
        v >>= 8;
    }
    return GroupElement(id_, std::move(enc));
}

GroupElement Group::generator() const {
    if (kind_ == GroupKind::Strong) {
        Scalar one = Scalar::from_small(1);
        Bytes enc(32);
        crypto_scalarmult_ristretto255_base(enc.data(), one.bytes.data());
        return GroupElement(id_, std::move(enc));
    }
    return element(g_);
}

GroupElement Group::identity() const {
    if (kind_ == GroupKind::Strong) return GroupElement(id_, Bytes(32, 0));
    return element(1);
}

bool Group::is_identity(const GroupElement& e) const { return e == identity(); }

bool Group::contains(const GroupElement& e) const {
    if (e.group_id() != id_ || e.encoding().size() != element_size()) return false;
    if (kind_ == GroupKind::Strong) {
        if (is_identity(e)) return true;
        return crypto_core_ristretto255_is_valid_point(e.encoding().data()) == 1;
    }
    std::uint64_t v = e.small();
    return v >= 1 && v < p_ && powmod(v, q_, p_) == 1;
}

GroupElement Group::decode(std::span<const std::uint8_t> enc) const {
    GroupElement e(id_, Bytes(enc.begin(), enc.end()));
    if (!contains(e)) throw std::invalid_argument("malformed group element");
    return e;
}

void Group::check(const GroupElement& e) const {
    if (e.group_id() != id_) throw std::invalid_argument("group element from a different group");
}

GroupElement Group::exp(const GroupElement& base, const Scalar& e) const {
    check(base);
    if (kind_ == GroupKind::Strong) {
        if (is_identity(base)) return identity();
        Bytes out(32);
        if (crypto_scalarmult_ristretto255(out.data(), e.bytes.data(), base.encoding().data()) != 0)
            return identity();
        return GroupElement(id_, std::move(out));
    }
    return element(powmod(base.small(), e.small(), p_));
}

GroupElement Group::mul(const GroupElement& a, const GroupElement& b) const {
    check(a);
    check(b);
    if (kind_ == GroupKind::Strong) {
        if (is_identity(a)) return b;
        if (is_identity(b)) return a;
        Bytes out(32);
        crypto_core_ristretto255_add(out.data(), a.encoding().data(), b.encoding().data());
        return GroupElement(id_, std::move(out));
    }
    return element(mulmod(a.small(), b.small(), p_));
}

Scalar Group::scalar_from_digest(const Digest& d) const {
    if (kind_ == GroupKind::Strong) {
        using boost::multiprecision::cpp_int;
        cpp_int v = 0;
        for (auto b : d.bytes) v = (v << 8) | b;
        cpp_int m(kStrongOrderMinusOne);
        v = v % m + 1;
        Scalar s;
        for (int i = 0; i < 32; ++i) {
            s.bytes[i] = static_cast<std::uint8_t>(static_cast<unsigned>(v & 0xff));
            v >>= 8;
        }
        return s;
    }
    std::uint64_t m = q_ - 1;
    u128 acc = 0;
    for (auto b : d.bytes) acc = ((acc << 8) | b) % m;
    return Scalar::from_small(static_cast<std::uint64_t>(acc) + 1);
}

Scalar Group::derive_scalar(std::span<const std::uint8_t> seed, std::int64_t slot) const {
    Bytes msg = encode_u64(static_cast<std::uint64_t>(slot));
    return scalar_from_digest(prf(seed, msg));
}

Scalar Group::random_scalar(Rng& rng) const {
    if (kind_ == GroupKind::Strong) {
        for (;;) {
            std::array<std::uint8_t, 64> wide{};
            for (std::size_t i = 0; i < wide.size(); i += 8) {
                std::uint64_t r = rng();
                std::memcpy(wide.data() + i, &r, 8);
            }
            Scalar s;
            crypto_core_ristretto255_scalar_reduce(s.bytes.data(), wide.data());
            if (valid_scalar(s)) return s;
        }
    }
    std::uniform_int_distribution<std::uint64_t> dist(1, q_ - 1);
    return Scalar::from_small(dist(rng));
}

bool Group::valid_scalar(const Scalar& s) const {
    if (kind_ == GroupKind::Strong) {
        if (sodium_is_zero(s.bytes.data(), 32)) return false;
        std::array<std::uint8_t, 64> wide{};
        std::memcpy(wide.data(), s.bytes.data(), 32);
        Scalar r;
        crypto_core_ristretto255_scalar_reduce(r.bytes.data(), wide.data());
        return r == s;
    }
    for (int i = 8; i < 32; ++i)
        if (s.bytes[i]) return false;
    std::uint64_t v = s.small();
    return v >= 1 && v < q_;
}

Scalar Group::inverse(const Scalar& s) const {
    if (!valid_scalar(s)) throw std::invalid_argument("scalar not invertible");
    if (kind_ == GroupKind::Strong) {
        Scalar r;
        crypto_core_ristretto255_scalar_invert(r.bytes.data(), s.bytes.data());
        return r;
    }
    return Scalar::from_small(powmod(s.small(), q_ - 2, q_));
}

Scalar Group::scalar_mul(const Scalar& a, const Scalar& b) const {
    if (kind_ == GroupKind::Strong) {
        Scalar r;
        crypto_core_ristretto255_scalar_mul(r.bytes.data(), a.bytes.data(), b.bytes.data());
        return r;
    }
    return Scalar::from_small(mulmod(a.small(), b.small(), q_));
}

GroupElement Group::hash_to_element(const Digest& d) const {
    if (kind_ == GroupKind::Strong) {
        std::array<std::uint8_t, 64> h{};
        crypto_hash_sha512(h.data(), d.bytes.data(), d.bytes.size());
        Bytes out(32);
        crypto_core_ristretto255_from_hash(out.data(), h.data());
        return GroupElement(id_, std::move(out));
    }
    return exp_g(scalar_from_digest(d));
}

GroupElement group_exp(const Group& grp, const GroupElement& base, const Scalar& e) { return grp.exp(base, e); }

GroupElement dh_shared(const Group& grp, const Scalar& my_secret, const GroupElement& their_beacon) {
    if (!grp.contains(their_beacon)) throw std::invalid_argument("beacon not in group");
    if (grp.is_identity(their_beacon)) throw DegenerateError("identity beacon rejected");
    return grp.exp(their_beacon, my_secret);
}

Digest ordered_token_for(const GroupElement& shared, std::uint8_t indicator) {
    Bytes msg = shared.encoding();
    msg.push_back(indicator);
    return prf(std::string("pct/ordered-token"), msg);
}

Digest ordered_token(const GroupElement& shared, const GroupElement& mine, const GroupElement& theirs) {
    if (mine.encoding() == theirs.encoding()) throw DegenerateError("degenerate encounter: identical beacons");
    std::uint8_t indicator = mine.encoding() < theirs.encoding() ? 0 : 1;
    return ordered_token_for(shared, indicator);
}

std::pair<GroupElement, GroupElement> randomized_receipt(const Group& grp, const GroupElement& received,
                                                         Rng& rng) {
    Scalar y = grp.random_scalar(rng);
    return {grp.exp_g(y), grp.exp(received, y)};
}

GroupElement blind_pow(const Group& grp, const GroupElement& e, const Scalar& secret) {
    if (!grp.valid_scalar(secret)) throw std::invalid_argument("blind_pow: zero or out-of-range scalar");
    return grp.exp(e, secret);
}

GroupElement unblind_pow(const Group& grp, const GroupElement& e, const Scalar& secret) {
    return grp.exp(e, grp.inverse(secret));
}

}  // namespace pct
