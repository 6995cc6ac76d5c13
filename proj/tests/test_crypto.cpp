#include "doctest.h"

#include <cmath>
#include <map>
#include <set>

#include "pct/crypto.hpp"
#include "pct/cuckoo.hpp"

using namespace pct;

namespace {

Group small() { return Group::toy(23, 11, 2); }

// naive oracle: repeated multiplication
std::uint64_t naive_pow(std::uint64_t b, std::uint64_t e, std::uint64_t m) {
    std::uint64_t r = 1;
    for (std::uint64_t i = 0; i < e; ++i) r = r * b % m;
    return r;
}

Bytes bytes_of(const std::string& s) { return Bytes(s.begin(), s.end()); }

}  // namespace

TEST_CASE("prf determinism and input sensitivity") {
    Bytes k = bytes_of("key"), m = bytes_of("message");
    CHECK(prf(k, m) == prf(k, m));
    Bytes m0 = m;
    m0.push_back(0);
    CHECK(prf(k, m) != prf(k, m0));
    CHECK_THROWS_AS(prf(Bytes{}, m), std::invalid_argument);
}

TEST_CASE("prf matches HMAC-SHA256 test vector") {
    // RFC 4231 case 2
    Digest d = prf(bytes_of("Jefe"), bytes_of("what do ya want for nothing?"));
    CHECK(to_hex(d) == "5bdcc146bf60754e6a042426089575c75a003f089d2739839dec58b964ec3843");
}

TEST_CASE("toy group arithmetic against hand values") {
    Group g = small();
    CHECK(group_exp(g, g.generator(), Scalar::from_small(3)).small() == 8);
    CHECK(group_exp(g, g.generator(), Scalar::from_small(5)).small() == 9);
    CHECK(dh_shared(g, Scalar::from_small(3), g.element(9)).small() == 16);
    CHECK(dh_shared(g, Scalar::from_small(5), g.element(8)).small() == 16);
    CHECK(dh_shared(g, Scalar::from_small(1), g.generator()) == g.generator());
    auto blinded = blind_pow(g, g.element(8), Scalar::from_small(5));
    CHECK(g.inverse(Scalar::from_small(5)).small() == 9);
    CHECK(unblind_pow(g, blinded, Scalar::from_small(5)).small() == 8);
}

TEST_CASE("exponent q-1 times base gives identity (Lagrange)") {
    for (Group g : {small(), Group::toy(), Group::medium(), Group::strong()}) {
        Rng rng(7);
        GroupElement x = g.exp_g(g.random_scalar(rng));
        Scalar qm1 = g.kind() == GroupKind::Strong ? g.scalar_mul(g.inverse(Scalar::from_small(1)), Scalar{})
                                                   : Scalar::from_small(g.q() - 1);
        if (g.kind() == GroupKind::Strong) {
            // q - 1 = -1 mod q
            std::array<std::uint8_t, 32> m1 = {0xec, 0xd3, 0xf5, 0x5c, 0x1a, 0x63, 0x12, 0x58, 0xd6, 0x9c, 0xf7,
                                               0xa2, 0xde, 0xf9, 0xde, 0x14, 0,    0,    0,    0,    0,    0,
                                               0,    0,    0,    0,    0,    0,    0,    0,    0,    0x10};
            qm1.bytes = m1;
        }
        CHECK(g.valid_scalar(qm1));
        CHECK(g.is_identity(g.mul(g.exp(x, qm1), x)));
    }
}

TEST_CASE("toy group: exp agrees with naive oracle on every element, dlog recoverable") {
    Group g = small();
    std::set<std::uint64_t> seen;
    for (std::uint64_t e = 1; e < g.q(); ++e) {
        GroupElement x = g.exp_g(Scalar::from_small(e));
        CHECK(x.small() == naive_pow(2, e, 23));
        CHECK(g.contains(x));
        seen.insert(x.small());
        // exhaustive discrete log
        std::uint64_t found = 0;
        for (std::uint64_t k = 1; k < g.q(); ++k)
            if (naive_pow(2, k, 23) == x.small()) found = k;
        CHECK(found == e);
    }
    CHECK(seen.size() == g.q() - 1);
    CHECK_FALSE(g.contains(g.element(5)));  // 5 is a non-residue mod 23
}

TEST_CASE("mismatched groups are rejected") {
    Group a = small();
    Group b = Group::toy();
    CHECK_THROWS_AS(a.exp(b.generator(), Scalar::from_small(2)), std::invalid_argument);
}

TEST_CASE("derive_scalar range and uniformity in toy group") {
    Group g = small();
    Bytes seed = bytes_of("seed");
    CHECK(g.derive_scalar(seed, 42) == g.derive_scalar(seed, 42));
    std::map<std::uint64_t, int> tally;
    const int n = 10000;
    for (int t = 0; t < n; ++t) {
        auto v = g.derive_scalar(seed, t).small();
        REQUIRE(v >= 1);
        REQUIRE(v <= 10);
        ++tally[v];
    }
    double expect = n / 10.0;
    double sigma = std::sqrt(n * 0.1 * 0.9);
    for (std::uint64_t v = 1; v <= 10; ++v) CHECK(std::fabs(tally[v] - expect) <= 5 * sigma);
}

TEST_CASE("dh symmetry in strong group, 1000 pairs") {
    Group g = Group::strong();
    Rng rng(11);
    int ok = 0;
    for (int i = 0; i < 1000; ++i) {
        Scalar x = g.random_scalar(rng), y = g.random_scalar(rng);
        if (dh_shared(g, x, g.exp_g(y)) == dh_shared(g, y, g.exp_g(x))) ++ok;
    }
    CHECK(ok == 1000);
}

TEST_CASE("identity beacon rejected") {
    Group g = Group::strong();
    CHECK_THROWS_AS(dh_shared(g, Scalar::from_small(3), g.identity()), DegenerateError);
    Group t = small();
    CHECK_THROWS_AS(dh_shared(t, Scalar::from_small(3), t.identity()), DegenerateError);
}

TEST_CASE("ordered token: asymmetric per party, pair identical") {
    Group g = Group::strong();
    Rng rng(3);
    for (int i = 0; i < 50; ++i) {
        Scalar x = g.random_scalar(rng), y = g.random_scalar(rng);
        GroupElement gx = g.exp_g(x), gy = g.exp_g(y);
        GroupElement s1 = dh_shared(g, x, gy), s2 = dh_shared(g, y, gx);
        Digest a = ordered_token(s1, gx, gy);
        Digest b = ordered_token(s2, gy, gx);
        CHECK(a != b);
        std::set<Digest> pa{ordered_token_for(s1, 0), ordered_token_for(s1, 1)};
        std::set<Digest> pb{ordered_token_for(s2, 0), ordered_token_for(s2, 1)};
        CHECK(pa == pb);
        CHECK(pa.count(a) == 1);
        CHECK(pa.count(b) == 1);
        CHECK(ordered_token(s1, gy, gx) == b);  // swapping gives the partner's token
    }
    CHECK_THROWS_AS(ordered_token(g.generator(), g.generator(), g.generator()), DegenerateError);
}

TEST_CASE("ordered token reproduced independently in toy group (x=3, x'=5)") {
    Group g = small();
    GroupElement gx = g.exp_g(Scalar::from_small(3));   // 8
    GroupElement gy = g.exp_g(Scalar::from_small(5));   // 9
    GroupElement shared = dh_shared(g, Scalar::from_small(3), gy);  // 16
    // independent: encoding is 4-byte big-endian of 16, indicator 0 since 8 < 9
    Bytes msg{0, 0, 0, 16, 0};
    Digest oracle = prf(bytes_of("pct/ordered-token"), msg);
    CHECK(ordered_token(shared, gx, gy) == oracle);
    msg.back() = 1;
    CHECK(ordered_token(shared, gy, gx) == prf(bytes_of("pct/ordered-token"), msg));
}

TEST_CASE("randomized receipt: owner verifies, wrong secrets fail") {
    Group g = Group::toy();
    Rng rng(5);
    Scalar xp = g.random_scalar(rng);
    GroupElement beacon = g.exp_g(xp);
    auto [u, v] = randomized_receipt(g, beacon, rng);
    CHECK(g.exp(u, xp) == v);
    auto [u2, v2] = randomized_receipt(g, beacon, rng);
    CHECK_FALSE((u == u2 && v == v2));
    int failures = 0;
    for (int i = 0; i < 100; ++i) {
        Scalar wrong = g.random_scalar(rng);
        if (wrong == xp) wrong = Scalar::from_small(xp.small() % (g.q() - 1) + 1);
        if (g.exp(u, wrong) != v) ++failures;
    }
    CHECK(failures == 100);
}

TEST_CASE("receipt wrong-secret check exhaustive in small toy group") {
    Group g = small();
    Rng rng(9);
    for (std::uint64_t xp = 1; xp < g.q(); ++xp) {
        GroupElement beacon = g.exp_g(Scalar::from_small(xp));
        auto [u, v] = randomized_receipt(g, beacon, rng);
        for (std::uint64_t w = 1; w < g.q(); ++w) {
            bool ok = g.exp(u, Scalar::from_small(w)) == v;
            CHECK(ok == (w == xp));
        }
    }
}

TEST_CASE("blind/unblind round trip and commutation") {
    for (Group g : {Group::toy(), Group::strong()}) {
        Rng rng(13);
        int rt = 0, comm = 0;
        for (int i = 0; i < 100; ++i) {
            GroupElement e = g.exp_g(g.random_scalar(rng));
            Scalar s = g.random_scalar(rng), t = g.random_scalar(rng);
            if (unblind_pow(g, blind_pow(g, e, s), s) == e) ++rt;
            if (blind_pow(g, blind_pow(g, e, s), t) == blind_pow(g, blind_pow(g, e, t), s)) ++comm;
        }
        CHECK(rt == 100);
        CHECK(comm == 100);
        CHECK_THROWS_AS(blind_pow(g, g.generator(), Scalar{}), std::invalid_argument);
    }
}

TEST_CASE("strong group derive_scalar stays in range and hash_to_element lands in group") {
    Group g = Group::strong();
    Bytes seed = bytes_of("s");
    for (int t = 0; t < 50; ++t) {
        Scalar x = g.derive_scalar(seed, t);
        CHECK(g.valid_scalar(x));
        CHECK(g.contains(g.hash_to_element(prf(seed, encode_u64(t)))));
    }
}

TEST_CASE("cuckoo: no false negatives, FPR bound, size, empty, overload") {
    Rng rng(17);
    auto random_digest = [&] {
        Digest d;
        for (auto& b : d.bytes) b = static_cast<std::uint8_t>(rng());
        return d;
    };
    std::vector<Digest> items;
    for (int i = 0; i < 20000; ++i) items.push_back(random_digest());
    double target = 1.0 / 8192;
    CuckooFilter f = cuckoo_build(items, target);
    CHECK(f.fingerprint_bits() == 16);
    int fn = 0;
    for (const auto& d : items)
        if (!cuckoo_query(f, d)) ++fn;
    CHECK(fn == 0);
    int fp = 0;
    const int probes = 100000;
    for (int i = 0; i < probes; ++i)
        if (cuckoo_query(f, random_digest())) ++fp;
    CHECK(static_cast<double>(fp) / probes <= 2 * target);
    CHECK(f.serialized_bytes() < items.size() * 32);
    CHECK(f.serialize().size() == f.serialized_bytes());

    double tight = 1.0 / 65536;
    CuckooFilter f2 = cuckoo_build(items, tight);
    int fp2 = 0;
    for (int i = 0; i < probes; ++i)
        if (cuckoo_query(f2, random_digest())) ++fp2;
    CHECK(static_cast<double>(fp2) / probes <= 2 * tight);
    CHECK(f2.serialized_bytes() < items.size() * 32);

    CuckooFilter empty = cuckoo_build({}, target);
    int hits = 0;
    for (int i = 0; i < 1000; ++i)
        if (cuckoo_query(empty, random_digest())) ++hits;
    CHECK(hits == 0);

    CuckooFilter small_f(16, 16);
    bool threw = false;
    try {
        for (int i = 0; i < 64; ++i) small_f.insert(random_digest());
    } catch (const CapacityExceeded&) {
        threw = true;
    }
    CHECK(threw);
}
