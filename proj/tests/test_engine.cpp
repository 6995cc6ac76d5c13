#include <doctest.h>

#include "pct/engine.hpp"
#include "pct/protocols.hpp"

using namespace pct;

namespace {

Scenario small_world(ProtocolId id) {
    Scenario sc;
    sc.protocol = id;
    sc.num_users = 24;
    sc.num_days = 8;
    sc.contacts_per_user_per_day = 6;
    sc.new_patients_per_day = 1;
    sc.num_cells = 4;
    sc.rng_seed = 21;
    return sc;
}

}  // namespace

TEST_CASE("engine: notified minutes equal the oracle for every protocol") {
    for (ProtocolId id : all_protocols()) {
        CAPTURE(protocol_name(id));
        Scenario sc = small_world(id);
        WorldTrace w = generate_world(sc);
        GroundTruthExposures truth = ground_truth_oracle(w, sc.params);
        SimulationResult r = run(sc, w);
        CHECK(r.failures.empty());
        CHECK(r.detected == truth.exposed_set());
        for (UserId u = 0; u < sc.num_users; ++u) {
            auto it = truth.users.find(u);
            CHECK(r.risk[static_cast<std::size_t>(u)] == (it == truth.users.end() ? 0 : it->second.total));
        }
    }
}

TEST_CASE("engine: the strong group runs every protocol to the same result") {
    for (ProtocolId id : all_protocols()) {
        CAPTURE(protocol_name(id));
        Scenario sc = small_world(id);
        sc.num_users = 12;
        sc.num_days = 4;
        sc.contacts_per_user_per_day = 4;
        WorldTrace w = generate_world(sc);
        SimulationResult medium = run(sc, w);
        sc.group_kind = GroupKind::Strong;
        SimulationResult strong = run(sc, w);
        CHECK(strong.failures.empty());
        CHECK(strong.risk == medium.risk);
        CHECK(strong.detected == ground_truth_oracle(w, sc.params).exposed_set());
    }
}

TEST_CASE("engine: household members do not notify each other") {
    Scenario sc = small_world(ProtocolId::SentUserBasic);
    sc.mode = WorldMode::Scripted;
    sc.num_users = 3;
    sc.num_days = 3;
    sc.num_cells = 1;
    sc.scripted_encounters = {Encounter{0, 1, kMinutesPerDay + 60, 30, 1.0, 0},
                              Encounter{0, 2, kMinutesPerDay + 200, 30, 1.0, 0}};
    sc.scripted_diagnoses = {{0, 2}};
    sc.households = {{0, 1}};
    SimulationResult r = run(sc);
    CHECK(r.detected == std::set<UserId>{2});
    CHECK(r.users[1].dropped_household > 0);
}

TEST_CASE("engine: non-adopters are never notified and never counted") {
    Scenario sc = small_world(ProtocolId::AgreedServer);
    sc.adoption_rate = 0.5;
    SimulationResult r = run(sc);
    for (UserId u : r.detected) CHECK(r.adopters[static_cast<std::size_t>(u)]);
    for (UserId u = 0; u < sc.num_users; ++u)
        if (!r.adopters[static_cast<std::size_t>(u)]) CHECK(r.risk[static_cast<std::size_t>(u)] == 0);
}

TEST_CASE("engine: loss lowers detection and is reproducible") {
    Scenario sc = small_world(ProtocolId::SentUserBasic);
    sc.num_days = 10;
    WorldTrace w = generate_world(sc);
    std::int64_t clean = run(sc, w).risk_minutes();
    sc.loss_prob = 0.5;
    SimulationResult a = run(sc, w), b = run(sc, w);
    CHECK(a.risk == b.risk);
    CHECK(a.risk_minutes() < clean);
    CHECK(a.risk_minutes() > 0);
}

TEST_CASE("engine: adoption sweep reports p squared as reference") {
    Scenario sc = small_world(ProtocolId::SentUserBasic);
    auto pts = detection_rate_vs_adoption(sc, {0.5, 1.0});
    REQUIRE(pts.size() == 2);
    CHECK(pts[0].reference == doctest::Approx(0.25));
    CHECK(pts[1].detected_fraction == doctest::Approx(1.0));
}
