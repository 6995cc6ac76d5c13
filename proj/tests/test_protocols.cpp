#include <doctest.h>

#include <algorithm>

#include "pct/analysis.hpp"
#include "pct/engine.hpp"
#include "pct/protocols.hpp"

using namespace pct;

namespace {

Scenario two_people(ProtocolId id, int minutes, double distance = 1.0) {
    Scenario sc;
    sc.mode = WorldMode::Scripted;
    sc.protocol = id;
    sc.num_users = 4;
    sc.num_days = 3;
    sc.new_patients_per_day = 0;
    sc.contacts_per_user_per_day = 0;
    sc.num_cells = 1;
    sc.scripted_encounters = {Encounter{0, 1, kMinutesPerDay + 600, minutes, distance, 0},
                              Encounter{2, 3, kMinutesPerDay + 900, 30, 1.0, 0}};
    sc.scripted_diagnoses = {{0, 2}};
    return sc;
}

}  // namespace

TEST_CASE("every protocol detects a 20-minute close contact with a patient and nothing else") {
    for (ProtocolId id : all_protocols()) {
        CAPTURE(protocol_name(id));
        SimulationResult r = run(two_people(id, 20));
        CHECK(r.failures.empty());
        CHECK(r.detected == std::set<UserId>{1});
        CHECK(r.risk[1] == 20);
        CHECK(r.risk[0] == 0);
        CHECK(r.risk[2] == 0);
    }
}

TEST_CASE("every protocol ignores far or short contacts") {
    for (ProtocolId id : all_protocols()) {
        CAPTURE(protocol_name(id));
        CHECK(run(two_people(id, 20, 2.5)).detected.empty());
        CHECK(run(two_people(id, 12)).detected.empty());
    }
}

TEST_CASE("protocol specs carry their structural attributes") {
    CHECK(instantiate(ProtocolId::SentUserDaily).options.daily_seed);
    CHECK(instantiate(ProtocolId::ReceivedServer).beacon_registry);
    CHECK(instantiate(ProtocolId::ReceivedUserCleverParrot).randomized_receipts);
    CHECK(instantiate(ProtocolId::ReceivedUserBasic).dedup_published);
    CHECK_FALSE(instantiate(ProtocolId::ReceivedUserBasic, ProtocolOptions{false, false, false, true}).dedup_published);
    CHECK(instantiate(ProtocolId::AgreedInteractive).options.query_and_discard);
    for (ProtocolId id : all_protocols()) {
        CHECK(protocol_from_name(protocol_name(id)) == id);
        ProtocolSpec s = instantiate(id);
        CHECK(s.group_beacons == (s.report_kind == ReportKind::Agreed || id == ProtocolId::ReceivedUserCleverParrot ||
                                  id == ProtocolId::ReceivedInteractive));
    }
    CHECK_THROWS_AS(protocol_from_name("nope"), std::invalid_argument);
    ProtocolSpec bad = instantiate(ProtocolId::SentServer);
    bad.options.daily_seed = true;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}

TEST_CASE("PSI-CA cardinality equals the naive intersection over 100 toy instances") {
    Group g = Group::toy();
    Rng rng(2024);
    auto item = [](std::uint64_t v) { return prf(std::string("psi-test"), encode_u64(v)); };
    int agree = 0;
    for (int inst = 0; inst < 100; ++inst) {
        std::uniform_int_distribution<std::uint64_t> val(0, 60);
        std::uniform_int_distribution<int> size(0, 25);
        std::set<std::uint64_t> a, b;
        for (int i = size(rng); i > 0; --i) a.insert(val(rng));
        for (int i = size(rng); i > 0; --i) b.insert(val(rng));
        std::vector<Digest> server_items, user_items;
        for (auto v : a) server_items.push_back(item(v));
        for (auto v : b) user_items.push_back(item(v));
        std::size_t naive = 0;
        for (auto v : b) naive += a.count(v);
        PsiServerSet s = psi_server_prepare(g, server_items, rng);
        if (psi_ca_round(g, s, user_items, rng) == naive) ++agree;
    }
    CHECK(agree == 100);
}

TEST_CASE("PSI-CA transcript hides the user's items") {
    Group g = Group::toy();
    Rng rng(9);
    std::vector<Digest> items = {prf(std::string("k"), encode_u64(1)), prf(std::string("k"), encode_u64(2))};
    PsiServerSet s = psi_server_prepare(g, items, rng);
    PsiTranscript t;
    CHECK(psi_ca_round(g, s, items, rng, &t) == 2);
    for (const auto& sent : t.user_to_server)
        for (const auto& d : items) CHECK(sent != Token::of(g.hash_to_element(d)));
}

TEST_CASE("cost formulas: spot values") {
    CHECK(*expected_cost(ProtocolId::SentUserBasic, 20, 10).download == 20160);
    CHECK(*expected_cost(ProtocolId::AgreedServer, 20, 2).upload == 20);
    CHECK(*expected_cost(ProtocolId::AgreedInteractive, 20, 2).upload == 280);
    CHECK(*expected_cost(ProtocolId::ReceivedServer, 20, 2).upload == 2016);
    CHECK(*expected_cost(ProtocolId::ReceivedInteractive, 20, 2).upload == 704);
    CHECK(*expected_cost(ProtocolId::SentUserDaily, 20, 2).patient == 14);
    CHECK_FALSE(expected_cost(ProtocolId::SentInteractive, 20, 2).download.has_value());
}

TEST_CASE("cost ledger matches the formulas on a small regular world") {
    for (ProtocolId id : {ProtocolId::SentUserBasic, ProtocolId::AgreedServer, ProtocolId::ReceivedServer,
                          ProtocolId::AgreedUser}) {
        CAPTURE(protocol_name(id));
        Scenario sc;
        sc.protocol = id;
        sc.mode = WorldMode::Regular;
        sc.num_users = 40;
        sc.num_days = 15;
        sc.contacts_per_user_per_day = 6;
        sc.new_patients_per_day = 3;
        sc.diagnosis_start_day = 14;
        CostLedger l = cost_ledger(run(sc));
        CostFormula f = expected_cost(id, 6, 3);
        CHECK(l.patients == 3);
        CHECK(l.user_upload == doctest::Approx(static_cast<double>(*f.upload)));
        CHECK(l.user_download == doctest::Approx(static_cast<double>(*f.download)));
        CHECK(l.patient_tokens == doctest::Approx(static_cast<double>(*f.patient)));
    }
}

TEST_CASE("cost ledger: no patients, no patient-driven cost") {
    Scenario sc;
    sc.protocol = ProtocolId::SentUserBasic;
    sc.mode = WorldMode::Regular;
    sc.num_users = 20;
    sc.num_days = 15;
    sc.contacts_per_user_per_day = 4;
    sc.new_patients_per_day = 0;
    CostLedger l = cost_ledger(run(sc));
    CHECK(l.user_download == 0);
    CHECK(l.patients == 0);
    CHECK(l.user_comparisons == 0);
}
