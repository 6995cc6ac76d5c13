#include <doctest.h>

#include <algorithm>
#include <map>

#include "pct/world.hpp"

using namespace pct;

namespace {

Scenario scripted(int users, int days) {
    Scenario sc;
    sc.mode = WorldMode::Scripted;
    sc.num_users = users;
    sc.num_days = days;
    sc.new_patients_per_day = 0;
    sc.contacts_per_user_per_day = 0;
    sc.num_cells = 2;
    return sc;
}

Encounter enc(UserId a, UserId b, int day, int minute_of_day, int minutes, double distance = 1.0) {
    return Encounter{a, b, static_cast<std::int64_t>(day) * kMinutesPerDay + minute_of_day, minutes, distance, 0};
}

}  // namespace

TEST_CASE("random mode draws exactly round(N*s/2) distinct pairs per day") {
    Scenario sc;
    sc.num_users = 30;
    sc.num_days = 3;
    sc.contacts_per_user_per_day = 7;
    sc.durations.repeat_prob = 0;
    WorldTrace w = generate_world(sc);
    std::map<int, std::set<std::pair<UserId, UserId>>> per_day;
    for (const auto& e : w.encounters) per_day[e.day()].emplace(std::min(e.a, e.b), std::max(e.a, e.b));
    for (int d = 0; d < 3; ++d) CHECK(per_day[d].size() == 105);
    CHECK(w.encounters.size() == 315);
    CHECK(std::is_sorted(w.encounters.begin(), w.encounters.end(),
                         [](const Encounter& a, const Encounter& b) { return a.start_minute < b.start_minute; }));
}

TEST_CASE("regular mode gives every adopter exactly s contacts per day") {
    Scenario sc;
    sc.mode = WorldMode::Regular;
    sc.num_users = 20;
    sc.num_days = 2;
    sc.contacts_per_user_per_day = 4;
    WorldTrace w = generate_world(sc);
    std::map<std::pair<int, UserId>, int> count;
    std::set<std::int64_t> slots;
    for (const auto& e : w.encounters) {
        ++count[{e.day(), e.a}];
        ++count[{e.day(), e.b}];
        slots.insert(e.start_slot());
        CHECK(e.minutes == 5);
        CHECK(e.start_minute % kMinutesPerSlot == 2);
    }
    CHECK(count.size() == 40);
    for (const auto& [k, c] : count) CHECK(c == 4);
    CHECK(slots.size() == 8);
}

TEST_CASE("adoption picks exactly round(p*N) users") {
    Scenario sc;
    sc.num_users = 41;
    sc.adoption_rate = 0.5;
    sc.num_days = 1;
    WorldTrace w = generate_world(sc);
    CHECK(std::count(w.adopters.begin(), w.adopters.end(), true) == 21);
}

TEST_CASE("diagnoses: P per day from the start day, nobody twice") {
    Scenario sc;
    sc.num_users = 50;
    sc.num_days = 10;
    sc.new_patients_per_day = 3;
    sc.diagnosis_start_day = 4;
    WorldTrace w = generate_world(sc);
    CHECK(w.diagnoses.size() == 18);
    std::set<UserId> seen;
    for (const auto& d : w.diagnoses) {
        CHECK(d.day >= 4);
        CHECK(seen.insert(d.user).second);
    }
}

TEST_CASE("same seed gives byte-identical trace CSV, another seed does not") {
    Scenario sc;
    sc.num_users = 20;
    sc.num_days = 3;
    std::string a = generate_world(sc).to_csv();
    CHECK(a == generate_world(sc).to_csv());
    sc.rng_seed = 2;
    CHECK(a != generate_world(sc).to_csv());
    CHECK(a.rfind("user_a,user_b,start_slot,start_minute,minutes,distance,cell\n", 0) == 0);
}

TEST_CASE("oracle: hand-built exposures") {
    Scenario sc = scripted(6, 20);
    sc.scripted_encounters = {
        enc(0, 1, 5, 100, 20),       // exposed: 20 close minutes
        enc(0, 2, 5, 200, 20, 3.0),  // too far
        enc(0, 3, 5, 300, 10),       // below threshold alone
        enc(0, 3, 6, 300, 6),        // together 16
        enc(0, 4, 5, 405, 1),        // 1-minute piece in each slot, below the session minimum
        enc(0, 5, 1, 100, 30),       // outside the infectious window of a day-15 diagnosis
    };
    sc.scripted_diagnoses = {{0, 15}};
    WorldTrace w = generate_world(sc);
    GroundTruthExposures g = ground_truth_oracle(w, sc.params);
    CHECK(g.exposed_set() == std::set<UserId>{1, 3});
    CHECK(g.users.at(1).total == 20);
    CHECK(g.users.at(3).total == 16);
    CHECK(g.users.count(2) == 0);
    CHECK(g.users.count(4) == 0);
    CHECK(g.users.count(5) == 0);
    CHECK(g.total_minutes() == 36);
}

TEST_CASE("oracle: slot pieces shorter than the session minimum are dropped") {
    Scenario sc = scripted(2, 2);
    // minutes 9..24: pieces of 1, 10 and 5 minutes across three slots
    sc.scripted_encounters = {enc(0, 1, 0, 9, 16)};
    sc.scripted_diagnoses = {{1, 1}};
    GroundTruthExposures g = ground_truth_oracle(generate_world(sc), sc.params);
    CHECK(g.users.at(0).total == 15);
    CHECK(g.users.at(0).exposed);
}

TEST_CASE("oracle: household members are not exposures") {
    Scenario sc = scripted(3, 2);
    sc.scripted_encounters = {enc(0, 1, 0, 0, 30), enc(0, 2, 0, 100, 30)};
    sc.scripted_diagnoses = {{0, 1}};
    sc.households = {{0, 1}};
    GroundTruthExposures g = ground_truth_oracle(generate_world(sc), sc.params);
    CHECK(g.exposed_set() == std::set<UserId>{2});
}

TEST_CASE("interaction ground truth keeps close pairs only") {
    Scenario sc = scripted(4, 1);
    sc.scripted_encounters = {enc(0, 1, 0, 0, 1), enc(2, 3, 0, 50, 30, 2.5)};
    auto edges = interaction_ground_truth(generate_world(sc), sc.params);
    CHECK(edges == std::set<std::pair<UserId, UserId>>{{0, 1}});
}

TEST_CASE("presence points cover encounters and crowds") {
    Scenario sc = scripted(3, 1);
    sc.scripted_encounters = {enc(0, 1, 0, 5, 10)};
    sc.crowds = {{2, 1, 7}};
    auto pts = generate_world(sc).presence_points();
    CHECK(std::count_if(pts.begin(), pts.end(), [](const Presence& p) { return p.user == 0; }) == 2);
    CHECK(std::find(pts.begin(), pts.end(), Presence{2, 1, 7}) != pts.end());
}

TEST_CASE("scenario validation rejects bad input") {
    Scenario sc;
    sc.num_users = 0;
    CHECK_THROWS_AS(sc.validate(), std::invalid_argument);
    sc = Scenario{};
    sc.loss_prob = 1.0;
    CHECK_THROWS_AS(sc.validate(), std::invalid_argument);
    sc = Scenario{};
    sc.mode = WorldMode::Regular;
    sc.num_users = 11;
    CHECK_THROWS_AS(sc.validate(), std::invalid_argument);
    sc = scripted(2, 2);
    sc.scripted_encounters = {enc(0, 1, 0, kMinutesPerDay - 5, 10)};
    CHECK_THROWS_AS(sc.validate(), std::invalid_argument);
    sc = scripted(2, 2);
    sc.scripted_diagnoses = {{0, 0}, {0, 1}};
    CHECK_THROWS_AS(sc.validate(), std::invalid_argument);
    sc = Scenario{};
    sc.adversaries = {AdversaryConfig{AdversaryKind::ServerPsv, {}, {}, {}}};
    CHECK_THROWS_AS(sc.validate(), std::invalid_argument);
}
