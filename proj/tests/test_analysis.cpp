#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>

#include "pct/adversaries.hpp"
#include "pct/analysis.hpp"

using namespace pct;
namespace fs = std::filesystem;

namespace {

ProtocolScore full_row(ProtocolId id) {
    ProtocolScore row;
    row.protocol = id;
    for (PrivacyColumn c : privacy_columns()) row.privacy[c] = PrivacyCell{LeakValue::Protected, "", ""};
    for (AttackId a : resiliency_columns()) row.resiliency[a] = ResilienceCell{Resilience::Resists, 0, 0, ""};
    row.rate_limit_applicable = true;
    CostRun base, twice;
    base.ledger.user_download = 100;
    twice.ledger.user_download = 150;
    row.costs = {base, twice};
    return row;
}

fs::path scratch(const std::string& name) {
    fs::path d = fs::temp_directory_path() / ("pct-analysis-" + name);
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
}

void write(const fs::path& p, const std::string& text) { std::ofstream(p) << text; }

void copy_expected(const fs::path& to) {
    for (const char* f : {"privacy.json", "resiliency.json", "flaws.json"})
        fs::copy_file(default_data_dir() / "expected" / f, to / f, fs::copy_options::overwrite_existing);
}

}  // namespace

TEST_CASE("flaw flags: a clean row has none") { CHECK(flaw_flags(full_row(ProtocolId::SentUserBasic)).empty()); }

TEST_CASE("flaw flags: each constituent check maps to its flag") {
    ProtocolScore row = full_row(ProtocolId::SentServer);
    row.privacy[PrivacyColumn::NoExposureUserUser].value = LeakValue::Leaks;
    row.privacy[PrivacyColumn::TraceAllServerPsv].value = LeakValue::Leaks;
    row.privacy[PrivacyColumn::TracePatientsServerPsv].value = LeakValue::Leaks;
    row.privacy[PrivacyColumn::TraceAllServerAsv].value = LeakValue::Leaks;
    row.privacy[PrivacyColumn::PatientIdentity].value = LeakValue::Partial;
    row.resiliency[AttackId::HighPowerBroadcast].value = Resilience::Vulnerable;
    row.rate_limit_applicable = false;
    row.costs[1].ledger.user_download = 200;
    CHECK(flaw_flags(row) == std::set<std::string>{"1", "2a", "2b", "2c", "3-partial", "4", "5a"});
    row.privacy[PrivacyColumn::PatientIdentity].value = LeakValue::Leaks;
    CHECK(flaw_flags(row).count("3"));
}

TEST_CASE("flaw flags: a vulnerable broadcast cell under an applicable rate limit is not flaw 4") {
    ProtocolScore row = full_row(ProtocolId::ReceivedServer);
    row.resiliency[AttackId::DriveByEavesdrop].value = Resilience::Vulnerable;
    CHECK_FALSE(flaw_flags(row).count("4"));
}

TEST_CASE("flaw flags: static interactive flag") {
    CHECK(flaw_flags(full_row(ProtocolId::SentInteractive)).count("5b"));
    CHECK(flaw_flags(full_row(ProtocolId::ReceivedInteractive)).count("5b"));
    CHECK(flaw_flags(full_row(ProtocolId::AgreedUser)).count("5b"));
    CHECK_FALSE(flaw_flags(full_row(ProtocolId::AgreedServer)).count("5b"));
}

TEST_CASE("flaw flags: missing checks surface as unknown, never as absent") {
    ProtocolScore row;
    row.protocol = ProtocolId::SentUserBasic;
    auto f = flaw_flags(row);
    for (const char* n : {"unknown:1", "unknown:2a", "unknown:2b", "unknown:2c", "unknown:3", "unknown:4", "unknown:5a"})
        CHECK(f.count(n));
    CHECK(flags_string({}) == "none");
}

TEST_CASE("diff: a scorecard against itself is empty, a flipped cell is reported once") {
    Scorecard sc;
    sc.rows = {full_row(ProtocolId::SentUserBasic), full_row(ProtocolId::AgreedServer)};
    for (auto& r : sc.rows) r.flaws = flaw_flags(r);
    ExpectedMatrices e = expected_from_scorecard(sc);
    CHECK(scorecard_diff(sc, e).empty());
    CHECK(scorecard_diff(sc, e).empty());
    e.privacy[ProtocolId::AgreedServer][PrivacyColumn::PatientUser] = LeakValue::Leaks;
    auto d = scorecard_diff(sc, e);
    REQUIRE(d.size() == 1);
    CHECK(d[0].matrix == "privacy");
    CHECK(d[0].protocol == ProtocolId::AgreedServer);
    CHECK(d[0].column == "patient-user");
    CHECK(d[0].expected == "○");
    CHECK(d[0].computed == "●");
    CHECK(diff_csv(d).find("privacy,agreed-server-sdh,patient-user") != std::string::npos);
}

TEST_CASE("expected matrices load and cover every protocol") {
    ExpectedMatrices e = load_expected(default_data_dir() / "expected");
    CHECK(e.privacy.size() == 11);
    CHECK(e.resiliency.size() == 11);
    CHECK(e.flaws.size() == 11);
    CHECK(e.privacy[ProtocolId::SentServer][PrivacyColumn::NoExposureUserUser] == LeakValue::Leaks);
    CHECK(e.resiliency[ProtocolId::AgreedServer][AttackId::DriveByEavesdrop] == Resilience::Resists);
}

TEST_CASE("expected matrices: malformed input is a load error") {
    fs::path d = scratch("bad");
    CHECK_THROWS_AS(load_expected(d), MatrixLoadError);

    copy_expected(d);
    CHECK_NOTHROW(load_expected(d));
    write(d / "privacy.json", "{ \"columns\": [");
    CHECK_THROWS_AS(load_expected(d), MatrixLoadError);

    copy_expected(d);
    write(d / "resiliency.json", R"({"columns": ["drive-by"], "rows": {"no-such-protocol": ["●"]}})");
    CHECK_THROWS_AS(load_expected(d), MatrixLoadError);

    copy_expected(d);
    write(d / "resiliency.json", R"({"columns": ["drive-by"], "rows": {"sent-server": ["?"]}})");
    CHECK_THROWS_AS(load_expected(d), MatrixLoadError);

    copy_expected(d);
    write(d / "resiliency.json", R"({"columns": ["drive-by", "tunneling"], "rows": {"sent-server": ["●"]}})");
    CHECK_THROWS_AS(load_expected(d), MatrixLoadError);

    copy_expected(d);
    write(d / "flaws.json", R"({"rows": {"sent-server": ["7"]}})");
    CHECK_THROWS_AS(load_expected(d), MatrixLoadError);
    fs::remove_all(d);
}

TEST_CASE("mutation: publishing duplicates lets a received-user patient spot co-patients") {
    Scenario sc = default_suite().privacy;
    sc.protocol = ProtocolId::ReceivedUserBasic;
    WorldTrace w = generate_world(sc);
    CHECK(leak_user_side_copatients(run(sc, w)) == LeakValue::Protected);
    sc.options.disable_dedup = true;
    CHECK(leak_user_side_copatients(run(sc, w)) == LeakValue::Leaks);
    sc.protocol = ProtocolId::SentServer;
    sc.options.disable_dedup = false;
    CHECK(leak_user_side_copatients(run(sc, w)) == LeakValue::NotApplicable);
}

TEST_CASE("active surveillance never links fewer patient points than passive") {
    for (ProtocolId id : all_protocols()) {
        CAPTURE(protocol_name(id));
        Scenario sc = default_suite().privacy;
        sc.protocol = id;
        std::set<int> cells;
        for (int c = 0; c < sc.num_cells; ++c) cells.insert(c);
        AdversaryConfig psv{AdversaryKind::ServerPsv, cells, {}, {}};
        AdversaryConfig asv{AdversaryKind::ServerAsv, cells, {}, {}};
        WorldTrace w = generate_world(sc);
        sc.adversaries = {psv};
        SimulationResult rp = run(sc, w);
        sc.adversaries = {asv};
        SimulationResult ra = run(sc, w);
        TraceResult p = leak_movement_traces(rp, w, make_view(rp, psv), TraceScope::Patients);
        TraceResult a = leak_movement_traces(ra, w, make_view(ra, asv), TraceScope::Patients);
        CHECK(p.targets == a.targets);
        CHECK(a.linked >= p.linked);
    }
}

TEST_CASE("scorecard output formats") {
    Scorecard sc;
    sc.rows = {full_row(ProtocolId::SentUserBasic)};
    sc.rows[0].flaws = flaw_flags(sc.rows[0]);
    std::string csv = scorecard_csv(sc);
    CHECK(csv.rfind("matrix,protocol,column,value,detail,source\n", 0) == 0);
    CHECK(csv.find("privacy,sent-user-basic,exposure-status,") != std::string::npos);
    CHECK(csv.find("flaws,sent-user-basic,") != std::string::npos);
    ExpectedMatrices e = expected_from_scorecard(sc);
    e.resiliency[ProtocolId::SentUserBasic][AttackId::Tunneling] = Resilience::Vulnerable;
    auto d = scorecard_diff(sc, e);
    std::string table = scorecard_table(sc, &d);
    CHECK(table.find("sent-user-basic") != std::string::npos);
    CHECK(table.find('*') != std::string::npos);
}
