#include "pct/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <sstream>

#include <json.hpp>

#include "pct/protocols.hpp"

#ifndef PCT_DEFAULT_DATA_DIR
#define PCT_DEFAULT_DATA_DIR "data"
#endif

namespace pct {

// ---------------------------------------------------------------- cost

CostLedger cost_ledger(const SimulationResult& r, int day) {
    CostLedger c;
    if (r.daily_costs.empty()) return c;
    if (day < 0) day = static_cast<int>(r.daily_costs.size()) - 1;
    c.day = day;
    const CostMeter& m = r.daily_costs.at(static_cast<std::size_t>(day));
    std::set<UserId> diagnosed;
    for (const auto& d : r.diagnoses) diagnosed.insert(d.user);
    for (int u = 0; u < r.num_users; ++u) {
        if (!r.adopters[static_cast<std::size_t>(u)] || diagnosed.count(u)) continue;
        ++c.users_counted;
        auto it = m.users.find(u);
        if (it == m.users.end()) continue;
        c.user_upload += static_cast<double>(it->second.upload_tokens);
        c.user_download += static_cast<double>(it->second.download_tokens);
        c.user_comparisons += static_cast<double>(it->second.comparisons);
        c.user_exps += static_cast<double>(it->second.exps);
    }
    if (c.users_counted > 0) {
        double n = c.users_counted;
        c.user_upload /= n;
        c.user_download /= n;
        c.user_comparisons /= n;
        c.user_exps /= n;
    }
    c.server_comparisons = m.server_comparisons;
    c.server_exps = m.server_exps;
    c.patients = static_cast<int>(m.patient_report_tokens.size());
    for (const auto& [p, t] : m.patient_report_tokens) c.patient_tokens += static_cast<double>(t);
    if (c.patients > 0) c.patient_tokens /= c.patients;
    return c;
}

CostFormula expected_cost(ProtocolId id, double s, double P) {
    const auto slots = static_cast<std::int64_t>(kSlotsPerDay);
    const auto sl = static_cast<std::int64_t>(std::llround(s));
    const auto pl = static_cast<std::int64_t>(std::llround(P));
    const std::int64_t window = 14;
    const std::int64_t C = window * sl * pl;
    switch (id) {
        case ProtocolId::SentUserBasic: return {0, window * slots * pl, window * slots};
        case ProtocolId::SentUserDaily: return {0, window * pl, window};
        case ProtocolId::SentInteractive: return {window * sl, std::nullopt, window * slots};
        case ProtocolId::SentServer: return {window * sl, 0, window * slots};
        case ProtocolId::ReceivedUserBasic:
        case ProtocolId::ReceivedUserCleverParrot: return {0, C, window * sl};
        case ProtocolId::ReceivedInteractive: return {slots + C, C, window * sl};
        case ProtocolId::ReceivedServer: return {window * slots, 0, window * sl};
        case ProtocolId::AgreedUser: return {0, C, window * sl};
        case ProtocolId::AgreedInteractive: return {window * sl, 0, window * sl};
        case ProtocolId::AgreedServer: return {sl, 0, window * sl};
    }
    return {};
}

// ---------------------------------------------------------------- names and symbols

namespace {

const std::vector<std::pair<PrivacyColumn, const char*>> kColumns = {
    {PrivacyColumn::ExposureStatus, "exposure-status"},
    {PrivacyColumn::PatientIdentity, "patient-identity"},
    {PrivacyColumn::TraceAllServerPsv, "trace-all-server-psv"},
    {PrivacyColumn::TraceAllServerAsv, "trace-all-server-asv"},
    {PrivacyColumn::TracePatientsUser, "trace-patients-user"},
    {PrivacyColumn::TracePatientsServerPsv, "trace-patients-server-psv"},
    {PrivacyColumn::TracePatientsServerAsv, "trace-patients-server-asv"},
    {PrivacyColumn::PatientPatient, "patient-patient"},
    {PrivacyColumn::PatientUser, "patient-user"},
    {PrivacyColumn::UserUser, "user-user"},
    {PrivacyColumn::NoExposureUserUser, "no-exposure-user-user"},
    {PrivacyColumn::UserSidePatientPatient, "user-side-patient-patient"},
};

const char* kShort[] = {"ExpSt", "PatId", "AllS+P", "AllS+A", "PatU", "PatS+P",
                        "PatS+A", "P-P",  "P-U",    "U-U",    "NoExp", "UsrP-P"};

const std::set<std::string> kFlagNames = {"1", "2a", "2b", "2c", "3", "3-partial", "4", "5a", "5b"};

}  // namespace

const std::vector<PrivacyColumn>& privacy_columns() {
    static const std::vector<PrivacyColumn> v = [] {
        std::vector<PrivacyColumn> out;
        for (const auto& [c, n] : kColumns) out.push_back(c);
        return out;
    }();
    return v;
}

const char* column_name(PrivacyColumn c) {
    for (const auto& [v, n] : kColumns)
        if (v == c) return n;
    return "?";
}

PrivacyColumn privacy_column_from_name(const std::string& s) {
    for (const auto& [v, n] : kColumns)
        if (s == n) return v;
    throw std::invalid_argument("unknown privacy column: " + s);
}

const char* symbol(Resilience r) {
    switch (r) {
        case Resilience::Resists: return "●";
        case Resilience::Flagged: return "◐";
        case Resilience::Vulnerable: return "○";
        case Resilience::Unknown: return "?";
    }
    return "?";
}

const char* symbol(LeakValue v) {
    switch (v) {
        case LeakValue::Leaks: return "○";
        case LeakValue::Partial: return "⦿";
        case LeakValue::Protected: return "●";
        case LeakValue::NotApplicable: return "-";
        case LeakValue::Unknown: return "?";
    }
    return "?";
}

Resilience resilience_from_symbol(const std::string& s) {
    for (auto r : {Resilience::Resists, Resilience::Flagged, Resilience::Vulnerable})
        if (s == symbol(r)) return r;
    throw std::invalid_argument("bad resiliency symbol: " + s);
}

LeakValue leak_from_symbol(const std::string& s) {
    for (auto v : {LeakValue::Leaks, LeakValue::Partial, LeakValue::Protected, LeakValue::NotApplicable})
        if (s == symbol(v)) return v;
    throw std::invalid_argument("bad privacy symbol: " + s);
}

const std::vector<AttackId>& resiliency_columns() {
    static const std::vector<AttackId> v = {AttackId::DriveByEavesdrop, AttackId::HighPowerBroadcast,
                                            AttackId::HighPowerDevice,  AttackId::SameBeacon,
                                            AttackId::Pooling,          AttackId::Forwarding,
                                            AttackId::Tunneling};
    return v;
}

const ProtocolScore* Scorecard::find(ProtocolId id) const {
    for (const auto& r : rows)
        if (r.protocol == id) return &r;
    return nullptr;
}

// ---------------------------------------------------------------- suite

SuiteConfig default_suite() {
    SuiteConfig s;
    Scenario& p = s.privacy;
    p.mode = WorldMode::Gatherings;
    p.num_users = 40;
    p.num_days = 16;
    p.new_patients_per_day = 2;
    p.contacts_per_user_per_day = 6;
    p.num_cells = 4;
    p.diagnosis_start_day = 2;
    p.rng_seed = 11;

    Scenario& c = s.costs;
    c.mode = WorldMode::Regular;
    c.num_users = 100;
    c.num_days = 15;
    c.new_patients_per_day = 2;
    c.contacts_per_user_per_day = 20;
    c.diagnosis_start_day = 14;
    c.rng_seed = 5;
    return s;
}

namespace {

std::string fmt(double v, int prec = 2) {
    std::ostringstream os;
    os << std::fixed << std::setprecision(prec) << v;
    return os.str();
}

std::string trace_detail(const TraceResult& t) {
    return "linked " + std::to_string(t.linked) + "/" + std::to_string(t.targets) + " (" + fmt(t.fraction) + ")";
}

LeakValue worst(LeakValue a, LeakValue b) {
    for (auto v : {LeakValue::Leaks, LeakValue::Partial, LeakValue::Protected, LeakValue::NotApplicable})
        if (a == v || b == v) return v;
    return LeakValue::Unknown;
}

std::string seed_tag(const Scenario& sc) { return "seed=" + std::to_string(sc.rng_seed); }

}  // namespace

void score_privacy(ProtocolScore& row, const Scenario& base) {
    Scenario passive = base;
    passive.protocol = row.protocol;
    std::set<int> cells;
    for (int c = 0; c < base.num_cells; ++c) cells.insert(c);
    AdversaryConfig spsv{AdversaryKind::ServerPsv, cells, {}, {}};
    AdversaryConfig upsv{AdversaryKind::UserPsv, cells, {}, {}};
    AdversaryConfig sasv{AdversaryKind::ServerAsv, cells, {}, {}};
    AdversaryConfig uasv{AdversaryKind::UserAsv, cells, {}, {}};
    passive.adversaries = {spsv, upsv};
    Scenario active = passive;
    active.adversaries = {sasv, uasv};

    WorldTrace w = generate_world(passive);
    SimulationResult rp = run(passive, w);
    SimulationResult ra = run(active, w);
    for (const auto& f : rp.failures) row.failures.push_back("privacy passive: " + f);
    for (const auto& f : ra.failures) row.failures.push_back("privacy active: " + f);
    const std::string sp = "privacy/passive " + seed_tag(passive);
    const std::string sa = "privacy/active " + seed_tag(active);

    auto set = [&](PrivacyColumn c, LeakValue v, std::string detail, const std::string& src) {
        row.privacy[c] = PrivacyCell{v, std::move(detail), src};
    };

    ExposureStatusResult es = leak_exposure_status(rp);
    set(PrivacyColumn::ExposureStatus, es.value,
        "learned " + std::to_string(es.users_learned) + ", exact " + std::to_string(es.users_matching), sp);
    ExposureTimeResult et = leak_exposure_time(rp, w);
    set(PrivacyColumn::PatientIdentity, et.value,
        "slots " + std::to_string(et.correct) + "/" + std::to_string(et.recovered) +
            (et.probe_items ? ", probe " + std::to_string(et.probe_queries) + " queries over " +
                                  std::to_string(et.probe_items) + " items"
                            : ""),
        sp);

    auto vsp = make_view(rp, spsv);
    auto vup = make_view(rp, upsv);
    auto vsa = make_view(ra, sasv);
    auto vua = make_view(ra, uasv);
    auto t_all_sp = leak_movement_traces(rp, w, vsp, TraceScope::NonPatients);
    auto t_all_sa = leak_movement_traces(ra, w, vsa, TraceScope::NonPatients);
    auto t_pat_up = leak_movement_traces(rp, w, vup, TraceScope::Patients);
    auto t_pat_ua = leak_movement_traces(ra, w, vua, TraceScope::Patients);
    auto t_pat_sp = leak_movement_traces(rp, w, vsp, TraceScope::Patients);
    auto t_pat_sa = leak_movement_traces(ra, w, vsa, TraceScope::Patients);
    set(PrivacyColumn::TraceAllServerPsv, t_all_sp.value, trace_detail(t_all_sp), sp);
    set(PrivacyColumn::TraceAllServerAsv, t_all_sa.value, trace_detail(t_all_sa), sa);
    set(PrivacyColumn::TracePatientsUser, worst(t_pat_up.value, t_pat_ua.value),
        "psv " + trace_detail(t_pat_up) + "; asv " + trace_detail(t_pat_ua), sp + " + " + sa);
    set(PrivacyColumn::TracePatientsServerPsv, t_pat_sp.value, trace_detail(t_pat_sp), sp);
    set(PrivacyColumn::TracePatientsServerAsv, t_pat_sa.value, trace_detail(t_pat_sa), sa);

    InteractionResult in = leak_interactions(rp, w);
    auto edge = [&](PrivacyColumn c, EdgeKind k) {
        const EdgeScore& e = in.edges[k];
        set(c, e.value,
            "edges " + std::to_string(e.correct) + "/" + std::to_string(e.inferred) + ", recall " + fmt(e.recall), sp);
    };
    edge(PrivacyColumn::PatientPatient, EdgeKind::PatientPatient);
    edge(PrivacyColumn::PatientUser, EdgeKind::PatientUser);
    edge(PrivacyColumn::UserUser, EdgeKind::UserUserWithPatient);
    edge(PrivacyColumn::NoExposureUserUser, EdgeKind::UserUserNoExposure);
    set(PrivacyColumn::UserSidePatientPatient, leak_user_side_copatients(rp), "", sp);
}

void score_resiliency(ProtocolScore& row, const AttackSetup& setup) {
    auto config_for = [](AttackId a) {
        AdversaryConfig cfg;
        cfg.kind = required_kind(a);
        if (is_surveillance(cfg.kind)) cfg.sniffer_cells = {0};
        cfg.attack = a;
        return cfg;
    };
    for (AttackId a : resiliency_columns()) {
        AttackOutcome o = run_attack(a, config_for(a), row.protocol, setup);
        ResilienceCell c;
        c.false_exposures = o.false_exposures;
        c.flagged = o.server.flagged.size();
        c.source = std::string("attack/") + to_string(a) + " seed=" + std::to_string(setup.seed);
        if (o.false_exposures == 0) c.value = Resilience::Resists;
        else if (!o.server.flagged.empty()) c.value = Resilience::Flagged;
        else c.value = Resilience::Vulnerable;
        row.resiliency[a] = c;
        if (!row.rate_limit_applicable) row.rate_limit_applicable = o.server.applicable;
    }
    AttackOutcome ex = run_attack(AttackId::ResourceExhaustion, config_for(AttackId::ResourceExhaustion), row.protocol,
                                  setup);
    row.exhaustion_truncated = ex.report_truncated;
}

void score_costs(ProtocolScore& row, const Scenario& base) {
    auto measure = [&](double s, double P) {
        Scenario sc = base;
        sc.protocol = row.protocol;
        sc.contacts_per_user_per_day = s;
        sc.new_patients_per_day = P;
        SimulationResult r = run(sc);
        for (const auto& f : r.failures) row.failures.push_back("cost: " + f);
        return CostRun{s, P, cost_ledger(r)};
    };
    const double s = base.contacts_per_user_per_day;
    const double P = base.new_patients_per_day;
    row.costs = {measure(s, P), measure(s, 2 * P), measure(2 * s, P)};

    auto check = [&](std::string name, double measured, double expected) {
        bool ok = std::fabs(measured - expected) <= 1e-9 * std::max(1.0, std::fabs(expected));
        row.cost_checks.push_back(CostCheck{std::move(name), measured, expected, ok});
    };
    for (const auto& cr : row.costs) {
        CostFormula f = expected_cost(row.protocol, cr.s, cr.P);
        std::string at = " s=" + fmt(cr.s, 0) + " P=" + fmt(cr.P, 0);
        if (f.upload) check("user-upload" + at, cr.ledger.user_upload, static_cast<double>(*f.upload));
        if (f.download) check("user-download" + at, cr.ledger.user_download, static_cast<double>(*f.download));
        if (f.patient) check("patient-report" + at, cr.ledger.patient_tokens, static_cast<double>(*f.patient));
    }
    // shape: ratios under doubled P or doubled s
    auto ratio = [](double a, double b) { return b > 0 ? a / b : 0.0; };
    auto shape = [&](std::string name, double r) {
        row.cost_checks.push_back(CostCheck{std::move(name), r, 2.0, std::fabs(r - 2.0) <= 0.02});
    };
    const CostLedger& b = row.costs[0].ledger;
    const CostLedger& dp = row.costs[1].ledger;
    const CostLedger& ds = row.costs[2].ledger;
    ProtocolSpec spec = instantiate(row.protocol);
    if (spec.matcher == MatcherKind::User) {
        shape("user-download x2 with P", ratio(dp.user_download, b.user_download));
        shape("user-comparisons x2 with P", ratio(dp.user_comparisons, b.user_comparisons));
    }
    if (b.server_comparisons > 0)
        shape("server-comparisons x2 with P",
              ratio(static_cast<double>(dp.server_comparisons), static_cast<double>(b.server_comparisons)));
    if (row.protocol == ProtocolId::AgreedServer) shape("user-upload x2 with s", ratio(ds.user_upload, b.user_upload));
}

ProtocolScore score_protocol(ProtocolId id, const SuiteConfig& suite) {
    ProtocolScore row;
    row.protocol = id;
    score_privacy(row, suite.privacy);
    score_resiliency(row, suite.attacks);
    score_costs(row, suite.costs);
    row.flaws = flaw_flags(row);
    return row;
}

Scorecard build_scorecard(const SuiteConfig& suite) {
    Scorecard sc;
    const auto& ids = suite.only.empty() ? all_protocols() : suite.only;
    for (ProtocolId id : ids) sc.rows.push_back(score_protocol(id, suite));
    return sc;
}

std::set<std::string> flaw_flags(const ProtocolScore& row) {
    std::set<std::string> f;
    auto cell = [&](PrivacyColumn c) -> std::optional<LeakValue> {
        auto it = row.privacy.find(c);
        if (it == row.privacy.end() || it->second.value == LeakValue::Unknown) return std::nullopt;
        return it->second.value;
    };
    auto leaks_flag = [&](PrivacyColumn c, const std::string& name) {
        auto v = cell(c);
        if (!v) f.insert("unknown:" + name);
        else if (*v == LeakValue::Leaks) f.insert(name);
    };
    leaks_flag(PrivacyColumn::NoExposureUserUser, "1");
    leaks_flag(PrivacyColumn::TraceAllServerPsv, "2a");
    leaks_flag(PrivacyColumn::TracePatientsServerPsv, "2b");
    leaks_flag(PrivacyColumn::TraceAllServerAsv, "2c");
    if (auto v = cell(PrivacyColumn::PatientIdentity); !v) f.insert("unknown:3");
    else if (*v == LeakValue::Leaks) f.insert("3");
    else if (*v == LeakValue::Partial) f.insert("3-partial");

    auto db = row.resiliency.find(AttackId::DriveByEavesdrop);
    auto hpb = row.resiliency.find(AttackId::HighPowerBroadcast);
    if (db == row.resiliency.end() || hpb == row.resiliency.end() || !row.rate_limit_applicable ||
        db->second.value == Resilience::Unknown || hpb->second.value == Resilience::Unknown) {
        f.insert("unknown:4");
    } else if ((db->second.value == Resilience::Vulnerable || hpb->second.value == Resilience::Vulnerable) &&
               !*row.rate_limit_applicable) {
        f.insert("4");
    }

    if (row.costs.size() < 2) {
        f.insert("unknown:5a");
    } else {
        double base = row.costs[0].ledger.user_download;
        double doubled = row.costs[1].ledger.user_download;
        if (base > 0 && doubled / base >= 1.9) f.insert("5a");
    }
    // heavy interactive cryptography per matching round
    if (row.protocol == ProtocolId::SentInteractive || row.protocol == ProtocolId::ReceivedInteractive ||
        row.protocol == ProtocolId::AgreedUser)
        f.insert("5b");
    return f;
}

// ---------------------------------------------------------------- expected matrices

std::filesystem::path default_data_dir() {
    if (const char* env = std::getenv("PCT_DATA_DIR"); env && *env) return env;
    return PCT_DEFAULT_DATA_DIR;
}

namespace {

using nlohmann::json;

json read_json(const std::filesystem::path& p) {
    std::ifstream in(p);
    if (!in) throw MatrixLoadError("cannot open " + p.string());
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        throw MatrixLoadError(p.string() + ": " + e.what());
    }
}

ProtocolId protocol_key(const std::filesystem::path& p, const std::string& name) {
    try {
        return protocol_from_name(name);
    } catch (const std::invalid_argument&) {
        throw MatrixLoadError(p.string() + ": unknown protocol '" + name + "'");
    }
}

template <class Col, class Val, class ColFn, class ValFn>
std::map<ProtocolId, std::map<Col, Val>> load_grid(const std::filesystem::path& p, ColFn col_of, ValFn val_of) {
    json j = read_json(p);
    if (!j.is_object() || !j.contains("columns") || !j.contains("rows") || !j["columns"].is_array() ||
        !j["rows"].is_object())
        throw MatrixLoadError(p.string() + ": expected an object with 'columns' and 'rows'");
    std::vector<Col> cols;
    for (const auto& c : j["columns"]) {
        if (!c.is_string()) throw MatrixLoadError(p.string() + ": column names must be strings");
        try {
            cols.push_back(col_of(c.template get<std::string>()));
        } catch (const std::invalid_argument& e) {
            throw MatrixLoadError(p.string() + ": " + e.what());
        }
    }
    std::map<ProtocolId, std::map<Col, Val>> out;
    for (const auto& [name, cells] : j["rows"].items()) {
        ProtocolId id = protocol_key(p, name);
        if (!cells.is_array() || cells.size() != cols.size())
            throw MatrixLoadError(p.string() + ": row '" + name + "' must have " + std::to_string(cols.size()) +
                                  " cells");
        for (std::size_t i = 0; i < cols.size(); ++i) {
            if (!cells[i].is_string()) throw MatrixLoadError(p.string() + ": row '" + name + "': cells are strings");
            try {
                out[id][cols[i]] = val_of(cells[i].template get<std::string>());
            } catch (const std::invalid_argument& e) {
                throw MatrixLoadError(p.string() + ": row '" + name + "': " + e.what());
            }
        }
    }
    return out;
}

}  // namespace

ExpectedMatrices load_expected(const std::filesystem::path& dir) {
    ExpectedMatrices m;
    m.privacy = load_grid<PrivacyColumn, LeakValue>(dir / "privacy.json", privacy_column_from_name, leak_from_symbol);
    m.resiliency = load_grid<AttackId, Resilience>(dir / "resiliency.json", attack_from_string, resilience_from_symbol);

    auto p = dir / "flaws.json";
    json j = read_json(p);
    if (!j.is_object() || !j.contains("rows") || !j["rows"].is_object())
        throw MatrixLoadError(p.string() + ": expected an object with 'rows'");
    for (const auto& [name, flags] : j["rows"].items()) {
        ProtocolId id = protocol_key(p, name);
        if (!flags.is_array()) throw MatrixLoadError(p.string() + ": row '" + name + "' must be an array");
        auto& set = m.flaws[id];
        for (const auto& f : flags) {
            if (!f.is_string() || !kFlagNames.count(f.get<std::string>()))
                throw MatrixLoadError(p.string() + ": row '" + name + "': bad flag " + f.dump());
            set.insert(f.get<std::string>());
        }
    }
    return m;
}

ExpectedMatrices expected_from_scorecard(const Scorecard& sc) {
    ExpectedMatrices m;
    for (const auto& row : sc.rows) {
        for (const auto& [c, cell] : row.privacy) m.privacy[row.protocol][c] = cell.value;
        for (const auto& [a, cell] : row.resiliency) m.resiliency[row.protocol][a] = cell.value;
        m.flaws[row.protocol] = row.flaws;
    }
    return m;
}

std::string flags_string(const std::set<std::string>& flags) {
    std::string s;
    for (const auto& f : flags) s += (s.empty() ? "" : " ") + f;
    return s.empty() ? "none" : s;
}

std::vector<DiffEntry> scorecard_diff(const Scorecard& sc, const ExpectedMatrices& expected) {
    std::vector<DiffEntry> diff;
    for (const auto& row : sc.rows) {
        if (auto it = expected.privacy.find(row.protocol); it != expected.privacy.end())
            for (const auto& [c, want] : it->second) {
                auto got = row.privacy.find(c);
                LeakValue v = got == row.privacy.end() ? LeakValue::Unknown : got->second.value;
                if (v != want) diff.push_back({"privacy", row.protocol, column_name(c), symbol(want), symbol(v)});
            }
        if (auto it = expected.resiliency.find(row.protocol); it != expected.resiliency.end())
            for (const auto& [a, want] : it->second) {
                auto got = row.resiliency.find(a);
                Resilience v = got == row.resiliency.end() ? Resilience::Unknown : got->second.value;
                if (v != want) diff.push_back({"resiliency", row.protocol, to_string(a), symbol(want), symbol(v)});
            }
        if (auto it = expected.flaws.find(row.protocol); it != expected.flaws.end() && it->second != row.flaws)
            diff.push_back({"flaws", row.protocol, "flags", flags_string(it->second), flags_string(row.flaws)});
    }
    return diff;
}

// ---------------------------------------------------------------- output

namespace {

std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) out += c == '"' ? std::string("\"\"") : std::string(1, c);
    return out + "\"";
}

std::size_t display_width(const std::string& s) {
    std::size_t w = 0;
    for (unsigned char c : s)
        if ((c & 0xC0) != 0x80) ++w;
    return w;
}

std::string pad(const std::string& s, std::size_t w) {
    std::size_t d = display_width(s);
    return s + std::string(w > d ? w - d : 0, ' ');
}

}  // namespace

std::string scorecard_csv(const Scorecard& sc) {
    std::ostringstream os;
    os << "matrix,protocol,column,value,detail,source\n";
    for (const auto& row : sc.rows) {
        const char* p = protocol_name(row.protocol);
        for (PrivacyColumn c : privacy_columns()) {
            auto it = row.privacy.find(c);
            if (it == row.privacy.end()) continue;
            os << "privacy," << p << ',' << column_name(c) << ',' << to_string(it->second.value) << ','
               << csv_field(it->second.detail) << ',' << csv_field(it->second.source) << '\n';
        }
        for (AttackId a : resiliency_columns()) {
            auto it = row.resiliency.find(a);
            if (it == row.resiliency.end()) continue;
            const auto& c = it->second;
            os << "resiliency," << p << ',' << to_string(a) << ',' << symbol(c.value) << ','
               << csv_field("false exposures " + std::to_string(c.false_exposures) + ", flagged " +
                            std::to_string(c.flagged))
               << ',' << csv_field(c.source) << '\n';
        }
        if (row.rate_limit_applicable)
            os << "resiliency," << p << ",server-rate-limit," << (*row.rate_limit_applicable ? "applicable" : "n/a")
               << ",,\n";
        os << "resiliency," << p << ",exhaustion-truncated," << (row.exhaustion_truncated ? "yes" : "no") << ",,\n";
        for (const auto& c : row.cost_checks)
            os << "cost," << p << ',' << csv_field(c.name) << ',' << (c.ok ? "ok" : "mismatch") << ','
               << csv_field("measured " + fmt(c.measured) + ", expected " + fmt(c.expected)) << ",cost\n";
        os << "flaws," << p << ",flags," << csv_field(flags_string(row.flaws)) << ",,\n";
    }
    return os.str();
}

std::string cost_csv(const Scorecard& sc) {
    std::ostringstream os;
    os << "protocol,s,P,day,users,user_upload,user_download,user_comparisons,user_exps,server_comparisons,"
          "server_exps,patients,patient_tokens\n";
    for (const auto& row : sc.rows)
        for (const auto& cr : row.costs) {
            const auto& l = cr.ledger;
            os << protocol_name(row.protocol) << ',' << fmt(cr.s, 0) << ',' << fmt(cr.P, 0) << ',' << l.day << ','
               << l.users_counted << ',' << fmt(l.user_upload) << ',' << fmt(l.user_download) << ','
               << fmt(l.user_comparisons) << ',' << fmt(l.user_exps) << ',' << l.server_comparisons << ','
               << l.server_exps << ',' << l.patients << ',' << fmt(l.patient_tokens) << '\n';
        }
    return os.str();
}

std::string diff_csv(const std::vector<DiffEntry>& diff) {
    std::ostringstream os;
    os << "matrix,protocol,column,expected,computed\n";
    for (const auto& d : diff)
        os << d.matrix << ',' << protocol_name(d.protocol) << ',' << d.column << ',' << csv_field(d.expected) << ','
           << csv_field(d.computed) << '\n';
    return os.str();
}

std::string scorecard_table(const Scorecard& sc, const std::vector<DiffEntry>* diff) {
    auto differs = [&](const std::string& matrix, ProtocolId p, const std::string& col) {
        if (!diff) return false;
        for (const auto& d : *diff)
            if (d.matrix == matrix && d.protocol == p && d.column == col) return true;
        return false;
    };
    std::size_t name_w = 10;
    for (const auto& row : sc.rows) name_w = std::max(name_w, std::string(protocol_name(row.protocol)).size());
    std::ostringstream os;

    os << "Privacy matrix (○ leaks, ⦿ partial, ● protected, - n/a, * differs from expected)\n";
    os << pad("protocol", name_w + 2);
    for (const char* h : kShort) os << pad(h, 8);
    os << '\n';
    for (const auto& row : sc.rows) {
        os << pad(protocol_name(row.protocol), name_w + 2);
        for (PrivacyColumn c : privacy_columns()) {
            auto it = row.privacy.find(c);
            std::string v = it == row.privacy.end() ? "?" : symbol(it->second.value);
            if (differs("privacy", row.protocol, column_name(c))) v += "*";
            os << pad(v, 8);
        }
        os << '\n';
    }

    os << "\nResiliency matrix (● no false exposure, ◐ server flags the attacker, ○ vulnerable)\n";
    os << pad("protocol", name_w + 2);
    for (AttackId a : resiliency_columns()) os << pad(to_string(a), 21);
    os << '\n';
    for (const auto& row : sc.rows) {
        os << pad(protocol_name(row.protocol), name_w + 2);
        for (AttackId a : resiliency_columns()) {
            auto it = row.resiliency.find(a);
            std::string v = it == row.resiliency.end() ? "?" : symbol(it->second.value);
            if (differs("resiliency", row.protocol, to_string(a))) v += "*";
            os << pad(v, 21);
        }
        os << '\n';
    }

    os << "\nDesign flaws\n";
    for (const auto& row : sc.rows) {
        os << pad(protocol_name(row.protocol), name_w + 2) << flags_string(row.flaws);
        if (differs("flaws", row.protocol, "flags")) os << "  *";
        os << '\n';
    }

    os << "\nDaily cost at base scenario (token units; mean per never-diagnosed user)\n";
    os << pad("protocol", name_w + 2) << pad("upload", 10) << pad("download", 10) << pad("patient", 10)
       << "checks\n";
    for (const auto& row : sc.rows) {
        if (row.costs.empty()) continue;
        const auto& l = row.costs[0].ledger;
        std::size_t ok = 0;
        for (const auto& c : row.cost_checks) ok += c.ok;
        os << pad(protocol_name(row.protocol), name_w + 2) << pad(fmt(l.user_upload, 0), 10)
           << pad(fmt(l.user_download, 0), 10) << pad(fmt(l.patient_tokens, 0), 10) << ok << '/'
           << row.cost_checks.size() << '\n';
    }
    if (diff) os << "\nDiff cells: " << diff->size() << '\n';
    return os.str();
}

}  // namespace pct
