#include "pct/scenario_io.hpp"

#include <fstream>
#include <sstream>

#include "pct/protocols.hpp"

namespace pct {

using nlohmann::json;

ScenarioError::ScenarioError(const std::string& origin, int l, int c, const std::string& what)
    : std::runtime_error(origin + (l > 0 ? ":" + std::to_string(l) + ":" + std::to_string(c) : std::string()) + ": " +
                         what),
      line(l),
      column(c) {}

namespace {

std::pair<int, int> line_col(const std::string& text, std::size_t offset) {
    int line = 1, col = 1;
    for (std::size_t i = 0; i < offset && i < text.size(); ++i) {
        if (text[i] == '\n') {
            ++line;
            col = 1;
        } else {
            ++col;
        }
    }
    return {line, col};
}

// Best-effort position of a value: each object key on the path is searched after the previous one.
std::pair<int, int> locate(const std::string& text, const std::vector<std::string>& path) {
    std::size_t pos = 0;
    bool found = false;
    for (const auto& key : path) {
        if (!key.empty() && key.front() == '[') continue;
        auto at = text.find("\"" + key + "\"", pos);
        if (at == std::string::npos) break;
        pos = at;
        found = true;
    }
    return found ? line_col(text, pos) : std::make_pair(0, 0);
}

struct Reader {
    const std::string& text;
    const std::string& origin;
    std::vector<std::string> path;

    [[noreturn]] void fail(const std::string& msg) const {
        std::string where;
        for (const auto& p : path) where += (p.front() == '[' ? "" : ".") + p;
        auto [l, c] = locate(text, path);
        throw ScenarioError(origin, l, c, (where.empty() ? std::string() : where.substr(where.front() == '.') + ": ") + msg);
    }

    void only(const json& obj, std::initializer_list<const char*> keys) {
        if (!obj.is_object()) fail("expected an object");
        for (const auto& [k, v] : obj.items()) {
            bool ok = false;
            for (const char* a : keys) ok = ok || k == a;
            if (!ok) {
                path.push_back(k);
                fail("unknown field");
            }
        }
    }

    template <class F>
    void field(const json& obj, const char* key, F&& f) {
        auto it = obj.find(key);
        if (it == obj.end()) return;
        path.emplace_back(key);
        f(*it);
        path.pop_back();
    }

    template <class F>
    void each(const json& arr, F&& f) {
        if (!arr.is_array()) fail("expected an array");
        for (std::size_t i = 0; i < arr.size(); ++i) {
            path.push_back("[" + std::to_string(i) + "]");
            f(arr[i]);
            path.pop_back();
        }
    }

    int integer(const json& v) {
        if (!v.is_number_integer()) fail("expected an integer");
        return v.get<int>();
    }
    std::int64_t integer64(const json& v) {
        if (!v.is_number_integer()) fail("expected an integer");
        return v.get<std::int64_t>();
    }
    std::uint64_t unsigned64(const json& v) {
        if (!v.is_number_unsigned()) fail("expected a non-negative integer");
        return v.get<std::uint64_t>();
    }
    double number(const json& v) {
        if (!v.is_number()) fail("expected a number");
        return v.get<double>();
    }
    bool boolean(const json& v) {
        if (!v.is_boolean()) fail("expected true or false");
        return v.get<bool>();
    }
    std::string string(const json& v) {
        if (!v.is_string()) fail("expected a string");
        return v.get<std::string>();
    }
    template <class T, class F>
    T named(const json& v, F&& from) {
        std::string s = string(v);
        try {
            return from(s);
        } catch (const std::invalid_argument& e) {
            fail(e.what());
        }
    }
};

json parse_text(const std::string& text, const std::string& origin) {
    try {
        return json::parse(text);
    } catch (const json::parse_error& e) {
        auto [l, c] = line_col(text, e.byte > 0 ? e.byte - 1 : 0);
        std::string msg = e.what();
        if (auto p = msg.find("syntax error"); p != std::string::npos) msg = msg.substr(p);
        throw ScenarioError(origin, l, c, msg);
    }
}

Scenario read_scenario(Reader& r, const json& j) {
    r.only(j, {"protocol", "num_users", "num_days", "new_patients_per_day", "contacts_per_user_per_day",
               "adoption_rate", "loss_prob", "seed", "group", "mode", "num_cells", "gathering_min", "gathering_max",
               "diagnosis_start_day", "options", "durations", "params", "limits", "adversaries", "encounters",
               "diagnoses", "crowds", "households"});
    Scenario sc;
    r.field(j, "protocol", [&](const json& v) { sc.protocol = r.named<ProtocolId>(v, protocol_from_name); });
    r.field(j, "num_users", [&](const json& v) { sc.num_users = r.integer(v); });
    r.field(j, "num_days", [&](const json& v) { sc.num_days = r.integer(v); });
    r.field(j, "new_patients_per_day", [&](const json& v) { sc.new_patients_per_day = r.number(v); });
    r.field(j, "contacts_per_user_per_day", [&](const json& v) { sc.contacts_per_user_per_day = r.number(v); });
    r.field(j, "adoption_rate", [&](const json& v) { sc.adoption_rate = r.number(v); });
    r.field(j, "loss_prob", [&](const json& v) { sc.loss_prob = r.number(v); });
    r.field(j, "seed", [&](const json& v) { sc.rng_seed = r.unsigned64(v); });
    r.field(j, "group", [&](const json& v) { sc.group_kind = r.named<GroupKind>(v, group_kind_from_string); });
    r.field(j, "mode", [&](const json& v) { sc.mode = r.named<WorldMode>(v, world_mode_from_string); });
    r.field(j, "num_cells", [&](const json& v) { sc.num_cells = r.integer(v); });
    r.field(j, "gathering_min", [&](const json& v) { sc.gathering_min = r.integer(v); });
    r.field(j, "gathering_max", [&](const json& v) { sc.gathering_max = r.integer(v); });
    r.field(j, "diagnosis_start_day", [&](const json& v) { sc.diagnosis_start_day = r.integer(v); });
    r.field(j, "options", [&](const json& o) {
        r.only(o, {"cuckoo", "disable_dedup"});
        r.field(o, "cuckoo", [&](const json& v) { sc.options.cuckoo = r.boolean(v); });
        r.field(o, "disable_dedup", [&](const json& v) { sc.options.disable_dedup = r.boolean(v); });
    });
    r.field(j, "durations", [&](const json& o) {
        r.only(o, {"short", "mid", "long", "repeat_prob", "far_frac"});
        auto& d = sc.durations;
        r.field(o, "short", [&](const json& v) { d.short_frac = r.number(v); });
        r.field(o, "mid", [&](const json& v) { d.mid_frac = r.number(v); });
        r.field(o, "long", [&](const json& v) { d.long_frac = r.number(v); });
        r.field(o, "repeat_prob", [&](const json& v) { d.repeat_prob = r.number(v); });
        r.field(o, "far_frac", [&](const json& v) { d.far_frac = r.number(v); });
    });
    r.field(j, "params", [&](const json& o) {
        r.only(o, {"proximity_m", "min_session_minutes", "exposure_threshold_minutes", "retention_days",
                   "infectious_days", "cuckoo_fp_target"});
        auto& p = sc.params;
        r.field(o, "proximity_m", [&](const json& v) { p.proximity_m = r.number(v); });
        r.field(o, "min_session_minutes", [&](const json& v) { p.min_session_minutes = r.integer(v); });
        r.field(o, "exposure_threshold_minutes", [&](const json& v) { p.exposure_threshold_minutes = r.integer(v); });
        r.field(o, "retention_days", [&](const json& v) { p.retention_days = r.integer(v); });
        r.field(o, "infectious_days", [&](const json& v) { p.infectious_days = r.integer(v); });
        r.field(o, "cuckoo_fp_target", [&](const json& v) { p.cuckoo_fp_target = r.number(v); });
    });
    r.field(j, "limits", [&](const json& o) {
        r.only(o, {"per_patient_exposure_cap", "per_report_size_cap", "per_user_device_cap", "user_limit_enabled",
                   "max_report_tokens_per_day"});
        auto& l = sc.limits;
        r.field(o, "per_patient_exposure_cap", [&](const json& v) { l.per_patient_exposure_cap = r.integer(v); });
        r.field(o, "per_report_size_cap", [&](const json& v) { l.per_report_size_cap = r.integer(v); });
        r.field(o, "per_user_device_cap", [&](const json& v) { l.per_user_device_cap = r.integer(v); });
        r.field(o, "user_limit_enabled", [&](const json& v) { l.user_limit_enabled = r.boolean(v); });
        r.field(o, "max_report_tokens_per_day", [&](const json& v) { l.max_report_tokens_per_day = r.unsigned64(v); });
    });
    r.field(j, "adversaries", [&](const json& arr) {
        r.each(arr, [&](const json& o) {
            r.only(o, {"kind", "sniffer_cells", "colluders", "attack"});
            AdversaryConfig a;
            r.field(o, "kind", [&](const json& v) { a.kind = r.named<AdversaryKind>(v, adversary_kind_from_string); });
            r.field(o, "sniffer_cells",
                    [&](const json& v) { r.each(v, [&](const json& c) { a.sniffer_cells.insert(r.integer(c)); }); });
            r.field(o, "colluders",
                    [&](const json& v) { r.each(v, [&](const json& c) { a.colluders.insert(r.integer(c)); }); });
            r.field(o, "attack", [&](const json& v) { a.attack = r.named<AttackId>(v, attack_from_string); });
            if (!o.contains("kind")) r.fail("adversary needs a kind");
            try {
                a.validate();
            } catch (const std::invalid_argument& e) {
                r.fail(e.what());
            }
            sc.adversaries.push_back(a);
        });
    });
    r.field(j, "encounters", [&](const json& arr) {
        r.each(arr, [&](const json& o) {
            r.only(o, {"a", "b", "start_minute", "minutes", "distance", "cell"});
            Encounter e;
            r.field(o, "a", [&](const json& v) { e.a = r.integer(v); });
            r.field(o, "b", [&](const json& v) { e.b = r.integer(v); });
            r.field(o, "start_minute", [&](const json& v) { e.start_minute = r.integer64(v); });
            r.field(o, "minutes", [&](const json& v) { e.minutes = r.integer(v); });
            r.field(o, "distance", [&](const json& v) { e.distance = r.number(v); });
            r.field(o, "cell", [&](const json& v) { e.cell = r.integer(v); });
            sc.scripted_encounters.push_back(e);
        });
    });
    r.field(j, "diagnoses", [&](const json& arr) {
        r.each(arr, [&](const json& o) {
            r.only(o, {"user", "day"});
            Diagnosis d;
            r.field(o, "user", [&](const json& v) { d.user = r.integer(v); });
            r.field(o, "day", [&](const json& v) { d.day = r.integer(v); });
            sc.scripted_diagnoses.push_back(d);
        });
    });
    r.field(j, "crowds", [&](const json& arr) {
        r.each(arr, [&](const json& o) {
            r.only(o, {"user", "cell", "slot"});
            Presence p;
            r.field(o, "user", [&](const json& v) { p.user = r.integer(v); });
            r.field(o, "cell", [&](const json& v) { p.cell = r.integer(v); });
            r.field(o, "slot", [&](const json& v) { p.slot = r.integer64(v); });
            sc.crowds.push_back(p);
        });
    });
    r.field(j, "households", [&](const json& arr) {
        r.each(arr, [&](const json& o) {
            if (!o.is_array() || o.size() != 2) r.fail("household is a pair of user ids");
            sc.households.emplace_back(r.integer(o[0]), r.integer(o[1]));
        });
    });
    try {
        sc.validate();
    } catch (const std::invalid_argument& e) {
        r.fail(e.what());
    }
    return sc;
}

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ScenarioError(path.string(), 0, 0, "cannot open file");
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

}  // namespace

Scenario parse_scenario(const std::string& text, const std::string& origin) {
    json j = parse_text(text, origin);
    Reader r{text, origin, {}};
    return read_scenario(r, j);
}

Scenario load_scenario(const std::filesystem::path& path) { return parse_scenario(read_file(path), path.string()); }

AttackSetup parse_attack_setup(const std::string& text, const std::string& origin) {
    json j = parse_text(text, origin);
    Reader r{text, origin, {}};
    r.only(j, {"crowd", "colluders", "victims_per_colluder", "pooled_streams", "tunnel_crowd", "forged_minutes",
               "user_limit", "seed", "group"});
    AttackSetup s;
    r.field(j, "crowd", [&](const json& v) { s.crowd = r.integer(v); });
    r.field(j, "colluders", [&](const json& v) { s.colluders = r.integer(v); });
    r.field(j, "victims_per_colluder", [&](const json& v) { s.victims_per_colluder = r.integer(v); });
    r.field(j, "pooled_streams", [&](const json& v) { s.pooled_streams = r.integer(v); });
    r.field(j, "tunnel_crowd", [&](const json& v) { s.tunnel_crowd = r.integer(v); });
    r.field(j, "forged_minutes", [&](const json& v) { s.forged_minutes = r.integer(v); });
    r.field(j, "user_limit", [&](const json& v) { s.user_limit = r.boolean(v); });
    r.field(j, "seed", [&](const json& v) { s.seed = r.unsigned64(v); });
    r.field(j, "group", [&](const json& v) { s.group = r.named<GroupKind>(v, group_kind_from_string); });
    if (s.crowd < 1 || s.colluders < 1 || s.victims_per_colluder < 1 || s.pooled_streams < 1 || s.tunnel_crowd < 1 ||
        s.forged_minutes < 1)
        r.fail("attack sizes must be positive");
    return s;
}

SuiteConfig load_suite(const std::filesystem::path& dir) {
    SuiteConfig s;
    s.privacy = load_scenario(dir / "privacy.json");
    s.attacks = parse_attack_setup(read_file(dir / "attacks.json"), (dir / "attacks.json").string());
    s.costs = load_scenario(dir / "costs.json");
    return s;
}

json scenario_to_json(const Scenario& sc) {
    json j;
    j["protocol"] = protocol_name(sc.protocol);
    j["num_users"] = sc.num_users;
    j["num_days"] = sc.num_days;
    j["new_patients_per_day"] = sc.new_patients_per_day;
    j["contacts_per_user_per_day"] = sc.contacts_per_user_per_day;
    j["adoption_rate"] = sc.adoption_rate;
    j["loss_prob"] = sc.loss_prob;
    j["seed"] = sc.rng_seed;
    j["group"] = to_string(sc.group_kind);
    j["mode"] = to_string(sc.mode);
    j["num_cells"] = sc.num_cells;
    j["gathering_min"] = sc.gathering_min;
    j["gathering_max"] = sc.gathering_max;
    j["diagnosis_start_day"] = sc.diagnosis_start_day;
    j["options"] = {{"cuckoo", sc.options.cuckoo}, {"disable_dedup", sc.options.disable_dedup}};
    const auto& d = sc.durations;
    j["durations"] = {{"short", d.short_frac},
                      {"mid", d.mid_frac},
                      {"long", d.long_frac},
                      {"repeat_prob", d.repeat_prob},
                      {"far_frac", d.far_frac}};
    const auto& p = sc.params;
    j["params"] = {{"proximity_m", p.proximity_m},
                   {"min_session_minutes", p.min_session_minutes},
                   {"exposure_threshold_minutes", p.exposure_threshold_minutes},
                   {"retention_days", p.retention_days},
                   {"infectious_days", p.infectious_days},
                   {"cuckoo_fp_target", p.cuckoo_fp_target}};
    const auto& l = sc.limits;
    j["limits"] = {{"per_patient_exposure_cap", l.per_patient_exposure_cap},
                   {"per_report_size_cap", l.per_report_size_cap},
                   {"per_user_device_cap", l.per_user_device_cap},
                   {"user_limit_enabled", l.user_limit_enabled},
                   {"max_report_tokens_per_day", l.max_report_tokens_per_day}};
    j["adversaries"] = json::array();
    for (const auto& a : sc.adversaries) {
        json o = {{"kind", to_string(a.kind)}, {"sniffer_cells", a.sniffer_cells}, {"colluders", a.colluders}};
        if (a.attack) o["attack"] = to_string(*a.attack);
        j["adversaries"].push_back(o);
    }
    j["encounters"] = json::array();
    for (const auto& e : sc.scripted_encounters)
        j["encounters"].push_back({{"a", e.a},
                                   {"b", e.b},
                                   {"start_minute", e.start_minute},
                                   {"minutes", e.minutes},
                                   {"distance", e.distance},
                                   {"cell", e.cell}});
    j["diagnoses"] = json::array();
    for (const auto& x : sc.scripted_diagnoses) j["diagnoses"].push_back({{"user", x.user}, {"day", x.day}});
    j["crowds"] = json::array();
    for (const auto& c : sc.crowds) j["crowds"].push_back({{"user", c.user}, {"cell", c.cell}, {"slot", c.slot}});
    j["households"] = json::array();
    for (const auto& [a, b] : sc.households) j["households"].push_back({a, b});
    return j;
}

std::string scenario_to_text(const Scenario& sc) { return scenario_to_json(sc).dump(2) + "\n"; }

}  // namespace pct
