#include "pct/cli.hpp"

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>

#include <CLI11.hpp>

#include "pct/analysis.hpp"
#include "pct/protocols.hpp"
#include "pct/scenario_io.hpp"

namespace pct {

namespace {

struct Formats {
    bool csv = true;
    bool table = true;
};

class UsageError : public std::runtime_error {
    using std::runtime_error::runtime_error;
};

Formats parse_formats(const std::string& spec) {
    Formats f{false, false};
    std::stringstream ss(spec);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (item == "csv") f.csv = true;
        else if (item == "table") f.table = true;
        else throw UsageError("unknown format '" + item + "' (csv, table)");
    }
    if (!f.csv && !f.table) throw UsageError("--format needs csv and/or table");
    return f;
}

std::filesystem::path output_dir(const std::string& flag) {
    if (!flag.empty()) return flag;
    if (const char* env = std::getenv("PCT_OUT_DIR"); env && *env) return env;
    return "pct-out";
}

void prepare_dir(const std::filesystem::path& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec || !std::filesystem::is_directory(dir)) throw UsageError("cannot create output directory " + dir.string());
    std::ofstream probe(dir / ".write-test");
    if (!probe) throw UsageError("output directory not writable: " + dir.string());
    probe.close();
    std::filesystem::remove(dir / ".write-test", ec);
}

void write_file(const std::filesystem::path& p, const std::string& text) {
    std::ofstream out(p, std::ios::binary);
    out << text;
    if (!out) throw UsageError("cannot write " + p.string());
}

std::uint64_t derive_seed(std::uint64_t master, std::uint64_t cell) {
    // splitmix64 step
    std::uint64_t z = master + 0x9e3779b97f4a7c15ULL * (cell + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

std::vector<ProtocolId> parse_protocol_list(const std::string& spec) {
    std::vector<ProtocolId> ids;
    std::stringstream ss(spec);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (item.empty()) continue;
        try {
            ids.push_back(protocol_from_name(item));
        } catch (const std::invalid_argument& e) {
            throw UsageError(e.what());
        }
    }
    return ids;
}

// ---------------------------------------------------------------- run

struct RunOutputs {
    std::string results, costs, leakage, attacks, world, summary;
    bool failed = false;
};

std::string fixed(double v, int prec = 4) {
    std::ostringstream os;
    os << std::fixed << std::setprecision(prec) << v;
    return os.str();
}

RunOutputs execute_run(const Scenario& sc) {
    RunOutputs o;
    WorldTrace w = generate_world(sc);
    GroundTruthExposures truth = ground_truth_oracle(w, sc.params);
    SimulationResult r = run(sc, w);
    const char* pname = protocol_name(sc.protocol);
    o.world = w.to_csv();

    std::map<UserId, int> diag;
    for (const auto& d : r.diagnoses) diag[d.user] = d.day;
    std::ostringstream res;
    res << "user,adopter,diagnosis_day,oracle_minutes,notified_minutes,oracle_exposed,detected\n";
    for (int u = 0; u < r.num_users; ++u) {
        auto t = truth.users.find(u);
        int om = t == truth.users.end() ? 0 : t->second.total;
        bool oe = t != truth.users.end() && t->second.exposed;
        res << u << ',' << (r.adopters[static_cast<std::size_t>(u)] ? 1 : 0) << ','
            << (diag.count(u) ? std::to_string(diag[u]) : "") << ',' << om << ',' << r.risk[static_cast<std::size_t>(u)]
            << ',' << (oe ? 1 : 0) << ',' << (r.detected.count(u) ? 1 : 0) << '\n';
    }
    o.results = res.str();

    std::ostringstream cs;
    cs << "day,party,id,upload_tokens,download_tokens,upload_bytes,download_bytes,comparisons,exps\n";
    for (std::size_t d = 0; d < r.daily_costs.size(); ++d) {
        const CostMeter& m = r.daily_costs[d];
        for (const auto& [u, c] : m.users)
            cs << d << ",user," << u << ',' << c.upload_tokens << ',' << c.download_tokens << ',' << c.upload_bytes
               << ',' << c.download_bytes << ',' << c.comparisons << ',' << c.exps << '\n';
        for (const auto& [p, t] : m.patient_report_tokens) {
            auto b = m.patient_report_bytes.find(p);
            cs << d << ",patient," << p << ',' << t << ",0," << (b == m.patient_report_bytes.end() ? 0 : b->second)
               << ",0,0,0\n";
        }
        cs << d << ",server,-1,0,0,0,0," << m.server_comparisons << ',' << m.server_exps << '\n';
    }
    o.costs = cs.str();

    std::ostringstream lk;
    lk << "protocol,adversary,metric,value,detail\n";
    auto row = [&](const AdversaryConfig& a, const std::string& metric, LeakValue v, const std::string& detail) {
        lk << pname << ',' << to_string(a.kind) << ',' << metric << ',' << to_string(v) << ',' << detail << '\n';
    };
    auto trace = [&](const AdversaryConfig& a, const AdversaryView& view, TraceScope scope, const char* metric) {
        TraceResult t = leak_movement_traces(r, w, view, scope);
        row(a, metric, t.value, std::to_string(t.linked) + "/" + std::to_string(t.targets));
    };
    std::ostringstream at;
    at << "protocol,attack,adversary,false_exposures,rate_limit,flagged,suppression_alerts,truncated\n";
    for (const auto& a : sc.adversaries) {
        AdversaryView view = make_view(r, a);
        if (is_server_side(a.kind)) {
            ExposureStatusResult es = leak_exposure_status(r);
            row(a, "exposure-status", es.value,
                std::to_string(es.users_matching) + "/" + std::to_string(es.users_learned));
            InteractionResult in = leak_interactions(r, w);
            for (const auto& [k, e] : in.edges)
                row(a, std::string("interaction-") + to_string(k), e.value,
                    std::to_string(e.correct) + "/" + std::to_string(e.inferred));
            if (is_surveillance(a.kind)) {
                trace(a, view, TraceScope::NonPatients, "trace-non-patients");
                trace(a, view, TraceScope::Patients, "trace-patients");
            }
        } else {
            ExposureTimeResult et = leak_exposure_time(r, w);
            row(a, "exposure-time", et.value, std::to_string(et.correct) + "/" + std::to_string(et.recovered));
            row(a, "user-side-patient-patient", leak_user_side_copatients(r), "");
            if (is_surveillance(a.kind)) trace(a, view, TraceScope::Patients, "trace-patients");
        }
        if (a.attack) {
            AttackSetup setup;
            setup.seed = sc.rng_seed;
            setup.group = sc.group_kind;
            setup.limits = sc.limits;
            setup.user_limit = sc.limits.user_limit_enabled;
            AttackOutcome out = run_attack(*a.attack, a, sc.protocol, setup);
            at << pname << ',' << to_string(*a.attack) << ',' << to_string(a.kind) << ',' << out.false_exposures << ','
               << (out.server.applicable ? "applicable" : "n/a") << ',' << out.server.flagged.size() << ','
               << out.suppression.alerts << ',' << (out.report_truncated ? 1 : 0) << '\n';
        }
    }
    o.leakage = lk.str();
    o.attacks = at.str();

    std::set<UserId> exposed = truth.exposed_set();
    std::ostringstream sm;
    sm << "protocol          " << pname << '\n'
       << "users             " << r.num_users << " (" << std::count(r.adopters.begin(), r.adopters.end(), true)
       << " adopters)\n"
       << "days              " << w.num_days << '\n'
       << "encounters        " << w.encounters.size() << '\n'
       << "diagnoses         " << r.diagnoses.size() << '\n'
       << "oracle exposed    " << exposed.size() << '\n'
       << "detected          " << r.detected.size() << '\n'
       << "detection == oracle  " << (exposed == r.detected ? "yes" : "no") << '\n'
       << "minutes fraction  "
       << fixed(truth.total_minutes() ? static_cast<double>(r.risk_minutes()) / static_cast<double>(truth.total_minutes()) : 0)
       << '\n';
    if (!r.failures.empty()) {
        sm << "failures:\n";
        for (const auto& f : r.failures) sm << "  " << f << '\n';
        o.failed = true;
    }
    sm << "\nleakage\n" << o.leakage << "\nattacks\n" << o.attacks;
    o.summary = sm.str();
    return o;
}

int cmd_run(const std::string& scenario_path, const std::string& protocol, const std::optional<std::uint64_t>& seed,
            const std::string& out_flag, const std::string& format, std::ostream& out, std::ostream& err) {
    Formats f = parse_formats(format);
    std::optional<ProtocolId> override_id;
    if (!protocol.empty()) {
        try {
            override_id = protocol_from_name(protocol);
        } catch (const std::invalid_argument& e) {
            throw UsageError(e.what());
        }
    }
    Scenario sc = load_scenario(scenario_path);
    if (override_id) sc.protocol = *override_id;
    if (seed) sc.rng_seed = *seed;
    try {
        sc.validate();
    } catch (const std::invalid_argument& e) {
        throw UsageError(e.what());
    }
    auto dir = output_dir(out_flag);
    prepare_dir(dir);

    RunOutputs o;
    try {
        o = execute_run(sc);
    } catch (const std::exception& e) {
        err << "simulation failed: " << e.what() << '\n';
        return 1;
    }
    if (f.csv) {
        write_file(dir / "results.csv", o.results);
        write_file(dir / "costs.csv", o.costs);
        write_file(dir / "leakage.csv", o.leakage);
        write_file(dir / "attacks.csv", o.attacks);
        write_file(dir / "world.csv", o.world);
    }
    if (f.table) {
        write_file(dir / "summary.txt", o.summary);
        out << o.summary;
    }
    if (o.failed) {
        err << "simulation reported failures\n";
        return 1;
    }
    return 0;
}

// ---------------------------------------------------------------- scorecard

int cmd_scorecard(const std::string& suite_flag, const std::string& expected_flag, const std::string& only,
                  const std::optional<std::uint64_t>& seed, const std::string& out_flag, const std::string& format,
                  std::ostream& out, std::ostream& err) {
    Formats f = parse_formats(format);
    std::vector<ProtocolId> ids = parse_protocol_list(only);
    std::filesystem::path data = default_data_dir();
    std::filesystem::path suite_dir = suite_flag.empty() ? data / "suite" : std::filesystem::path(suite_flag);
    std::filesystem::path expected_dir = expected_flag.empty() ? data / "expected" : std::filesystem::path(expected_flag);

    SuiteConfig suite = load_suite(suite_dir);
    suite.only = ids;
    if (seed) {
        suite.privacy.rng_seed = derive_seed(*seed, 0);
        suite.attacks.seed = derive_seed(*seed, 1);
        suite.costs.rng_seed = derive_seed(*seed, 2);
    }
    ExpectedMatrices expected;
    try {
        expected = load_expected(expected_dir);
    } catch (const MatrixLoadError& e) {
        err << "expected matrices: " << e.what() << '\n';
        return 2;
    }
    auto dir = output_dir(out_flag);
    prepare_dir(dir);

    Scorecard sc;
    std::vector<std::string> failures;
    for (ProtocolId id : ids.empty() ? all_protocols() : ids) {
        try {
            sc.rows.push_back(score_protocol(id, suite));
            for (const auto& m : sc.rows.back().failures) failures.push_back(std::string(protocol_name(id)) + ": " + m);
        } catch (const std::exception& e) {
            failures.push_back(std::string(protocol_name(id)) + ": " + e.what());
        }
    }
    std::vector<DiffEntry> diff = scorecard_diff(sc, expected);
    if (f.csv) {
        write_file(dir / "scorecard.csv", scorecard_csv(sc));
        write_file(dir / "cost_ledger.csv", cost_csv(sc));
        write_file(dir / "diff.csv", diff_csv(diff));
    }
    if (f.table) {
        std::string t = scorecard_table(sc, &diff);
        write_file(dir / "scorecard.txt", t);
        out << t;
    }
    for (const auto& d : diff)
        err << "diff " << d.matrix << ' ' << protocol_name(d.protocol) << ' ' << d.column << ": expected "
            << d.expected << ", computed " << d.computed << '\n';
    for (const auto& m : failures) err << "failed: " << m << '\n';
    return (diff.empty() && failures.empty()) ? 0 : 1;
}

}  // namespace

int cli_main(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Deterministic simulator for proximity contact-tracing protocols"};
    app.require_subcommand(1);

    std::string scenario, protocol, out_dir, format = "csv,table";
    std::uint64_t seed = 0;
    auto* run_cmd = app.add_subcommand("run", "Run one scenario and write result CSVs");
    run_cmd->add_option("--scenario", scenario, "Scenario JSON file")->required();
    run_cmd->add_option("--protocol", protocol, "Override the scenario's protocol");
    auto* run_seed = run_cmd->add_option("--seed", seed, "Override the scenario's seed");
    run_cmd->add_option("--out", out_dir, "Output directory (default $PCT_OUT_DIR or ./pct-out)");
    run_cmd->add_option("--format", format, "csv, table or csv,table");

    std::string suite, expected, only;
    auto* sc_cmd = app.add_subcommand("scorecard", "Run the full suite and diff against the expected matrices");
    sc_cmd->add_option("--scenario", suite, "Suite directory (privacy.json, attacks.json, costs.json)");
    sc_cmd->add_option("--expected", expected, "Directory with privacy.json, resiliency.json, flaws.json");
    sc_cmd->add_option("--only", only, "Comma-separated protocol names");
    auto* sc_seed = sc_cmd->add_option("--seed", seed, "Master seed; per-run seeds derive from it");
    sc_cmd->add_option("--out", out_dir, "Output directory (default $PCT_OUT_DIR or ./pct-out)");
    sc_cmd->add_option("--format", format, "csv, table or csv,table");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        out << app.help();
        return 0;
    } catch (const CLI::ParseError& e) {
        err << e.what() << '\n';
        return 2;
    }

    try {
        if (run_cmd->parsed()) {
            std::optional<std::uint64_t> s;
            if (run_seed->count()) s = seed;
            return cmd_run(scenario, protocol, s, out_dir, format, out, err);
        }
        std::optional<std::uint64_t> s;
        if (sc_seed->count()) s = seed;
        return cmd_scorecard(suite, expected, only, s, out_dir, format, out, err);
    } catch (const ScenarioError& e) {
        err << e.what() << '\n';
        return 2;
    } catch (const UsageError& e) {
        err << e.what() << '\n';
        return 2;
    }
}

}  // namespace pct
