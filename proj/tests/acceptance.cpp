// Acceptance run: one PASS/FAIL line per criterion.
// Exit status: --strict fails on any FAIL; otherwise only on a FAIL outside the documented blocked set.

#include <chrono>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "pct/adversaries.hpp"
#include "pct/analysis.hpp"
#include "pct/cli.hpp"
#include "pct/cuckoo.hpp"
#include "pct/protocols.hpp"

using namespace pct;
namespace fs = std::filesystem;

namespace {

// Pinned tolerances.
constexpr double kMetcalfeTolerance = 0.05;
constexpr std::size_t kMetcalfeMinEncounters = 1000;
constexpr double kLossTolerance = 0.03;
constexpr double kLossAgreed = 0.81;
constexpr double kLossSentReceived = 0.90;
constexpr double kCuckooFprFactor = 2.0;

// Criteria whose expected matrices disagree with each other or with the honest model; see the notes.
const std::set<int> kBlocked = {3, 4};

struct Outcome {
    bool pass = false;
    std::string detail;
};

struct Criterion {
    int id;
    const char* name;
    std::function<Outcome()> check;
};

std::string fixed(double v, int digits = 3) {
    std::ostringstream os;
    os.setf(std::ios::fixed);
    os.precision(digits);
    os << v;
    return os.str();
}

const Scorecard& scorecard() {
    static const Scorecard sc = build_scorecard(default_suite());
    return sc;
}

const ExpectedMatrices& expected() {
    static const ExpectedMatrices e = load_expected(default_data_dir() / "expected");
    return e;
}

Outcome oracle_equivalence() {
    Outcome o{true, ""};
    double slowest = 0;
    for (ProtocolId id : all_protocols()) {
        Scenario sc;
        sc.protocol = id;
        sc.num_users = 50;
        sc.num_days = 20;
        sc.contacts_per_user_per_day = 10;
        sc.new_patients_per_day = 2;
        sc.loss_prob = 0;
        sc.adoption_rate = 1;
        auto t0 = std::chrono::steady_clock::now();
        WorldTrace w = generate_world(sc);
        std::set<UserId> truth = ground_truth_oracle(w, sc.params).exposed_set();
        SimulationResult r = run(sc, w);
        slowest = std::max(slowest, std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
        if (r.detected != truth || !r.failures.empty()) {
            o.pass = false;
            o.detail += std::string(protocol_name(id)) + " detected " + std::to_string(r.detected.size()) + " vs " +
                        std::to_string(truth.size()) + "; ";
        }
    }
    if (o.pass) o.detail = "11/11 protocols exact, slowest " + fixed(slowest, 1) + " s";
    return o;
}

Outcome resiliency_matrix() {
    int match = 0, cells = 0;
    std::string bad;
    for (const auto& row : scorecard().rows) {
        const auto& want = expected().resiliency.at(row.protocol);
        bool any_flag = false;
        for (AttackId a : resiliency_columns()) {
            ++cells;
            Resilience w = want.at(a);
            any_flag = any_flag || w == Resilience::Flagged;
            Resilience got = row.resiliency.count(a) ? row.resiliency.at(a).value : Resilience::Unknown;
            if (got == w) ++match;
            else bad += std::string(protocol_name(row.protocol)) + "/" + to_string(a) + " ";
        }
        if (any_flag && row.rate_limit_applicable != true) bad += std::string(protocol_name(row.protocol)) + "/limit ";
    }
    return {match == 77 && cells == 77 && bad.empty(), std::to_string(match) + "/" + std::to_string(cells) +
                                                           " cells" + (bad.empty() ? "" : "; mismatched " + bad)};
}

Outcome privacy_matrix() {
    int match = 0, cells = 0;
    std::string bad;
    for (const auto& row : scorecard().rows) {
        const auto& want = expected().privacy.at(row.protocol);
        for (PrivacyColumn c : privacy_columns()) {
            if (c == PrivacyColumn::UserSidePatientPatient) continue;  // extra column, not part of the matrix
            ++cells;
            LeakValue got = row.privacy.count(c) ? row.privacy.at(c).value : LeakValue::Unknown;
            if (got == want.at(c)) ++match;
            else
                bad += std::string(protocol_name(row.protocol)) + "/" + column_name(c) + " expected " +
                       symbol(want.at(c)) + " got " + symbol(got) + "; ";
        }
    }
    return {match == cells, std::to_string(match) + "/" + std::to_string(cells) + " cells" +
                                (bad.empty() ? "" : "; " + bad)};
}

Outcome flaw_matrix() {
    int match = 0;
    std::string bad;
    for (const auto& row : scorecard().rows) {
        const auto& want = expected().flaws.at(row.protocol);
        if (row.flaws == want) ++match;
        else
            bad += std::string(protocol_name(row.protocol)) + " expected {" + flags_string(want) + "} got {" +
                   flags_string(row.flaws) + "}; ";
    }
    int rows = static_cast<int>(scorecard().rows.size());
    return {match == rows, std::to_string(match) + "/" + std::to_string(rows) + " rows" +
                               (bad.empty() ? "" : "; " + bad)};
}

Outcome cost_formulas() {
    int ok = 0, total = 0;
    std::string bad;
    for (const auto& row : scorecard().rows)
        for (const auto& c : row.cost_checks) {
            ++total;
            if (c.ok) ++ok;
            else bad += std::string(protocol_name(row.protocol)) + "/" + c.name + " ";
        }
    auto base = [&](ProtocolId id) { return scorecard().find(id)->costs.at(0).ledger; };
    struct Spot {
        const char* what;
        double got, want;
    };
    std::vector<Spot> spots = {
        {"sent-user-basic download", base(ProtocolId::SentUserBasic).user_download, 4032},
        {"desire upload", base(ProtocolId::AgreedInteractive).user_upload, 280},
        {"s-dh upload", base(ProtocolId::AgreedServer).user_upload, 20},
        {"robert upload", base(ProtocolId::ReceivedServer).user_upload, 2016},
    };
    for (const auto& s : spots)
        if (s.got != s.want) bad += std::string(s.what) + " " + fixed(s.got, 1) + " ";
    bool pass = ok == total && total > 0 && bad.empty();
    return {pass, std::to_string(ok) + "/" + std::to_string(total) + " checks, spot values exact" +
                      (bad.empty() ? "" : "; failed " + bad)};
}

Outcome metcalfe() {
    Scenario sc;
    sc.protocol = ProtocolId::SentUserBasic;
    sc.num_users = 400;
    sc.num_days = 20;
    sc.contacts_per_user_per_day = 10;
    sc.new_patients_per_day = 20;
    sc.loss_prob = 0;
    Outcome o{true, ""};
    for (const auto& p : detection_rate_vs_adoption(sc, {0.3, 0.5, 0.7})) {
        bool ok = std::fabs(p.detected_fraction - p.reference) <= kMetcalfeTolerance &&
                  p.exposure_encounters >= kMetcalfeMinEncounters;
        o.pass = o.pass && ok;
        o.detail += "p=" + fixed(p.p, 1) + " " + fixed(p.detected_fraction) + " vs " + fixed(p.reference, 2) +
                    " (" + std::to_string(p.exposure_encounters) + " enc); ";
    }
    return o;
}

Outcome loss_asymmetry() {
    Outcome o{true, ""};
    for (ProtocolId id : all_protocols()) {
        Scenario sc;
        sc.protocol = id;
        sc.loss_prob = 0.1;
        sc.num_users = 100;
        sc.num_days = 20;
        sc.new_patients_per_day = 3;
        WorldTrace w = generate_world(sc);
        auto truth = ground_truth_oracle(w, sc.params);
        SimulationResult r = run(sc, w);
        double rate = static_cast<double>(r.risk_minutes()) / static_cast<double>(truth.total_minutes());
        bool agreed = instantiate(id).report_kind == ReportKind::Agreed;
        double want = agreed ? kLossAgreed : kLossSentReceived;
        bool ok = std::fabs(rate - want) <= kLossTolerance;
        o.pass = o.pass && ok;
        o.detail += std::string(protocol_name(id)) + " " + fixed(rate) + (ok ? "" : " (out of range)") + "; ";
    }
    return o;
}

Outcome crypto_properties() {
    std::string bad;
    Group strong = Group::strong();
    Group toy = Group::toy();
    Rng rng(41);

    int dh = 0, pair = 0, blind = 0;
    for (int i = 0; i < 100; ++i) {
        Scalar x = strong.random_scalar(rng), y = strong.random_scalar(rng);
        GroupElement gx = strong.exp_g(x), gy = strong.exp_g(y);
        GroupElement s1 = dh_shared(strong, x, gy), s2 = dh_shared(strong, y, gx);
        if (s1 == s2) ++dh;
        Digest a = ordered_token(s1, gx, gy), b = ordered_token(s2, gy, gx);
        std::set<Digest> pa{ordered_token_for(s1, 0), ordered_token_for(s1, 1)};
        std::set<Digest> pb{ordered_token_for(s2, 0), ordered_token_for(s2, 1)};
        if (a != b && pa == pb && pa.count(a) && pa.count(b)) ++pair;
        Scalar k = strong.random_scalar(rng);
        if (unblind_pow(strong, blind_pow(strong, gx, k), k) == gx) ++blind;
    }
    if (dh != 100) bad += "dh " + std::to_string(dh) + "/100 ";
    if (pair != 100) bad += "ordered " + std::to_string(pair) + "/100 ";
    if (blind != 100) bad += "blind " + std::to_string(blind) + "/100 ";

    int psi = 0;
    auto item = [](std::uint64_t v) { return prf(std::string("acceptance-psi"), encode_u64(v)); };
    for (int inst = 0; inst < 100; ++inst) {
        std::uniform_int_distribution<std::uint64_t> val(0, 80);
        std::uniform_int_distribution<int> size(0, 30);
        std::set<std::uint64_t> a, b;
        for (int i = size(rng); i > 0; --i) a.insert(val(rng));
        for (int i = size(rng); i > 0; --i) b.insert(val(rng));
        std::vector<Digest> sa, ub;
        for (auto v : a) sa.push_back(item(v));
        for (auto v : b) ub.push_back(item(v));
        std::size_t naive = 0;
        for (auto v : b) naive += a.count(v);
        if (psi_ca_round(toy, psi_server_prepare(toy, sa, rng), ub, rng) == naive) ++psi;
    }
    if (psi != 100) bad += "psi-ca " + std::to_string(psi) + "/100 ";

    Scalar owner = toy.random_scalar(rng);
    auto [u, v] = randomized_receipt(toy, toy.exp_g(owner), rng);
    bool owner_ok = toy.exp(u, owner) == v;
    int rejected = 0;
    for (int i = 0; i < 100; ++i) {
        Scalar wrong = toy.random_scalar(rng);
        if (wrong == owner) wrong = Scalar::from_small(owner.small() % (toy.q() - 1) + 1);
        if (toy.exp(u, wrong) != v) ++rejected;
    }
    if (!owner_ok || rejected != 100) bad += "receipt " + std::to_string(rejected) + "/100 ";

    auto random_digest = [&] {
        Digest d;
        for (auto& byte : d.bytes) byte = static_cast<std::uint8_t>(rng());
        return d;
    };
    std::vector<Digest> items;
    for (int i = 0; i < 20000; ++i) items.push_back(random_digest());
    const double target = 1.0 / 8192;
    CuckooFilter f = cuckoo_build(items, target);
    int fn = 0, fp = 0;
    const int probes = 100000;
    for (const auto& d : items)
        if (!cuckoo_query(f, d)) ++fn;
    for (int i = 0; i < probes; ++i)
        if (cuckoo_query(f, random_digest())) ++fp;
    double fpr = static_cast<double>(fp) / probes;
    if (fn != 0 || fpr > kCuckooFprFactor * target) bad += "cuckoo fn " + std::to_string(fn) + " fpr " + fixed(fpr, 6);

    return {bad.empty(), bad.empty() ? "dh, ordered tokens, blinding, psi-ca, receipts 100/100; cuckoo fn 0, fpr " +
                                           fixed(fpr, 6) + " <= " + fixed(kCuckooFprFactor * target, 6)
                                     : bad};
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(in), {});
}

Outcome determinism() {
    fs::path root = fs::temp_directory_path() / "pct-acceptance-determinism";
    fs::remove_all(root);
    std::string bad;
    int files = 0;
    for (const char* name : {"default.json", "lossy.json", "adoption.json"}) {
        fs::path scenario = default_data_dir() / "scenarios" / name;
        for (const char* tag : {"a", "b"}) {
            std::string out = (root / name / tag).string();
            std::vector<const char*> argv = {"pct", "run", "--scenario", scenario.c_str(), "--out", out.c_str()};
            std::ostringstream o, e;
            int code = cli_main(static_cast<int>(argv.size()), argv.data(), o, e);
            if (code == 2) bad += std::string(name) + " exit 2: " + e.str();
        }
        for (const auto& entry : fs::directory_iterator(root / name / "a")) {
            ++files;
            fs::path twin = root / name / "b" / entry.path().filename();
            if (!fs::exists(twin) || slurp(entry.path()) != slurp(twin))
                bad += std::string(name) + "/" + entry.path().filename().string() + " differs ";
        }
    }
    fs::remove_all(root);
    return {bad.empty() && files > 0, std::to_string(files) + " output files compared" + (bad.empty() ? "" : "; " + bad)};
}

}  // namespace

int main(int argc, char** argv) {
    bool strict = false;
    for (int i = 1; i < argc; ++i)
        if (std::strcmp(argv[i], "--strict") == 0) strict = true;

    std::vector<Criterion> criteria = {
        {1, "oracle-equivalence", oracle_equivalence},
        {2, "resiliency-matrix", resiliency_matrix},
        {3, "privacy-matrix", privacy_matrix},
        {4, "design-flaw-matrix", flaw_matrix},
        {5, "cost-formulas", cost_formulas},
        {6, "adoption-squared", metcalfe},
        {7, "loss-asymmetry", loss_asymmetry},
        {8, "crypto-properties", crypto_properties},
        {9, "determinism", determinism},
    };

    int failed = 0, unexpected = 0;
    for (const auto& c : criteria) {
        auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = c.check();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        std::cout << (o.pass ? "PASS" : "FAIL") << " " << c.id << " " << c.name << ": " << o.detail << " ["
                  << fixed(secs, 1) << " s]" << (o.pass || !kBlocked.count(c.id) ? "" : " (known blocked)")
                  << std::endl;
        if (!o.pass) {
            ++failed;
            if (!kBlocked.count(c.id)) ++unexpected;
        }
    }
    std::cout << failed << " of " << criteria.size() << " criteria failed";
    if (failed) std::cout << " (" << unexpected << " outside the blocked set)";
    std::cout << std::endl;
    return (strict ? failed : unexpected) ? 1 : 0;
}
