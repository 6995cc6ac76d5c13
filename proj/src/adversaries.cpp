#include "pct/adversaries.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <tuple>
#include <unordered_map>

#include "pct/protocols.hpp"

namespace pct {

// ---------------------------------------------------------------- config

namespace {

const std::pair<AdversaryKind, const char*> kKinds[] = {
    {AdversaryKind::BasicUser, "basic-user"},   {AdversaryKind::AdvancedUser, "advanced-user"},
    {AdversaryKind::UserPsv, "user-psv"},       {AdversaryKind::UserAsv, "user-asv"},
    {AdversaryKind::ServerAlone, "server"},     {AdversaryKind::ServerPsv, "server-psv"},
    {AdversaryKind::ServerAsv, "server-asv"},
};

const std::pair<AttackId, const char*> kAttacks[] = {
    {AttackId::DriveByEavesdrop, "drive-by"},        {AttackId::HighPowerBroadcast, "high-power-broadcast"},
    {AttackId::HighPowerDevice, "high-power-device"}, {AttackId::SameBeacon, "same-beacon"},
    {AttackId::Pooling, "pooling"},                  {AttackId::Tunneling, "tunneling"},
    {AttackId::Forwarding, "forwarding"},            {AttackId::ResourceExhaustion, "resource-exhaustion"},
};

}  // namespace

const char* to_string(AdversaryKind k) {
    for (const auto& [v, n] : kKinds)
        if (v == k) return n;
    return "?";
}

const char* to_string(AttackId a) {
    for (const auto& [v, n] : kAttacks)
        if (v == a) return n;
    return "?";
}

AdversaryKind adversary_kind_from_string(const std::string& s) {
    for (const auto& [v, n] : kKinds)
        if (s == n) return v;
    throw std::invalid_argument("unknown adversary kind: " + s);
}

AttackId attack_from_string(const std::string& s) {
    for (const auto& [v, n] : kAttacks)
        if (s == n) return v;
    throw std::invalid_argument("unknown attack: " + s);
}

bool is_surveillance(AdversaryKind k) {
    return k == AdversaryKind::UserPsv || k == AdversaryKind::UserAsv || k == AdversaryKind::ServerPsv ||
           k == AdversaryKind::ServerAsv;
}

bool is_active(AdversaryKind k) { return k == AdversaryKind::UserAsv || k == AdversaryKind::ServerAsv; }

bool is_server_side(AdversaryKind k) {
    return k == AdversaryKind::ServerAlone || k == AdversaryKind::ServerPsv || k == AdversaryKind::ServerAsv;
}

void AdversaryConfig::validate() const {
    if (is_surveillance(kind) == sniffer_cells.empty())
        throw std::invalid_argument(std::string("adversary ") + to_string(kind) +
                                    ": sniffer cells required exactly for surveillance kinds");
    if (attack) check_compatible(*attack, kind);
}

AdversaryKind required_kind(AttackId attack) {
    switch (attack) {
        case AttackId::DriveByEavesdrop:
        case AttackId::HighPowerBroadcast:
        case AttackId::HighPowerDevice: return AdversaryKind::AdvancedUser;
        case AttackId::SameBeacon:
        case AttackId::Pooling:
        case AttackId::Tunneling:
        case AttackId::Forwarding: return AdversaryKind::UserAsv;
        case AttackId::ResourceExhaustion: return AdversaryKind::BasicUser;
    }
    return AdversaryKind::BasicUser;
}

void check_compatible(AttackId attack, AdversaryKind kind) {
    AdversaryKind need = required_kind(attack);
    bool ok = false;
    switch (need) {
        case AdversaryKind::BasicUser: ok = !is_server_side(kind); break;
        case AdversaryKind::AdvancedUser: ok = kind == AdversaryKind::AdvancedUser || kind == AdversaryKind::UserAsv; break;
        default: ok = kind == need; break;
    }
    if (!ok)
        throw std::invalid_argument(std::string("attack ") + to_string(attack) + " needs a " + to_string(need) +
                                    " adversary, got " + to_string(kind));
}

AdversaryView make_view(const SimulationResult& r, const AdversaryConfig& cfg) {
    AdversaryView v;
    v.kind = cfg.kind;
    if (is_surveillance(cfg.kind)) {
        v.cells = cfg.sniffer_cells;
        for (const auto& o : r.observations)
            if (cfg.sniffer_cells.count(o.cell)) v.observed.push_back(o);
    }
    if (is_server_side(cfg.kind)) v.server_side = &r.server_log;
    if (is_active(cfg.kind))
        for (const auto& d : r.devices)
            if (cfg.sniffer_cells.count(d.cell)) {
                v.own_devices.push_back(d);
                v.own_secrets.push_back(r.users[static_cast<std::size_t>(d.id)].seed);
            }
    return v;
}

// ---------------------------------------------------------------- rate limits

RateLimitFlags server_rate_limit(const ProtocolSpec& spec, const ServerState& server, const RateLimitConfig& caps) {
    RateLimitFlags f;
    for (const auto& rep : server.patient_reports)
        if (rep.truncated) ++f.truncated_reports;
    f.applicable = !(spec.report_kind == ReportKind::Sent && spec.matcher != MatcherKind::Server);
    if (!f.applicable) return f;
    if (spec.report_kind != ReportKind::Sent)
        for (const auto& rep : server.patient_reports)
            for (const auto& b : rep.batches)
                if (static_cast<int>(b.entries.size()) > caps.per_report_size_cap) f.flagged.insert(rep.patient);
    for (const auto& [key, count] : server.exposures_caused)
        if (count > caps.per_patient_exposure_cap) f.flagged.insert(key.first);
    return f;
}

SuppressionReport user_rate_limit(const std::vector<UserState>& users, int num_honest) {
    SuppressionReport s;
    for (int u = 0; u < num_honest && u < static_cast<int>(users.size()); ++u) {
        int a = users[static_cast<std::size_t>(u)].suppression_alerts;
        if (a == 0) continue;
        s.alerts += a;
        s.users.insert(u);
    }
    return s;
}

// ---------------------------------------------------------------- attacks

namespace {

constexpr int kAttackDay = 1;
constexpr int kAttackSlotOfDay = 60;

struct AttackWorld {
    Scenario sc;
    std::vector<std::vector<UserId>> groups;  // honest users by cell
};

AttackWorld attack_world(AttackId attack, ProtocolId protocol, const AttackSetup& setup) {
    AttackWorld aw;
    Scenario& sc = aw.sc;
    sc.mode = WorldMode::Scripted;
    sc.protocol = protocol;
    sc.rng_seed = setup.seed;
    sc.group_kind = setup.group;
    sc.num_days = kAttackDay + 1;
    sc.new_patients_per_day = 0;
    sc.contacts_per_user_per_day = 0;
    sc.limits = setup.limits;
    sc.limits.user_limit_enabled = setup.user_limit;

    std::vector<int> sizes;
    switch (attack) {
        case AttackId::DriveByEavesdrop: sizes = {setup.crowd}; break;
        case AttackId::HighPowerBroadcast:
        case AttackId::HighPowerDevice: {
            int per = (setup.crowd + 3) / 4;
            for (int left = setup.crowd; left > 0; left -= per) sizes.push_back(std::min(per, left));
            break;
        }
        case AttackId::SameBeacon:
        case AttackId::Pooling: sizes.assign(static_cast<std::size_t>(setup.colluders), setup.victims_per_colluder); break;
        case AttackId::Tunneling:
        case AttackId::Forwarding: sizes = {setup.tunnel_crowd, setup.tunnel_crowd}; break;
        case AttackId::ResourceExhaustion: sizes = {10}; break;
    }
    std::int64_t slot = first_slot_of_day(kAttackDay) + kAttackSlotOfDay;
    UserId next = 0;
    for (std::size_t c = 0; c < sizes.size(); ++c) {
        aw.groups.emplace_back();
        for (int i = 0; i < sizes[c]; ++i) {
            aw.groups.back().push_back(next);
            sc.crowds.push_back(Presence{next, static_cast<int>(c), slot});
            ++next;
        }
    }
    sc.num_users = next;
    sc.num_cells = std::max<int>(1, static_cast<int>(sizes.size()));
    if (attack == AttackId::Tunneling || attack == AttackId::Forwarding) {
        sc.scripted_diagnoses.push_back(Diagnosis{aw.groups[0].front(), kAttackDay});
        sc.scripted_diagnoses.push_back(Diagnosis{aw.groups[1].front(), kAttackDay});
    }
    return aw;
}

Token junk_token(const Context& ctx, Rng& rng) {
    std::size_t len = 32;
    if (ctx.spec.group_beacons && ctx.spec.report_kind != ReportKind::Agreed) len = ctx.group.element_size();
    if (ctx.spec.randomized_receipts) len = 2 * ctx.group.element_size();
    if (ctx.spec.report_kind == ReportKind::Agreed) len = ctx.group.element_size();
    std::string s(len, '\0');
    for (auto& ch : s) ch = static_cast<char>(rng() & 0xff);
    return Token(s);
}

class AttackHook : public EngineHook {
public:
    AttackHook(AttackId a, const AttackSetup& s, const std::vector<std::vector<UserId>>& g)
        : attack_(a), setup_(s), groups_(g) {}

    std::vector<UserId> attackers;
    UserId patient = -1;

    void setup(EngineState& st) override {
        int count = 0;
        switch (attack_) {
            case AttackId::SameBeacon: count = setup_.colluders; break;
            case AttackId::Pooling: count = std::max(setup_.colluders, setup_.pooled_streams); break;
            case AttackId::Tunneling:
            case AttackId::Forwarding: count = 0; break;
            default: count = 1; break;
        }
        for (int i = 0; i < count; ++i) attackers.push_back(st.add_participant());
        if (!attackers.empty()) patient = attackers.front();
    }

    void after_encounters(EngineState& st, int day) override {
        if (day != kAttackDay) return;
        const Context& ctx = st.ctx;
        TimeSlot ts{first_slot_of_day(kAttackDay) + kAttackSlotOfDay};
        const int m = setup_.forged_minutes;
        auto beacon = [&](UserId u) { return beacon_for_slot(ctx, st.users[static_cast<std::size_t>(u)], ts); };
        // forged reception: the receiving device believes the sender is close
        auto hear = [&](UserId receiver, const Beacon& b) {
            record_reception(ctx, st.users[static_cast<std::size_t>(receiver)], b, ts, 1.0, m);
        };
        auto pool = [&](const Beacon& b) {
            auto& p = st.users[static_cast<std::size_t>(patient)];
            record_reception_as(ctx, p, p, b, ts, 1.0, m);
        };
        auto all_victims = [&] {
            std::vector<UserId> v;
            for (const auto& g : groups_) v.insert(v.end(), g.begin(), g.end());
            return v;
        };

        switch (attack_) {
            case AttackId::DriveByEavesdrop:
                for (UserId u : all_victims()) hear(patient, beacon(u));
                break;
            case AttackId::HighPowerBroadcast:
                for (UserId u : all_victims()) hear(u, beacon(patient));
                break;
            case AttackId::HighPowerDevice:
                for (UserId u : all_victims()) {
                    hear(u, beacon(patient));
                    hear(patient, beacon(u));
                }
                break;
            case AttackId::SameBeacon:
                for (const auto& g : groups_)
                    for (UserId v : g) {
                        hear(v, beacon(patient));
                        pool(beacon(v));
                    }
                break;
            case AttackId::Pooling: {
                auto streams = static_cast<std::size_t>(setup_.pooled_streams);
                for (const auto& g : groups_)
                    for (UserId v : g) {
                        for (std::size_t j = 0; j < streams && j < attackers.size(); ++j) hear(v, beacon(attackers[j]));
                        pool(beacon(v));
                    }
                break;
            }
            case AttackId::Forwarding:
            case AttackId::Tunneling:
                for (UserId a : groups_[0])
                    for (UserId b : groups_[1]) {
                        hear(b, beacon(a));
                        if (attack_ == AttackId::Tunneling) hear(a, beacon(b));
                    }
                break;
            case AttackId::ResourceExhaustion: break;
        }
    }

    void before_round(EngineState& st, int day) override {
        if (day != kAttackDay || patient < 0) return;
        Report rep;
        if (attack_ == AttackId::ResourceExhaustion) {
            rep.patient = patient;
            rep.diagnosis_day = day;
            for (int d = std::max(0, day - st.ctx.params.infectious_days + 1); d <= day; ++d) {
                ReportBatch b;
                b.day = d;
                for (int i = 0; i < 5000; ++i) b.entries.push_back(ReportEntry{junk_token(st.ctx, st.rng), 20, -1});
                rep.batches.push_back(std::move(b));
            }
        } else {
            rep = patient_report(st.ctx, st.users[static_cast<std::size_t>(patient)], day, st.rng);
        }
        ingest_report(st.ctx, st.server, std::move(rep), &st.log);
    }

private:
    AttackId attack_;
    AttackSetup setup_;
    const std::vector<std::vector<UserId>>& groups_;
};

}  // namespace

AttackOutcome run_attack(AttackId attack, const AdversaryConfig& cfg, ProtocolId protocol, const AttackSetup& setup) {
    check_compatible(attack, cfg.kind);
    AttackWorld aw = attack_world(attack, protocol, setup);
    WorldTrace w = generate_world(aw.sc);
    AttackHook hook(attack, setup, aw.groups);
    SimulationResult r = run(aw.sc, w, &hook);
    GroundTruthExposures truth = ground_truth_oracle(w, aw.sc.params);
    std::set<UserId> real = truth.exposed_set();

    AttackOutcome out;
    out.attack = attack;
    out.protocol = protocol;
    for (UserId u : r.detected)
        if (!real.count(u)) ++out.false_exposures;
    out.server = server_rate_limit(r.ctx.spec, r.server, aw.sc.limits);
    out.suppression = user_rate_limit(r.users, r.num_users);
    out.attackers = hook.attackers;
    for (const auto& rep : r.server.patient_reports)
        if (rep.truncated) out.report_truncated = true;
    return out;
}

// ---------------------------------------------------------------- leakage helpers

const char* to_string(LeakValue v) {
    switch (v) {
        case LeakValue::Leaks: return "leaks";
        case LeakValue::Partial: return "partial";
        case LeakValue::Protected: return "protected";
        case LeakValue::NotApplicable: return "n/a";
        case LeakValue::Unknown: return "unknown";
    }
    return "?";
}

LeakValue leak_value_from_string(const std::string& s) {
    for (auto v : {LeakValue::Leaks, LeakValue::Partial, LeakValue::Protected, LeakValue::NotApplicable,
                   LeakValue::Unknown})
        if (s == to_string(v)) return v;
    throw std::invalid_argument("unknown cell value: " + s);
}

const char* to_string(EdgeKind k) {
    switch (k) {
        case EdgeKind::PatientPatient: return "patient-patient";
        case EdgeKind::PatientUser: return "patient-user";
        case EdgeKind::UserUserWithPatient: return "user-user";
        case EdgeKind::UserUserNoExposure: return "user-user-no-exposure";
    }
    return "?";
}

namespace {

using Point = std::tuple<UserId, int, std::int64_t>;  // user, cell, slot

struct Claim {
    std::string label;
    UserId subject;
    int cell;
    std::int64_t slot;
    auto operator<=>(const Claim&) const = default;
};

std::map<UserId, int> diagnosis_days(const SimulationResult& r) {
    std::map<UserId, int> m;
    for (const auto& d : r.diagnoses)
        if (r.adopters[static_cast<std::size_t>(d.user)]) m[d.user] = d.day;
    return m;
}

// Material the adversary's own devices produced, keyed for lookup.
struct DeviceMaterial {
    std::unordered_map<Token, std::pair<int, std::int64_t>, TokenHash> beacon_at;   // device beacon -> (cell, slot)
    std::unordered_map<Token, const Observation*, TokenHash> shared_at;             // g^{x_dev x_user}
    std::unordered_map<Token, const Observation*, TokenHash> ordered_at;            // H(shared || i)
    std::map<int, std::vector<std::tuple<int, std::int64_t, Scalar>>> secrets_by_day;
};

DeviceMaterial device_material(const SimulationResult& r, const AdversaryView& view) {
    DeviceMaterial dm;
    if (view.own_devices.empty()) return dm;
    const Context& ctx = r.ctx;
    std::map<int, UserState> dev;
    for (const auto& d : view.own_devices) dev[d.cell] = r.users[static_cast<std::size_t>(d.id)];
    std::set<std::pair<int, std::int64_t>> seen;
    for (const auto& o : view.observed) {
        auto it = dev.find(o.cell);
        if (it == dev.end()) continue;
        UserState& d = it->second;
        TimeSlot ts{o.slot};
        const SentMaterial& mine = sent_material(ctx, d, ts);
        if (seen.emplace(o.cell, o.slot).second) {
            dm.beacon_at[mine.beacon] = {o.cell, o.slot};
            if (mine.secret) dm.secrets_by_day[ts.day()].emplace_back(o.cell, o.slot, *mine.secret);
        }
        if (!ctx.spec.group_beacons || ctx.spec.report_kind != ReportKind::Agreed) continue;
        GroupElement theirs = ctx.group.decode(o.beacon.view());
        GroupElement shared = dh_shared(ctx.group, *mine.secret, theirs);
        dm.shared_at[Token::of(shared)] = &o;
        for (std::uint8_t ind = 0; ind < 2; ++ind) dm.ordered_at[Token::of(ordered_token_for(shared, ind))] = &o;
    }
    return dm;
}

std::unordered_map<Token, std::vector<const Observation*>, TokenHash> sniff_index(const AdversaryView& view) {
    std::unordered_map<Token, std::vector<const Observation*>, TokenHash> idx;
    for (const auto& o : view.observed) idx[o.beacon].push_back(&o);
    return idx;
}

std::vector<Beacon> expand_seed(const Token& seed, int day) {
    Bytes s(seed.bytes.begin(), seed.bytes.end());
    std::vector<Beacon> out;
    for (std::int64_t t = first_slot_of_day(day); t < first_slot_of_day(day + 1); ++t)
        out.push_back(prf_beacon(s, TimeSlot{t}));
    return out;
}

std::unordered_map<Token, RegistryEntry, TokenHash> full_registry(const SimulationResult& r, int days) {
    ServerState tmp;
    for (int u = 0; u < r.num_users; ++u) {
        if (!r.adopters[static_cast<std::size_t>(u)]) continue;
        for (int d = 0; d < days; ++d) register_user_day(r.ctx, tmp, u, d);
    }
    return std::move(tmp.beacon_registry);
}

// A receipt (u, v) verifies against secret x when u^x == v.
std::optional<std::pair<GroupElement, GroupElement>> split_receipt(const Context& ctx, const Token& t) {
    std::size_t half = ctx.group.element_size();
    if (t.bytes.size() != 2 * half) return std::nullopt;
    try {
        auto v = t.view();
        return std::make_pair(ctx.group.decode(v.subspan(0, half)), ctx.group.decode(v.subspan(half, half)));
    } catch (const std::invalid_argument&) {
        return std::nullopt;
    }
}

void server_claims(const SimulationResult& r, const WorldTrace& w, const AdversaryView& view, std::set<Claim>& claims) {
    const Context& ctx = r.ctx;
    const auto& spec = ctx.spec;
    const ServerLog& log = *view.server_side;
    auto sniffed = sniff_index(view);
    DeviceMaterial dm = device_material(r, view);
    auto acct = [](UserId u) { return "acct:" + std::to_string(u); };

    if (spec.beacon_registry) {
        auto reg = full_registry(r, w.num_days);
        for (const auto& o : view.observed) {
            auto it = reg.find(o.beacon);
            if (it != reg.end()) claims.insert(Claim{acct(it->second.user), o.true_user, o.cell, o.slot});
        }
    }

    for (const auto& rep : log.reports) {
        std::string label = acct(rep.patient);
        for (const auto& b : rep.batches)
            for (const auto& e : b.entries) {
                if (spec.report_kind == ReportKind::Sent) {
                    std::vector<Beacon> bs = spec.options.daily_seed ? expand_seed(e.token, b.day) : std::vector<Beacon>{e.token};
                    for (const auto& x : bs) {
                        auto it = sniffed.find(x);
                        if (it == sniffed.end()) continue;
                        for (const auto* o : it->second) claims.insert(Claim{label, o->true_user, o->cell, o->slot});
                    }
                } else if (spec.report_kind == ReportKind::Received && !spec.randomized_receipts) {
                    auto it = sniffed.find(e.token);
                    if (it != sniffed.end())
                        for (const auto* o : it->second) claims.insert(Claim{label, rep.patient, o->cell, o->slot});
                    auto d = dm.beacon_at.find(e.token);
                    if (d != dm.beacon_at.end())
                        claims.insert(Claim{label, rep.patient, d->second.first, d->second.second});
                } else if (spec.randomized_receipts) {
                    auto rc = split_receipt(ctx, e.token);
                    auto day = dm.secrets_by_day.find(b.day);
                    if (!rc || day == dm.secrets_by_day.end()) continue;
                    for (const auto& [cell, slot, x] : day->second)
                        if (ctx.group.exp(rc->first, x) == rc->second) {
                            claims.insert(Claim{label, rep.patient, cell, slot});
                            break;
                        }
                } else {
                    auto it = dm.shared_at.find(e.token);
                    if (it != dm.shared_at.end()) claims.insert(Claim{label, rep.patient, it->second->cell, it->second->slot});
                }
            }
    }

    auto scan_entries = [&](UserId user, const std::vector<UploadEntry>& entries) {
        std::string label = acct(user);
        for (const auto& e : entries) {
            if (spec.report_kind == ReportKind::Sent) {
                auto it = sniffed.find(e.token);
                if (it != sniffed.end())
                    for (const auto* o : it->second) claims.insert(Claim{label, user, o->cell, o->slot});
                auto d = dm.beacon_at.find(e.token);
                if (d != dm.beacon_at.end()) claims.insert(Claim{label, user, d->second.first, d->second.second});
            } else if (spec.report_kind == ReportKind::Agreed) {
                auto it = dm.ordered_at.find(e.token);
                if (it != dm.ordered_at.end()) claims.insert(Claim{label, user, it->second->cell, it->second->slot});
            }
        }
    };
    if (spec.id != ProtocolId::ReceivedInteractive)
        for (const auto& up : log.uploads) scan_entries(up.user, up.entries);
    for (const auto& q : log.queries) scan_entries(q.user, q.entries);
}

void user_claims(const SimulationResult& r, const AdversaryView& view, std::set<Claim>& claims) {
    const Context& ctx = r.ctx;
    const auto& spec = ctx.spec;
    auto sniffed = sniff_index(view);
    DeviceMaterial dm = device_material(r, view);
    std::unordered_map<Token, UserId, TokenHash> reporter;  // scoring only
    for (const auto& rep : r.server_log.reports)
        for (const auto& b : rep.batches)
            for (const auto& e : b.entries) reporter[e.token] = rep.patient;

    for (const auto& pub : r.published) {
        std::string round = "round:" + std::to_string(pub.day);
        for (const auto& e : pub.entries) {
            if (spec.report_kind == ReportKind::Sent) {
                std::vector<Beacon> bs;
                std::string label;
                if (spec.options.daily_seed) {
                    bs = expand_seed(e.token, static_cast<int>(e.slot / kSlotsPerDay));
                    label = "seed:" + e.token.hex();
                } else {
                    bs = {e.token};
                    label = "beacon:" + e.token.hex();
                }
                for (const auto& x : bs) {
                    auto it = sniffed.find(x);
                    if (it == sniffed.end()) continue;
                    for (const auto* o : it->second) claims.insert(Claim{label, o->true_user, o->cell, o->slot});
                }
            } else if (spec.randomized_receipts) {
                auto rc = split_receipt(ctx, e.token);
                auto day = dm.secrets_by_day.find(static_cast<int>(e.slot / kSlotsPerDay));
                if (!rc || day == dm.secrets_by_day.end()) continue;
                for (const auto& [cell, slot, x] : day->second)
                    if (ctx.group.exp(rc->first, x) == rc->second) {
                        auto who = reporter.find(e.token);
                        claims.insert(Claim{round, who == reporter.end() ? -1 : who->second, cell, slot});
                        break;
                    }
            } else if (spec.report_kind == ReportKind::Received) {
                auto it = sniffed.find(e.token);
                if (it == sniffed.end()) continue;
                auto who = reporter.find(e.token);
                for (const auto* o : it->second)
                    claims.insert(Claim{"beacon:" + e.token.hex(), who == reporter.end() ? -1 : who->second, o->cell, o->slot});
            } else {
                auto it = dm.shared_at.find(e.token);
                if (it != dm.shared_at.end()) claims.insert(Claim{round, it->second->true_user, it->second->cell, it->second->slot});
            }
        }
    }
}

}  // namespace

TraceResult leak_movement_traces(const SimulationResult& r, const WorldTrace& w, const AdversaryView& view,
                                 TraceScope scope) {
    TraceResult res;
    std::set<Claim> claims;
    if (is_server_side(view.kind)) {
        if (view.server_side) server_claims(r, w, view, claims);
    } else {
        user_claims(r, view, claims);
    }

    std::map<std::string, std::vector<const Claim*>> chains;
    for (const auto& c : claims) chains[c.label].push_back(&c);
    std::set<Point> linked;
    for (const auto& [label, cs] : chains) {
        std::set<UserId> subjects;
        std::set<std::pair<int, std::int64_t>> pts;
        for (const auto* c : cs) {
            subjects.insert(c->subject);
            pts.emplace(c->cell, c->slot);
        }
        if (subjects.size() != 1 || *subjects.begin() < 0 || pts.size() < 2) continue;
        for (const auto* c : cs) linked.emplace(c->subject, c->cell, c->slot);
    }

    auto diag = diagnosis_days(r);
    std::set<Point> targets;
    for (const auto& p : w.presence_points()) {
        if (!view.cells.count(p.cell) || p.user >= r.num_users || !r.adopters[static_cast<std::size_t>(p.user)]) continue;
        if (scope == TraceScope::NonPatients && diag.count(p.user)) continue;
        if (scope == TraceScope::Patients) {
            auto it = diag.find(p.user);
            if (it == diag.end()) continue;
            int day = static_cast<int>(p.slot / kSlotsPerDay);
            if (day > it->second || day < it->second - r.ctx.params.infectious_days + 1) continue;
        }
        targets.emplace(p.user, p.cell, p.slot);
    }
    res.targets = targets.size();
    for (const auto& t : targets)
        if (linked.count(t)) ++res.linked;
    if (res.targets == 0) {
        res.value = LeakValue::NotApplicable;
        return res;
    }
    res.fraction = static_cast<double>(res.linked) / static_cast<double>(res.targets);
    res.value = res.fraction >= 0.5 ? LeakValue::Leaks : LeakValue::Protected;
    return res;
}

namespace {

// Pairs of never-diagnosed users who met in a group (close encounters chained within one slot and cell)
// that held no patient inside the patient's infectious window.
std::set<std::pair<UserId, UserId>> no_exposure_pairs(const WorldTrace& w, const Params& params,
                                                      const std::map<UserId, int>& diag) {
    std::map<std::pair<std::int64_t, int>, std::vector<std::pair<UserId, UserId>>> places;
    for (const auto& e : w.encounters)
        if (e.distance <= params.proximity_m) places[{e.start_slot(), e.cell}].emplace_back(e.a, e.b);
    std::set<std::pair<UserId, UserId>> out;
    for (const auto& [where, pairs] : places) {
        std::map<UserId, UserId> parent;
        std::function<UserId(UserId)> find = [&](UserId u) {
            auto it = parent.try_emplace(u, u).first;
            if (it->second == u) return u;
            return it->second = find(it->second);
        };
        for (const auto& [a, b] : pairs) parent[find(a)] = find(b);
        std::map<UserId, std::vector<UserId>> groups;
        for (const auto& [u, _] : parent) groups[find(u)].push_back(u);
        int day = static_cast<int>(where.first / kSlotsPerDay);
        for (const auto& [root, members] : groups) {
            bool exposing = false;
            for (UserId u : members) {
                auto it = diag.find(u);
                if (it != diag.end() && day <= it->second && day > it->second - params.infectious_days) exposing = true;
            }
            if (exposing) continue;
            for (const auto& [a, b] : pairs) {
                if (find(a) != root || diag.count(a) || diag.count(b)) continue;
                out.emplace(std::min(a, b), std::max(a, b));
            }
        }
    }
    return out;
}

}  // namespace

InteractionResult leak_interactions(const SimulationResult& r, const WorldTrace& w) {
    const Context& ctx = r.ctx;
    const auto& spec = ctx.spec;
    const ServerLog& log = r.server_log;
    enum Role { FromReport, FromUpload };
    std::unordered_map<Token, std::set<std::pair<UserId, Role>>, TokenHash> holders;

    for (const auto& rep : log.reports)
        for (const auto& b : rep.batches)
            for (const auto& e : b.entries) {
                if (spec.report_kind == ReportKind::Sent && spec.options.daily_seed) {
                    for (const auto& x : expand_seed(e.token, b.day)) holders[x].emplace(rep.patient, FromReport);
                    continue;
                }
                holders[e.token].emplace(rep.patient, FromReport);
                if (spec.report_kind == ReportKind::Agreed) {
                    GroupElement shared;
                    try {
                        shared = ctx.group.decode(e.token.view());
                    } catch (const std::invalid_argument&) {
                        continue;
                    }
                    for (std::uint8_t ind = 0; ind < 2; ++ind)
                        holders[Token::of(ordered_token_for(shared, ind))].emplace(rep.patient, FromReport);
                }
            }
    for (const auto& up : log.uploads)
        for (const auto& e : up.entries) holders[e.token].emplace(up.user, FromUpload);
    for (const auto& q : log.queries)
        for (const auto& e : q.entries) holders[e.token].emplace(q.user, FromUpload);

    std::set<std::pair<UserId, UserId>> with_patient, upload_only;
    auto add = [&](UserId a, UserId b, bool patient) {
        if (a == b || a < 0 || b < 0 || a >= r.num_users || b >= r.num_users) return;
        auto e = std::make_pair(std::min(a, b), std::max(a, b));
        (patient ? with_patient : upload_only).insert(e);
    };

    if (spec.beacon_registry) {
        auto reg = full_registry(r, w.num_days);
        for (const auto& rep : log.reports) {
            std::map<std::int64_t, std::set<UserId>> by_slot;
            for (const auto& b : rep.batches)
                for (const auto& e : b.entries) {
                    auto it = reg.find(e.token);
                    if (it == reg.end()) continue;
                    add(rep.patient, it->second.user, true);
                    by_slot[it->second.slot].insert(it->second.user);
                }
            for (const auto& [slot, owners] : by_slot)
                for (UserId a : owners)
                    for (UserId b : owners) add(a, b, true);
        }
    }
    for (const auto& [tok, hs] : holders) {
        if (hs.size() < 2) continue;
        bool patient = false;
        for (const auto& h : hs) patient = patient || h.second == FromReport;
        for (const auto& x : hs)
            for (const auto& y : hs) add(x.first, y.first, patient);
    }
    for (const auto& [p, u] : log.matched_pairs) add(p, u, true);
    for (const auto& [day, users] : log.round_user_matches) {
        auto pts = log.round_patients.find(day);
        if (pts == log.round_patients.end() || pts->second.size() != 1) continue;
        for (const auto& [u, risk] : users) add(pts->second.front(), u, true);
    }

    auto truth = interaction_ground_truth(w, ctx.params);
    auto diag = diagnosis_days(r);
    auto kind_of = [&](const std::pair<UserId, UserId>& e) {
        int patients = (diag.count(e.first) ? 1 : 0) + (diag.count(e.second) ? 1 : 0);
        return patients == 2 ? EdgeKind::PatientPatient : patients == 1 ? EdgeKind::PatientUser : EdgeKind::UserUserWithPatient;
    };

    InteractionResult out;
    for (auto k : {EdgeKind::PatientPatient, EdgeKind::PatientUser, EdgeKind::UserUserWithPatient,
                   EdgeKind::UserUserNoExposure})
        out.edges[k] = EdgeScore{};
    auto score = [&](EdgeKind k, const std::pair<UserId, UserId>& e) {
        auto& s = out.edges[k];
        ++s.inferred;
        if (truth.count(e)) ++s.correct;
        if (k == EdgeKind::PatientPatient) out.inferred_pp.insert(e);
    };
    for (const auto& e : with_patient) score(kind_of(e), e);
    for (const auto& e : upload_only) {
        EdgeKind k = kind_of(e);
        score(k == EdgeKind::UserUserWithPatient ? EdgeKind::UserUserNoExposure : k, e);
    }
    for (const auto& e : truth) {
        if (!r.adopters[static_cast<std::size_t>(e.first)] || !r.adopters[static_cast<std::size_t>(e.second)]) continue;
        ++out.edges[kind_of(e)].truth;
    }
    // no-exposure recall counts only pairs that met without any infectious patient around
    std::size_t quiet_found = 0;
    auto& ne = out.edges[EdgeKind::UserUserNoExposure];
    ne.truth = 0;
    for (const auto& e : no_exposure_pairs(w, ctx.params, diag)) {
        if (!r.adopters[static_cast<std::size_t>(e.first)] || !r.adopters[static_cast<std::size_t>(e.second)]) continue;
        ++ne.truth;
        if (upload_only.count(e)) ++quiet_found;
    }
    for (auto& [k, s] : out.edges) {
        std::size_t found = k == EdgeKind::UserUserNoExposure ? quiet_found : s.correct;
        s.precision = s.inferred ? static_cast<double>(s.correct) / static_cast<double>(s.inferred) : 0;
        s.recall = s.truth ? static_cast<double>(found) / static_cast<double>(s.truth) : 0;
        s.value = (s.inferred > 0 && s.precision >= 0.9) ? LeakValue::Leaks : LeakValue::Protected;
    }
    return out;
}

LeakValue leak_user_side_copatients(const SimulationResult& r) {
    const auto& spec = r.ctx.spec;
    if (!(spec.report_kind == ReportKind::Received && spec.matcher == MatcherKind::User)) return LeakValue::NotApplicable;
    // a user recognises her own beacons; collect every honest adopter's beacons of the run
    std::unordered_set<Token, TokenHash> own;
    std::vector<UserState> copies(r.users.begin(), r.users.begin() + r.num_users);
    int days = static_cast<int>(r.published.size());
    for (auto& u : copies) {
        if (!r.adopters[static_cast<std::size_t>(u.id)]) continue;
        for (std::int64_t s = 0; s < first_slot_of_day(days); ++s) own.insert(beacon_for_slot(r.ctx, u, TimeSlot{s}));
        u.sent_log.clear();
    }
    for (const auto& pub : r.published) {
        std::unordered_map<Token, int, TokenHash> seen;
        for (const auto& e : pub.entries)
            if (++seen[e.token] == 2 && own.count(e.token)) return LeakValue::Leaks;
    }
    return LeakValue::Protected;
}

ProbeResult bisection_probe(std::size_t items, const std::function<std::size_t(const std::vector<std::size_t>&)>& count) {
    ProbeResult pr;
    if (items == 0) return pr;
    // each entry carries its already known hit count; only left halves are queried
    std::vector<std::pair<std::vector<std::size_t>, std::size_t>> stack;
    std::vector<std::size_t> all(items);
    for (std::size_t i = 0; i < items; ++i) all[i] = i;
    ++pr.queries;
    std::size_t total = count(all);
    stack.emplace_back(std::move(all), total);
    while (!stack.empty()) {
        auto [set, hits] = std::move(stack.back());
        stack.pop_back();
        if (hits == 0) continue;
        if (set.size() == 1) {  // counts may exceed one per item
            pr.found.push_back(set.front());
            continue;
        }
        auto mid = set.begin() + static_cast<std::ptrdiff_t>(set.size() / 2);
        std::vector<std::size_t> left(set.begin(), mid), right(mid, set.end());
        ++pr.queries;
        std::size_t in_left = count(left);
        stack.emplace_back(std::move(right), hits - in_left);
        stack.emplace_back(std::move(left), in_left);
    }
    std::sort(pr.found.begin(), pr.found.end());
    return pr;
}

namespace {

int last_report_day(const ServerLog& log) {
    int d = -1;
    for (const auto& rep : log.reports) d = std::max(d, rep.diagnosis_day);
    return d;
}

ExposureTimeResult probe_result(const std::vector<std::size_t>& truth, const ProbeResult& pr, std::size_t k) {
    ExposureTimeResult res;
    res.probe_queries = pr.queries;
    res.probe_items = static_cast<int>(k);
    res.recovered = pr.found.size();
    for (auto i : pr.found)
        if (std::binary_search(truth.begin(), truth.end(), i)) ++res.correct;
    bool ok = pr.found == truth && !truth.empty();
    double bound = k > 1 ? std::log2(static_cast<double>(k)) : 1;
    if (!ok) res.value = LeakValue::Protected;
    else res.value = pr.queries >= bound ? LeakValue::Partial : LeakValue::Leaks;
    return res;
}

ExposureTimeResult probe_epione(const SimulationResult& r) {
    const Context& ctx = r.ctx;
    int day = last_report_day(r.server_log);
    if (day < 0) return {ExposureTimeResult{0, 0, 0, 0, LeakValue::NotApplicable}};
    std::vector<Digest> items;
    TokenSet patient_set;
    for (const auto& rep : r.server_log.reports)
        if (rep.diagnosis_day == day)
            for (const auto& b : rep.batches)
                for (const auto& e : b.entries) {
                    items.push_back(e.token.digest());
                    patient_set.insert(e.token);
                }
    Rng rng(99);
    PsiServerSet set = psi_server_prepare(ctx.group, items, rng);
    for (int u = 0; u < r.num_users; ++u) {
        const auto& st = r.users[static_cast<std::size_t>(u)];
        if (!r.adopters[static_cast<std::size_t>(u)] || st.diagnosed) continue;
        std::vector<Digest> mine;
        std::vector<std::size_t> truth;
        for (const auto& [key, rec] : st.encounter_store) {
            if (patient_set.count(rec.peer_beacon)) truth.push_back(mine.size());
            mine.push_back(rec.peer_beacon.digest());
        }
        if (truth.empty()) continue;
        auto pr = bisection_probe(mine.size(), [&](const std::vector<std::size_t>& idx) {
            std::vector<Digest> q;
            for (auto i : idx) q.push_back(mine[i]);
            return psi_ca_round(ctx.group, set, q, rng);
        });
        return probe_result(truth, pr, mine.size());
    }
    return ExposureTimeResult{0, 0, 0, 0, LeakValue::NotApplicable};
}

ExposureTimeResult probe_desire(const SimulationResult& r) {
    const Context& ctx = r.ctx;
    int day = last_report_day(r.server_log);
    if (day < 0) return ExposureTimeResult{0, 0, 0, 0, LeakValue::NotApplicable};
    ServerState server = r.server;
    server.query_store_policy = QueryStorePolicy::Discard;
    std::unordered_set<Token, TokenHash> reported;
    for (const auto& rep : server.patient_reports)
        if (rep.diagnosis_day == day)
            for (const auto& b : rep.batches)
                for (const auto& e : b.entries) {
                    GroupElement shared = ctx.group.decode(e.token.view());
                    for (std::uint8_t ind = 0; ind < 2; ++ind) reported.insert(Token::of(ordered_token_for(shared, ind)));
                }
    for (int u = 0; u < r.num_users; ++u) {
        const auto& st = r.users[static_cast<std::size_t>(u)];
        if (!r.adopters[static_cast<std::size_t>(u)] || st.diagnosed) continue;
        std::vector<std::pair<std::int64_t, Token>> keys;
        std::vector<std::size_t> truth;
        for (const auto& [key, rec] : st.encounter_store) {
            if (reported.count(Token::of(*rec.ordered))) truth.push_back(keys.size());
            keys.push_back(key);
        }
        if (truth.empty()) continue;
        auto pr = bisection_probe(keys.size(), [&](const std::vector<std::size_t>& idx) {
            UserState probe;
            probe.id = st.id;
            probe.seed = st.seed;
            probe.last_query_day = day - 1;
            for (auto i : idx) probe.encounter_store.emplace(keys[i], st.encounter_store.at(keys[i]));
            return static_cast<std::size_t>(desire_query(ctx, server, probe, day, nullptr));
        });
        return probe_result(truth, pr, keys.size());
    }
    return ExposureTimeResult{0, 0, 0, 0, LeakValue::NotApplicable};
}

}  // namespace

ExposureTimeResult leak_exposure_time(const SimulationResult& r, const WorldTrace& w) {
    const auto& spec = r.ctx.spec;
    if (spec.id == ProtocolId::SentInteractive) return probe_epione(r);
    if (spec.id == ProtocolId::AgreedInteractive) return probe_desire(r);
    ExposureTimeResult res;
    if (spec.matcher != MatcherKind::User) return res;  // only an aggregate reaches the user

    // (user, slot) pairs where the user was close to someone diagnosed on a given day
    std::map<UserId, int> diag = diagnosis_days(r);
    std::set<std::tuple<int, UserId, std::int64_t>> truth;
    for (const auto& e : w.encounters) {
        if (e.distance > r.ctx.params.proximity_m) continue;
        for (std::int64_t s = e.start_slot(); s <= (e.start_minute + e.minutes - 1) / kMinutesPerSlot; ++s) {
            if (auto it = diag.find(e.b); it != diag.end()) truth.emplace(it->second, e.a, s);
            if (auto it = diag.find(e.a); it != diag.end()) truth.emplace(it->second, e.b, s);
        }
    }
    for (int u = 0; u < r.num_users; ++u)
        for (const auto& m : r.users[static_cast<std::size_t>(u)].match_log) {
            ++res.recovered;
            if (truth.count({m.round_day, u, m.slot.index})) ++res.correct;
        }
    double precision = res.recovered ? static_cast<double>(res.correct) / static_cast<double>(res.recovered) : 0;
    res.value = (res.recovered > 0 && precision >= 0.9) ? LeakValue::Leaks : LeakValue::Protected;
    return res;
}

ExposureStatusResult leak_exposure_status(const SimulationResult& r) {
    ExposureStatusResult res;
    std::size_t with_risk = 0;
    for (int u = 0; u < r.num_users; ++u) {
        int risk = r.risk[static_cast<std::size_t>(u)];
        if (risk > 0) ++with_risk;
        auto it = r.server_log.learned_risk.find(u);
        if (it == r.server_log.learned_risk.end() || it->second == 0) continue;
        ++res.users_learned;
        if (it->second == risk) ++res.users_matching;
    }
    if (res.users_learned == 0) res.value = LeakValue::Protected;
    else if (with_risk > 0 && static_cast<double>(res.users_matching) >= 0.9 * static_cast<double>(with_risk))
        res.value = LeakValue::Leaks;
    else res.value = LeakValue::Partial;
    return res;
}

}  // namespace pct
