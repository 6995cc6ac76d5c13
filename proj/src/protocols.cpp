#include "pct/protocols.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <tuple>

namespace pct {

namespace {

struct Row {
    ProtocolId id;
    const char* name;
    const char* label;
};

const Row kRows[] = {
    {ProtocolId::SentUserBasic, "sent-user-basic", "Sent-User Basic"},
    {ProtocolId::SentUserDaily, "sent-user-daily", "Sent-User w/ Daily Seed"},
    {ProtocolId::SentInteractive, "sent-interactive-epione", "Sent-Interactive (Epione)"},
    {ProtocolId::SentServer, "sent-server", "Sent-Server"},
    {ProtocolId::ReceivedUserBasic, "received-user-basic", "Received-User Basic"},
    {ProtocolId::ReceivedUserCleverParrot, "received-user-cleverparrot", "Received-User (CleverParrot)"},
    {ProtocolId::ReceivedInteractive, "received-interactive-ripsi", "Received-Interactive (RI-PSI)"},
    {ProtocolId::ReceivedServer, "received-server-robert", "Received-Server (ROBERT)"},
    {ProtocolId::AgreedUser, "agreed-user-pronto", "Agreed-User (Pronto-C2)"},
    {ProtocolId::AgreedInteractive, "agreed-interactive-desire", "Agreed-Interactive (DESIRE)"},
    {ProtocolId::AgreedServer, "agreed-server-sdh", "Agreed-Server (S-DH)"},
};

const Row& row(ProtocolId id) {
    for (const auto& r : kRows)
        if (r.id == id) return r;
    throw std::invalid_argument("unknown protocol id");
}

int window_first_day(int today, int days) { return std::max(0, today - days + 1); }

std::int64_t window_slots(const Context& ctx, int day) {
    int first = window_first_day(day, ctx.params.retention_days);
    return static_cast<std::int64_t>(day - first + 1) * kSlotsPerDay;
}

CostCounters* user_cost(const Context& ctx, UserId u) { return ctx.meter ? &ctx.meter->users[u] : nullptr; }

std::int64_t entries_bytes(const std::vector<ReportEntry>& es) {
    std::int64_t n = 4;
    for (const auto& e : es) n += 8 + static_cast<std::int64_t>(e.token.bytes.size());
    return n;
}

GroupElement as_element(const Context& ctx, const Token& t) { return ctx.group.decode(t.view()); }

}  // namespace

const std::vector<ProtocolId>& all_protocols() {
    static const std::vector<ProtocolId> ids = [] {
        std::vector<ProtocolId> v;
        for (const auto& r : kRows) v.push_back(r.id);
        return v;
    }();
    return ids;
}

const char* protocol_name(ProtocolId id) { return row(id).name; }
const char* protocol_label(ProtocolId id) { return row(id).label; }

ProtocolId protocol_from_name(const std::string& name) {
    for (const auto& r : kRows)
        if (name == r.name) return r.id;
    throw std::invalid_argument("unknown protocol name: " + name);
}

const char* to_string(ReportKind k) {
    switch (k) {
        case ReportKind::Sent: return "sent";
        case ReportKind::Received: return "received";
        case ReportKind::Agreed: return "agreed";
    }
    return "?";
}

const char* to_string(MatcherKind k) {
    switch (k) {
        case MatcherKind::User: return "user";
        case MatcherKind::Server: return "server";
        case MatcherKind::Interactive: return "interactive";
    }
    return "?";
}

void ProtocolSpec::validate() const {
    if (options.daily_seed && !(report_kind == ReportKind::Sent && matcher == MatcherKind::User))
        throw std::invalid_argument("daily_seed requires Sent/User");
    if (options.cuckoo && !options.daily_seed) throw std::invalid_argument("cuckoo requires daily_seed");
    if (options.query_and_discard && matcher != MatcherKind::Interactive)
        throw std::invalid_argument("query_and_discard requires the interactive matcher");
    if (beacon_registry && !(report_kind == ReportKind::Received && matcher == MatcherKind::Server))
        throw std::invalid_argument("beacon registry only for Received/Server");
}

ProtocolSpec instantiate(ProtocolId id) { return instantiate(id, ProtocolOptions{}); }

ProtocolSpec instantiate(ProtocolId id, const ProtocolOptions& options) {
    ProtocolSpec s;
    s.id = id;
    const char* prf_beacon_text = "b = H(s, t)";
    const char* group_beacon_text = "g^x where x = H(s, t)";
    switch (id) {
        case ProtocolId::SentUserBasic:
            s.report_kind = ReportKind::Sent;
            s.matcher = MatcherKind::User;
            s.beacon_content = prf_beacon_text;
            s.patient_report = "b";
            s.user_action = "Download patients beacons";
            break;
        case ProtocolId::SentUserDaily:
            s.report_kind = ReportKind::Sent;
            s.matcher = MatcherKind::User;
            s.options.daily_seed = true;
            s.options.cuckoo = options.cuckoo;
            s.beacon_content = "b = H(s_d, t) where s_d = H(s, d)";
            s.patient_report = "s_d";
            s.user_action = "Download patient daily seeds s_d";
            break;
        case ProtocolId::SentInteractive:
            s.report_kind = ReportKind::Sent;
            s.matcher = MatcherKind::Interactive;
            s.beacon_content = prf_beacon_text;
            s.patient_report = "b";
            s.user_action = "Run PSI-CA";
            break;
        case ProtocolId::SentServer:
            s.report_kind = ReportKind::Sent;
            s.matcher = MatcherKind::Server;
            s.beacon_content = prf_beacon_text;
            s.patient_report = "b";
            s.user_action = "Upload received beacons";
            break;
        case ProtocolId::ReceivedUserBasic:
            s.report_kind = ReportKind::Received;
            s.matcher = MatcherKind::User;
            s.options.disable_dedup = options.disable_dedup;
            s.dedup_published = !options.disable_dedup;
            s.beacon_content = prf_beacon_text;
            s.patient_report = "b'";
            s.user_action = "Download beacons";
            break;
        case ProtocolId::ReceivedUserCleverParrot:
            s.report_kind = ReportKind::Received;
            s.matcher = MatcherKind::User;
            s.group_beacons = true;
            s.randomized_receipts = true;
            s.beacon_content = group_beacon_text;
            s.patient_report = "g^y g^{x'y}";
            s.user_action = "Download patient tokens";
            break;
        case ProtocolId::ReceivedInteractive:
            s.report_kind = ReportKind::Received;
            s.matcher = MatcherKind::Interactive;
            s.group_beacons = true;
            s.beacon_content = group_beacon_text;
            s.patient_report = "g^{x'}";
            s.user_action = "PSI";
            break;
        case ProtocolId::ReceivedServer:
            s.report_kind = ReportKind::Received;
            s.matcher = MatcherKind::Server;
            s.beacon_registry = true;
            s.beacon_content = prf_beacon_text;
            s.patient_report = "b'";
            s.user_action = "Upload {b}";
            break;
        case ProtocolId::AgreedUser:
            s.report_kind = ReportKind::Agreed;
            s.matcher = MatcherKind::User;
            s.group_beacons = true;
            s.beacon_content = group_beacon_text;
            s.patient_report = "g^{xx'}";
            s.user_action = "Download patients tokens";
            break;
        case ProtocolId::AgreedInteractive:
            s.report_kind = ReportKind::Agreed;
            s.matcher = MatcherKind::Interactive;
            s.group_beacons = true;
            s.options.query_and_discard = true;
            s.beacon_content = group_beacon_text;
            s.patient_report = "g^{xx'}";
            s.user_action = "Query w/ H(g^{xx'} 1(g^x < g^{x'}))";
            break;
        case ProtocolId::AgreedServer:
            s.report_kind = ReportKind::Agreed;
            s.matcher = MatcherKind::Server;
            s.group_beacons = true;
            s.beacon_content = group_beacon_text;
            s.patient_report = "g^{xx'}";
            s.user_action = "Upload H(g^{xx'} 1(g^x < g^{x'}))";
            break;
    }
    s.validate();
    return s;
}

Context make_context(ProtocolId id, GroupKind kind, std::uint64_t seed) {
    Context ctx;
    ctx.spec = instantiate(id);
    ctx.group = Group::make(kind);
    Digest k = prf(std::string("pct/registry"), encode_u64(seed));
    ctx.registry_key.assign(k.bytes.begin(), k.bytes.end());
    return ctx;
}

// ---------------------------------------------------------------- PSI-CA

PsiServerSet psi_server_prepare(const Group& grp, const std::vector<Digest>& patient_items, Rng& rng) {
    PsiServerSet s;
    s.secret = grp.random_scalar(rng);
    s.published.reserve(patient_items.size());
    for (const auto& d : patient_items) s.published.push_back(Token::of(grp.exp(grp.hash_to_element(d), s.secret)));
    std::sort(s.published.begin(), s.published.end());
    return s;
}

std::size_t psi_ca_round(const Group& grp, const PsiServerSet& server, const std::vector<Digest>& user_items,
                         Rng& rng, PsiTranscript* transcript, CostCounters* cost) {
    if (user_items.empty()) return 0;
    Scalar r = grp.random_scalar(rng);
    std::vector<GroupElement> sent;
    sent.reserve(user_items.size());
    for (const auto& y : user_items) sent.push_back(grp.exp(grp.hash_to_element(y), r));

    // server side: apply s, shuffle (sorting destroys the order link)
    std::vector<GroupElement> back;
    back.reserve(sent.size());
    for (const auto& a : sent) {
        if (!grp.contains(a)) throw std::invalid_argument("psi-ca: message from a different group");
        back.push_back(grp.exp(a, server.secret));
    }
    std::sort(back.begin(), back.end());

    Scalar rinv = grp.inverse(r);
    std::vector<Token> mine;
    mine.reserve(back.size());
    for (const auto& b : back) mine.push_back(Token::of(grp.exp(b, rinv)));
    std::sort(mine.begin(), mine.end());

    std::size_t count = 0;
    auto it = server.published.begin();
    for (const auto& m : mine) {
        it = std::lower_bound(it, server.published.end(), m);
        if (it != server.published.end() && *it == m) ++count;
    }
    if (transcript) {
        for (const auto& a : sent) transcript->user_to_server.push_back(Token::of(a));
        for (const auto& b : back) transcript->server_to_user.push_back(Token::of(b));
        transcript->server_to_user.insert(transcript->server_to_user.end(), server.published.begin(),
                                          server.published.end());
    }
    if (cost) cost->exps += static_cast<std::int64_t>(2 * user_items.size());
    return count;
}

int epione_round(const Context& ctx, const PsiServerSet& server, UserState& user, int day, Rng& rng) {
    (void)day;
    std::map<int, std::vector<Digest>> buckets;
    std::int64_t items = 0;
    for (const auto& [key, rec] : user.encounter_store) {
        buckets[rec.session_minutes].push_back(rec.peer_beacon.digest());
        ++items;
    }
    CostCounters* c = user_cost(ctx, user.id);
    int risk = 0;
    for (const auto& [minutes, ys] : buckets) {
        std::size_t n = psi_ca_round(ctx.group, server, ys, rng, nullptr, c);
        risk += minutes * static_cast<int>(n);
    }
    if (c) {
        auto set_size = static_cast<double>(server.published.size());
        std::int64_t log_c = set_size > 1 ? static_cast<std::int64_t>(std::ceil(std::log2(set_size))) : 1;
        c->upload_tokens += items;
        c->upload_bytes += items * static_cast<std::int64_t>(ctx.group.element_size());
        c->download_tokens += items * log_c;
        c->comparisons += items * log_c;
        c->bulk_download_tokens += items + static_cast<std::int64_t>(server.published.size());
    }
    if (ctx.meter) ctx.meter->server_exps += items;
    return risk;
}

// ---------------------------------------------------------------- RI-PSI

namespace {

Scalar ri_blind_secret(const Context& ctx, UserState& user) {
    if (!user.ri_blind) {
        Bytes tag{'r', 'i', '-', 'p', 's', 'i'};
        user.ri_blind = ctx.group.scalar_from_digest(prf(user.seed, tag));
    }
    return *user.ri_blind;
}

}  // namespace

void ri_psi_daily_upload(const Context& ctx, ServerState& server, UserState& user, int day, ServerLog* log) {
    Scalar su = ri_blind_secret(ctx, user);
    Upload up;
    up.user = user.id;
    up.day = day;
    for (std::int64_t s = first_slot_of_day(day); s < first_slot_of_day(day + 1); ++s) {
        GroupElement b = as_element(ctx, beacon_for_slot(ctx, user, TimeSlot{s}));
        up.entries.push_back(UploadEntry{Token::of(blind_pow(ctx.group, b, su)), 0, day});
    }
    auto& store = server.ri_psi_uploads[user.id];
    store.insert(store.end(), up.entries.begin(), up.entries.end());
    int cutoff = day - ctx.params.retention_days + 1;
    std::erase_if(store, [&](const UploadEntry& e) { return e.day < cutoff; });
    if (CostCounters* c = user_cost(ctx, user.id)) {
        c->upload_tokens += static_cast<std::int64_t>(up.entries.size());
        c->upload_bytes += static_cast<std::int64_t>(up.serialize().size());
        c->exps += static_cast<std::int64_t>(up.entries.size());
    }
    if (log) log->uploads.push_back(std::move(up));
}

RiPsiOutcome ri_psi_round(const Context& ctx, ServerState& server, UserState& user,
                          const std::vector<const Report*>& new_reports, Rng& rng, bool drop_one) {
    RiPsiOutcome out;
    const Group& grp = ctx.group;
    Scalar t = grp.random_scalar(rng);

    // server -> user: per-patient batches blinded with t
    std::vector<std::vector<std::pair<GroupElement, int>>> batches;
    std::size_t total = 0;
    for (const Report* r : new_reports) {
        std::vector<std::pair<GroupElement, int>> b;
        for (const auto& batch : r->batches)
            for (const auto& e : batch.entries) {
                GroupElement g;
                try {
                    g = as_element(ctx, e.token);
                } catch (const std::invalid_argument&) {
                    continue;
                }
                b.emplace_back(blind_pow(grp, g, t), e.minutes);
            }
        total += b.size();
        out.per_patient_counts.push_back(static_cast<int>(b.size()));
        batches.push_back(std::move(b));
    }
    if (total == 0) return out;

    // user: raise to s, permute across everything
    Scalar su = ri_blind_secret(ctx, user);
    std::vector<std::pair<Token, int>> up;
    up.reserve(total);
    for (const auto& b : batches)
        for (const auto& [g, m] : b) up.emplace_back(Token::of(grp.exp(g, su)), m);
    std::sort(up.begin(), up.end());
    if (drop_one && !up.empty()) up.pop_back();
    for (const auto& [tok, m] : up) out.reupload.push_back(tok);

    if (CostCounters* c = user_cost(ctx, user.id)) {
        c->download_tokens += static_cast<std::int64_t>(total);
        c->upload_tokens += static_cast<std::int64_t>(up.size());
        c->exps += static_cast<std::int64_t>(total);
        c->comparisons += static_cast<std::int64_t>(total);
    }
    if (up.size() != total) {
        out.aborted = true;
        out.reupload.clear();
        return out;
    }

    // server: unblind with t^-1, match against the user's committed g^{xs}
    Scalar tinv = grp.inverse(t);
    std::unordered_set<Token, TokenHash> committed;
    for (const auto& e : server.ri_psi_uploads[user.id]) committed.insert(e.token);
    for (const auto& [tok, m] : up) {
        Token plain = Token::of(grp.exp(as_element(ctx, tok), tinv));
        if (committed.count(plain)) out.risk += m;
    }
    if (ctx.meter) {
        ctx.meter->server_exps += static_cast<std::int64_t>(2 * total);
        ctx.meter->server_comparisons += static_cast<std::int64_t>(committed.size()) * static_cast<std::int64_t>(total);
    }
    out.server_view[user.id] = out.risk;
    return out;
}

// ---------------------------------------------------------------- DESIRE

int desire_query(const Context& ctx, ServerState& server, UserState& user, int day, ServerLog* log) {
    StoredQuery q;
    q.user = user.id;
    q.day = day;
    std::unordered_map<Token, int, TokenHash> by_token;
    for (const auto& [key, rec] : user.encounter_store) {
        Token t = Token::of(*rec.ordered);
        q.entries.push_back(UploadEntry{t, rec.session_minutes, rec.slot.day()});
        by_token[t] += rec.session_minutes;
    }
    int since = user.last_query_day;
    int risk = 0;
    std::int64_t compared = 0;
    for (const auto& rep : server.patient_reports) {
        if (rep.diagnosis_day <= since || rep.patient == user.id) continue;
        int from_this = 0;
        for (const auto& b : rep.batches)
            for (const auto& e : b.entries) {
                ++compared;
                GroupElement shared;
                try {
                    shared = as_element(ctx, e.token);
                } catch (const std::invalid_argument&) {
                    continue;
                }
                for (std::uint8_t ind = 0; ind < 2; ++ind) {
                    auto it = by_token.find(Token::of(ordered_token_for(shared, ind)));
                    if (it != by_token.end()) from_this += it->second;
                }
            }
        if (from_this > 0 && log) log->matched_pairs.emplace(rep.patient, user.id);
        risk += from_this;
    }
    user.last_query_day = day;
    if (CostCounters* c = user_cost(ctx, user.id)) {
        c->upload_tokens += static_cast<std::int64_t>(q.entries.size());
        c->upload_bytes += static_cast<std::int64_t>(Upload{q.user, q.day, q.entries}.serialize().size());
    }
    if (ctx.meter) ctx.meter->server_comparisons += compared * static_cast<std::int64_t>(q.entries.size());
    if (log) {
        log->learned_risk[user.id] += risk;
        log->queries.push_back(q);
    }
    if (server.query_store_policy == QueryStorePolicy::Store) server.stored_queries.push_back(std::move(q));
    return risk;
}

// ---------------------------------------------------------------- S-DH

std::map<UserId, int> sdh_match(const Context& ctx, ServerState& server, const Report& report, ServerLog* log) {
    std::unordered_map<Token, std::vector<std::pair<UserId, int>>, TokenHash> index;
    std::int64_t stored = 0;
    for (const auto& [u, entries] : server.uploaded_user_tokens) {
        if (u == report.patient) continue;
        for (const auto& e : entries) {
            index[e.token].emplace_back(u, e.minutes);
            ++stored;
        }
    }
    std::map<UserId, int> risk;
    std::int64_t reported = 0;
    for (const auto& b : report.batches)
        for (const auto& e : b.entries) {
            ++reported;
            GroupElement shared;
            try {
                shared = as_element(ctx, e.token);
            } catch (const std::invalid_argument&) {
                continue;
            }
            for (std::uint8_t ind = 0; ind < 2; ++ind) {
                auto it = index.find(Token::of(ordered_token_for(shared, ind)));
                if (it == index.end()) continue;
                for (const auto& [u, m] : it->second) risk[u] += m;
            }
        }
    server.exposures_caused[{report.patient, report.diagnosis_day}] += static_cast<int>(risk.size());
    if (ctx.meter) ctx.meter->server_comparisons += stored * reported;
    if (log)
        for (const auto& [u, m] : risk) {
            log->matched_pairs.emplace(report.patient, u);
            log->learned_risk[u] += m;
        }
    return risk;
}

// ---------------------------------------------------------------- rounds

namespace {

struct RoundEnv {
    const Context& ctx;
    ServerState& server;
    std::vector<UserState>& users;
    int day;
    Rng& rng;
    ServerLog* log;
    const std::vector<bool>& adopters;
    std::vector<const Report*> fresh;
    RoundResult& res;

    bool active(UserId u) const { return adopters.empty() || adopters[static_cast<std::size_t>(u)]; }

    void log_match(UserState& u, const TimeSlot& slot, int minutes) {
        u.match_log.push_back(MatchLogEntry{day, slot, minutes});
    }

    void publish(bool dedup, bool keep_day) {
        auto& out = res.published.entries;
        if (dedup) {
            std::map<Token, int> merged;
            for (const Report* r : fresh)
                for (const auto& b : r->batches)
                    for (const auto& e : b.entries) merged[e.token] += e.minutes;
            for (const auto& [t, m] : merged) out.push_back(ReportEntry{t, m, -1});
        } else {
            for (const Report* r : fresh)
                for (const auto& b : r->batches)
                    for (const auto& e : b.entries)
                        out.push_back(ReportEntry{e.token, e.minutes, keep_day ? first_slot_of_day(b.day) : -1});
            std::sort(out.begin(), out.end(), [](const ReportEntry& a, const ReportEntry& b) {
                return std::tie(a.token, a.slot, a.minutes) < std::tie(b.token, b.slot, b.minutes);
            });
        }
    }

    void count_download(UserId u, std::int64_t tokens, std::int64_t bytes) {
        if (CostCounters* c = user_cost(ctx, u)) {
            c->download_tokens += tokens;
            c->download_bytes += bytes;
        }
    }
};

void round_sent_user(RoundEnv& env) {
    const Context& ctx = env.ctx;
    env.publish(false, true);
    const auto& pub = env.res.published.entries;
    if (pub.empty()) return;

    TokenSet exact;
    std::optional<CuckooFilter> filter;
    std::int64_t expanded = 0;
    if (ctx.spec.options.daily_seed) {
        std::vector<Digest> items;
        for (const auto& e : pub) {
            Bytes seed(e.token.bytes.begin(), e.token.bytes.end());
            int d = static_cast<int>(e.slot / kSlotsPerDay);
            for (std::int64_t s = first_slot_of_day(d); s < first_slot_of_day(d + 1); ++s) {
                Beacon b = prf_beacon(seed, TimeSlot{s});
                exact.insert(b);
                items.push_back(b.digest());
            }
        }
        expanded = static_cast<std::int64_t>(items.size());
        if (ctx.spec.options.cuckoo) filter = cuckoo_build(items, ctx.params.cuckoo_fp_target);
    } else {
        for (const auto& e : pub) exact.insert(e.token);
        expanded = static_cast<std::int64_t>(pub.size());
    }

    for (auto& u : env.users) {
        if (!env.active(u.id)) continue;
        if (filter)
            env.count_download(u.id, static_cast<std::int64_t>(filter->capacity()),
                               static_cast<std::int64_t>(filter->serialized_bytes()));
        else
            env.count_download(u.id, static_cast<std::int64_t>(pub.size()), entries_bytes(pub));
        if (CostCounters* c = user_cost(ctx, u.id))
            c->comparisons += static_cast<std::int64_t>(u.encounter_store.size()) * expanded;
        for (const auto& [key, rec] : u.encounter_store) {
            bool hit = filter ? filter->contains(rec.peer_beacon.digest()) : exact.count(rec.peer_beacon) > 0;
            if (!hit) continue;
            env.res.risk_delta[u.id] += rec.session_minutes;
            env.log_match(u, rec.slot, rec.session_minutes);
        }
    }
}

void round_epione(RoundEnv& env) {
    std::vector<Digest> items;
    for (const Report* r : env.fresh)
        for (const auto& b : r->batches)
            for (const auto& e : b.entries) items.push_back(e.token.digest());
    if (items.empty()) return;
    PsiServerSet set = psi_server_prepare(env.ctx.group, items, env.rng);
    if (env.ctx.meter) env.ctx.meter->server_exps += static_cast<std::int64_t>(items.size());
    for (auto& u : env.users) {
        if (!env.active(u.id)) continue;
        int r = epione_round(env.ctx, set, u, env.day, env.rng);
        if (r > 0) env.res.risk_delta[u.id] += r;
    }
}

void round_sent_server(RoundEnv& env) {
    for (const Report* r : env.fresh) {
        TokenSet beacons;
        for (const auto& b : r->batches)
            for (const auto& e : b.entries) beacons.insert(e.token);
        int caused = 0;
        for (const auto& [u, entries] : env.server.uploaded_user_tokens) {
            if (u == r->patient) continue;
            int m = 0;
            for (const auto& e : entries)
                if (beacons.count(e.token)) m += e.minutes;
            if (env.ctx.meter)
                env.ctx.meter->server_comparisons +=
                    static_cast<std::int64_t>(entries.size()) * static_cast<std::int64_t>(beacons.size());
            if (m == 0) continue;
            ++caused;
            env.res.risk_delta[u] += m;
            if (env.log) {
                env.log->learned_risk[u] += m;
                env.log->matched_pairs.emplace(r->patient, u);
            }
        }
        env.server.exposures_caused[{r->patient, r->diagnosis_day}] += caused;
    }
}

void round_received_user(RoundEnv& env) {
    const Context& ctx = env.ctx;
    env.publish(ctx.spec.dedup_published, false);
    const auto& pub = env.res.published.entries;
    if (pub.empty()) return;
    std::unordered_multimap<Token, int, TokenHash> by_token;
    for (const auto& e : pub) by_token.emplace(e.token, e.minutes);
    int first = window_first_day(env.day, ctx.params.retention_days);
    for (auto& u : env.users) {
        if (!env.active(u.id)) continue;
        env.count_download(u.id, static_cast<std::int64_t>(pub.size()), entries_bytes(pub));
        if (CostCounters* c = user_cost(ctx, u.id))
            c->comparisons += window_slots(ctx, env.day) * static_cast<std::int64_t>(pub.size());
        for (std::int64_t s = first_slot_of_day(first); s < first_slot_of_day(env.day + 1); ++s) {
            Beacon b = beacon_for_slot(ctx, u, TimeSlot{s});
            auto [lo, hi] = by_token.equal_range(b);
            for (auto it = lo; it != hi; ++it) {
                env.res.risk_delta[u.id] += it->second;
                env.log_match(u, TimeSlot{s}, it->second);
            }
        }
    }
}

void round_cleverparrot(RoundEnv& env) {
    const Context& ctx = env.ctx;
    const Group& grp = ctx.group;
    env.publish(false, true);
    const auto& pub = env.res.published.entries;
    if (pub.empty()) return;
    std::size_t half = grp.element_size();
    struct Receipt {
        GroupElement u, v;
        int minutes;
        int day;
    };
    std::vector<Receipt> receipts;
    receipts.reserve(pub.size());
    for (const auto& e : pub) {
        if (e.token.bytes.size() != 2 * half) continue;
        auto view = e.token.view();
        try {
            receipts.push_back(Receipt{grp.decode(view.subspan(0, half)), grp.decode(view.subspan(half, half)),
                                       e.minutes, static_cast<int>(e.slot / kSlotsPerDay)});
        } catch (const std::invalid_argument&) {
        }
    }
    for (auto& u : env.users) {
        if (!env.active(u.id)) continue;
        env.count_download(u.id, static_cast<std::int64_t>(pub.size()), entries_bytes(pub));
        CostCounters* c = user_cost(ctx, u.id);
        if (c) c->comparisons += window_slots(ctx, env.day) * static_cast<std::int64_t>(pub.size());
        for (const auto& r : receipts) {
            auto lo = u.active_slots.lower_bound(first_slot_of_day(r.day));
            auto hi = u.active_slots.lower_bound(first_slot_of_day(r.day + 1));
            for (auto it = lo; it != hi; ++it) {
                const SentMaterial& mine = sent_material(ctx, u, TimeSlot{*it});
                if (c) c->exps += 1;
                if (grp.exp(r.u, *mine.secret) == r.v) {
                    env.res.risk_delta[u.id] += r.minutes;
                    env.log_match(u, TimeSlot{*it}, r.minutes);
                    break;
                }
            }
        }
    }
}

void round_ripsi(RoundEnv& env) {
    for (auto& u : env.users) {
        if (!env.active(u.id)) continue;
        ri_psi_daily_upload(env.ctx, env.server, u, env.day, env.log);
    }
    if (env.fresh.empty()) return;
    for (auto& u : env.users) {
        if (!env.active(u.id)) continue;
        RiPsiOutcome o = ri_psi_round(env.ctx, env.server, u, env.fresh, env.rng);
        if (o.aborted) {
            env.res.aborted = true;
            env.res.error = "ri-psi: cardinality mismatch";
            continue;
        }
        if (o.risk > 0) env.res.risk_delta[u.id] += o.risk;
        if (env.log) {
            env.log->learned_risk[u.id] += o.risk;
            if (o.risk > 0) env.log->round_user_matches[env.day][u.id] += o.risk;
        }
    }
}

void round_robert(RoundEnv& env) {
    const Context& ctx = env.ctx;
    std::int64_t c_total = 0;
    for (const Report* r : env.fresh) {
        std::set<UserId> owners;
        for (const auto& b : r->batches)
            for (const auto& e : b.entries) {
                ++c_total;
                auto it = env.server.beacon_registry.find(e.token);
                if (it == env.server.beacon_registry.end() || it->second.user == r->patient) continue;
                UserId owner = it->second.user;
                owners.insert(owner);
                env.res.risk_delta[owner] += e.minutes;
                if (env.log) {
                    env.log->learned_risk[owner] += e.minutes;
                    env.log->matched_pairs.emplace(r->patient, owner);
                }
            }
        env.server.exposures_caused[{r->patient, r->diagnosis_day}] += static_cast<int>(owners.size());
    }
    // status poll: each user uploads her sent beacons of the window
    std::int64_t ws = window_slots(ctx, env.day);
    for (auto& u : env.users) {
        if (!env.active(u.id)) continue;
        if (CostCounters* c = user_cost(ctx, u.id)) {
            c->upload_tokens += ws;
            c->upload_bytes += 4 + ws * 12 + ws * 32;
        }
        if (ctx.meter) ctx.meter->server_comparisons += ws * c_total;
    }
}

void round_agreed_user(RoundEnv& env) {
    env.publish(false, false);
    const auto& pub = env.res.published.entries;
    if (pub.empty()) return;
    std::unordered_map<Token, int, TokenHash> counts;
    for (const auto& e : pub) ++counts[e.token];
    for (auto& u : env.users) {
        if (!env.active(u.id)) continue;
        env.count_download(u.id, static_cast<std::int64_t>(pub.size()), entries_bytes(pub));
        if (CostCounters* c = user_cost(env.ctx, u.id))
            c->comparisons += static_cast<std::int64_t>(u.encounter_store.size()) * static_cast<std::int64_t>(pub.size());
        std::unordered_map<Token, int, TokenHash> mine_reported;
        for (const auto& t : u.reported_this_round) ++mine_reported[t];
        for (const auto& [key, rec] : u.encounter_store) {
            auto it = counts.find(*rec.derived_token);
            if (it == counts.end()) continue;
            int others = it->second - mine_reported[*rec.derived_token];
            if (others <= 0) continue;
            env.res.risk_delta[u.id] += rec.session_minutes;
            env.log_match(u, rec.slot, rec.session_minutes);
        }
    }
}

void round_desire(RoundEnv& env) {
    for (auto& u : env.users) {
        if (!env.active(u.id)) continue;
        int r = desire_query(env.ctx, env.server, u, env.day, env.log);
        if (r > 0) env.res.risk_delta[u.id] += r;
    }
}

void round_sdh(RoundEnv& env) {
    for (const Report* r : env.fresh) {
        auto risk = sdh_match(env.ctx, env.server, *r, env.log);
        for (const auto& [u, m] : risk) env.res.risk_delta[u] += m;
    }
}

}  // namespace

RoundResult match_round(const Context& ctx, ServerState& server, std::vector<UserState>& users, int day, Rng& rng,
                        ServerLog* log, const std::vector<bool>& adopters) {
    RoundResult res;
    res.published.day = day;
    RoundEnv env{ctx, server, users, day, rng, log, adopters, {}, res};
    for (auto idx : server.pending_reports) {
        env.fresh.push_back(&server.patient_reports[idx]);
        res.published.patients.push_back(server.patient_reports[idx].patient);
    }
    if (log && !env.fresh.empty()) log->round_patients[day] = res.published.patients;

    switch (ctx.spec.id) {
        case ProtocolId::SentUserBasic:
        case ProtocolId::SentUserDaily: round_sent_user(env); break;
        case ProtocolId::SentInteractive: round_epione(env); break;
        case ProtocolId::SentServer: round_sent_server(env); break;
        case ProtocolId::ReceivedUserBasic: round_received_user(env); break;
        case ProtocolId::ReceivedUserCleverParrot: round_cleverparrot(env); break;
        case ProtocolId::ReceivedInteractive: round_ripsi(env); break;
        case ProtocolId::ReceivedServer: round_robert(env); break;
        case ProtocolId::AgreedUser: round_agreed_user(env); break;
        case ProtocolId::AgreedInteractive: round_desire(env); break;
        case ProtocolId::AgreedServer: round_sdh(env); break;
    }

    server.pending_reports.clear();
    for (auto& u : users) {
        u.reported_this_round.clear();
        auto it = res.risk_delta.find(u.id);
        if (it != res.risk_delta.end()) u.notified_risk += it->second;
    }
    return res;
}

}  // namespace pct
