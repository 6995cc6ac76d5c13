#include "pct/framework.hpp"

#include <algorithm>

namespace pct {

namespace {

void put_u32(Bytes& out, std::uint32_t v) {
    for (int i = 3; i >= 0; --i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_token(Bytes& out, const Token& t) {
    put_u32(out, static_cast<std::uint32_t>(t.bytes.size()));
    out.insert(out.end(), t.bytes.begin(), t.bytes.end());
}

Bytes slot_message(TimeSlot slot) { return encode_u64(static_cast<std::uint64_t>(slot.index)); }

int window_first_day(int today, int days) { return std::max(0, today - days + 1); }

}  // namespace

Digest Token::digest() const {
    if (bytes.size() != 32) throw std::invalid_argument("token is not a digest");
    Digest d;
    std::copy(bytes.begin(), bytes.end(), d.bytes.begin());
    return d;
}

UserState make_user(UserId id, std::uint64_t master_seed) {
    UserState u;
    u.id = id;
    Bytes msg = encode_u64(master_seed);
    Bytes idb = encode_u64(static_cast<std::uint64_t>(id));
    msg.insert(msg.end(), idb.begin(), idb.end());
    Digest d = prf(std::string("pct/user-seed"), msg);
    u.seed.assign(d.bytes.begin(), d.bytes.end());
    return u;
}

std::vector<EncounterRecord> records_in_days(const UserState& user, int first_day, int last_day) {
    std::vector<EncounterRecord> out;
    for (const auto& [key, rec] : user.encounter_store) {
        int d = rec.slot.day();
        if (d >= first_day && d <= last_day) out.push_back(rec);
    }
    return out;
}

Bytes derive_daily_seed(const Bytes& seed, int day) {
    Digest d = prf(seed, encode_u64(static_cast<std::uint64_t>(day)));
    return Bytes(d.bytes.begin(), d.bytes.end());
}

const Bytes& daily_seed(UserState& user, int day) {
    auto it = user.daily_seeds.find(day);
    if (it == user.daily_seeds.end()) it = user.daily_seeds.emplace(day, derive_daily_seed(user.seed, day)).first;
    return it->second;
}

Beacon prf_beacon(const Bytes& seed, TimeSlot slot) { return Token::of(prf(seed, slot_message(slot))); }

namespace {

Beacon registry_beacon(const Context& ctx, UserId user, TimeSlot slot) {
    Bytes msg = encode_u64(static_cast<std::uint64_t>(user));
    Bytes sb = slot_message(slot);
    msg.insert(msg.end(), sb.begin(), sb.end());
    return Token::of(prf(ctx.registry_key, msg));
}

SentMaterial compute_material(const Context& ctx, UserState& user, TimeSlot slot) {
    SentMaterial m;
    if (ctx.spec.beacon_registry) {
        m.beacon = registry_beacon(ctx, user.id, slot);
    } else if (ctx.spec.group_beacons) {
        Scalar x = ctx.group.derive_scalar(user.seed, slot.index);
        m.beacon = Token::of(ctx.group.exp_g(x));
        m.secret = x;
    } else if (ctx.spec.options.daily_seed) {
        m.beacon = prf_beacon(daily_seed(user, slot.day()), slot);
    } else {
        m.beacon = prf_beacon(user.seed, slot);
    }
    return m;
}

// Beacon a household peer would broadcast, derived from the exchanged seed.
Beacon peer_beacon_from_seed(const Context& ctx, const Bytes& peer_seed, TimeSlot slot) {
    if (ctx.spec.group_beacons) return Token::of(ctx.group.exp_g(ctx.group.derive_scalar(peer_seed, slot.index)));
    if (ctx.spec.options.daily_seed) return prf_beacon(derive_daily_seed(peer_seed, slot.day()), slot);
    return prf_beacon(peer_seed, slot);
}

}  // namespace

const SentMaterial& sent_material(const Context& ctx, UserState& user, TimeSlot slot) {
    auto it = user.sent_log.find(slot.index);
    if (it == user.sent_log.end()) it = user.sent_log.emplace(slot.index, compute_material(ctx, user, slot)).first;
    return it->second;
}

Beacon beacon_for_slot(const Context& ctx, UserState& user, TimeSlot slot) {
    return sent_material(ctx, user, slot).beacon;
}

void register_user_day(const Context& ctx, ServerState& server, UserId user, int day) {
    if (!ctx.spec.beacon_registry) return;
    for (std::int64_t s = first_slot_of_day(day); s < first_slot_of_day(day + 1); ++s)
        server.beacon_registry[registry_beacon(ctx, user, TimeSlot{s})] = RegistryEntry{user, s};
}

void record_reception(const Context& ctx, UserState& user, const Beacon& beacon, TimeSlot slot, double distance,
                      int minutes) {
    record_reception_as(ctx, user, user, beacon, slot, distance, minutes);
}

void record_reception_as(const Context& ctx, UserState& holder, UserState& mine_of, const Beacon& beacon,
                         TimeSlot slot, double distance, int minutes) {
    if (distance > ctx.params.proximity_m || minutes <= 0) return;

    std::optional<GroupElement> theirs;
    if (ctx.spec.group_beacons) {
        try {
            theirs = ctx.group.decode(beacon.view());
        } catch (const std::invalid_argument&) {
            ++holder.dropped_malformed;
            return;
        }
        if (ctx.group.is_identity(*theirs)) {
            ++holder.dropped_malformed;
            return;
        }
    } else if (beacon.bytes.size() != 32) {
        ++holder.dropped_malformed;
        return;
    }

    for (const auto& peer : holder.household_peers) {
        if (peer_beacon_from_seed(ctx, peer, slot) == beacon) {
            ++holder.dropped_household;
            return;
        }
    }

    if (ctx.limits.user_limit_enabled) {
        if (holder.suppressed_slots.count(slot.index)) return;
        auto& heard = holder.streams_heard[slot.index];
        heard.insert(beacon);
        if (static_cast<int>(heard.size()) > ctx.limits.per_user_device_cap) {
            holder.suppressed_slots.insert(slot.index);
            ++holder.suppression_alerts;
            std::erase_if(holder.encounter_store, [&](const auto& kv) { return kv.first.first == slot.index; });
            std::erase_if(holder.pending, [&](const auto& kv) { return kv.first.first == slot.index; });
            return;
        }
    }

    auto key = std::make_pair(slot.index, beacon);
    auto it = holder.encounter_store.find(key);
    if (it != holder.encounter_store.end()) {
        it->second.session_minutes += minutes;
        return;
    }
    int total = (holder.pending[key] += minutes);
    if (total < ctx.params.min_session_minutes) return;
    holder.pending.erase(key);

    EncounterRecord rec;
    rec.slot = slot;
    rec.peer_beacon = beacon;
    rec.session_minutes = total;
    if (ctx.spec.report_kind == ReportKind::Agreed) {
        const SentMaterial& mine = sent_material(ctx, mine_of, slot);
        GroupElement mine_elem = ctx.group.decode(mine.beacon.view());
        if (mine_elem == *theirs) {
            ++holder.dropped_malformed;
            return;
        }
        GroupElement shared = dh_shared(ctx.group, *mine.secret, *theirs);
        rec.derived_token = Token::of(shared);
        rec.ordered = ordered_token(shared, mine_elem, *theirs);
        if (ctx.meter) ctx.meter->users[holder.id].exps += 1;
    }
    holder.encounter_store.emplace(key, std::move(rec));
}

void maintenance(const Context& ctx, UserState& user, int today) {
    int cutoff = today - ctx.params.retention_days + 1;
    std::int64_t cut_slot = first_slot_of_day(cutoff);
    std::erase_if(user.encounter_store, [&](const auto& kv) { return kv.first.first < cut_slot; });
    std::erase_if(user.pending, [&](const auto& kv) { return kv.first.first < cut_slot; });
    std::erase_if(user.sent_log, [&](const auto& kv) { return kv.first < cut_slot; });
    std::erase_if(user.daily_seeds, [&](const auto& kv) { return kv.first < cutoff; });
    std::erase_if(user.active_slots, [&](std::int64_t s) { return s < cut_slot; });
    std::erase_if(user.streams_heard, [&](const auto& kv) { return kv.first < cut_slot; });
    std::erase_if(user.suppressed_slots, [&](std::int64_t s) { return s < cut_slot; });
}

ExposureAggregate aggregate_exposure(const std::vector<EncounterRecord>& matched, const Params& params) {
    int risk = 0;
    for (const auto& r : matched) risk += r.session_minutes;
    return aggregate_minutes(risk, params);
}

ExposureAggregate aggregate_minutes(int minutes, const Params& params) {
    return ExposureAggregate{minutes, minutes >= params.exposure_threshold_minutes};
}

std::size_t Report::token_count() const {
    std::size_t n = 0;
    for (const auto& b : batches) n += b.entries.size();
    return n;
}

Bytes Report::serialize() const {
    Bytes out;
    put_u32(out, static_cast<std::uint32_t>(batches.size()));
    for (const auto& b : batches) {
        put_u32(out, static_cast<std::uint32_t>(b.day));
        put_u32(out, static_cast<std::uint32_t>(b.entries.size()));
        for (const auto& e : b.entries) {
            put_token(out, e.token);
            put_u32(out, static_cast<std::uint32_t>(e.minutes));
        }
    }
    return out;
}

Bytes Upload::serialize() const {
    Bytes out;
    put_u32(out, static_cast<std::uint32_t>(entries.size()));
    for (const auto& e : entries) {
        put_token(out, e.token);
        put_u32(out, static_cast<std::uint32_t>(e.minutes));
        put_u32(out, static_cast<std::uint32_t>(e.day));
    }
    return out;
}

Bytes ServerState::serialize() const {
    Bytes out;
    put_u32(out, static_cast<std::uint32_t>(patient_reports.size()));
    for (const auto& r : patient_reports) {
        put_u32(out, static_cast<std::uint32_t>(r.patient));
        put_u32(out, static_cast<std::uint32_t>(r.diagnosis_day));
        Bytes rb = r.serialize();
        out.insert(out.end(), rb.begin(), rb.end());
    }
    put_u32(out, static_cast<std::uint32_t>(pending_reports.size()));
    for (auto i : pending_reports) put_u32(out, static_cast<std::uint32_t>(i));
    auto dump_uploads = [&](const std::map<UserId, std::vector<UploadEntry>>& m) {
        put_u32(out, static_cast<std::uint32_t>(m.size()));
        for (const auto& [u, entries] : m) {
            Upload up{u, 0, entries};
            put_u32(out, static_cast<std::uint32_t>(u));
            Bytes b = up.serialize();
            out.insert(out.end(), b.begin(), b.end());
        }
    };
    dump_uploads(uploaded_user_tokens);
    dump_uploads(ri_psi_uploads);
    std::vector<std::pair<Token, RegistryEntry>> reg(beacon_registry.begin(), beacon_registry.end());
    std::sort(reg.begin(), reg.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
    put_u32(out, static_cast<std::uint32_t>(reg.size()));
    for (const auto& [t, e] : reg) {
        put_token(out, t);
        put_u32(out, static_cast<std::uint32_t>(e.user));
        put_u32(out, static_cast<std::uint32_t>(e.slot));
    }
    put_u32(out, static_cast<std::uint32_t>(stored_queries.size()));
    for (const auto& q : stored_queries) {
        Upload up{q.user, q.day, q.entries};
        Bytes b = up.serialize();
        out.insert(out.end(), b.begin(), b.end());
    }
    put_u32(out, static_cast<std::uint32_t>(exposures_caused.size()));
    for (const auto& [k, v] : exposures_caused) {
        put_u32(out, static_cast<std::uint32_t>(k.first));
        put_u32(out, static_cast<std::uint32_t>(k.second));
        put_u32(out, static_cast<std::uint32_t>(v));
    }
    return out;
}

Report patient_report(const Context& ctx, UserState& user, int diagnosis_day, Rng& rng) {
    Report rep;
    rep.patient = user.id;
    rep.diagnosis_day = diagnosis_day;
    int first = window_first_day(diagnosis_day, ctx.params.infectious_days);
    const auto& spec = ctx.spec;
    for (int d = first; d <= diagnosis_day; ++d) {
        ReportBatch batch;
        batch.day = d;
        if (spec.report_kind == ReportKind::Sent) {
            if (spec.options.daily_seed) {
                batch.entries.push_back(ReportEntry{Token::of(daily_seed(user, d)), 0, -1});
            } else {
                for (std::int64_t s = first_slot_of_day(d); s < first_slot_of_day(d + 1); ++s)
                    batch.entries.push_back(ReportEntry{beacon_for_slot(ctx, user, TimeSlot{s}), 0, -1});
            }
        } else {
            for (const auto& [key, rec] : user.encounter_store) {
                if (rec.slot.day() != d) continue;
                if (spec.report_kind == ReportKind::Agreed) {
                    batch.entries.push_back(ReportEntry{*rec.derived_token, rec.session_minutes, -1});
                } else if (spec.randomized_receipts) {
                    auto [u, v] = randomized_receipt(ctx.group, ctx.group.decode(rec.peer_beacon.view()), rng);
                    Token t(Token::of(u).bytes + Token::of(v).bytes);
                    batch.entries.push_back(ReportEntry{t, rec.session_minutes, -1});
                    if (ctx.meter) ctx.meter->users[user.id].exps += 2;
                } else {
                    batch.entries.push_back(ReportEntry{rec.peer_beacon, rec.session_minutes, -1});
                }
            }
        }
        rep.batches.push_back(std::move(batch));
    }
    user.diagnosed = true;
    user.reported_this_round.clear();
    for (const auto& b : rep.batches)
        for (const auto& e : b.entries) user.reported_this_round.push_back(e.token);
    if (ctx.meter) {
        ctx.meter->patient_report_tokens[user.id] += static_cast<std::int64_t>(rep.token_count());
        ctx.meter->patient_report_bytes[user.id] += static_cast<std::int64_t>(rep.serialize().size());
    }
    return rep;
}

std::optional<Upload> user_periodic_upload(const Context& ctx, UserState& user, int day) {
    if (ctx.spec.matcher != MatcherKind::Server) return std::nullopt;
    Upload up;
    up.user = user.id;
    up.day = day;
    if (ctx.spec.id == ProtocolId::SentServer) {
        for (const auto& [key, rec] : user.encounter_store)
            up.entries.push_back(UploadEntry{rec.peer_beacon, rec.session_minutes, rec.slot.day()});
    } else if (ctx.spec.id == ProtocolId::AgreedServer) {
        for (auto& [key, rec] : user.encounter_store) {
            if (rec.uploaded) continue;
            rec.uploaded = true;
            up.entries.push_back(UploadEntry{Token::of(*rec.ordered), rec.session_minutes, rec.slot.day()});
        }
    } else {
        return std::nullopt;
    }
    if (ctx.meter) {
        auto& c = ctx.meter->users[user.id];
        c.upload_tokens += static_cast<std::int64_t>(up.entries.size());
        c.upload_bytes += static_cast<std::int64_t>(up.serialize().size());
    }
    return up;
}

std::size_t ingest_report(const Context& ctx, ServerState& server, Report report, ServerLog* log) {
    std::size_t cap = ctx.limits.max_report_tokens_per_day;
    if (ctx.spec.report_kind == ReportKind::Sent) cap = ctx.spec.options.daily_seed ? 1 : kSlotsPerDay;
    for (auto& b : report.batches) {
        if (b.entries.size() > cap) {
            b.entries.resize(cap);
            report.truncated = true;
        }
    }
    int max_days = ctx.params.infectious_days;
    if (static_cast<int>(report.batches.size()) > max_days) {
        report.batches.resize(static_cast<std::size_t>(max_days));
        report.truncated = true;
    }
    if (log) log->reports.push_back(report);
    server.patient_reports.push_back(std::move(report));
    server.pending_reports.push_back(server.patient_reports.size() - 1);
    return server.patient_reports.size() - 1;
}

void ingest_upload(const Context& ctx, ServerState& server, const Upload& up, ServerLog* log) {
    if (log) log->uploads.push_back(up);
    if (ctx.spec.id == ProtocolId::SentServer) {
        server.uploaded_user_tokens[up.user] = up.entries;
    } else if (ctx.spec.id == ProtocolId::AgreedServer) {
        auto& v = server.uploaded_user_tokens[up.user];
        v.insert(v.end(), up.entries.begin(), up.entries.end());
        int cutoff = up.day - ctx.params.retention_days + 1;
        std::erase_if(v, [&](const UploadEntry& e) { return e.day < cutoff; });
    }
}

}  // namespace pct
