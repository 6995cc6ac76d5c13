#include "pct/engine.hpp"

#include <algorithm>
#include <map>

#include "pct/protocols.hpp"

namespace pct {

namespace {

constexpr int kDeviceMinutes = 5;

Rng sub_rng(std::uint64_t seed, std::uint64_t stream) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(stream)};
    return Rng(seq);
}

std::set<int> sniffed_cells(const Scenario& sc, bool* active) {
    std::set<int> cells;
    *active = false;
    for (const auto& a : sc.adversaries) {
        if (!is_surveillance(a.kind)) continue;
        cells.insert(a.sniffer_cells.begin(), a.sniffer_cells.end());
        if (is_active(a.kind)) *active = true;
    }
    return cells;
}

// One encounter split into per-slot pieces, delivered in each direction unless lost.
void deliver(EngineState& st, const Encounter& e, bool lost_ab, bool lost_ba) {
    auto& a = st.users[static_cast<std::size_t>(e.a)];
    auto& b = st.users[static_cast<std::size_t>(e.b)];
    std::int64_t end = e.start_minute + e.minutes;
    for (std::int64_t m = e.start_minute; m < end;) {
        std::int64_t slot = m / kMinutesPerSlot;
        std::int64_t next = std::min(end, (slot + 1) * kMinutesPerSlot);
        int piece = static_cast<int>(next - m);
        TimeSlot ts{slot};
        if (!lost_ab) record_reception(st.ctx, b, beacon_for_slot(st.ctx, a, ts), ts, e.distance, piece);
        if (!lost_ba) record_reception(st.ctx, a, beacon_for_slot(st.ctx, b, ts), ts, e.distance, piece);
        m = next;
    }
}

}  // namespace

UserId EngineState::add_participant() {
    auto id = static_cast<UserId>(users.size());
    users.push_back(make_user(id, scenario.rng_seed));
    adopters.push_back(false);
    return id;
}

std::int64_t SimulationResult::risk_minutes() const {
    std::int64_t t = 0;
    for (int r : risk) t += r;
    return t;
}

SimulationResult run(const Scenario& sc) {
    WorldTrace w = generate_world(sc);
    return run(sc, w);
}

SimulationResult run(const Scenario& sc, const WorldTrace& world, EngineHook* hook) {
    sc.validate();
    EngineState st{sc, world, {}, {}, {}, {}, {}, sub_rng(sc.rng_seed, 1), {}, {}, {}};
    st.ctx = make_context(sc.protocol, sc.group_kind, sc.rng_seed);
    st.ctx.spec = instantiate(sc.protocol, sc.options);
    st.ctx.params = sc.params;
    st.ctx.limits = sc.limits;
    st.ctx.meter = &st.day_meter;
    st.server.rate_limit = sc.limits;
    if (st.ctx.spec.options.query_and_discard) st.server.query_store_policy = QueryStorePolicy::Discard;

    const auto n = static_cast<std::size_t>(world.num_users);
    for (std::size_t i = 0; i < n; ++i) st.users.push_back(make_user(static_cast<UserId>(i), sc.rng_seed));
    st.adopters = world.adopters;
    for (auto [a, b] : world.households) {
        st.users[static_cast<std::size_t>(a)].household_peers.push_back(st.users[static_cast<std::size_t>(b)].seed);
        st.users[static_cast<std::size_t>(b)].household_peers.push_back(st.users[static_cast<std::size_t>(a)].seed);
    }

    bool asv = false;
    std::set<int> cells = sniffed_cells(sc, &asv);
    if (asv)
        for (int c : cells) st.devices.push_back(Device{st.add_participant(), c});
    std::map<int, UserId> device_in_cell;
    for (const auto& d : st.devices) device_in_cell[d.cell] = d.id;

    if (hook) hook->setup(st);

    // Crowd presence keeps devices broadcasting even without a close peer.
    std::map<int, std::vector<Presence>> presence_by_day;
    for (const auto& p : world.presence_points())
        presence_by_day[static_cast<int>(p.slot / kSlotsPerDay)].push_back(p);

    Rng loss = sub_rng(sc.rng_seed, 2);
    std::bernoulli_distribution lost(sc.loss_prob);
    SimulationResult res;
    std::size_t enc = 0;
    std::size_t diag = 0;

    for (int day = 0; day < world.num_days; ++day) {
        st.day_meter.reset();
        for (std::size_t u = 0; u < st.users.size(); ++u) maintenance(st.ctx, st.users[u], day);
        if (st.ctx.spec.beacon_registry) {
            for (std::size_t u = 0; u < n; ++u)
                if (st.adopters[u]) register_user_day(st.ctx, st.server, static_cast<UserId>(u), day);
            std::int64_t cut = first_slot_of_day(day - sc.params.retention_days + 1);
            std::erase_if(st.server.beacon_registry, [&](const auto& kv) { return kv.second.slot < cut; });
        }

        for (; enc < world.encounters.size() && world.encounters[enc].day() == day; ++enc) {
            const Encounter& e = world.encounters[enc];
            bool lab = sc.loss_prob > 0 && lost(loss);
            bool lba = sc.loss_prob > 0 && lost(loss);
            if (!st.adopters[static_cast<std::size_t>(e.a)] || !st.adopters[static_cast<std::size_t>(e.b)]) continue;
            deliver(st, e, lab, lba);
        }

        for (const auto& p : presence_by_day[day]) {
            if (!st.adopters[static_cast<std::size_t>(p.user)]) continue;
            auto& u = st.users[static_cast<std::size_t>(p.user)];
            u.active_slots.insert(p.slot);
            if (!cells.count(p.cell)) continue;
            TimeSlot ts{p.slot};
            Beacon b = beacon_for_slot(st.ctx, u, ts);
            st.observations.push_back(Observation{p.cell, p.slot, b, p.user});
            auto dev = device_in_cell.find(p.cell);
            if (dev == device_in_cell.end()) continue;
            auto& d = st.users[static_cast<std::size_t>(dev->second)];
            record_reception(st.ctx, d, b, ts, 1.0, kDeviceMinutes);
            record_reception(st.ctx, u, beacon_for_slot(st.ctx, d, ts), ts, 1.0, kDeviceMinutes);
        }

        if (hook) hook->after_encounters(st, day);

        for (std::size_t u = 0; u < n; ++u) {
            if (!st.adopters[u]) continue;
            if (auto up = user_periodic_upload(st.ctx, st.users[u], day)) ingest_upload(st.ctx, st.server, *up, &st.log);
        }

        for (; diag < world.diagnoses.size() && world.diagnoses[diag].day == day; ++diag) {
            const Diagnosis& d = world.diagnoses[diag];
            res.diagnoses.push_back(d);
            if (!st.adopters[static_cast<std::size_t>(d.user)]) continue;
            Report r = patient_report(st.ctx, st.users[static_cast<std::size_t>(d.user)], day, st.rng);
            ingest_report(st.ctx, st.server, std::move(r), &st.log);
        }

        if (hook) hook->before_round(st, day);
        RoundResult rr = match_round(st.ctx, st.server, st.users, day, st.rng, &st.log, st.adopters);
        if (rr.aborted) res.failures.push_back("day " + std::to_string(day) + ": " + rr.error);
        if (hook) hook->after_round(st, day, rr);
        res.published.push_back(std::move(rr.published));
        res.daily_costs.push_back(st.day_meter);
    }

    res.protocol = sc.protocol;
    res.ctx = st.ctx;
    res.ctx.meter = nullptr;
    res.num_users = world.num_users;
    res.adopters = st.adopters;
    for (std::size_t u = 0; u < n; ++u) {
        int r = st.users[u].notified_risk;
        res.risk.push_back(r);
        if (r >= sc.params.exposure_threshold_minutes) res.detected.insert(static_cast<UserId>(u));
    }
    res.server_log = std::move(st.log);
    res.server = std::move(st.server);
    res.users = std::move(st.users);
    res.observations = std::move(st.observations);
    res.devices = std::move(st.devices);
    return res;
}

std::vector<AdoptionPoint> detection_rate_vs_adoption(const Scenario& sc, const std::vector<double>& p_values) {
    std::vector<AdoptionPoint> out;
    for (double p : p_values) {
        Scenario s = sc;
        s.adoption_rate = p;
        WorldTrace w = generate_world(s);
        GroundTruthExposures truth = ground_truth_oracle(w, s.params);
        SimulationResult r = run(s, w);
        AdoptionPoint pt;
        pt.p = p;
        pt.reference = p * p;
        pt.oracle_minutes = truth.total_minutes();
        for (const auto& [u, e] : truth.users) pt.exposure_encounters += e.by_patient.size();
        pt.detected_fraction =
            pt.oracle_minutes > 0 ? static_cast<double>(r.risk_minutes()) / static_cast<double>(pt.oracle_minutes) : 0;
        out.push_back(pt);
    }
    return out;
}

}  // namespace pct
