#include "pct/world.hpp"

#include "pct/protocols.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <stdexcept>
#include <tuple>

namespace pct {

namespace {

int uniform_int(Rng& rng, int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); }
double uniform_real(Rng& rng, double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); }
bool coin(Rng& rng, double p) { return p > 0 && std::uniform_real_distribution<double>(0, 1)(rng) < p; }

void fail(const std::string& msg) { throw std::invalid_argument("scenario: " + msg); }

bool in_range(double v, double lo, double hi) { return v >= lo && v <= hi; }

struct Builder {
    const Scenario& sc;
    Rng rng;
    WorldTrace w;

    explicit Builder(const Scenario& s) : sc(s), rng(s.rng_seed) {
        w.num_users = s.num_users;
        w.num_days = s.num_days;
    }

    int draw_minutes() {
        const auto& m = sc.durations;
        double r = uniform_real(rng, 0, m.short_frac + m.mid_frac + m.long_frac);
        if (r < m.short_frac) return 1;
        if (r < m.short_frac + m.mid_frac) return uniform_int(rng, 2, 14);
        return uniform_int(rng, 15, 40);
    }

    double draw_distance(bool far) { return far ? uniform_real(rng, 2.0, 5.0) : uniform_real(rng, 0.2, 1.8); }

    void add_session(UserId a, UserId b, int day, int minutes, double distance, int cell) {
        std::int64_t start = static_cast<std::int64_t>(day) * kMinutesPerDay + uniform_int(rng, 0, kMinutesPerDay - minutes);
        w.encounters.push_back(Encounter{a, b, start, minutes, distance, cell});
    }

    void random_day(int day) {
        const int n = sc.num_users;
        auto pairs = static_cast<std::size_t>(std::llround(n * sc.contacts_per_user_per_day / 2.0));
        std::set<std::pair<UserId, UserId>> chosen;
        std::vector<std::pair<UserId, UserId>> order;
        while (chosen.size() < pairs) {
            UserId a = uniform_int(rng, 0, n - 1), b = uniform_int(rng, 0, n - 1);
            if (a == b) continue;
            if (a > b) std::swap(a, b);
            if (chosen.emplace(a, b).second) order.emplace_back(a, b);
        }
        for (auto [a, b] : order) {
            bool far = coin(rng, sc.durations.far_frac);
            double dist = draw_distance(far);
            int cell = uniform_int(rng, 0, sc.num_cells - 1);
            add_session(a, b, day, draw_minutes(), dist, cell);
            if (coin(rng, sc.durations.repeat_prob)) add_session(a, b, day, uniform_int(rng, 1, 14), dist, cell);
        }
    }

    void regular_day(int day) {
        const int n = sc.num_users;
        const int s = static_cast<int>(sc.contacts_per_user_per_day);
        std::vector<int> slots(kSlotsPerDay);
        std::iota(slots.begin(), slots.end(), 0);
        std::shuffle(slots.begin(), slots.end(), rng);
        std::vector<UserId> ids(static_cast<std::size_t>(n));
        std::iota(ids.begin(), ids.end(), 0);
        for (int k = 0; k < s; ++k) {
            std::shuffle(ids.begin(), ids.end(), rng);
            std::int64_t slot = first_slot_of_day(day) + slots[static_cast<std::size_t>(k)];
            for (std::size_t i = 0; i + 1 < ids.size(); i += 2)
                w.encounters.push_back(Encounter{ids[i], ids[i + 1], slot * kMinutesPerSlot + 2, 5, 1.0, 0});
        }
    }

    void gathering_day(int day) {
        const int n = sc.num_users;
        double mean_g = (sc.gathering_min + sc.gathering_max) / 2.0;
        int rounds = std::max(1, static_cast<int>(std::lround(sc.contacts_per_user_per_day / (mean_g - 1))));
        rounds = std::min(rounds, kSlotsPerDay);
        std::vector<int> slots(kSlotsPerDay);
        std::iota(slots.begin(), slots.end(), 0);
        std::shuffle(slots.begin(), slots.end(), rng);
        std::vector<UserId> ids(static_cast<std::size_t>(n));
        std::iota(ids.begin(), ids.end(), 0);
        for (int r = 0; r < rounds; ++r) {
            std::shuffle(ids.begin(), ids.end(), rng);
            std::int64_t slot = first_slot_of_day(day) + slots[static_cast<std::size_t>(r)];
            std::size_t i = 0;
            while (i < ids.size()) {
                auto g = static_cast<std::size_t>(uniform_int(rng, sc.gathering_min, sc.gathering_max));
                g = std::min(g, ids.size() - i);
                if (g < 2) break;
                int cell = uniform_int(rng, 0, sc.num_cells - 1);
                for (std::size_t x = i; x < i + g; ++x)
                    for (std::size_t y = x + 1; y < i + g; ++y)
                        w.encounters.push_back(
                            Encounter{ids[x], ids[y], slot * kMinutesPerSlot, uniform_int(rng, 5, 9), 1.0, cell});
                i += g;
            }
        }
    }

    void diagnoses() {
        std::vector<bool> done(static_cast<std::size_t>(sc.num_users), false);
        for (const auto& d : sc.scripted_diagnoses) done[static_cast<std::size_t>(d.user)] = true;
        if (sc.mode == WorldMode::Scripted) return;
        double whole = std::floor(sc.new_patients_per_day);
        double frac = sc.new_patients_per_day - whole;
        for (int day = sc.diagnosis_start_day; day < sc.num_days; ++day) {
            int count = static_cast<int>(whole) + (coin(rng, frac) ? 1 : 0);
            std::vector<UserId> pool;
            for (UserId u = 0; u < sc.num_users; ++u) {
                if (done[static_cast<std::size_t>(u)]) continue;
                if (sc.mode == WorldMode::Regular && !w.adopters[static_cast<std::size_t>(u)]) continue;
                pool.push_back(u);
            }
            std::shuffle(pool.begin(), pool.end(), rng);
            for (int k = 0; k < count && k < static_cast<int>(pool.size()); ++k) {
                UserId u = pool[static_cast<std::size_t>(k)];
                done[static_cast<std::size_t>(u)] = true;
                w.diagnoses.push_back(Diagnosis{u, day});
            }
        }
    }
};

}  // namespace

const char* to_string(WorldMode m) {
    switch (m) {
        case WorldMode::Random: return "random";
        case WorldMode::Regular: return "regular";
        case WorldMode::Gatherings: return "gatherings";
        case WorldMode::Scripted: return "scripted";
    }
    return "?";
}

WorldMode world_mode_from_string(const std::string& s) {
    for (auto m : {WorldMode::Random, WorldMode::Regular, WorldMode::Gatherings, WorldMode::Scripted})
        if (s == to_string(m)) return m;
    throw std::invalid_argument("unknown world mode: " + s);
}

void Scenario::validate() const {
    if (num_users < 1) fail("num_users must be positive");
    if (num_days < 1) fail("num_days must be positive");
    if (!in_range(adoption_rate, 0, 1)) fail("adoption_rate must be in [0,1]");
    if (!(loss_prob >= 0 && loss_prob < 1)) fail("loss_prob must be in [0,1)");
    if (new_patients_per_day < 0 || new_patients_per_day > num_users) fail("new_patients_per_day must be in [0,N]");
    if (contacts_per_user_per_day < 0) fail("contacts_per_user_per_day must be non-negative");
    if (num_cells < 1) fail("num_cells must be positive");
    if (mode != WorldMode::Scripted && contacts_per_user_per_day >= num_users)
        fail("contacts_per_user_per_day must be below num_users");
    const auto& d = durations;
    for (double f : {d.short_frac, d.mid_frac, d.long_frac, d.repeat_prob, d.far_frac})
        if (!in_range(f, 0, 1)) fail("duration fractions must be in [0,1]");
    if (std::fabs(d.short_frac + d.mid_frac + d.long_frac - 1.0) > 1e-9) fail("duration mixture must sum to 1");
    if (mode == WorldMode::Regular) {
        if (num_users % 2 != 0) fail("regular mode needs an even number of users");
        if (contacts_per_user_per_day != std::floor(contacts_per_user_per_day) || contacts_per_user_per_day > kSlotsPerDay)
            fail("regular mode needs an integral s of at most 144");
    }
    if (gathering_min < 2 || gathering_max < gathering_min) fail("gathering sizes must satisfy 2 <= min <= max");
    if (diagnosis_start_day < 0) fail("diagnosis_start_day must be non-negative");
    auto user_ok = [&](UserId u) { return u >= 0 && u < num_users; };
    for (const auto& e : scripted_encounters) {
        if (!user_ok(e.a) || !user_ok(e.b) || e.a == e.b) fail("scripted encounter needs two distinct users");
        if (e.minutes <= 0) fail("scripted encounter needs positive minutes");
        if (e.start_minute < 0 || e.day() >= num_days) fail("scripted encounter outside the simulated days");
        if ((e.start_minute + e.minutes - 1) / kMinutesPerDay != e.day()) fail("scripted encounter crosses midnight");
        if (e.distance < 0) fail("scripted encounter distance must be non-negative");
        if (e.cell < 0 || e.cell >= num_cells) fail("scripted encounter cell out of range");
    }
    std::set<UserId> diagnosed;
    for (const auto& x : scripted_diagnoses) {
        if (!user_ok(x.user) || x.day < 0 || x.day >= num_days) fail("scripted diagnosis out of range");
        if (!diagnosed.insert(x.user).second) fail("user diagnosed twice");
    }
    for (const auto& c : crowds)
        if (!user_ok(c.user) || c.cell < 0 || c.cell >= num_cells || c.slot < 0 ||
            c.slot >= first_slot_of_day(num_days))
            fail("crowd presence out of range");
    for (const auto& [a, b] : households)
        if (!user_ok(a) || !user_ok(b) || a == b) fail("household needs two distinct users");
    for (const auto& adv : adversaries) adv.validate();
    instantiate(protocol, options);
}

WorldTrace generate_world(const Scenario& sc) {
    sc.validate();
    Builder b(sc);
    auto& w = b.w;

    auto k = static_cast<std::size_t>(std::llround(sc.adoption_rate * sc.num_users));
    std::vector<UserId> ids(static_cast<std::size_t>(sc.num_users));
    std::iota(ids.begin(), ids.end(), 0);
    std::shuffle(ids.begin(), ids.end(), b.rng);
    w.adopters.assign(static_cast<std::size_t>(sc.num_users), false);
    for (std::size_t i = 0; i < k; ++i) w.adopters[static_cast<std::size_t>(ids[i])] = true;

    for (int day = 0; day < sc.num_days; ++day) {
        switch (sc.mode) {
            case WorldMode::Random: b.random_day(day); break;
            case WorldMode::Regular: b.regular_day(day); break;
            case WorldMode::Gatherings: b.gathering_day(day); break;
            case WorldMode::Scripted: break;
        }
    }
    w.encounters.insert(w.encounters.end(), sc.scripted_encounters.begin(), sc.scripted_encounters.end());
    std::stable_sort(w.encounters.begin(), w.encounters.end(), [](const Encounter& x, const Encounter& y) {
        return x.start_minute < y.start_minute;
    });

    w.diagnoses = sc.scripted_diagnoses;
    b.diagnoses();
    std::stable_sort(w.diagnoses.begin(), w.diagnoses.end(),
                     [](const Diagnosis& x, const Diagnosis& y) { return x.day < y.day; });

    w.crowds = sc.crowds;
    std::sort(w.crowds.begin(), w.crowds.end());
    w.households = sc.households;
    return w;
}

std::vector<Presence> WorldTrace::presence_points() const {
    std::set<Presence> pts(crowds.begin(), crowds.end());
    for (const auto& e : encounters)
        for (std::int64_t s = e.start_slot(); s <= (e.start_minute + e.minutes - 1) / kMinutesPerSlot; ++s) {
            pts.insert(Presence{e.a, e.cell, s});
            pts.insert(Presence{e.b, e.cell, s});
        }
    return {pts.begin(), pts.end()};
}

std::string WorldTrace::to_csv() const {
    std::string out = "user_a,user_b,start_slot,start_minute,minutes,distance,cell\n";
    char buf[128];
    for (const auto& e : encounters) {
        std::snprintf(buf, sizeof buf, "%d,%d,%lld,%lld,%d,%.3f,%d\n", e.a, e.b, static_cast<long long>(e.start_slot()),
                      static_cast<long long>(e.start_minute), e.minutes, e.distance, e.cell);
        out += buf;
    }
    return out;
}

std::set<UserId> GroundTruthExposures::exposed_set() const {
    std::set<UserId> s;
    for (const auto& [u, e] : users)
        if (e.exposed) s.insert(u);
    return s;
}

std::int64_t GroundTruthExposures::total_minutes() const {
    std::int64_t t = 0;
    for (const auto& [u, e] : users) t += e.total;
    return t;
}

GroundTruthExposures ground_truth_oracle(const WorldTrace& world, const Params& params) {
    std::set<std::pair<UserId, UserId>> home;
    for (auto [a, b] : world.households) {
        home.emplace(a, b);
        home.emplace(b, a);
    }
    // sender -> (receiver, slot) -> minutes, counted minute by minute
    std::map<UserId, std::map<std::pair<UserId, std::int64_t>, int>> heard;
    for (const auto& e : world.encounters) {
        if (e.distance > params.proximity_m || home.count({e.a, e.b})) continue;
        for (std::int64_t m = e.start_minute; m < e.start_minute + e.minutes; ++m) {
            std::int64_t slot = m / kMinutesPerSlot;
            ++heard[e.a][{e.b, slot}];
            ++heard[e.b][{e.a, slot}];
        }
    }
    GroundTruthExposures out;
    for (const auto& d : world.diagnoses) {
        int first = d.day - params.infectious_days + 1;
        auto it = heard.find(d.user);
        if (it == heard.end()) continue;
        std::map<UserId, int> per_user;
        for (const auto& [key, minutes] : it->second) {
            int day = static_cast<int>(key.second / kSlotsPerDay);
            if (minutes < params.min_session_minutes || day < first || day > d.day) continue;
            per_user[key.first] += minutes;
        }
        for (const auto& [u, m] : per_user) {
            auto& ue = out.users[u];
            ue.by_patient.push_back(PatientExposure{d.user, m});
            ue.total += m;
        }
    }
    for (auto& [u, e] : out.users) e.exposed = e.total >= params.exposure_threshold_minutes;
    return out;
}

std::set<std::pair<UserId, UserId>> interaction_ground_truth(const WorldTrace& world, const Params& params) {
    std::set<std::pair<UserId, UserId>> edges;
    for (const auto& e : world.encounters) {
        if (e.distance > params.proximity_m) continue;
        edges.emplace(std::min(e.a, e.b), std::max(e.a, e.b));
    }
    return edges;
}

}  // namespace pct
