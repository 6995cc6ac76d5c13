#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "pct/adversary_types.hpp"
#include "pct/framework.hpp"

namespace pct {

enum class WorldMode {
    Random,      // pairwise contacts with a duration mixture
    Regular,     // s perfect matchings per day, one slot each (cost accounting)
    Gatherings,  // small groups meeting in a cell (privacy runs)
    Scripted,    // only what the scenario lists
};

const char* to_string(WorldMode m);
WorldMode world_mode_from_string(const std::string& s);

struct DurationMix {
    double short_frac = 0.2;  // under the minimum session
    double mid_frac = 0.4;    // 2..14 minutes
    double long_frac = 0.4;   // 15..40 minutes
    double repeat_prob = 0.25;
    double far_frac = 0.1;    // beyond the proximity threshold
};

struct Encounter {
    UserId a = 0;
    UserId b = 0;
    std::int64_t start_minute = 0;
    int minutes = 0;
    double distance = 1.0;
    int cell = 0;

    std::int64_t start_slot() const { return start_minute / kMinutesPerSlot; }
    int day() const { return static_cast<int>(start_minute / kMinutesPerDay); }
};

// Co-presence in a cell without proximity (crowds standing apart).
struct Presence {
    UserId user = 0;
    int cell = 0;
    std::int64_t slot = 0;
    auto operator<=>(const Presence&) const = default;
};

struct Diagnosis {
    UserId user = 0;
    int day = 0;
};

struct Scenario {
    int num_users = 50;
    int num_days = 20;
    double new_patients_per_day = 2;
    double contacts_per_user_per_day = 10;
    double adoption_rate = 1.0;
    double loss_prob = 0.0;
    ProtocolId protocol = ProtocolId::SentUserBasic;
    ProtocolOptions options;
    std::vector<AdversaryConfig> adversaries;
    std::uint64_t rng_seed = 1;
    GroupKind group_kind = GroupKind::Medium;

    WorldMode mode = WorldMode::Random;
    DurationMix durations;
    int num_cells = 16;
    int gathering_min = 3;
    int gathering_max = 4;
    int diagnosis_start_day = 0;
    Params params;
    RateLimitConfig limits;

    std::vector<Encounter> scripted_encounters;
    std::vector<Diagnosis> scripted_diagnoses;
    std::vector<Presence> crowds;
    std::vector<std::pair<UserId, UserId>> households;

    void validate() const;  // throws std::invalid_argument
};

struct WorldTrace {
    int num_users = 0;
    int num_days = 0;
    std::vector<Encounter> encounters;  // sorted by start minute
    std::vector<Presence> crowds;
    std::vector<Diagnosis> diagnoses;   // sorted by day
    std::vector<bool> adopters;
    std::vector<std::pair<UserId, UserId>> households;

    // Every (user, cell, slot) where a user was physically present, from encounters and crowds.
    std::vector<Presence> presence_points() const;
    std::string to_csv() const;
};

WorldTrace generate_world(const Scenario& sc);

struct PatientExposure {
    UserId patient = -1;
    int minutes = 0;
};

struct UserExposure {
    std::vector<PatientExposure> by_patient;
    int total = 0;
    bool exposed = false;
};

struct GroundTruthExposures {
    std::map<UserId, UserExposure> users;
    std::set<UserId> exposed_set() const;
    std::int64_t total_minutes() const;
};

GroundTruthExposures ground_truth_oracle(const WorldTrace& world, const Params& params = {});

// Pairs with at least one encounter inside the proximity threshold.
std::set<std::pair<UserId, UserId>> interaction_ground_truth(const WorldTrace& world, const Params& params = {});

}  // namespace pct
