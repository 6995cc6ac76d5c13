#pragma once

#include <set>
#include <string>
#include <vector>

#include "pct/framework.hpp"
#include "pct/world.hpp"

namespace pct {

// A beacon caught by a sniffer. true_user is ground truth, kept for scoring only.
struct Observation {
    int cell = 0;
    std::int64_t slot = 0;
    Beacon beacon;
    UserId true_user = -1;
};

// Surveillance device placed by an Asv adversary; it is a regular UserState that never adopts.
struct Device {
    UserId id = -1;
    int cell = 0;
};

struct EngineState {
    const Scenario& scenario;
    const WorldTrace& world;
    Context ctx;
    ServerState server;
    ServerLog log;
    std::vector<UserState> users;  // honest users first, then devices and attackers
    std::vector<bool> adopters;    // same length as users
    Rng rng;
    std::vector<Observation> observations;
    std::vector<Device> devices;
    CostMeter day_meter;

    UserId add_participant();  // appends a non-adopting UserState, returns its id
};

class EngineHook {
public:
    virtual ~EngineHook() = default;
    virtual void setup(EngineState&) {}
    virtual void after_encounters(EngineState&, int /*day*/) {}
    virtual void before_round(EngineState&, int /*day*/) {}
    virtual void after_round(EngineState&, int /*day*/, const RoundResult&) {}
};

struct SimulationResult {
    ProtocolId protocol = ProtocolId::SentUserBasic;
    Context ctx;  // meter detached
    int num_users = 0;
    std::vector<int> risk;  // notified risk per honest user
    std::vector<bool> adopters;
    std::set<UserId> detected;
    std::vector<CostMeter> daily_costs;
    ServerLog server_log;
    ServerState server;
    std::vector<UserState> users;
    std::vector<PublishedData> published;
    std::vector<Observation> observations;
    std::vector<Device> devices;
    std::vector<std::string> failures;
    std::vector<Diagnosis> diagnoses;
    std::int64_t risk_minutes() const;
};

SimulationResult run(const Scenario& sc, const WorldTrace& world, EngineHook* hook = nullptr);
SimulationResult run(const Scenario& sc);

struct AdoptionPoint {
    double p = 0;
    double detected_fraction = 0;
    double reference = 0;  // p^2
    std::int64_t oracle_minutes = 0;
    std::size_t exposure_encounters = 0;
};

// Detected exposure minutes over oracle exposure minutes, one run per p.
std::vector<AdoptionPoint> detection_rate_vs_adoption(const Scenario& sc, const std::vector<double>& p_values);

}  // namespace pct
