#pragma once

#include <functional>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "pct/adversary_types.hpp"
#include "pct/engine.hpp"
#include "pct/world.hpp"

namespace pct {

// What one adversary gets to see from a run.
struct AdversaryView {
    AdversaryKind kind = AdversaryKind::ServerAlone;
    std::set<int> cells;
    std::vector<Observation> observed;
    const ServerLog* server_side = nullptr;
    std::vector<Device> own_devices;
    std::vector<Bytes> own_secrets;  // device seeds
};

AdversaryView make_view(const SimulationResult& r, const AdversaryConfig& cfg);

// ---------------------------------------------------------------- rate limits

struct RateLimitFlags {
    bool applicable = false;
    std::set<UserId> flagged;
    std::size_t truncated_reports = 0;
};

RateLimitFlags server_rate_limit(const ProtocolSpec& spec, const ServerState& server, const RateLimitConfig& caps);

struct SuppressionReport {
    int alerts = 0;
    std::set<UserId> users;
};

SuppressionReport user_rate_limit(const std::vector<UserState>& users, int num_honest);

// ---------------------------------------------------------------- attacks

struct AttackSetup {
    int crowd = 60;                 // victims of single-attacker attacks
    int colluders = 10;
    int victims_per_colluder = 6;
    int pooled_streams = 10;        // streams each pooling device broadcasts
    int tunnel_crowd = 20;          // per end of the tunnel
    int forged_minutes = 20;
    bool user_limit = false;
    std::uint64_t seed = 7;
    GroupKind group = GroupKind::Medium;
    RateLimitConfig limits;
};

struct AttackOutcome {
    AttackId attack = AttackId::DriveByEavesdrop;
    ProtocolId protocol = ProtocolId::SentUserBasic;
    int false_exposures = 0;
    RateLimitFlags server;
    SuppressionReport suppression;
    std::vector<UserId> attackers;
    bool report_truncated = false;
};

void check_compatible(AttackId attack, AdversaryKind kind);  // throws std::invalid_argument
AdversaryKind required_kind(AttackId attack);
AttackOutcome run_attack(AttackId attack, const AdversaryConfig& cfg, ProtocolId protocol,
                         const AttackSetup& setup = {});

// ---------------------------------------------------------------- leakage

enum class LeakValue { Leaks, Partial, Protected, NotApplicable, Unknown };
const char* to_string(LeakValue v);
LeakValue leak_value_from_string(const std::string& s);

// NonPatients: users who never reported, so a leak there reaches beyond patients.
enum class TraceScope { AllUsers, Patients, NonPatients };

struct TraceResult {
    std::size_t targets = 0;
    std::size_t linked = 0;
    double fraction = 0;
    LeakValue value = LeakValue::Protected;
};

TraceResult leak_movement_traces(const SimulationResult& r, const WorldTrace& w, const AdversaryView& view,
                                 TraceScope scope);

enum class EdgeKind { PatientPatient, PatientUser, UserUserWithPatient, UserUserNoExposure };
const char* to_string(EdgeKind k);

struct EdgeScore {
    std::size_t inferred = 0;
    std::size_t correct = 0;
    std::size_t truth = 0;
    double precision = 0;
    double recall = 0;
    LeakValue value = LeakValue::Protected;
};

struct InteractionResult {
    std::map<EdgeKind, EdgeScore> edges;
    std::set<std::pair<UserId, UserId>> inferred_pp;  // for inspection
};

InteractionResult leak_interactions(const SimulationResult& r, const WorldTrace& w);

// Users recognising their own beacon more than once in one round's published data.
LeakValue leak_user_side_copatients(const SimulationResult& r);

struct ExposureTimeResult {
    std::size_t recovered = 0;
    std::size_t correct = 0;
    int probe_queries = 0;
    int probe_items = 0;
    LeakValue value = LeakValue::Protected;
};

ExposureTimeResult leak_exposure_time(const SimulationResult& r, const WorldTrace& w);

struct ExposureStatusResult {
    std::size_t users_learned = 0;
    std::size_t users_matching = 0;
    LeakValue value = LeakValue::Protected;
};

ExposureStatusResult leak_exposure_status(const SimulationResult& r);

// Adaptive bisection over a counting oracle; returns matching indices and number of queries.
struct ProbeResult {
    std::vector<std::size_t> found;
    int queries = 0;
};
ProbeResult bisection_probe(std::size_t items, const std::function<std::size_t(const std::vector<std::size_t>&)>& count);

}  // namespace pct
