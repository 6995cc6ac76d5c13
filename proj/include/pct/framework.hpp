#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "pct/crypto.hpp"

namespace pct {

constexpr int kSlotsPerDay = 144;
constexpr int kMinutesPerSlot = 10;
constexpr int kMinutesPerDay = kSlotsPerDay * kMinutesPerSlot;

using UserId = std::int32_t;

struct TimeSlot {
    std::int64_t index = 0;
    int day() const { return static_cast<int>(index / kSlotsPerDay); }
    auto operator<=>(const TimeSlot&) const = default;
};

inline TimeSlot slot_of_minute(std::int64_t minute) { return TimeSlot{minute / kMinutesPerSlot}; }
inline std::int64_t first_slot_of_day(int day) { return static_cast<std::int64_t>(day) * kSlotsPerDay; }

// Opaque wire value: a PRF digest, a group element encoding, or a pair of encodings.
struct Token {
    std::string bytes;

    Token() = default;
    explicit Token(std::string b) : bytes(std::move(b)) {}
    static Token of(const Digest& d) { return Token(std::string(d.bytes.begin(), d.bytes.end())); }
    static Token of(const GroupElement& e) { return Token(std::string(e.encoding().begin(), e.encoding().end())); }
    static Token of(std::span<const std::uint8_t> b) { return Token(std::string(b.begin(), b.end())); }
    std::span<const std::uint8_t> view() const {
        return {reinterpret_cast<const std::uint8_t*>(bytes.data()), bytes.size()};
    }
    Digest digest() const;
    std::string hex() const { return to_hex(view()); }
    auto operator<=>(const Token&) const = default;
};

struct TokenHash {
    std::size_t operator()(const Token& t) const noexcept { return std::hash<std::string>{}(t.bytes); }
};

using Beacon = Token;
using TokenSet = std::unordered_set<Token, TokenHash>;

enum class ProtocolId {
    SentUserBasic,
    SentUserDaily,
    SentInteractive,
    SentServer,
    ReceivedUserBasic,
    ReceivedUserCleverParrot,
    ReceivedInteractive,
    ReceivedServer,
    AgreedUser,
    AgreedInteractive,
    AgreedServer,
};

enum class ReportKind { Sent, Received, Agreed };
enum class MatcherKind { User, Server, Interactive };

const std::vector<ProtocolId>& all_protocols();
const char* protocol_name(ProtocolId id);
const char* protocol_label(ProtocolId id);
ProtocolId protocol_from_name(const std::string& name);  // throws std::invalid_argument
const char* to_string(ReportKind k);
const char* to_string(MatcherKind k);

struct ProtocolOptions {
    bool daily_seed = false;
    bool cuckoo = false;
    bool query_and_discard = false;
    bool disable_dedup = false;  // publish received beacons per patient, duplicates kept
};

struct ProtocolSpec {
    ProtocolId id = ProtocolId::SentUserBasic;
    ReportKind report_kind = ReportKind::Sent;
    MatcherKind matcher = MatcherKind::User;
    ProtocolOptions options;
    bool group_beacons = false;
    bool beacon_registry = false;
    bool randomized_receipts = false;
    bool dedup_published = false;
    std::string beacon_content;
    std::string patient_report;
    std::string user_action;

    void validate() const;  // throws std::invalid_argument
};

struct Params {
    double proximity_m = 1.83;
    int min_session_minutes = 2;
    int exposure_threshold_minutes = 15;
    int retention_days = 14;
    int infectious_days = 14;
    double cuckoo_fp_target = 1.0 / 8192;
};

struct RateLimitConfig {
    int per_patient_exposure_cap = 50;   // per patient per day
    int per_report_size_cap = 50;        // reported tokens per patient per day
    int per_user_device_cap = 30;        // distinct streams in one slot
    bool user_limit_enabled = false;
    std::size_t max_report_tokens_per_day = 1000;  // hard truncation against junk
};

enum class QueryStorePolicy { Store, Discard };

struct CostCounters {
    std::int64_t upload_tokens = 0;
    std::int64_t download_tokens = 0;
    std::int64_t upload_bytes = 0;
    std::int64_t download_bytes = 0;
    std::int64_t comparisons = 0;   // nominal set-size products
    std::int64_t exps = 0;          // group exponentiations actually performed
    std::int64_t bulk_download_tokens = 0;  // shuffle-PSI transfer, informational
};

struct CostMeter {
    std::map<UserId, CostCounters> users;
    std::int64_t server_comparisons = 0;
    std::int64_t server_exps = 0;
    std::map<UserId, std::int64_t> patient_report_tokens;
    std::map<UserId, std::int64_t> patient_report_bytes;
    void reset() { *this = CostMeter{}; }
};

struct Context {
    ProtocolSpec spec;
    Group group;
    Params params;
    RateLimitConfig limits;
    Bytes registry_key;
    CostMeter* meter = nullptr;
};

struct SentMaterial {
    Beacon beacon;
    std::optional<Scalar> secret;
};

struct EncounterRecord {
    TimeSlot slot;
    Beacon peer_beacon;
    std::optional<Token> derived_token;  // agreed g^{xx'}
    std::optional<Digest> ordered;       // my ordered token for this encounter
    int session_minutes = 0;
    bool uploaded = false;
};

struct MatchLogEntry {
    int round_day = 0;
    TimeSlot slot;
    int minutes = 0;
};

struct UserState {
    UserId id = 0;
    Bytes seed;
    std::map<int, Bytes> daily_seeds;
    std::unordered_map<std::int64_t, SentMaterial> sent_log;
    // keyed by (slot, peer beacon); one record per beacon heard
    std::map<std::pair<std::int64_t, Token>, EncounterRecord> encounter_store;
    std::map<std::pair<std::int64_t, Token>, int> pending;
    std::vector<Bytes> household_peers;
    int notified_risk = 0;

    std::set<std::int64_t> active_slots;
    std::map<std::int64_t, std::set<Token>> streams_heard;
    std::set<std::int64_t> suppressed_slots;
    int suppression_alerts = 0;
    int dropped_malformed = 0;
    int dropped_household = 0;

    std::optional<Scalar> ri_blind;
    int last_query_day = -1;
    std::vector<Token> reported_this_round;
    std::vector<MatchLogEntry> match_log;
    bool diagnosed = false;
};

UserState make_user(UserId id, std::uint64_t master_seed);
std::vector<EncounterRecord> records_in_days(const UserState& user, int first_day, int last_day);

// Report material.
struct ReportEntry {
    Token token;
    int minutes = 0;
    std::int64_t slot = -1;
};

struct ReportBatch {
    int day = 0;
    std::vector<ReportEntry> entries;
};

struct Report {
    UserId patient = -1;
    int diagnosis_day = 0;
    std::vector<ReportBatch> batches;
    bool truncated = false;
    std::size_t token_count() const;
    Bytes serialize() const;
};

struct UploadEntry {
    Token token;
    int minutes = 0;
    int day = 0;
};

struct Upload {
    UserId user = -1;
    int day = 0;
    std::vector<UploadEntry> entries;
    Bytes serialize() const;
};

struct RegistryEntry {
    UserId user = -1;
    std::int64_t slot = 0;
};

struct StoredQuery {
    UserId user = -1;
    int day = 0;
    std::vector<UploadEntry> entries;
};

struct ServerState {
    RateLimitConfig rate_limit;
    QueryStorePolicy query_store_policy = QueryStorePolicy::Store;
    std::vector<Report> patient_reports;
    std::vector<std::size_t> pending_reports;  // indices not yet matched
    std::map<UserId, std::vector<UploadEntry>> uploaded_user_tokens;
    std::unordered_map<Token, RegistryEntry, TokenHash> beacon_registry;
    std::map<UserId, std::vector<UploadEntry>> ri_psi_uploads;
    std::vector<StoredQuery> stored_queries;
    // per patient per day: exposures caused (server matcher)
    std::map<std::pair<UserId, int>, int> exposures_caused;

    Bytes serialize() const;
};

// Everything the server receives, kept by a curious server; input to leakage oracles.
struct ServerLog {
    std::vector<Upload> uploads;
    std::vector<Report> reports;
    std::vector<StoredQuery> queries;
    std::map<UserId, int> learned_risk;
    // (patient, user) pairs the server matched directly
    std::set<std::pair<UserId, UserId>> matched_pairs;
    // interactive rounds: day -> patients in that round, and users with matches
    std::map<int, std::vector<UserId>> round_patients;
    std::map<int, std::map<UserId, int>> round_user_matches;
};

// What a server-matching protocol returns to a user: one scalar.
struct ServerNotification {
    int risk = 0;
};

struct PublishedData {
    int day = 0;
    std::vector<ReportEntry> entries;   // mixed across patients
    std::vector<UserId> patients;       // number of patients is public
};

struct RoundResult {
    std::map<UserId, int> risk_delta;
    bool aborted = false;
    std::string error;
    PublishedData published;
};

struct ExposureAggregate {
    int risk = 0;
    bool exposed = false;
};

// Phase operations.
Beacon beacon_for_slot(const Context& ctx, UserState& user, TimeSlot slot);
const SentMaterial& sent_material(const Context& ctx, UserState& user, TimeSlot slot);
const Bytes& daily_seed(UserState& user, int day);
Bytes derive_daily_seed(const Bytes& seed, int day);
Beacon prf_beacon(const Bytes& seed, TimeSlot slot);
void register_user_day(const Context& ctx, ServerState& server, UserId user, int day);

void record_reception(const Context& ctx, UserState& user, const Beacon& beacon, TimeSlot slot, double distance,
                      int minutes);
// Record held on behalf of `holder` while the beacon material is `mine_of` (colluders share streams).
void record_reception_as(const Context& ctx, UserState& holder, UserState& mine_of, const Beacon& beacon,
                         TimeSlot slot, double distance, int minutes);
void maintenance(const Context& ctx, UserState& user, int today);

ExposureAggregate aggregate_exposure(const std::vector<EncounterRecord>& matched, const Params& params = {});
ExposureAggregate aggregate_minutes(int minutes, const Params& params = {});

Report patient_report(const Context& ctx, UserState& user, int diagnosis_day, Rng& rng);
std::optional<Upload> user_periodic_upload(const Context& ctx, UserState& user, int day);

// Server ingestion with hard truncation; returns index into server.patient_reports.
std::size_t ingest_report(const Context& ctx, ServerState& server, Report report, ServerLog* log);
void ingest_upload(const Context& ctx, ServerState& server, const Upload& up, ServerLog* log);

RoundResult match_round(const Context& ctx, ServerState& server, std::vector<UserState>& users, int day, Rng& rng,
                        ServerLog* log, const std::vector<bool>& adopters);

}  // namespace pct
