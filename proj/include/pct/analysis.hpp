#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "pct/adversaries.hpp"

namespace pct {

// ---------------------------------------------------------------- cost

struct CostLedger {
    int day = 0;
    int users_counted = 0;       // never-diagnosed adopters
    double user_upload = 0;      // tokens, mean per user
    double user_download = 0;
    double user_comparisons = 0;
    double user_exps = 0;
    std::int64_t server_comparisons = 0;
    std::int64_t server_exps = 0;
    int patients = 0;
    double patient_tokens = 0;   // one-time report, mean per reporting patient
};

// Counts of one day of an honest run; day < 0 means the last day.
CostLedger cost_ledger(const SimulationResult& r, int day = -1);

// Token-unit formulas; nullopt where only the shape is checked.
struct CostFormula {
    std::optional<std::int64_t> upload;
    std::optional<std::int64_t> download;
    std::optional<std::int64_t> patient;
};

CostFormula expected_cost(ProtocolId id, double s, double P);

struct CostCheck {
    std::string name;
    double measured = 0;
    double expected = 0;
    bool ok = false;
};

// ---------------------------------------------------------------- scorecard

enum class PrivacyColumn {
    ExposureStatus,
    PatientIdentity,
    TraceAllServerPsv,
    TraceAllServerAsv,
    TracePatientsUser,
    TracePatientsServerPsv,
    TracePatientsServerAsv,
    PatientPatient,
    PatientUser,
    UserUser,
    NoExposureUserUser,
    UserSidePatientPatient,
};

const std::vector<PrivacyColumn>& privacy_columns();
const char* column_name(PrivacyColumn c);
PrivacyColumn privacy_column_from_name(const std::string& s);

enum class Resilience { Resists, Flagged, Vulnerable, Unknown };
const char* symbol(Resilience r);
const char* symbol(LeakValue v);
Resilience resilience_from_symbol(const std::string& s);
LeakValue leak_from_symbol(const std::string& s);

// The seven attack columns of the resiliency matrix.
const std::vector<AttackId>& resiliency_columns();

struct PrivacyCell {
    LeakValue value = LeakValue::Unknown;
    std::string detail;
    std::string source;  // producing run
};

struct ResilienceCell {
    Resilience value = Resilience::Unknown;
    int false_exposures = 0;
    std::size_t flagged = 0;
    std::string source;
};

struct CostRun {
    double s = 0;
    double P = 0;
    CostLedger ledger;
};

struct ProtocolScore {
    ProtocolId protocol = ProtocolId::SentUserBasic;
    std::map<PrivacyColumn, PrivacyCell> privacy;
    std::map<AttackId, ResilienceCell> resiliency;
    std::optional<bool> rate_limit_applicable;
    bool exhaustion_truncated = false;
    std::vector<CostRun> costs;  // base, doubled P, doubled s
    std::vector<CostCheck> cost_checks;
    std::set<std::string> flaws;
    std::vector<std::string> failures;
};

struct Scorecard {
    std::vector<ProtocolScore> rows;
    const ProtocolScore* find(ProtocolId id) const;
};

struct SuiteConfig {
    Scenario privacy;  // sniffers are placed in every cell
    AttackSetup attacks;
    Scenario costs;
    std::vector<ProtocolId> only;  // empty means all
};

SuiteConfig default_suite();

void score_privacy(ProtocolScore& row, const Scenario& base);
void score_resiliency(ProtocolScore& row, const AttackSetup& setup);
void score_costs(ProtocolScore& row, const Scenario& base);
ProtocolScore score_protocol(ProtocolId id, const SuiteConfig& suite);
Scorecard build_scorecard(const SuiteConfig& suite);

// Flags 1, 2a, 2b, 2c, 3 (or 3-partial), 4, 5a, 5b; "unknown:<n>" when a constituent check is missing.
std::set<std::string> flaw_flags(const ProtocolScore& row);

// ---------------------------------------------------------------- expected matrices

class MatrixLoadError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct ExpectedMatrices {
    std::map<ProtocolId, std::map<PrivacyColumn, LeakValue>> privacy;
    std::map<ProtocolId, std::map<AttackId, Resilience>> resiliency;
    std::map<ProtocolId, std::set<std::string>> flaws;
};

// Reads privacy.json, resiliency.json and flaws.json from dir.
ExpectedMatrices load_expected(const std::filesystem::path& dir);
ExpectedMatrices expected_from_scorecard(const Scorecard& sc);
std::filesystem::path default_data_dir();

struct DiffEntry {
    std::string matrix;  // privacy, resiliency, flaws
    ProtocolId protocol = ProtocolId::SentUserBasic;
    std::string column;
    std::string expected;
    std::string computed;
};

std::vector<DiffEntry> scorecard_diff(const Scorecard& sc, const ExpectedMatrices& expected);

std::string flags_string(const std::set<std::string>& flags);
std::string scorecard_csv(const Scorecard& sc);
std::string cost_csv(const Scorecard& sc);
std::string diff_csv(const std::vector<DiffEntry>& diff);
std::string scorecard_table(const Scorecard& sc, const std::vector<DiffEntry>* diff = nullptr);

}  // namespace pct
