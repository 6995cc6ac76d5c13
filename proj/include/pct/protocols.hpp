#pragma once

#include <map>
#include <vector>

#include "pct/cuckoo.hpp"
#include "pct/framework.hpp"

namespace pct {

ProtocolSpec instantiate(ProtocolId id);
ProtocolSpec instantiate(ProtocolId id, const ProtocolOptions& options);
Context make_context(ProtocolId id, GroupKind kind, std::uint64_t seed);

// Shuffle-based DH PSI-CA. The server side is prepared once per round.
struct PsiServerSet {
    Scalar secret;
    std::vector<Token> published;  // {H(x)^s}, sorted
};

struct PsiTranscript {
    std::vector<Token> user_to_server;
    std::vector<Token> server_to_user;
};

PsiServerSet psi_server_prepare(const Group& grp, const std::vector<Digest>& patient_items, Rng& rng);
std::size_t psi_ca_round(const Group& grp, const PsiServerSet& server, const std::vector<Digest>& user_items,
                         Rng& rng, PsiTranscript* transcript = nullptr, CostCounters* cost = nullptr);

// Epione: PSI-CA per duration bucket; returns risk minutes.
int epione_round(const Context& ctx, const PsiServerSet& server, UserState& user, int day, Rng& rng);

struct RiPsiOutcome {
    int risk = 0;
    bool aborted = false;
    std::vector<int> per_patient_counts;  // what the user learns
    std::vector<Token> reupload;          // what the server receives
    std::map<UserId, int> server_view;    // amount learned per user
};

// User's daily commitment of today's blinded sent beacons.
void ri_psi_daily_upload(const Context& ctx, ServerState& server, UserState& user, int day, ServerLog* log);
RiPsiOutcome ri_psi_round(const Context& ctx, ServerState& server, UserState& user,
                          const std::vector<const Report*>& new_reports, Rng& rng, bool drop_one = false);

int desire_query(const Context& ctx, ServerState& server, UserState& user, int day, ServerLog* log);

// Returns per-user risk; the reporting patient is never matched against herself.
std::map<UserId, int> sdh_match(const Context& ctx, ServerState& server, const Report& report, ServerLog* log);

}  // namespace pct
