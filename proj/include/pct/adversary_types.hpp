#pragma once

#include <optional>
#include <set>
#include <string>

#include "pct/framework.hpp"

namespace pct {

enum class AdversaryKind { BasicUser, AdvancedUser, UserPsv, UserAsv, ServerAlone, ServerPsv, ServerAsv };

enum class AttackId {
    DriveByEavesdrop,
    HighPowerBroadcast,
    HighPowerDevice,
    SameBeacon,
    Pooling,
    Tunneling,
    Forwarding,
    ResourceExhaustion,
};

const char* to_string(AdversaryKind k);
const char* to_string(AttackId a);
AdversaryKind adversary_kind_from_string(const std::string& s);
AttackId attack_from_string(const std::string& s);

bool is_surveillance(AdversaryKind k);
bool is_active(AdversaryKind k);  // transmits
bool is_server_side(AdversaryKind k);

struct AdversaryConfig {
    AdversaryKind kind = AdversaryKind::ServerAlone;
    std::set<int> sniffer_cells;
    std::set<UserId> colluders;
    std::optional<AttackId> attack;

    void validate() const;  // throws std::invalid_argument
};

}  // namespace pct
