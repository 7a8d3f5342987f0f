#pragma once

#include <tangram/services.h>

#include <cstdint>
#include <deque>
#include <map>
#include <optional>
#include <set>
#include <variant>
#include <vector>

namespace tangram {

// Initial vehicles per [hub][service]; zero where a hub lacks the service.
using FleetAllocation = std::vector<std::vector<int>>;

FleetAllocation initial_allocation(const Smi& smi);

using ReservationId = std::uint64_t;

struct Reservation
{
    ReservationId id = 0;
    std::uint32_t commuter = 0;
    std::uint32_t segment = 0;  // index within the reserved alternative
    ServiceIdx service = 0;
    HubIdx origin_hub = 0;
    std::optional<HubIdx> dest_hub;  // inter-hub only: claimed slot
    int vehicle = -1;                // -1 when unlimited
};

enum class ReserveError { no_vehicle, no_destination_slot };

struct ReserveFailure
{
    ReserveError error;
    HubIdx hub;
    ServiceIdx service;
};

// Vehicle bookkeeping for every (hub, service) pair. Vehicles carry identities
// so that the number actually put to use in a day can be reported. A hub hands
// out its most recently returned vehicle first.
//
// An unlimited ledger (explorative phase) accepts every reservation and never
// changes its counters.
class FleetLedger
{
public:
    FleetLedger() = default;
    FleetLedger(const Smi& smi, const FleetAllocation& allocation, bool unlimited = false);

    bool unlimited() const { return unlimited_; }

    int available(HubIdx h, ServiceIdx s) const;
    int capacity(HubIdx h, ServiceIdx s) const;
    int incoming(HubIdx h, ServiceIdx s) const;

    // All-or-nothing check of every service segment of the alternative.
    std::optional<ReserveFailure> check(const TravelingAlternative& alt) const;
    bool can_reserve(const TravelingAlternative& alt) const { return !check(alt); }

    std::variant<std::vector<Reservation>, ReserveFailure> try_reserve(const TravelingAlternative& alt,
                                                                       std::uint32_t commuter);
    // Throws NoVehicle or NoDestinationSlot.
    std::vector<Reservation> reserve(const TravelingAlternative& alt, std::uint32_t commuter);

    // Inter-hub: vehicle lands at the destination hub. Intra-hub: vehicle
    // returns to the hub it came from. Throws UnknownReservation.
    void complete(ReservationId id);

    // Completes every outstanding reservation (end-of-day settlement).
    void settle_all();

    std::size_t active_count() const { return active_.size(); }
    bool is_active(ReservationId id) const { return active_.count(id) != 0; }

    // available + held by active reservations, summed over hubs
    long total_vehicles(ServiceIdx s) const;
    long initial_total(ServiceIdx s) const;
    // distinct vehicles reserved at least once since construction
    int vehicles_used(ServiceIdx s) const;

    // Current on-hand vehicles per [hub][service] (available only).
    FleetAllocation snapshot() const;

    std::size_t hub_count() const { return stock_.size(); }
    std::size_t service_count() const { return service_count_; }

private:
    bool unlimited_ = false;
    std::size_t service_count_ = 0;
    std::vector<ServiceType> types_;
    std::vector<std::vector<std::deque<int>>> stock_;  // [hub][service] -> vehicle ids
    std::vector<std::vector<int>> capacity_;
    std::vector<std::vector<int>> incoming_;
    std::vector<long> initial_total_;
    std::vector<std::vector<char>> used_;  // [service][vehicle]
    std::map<ReservationId, Reservation> active_;
    std::set<std::tuple<std::uint32_t, std::uint32_t, HubIdx, ServiceIdx>> holds_;
    ReservationId next_id_ = 1;
};

} // namespace tangram
