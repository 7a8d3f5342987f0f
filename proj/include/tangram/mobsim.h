#pragma once

#include <tangram/demand.h>
#include <tangram/fleet.h>
#include <tangram/network.h>
#include <tangram/services.h>

#include <cstdint>
#include <filesystem>
#include <functional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

namespace tangram {

enum class EventKind : std::uint8_t {
    act_end,
    depart,
    link_enter,
    link_leave,
    arrive,
    act_start,
    reservation_failed,
    stuck
};

const char* to_string(EventKind k);

using VehicleId = std::uint64_t;
inline constexpr VehicleId no_vehicle = ~VehicleId{0};

// Vehicle identity of one segment of one trip; fallback trips use their own ids.
constexpr VehicleId vehicle_id(std::uint32_t person, std::uint32_t leg, std::uint32_t segment, bool fallback)
{
    return (VehicleId{person} << 20) | (VehicleId{leg} << 4) | (fallback ? 8u : 0u) | segment;
}

struct Event
{
    std::int64_t time = 0;
    EventKind kind = EventKind::act_end;
    std::uint32_t person = npos;
    VehicleId vehicle = no_vehicle;
    LinkIdx link = npos;
    HubIdx hub = npos;
    ServiceIdx service = npos;
    std::uint16_t leg = 0;      // trip index (depart/arrive/enter/leave/failed)
    std::uint16_t index = 0;    // segment for travel events, activity for act events
    bool fallback = false;      // travelling on the walk fallback
    std::uint8_t mode = 0;      // index into EventLog::modes

    bool operator==(const Event&) const = default;
};

struct EventLog
{
    std::vector<Event> events;
    std::vector<std::string> modes;

    std::uint8_t mode_index(const std::string& m);
    bool operator==(const EventLog&) const = default;
};

// One trip of a commuter's day: the alternative chosen at planning time and
// the walk trip used when the reservation cannot be honoured at departure.
struct PlannedTrip
{
    TravelingAlternative chosen;
    TravelingAlternative fallback;
};

struct DayPlan
{
    std::uint32_t commuter = 0;  // index into Population
    std::vector<PlannedTrip> trips;  // one per agenda leg
};

struct SimClock
{
    std::int64_t start = 0;
    std::int64_t end = 30 * 3600;
};

struct MobsimOptions
{
    std::set<std::string> queued_modes{mode::car};
    double storage_scale = 1.0;        // population sampling fraction
    bool enforce_flow_capacity = false;
};

// Effective storage of a link under the options.
int effective_storage(const Link& l, const MobsimOptions& opts);

// Whole seconds needed to traverse a link at the given speed (at least one).
std::int64_t traversal_seconds(const Link& l, double speed);

// Speed of a segment's vehicle for the given commuter.
double segment_speed(const Segment& s, const Commuter& c, const Smi& smi);

// Throws BrokenChain or DanglingReservation on the first problem found.
void validate_plans(const std::vector<DayPlan>& plans, const Population& pop, const Smi& smi,
                    const RoadNetwork& net);

EventLog simulate_day(const RoadNetwork& net, const Population& pop, const Smi& smi,
                      const std::vector<DayPlan>& plans, FleetLedger& ledger, const SimClock& clock = {},
                      const MobsimOptions& opts = {});

// Called with every log simulate_day produces; install before any simulation
// starts. The callback must be thread-safe when days run concurrently.
using DayObserver = std::function<void(const EventLog&, const RoadNetwork&, const MobsimOptions&)>;
void set_day_observer(DayObserver observer);

nlohmann::json event_to_json(const Event& e, const EventLog& log, const RoadNetwork& net,
                             const Population& pop, const Smi& smi);
// newline-delimited JSON, gzip-compressed when the path ends in ".gz"
void write_event_log(const std::filesystem::path& path, const EventLog& log, const RoadNetwork& net,
                     const Population& pop, const Smi& smi);

} // namespace tangram
