#pragma once

#include <tangram/demand.h>
#include <tangram/network.h>

#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

namespace tangram {

class FleetLedger;

using HubIdx = std::uint32_t;
using ServiceIdx = std::uint32_t;

enum class ServiceType { intra_hub, inter_hub };

struct MobilityService
{
    std::string id;
    std::string provider;
    ServiceType type = ServiceType::intra_hub;
    std::string mode;
    double vehicle_speed = 5;  // m/s
    double co2_per_km = 0;     // g/km
    double cost_per_hour = 0;
    double cost_per_km = 0;
    double fixed_cost = 0;
    std::map<std::string, int> initial_fleet_per_hub;
};

struct Tangrhub
{
    std::string id;
    NodeIdx location = npos;
    std::vector<ServiceIdx> services;  // ascending
    // per service index (sized to the SMI's service count); 0 where absent
    std::vector<int> initial_fleet;
    std::vector<int> capacity;

    bool offers(ServiceIdx s) const;
};

// A configured set of tangrhubs and their services. Empty for the pre-SMI run.
struct Smi
{
    std::vector<MobilityService> services;
    std::vector<Tangrhub> hubs;

    bool empty() const { return hubs.empty(); }
    std::optional<ServiceIdx> find_service(const std::string& id) const;
    std::optional<HubIdx> find_hub(const std::string& id) const;
};

// Hub storage capacity from its initial fleet: 25% headroom, rounded up.
int hub_capacity(int initial_fleet);

Smi smi_from_json(const nlohmann::json& j, const RoadNetwork& net);
Smi load_smi(const std::filesystem::path& path, const RoadNetwork& net);
nlohmann::json smi_to_json(const Smi& smi, const RoadNetwork& net);

double cost_of(const MobilityService& service, double duration_s, double distance_m);

// Out-of-pocket charges for personal modes (fuel, wear, parking).
struct ModeCost
{
    double cost_per_hour = 0;
    double cost_per_km = 0;
    double fixed_cost = 0;
};

using PrivateCosts = std::map<std::string, ModeCost>;
PrivateCosts default_private_costs();
double private_cost_of(const PrivateCosts& costs, const std::string& mode, double duration_s,
                       double distance_m);

enum class SegmentRole { first_mile, hub_to_hub, last_mile, direct };
enum class PatternClass { three_trip, two_trip_I, two_trip_II, direct };

const char* to_string(SegmentRole r);
const char* to_string(PatternClass p);

struct Segment
{
    SegmentRole role = SegmentRole::direct;
    std::string mode;
    std::optional<ServiceIdx> service;
    std::optional<HubIdx> origin_hub;
    std::optional<HubIdx> dest_hub;
    std::shared_ptr<const Route> route;
    double expected_time = 0;
    double expected_cost = 0;

    NodeIdx from() const { return route->origin; }
    NodeIdx to() const { return route->destination; }
    double distance() const { return route->distance; }
    // hub that hands out the vehicle for a service segment
    std::optional<HubIdx> provider_hub() const;
};

struct TravelingAlternative
{
    std::vector<Segment> segments;
    double total_time = 0;
    double total_cost = 0;
    PatternClass pattern = PatternClass::direct;

    bool uses_services() const;
    bool is_walk_direct() const;
    std::string describe(const RoadNetwork& net, const Smi& smi) const;
};

// Pattern of a segment chain. Two segments are two_trip_I when the second
// vehicle is handed out at the hub between them, two_trip_II otherwise.
PatternClass classify_segments(const std::vector<Segment>& segs);

// Returns an empty string when the alternative satisfies the segment bound,
// pattern typing, chaining and total invariants; otherwise the violation.
std::string check_alternative(const TravelingAlternative& alt, const Smi& smi, NodeIdx origin,
                              NodeIdx dest);

struct EnumerationOptions
{
    std::size_t hubs_per_endpoint = 2;
    std::size_t max_alternatives = 12;
    double max_access_distance = std::numeric_limits<double>::infinity();  // m, straight line
    PrivateCosts private_costs = default_private_costs();
};

// Speed a commuter travels at in a personal mode; car is bounded only by
// the links' free speed.
double personal_speed(const Commuter& c, const std::string& mode);

// Builds the commuter's alternatives for one trip. With a ledger, options
// that need an unavailable vehicle or a full destination slot are dropped;
// pass nullptr (or an unlimited ledger) to skip availability checks.
std::vector<TravelingAlternative> enumerate_alternatives(NodeIdx origin, NodeIdx dest, double depart,
                                                         const Smi& smi, const FleetLedger* ledger,
                                                         Router& router, const Commuter& commuter,
                                                         const EnumerationOptions& opts = {});

// Keeps the first max alternatives, swapping walk-direct in if it would be cut.
void cap_alternatives(std::vector<TravelingAlternative>& alts, std::size_t max);

} // namespace tangram
