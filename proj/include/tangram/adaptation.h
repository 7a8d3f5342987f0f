#pragma once

#include <tangram/fleet.h>
#include <tangram/mind.h>
#include <tangram/services.h>

#include <string>
#include <vector>

#include <json.hpp>

namespace tangram {

struct ServiceUsageSummary
{
    ServiceIdx service = 0;
    std::vector<long> departures;  // per hub
    std::vector<long> failures;    // per hub
    long vehicles_used = 0;
    long fleet_total = 0;
    double mean_feedback = 0;
};

// Largest-remainder apportionment of total over weights. Ties on the
// remainder go to the lower index. Entries above cap spill, in order of
// decreasing weight, to the entries with room left.
std::vector<int> apportion(long total, const std::vector<double>& weights, const std::vector<int>& caps);

// Next-day allocation. Inter-hub fleets follow departures + failures + lambda
// at the hubs offering the service; intra-hub fleets stay where they are.
FleetAllocation replan_hubs(const std::vector<ServiceUsageSummary>& usage, const Smi& smi,
                            const FleetAllocation& current, const PhaseConfig& phase, double lambda = 1.0);

struct ServiceHealth
{
    double usage_fraction = 0;
    double failure_rate = 0;
    double mean_feedback = 0;
};

ServiceHealth service_health(const ServiceUsageSummary& usage);

nlohmann::json adaptation_report(const std::vector<ServiceUsageSummary>& usage, const Smi& smi,
                                 const FleetAllocation& before, const FleetAllocation& after);

} // namespace tangram
