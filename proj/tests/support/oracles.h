#pragma once

// Independent reference implementations used to check the library.

#include <tangram/mobsim.h>
#include <tangram/network.h>

#include <optional>
#include <string>
#include <vector>

namespace oracle {

// Enumerates every simple path; fastest wins, ties go to the smallest
// link-id sequence. Only for tiny graphs.
std::optional<tangram::Route> brute_force_route(const tangram::RoadNetwork& net, tangram::NodeIdx from,
                                                tangram::NodeIdx to, const std::string& mode, double speed_cap);

// Second-by-second interpreter of the queue model, written from the rules
// rather than from the kernel.
tangram::EventLog reference_day(const tangram::RoadNetwork& net, const tangram::Population& pop,
                                const tangram::Smi& smi, const std::vector<tangram::DayPlan>& plans,
                                tangram::FleetLedger& ledger, const tangram::SimClock& clock,
                                const tangram::MobsimOptions& opts);

// FIFO, storage, conservation and continuity checks over an event log.
std::vector<std::string> replay_violations(const tangram::EventLog& log, const tangram::RoadNetwork& net,
                                           const tangram::MobsimOptions& opts);

// Counts logs seen through the simulate_day observer.
struct ReplayTally
{
    long logs = 0;
    long events = 0;
    std::vector<std::string> violations;
};

// Installs an observer that replays every simulated day into the tally.
void watch_all_days();
ReplayTally replay_tally();

std::string describe(const tangram::Event& e, const tangram::EventLog& log);

} // namespace oracle
