#pragma once

#include <tangram/mobsim.h>
#include <tangram/services.h>

#include <cstdint>
#include <random>
#include <string>
#include <vector>

namespace fixture {

struct L
{
    std::string id, from, to;
    double length;
    double speed;
    int storage = 10;
    std::vector<std::string> modes{"bike", "car", "walk"};
    double flow = 3600;
};

struct N
{
    std::string id;
    double x, y;
};

tangram::RoadNetwork network(const std::vector<N>& nodes, const std::vector<L>& links);

// A -> B -> C -> D, each link 100 m at 10 m/s.
tangram::RoadNetwork line(int links = 3, int storage = 10);

// One commuter, home -> work (-> home when back_at is given).
struct Day
{
    std::string id = "p1";
    std::string home = "A";
    std::string work = "B";
    double leave_at = 0;
    std::optional<double> back_at;
    bool owns_car = true;
};

void add_commuter(tangram::Population& pop, const tangram::RoadNetwork& net, const Day& d);

// Single-segment personal trip along the fastest route.
tangram::TravelingAlternative direct(tangram::Router& router, tangram::NodeIdx from, tangram::NodeIdx to,
                                     const std::string& mode, double speed_cap);

// Plan with the given personal mode on every leg and walk fallbacks.
tangram::DayPlan personal_plan(const tangram::Population& pop, std::uint32_t commuter, tangram::Router& router,
                               const std::string& mode);

struct RandomCase
{
    tangram::RoadNetwork net;
    tangram::Population pop;
    tangram::Smi smi;
    std::vector<tangram::DayPlan> plans;
    tangram::FleetAllocation allocation;
    tangram::SimClock clock;
    tangram::MobsimOptions opts;
};

// Small random network (<= max_nodes) and population (<= max_people) with
// personal and hub trips; every tenth case or so runs out of time.
RandomCase random_case(std::uint64_t seed, int max_nodes = 6, int max_people = 10);

} // namespace fixture
