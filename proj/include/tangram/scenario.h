#pragma once

#include <tangram/runner.h>

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

namespace tangram {

struct GridSpec
{
    int cols = 21;
    int rows = 21;
    double spacing = 250;           // m
    int arterial_every = 4;         // every n-th row and column is an arterial
    double street_speed = 8.33;     // m/s
    double arterial_speed = 13.89;  // m/s
    double lane_length = 7.5;       // m of storage per vehicle
    std::vector<std::string> modes{"bike", "car", "scooter", "walk"};
};

// Bidirectional grid; node ids "n<col>_<row>", link ids "<from>-<to>".
nlohmann::json grid_network_json(const GridSpec& g = {});

struct PaperArea
{
    std::string name;
    long population;
    long jobs;
    int col;  // centroid on the default grid
    int row;
};

// The fifteen city areas with their population and jobs.
const std::vector<PaperArea>& paper_areas();

std::string grid_node_id(int col, int row);

// Generator spec over the paper areas; home -> work -> home agendas.
nlohmann::json paper_generator_json(double sampling_fraction, double daily_budget = -1);

// Centroids of the n most populated areas.
std::vector<std::string> paper_hub_nodes(std::size_t n = 11);

// SMI-1, SMI-2 and SMI-3 of the grid experiment with per-hub fleets divided
// by fleet_divisor (rounded, at least one vehicle).
nlohmann::json paper_smi_json(int which, int fleet_divisor = 1, std::size_t hubs = 11);

struct DemoOptions
{
    double sampling_fraction = 0.035;
    std::uint64_t seed = 1;
    int explorative = 60;
    int exploitative = 49;
    int fleet_divisor = 10;
    std::string output = "out";
};

// Calibrated private car cost of the grid city (fuel, wear and parking).
PrivateCosts demo_private_costs();

// Baseline (which == 0) or SMI-n run of the demo grid city, inline inputs.
nlohmann::json demo_experiment_json(int which, const DemoOptions& o = {});

} // namespace tangram
