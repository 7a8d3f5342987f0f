#include <tangram/scenario.h>

#include <algorithm>
#include <cmath>

namespace tangram {

std::string grid_node_id(int col, int row)
{
    return "n" + std::to_string(col) + "_" + std::to_string(row);
}

nlohmann::json grid_network_json(const GridSpec& g)
{
    nlohmann::json j;
    j["crs"] = "planar";
    j["nodes"] = nlohmann::json::array();
    j["links"] = nlohmann::json::array();
    for (int r = 0; r != g.rows; ++r)
        for (int c = 0; c != g.cols; ++c)
            j["nodes"].push_back({{"id", grid_node_id(c, r)}, {"x", c * g.spacing}, {"y", r * g.spacing}});

    auto link = [&](int c0, int r0, int c1, int r1, bool arterial) {
        auto from = grid_node_id(c0, r0), to = grid_node_id(c1, r1);
        int lanes = arterial ? 2 : 1;
        j["links"].push_back({{"id", from + "-" + to},
                              {"from", from},
                              {"to", to},
                              {"length", g.spacing},
                              {"free_speed", arterial ? g.arterial_speed : g.street_speed},
                              {"storage_capacity", std::max(1, int(std::floor(g.spacing * lanes / g.lane_length)))},
                              {"flow_capacity", 900.0 * lanes},
                              {"modes", g.modes}});
    };
    for (int r = 0; r != g.rows; ++r)
        for (int c = 0; c != g.cols; ++c)
        {
            if (c + 1 < g.cols)
            {
                bool art = g.arterial_every > 0 && r % g.arterial_every == 0;
                link(c, r, c + 1, r, art);
                link(c + 1, r, c, r, art);
            }
            if (r + 1 < g.rows)
            {
                bool art = g.arterial_every > 0 && c % g.arterial_every == 0;
                link(c, r, c, r + 1, art);
                link(c, r + 1, c, r, art);
            }
        }
    return j;
}

const std::vector<PaperArea>& paper_areas()
{
    static const std::vector<PaperArea> areas{
        {"P.ta Solestá", 5009, 3170, 9, 7},      {"P.ta Romana", 1839, 700, 12, 12},
        {"Centro", 7740, 6760, 10, 10},          {"Piazzarola", 409, 250, 10, 13},
        {"C. Parignano", 3368, 2170, 6, 8},      {"P.ta Maggiore", 11500, 10900, 13, 9},
        {"Monticelli", 10633, 8000, 7, 13},      {"Brecciarolo", 645, 1300, 3, 3},
        {"P. di Bretta", 1694, 500, 16, 4},      {"Battente", 103, 3000, 4, 17},
        {"Marino", 576, 1400, 17, 16},           {"Villa Pigna", 3000, 2000, 15, 13},
        {"Z. Industriale", 500, 6500, 2, 10},    {"C. di Lama", 3000, 5000, 18, 9},
        {"Frazioni", 6242, 6000, 13, 17},
    };
    return areas;
}

nlohmann::json paper_generator_json(double sampling_fraction, double daily_budget)
{
    auto areas = nlohmann::json::array();
    for (const auto& a : paper_areas())
        areas.push_back({{"name", a.name},
                         {"centroid", grid_node_id(a.col, a.row)},
                         {"population", a.population},
                         {"jobs", a.jobs}});
    nlohmann::json j = {{"areas", areas}, {"sampling_fraction", sampling_fraction}, {"home_radius", 600}};
    if (daily_budget >= 0)
        j["demographics"] = {{"daily_budget", daily_budget}};
    return j;
}

std::vector<std::string> paper_hub_nodes(std::size_t n)
{
    auto areas = paper_areas();
    std::stable_sort(areas.begin(), areas.end(),
                     [](const PaperArea& a, const PaperArea& b) { return a.population > b.population; });
    std::vector<std::string> out;
    for (std::size_t i = 0; i != std::min(n, areas.size()); ++i)
        out.push_back(grid_node_id(areas[i].col, areas[i].row));
    return out;
}

nlohmann::json paper_smi_json(int which, int fleet_divisor, std::size_t hubs)
{
    int base = which == 3 ? 50 : 10;
    int fleet = std::max(1, int(std::lround(double(base) / std::max(1, fleet_divisor))));
    auto service = [&](const char* id, const char* provider, const char* mode, double speed, double per_h,
                       double per_km) {
        return nlohmann::json{{"id", id},
                              {"provider", provider},
                              {"type", "inter_hub"},
                              {"mode", mode},
                              {"vehicle_speed", speed},
                              {"co2_per_km", 0.0},
                              {"cost_per_hour", per_h},
                              {"cost_per_km", per_km},
                              {"fixed_cost", 0.01},
                              {"fleet", fleet}};
    };
    auto services = nlohmann::json::array();
    services.push_back(service("bikesharing", "bike-op", "bike", 4.5, 0.5, 0.0));
    if (which >= 2)
    {
        services.push_back(service("carsharing", "car-op", "car", 13.89, 13.0, 0.1));
        services.push_back(service("e-scootersharing", "scooter-op", "scooter", 5.5, 2.5, 0.1));
    }
    auto th = nlohmann::json::array();
    auto nodes = paper_hub_nodes(hubs);
    for (std::size_t i = 0; i != nodes.size(); ++i)
        th.push_back({{"id", "TH" + std::to_string(i + 1)}, {"location", nodes[i]}, {"services", services}});
    return {{"tangrhubs", th}};
}

PrivateCosts demo_private_costs()
{
    return default_private_costs();
}

nlohmann::json demo_experiment_json(int which, const DemoOptions& o)
{
    auto private_costs = nlohmann::json::object();
    for (const auto& [m, c] : demo_private_costs())
        private_costs[m] = {{"cost_per_hour", c.cost_per_hour}, {"cost_per_km", c.cost_per_km},
                            {"fixed_cost", c.fixed_cost}};
    nlohmann::json gen = paper_generator_json(o.sampling_fraction);
    gen["seed"] = o.seed;
    nlohmann::json j = {
        {"name", which == 0 ? std::string("pre-SMI") : "SMI-" + std::to_string(which)},
        {"network", grid_network_json()},
        {"population", {{"generator", gen}}},
        {"smi", which == 0 ? nlohmann::json(nullptr) : paper_smi_json(which, o.fleet_divisor)},
        {"seed", o.seed},
        {"phases", {{"explorative", o.explorative}, {"exploitative", o.exploitative}, {"policy_based", 1}}},
        {"enumeration", {{"max_access_distance", 600}, {"private_costs", private_costs}}},
        {"scoring", {{"comfort_norm", {{"car", 1.0}, {"scooter", 0.6}, {"bike", 0.5}, {"walk", 0.4}}}}},
        {"emissions", {{"car", 160.0}, {"bike", 0.0}, {"walk", 0.0}, {"scooter", 0.0}}},
        {"output", o.output},
    };
    return j;
}

} // namespace tangram
