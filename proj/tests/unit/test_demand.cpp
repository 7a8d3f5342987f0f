#include <doctest.h>

#include "fixtures.h"

#include <tangram/demand.h>
#include <tangram/errors.h>
#include <tangram/scenario.h>

#include <cmath>
#include <map>

using namespace tangram;

namespace {

RoadNetwork small_grid()
{
    GridSpec g;
    g.cols = 9;
    g.rows = 9;
    g.spacing = 250;
    return network_from_json(grid_network_json(g));
}

GeneratorSpec two_areas(const RoadNetwork& net)
{
    GeneratorSpec s;
    s.areas = {{"north", net.node_index(grid_node_id(2, 6)), 600, 300},
               {"south", net.node_index(grid_node_id(6, 2)), 400, 700}};
    s.home_radius = 300;
    return s;
}

nlohmann::json activity(const std::string& kind, const std::string& at, std::optional<double> end)
{
    nlohmann::json a = {{"type", "activity"}, {"kind", kind}, {"location", at}};
    if (end)
        a["end_time"] = *end;
    return a;
}

} // namespace

TEST_CASE("a paper area contributes its population at full sampling")
{
    auto areas = paper_areas();
    auto it = std::find_if(areas.begin(), areas.end(), [](const auto& a) { return a.population == 5009; });
    REQUIRE(it != areas.end());
    CHECK(it->name == "P.ta Solestá");
    CHECK(it->jobs == 3170);

    AreaSpec a{"P.ta Solestá", 0, 5009, 3170};
    CHECK(sampled_count(a, 1.0) == 5009);
    CHECK(sampled_count(a, 0.0) == 0);
    CHECK(sampled_count(a, 0.001) == 5);
}

TEST_CASE("generated commuters per area follow the sampling fraction")
{
    auto net = small_grid();
    auto spec = two_areas(net);
    spec.sampling_fraction = 1.0;
    auto pop = generate_population(spec, net, 5);
    CHECK(pop.commuters.size() == 1000);
    CHECK(pop.agendas.size() == 1000);
    for (std::size_t i = 0; i != pop.agendas.size(); ++i)
        CHECK_NOTHROW(validate_agenda(pop.agendas[i], net));
}

TEST_CASE("sampling fraction 0 gives an empty population")
{
    auto net = small_grid();
    auto spec = two_areas(net);
    spec.sampling_fraction = 0;
    CHECK(generate_population(spec, net, 1).commuters.empty());
}

TEST_CASE("female share stays within three standard deviations")
{
    auto net = small_grid();
    auto spec = two_areas(net);
    spec.areas = {{"all", net.node_index(grid_node_id(4, 4)), 1000, 1000}};
    auto pop = generate_population(spec, net, 42);
    REQUIRE(pop.commuters.size() == 1000);
    double women = 0;
    for (const auto& c : pop.commuters)
        women += c.gender == Gender::female;
    double sigma = std::sqrt(0.52 * 0.48 / 1000);
    CHECK(std::abs(women / 1000 - 0.52) <= 3 * sigma);
}

TEST_CASE("generation is reproducible per seed")
{
    auto net = small_grid();
    auto spec = two_areas(net);
    spec.sampling_fraction = 0.2;
    auto a = population_to_json(generate_population(spec, net, 9), net);
    auto b = population_to_json(generate_population(spec, net, 9), net);
    auto c = population_to_json(generate_population(spec, net, 10), net);
    CHECK(a == b);
    CHECK(a != c);
}

TEST_CASE("inconsistent generator specs")
{
    auto net = small_grid();
    GeneratorSpec none;
    CHECK_THROWS_AS(generate_population(none, net, 1), InconsistentSpec);
    auto no_jobs = two_areas(net);
    for (auto& a : no_jobs.areas)
        a.jobs = 0;
    CHECK_THROWS_AS(generate_population(no_jobs, net, 1), InconsistentSpec);
}

TEST_CASE("home-work-home commuter file")
{
    auto net = fixture::line(3);
    nlohmann::json j = nlohmann::json::array();
    j.push_back({{"id", "c1"},
                 {"agenda",
                  {activity("home", "A", 7 * 3600.0), {{"type", "leg"}}, activity("work", "C", 16 * 3600.0),
                   {{"type", "leg"}, {"mode", "bike"}}, activity("home", "A", std::nullopt)}}});
    auto pop = population_from_json(j, net);
    REQUIRE(pop.agendas.size() == 1);
    CHECK(pop.agendas[0].legs.size() == 2);
    CHECK(pop.agendas[0].legs[0].destination == net.node_index("C"));
    CHECK(pop.agendas[0].legs[1].mode == std::optional<std::string>("bike"));
    CHECK(pop.commuters[0].home == net.node_index("A"));
    CHECK(population_to_json(population_from_json(population_to_json(pop, net), net), net)
          == population_to_json(pop, net));
}

TEST_CASE("agenda with a single activity is a broken chain")
{
    auto net = fixture::line(3);
    nlohmann::json j = nlohmann::json::array();
    j.push_back({{"id", "c1"}, {"agenda", {activity("home", "A", std::nullopt)}}});
    CHECK_THROWS_AS(population_from_json(j, net), BrokenChain);

    MobilityAgenda ag;
    ag.owner = "x";
    ag.activities = {{"home", 0, 100.0, 3600}, {"work", 2, std::nullopt, 3600}};
    ag.legs = {{std::nullopt, 1, 2}};
    CHECK_THROWS_AS(validate_agenda(ag, net), BrokenChain);
}

TEST_CASE("coordinates snap to nodes")
{
    auto net = fixture::line(3);
    nlohmann::json j = nlohmann::json::array();
    j.push_back({{"id", "c1"},
                 {"agenda",
                  {{{"type", "activity"}, {"kind", "home"}, {"location", {{"x", 12}, {"y", 30}}}, {"end_time", 100}},
                   {{"type", "leg"}},
                   {{"type", "activity"}, {"kind", "work"}, {"location", {{"x", 260}, {"y", -4}}}}}}});
    auto pop = population_from_json(j, net);
    const auto& acts = pop.agendas[0].activities;
    // nearest by plain distance over all nodes
    auto nearest = [&](double x, double y) {
        NodeIdx best = 0;
        for (NodeIdx n = 1; n < net.nodes().size(); ++n)
            if (std::hypot(net.node(n).x - x, net.node(n).y - y)
                < std::hypot(net.node(best).x - x, net.node(best).y - y))
                best = n;
        return best;
    };
    CHECK(acts[0].location == nearest(12, 30));
    CHECK(acts[1].location == nearest(260, -4));
}

TEST_CASE("hub suggestions")
{
    auto net = small_grid();
    MobilityAgenda ag;
    NodeIdx n = net.node_index(grid_node_id(3, 5));
    ag.activities = {{"home", n, 100.0, 3600}, {"work", n, std::nullopt, 3600}};
    ag.legs = {{std::nullopt, n, n}};
    auto one = suggest_hub_locations({ag, ag, ag}, 1, net, 1);
    REQUIRE(one.size() == 1);
    CHECK(one[0] == n);
    CHECK_THROWS_AS(suggest_hub_locations({ag}, 2, net, 1), TooFewPoints);
}

TEST_CASE("k-means separates two clusters")
{
    std::vector<Point> pts;
    for (int i = 0; i < 50; ++i)
    {
        pts.push_back({double(i % 7), double(i % 5)});
        pts.push_back({1000.0 + i % 7, 1000.0 + i % 5});
    }
    auto r = kmeans(pts, 2, 3);
    REQUIRE(r.centroids.size() == 2);
    for (std::size_t i = 0; i + 1 < pts.size(); i += 2)
    {
        CHECK(r.assignment[i] == r.assignment[0]);
        CHECK(r.assignment[i + 1] != r.assignment[0]);
    }
}

TEST_CASE("the fifteen city areas")
{
    const std::map<std::string, std::pair<long, long>> table{
        {"P.ta Solestá", {5009, 3170}},  {"P.ta Romana", {1839, 700}},     {"Centro", {7740, 6760}},
        {"Piazzarola", {409, 250}},      {"C. Parignano", {3368, 2170}},   {"P.ta Maggiore", {11500, 10900}},
        {"Monticelli", {10633, 8000}},   {"Brecciarolo", {645, 1300}},     {"P. di Bretta", {1694, 500}},
        {"Battente", {103, 3000}},       {"Marino", {576, 1400}},          {"Villa Pigna", {3000, 2000}},
        {"Z. Industriale", {500, 6500}}, {"C. di Lama", {3000, 5000}},     {"Frazioni", {6242, 6000}},
    };
    const auto& areas = paper_areas();
    REQUIRE(areas.size() == 15);
    for (const auto& a : areas)
    {
        REQUIRE(table.count(a.name));
        CHECK(a.population == table.at(a.name).first);
        CHECK(a.jobs == table.at(a.name).second);
    }
}
