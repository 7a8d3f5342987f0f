#include <doctest.h>

#include "fixtures.h"
#include "oracles.h"

#include <tangram/errors.h>
#include <tangram/network.h>

#include <random>

using namespace tangram;
using fixture::L;
using fixture::N;

namespace {

const std::string data_dir = TANGRAM_TEST_DATA;

RoadNetwork diamond()
{
    return load_network(data_dir + "/diamond.json");
}

} // namespace

TEST_CASE("single link network")
{
    auto net = fixture::network({{"A", 0, 0}, {"B", 100, 0}}, {{"AB", "A", "B", 100, 10}});
    CHECK(net.links().size() == 1);
    CHECK(net.link_time(0, 1e9) == doctest::Approx(10));
    auto r = shortest_path(net, "A", "B", mode::car, 1e9);
    REQUIRE(r.links.size() == 1);
    CHECK(net.link(r.links[0]).id == "AB");
    CHECK(r.expected_time == doctest::Approx(10));
    CHECK(r.distance == doctest::Approx(100));
}

TEST_CASE("link to an unknown node is rejected")
{
    CHECK_THROWS_AS(fixture::network({{"A", 0, 0}, {"B", 100, 0}}, {{"AZ", "A", "Z", 100, 10}}), DanglingLink);
    nlohmann::json j = {{"nodes", {{{"id", "A"}, {"x", 0}, {"y", 0}}}},
                        {"links",
                         {{{"id", "AZ"},
                           {"from", "A"},
                           {"to", "Z"},
                           {"length", 10},
                           {"free_speed", 1},
                           {"storage_capacity", 1},
                           {"flow_capacity", 1},
                           {"modes", {"car"}}}}}};
    CHECK_THROWS_AS(network_from_json(j), DanglingLink);
}

TEST_CASE("empty and malformed networks")
{
    CHECK_THROWS_AS(network_from_json({{"nodes", nlohmann::json::array()}, {"links", nlohmann::json::array()}}),
                    EmptyNetwork);
    CHECK_THROWS_AS(network_from_json({{"nodes", 3}}), SchemaError);
}

TEST_CASE("diamond file")
{
    auto net = diamond();
    CHECK(net.nodes().size() == 4);
    CHECK(net.links().size() == 8);
    CHECK(net.pruned_nodes() == 0);

    auto r = shortest_path(net, "A", "B", mode::car, 1e9);
    REQUIRE(r.links.size() == 2);
    CHECK(net.link(r.links[0]).id == "AC");
    CHECK(net.link(r.links[1]).id == "CB");
    CHECK(r.expected_time == doctest::Approx(30));
    CHECK(net.is_valid_route(r));
}

TEST_CASE("json round trip keeps the network")
{
    auto net = diamond();
    auto again = network_from_json(network_to_json(net));
    CHECK(network_to_json(again) == network_to_json(net));
}

TEST_CASE("disconnected islands are pruned")
{
    auto net = fixture::network({{"A", 0, 0}, {"B", 100, 0}, {"C", 200, 0}, {"X", 900, 900}},
                                {{"AB", "A", "B", 100, 10}, {"BC", "B", "C", 100, 10}});
    CHECK(net.pruned_nodes() == 1);
    CHECK_FALSE(net.find_node("X"));
}

TEST_CASE("mode restrictions make destinations unreachable")
{
    auto net = fixture::network({{"A", 0, 0}, {"B", 100, 0}, {"C", 200, 0}},
                                {{"AB", "A", "B", 100, 10}, {"BC", "B", "C", 100, 10, 10, {"bike"}}});
    CHECK_THROWS_AS(shortest_path(net, "A", "C", mode::car, 1e9), Unreachable);
    CHECK(shortest_path(net, "A", "C", mode::bike, 1e9).links.size() == 2);
    Router router(net);
    CHECK(router.try_route(0, 2, mode::car, 1e9) == nullptr);
}

TEST_CASE("speed cap slows links")
{
    auto net = fixture::line(2);
    auto r = shortest_path(net, "A", "C", mode::walk, 1.25);
    CHECK(r.expected_time == doctest::Approx(160));
}

TEST_CASE("equal-time routes break ties on link ids")
{
    auto net = fixture::network({{"A", 0, 0}, {"B", 200, 0}, {"C", 100, 50}, {"D", 100, -50}},
                                {{"z1", "A", "C", 100, 10},
                                 {"z2", "C", "B", 100, 10},
                                 {"a1", "A", "D", 100, 10},
                                 {"a2", "D", "B", 100, 10}});
    auto r = shortest_path(net, "A", "B", mode::car, 1e9);
    CHECK(net.link(r.links[0]).id == "a1");
}

TEST_CASE("shortest paths agree with exhaustive search")
{
    for (std::uint64_t seed = 1; seed <= 200; ++seed)
    {
        auto rc = fixture::random_case(seed, 7, 1);
        const auto& net = rc.net;
        Router router(net);
        for (NodeIdx a = 0; a < net.nodes().size(); ++a)
            for (NodeIdx b = 0; b < net.nodes().size(); ++b)
                for (double cap : {1e9, 4.0})
                {
                    auto want = oracle::brute_force_route(net, a, b, mode::car, cap);
                    auto got = router.try_route(a, b, mode::car, cap);
                    REQUIRE(bool(want) == bool(got));
                    if (!got)
                        continue;
                    CHECK(got->links == want->links);
                    CHECK(got->expected_time == doctest::Approx(want->expected_time));
                    CHECK(net.is_valid_route(*got));
                }
    }
}

TEST_CASE("nearest node")
{
    auto net = fixture::network({{"A", 0, 0}, {"B", 0, 100}}, {{"AB", "A", "B", 100, 10}, {"BA", "B", "A", 100, 10}});
    CHECK(net.node(nearest_node(net, 0, 0)).id == "A");
    CHECK(net.node(nearest_node(net, 0, 49)).id == "A");
    CHECK(net.node(nearest_node(net, 0, 51)).id == "B");

    auto tie = fixture::network({{"n2", 10, 0}, {"n1", -10, 0}}, {{"x", "n2", "n1", 20, 10}});
    CHECK(tie.node(nearest_node(tie, 0, 0)).id == "n1");
}

TEST_CASE("geojson has one feature per link")
{
    auto g = to_geojson(diamond());
    CHECK(g["type"] == "FeatureCollection");
    std::size_t lines = 0;
    for (const auto& f : g["features"])
        lines += f["geometry"]["type"] == "LineString";
    CHECK(lines == 8);
}
