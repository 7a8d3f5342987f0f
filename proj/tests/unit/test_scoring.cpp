#include <doctest.h>

#include "fixtures.h"

#include <tangram/errors.h>
#include <tangram/fleet.h>
#include <tangram/scoring.h>

#include <cmath>

using namespace tangram;

TEST_CASE("activity utility closed form")
{
    ScoringParams p;
    CHECK(activity_utility(p, 8 * 3600, 8 * 3600) == doctest::Approx(48).epsilon(1e-12));
    CHECK(activity_utility(p, 8 * 3600, 8 * 3600 * std::exp(-1.0)) == doctest::Approx(0).epsilon(1e-12));
    CHECK(activity_utility(p, 8 * 3600, 60) == 0);
    CHECK(activity_utility(p, 8 * 3600, 16 * 3600) > 48);
}

TEST_CASE("leg utility")
{
    ScoringParams p;
    CHECK(leg_utility(p, mode::car, false, 1800, 0) == doctest::Approx(-3));
    CHECK(leg_utility(p, mode::walk, false, 3600, 2) == doctest::Approx(-4));
    CHECK(leg_utility(p, mode::bike, true, 1800, 0) == doctest::Approx(-3));
}

TEST_CASE("segment feedback")
{
    SegmentOutcome o;
    o.realized_time = 100;
    CHECK(segment_feedback(o, 100) == doctest::Approx(1.0));
    o.realized_time = 200;
    CHECK(segment_feedback(o, 100) == doctest::Approx(0.75));
    o.cost = 1e9;
    o.co2 = 1e9;
    o.comfort = 0;
    CHECK(segment_feedback(o, 100) == doctest::Approx(0.25));
}

TEST_CASE("emissions")
{
    auto f = default_emission_factors();
    CHECK(co2_of(mode::car, 10000, f) == doctest::Approx(1600));
    CHECK(co2_of(mode::walk, 12345, f) == 0);
    CHECK(co2_of(mode::bike, 12345, f) == 0);
    CHECK_THROWS_AS(co2_of("hovercraft", 1000, f), UnknownMode);
}

TEST_CASE("a priced day with a service leg")
{
    auto net = fixture::line(3);
    Population pop;
    fixture::add_commuter(pop, net, {"p1", "A", "D", 0});
    nlohmann::json j = {{"tangrhubs",
                         {{{"id", "H"},
                           {"location", "A"},
                           {"services",
                            {{{"id", "bikes"},
                              {"type", "intra_hub"},
                              {"mode", "bike"},
                              {"vehicle_speed", 5},
                              {"fleet", 1},
                              {"cost_per_hour", 3.6},
                              {"fixed_cost", 0.5}}}}}}}};
    auto smi = smi_from_json(j, net);
    Router router(net);
    auto alts = enumerate_alternatives(0, 3, 0, smi, nullptr, router, pop.commuters[0]);
    const TravelingAlternative* bike = nullptr;
    for (const auto& a : alts)
        if (a.uses_services())
            bike = &a;
    REQUIRE(bike);
    DayPlan plan;
    plan.trips.push_back({*bike, fixture::direct(router, 0, 3, mode::walk, 1.4)});
    FleetLedger ledger(smi, initial_allocation(smi));
    auto log = simulate_day(net, pop, smi, {plan}, ledger);
    auto days = person_days(log, pop, net);
    REQUIRE(days.size() == 1);
    price_day(days[0], smi, PricingOptions{});
    REQUIRE(days[0].segments.size() == 1);
    const auto& s = days[0].segments[0];
    CHECK(s.service == std::optional<ServiceIdx>(0));
    CHECK(s.distance == doctest::Approx(300));
    CHECK(s.arrive - s.depart == 60);
    CHECK(s.cost == doctest::Approx(0.5 + 3.6 * 60 / 3600));
    CHECK(s.co2 == 0);
}

TEST_CASE("scoring a one-leg day")
{
    auto net = fixture::line(3);
    Population pop;
    fixture::add_commuter(pop, net, {"p1", "A", "D", 7 * 3600});
    Router router(net);
    auto plan = fixture::personal_plan(pop, 0, router, mode::car);
    FleetLedger ledger;
    auto log = simulate_day(net, pop, Smi{}, {plan}, ledger);
    auto days = person_days(log, pop, net);
    PricingOptions po;
    po.private_costs.clear();
    price_day(days[0], Smi{}, po);
    ScoringParams p;
    std::int64_t end = 30 * 3600;
    // home until 07:00, then work from 07:00:30 until midnight
    double home = activity_utility(p, 8 * 3600, 7 * 3600);
    double work = activity_utility(p, 8 * 3600, 24 * 3600 - (7 * 3600 + 30));
    double leg = leg_utility(p, mode::car, false, 30, 0);
    double got = score_plan(days[0], pop.agendas[0], p, end);
    CHECK(got == doctest::Approx(home + work + leg));
}
