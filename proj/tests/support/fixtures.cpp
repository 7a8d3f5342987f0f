#include "fixtures.h"

#include <tangram/fleet.h>

#include <algorithm>
#include <set>

using namespace tangram;

namespace fixture {

RoadNetwork network(const std::vector<N>& nodes, const std::vector<L>& links)
{
    std::vector<Node> ns;
    for (const auto& n : nodes)
        ns.push_back({n.id, n.x, n.y});
    std::vector<Link> ls;
    for (const auto& l : links)
    {
        Link k;
        k.id = l.id;
        k.from = l.from;
        k.to = l.to;
        k.length = l.length;
        k.free_speed = l.speed;
        k.storage_capacity = l.storage;
        k.flow_capacity = l.flow;
        k.modes = l.modes;
        std::sort(k.modes.begin(), k.modes.end());
        ls.push_back(k);
    }
    return RoadNetwork::build(std::move(ns), std::move(ls));
}

RoadNetwork line(int links, int storage)
{
    std::vector<N> nodes;
    std::vector<L> ls;
    for (int i = 0; i <= links; ++i)
        nodes.push_back({std::string(1, char('A' + i)), 100.0 * i, 0});
    for (int i = 0; i < links; ++i)
    {
        std::string a(1, char('A' + i)), b(1, char('A' + i + 1));
        ls.push_back({a + b, a, b, 100, 10, storage});
    }
    return network(nodes, ls);
}

void add_commuter(Population& pop, const RoadNetwork& net, const Day& d)
{
    Commuter c;
    c.id = d.id;
    c.home = net.node_index(d.home);
    c.owns_car = d.owns_car;
    MobilityAgenda ag;
    ag.owner = d.id;
    NodeIdx home = net.node_index(d.home), work = net.node_index(d.work);
    ag.activities.push_back({"home", home, d.leave_at, 8 * 3600.0});
    if (d.back_at)
    {
        ag.activities.push_back({"work", work, *d.back_at, 8 * 3600.0});
        ag.activities.push_back({"home", home, std::nullopt, 8 * 3600.0});
        ag.legs.push_back({std::nullopt, home, work});
        ag.legs.push_back({std::nullopt, work, home});
    }
    else
    {
        ag.activities.push_back({"work", work, std::nullopt, 8 * 3600.0});
        ag.legs.push_back({std::nullopt, home, work});
    }
    pop.commuters.push_back(c);
    pop.agendas.push_back(ag);
}

TravelingAlternative direct(Router& router, NodeIdx from, NodeIdx to, const std::string& mode, double speed_cap)
{
    TravelingAlternative a;
    Segment s;
    s.mode = mode;
    s.route = router.route(from, to, mode, speed_cap);
    s.expected_time = s.route->expected_time;
    a.total_time = s.expected_time;
    a.segments.push_back(s);
    return a;
}

DayPlan personal_plan(const Population& pop, std::uint32_t commuter, Router& router, const std::string& mode)
{
    DayPlan p;
    p.commuter = commuter;
    const auto& c = pop.commuters[commuter];
    for (const auto& leg : pop.agendas[commuter].legs)
        p.trips.push_back({direct(router, leg.origin, leg.destination, mode, personal_speed(c, mode)),
                           direct(router, leg.origin, leg.destination, mode::walk, c.walk_speed)});
    return p;
}

RandomCase random_case(std::uint64_t seed, int max_nodes, int max_people)
{
    std::mt19937_64 rng(seed);
    auto uni = [&](int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); };
    RandomCase rc;

    int n = uni(2, max_nodes);
    std::vector<N> nodes;
    for (int i = 0; i < n; ++i)
        nodes.push_back({"v" + std::to_string(i), double(uni(0, 400)), double(uni(0, 400))});
    std::vector<L> links;
    std::set<std::pair<int, int>> used;
    auto add = [&](int a, int b) {
        if (a == b || !used.insert({a, b}).second)
            return;
        links.push_back({"l" + std::to_string(a) + "_" + std::to_string(b), nodes[a].id, nodes[b].id,
                         double(uni(2, 30) * 10), double(uni(3, 15)), uni(1, 3),
                         {"bike", "car", "walk"}, double(uni(1, 10) * 90)});
    };
    // a ring keeps every node reachable; chords make routing choices
    for (int i = 0; i < n; ++i)
    {
        add(i, (i + 1) % n);
        if (uni(0, 1))
            add((i + 1) % n, i);
    }
    int chords = uni(0, n);
    for (int k = 0; k < chords; ++k)
        add(uni(0, n - 1), uni(0, n - 1));
    rc.net = network(nodes, links);

    nlohmann::json smi = {{"tangrhubs", nlohmann::json::array()}};
    if (n >= 3 && uni(0, 2) != 0)
    {
        nlohmann::json svc = {{"id", "bs"},      {"type", "inter_hub"}, {"mode", "bike"},
                              {"vehicle_speed", 5}, {"fleet", uni(0, 2)}};
        nlohmann::json car = {{"id", "cs"},       {"type", "inter_hub"}, {"mode", "car"},
                              {"vehicle_speed", 12}, {"fleet", uni(0, 2)}};
        nlohmann::json scoot = {{"id", "sc"},       {"type", "intra_hub"}, {"mode", "bike"},
                                {"vehicle_speed", 4}, {"fleet", uni(0, 1)}};
        for (int h = 0; h < 2; ++h)
            smi["tangrhubs"].push_back(
                {{"id", "H" + std::to_string(h)}, {"location", nodes[h].id}, {"services", {svc, car, scoot}}});
    }
    rc.smi = smi_from_json(smi, rc.net);
    rc.allocation = initial_allocation(rc.smi);

    Router router(rc.net);
    EnumerationOptions eo;
    eo.max_alternatives = 50;
    int people = uni(1, max_people);
    for (int p = 0; p < people; ++p)
    {
        Day d;
        d.id = "p" + std::to_string(p);
        int h = uni(0, n - 1), w = uni(0, n - 1);
        if (uni(0, 5) != 0 && n > 1)
            while (w == h)
                w = uni(0, n - 1);
        d.home = nodes[h].id;
        d.work = nodes[w].id;
        d.leave_at = uni(0, 60);
        if (uni(0, 3) != 0)
            d.back_at = d.leave_at + uni(0, 200);
        add_commuter(rc.pop, rc.net, d);
    }

    for (std::uint32_t c = 0; c < rc.pop.commuters.size(); ++c)
    {
        DayPlan plan;
        plan.commuter = c;
        const auto& who = rc.pop.commuters[c];
        for (const auto& leg : rc.pop.agendas[c].legs)
        {
            auto alts = enumerate_alternatives(leg.origin, leg.destination, 0, rc.smi, nullptr, router, who, eo);
            auto chosen = alts[std::size_t(uni(0, int(alts.size()) - 1))];
            auto walk = *std::find_if(alts.begin(), alts.end(), [](const auto& a) { return a.is_walk_direct(); });
            plan.trips.push_back({chosen, walk});
        }
        rc.plans.push_back(plan);
    }
    // plans in scrambled order: the kernel must not depend on it
    std::shuffle(rc.plans.begin(), rc.plans.end(), rng);

    rc.clock.start = 0;
    rc.clock.end = uni(0, 9) == 0 ? uni(20, 200) : 30 * 3600;
    rc.opts.storage_scale = uni(0, 4) == 0 ? 0.5 : 1.0;
    rc.opts.enforce_flow_capacity = uni(0, 3) == 0;
    if (uni(0, 4) == 0)
        rc.opts.queued_modes = {mode::car, mode::bike};
    return rc;
}

} // namespace fixture
