#include <tangram/demand.h>
#include <tangram/errors.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>
#include <set>

namespace tangram {

namespace {

double truncated_normal(std::mt19937_64& rng, double mean, double sd, double lo, double hi)
{
    std::normal_distribution<double> dist(mean, sd);
    for (int attempt = 0; attempt != 1000; ++attempt)
    {
        double v = dist(rng);
        if (v >= lo && v <= hi)
            return v;
    }
    return std::clamp(mean, lo, hi);
}

std::vector<NodeIdx> nodes_within(const RoadNetwork& net, NodeIdx centre, double radius)
{
    std::vector<NodeIdx> out;
    for (NodeIdx i = 0; i != net.nodes().size(); ++i)
        if (net.euclidean(i, centre) <= radius)
            out.push_back(i);
    if (out.empty())
        out.push_back(centre);
    return out;
}

NodeIdx resolve_location(const nlohmann::json& loc, const RoadNetwork& net, const std::string& where)
{
    if (loc.is_string())
    {
        auto n = net.find_node(loc.get<std::string>());
        if (!n)
            throw SchemaError(where + ": unknown node '" + loc.get<std::string>() + "'");
        return *n;
    }
    if (loc.is_object() && loc.contains("x") && loc.contains("y") && loc["x"].is_number()
        && loc["y"].is_number())
        return nearest_node(net, loc["x"].get<double>(), loc["y"].get<double>());
    throw SchemaError(where + ": location must be a node id or {x, y}");
}

double number_or(const nlohmann::json& j, const char* key, double fallback)
{
    if (!j.contains(key) || j[key].is_null())
        return fallback;
    if (!j[key].is_number())
        throw SchemaError(std::string("field '") + key + "' must be numeric");
    return j[key].get<double>();
}

} // namespace

std::vector<StartBin> GeneratorSpec::default_start_histogram()
{
    constexpr double h = 3600.0;
    return {{5 * h, 6 * h, 0.05},   {6 * h, 7 * h, 0.15},   {7 * h, 8 * h, 0.45},
            {8 * h, 9 * h, 0.15},   {9 * h, 10 * h, 0.08},  {10 * h, 11 * h, 0.05},
            {11 * h, 12 * h, 0.04}, {12 * h, 13 * h, 0.03}};
}

void validate_agenda(const MobilityAgenda& agenda, const RoadNetwork& net)
{
    const auto& who = agenda.owner;
    if (agenda.activities.size() < 2)
        throw BrokenChain("agenda of '" + who + "' needs at least two activities");
    if (agenda.legs.size() + 1 != agenda.activities.size())
        throw BrokenChain("agenda of '" + who + "' does not alternate activities and legs");

    for (std::size_t i = 0; i != agenda.activities.size(); ++i)
    {
        const auto& a = agenda.activities[i];
        if (a.location >= net.nodes().size())
            throw BrokenChain("agenda of '" + who + "': activity " + std::to_string(i)
                              + " has no valid location");
        bool last = i + 1 == agenda.activities.size();
        if (!last && !a.end_time)
            throw BrokenChain("agenda of '" + who + "': activity " + std::to_string(i)
                              + " needs an end time");
        if (a.end_time && (*a.end_time < 0 || *a.end_time > 30 * 3600.0))
            throw BrokenChain("agenda of '" + who + "': end time outside [0, 30h]");
        if (!(a.typical_duration > 0))
            throw BrokenChain("agenda of '" + who + "': typical duration must be positive");
        if (i > 0 && a.end_time && agenda.activities[i - 1].end_time
            && *a.end_time < *agenda.activities[i - 1].end_time)
            throw BrokenChain("agenda of '" + who + "': end times decrease");
    }
    for (std::size_t i = 0; i != agenda.legs.size(); ++i)
    {
        const auto& l = agenda.legs[i];
        if (l.origin != agenda.activities[i].location
            || l.destination != agenda.activities[i + 1].location)
            throw BrokenChain("agenda of '" + who + "': leg " + std::to_string(i)
                              + " does not connect its neighbouring activities");
    }
}

long sampled_count(const AreaSpec& area, double sampling_fraction)
{
    return static_cast<long>(std::floor(static_cast<double>(area.population) * sampling_fraction + 0.5));
}

Population generate_population(const GeneratorSpec& spec, const RoadNetwork& net,
                               std::uint64_t seed)
{
    if (spec.areas.empty())
        throw InconsistentSpec("no areas given");
    long total_people = 0;
    long total_jobs = 0;
    for (const auto& a : spec.areas)
    {
        if (a.population < 0 || a.jobs < 0)
            throw InconsistentSpec("area '" + a.name + "' has negative counts");
        if (a.centroid >= net.nodes().size())
            throw InconsistentSpec("area '" + a.name + "' has no valid centroid");
        total_people += a.population;
        total_jobs += a.jobs;
    }
    if (total_people <= 0)
        throw InconsistentSpec("areas hold no population");
    if (total_jobs <= 0)
        throw InconsistentSpec("areas hold no jobs");
    if (spec.start_histogram.empty())
        throw InconsistentSpec("empty start-time histogram");

    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);

    std::vector<std::vector<NodeIdx>> area_nodes;
    for (const auto& a : spec.areas)
        area_nodes.push_back(nodes_within(net, a.centroid, spec.home_radius));

    std::vector<double> bin_weights;
    for (const auto& b : spec.start_histogram)
        bin_weights.push_back(b.weight);

    Population pop;
    long serial = 0;
    for (std::size_t ai = 0; ai != spec.areas.size(); ++ai)
    {
        long count = sampled_count(spec.areas[ai], spec.sampling_fraction);

        // workplaces in other areas when there are any
        std::vector<double> job_weights;
        for (std::size_t w = 0; w != spec.areas.size(); ++w)
            job_weights.push_back(w == ai && spec.areas.size() > 1 ? 0.0
                                                                   : static_cast<double>(spec.areas[w].jobs));
        bool any_jobs = std::any_of(job_weights.begin(), job_weights.end(), [](double w) { return w > 0; });
        if (!any_jobs)
            job_weights[ai] = 1.0;
        std::discrete_distribution<std::size_t> pick_work(job_weights.begin(), job_weights.end());
        std::discrete_distribution<std::size_t> pick_bin(bin_weights.begin(), bin_weights.end());

        for (long k = 0; k != count; ++k)
        {
            char id[32];
            std::snprintf(id, sizeof id, "p%06ld", serial++);

            Commuter c;
            c.id = id;
            c.gender = unit(rng) < spec.female_share ? Gender::female : Gender::male;
            c.age = truncated_normal(rng, spec.age_mean, spec.age_sd, spec.age_min, spec.age_max);
            double speed_factor = c.age >= spec.senior_age ? spec.senior_speed_factor : 1.0;
            c.walk_speed = spec.walk_speed * speed_factor;
            c.bike_speed = spec.bike_speed * speed_factor;
            c.owns_car = c.age >= spec.car_owner_min_age;
            c.daily_budget = spec.daily_budget;

            const auto& homes = area_nodes[ai];
            c.home = homes[static_cast<std::size_t>(unit(rng) * homes.size()) % homes.size()];

            std::size_t wa = pick_work(rng);
            const auto& works = area_nodes[wa];
            NodeIdx work = works[static_cast<std::size_t>(unit(rng) * works.size()) % works.size()];
            if (work == c.home)
            {
                // nearest other node keeps the leg non-degenerate
                NodeIdx best = npos;
                for (NodeIdx n = 0; n != net.nodes().size(); ++n)
                    if (n != c.home && (best == npos || net.euclidean(n, c.home) < net.euclidean(best, c.home)))
                        best = n;
                if (best != npos)
                    work = best;
            }

            const auto& bin = spec.start_histogram[pick_bin(rng)];
            double depart = std::floor(bin.from + unit(rng) * (bin.to - bin.from));
            double duration = std::floor(truncated_normal(rng, spec.work_duration_mean, spec.work_duration_sd,
                                                          spec.work_duration_min, spec.work_duration_max));

            MobilityAgenda ag;
            ag.owner = c.id;
            ag.activities.push_back({"home", c.home, depart, std::max(3600.0, 24 * 3600.0 - duration)});
            ag.activities.push_back({"work", work, depart + duration, duration});
            ag.activities.push_back({"home", c.home, std::nullopt, std::max(3600.0, 24 * 3600.0 - duration)});
            ag.legs.push_back({std::nullopt, c.home, work});
            ag.legs.push_back({std::nullopt, work, c.home});

            pop.commuters.push_back(std::move(c));
            pop.agendas.push_back(std::move(ag));
        }
    }
    return pop;
}

GeneratorSpec generator_spec_from_json(const nlohmann::json& j, const RoadNetwork& net)
{
    if (!j.is_object() || !j.contains("areas") || !j["areas"].is_array())
        throw SchemaError("generator spec needs an 'areas' array");
    GeneratorSpec s;
    for (const auto& a : j["areas"])
    {
        AreaSpec area;
        area.name = a.value("name", "");
        if (!a.contains("centroid"))
            throw SchemaError("area '" + area.name + "' needs a centroid");
        area.centroid = resolve_location(a["centroid"], net, "area '" + area.name + "'");
        area.population = a.value("population", 0L);
        area.jobs = a.value("jobs", 0L);
        s.areas.push_back(std::move(area));
    }
    s.sampling_fraction = number_or(j, "sampling_fraction", s.sampling_fraction);
    s.home_radius = number_or(j, "home_radius", s.home_radius);

    if (j.contains("demographics"))
    {
        const auto& d = j["demographics"];
        s.female_share = number_or(d, "female_share", s.female_share);
        s.age_mean = number_or(d, "age_mean", s.age_mean);
        s.age_sd = number_or(d, "age_sd", s.age_sd);
        s.age_min = number_or(d, "age_min", s.age_min);
        s.age_max = number_or(d, "age_max", s.age_max);
        s.car_owner_min_age = number_or(d, "car_owner_min_age", s.car_owner_min_age);
        s.walk_speed = number_or(d, "walk_speed", s.walk_speed);
        s.bike_speed = number_or(d, "bike_speed", s.bike_speed);
        s.senior_age = number_or(d, "senior_age", s.senior_age);
        s.senior_speed_factor = number_or(d, "senior_speed_factor", s.senior_speed_factor);
        s.daily_budget = number_or(d, "daily_budget", s.daily_budget);
    }
    if (j.contains("schedule"))
    {
        const auto& sc = j["schedule"];
        if (sc.contains("start_histogram"))
        {
            s.start_histogram.clear();
            for (const auto& b : sc["start_histogram"])
                s.start_histogram.push_back({b.at("from").get<double>(), b.at("to").get<double>(),
                                             b.at("weight").get<double>()});
        }
        s.work_duration_mean = number_or(sc, "work_duration_mean", s.work_duration_mean);
        s.work_duration_sd = number_or(sc, "work_duration_sd", s.work_duration_sd);
        s.work_duration_min = number_or(sc, "work_duration_min", s.work_duration_min);
        s.work_duration_max = number_or(sc, "work_duration_max", s.work_duration_max);
    }
    return s;
}

Population population_from_json(const nlohmann::json& j, const RoadNetwork& net)
{
    if (!j.is_array())
        throw SchemaError("population file must be a JSON array of commuters");

    Population pop;
    std::set<std::string> seen;
    for (const auto& rec : j)
    {
        if (!rec.is_object() || !rec.contains("id") || !rec["id"].is_string())
            throw SchemaError("commuter record needs a string 'id'");
        Commuter c;
        c.id = rec["id"].get<std::string>();
        std::string where = "commuter '" + c.id + "'";
        if (!seen.insert(c.id).second)
            throw SchemaError(where + ": duplicate id");
        c.age = number_or(rec, "age", c.age);
        std::string gender = rec.value("gender", "female");
        if (gender == "female")
            c.gender = Gender::female;
        else if (gender == "male")
            c.gender = Gender::male;
        else
            throw SchemaError(where + ": gender must be 'female' or 'male'");

        const nlohmann::json attrs = rec.value("attributes", nlohmann::json::object());
        c.walk_speed = number_or(attrs, "walk_speed", c.walk_speed);
        c.bike_speed = number_or(attrs, "bike_speed", c.bike_speed);
        c.owns_car = attrs.value("owns_car", c.age >= 18);
        c.daily_budget = number_or(attrs, "daily_budget", c.daily_budget);
        if (c.age < 0 || !(c.walk_speed > 0) || !(c.bike_speed > 0) || c.daily_budget < 0)
            throw SchemaError(where + ": invalid attributes");

        if (!rec.contains("agenda") || !rec["agenda"].is_array())
            throw SchemaError(where + ": missing 'agenda' array");

        MobilityAgenda ag;
        ag.owner = c.id;
        bool expect_activity = true;
        for (const auto& item : rec["agenda"])
        {
            std::string type = item.value("type", "");
            if (type == "activity")
            {
                if (!expect_activity)
                    throw BrokenChain(where + ": two consecutive activities");
                Activity a;
                a.kind = item.value("kind", "work");
                if (!item.contains("location"))
                    throw SchemaError(where + ": activity without location");
                a.location = resolve_location(item["location"], net, where);
                if (item.contains("end_time") && !item["end_time"].is_null())
                    a.end_time = item["end_time"].get<double>();
                a.typical_duration = number_or(item, "typical_duration", a.typical_duration);
                ag.activities.push_back(std::move(a));
            }
            else if (type == "leg")
            {
                if (expect_activity)
                    throw BrokenChain(where + ": leg without a preceding activity");
                Leg l;
                if (item.contains("mode") && item["mode"].is_string())
                    l.mode = item["mode"].get<std::string>();
                ag.legs.push_back(std::move(l));
            }
            else
                throw SchemaError(where + ": agenda item type must be 'activity' or 'leg'");
            expect_activity = !expect_activity;
        }
        if (expect_activity && !ag.activities.empty())
            throw BrokenChain(where + ": agenda ends with a leg");

        for (std::size_t i = 0; i != ag.legs.size(); ++i)
        {
            ag.legs[i].origin = ag.activities[i].location;
            ag.legs[i].destination = ag.activities[i + 1].location;
        }
        validate_agenda(ag, net);

        c.home = ag.activities.front().location;
        for (const auto& a : ag.activities)
            if (a.kind == "home")
            {
                c.home = a.location;
                break;
            }
        pop.commuters.push_back(std::move(c));
        pop.agendas.push_back(std::move(ag));
    }
    return pop;
}

Population load_population(const std::filesystem::path& path, const RoadNetwork& net)
{
    std::ifstream in(path);
    if (!in)
        throw SchemaError("cannot open population file " + path.string());
    nlohmann::json j;
    try
    {
        in >> j;
    }
    catch (const nlohmann::json::exception& e)
    {
        throw SchemaError(path.string() + ": " + e.what());
    }
    return population_from_json(j, net);
}

nlohmann::json population_to_json(const Population& pop, const RoadNetwork& net)
{
    auto out = nlohmann::json::array();
    for (std::size_t i = 0; i != pop.commuters.size(); ++i)
    {
        const auto& c = pop.commuters[i];
        nlohmann::json attrs = {{"walk_speed", c.walk_speed},
                                {"bike_speed", c.bike_speed},
                                {"owns_car", c.owns_car}};
        if (std::isfinite(c.daily_budget))
            attrs["daily_budget"] = c.daily_budget;

        auto agenda = nlohmann::json::array();
        const auto& ag = pop.agendas[i];
        for (std::size_t k = 0; k != ag.activities.size(); ++k)
        {
            const auto& a = ag.activities[k];
            nlohmann::json rec = {{"type", "activity"},
                                  {"kind", a.kind},
                                  {"location", net.node(a.location).id},
                                  {"typical_duration", a.typical_duration}};
            if (a.end_time)
                rec["end_time"] = *a.end_time;
            agenda.push_back(std::move(rec));
            if (k < ag.legs.size())
            {
                nlohmann::json leg = {{"type", "leg"}};
                if (ag.legs[k].mode)
                    leg["mode"] = *ag.legs[k].mode;
                agenda.push_back(std::move(leg));
            }
        }
        out.push_back({{"id", c.id},
                       {"age", c.age},
                       {"gender", c.gender == Gender::female ? "female" : "male"},
                       {"attributes", attrs},
                       {"agenda", agenda}});
    }
    return out;
}

KMeansResult kmeans(const std::vector<Point>& points, std::size_t k, std::uint64_t seed,
                    int max_iterations, double epsilon)
{
    if (k == 0)
        throw TooFewPoints("k must be at least 1");
    std::set<std::pair<double, double>> distinct;
    for (const auto& p : points)
        distinct.emplace(p.x, p.y);
    if (distinct.size() < k)
        throw TooFewPoints("need " + std::to_string(k) + " distinct points, have "
                           + std::to_string(distinct.size()));

    auto d2 = [](const Point& a, const Point& b) {
        return (a.x - b.x) * (a.x - b.x) + (a.y - b.y) * (a.y - b.y);
    };

    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);

    // k-means++ seeding
    KMeansResult res;
    res.centroids.push_back(points[static_cast<std::size_t>(unit(rng) * points.size()) % points.size()]);
    std::vector<double> nearest(points.size(), std::numeric_limits<double>::infinity());
    while (res.centroids.size() < k)
    {
        double total = 0;
        for (std::size_t i = 0; i != points.size(); ++i)
        {
            nearest[i] = std::min(nearest[i], d2(points[i], res.centroids.back()));
            total += nearest[i];
        }
        double target = unit(rng) * total;
        std::size_t chosen = points.size();
        for (std::size_t i = 0; i != points.size(); ++i)
        {
            if (nearest[i] <= 0)
                continue;
            chosen = i;
            target -= nearest[i];
            if (target < 0)
                break;
        }
        res.centroids.push_back(points[chosen]);
    }

    res.assignment.assign(points.size(), 0);
    for (res.iterations = 1; res.iterations <= max_iterations; ++res.iterations)
    {
        for (std::size_t i = 0; i != points.size(); ++i)
        {
            std::size_t best = 0;
            for (std::size_t c = 1; c != k; ++c)
                if (d2(points[i], res.centroids[c]) < d2(points[i], res.centroids[best]))
                    best = c;
            res.assignment[i] = best;
        }
        std::vector<Point> sum(k);
        std::vector<std::size_t> count(k, 0);
        for (std::size_t i = 0; i != points.size(); ++i)
        {
            sum[res.assignment[i]].x += points[i].x;
            sum[res.assignment[i]].y += points[i].y;
            ++count[res.assignment[i]];
        }
        double shift = 0;
        for (std::size_t c = 0; c != k; ++c)
        {
            if (count[c] == 0)
                continue;  // empty cluster keeps its centroid
            Point next{sum[c].x / count[c], sum[c].y / count[c]};
            shift = std::max(shift, std::sqrt(d2(next, res.centroids[c])));
            res.centroids[c] = next;
        }
        if (shift < epsilon)
            break;
    }
    res.iterations = std::min(res.iterations, max_iterations);
    return res;
}

std::vector<NodeIdx> suggest_hub_locations(const std::vector<MobilityAgenda>& agendas,
                                           std::size_t k, const RoadNetwork& net,
                                           std::uint64_t seed)
{
    std::vector<Point> points;
    for (const auto& ag : agendas)
        for (const auto& a : ag.activities)
        {
            const auto& n = net.node(a.location);
            points.push_back({n.x, n.y});
        }
    auto res = kmeans(points, k, seed);
    std::vector<NodeIdx> out;
    for (const auto& c : res.centroids)
        out.push_back(nearest_node(net, c.x, c.y));
    return out;
}

} // namespace tangram
