#include <tangram/errors.h>
#include <tangram/fleet.h>
#include <tangram/services.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

namespace tangram {

namespace {

constexpr double unbounded_speed = 1e9;

ServiceType parse_type(const std::string& s, const std::string& where)
{
    if (s == "intra_hub" || s == "intra-hub" || s == "intra")
        return ServiceType::intra_hub;
    if (s == "inter_hub" || s == "inter-hub" || s == "inter")
        return ServiceType::inter_hub;
    throw SchemaError(where + ": service type must be 'intra_hub' or 'inter_hub'");
}

double nonneg(const nlohmann::json& j, const char* key, double fallback, const std::string& where)
{
    if (!j.contains(key))
        return fallback;
    if (!j[key].is_number())
        throw SchemaError(where + ": '" + key + "' must be numeric");
    double v = j[key].get<double>();
    if (!std::isfinite(v) || v < 0)
        throw SchemaError(where + ": '" + key + "' must be finite and non-negative");
    return v;
}

bool same_service(const MobilityService& a, const MobilityService& b)
{
    return a.type == b.type && a.mode == b.mode && a.vehicle_speed == b.vehicle_speed
           && a.co2_per_km == b.co2_per_km && a.cost_per_hour == b.cost_per_hour
           && a.cost_per_km == b.cost_per_km && a.fixed_cost == b.fixed_cost;
}

} // namespace

bool Tangrhub::offers(ServiceIdx s) const
{
    return std::binary_search(services.begin(), services.end(), s);
}

std::optional<ServiceIdx> Smi::find_service(const std::string& id) const
{
    for (ServiceIdx i = 0; i != services.size(); ++i)
        if (services[i].id == id)
            return i;
    return std::nullopt;
}

std::optional<HubIdx> Smi::find_hub(const std::string& id) const
{
    for (HubIdx i = 0; i != hubs.size(); ++i)
        if (hubs[i].id == id)
            return i;
    return std::nullopt;
}

int hub_capacity(int initial_fleet)
{
    // integer form of ceil(1.25 * n)
    return (5 * initial_fleet + 3) / 4;
}

Smi smi_from_json(const nlohmann::json& j, const RoadNetwork& net)
{
    if (!j.is_object() || !j.contains("tangrhubs") || !j["tangrhubs"].is_array())
        throw SchemaError("SMI file needs a 'tangrhubs' array");

    Smi smi;
    std::set<std::string> hub_ids;
    for (const auto& rec : j["tangrhubs"])
    {
        if (!rec.contains("id") || !rec["id"].is_string())
            throw SchemaError("tangrhub needs a string 'id'");
        Tangrhub hub;
        hub.id = rec["id"].get<std::string>();
        std::string where = "tangrhub '" + hub.id + "'";
        if (!hub_ids.insert(hub.id).second)
            throw SchemaError(where + ": duplicate id");
        if (!rec.contains("location"))
            throw SchemaError(where + ": missing location");
        const auto& loc = rec["location"];
        if (loc.is_string())
        {
            auto n = net.find_node(loc.get<std::string>());
            if (!n)
                throw SchemaError(where + ": unknown node '" + loc.get<std::string>() + "'");
            hub.location = *n;
        }
        else if (loc.is_object() && loc.contains("x") && loc.contains("y"))
            hub.location = nearest_node(net, loc["x"].get<double>(), loc["y"].get<double>());
        else
            throw SchemaError(where + ": location must be a node id or {x, y}");

        for (const auto& srec : rec.value("services", nlohmann::json::array()))
        {
            MobilityService s;
            if (!srec.contains("id") || !srec["id"].is_string())
                throw SchemaError(where + ": service needs a string 'id'");
            s.id = srec["id"].get<std::string>();
            std::string swhere = where + " service '" + s.id + "'";
            s.provider = srec.value("provider", "");
            s.type = parse_type(srec.value("type", ""), swhere);
            if (!srec.contains("mode") || !srec["mode"].is_string())
                throw SchemaError(swhere + ": missing mode");
            s.mode = srec["mode"].get<std::string>();
            s.vehicle_speed = nonneg(srec, "vehicle_speed", 5.0, swhere);
            if (!(s.vehicle_speed > 0))
                throw SchemaError(swhere + ": vehicle_speed must be positive");
            s.co2_per_km = nonneg(srec, "co2_per_km", 0.0, swhere);
            s.cost_per_hour = nonneg(srec, "cost_per_hour", 0.0, swhere);
            s.cost_per_km = nonneg(srec, "cost_per_km", 0.0, swhere);
            s.fixed_cost = nonneg(srec, "fixed_cost", 0.0, swhere);
            double fleet = nonneg(srec, "fleet", 0.0, swhere);
            if (fleet != std::floor(fleet))
                throw SchemaError(swhere + ": fleet must be an integer");

            auto existing = smi.find_service(s.id);
            ServiceIdx idx;
            if (existing)
            {
                if (!same_service(smi.services[*existing], s))
                    throw SchemaError(swhere + ": parameters differ from another hub's definition");
                idx = *existing;
            }
            else
            {
                idx = static_cast<ServiceIdx>(smi.services.size());
                smi.services.push_back(s);
            }
            if (smi.services[idx].initial_fleet_per_hub.count(hub.id))
                throw SchemaError(swhere + ": listed twice");
            smi.services[idx].initial_fleet_per_hub[hub.id] = static_cast<int>(fleet);
            hub.services.push_back(idx);
        }
        std::sort(hub.services.begin(), hub.services.end());
        smi.hubs.push_back(std::move(hub));
    }

    for (auto& hub : smi.hubs)
    {
        hub.initial_fleet.assign(smi.services.size(), 0);
        hub.capacity.assign(smi.services.size(), 0);
        for (ServiceIdx s : hub.services)
        {
            int fleet = smi.services[s].initial_fleet_per_hub.at(hub.id);
            hub.initial_fleet[s] = fleet;
            hub.capacity[s] = hub_capacity(fleet);
        }
    }
    return smi;
}

Smi load_smi(const std::filesystem::path& path, const RoadNetwork& net)
{
    std::ifstream in(path);
    if (!in)
        throw SchemaError("cannot open SMI file " + path.string());
    nlohmann::json j;
    try
    {
        in >> j;
    }
    catch (const nlohmann::json::exception& e)
    {
        throw SchemaError(path.string() + ": " + e.what());
    }
    return smi_from_json(j, net);
}

nlohmann::json smi_to_json(const Smi& smi, const RoadNetwork& net)
{
    auto hubs = nlohmann::json::array();
    for (const auto& hub : smi.hubs)
    {
        auto services = nlohmann::json::array();
        for (ServiceIdx s : hub.services)
        {
            const auto& sv = smi.services[s];
            nlohmann::json rec = {{"id", sv.id},
                                  {"type", sv.type == ServiceType::intra_hub ? "intra_hub" : "inter_hub"},
                                  {"mode", sv.mode},
                                  {"fleet", hub.initial_fleet[s]},
                                  {"cost_per_hour", sv.cost_per_hour},
                                  {"cost_per_km", sv.cost_per_km},
                                  {"fixed_cost", sv.fixed_cost},
                                  {"co2_per_km", sv.co2_per_km},
                                  {"vehicle_speed", sv.vehicle_speed}};
            if (!sv.provider.empty())
                rec["provider"] = sv.provider;
            services.push_back(std::move(rec));
        }
        hubs.push_back({{"id", hub.id}, {"location", net.node(hub.location).id}, {"services", services}});
    }
    return {{"tangrhubs", hubs}};
}

double cost_of(const MobilityService& service, double duration_s, double distance_m)
{
    return service.cost_per_hour * (duration_s / 3600.0) + service.cost_per_km * (distance_m / 1000.0)
           + service.fixed_cost;
}

PrivateCosts default_private_costs()
{
    return {{mode::car, ModeCost{0.0, 0.35, 1.5}}};
}

double private_cost_of(const PrivateCosts& costs, const std::string& mode, double duration_s,
                       double distance_m)
{
    auto it = costs.find(mode);
    if (it == costs.end())
        return 0.0;
    const auto& c = it->second;
    return c.cost_per_hour * (duration_s / 3600.0) + c.cost_per_km * (distance_m / 1000.0) + c.fixed_cost;
}

const char* to_string(SegmentRole r)
{
    switch (r)
    {
    case SegmentRole::first_mile: return "first_mile";
    case SegmentRole::hub_to_hub: return "hub_to_hub";
    case SegmentRole::last_mile: return "last_mile";
    case SegmentRole::direct: return "direct";
    }
    return "?";
}

const char* to_string(PatternClass p)
{
    switch (p)
    {
    case PatternClass::three_trip: return "three_trip";
    case PatternClass::two_trip_I: return "two_trip_I";
    case PatternClass::two_trip_II: return "two_trip_II";
    case PatternClass::direct: return "direct";
    }
    return "?";
}

std::optional<HubIdx> Segment::provider_hub() const
{
    if (!service)
        return std::nullopt;
    if (role == SegmentRole::first_mile)
        return dest_hub;
    return origin_hub;
}

bool TravelingAlternative::uses_services() const
{
    return std::any_of(segments.begin(), segments.end(), [](const Segment& s) { return s.service.has_value(); });
}

bool TravelingAlternative::is_walk_direct() const
{
    return segments.size() == 1 && !segments[0].service && segments[0].mode == mode::walk;
}

std::string TravelingAlternative::describe(const RoadNetwork& net, const Smi& smi) const
{
    std::ostringstream out;
    out << to_string(pattern) << ":";
    for (const auto& s : segments)
    {
        out << " [" << to_string(s.role) << " " << (s.service ? smi.services[*s.service].id : s.mode) << " "
            << net.node(s.from()).id << "->" << net.node(s.to()).id << "]";
    }
    return out.str();
}

PatternClass classify_segments(const std::vector<Segment>& segs)
{
    if (segs.size() == 3)
        return PatternClass::three_trip;
    if (segs.size() == 2)
    {
        // I: the second vehicle is handed out at the hub in between
        const auto& next = segs[1];
        if (next.service && next.provider_hub() && segs[0].dest_hub && *next.provider_hub() == *segs[0].dest_hub)
            return PatternClass::two_trip_I;
        return PatternClass::two_trip_II;
    }
    return PatternClass::direct;
}

std::string check_alternative(const TravelingAlternative& alt, const Smi& smi, NodeIdx origin, NodeIdx dest)
{
    const auto& segs = alt.segments;
    if (segs.empty() || segs.size() > 3)
        return "segment count " + std::to_string(segs.size()) + " outside [1, 3]";
    if (segs.front().from() != origin || segs.back().to() != dest)
        return "alternative does not start at the origin or end at the destination";
    double time = 0;
    double cost = 0;
    for (std::size_t i = 0; i != segs.size(); ++i)
    {
        const auto& s = segs[i];
        if (!s.route)
            return "segment without route";
        if (i > 0 && segs[i - 1].to() != s.from())
            return "segments do not chain";
        if (s.role == SegmentRole::hub_to_hub)
        {
            if (!s.service || smi.services[*s.service].type != ServiceType::inter_hub)
                return "hub_to_hub segment without an inter-hub service";
            if (!s.origin_hub || !s.dest_hub || *s.origin_hub == *s.dest_hub)
                return "hub_to_hub segment needs two distinct hubs";
        }
        else if (s.service && smi.services[*s.service].type != ServiceType::intra_hub)
            return "first/last-mile or direct service segment must be intra-hub";
        if (s.service)
        {
            auto hub = s.provider_hub();
            if (!hub || !smi.hubs[*hub].offers(*s.service))
                return "service segment references a hub that does not offer it";
        }
        time += s.expected_time;
        cost += s.expected_cost;
    }
    if (std::abs(time - alt.total_time) > 1e-6 * std::max(1.0, time)
        || std::abs(cost - alt.total_cost) > 1e-9 * std::max(1.0, cost))
        return "totals differ from the segment sums";

    std::size_t n = segs.size();
    PatternClass expected = classify_segments(segs);
    if (alt.pattern != expected)
        return std::string("pattern ") + to_string(alt.pattern) + " does not match segment shape";
    if (n == 3
        && (segs[0].role != SegmentRole::first_mile || segs[1].role != SegmentRole::hub_to_hub
            || segs[2].role != SegmentRole::last_mile))
        return "three_trip roles must be first_mile, hub_to_hub, last_mile";
    return {};
}

double personal_speed(const Commuter& c, const std::string& m)
{
    if (m == mode::walk)
        return c.walk_speed;
    if (m == mode::bike)
        return c.bike_speed;
    return unbounded_speed;
}

namespace {

struct Builder
{
    const Smi& smi;
    Router& router;
    const Commuter& commuter;
    const EnumerationOptions& opts;

    // returns false when the mode cannot reach
    bool personal(std::vector<Segment>& out, SegmentRole role, const std::string& m, NodeIdx from,
                  NodeIdx to, std::optional<HubIdx> oh, std::optional<HubIdx> dh)
    {
        if (from == to)
            return true;  // nothing to travel
        auto r = router.try_route(from, to, m, personal_speed(commuter, m));
        if (!r)
            return false;
        Segment s;
        s.role = role;
        s.mode = m;
        s.origin_hub = oh;
        s.dest_hub = dh;
        s.route = r;
        s.expected_time = r->expected_time;
        s.expected_cost = private_cost_of(opts.private_costs, m, r->expected_time, r->distance);
        out.push_back(std::move(s));
        return true;
    }

    bool service(std::vector<Segment>& out, SegmentRole role, ServiceIdx sv, NodeIdx from, NodeIdx to,
                 std::optional<HubIdx> oh, std::optional<HubIdx> dh)
    {
        if (from == to)
            return false;  // a vehicle for zero distance is never offered
        const auto& service = smi.services[sv];
        auto r = router.try_route(from, to, service.mode, service.vehicle_speed);
        if (!r)
            return false;
        Segment s;
        s.role = role;
        s.mode = service.mode;
        s.service = sv;
        s.origin_hub = oh;
        s.dest_hub = dh;
        s.route = r;
        s.expected_time = r->expected_time;
        s.expected_cost = cost_of(service, r->expected_time, r->distance);
        out.push_back(std::move(s));
        return true;
    }
};

// hubs nearest to a node, up to n, within the access radius; ties -> hub id
std::vector<HubIdx> nearest_hubs(const Smi& smi, const RoadNetwork& net, NodeIdx at, std::size_t n,
                                 double radius)
{
    std::vector<HubIdx> idx;
    for (HubIdx h = 0; h != smi.hubs.size(); ++h)
        if (net.euclidean(at, smi.hubs[h].location) <= radius)
            idx.push_back(h);
    std::sort(idx.begin(), idx.end(), [&](HubIdx a, HubIdx b) {
        double da = net.euclidean(at, smi.hubs[a].location);
        double db = net.euclidean(at, smi.hubs[b].location);
        if (da != db)
            return da < db;
        return smi.hubs[a].id < smi.hubs[b].id;
    });
    if (idx.size() > n)
        idx.resize(n);
    return idx;
}


// identity of an alternative for de-duplication and stable ordering
std::vector<std::tuple<int, std::string, long, NodeIdx, NodeIdx>> signature(const TravelingAlternative& a)
{
    std::vector<std::tuple<int, std::string, long, NodeIdx, NodeIdx>> sig;
    for (const auto& s : a.segments)
        sig.emplace_back(static_cast<int>(s.role), s.mode, s.service ? static_cast<long>(*s.service) : -1L,
                         s.from(), s.to());
    return sig;
}

} // namespace

std::vector<TravelingAlternative> enumerate_alternatives(NodeIdx origin, NodeIdx dest, double /*depart*/,
                                                         const Smi& smi, const FleetLedger* ledger,
                                                         Router& router, const Commuter& commuter,
                                                         const EnumerationOptions& opts)
{
    const auto& net = router.network();
    Builder b{smi, router, commuter, opts};
    std::vector<TravelingAlternative> alts;

    if (origin == dest)
    {
        // nothing to travel: a single empty walk
        TravelingAlternative stay;
        Segment s;
        s.mode = mode::walk;
        s.route = router.route(origin, dest, mode::walk, commuter.walk_speed);
        stay.segments.push_back(std::move(s));
        return {stay};
    }

    auto add = [&](std::vector<Segment> segs) {
        if (segs.empty() || segs.size() > 3)
            return;
        TravelingAlternative a;
        a.pattern = classify_segments(segs);
        for (const auto& s : segs)
        {
            a.total_time += s.expected_time;
            a.total_cost += s.expected_cost;
        }
        a.segments = std::move(segs);
        if (ledger && !ledger->unlimited() && a.uses_services() && !ledger->can_reserve(a))
            return;
        alts.push_back(std::move(a));
    };

    // personal direct modes
    std::vector<std::string> personal_modes;
    if (commuter.owns_car)
        personal_modes.push_back(mode::car);
    personal_modes.push_back(mode::bike);
    personal_modes.push_back(mode::walk);
    for (const auto& m : personal_modes)
    {
        std::vector<Segment> segs;
        if (b.personal(segs, SegmentRole::direct, m, origin, dest, std::nullopt, std::nullopt))
            add(std::move(segs));
    }

    auto near_o = nearest_hubs(smi, net, origin, opts.hubs_per_endpoint, opts.max_access_distance);
    auto near_d = nearest_hubs(smi, net, dest, opts.hubs_per_endpoint, opts.max_access_distance);

    auto intra_services = [&](HubIdx h) {
        std::vector<ServiceIdx> out;
        for (ServiceIdx s : smi.hubs[h].services)
            if (smi.services[s].type == ServiceType::intra_hub)
                out.push_back(s);
        return out;
    };

    // three-trip: access to TH_o, inter-hub to TH_d, egress to the destination
    for (HubIdx ho : near_o)
        for (HubIdx hd : near_d)
        {
            if (ho == hd || smi.hubs[ho].location == smi.hubs[hd].location)
                continue;
            NodeIdx lo = smi.hubs[ho].location;
            NodeIdx ld = smi.hubs[hd].location;
            for (ServiceIdx inter : smi.hubs[ho].services)
            {
                if (smi.services[inter].type != ServiceType::inter_hub || !smi.hubs[hd].offers(inter))
                    continue;
                std::vector<std::optional<ServiceIdx>> access{std::nullopt};
                for (auto s : intra_services(ho))
                    access.push_back(s);
                std::vector<std::optional<ServiceIdx>> egress{std::nullopt};
                for (auto s : intra_services(hd))
                    egress.push_back(s);
                for (const auto& acc : access)
                    for (const auto& egr : egress)
                    {
                        std::vector<Segment> segs;
                        bool ok = acc ? b.service(segs, SegmentRole::first_mile, *acc, origin, lo, std::nullopt, ho)
                                      : b.personal(segs, SegmentRole::first_mile, mode::walk, origin, lo,
                                                   std::nullopt, ho);
                        ok = ok && b.service(segs, SegmentRole::hub_to_hub, inter, lo, ld, ho, hd);
                        ok = ok
                             && (egr ? b.service(segs, SegmentRole::last_mile, *egr, ld, dest, hd, std::nullopt)
                                     : b.personal(segs, SegmentRole::last_mile, mode::walk, ld, dest, hd,
                                                  std::nullopt));
                        if (ok)
                            add(std::move(segs));
                    }
            }
        }

    // two-trip I: walk to TH_o, intra-hub vehicle of TH_o to the destination
    for (HubIdx ho : near_o)
    {
        NodeIdx lo = smi.hubs[ho].location;
        for (ServiceIdx s : intra_services(ho))
        {
            std::vector<Segment> segs;
            bool ok = b.personal(segs, SegmentRole::first_mile, mode::walk, origin, lo, std::nullopt, ho)
                      && b.service(segs, SegmentRole::last_mile, s, lo, dest, ho, std::nullopt);
            if (ok)
                add(std::move(segs));
        }
    }

    // two-trip II: intra-hub vehicle of TH_d from the origin, walk from TH_d
    for (HubIdx hd : near_d)
    {
        NodeIdx ld = smi.hubs[hd].location;
        for (ServiceIdx s : intra_services(hd))
        {
            std::vector<Segment> segs;
            bool ok = b.service(segs, SegmentRole::first_mile, s, origin, ld, std::nullopt, hd)
                      && b.personal(segs, SegmentRole::last_mile, mode::walk, ld, dest, hd, std::nullopt);
            if (ok)
                add(std::move(segs));
        }
    }

    // de-duplicate, order by expected time, cap while keeping walk-direct
    std::vector<std::pair<decltype(signature(alts[0])), std::size_t>> keyed;
    for (std::size_t i = 0; i != alts.size(); ++i)
        keyed.emplace_back(signature(alts[i]), i);
    std::sort(keyed.begin(), keyed.end(), [&](const auto& x, const auto& y) {
        double tx = alts[x.second].total_time;
        double ty = alts[y.second].total_time;
        if (tx != ty)
            return tx < ty;
        return x.first < y.first;
    });
    std::vector<TravelingAlternative> out;
    std::set<decltype(signature(alts[0]))> seen;
    for (const auto& [sig, i] : keyed)
        if (seen.insert(sig).second)
            out.push_back(std::move(alts[i]));
    cap_alternatives(out, opts.max_alternatives);
    return out;
}

void cap_alternatives(std::vector<TravelingAlternative>& alts, std::size_t max)
{
    if (alts.size() <= max || max == 0)
        return;
    auto walk = std::find_if(alts.begin(), alts.end(), [](const auto& a) { return a.is_walk_direct(); });
    if (walk != alts.end() && std::size_t(walk - alts.begin()) >= max)
        std::iter_swap(alts.begin() + static_cast<std::ptrdiff_t>(max - 1), walk);
    alts.resize(max);
}

} // namespace tangram
