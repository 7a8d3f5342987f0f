#include <tangram/errors.h>
#include <tangram/network.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <numeric>
#include <queue>
#include <set>

namespace tangram {

namespace {

constexpr double earth_radius = 6371000.0;
constexpr double pi = 3.14159265358979323846;

bool times_tie(double a, double b)
{
    return std::abs(a - b) <= 1e-9 * std::max(1.0, std::max(std::abs(a), std::abs(b)));
}

// Union-find for the weak-connectivity pass.
struct Components
{
    std::vector<std::size_t> parent;
    explicit Components(std::size_t n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
    std::size_t find(std::size_t i)
    {
        while (parent[i] != i)
            i = parent[i] = parent[parent[i]];
        return i;
    }
    void unite(std::size_t a, std::size_t b) { parent[find(a)] = find(b); }
};

double require_number(const nlohmann::json& rec, const char* key, const std::string& where)
{
    if (!rec.contains(key) || !rec[key].is_number())
        throw SchemaError(where + ": missing numeric field '" + key + "'");
    double v = rec[key].get<double>();
    if (!std::isfinite(v))
        throw SchemaError(where + ": field '" + key + "' is not finite");
    return v;
}

std::string require_string(const nlohmann::json& rec, const char* key, const std::string& where)
{
    if (!rec.contains(key) || !rec[key].is_string())
        throw SchemaError(where + ": missing string field '" + key + "'");
    return rec[key].get<std::string>();
}

} // namespace

bool Link::allows(const std::string& m) const
{
    return std::binary_search(modes.begin(), modes.end(), m);
}

RoadNetwork RoadNetwork::build(std::vector<Node> nodes, std::vector<Link> links)
{
    if (nodes.empty())
        throw EmptyNetwork("network has no nodes");

    std::unordered_map<std::string, std::size_t> ids;
    for (std::size_t i = 0; i != nodes.size(); ++i)
    {
        const auto& n = nodes[i];
        if (n.id.empty())
            throw SchemaError("node with empty id");
        if (!std::isfinite(n.x) || !std::isfinite(n.y))
            throw SchemaError("node '" + n.id + "' has non-finite coordinates");
        if (!ids.emplace(n.id, i).second)
            throw SchemaError("duplicate node id '" + n.id + "'");
    }

    std::set<std::string> link_ids;
    Components comp(nodes.size());
    for (auto& l : links)
    {
        if (!link_ids.insert(l.id).second)
            throw SchemaError("duplicate link id '" + l.id + "'");
        auto f = ids.find(l.from);
        auto t = ids.find(l.to);
        if (f == ids.end())
            throw DanglingLink("link '" + l.id + "' references unknown node '" + l.from + "'");
        if (t == ids.end())
            throw DanglingLink("link '" + l.id + "' references unknown node '" + l.to + "'");
        if (l.from == l.to)
            throw SchemaError("link '" + l.id + "' is a self-loop");
        if (!(l.length > 0) || !(l.free_speed > 0) || !(l.flow_capacity > 0))
            throw SchemaError("link '" + l.id + "' needs positive length, speed and flow capacity");
        if (l.storage_capacity < 1)
            throw SchemaError("link '" + l.id + "' storage capacity must be >= 1");
        std::sort(l.modes.begin(), l.modes.end());
        l.modes.erase(std::unique(l.modes.begin(), l.modes.end()), l.modes.end());
        if (l.modes.empty())
            throw SchemaError("link '" + l.id + "' allows no modes");
        comp.unite(f->second, t->second);
    }

    // keep the largest weakly connected component; ties -> the one holding
    // the smallest node index
    std::vector<std::size_t> size(nodes.size(), 0);
    for (std::size_t i = 0; i != nodes.size(); ++i)
        ++size[comp.find(i)];
    std::size_t best = comp.find(0);
    for (std::size_t i = 0; i != nodes.size(); ++i)
        if (size[comp.find(i)] > size[best])
            best = comp.find(i);

    RoadNetwork net;
    for (std::size_t i = 0; i != nodes.size(); ++i)
    {
        if (comp.find(i) != best)
        {
            ++net.pruned_;
            continue;
        }
        net.node_ids_.emplace(nodes[i].id, static_cast<NodeIdx>(net.nodes_.size()));
        net.nodes_.push_back(std::move(nodes[i]));
    }
    if (net.pruned_ != 0)
        std::cerr << "warning: pruned " << net.pruned_ << " node(s) outside the main component\n";

    for (auto& l : links)
    {
        auto f = net.node_ids_.find(l.from);
        if (f == net.node_ids_.end())
            continue;
        l.from_idx = f->second;
        l.to_idx = net.node_ids_.at(l.to);
        net.link_ids_.emplace(l.id, static_cast<LinkIdx>(net.links_.size()));
        net.links_.push_back(std::move(l));
    }

    net.out_.resize(net.nodes_.size());
    for (LinkIdx i = 0; i != net.links_.size(); ++i)
        net.out_[net.links_[i].from_idx].push_back(i);

    std::vector<LinkIdx> order(net.links_.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](LinkIdx a, LinkIdx b) { return net.links_[a].id < net.links_[b].id; });
    net.rank_.resize(order.size());
    for (std::uint32_t r = 0; r != order.size(); ++r)
        net.rank_[order[r]] = r;

    return net;
}

std::optional<NodeIdx> RoadNetwork::find_node(const std::string& id) const
{
    auto it = node_ids_.find(id);
    if (it == node_ids_.end())
        return std::nullopt;
    return it->second;
}

std::optional<LinkIdx> RoadNetwork::find_link(const std::string& id) const
{
    auto it = link_ids_.find(id);
    if (it == link_ids_.end())
        return std::nullopt;
    return it->second;
}

NodeIdx RoadNetwork::node_index(const std::string& id) const
{
    auto n = find_node(id);
    if (!n)
        throw SchemaError("unknown node '" + id + "'");
    return *n;
}

double RoadNetwork::euclidean(NodeIdx a, NodeIdx b) const
{
    return std::hypot(nodes_[a].x - nodes_[b].x, nodes_[a].y - nodes_[b].y);
}

double RoadNetwork::link_time(LinkIdx l, double speed_cap) const
{
    const auto& lk = links_[l];
    return lk.length / std::min(lk.free_speed, speed_cap);
}

bool RoadNetwork::is_valid_route(const Route& r) const
{
    double distance = 0;
    NodeIdx at = r.origin;
    for (LinkIdx l : r.links)
    {
        if (l >= links_.size())
            return false;
        const auto& lk = links_[l];
        if (lk.from_idx != at || !lk.allows(r.mode))
            return false;
        at = lk.to_idx;
        distance += lk.length;
    }
    return at == r.destination && std::abs(distance - r.distance) <= 1e-6 * std::max(1.0, distance);
}

RoadNetwork network_from_json(const nlohmann::json& j)
{
    if (!j.is_object() || !j.contains("nodes") || !j["nodes"].is_array() || !j.contains("links")
        || !j["links"].is_array())
        throw SchemaError("network file needs 'nodes' and 'links' arrays");

    std::string crs = j.value("crs", "planar");
    if (crs != "planar" && crs != "wgs84")
        throw SchemaError("unsupported crs '" + crs + "'");

    std::vector<Node> nodes;
    for (const auto& rec : j["nodes"])
    {
        std::string where = "node";
        Node n;
        n.id = require_string(rec, "id", where);
        where = "node '" + n.id + "'";
        n.x = require_number(rec, "x", where);
        n.y = require_number(rec, "y", where);
        nodes.push_back(std::move(n));
    }

    std::optional<GeoOrigin> geo;
    if (crs == "wgs84" && !nodes.empty())
    {
        GeoOrigin g;
        for (const auto& n : nodes)
        {
            g.lon0 += n.x;
            g.lat0 += n.y;
        }
        g.lon0 /= nodes.size();
        g.lat0 /= nodes.size();
        double coslat = std::cos(g.lat0 * pi / 180.0);
        for (auto& n : nodes)
        {
            double lon = n.x;
            double lat = n.y;
            n.x = earth_radius * (lon - g.lon0) * pi / 180.0 * coslat;
            n.y = earth_radius * (lat - g.lat0) * pi / 180.0;
        }
        geo = g;
    }

    std::vector<Link> links;
    for (const auto& rec : j["links"])
    {
        std::string where = "link";
        Link l;
        l.id = require_string(rec, "id", where);
        where = "link '" + l.id + "'";
        l.from = require_string(rec, "from", where);
        l.to = require_string(rec, "to", where);
        l.length = require_number(rec, "length", where);
        l.free_speed = require_number(rec, "free_speed", where);
        double storage = require_number(rec, "storage_capacity", where);
        if (storage != std::floor(storage))
            throw SchemaError(where + ": storage_capacity must be an integer");
        l.storage_capacity = static_cast<int>(storage);
        l.flow_capacity = require_number(rec, "flow_capacity", where);
        if (!rec.contains("modes") || !rec["modes"].is_array())
            throw SchemaError(where + ": missing 'modes' array");
        for (const auto& m : rec["modes"])
        {
            if (!m.is_string())
                throw SchemaError(where + ": mode tags must be strings");
            l.modes.push_back(m.get<std::string>());
        }
        links.push_back(std::move(l));
    }

    auto net = RoadNetwork::build(std::move(nodes), std::move(links));
    if (geo)
        net.set_geo_origin(*geo);
    return net;
}

RoadNetwork load_network(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in)
        throw SchemaError("cannot open network file " + path.string());
    nlohmann::json j;
    try
    {
        in >> j;
    }
    catch (const nlohmann::json::exception& e)
    {
        throw SchemaError(path.string() + ": " + e.what());
    }
    return network_from_json(j);
}

nlohmann::json network_to_json(const RoadNetwork& net)
{
    nlohmann::json j;
    j["crs"] = "planar";
    j["nodes"] = nlohmann::json::array();
    for (const auto& n : net.nodes())
        j["nodes"].push_back({{"id", n.id}, {"x", n.x}, {"y", n.y}});
    j["links"] = nlohmann::json::array();
    for (const auto& l : net.links())
        j["links"].push_back({{"id", l.id},
                              {"from", l.from},
                              {"to", l.to},
                              {"length", l.length},
                              {"free_speed", l.free_speed},
                              {"storage_capacity", l.storage_capacity},
                              {"flow_capacity", l.flow_capacity},
                              {"modes", l.modes}});
    return j;
}

nlohmann::json to_geojson(const RoadNetwork& net)
{
    auto coord = [&](const Node& n) {
        if (!net.geo_origin())
            return nlohmann::json::array({n.x, n.y});
        const auto& g = *net.geo_origin();
        double lat = g.lat0 + n.y / earth_radius * 180.0 / pi;
        double lon = g.lon0 + n.x / (earth_radius * std::cos(g.lat0 * pi / 180.0)) * 180.0 / pi;
        return nlohmann::json::array({lon, lat});
    };

    nlohmann::json features = nlohmann::json::array();
    for (const auto& l : net.links())
    {
        features.push_back(
            {{"type", "Feature"},
             {"geometry",
              {{"type", "LineString"},
               {"coordinates", {coord(net.node(l.from_idx)), coord(net.node(l.to_idx))}}}},
             {"properties",
              {{"id", l.id},
               {"from", l.from},
               {"to", l.to},
               {"length", l.length},
               {"free_speed", l.free_speed},
               {"storage_capacity", l.storage_capacity},
               {"modes", l.modes}}}});
    }
    for (const auto& n : net.nodes())
    {
        features.push_back({{"type", "Feature"},
                            {"geometry", {{"type", "Point"}, {"coordinates", coord(n)}}},
                            {"properties", {{"id", n.id}, {"kind", "node"}}}});
    }
    return {{"type", "FeatureCollection"},
            {"crs", net.geo_origin() ? "wgs84" : "planar"},
            {"features", features}};
}

PathTree::PathTree(const RoadNetwork& net, NodeIdx source, const std::string& mode, double speed_cap)
    : net_(&net), source_(source), mode_(mode), cap_(speed_cap),
      time_(net.nodes().size(), std::numeric_limits<double>::infinity()),
      pred_(net.nodes().size(), npos)
{
    // Rank sequence of the current best path to n, source first.
    auto path_ranks = [&](NodeIdx n, std::vector<std::uint32_t>& out) {
        out.clear();
        while (n != source_)
        {
            LinkIdx l = pred_[n];
            out.push_back(net.link_rank(l));
            n = net.link(l).from_idx;
        }
        std::reverse(out.begin(), out.end());
    };

    using Item = std::pair<double, NodeIdx>;
    std::priority_queue<Item, std::vector<Item>, std::greater<>> heap;
    std::vector<char> settled(net.nodes().size(), 0);
    std::vector<std::uint32_t> a;
    std::vector<std::uint32_t> b;

    time_[source] = 0;
    heap.emplace(0.0, source);
    while (!heap.empty())
    {
        auto [t, u] = heap.top();
        heap.pop();
        if (settled[u])
            continue;
        settled[u] = 1;
        for (LinkIdx l : net.out_links(u))
        {
            const auto& lk = net.link(l);
            if (!lk.allows(mode))
                continue;
            NodeIdx v = lk.to_idx;
            if (settled[v] || v == source)
                continue;
            double cand = time_[u] + net.link_time(l, speed_cap);
            if (pred_[v] == npos || (cand < time_[v] && !times_tie(cand, time_[v])))
            {
                time_[v] = cand;
                pred_[v] = l;
                heap.emplace(cand, v);
            }
            else if (times_tie(cand, time_[v]))
            {
                path_ranks(v, a);
                path_ranks(u, b);
                b.push_back(net.link_rank(l));
                if (std::lexicographical_compare(b.begin(), b.end(), a.begin(), a.end()))
                {
                    pred_[v] = l;
                    if (cand < time_[v])
                    {
                        time_[v] = cand;
                        heap.emplace(cand, v);
                    }
                }
            }
        }
    }
}

Route PathTree::route_to(NodeIdx n) const
{
    if (!reachable(n))
        throw Unreachable("no '" + mode_ + "' path from '" + net_->node(source_).id + "' to '"
                          + net_->node(n).id + "'");
    Route r;
    r.origin = source_;
    r.destination = n;
    r.mode = mode_;
    for (NodeIdx at = n; at != source_; at = net_->link(pred_[at]).from_idx)
        r.links.push_back(pred_[at]);
    std::reverse(r.links.begin(), r.links.end());
    for (LinkIdx l : r.links)
    {
        r.expected_time += net_->link_time(l, cap_);
        r.distance += net_->link(l).length;
    }
    return r;
}

Route shortest_path(const RoadNetwork& net, NodeIdx from, NodeIdx to, const std::string& mode,
                    double speed_cap)
{
    if (from >= net.nodes().size() || to >= net.nodes().size())
        throw SchemaError("shortest_path: node index out of range");
    return PathTree(net, from, mode, speed_cap).route_to(to);
}

Route shortest_path(const RoadNetwork& net, const std::string& from, const std::string& to,
                    const std::string& mode, double speed_cap)
{
    return shortest_path(net, net.node_index(from), net.node_index(to), mode, speed_cap);
}

NodeIdx nearest_node(const RoadNetwork& net, double x, double y)
{
    if (net.empty())
        throw EmptyNetwork("nearest_node on an empty network");
    NodeIdx best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (NodeIdx i = 0; i != net.nodes().size(); ++i)
    {
        const auto& n = net.node(i);
        double d = (n.x - x) * (n.x - x) + (n.y - y) * (n.y - y);
        if (d < best_d || (d == best_d && n.id < net.node(best).id))
        {
            best = i;
            best_d = d;
        }
    }
    return best;
}

std::shared_ptr<const Route> Router::try_route(NodeIdx from, NodeIdx to, const std::string& mode,
                                               double speed_cap)
{
    RouteKey key{{from, mode, speed_cap}, to};
    auto it = routes_.find(key);
    if (it != routes_.end())
        return it->second;
    auto tree = trees_.find(key.tree);
    if (tree == trees_.end())
        tree = trees_.emplace(key.tree, PathTree(*net_, from, mode, speed_cap)).first;
    std::shared_ptr<const Route> r;
    if (tree->second.reachable(to))
        r = std::make_shared<const Route>(tree->second.route_to(to));
    routes_.emplace(std::move(key), r);
    return r;
}

std::shared_ptr<const Route> Router::route(NodeIdx from, NodeIdx to, const std::string& mode,
                                           double speed_cap)
{
    auto r = try_route(from, to, mode, speed_cap);
    if (!r)
        throw Unreachable("no '" + mode + "' path from '" + net_->node(from).id + "' to '"
                          + net_->node(to).id + "'");
    return r;
}

} // namespace tangram
