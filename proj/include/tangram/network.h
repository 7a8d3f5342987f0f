#pragma once

#include <cstdint>
#include <filesystem>
#include <limits>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

namespace tangram {

using NodeIdx = std::uint32_t;
using LinkIdx = std::uint32_t;
inline constexpr std::uint32_t npos = std::numeric_limits<std::uint32_t>::max();

// Mode tags used throughout the model. Services may introduce further tags
// (e.g. "scooter"); these are only the personal ones.
namespace mode {
inline const std::string car = "car";
inline const std::string bike = "bike";
inline const std::string walk = "walk";
} // namespace mode

struct Node
{
    std::string id;
    double x = 0;
    double y = 0;
};

struct Link
{
    std::string id;
    std::string from;
    std::string to;
    double length = 0;      // m
    double free_speed = 0;  // m/s
    int storage_capacity = 1;
    double flow_capacity = 0;  // veh/h, carried but not enforced by the mobsim
    std::vector<std::string> modes;  // sorted, unique

    NodeIdx from_idx = npos;
    NodeIdx to_idx = npos;

    bool allows(const std::string& m) const;
};

struct Route
{
    NodeIdx origin = npos;
    NodeIdx destination = npos;
    std::vector<LinkIdx> links;
    std::string mode;
    double expected_time = 0;  // s
    double distance = 0;       // m
};

struct GeoOrigin
{
    double lon0 = 0;
    double lat0 = 0;
};

class RoadNetwork
{
public:
    RoadNetwork() = default;

    // Validates and indexes the given records. Nodes outside the largest
    // weakly connected component are pruned along with their links; the
    // count is available through pruned_nodes().
    static RoadNetwork build(std::vector<Node> nodes, std::vector<Link> links);

    const std::vector<Node>& nodes() const { return nodes_; }
    const std::vector<Link>& links() const { return links_; }
    const Node& node(NodeIdx i) const { return nodes_[i]; }
    const Link& link(LinkIdx i) const { return links_[i]; }
    const std::vector<LinkIdx>& out_links(NodeIdx n) const { return out_[n]; }

    std::optional<NodeIdx> find_node(const std::string& id) const;
    std::optional<LinkIdx> find_link(const std::string& id) const;
    NodeIdx node_index(const std::string& id) const;  // throws SchemaError

    // Position of the link id in ascending id order; used for deterministic
    // lexicographic tie-breaks without string compares.
    std::uint32_t link_rank(LinkIdx l) const { return rank_[l]; }

    std::size_t pruned_nodes() const { return pruned_; }
    bool empty() const { return nodes_.empty(); }

    const std::optional<GeoOrigin>& geo_origin() const { return geo_; }
    void set_geo_origin(GeoOrigin g) { geo_ = g; }

    double euclidean(NodeIdx a, NodeIdx b) const;
    double link_time(LinkIdx l, double speed_cap) const;

    // Replays a route and checks chaining, distance and mode feasibility.
    bool is_valid_route(const Route& r) const;

private:
    std::vector<Node> nodes_;
    std::vector<Link> links_;
    std::vector<std::vector<LinkIdx>> out_;
    std::vector<std::uint32_t> rank_;
    std::unordered_map<std::string, NodeIdx> node_ids_;
    std::unordered_map<std::string, LinkIdx> link_ids_;
    std::size_t pruned_ = 0;
    std::optional<GeoOrigin> geo_;
};

RoadNetwork load_network(const std::filesystem::path& path);
RoadNetwork network_from_json(const nlohmann::json& j);
nlohmann::json network_to_json(const RoadNetwork& net);

// LineString features for the map layer. Coordinates are lon/lat when the
// network was loaded from geographic coordinates, planar meters otherwise.
nlohmann::json to_geojson(const RoadNetwork& net);

Route shortest_path(const RoadNetwork& net, NodeIdx from, NodeIdx to, const std::string& mode,
                    double speed_cap);
Route shortest_path(const RoadNetwork& net, const std::string& from, const std::string& to,
                    const std::string& mode, double speed_cap);

NodeIdx nearest_node(const RoadNetwork& net, double x, double y);

// One-to-all time-optimal tree with the same tie-break as shortest_path.
class PathTree
{
public:
    PathTree(const RoadNetwork& net, NodeIdx source, const std::string& mode, double speed_cap);

    bool reachable(NodeIdx n) const { return n == source_ || pred_[n] != npos; }
    Route route_to(NodeIdx n) const;  // throws Unreachable

private:
    const RoadNetwork* net_;
    NodeIdx source_;
    std::string mode_;
    double cap_;
    std::vector<double> time_;
    std::vector<LinkIdx> pred_;
};

// Memoizes trees per (source, mode, speed cap) and routes per query. Not
// thread-safe; one instance per simulation.
class Router
{
public:
    explicit Router(const RoadNetwork& net) : net_(&net) {}

    // throws Unreachable
    std::shared_ptr<const Route> route(NodeIdx from, NodeIdx to, const std::string& mode,
                                       double speed_cap);
    // nullptr when unreachable
    std::shared_ptr<const Route> try_route(NodeIdx from, NodeIdx to, const std::string& mode,
                                           double speed_cap);
    const RoadNetwork& network() const { return *net_; }

private:
    struct TreeKey
    {
        NodeIdx source;
        std::string mode;
        double cap;
        auto operator<=>(const TreeKey&) const = default;
    };
    struct RouteKey
    {
        TreeKey tree;
        NodeIdx target;
        auto operator<=>(const RouteKey&) const = default;
    };

    const RoadNetwork* net_;
    std::map<TreeKey, PathTree> trees_;
    std::map<RouteKey, std::shared_ptr<const Route>> routes_;
};

} // namespace tangram
