#pragma once

#include <tangram/network.h>

#include <cstdint>
#include <filesystem>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

namespace tangram {

enum class Gender { female, male };

struct Commuter
{
    std::string id;
    double age = 30;
    Gender gender = Gender::female;
    NodeIdx home = npos;
    double walk_speed = 1.4;  // m/s
    double bike_speed = 4.5;  // m/s
    bool owns_car = true;
    double daily_budget = std::numeric_limits<double>::infinity();
};

struct Activity
{
    std::string kind;  // "home", "work", or any other label
    NodeIdx location = npos;
    std::optional<double> end_time;  // seconds of day; absent for the last activity
    double typical_duration = 8 * 3600.0;
};

struct Leg
{
    std::optional<std::string> mode;  // preferred mode, informational
    NodeIdx origin = npos;
    NodeIdx destination = npos;
};

// activities[i] -- legs[i] --> activities[i+1]
struct MobilityAgenda
{
    std::string owner;
    std::vector<Activity> activities;
    std::vector<Leg> legs;
};

struct Population
{
    std::vector<Commuter> commuters;
    std::vector<MobilityAgenda> agendas;  // parallel to commuters
};

struct AreaSpec
{
    std::string name;
    NodeIdx centroid = npos;
    long population = 0;
    long jobs = 0;
};

struct StartBin
{
    double from = 0;  // s
    double to = 0;    // s
    double weight = 0;
};

struct GeneratorSpec
{
    std::vector<AreaSpec> areas;
    double sampling_fraction = 1.0;
    double home_radius = 800;  // m, also used for workplaces

    // demographics
    double female_share = 0.52;
    double age_mean = 40;
    double age_sd = 20.8;  // puts ~45% of the untruncated mass in [25, 50)
    double age_min = 16;
    double age_max = 90;
    double car_owner_min_age = 18;
    double walk_speed = 1.4;
    double bike_speed = 4.5;
    double senior_age = 65;
    double senior_speed_factor = 0.8;
    double daily_budget = std::numeric_limits<double>::infinity();

    // schedule
    std::vector<StartBin> start_histogram = default_start_histogram();
    double work_duration_mean = 6 * 3600.0;
    double work_duration_sd = 1.5 * 3600.0;
    double work_duration_min = 1 * 3600.0;
    double work_duration_max = 12 * 3600.0;

    // 05:00-13:00 support with 45% of the mass in 07:00-08:00
    static std::vector<StartBin> default_start_histogram();
};

// Throws BrokenChain describing the first violation.
void validate_agenda(const MobilityAgenda& agenda, const RoadNetwork& net);

Population generate_population(const GeneratorSpec& spec, const RoadNetwork& net,
                               std::uint64_t seed);

// Commuters whose home lies in area i, in generation order; count per area is
// population * sampling_fraction rounded half-up.
long sampled_count(const AreaSpec& area, double sampling_fraction);

GeneratorSpec generator_spec_from_json(const nlohmann::json& j, const RoadNetwork& net);

Population population_from_json(const nlohmann::json& j, const RoadNetwork& net);
Population load_population(const std::filesystem::path& path, const RoadNetwork& net);
nlohmann::json population_to_json(const Population& pop, const RoadNetwork& net);

// k-means over activity coordinates; returns the node nearest to each centroid.
std::vector<NodeIdx> suggest_hub_locations(const std::vector<MobilityAgenda>& agendas,
                                           std::size_t k, const RoadNetwork& net,
                                           std::uint64_t seed);

struct Point
{
    double x = 0;
    double y = 0;
};

struct KMeansResult
{
    std::vector<Point> centroids;
    std::vector<std::size_t> assignment;
    int iterations = 0;
};

// Lloyd's iterations with k-means++ seeding; stops when no centroid moves
// more than epsilon meters or after max_iterations.
KMeansResult kmeans(const std::vector<Point>& points, std::size_t k, std::uint64_t seed,
                    int max_iterations = 100, double epsilon = 1.0);

} // namespace tangram
