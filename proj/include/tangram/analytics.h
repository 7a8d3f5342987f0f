#pragma once

#include <tangram/adaptation.h>
#include <tangram/mobsim.h>
#include <tangram/scoring.h>

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

namespace tangram {

struct TrafficCell
{
    long entries = 0;
    long exits = 0;
    long present = 0;  // on the link at some point during the bin
};

struct ScoreSummary
{
    double mean = 0;
    double min = 0;
    double p10 = 0;
    double median = 0;
    double p90 = 0;
    double max = 0;
};

struct IterationStats
{
    long population = 0;
    double mean_travel_distance = 0;  // m
    double mean_travel_time = 0;      // s
    double mean_co2 = 0;              // g
    double mean_cost = 0;             // currency
    long subscribers = 0;
    long stuck = 0;
    long reservation_failures = 0;
    std::map<std::string, long> mode_split;  // executed segments per mode or service id
    std::map<std::string, double> resource_usage;
    double resource_usage_total = 0;  // all services pooled
    ScoreSummary scores;
    int time_bin = 900;
    std::map<std::pair<std::string, std::int64_t>, TrafficCell> traffic;  // (link id, bin start)
};

// days must already be priced. Throws EmptyLog for an empty population.
IterationStats collect_stats(const EventLog& log, const std::vector<PersonDay>& days,
                             const std::vector<double>& scores, const Smi& smi, const RoadNetwork& net,
                             const std::vector<ServiceUsageSummary>& usage, int time_bin = 900,
                             bool with_traffic = true);

struct MetricDelta
{
    double baseline = 0;
    double treated = 0;
    double absolute = 0;
    std::optional<double> percent;  // absent when the baseline is zero
};

struct ComparisonReport
{
    std::string label;
    IterationStats baseline;
    IterationStats treated;
    std::map<std::string, MetricDelta> deltas;
};

ComparisonReport compare(const IterationStats& baseline, const IterationStats& treated);

// scalar metrics by name, as used by compare
std::map<std::string, double> scalar_metrics(const IterationStats& s);

nlohmann::json stats_to_json(const IterationStats& s, bool with_traffic = false);
IterationStats stats_from_json(const nlohmann::json& j);
nlohmann::json comparison_to_json(const ComparisonReport& r);
nlohmann::json traffic_to_json(const IterationStats& s, std::optional<std::int64_t> bin);

void write_json(const std::filesystem::path& path, const nlohmann::json& j);
void write_traffic_csv(const std::filesystem::path& path, const IterationStats& s);

// Plain SVG bar chart; one bar per label.
std::string svg_bar_chart(const std::string& title, const std::string& unit,
                          const std::vector<std::string>& labels, const std::vector<double>& values);

// The six comparison figures for a baseline and its treated runs.
std::vector<std::filesystem::path> write_comparison_charts(const std::filesystem::path& dir,
                                                           const std::vector<ComparisonReport>& reports);

} // namespace tangram
