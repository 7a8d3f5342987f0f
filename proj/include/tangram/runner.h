#pragma once

#include <tangram/adaptation.h>
#include <tangram/analytics.h>
#include <tangram/demand.h>
#include <tangram/fleet.h>
#include <tangram/mind.h>
#include <tangram/mobsim.h>
#include <tangram/network.h>
#include <tangram/scoring.h>
#include <tangram/services.h>

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

namespace tangram {

enum class EventLogPolicy { none, final, all };

struct ExperimentConfig
{
    std::string name = "experiment";
    // Each input is either a file path or an inline JSON document.
    nlohmann::json network;
    nlohmann::json population;  // population file, or {"generator": spec}
    nlohmann::json smi;         // null for the pre-SMI baseline
    std::filesystem::path base_dir = ".";  // relative paths resolve here

    std::vector<PhaseConfig> phases{PhaseConfig::make(Phase::explorative, 60),
                                    PhaseConfig::make(Phase::exploitative, 49),
                                    PhaseConfig::make(Phase::policy_based, 1)};
    std::uint64_t seed = 1;
    ScoringParams scoring;
    MindParams mind;
    EnumerationOptions enumeration;
    EmissionFactors emissions = default_emission_factors();
    MobsimOptions mobsim;
    std::optional<double> storage_scale;  // defaults to the generator's sampling fraction
    SimClock clock;
    double replan_smoothing = 1.0;
    std::optional<double> daily_budget;  // overrides every commuter's budget

    std::filesystem::path output = "out";
    EventLogPolicy event_logs = EventLogPolicy::final;
    bool kb_snapshots = false;
    int checkpoint_every = 10;
    int time_bin = 900;

    int total_iterations() const;
};

// Throws ConfigError.
ExperimentConfig config_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = ".");
ExperimentConfig load_config(const std::filesystem::path& path);
nlohmann::json config_to_json(const ExperimentConfig& c);

// Inputs resolved from a config.
struct Scenario
{
    RoadNetwork net;
    Population pop;
    Smi smi;
    double sampling_fraction = 1.0;
};

Scenario load_scenario(const ExperimentConfig& c);

struct Progress
{
    Phase phase = Phase::explorative;
    int iteration = 0;        // 1-based, across phases
    int total = 0;
    int phase_iteration = 0;  // 1-based within the phase
};

struct IterationRecord
{
    int index = 0;  // 0-based
    Phase phase = Phase::explorative;
    long reservation_failed_events = 0;
    long denied_requests = 0;
    bool replanned = false;
    FleetAllocation allocation_before;  // configured at the start of the day
    FleetAllocation allocation_after;   // for the next day
    std::vector<long> fleet_end_of_day;  // per service, after settlement
    double mean_score = 0;
    long subscribers = 0;
    double wall_ms = 0;
};

struct RunResult
{
    std::filesystem::path output;
    IterationStats final_stats;
    std::vector<IterationRecord> iterations;  // only those run in this call
    nlohmann::json manifest;
    int resumed_from = 0;  // iterations restored from a checkpoint
};

using ProgressObserver = std::function<void(const Progress&)>;

// Runs every phase in order. Resumes from output/checkpoint.json when it
// matches the config.
RunResult run_experiment(const ExperimentConfig& c, const ProgressObserver& observer = {});
RunResult run_experiment(const ExperimentConfig& c, Scenario scenario, const ProgressObserver& observer = {});

// Runs the baseline and each SMI config, writing comparison.json and the
// charts under out_dir.
std::vector<ComparisonReport> run_comparison(const ExperimentConfig& baseline,
                                             const std::vector<ExperimentConfig>& smis,
                                             const std::filesystem::path& out_dir,
                                             const ProgressObserver& observer = {});

// splitmix64 mix of the seed with the given words
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0);

} // namespace tangram
