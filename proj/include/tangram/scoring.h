#pragma once

#include <tangram/mind.h>
#include <tangram/mobsim.h>
#include <tangram/services.h>

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

namespace tangram {

struct FeedbackWeights
{
    double time = 0.5;
    double cost = 0.2;
    double co2 = 0.2;
    double comfort = 0.1;
    double cost_ref = 10;     // currency
    double co2_ref = 1000;    // g
};

struct ScoringParams
{
    double beta_perf = 6;  // utility per hour
    std::map<std::string, double> beta_travel{{"car", -6}, {"bike", -4}, {"walk", -2}};
    double beta_travel_shared = -6;  // any segment on a hub service
    double beta_money = -1;
    std::map<std::string, double> comfort;       // utility offset per leg, default 0
    std::map<std::string, double> comfort_norm;  // feedback comfort in [0,1], default 1
    double stuck_penalty = 50;
    FeedbackWeights feedback;

    double travel_beta(const std::string& mode, bool shared) const;
    double comfort_of(const std::string& mode) const;
    double comfort_norm_of(const std::string& mode) const;
};

ScoringParams scoring_params_from_json(const nlohmann::json& j);
nlohmann::json scoring_params_to_json(const ScoringParams& p);

using EmissionFactors = std::map<std::string, double>;  // g/km per mode
EmissionFactors default_emission_factors();

// Throws UnknownMode.
double co2_of(const std::string& mode, double distance_m, const EmissionFactors& factors);

struct SegmentOutcome
{
    SegmentKey key;
    double realized_time = 0;      // s
    double realized_distance = 0;  // m
    double co2 = 0;                // g
    double cost = 0;
    double comfort = 1;            // normalized, [0,1]
};

double segment_feedback(const SegmentOutcome& outcome, double free_flow_time, const FeedbackWeights& w = {});

// beta_perf * t_typ * ln(t_dur / t0) with t0 = t_typ / e and t_dur floored at t0
double activity_utility(const ScoringParams& p, double typical_s, double duration_s);
double leg_utility(const ScoringParams& p, const std::string& mode, bool shared, double travel_s, double cost);

// One executed (or interrupted) segment of a commuter's day.
struct ExecutedSegment
{
    std::uint16_t leg = 0;
    std::uint16_t index = 0;
    bool fallback = false;
    std::string mode;
    std::optional<ServiceIdx> service;
    std::optional<HubIdx> hub;
    std::int64_t depart = 0;
    std::int64_t arrive = -1;  // -1 when stuck
    double distance = 0;       // lengths of links entered
    double cost = 0;
    double co2 = 0;

    bool completed() const { return arrive >= 0; }
    double duration(std::int64_t day_end) const { return double((completed() ? arrive : day_end) - depart); }
};

struct ExecutedActivity
{
    std::optional<std::int64_t> start;  // absent for the first activity
    std::optional<std::int64_t> end;
    bool reached = false;
};

struct ReservationFailure
{
    std::uint16_t leg = 0;
    HubIdx hub = 0;
    ServiceIdx service = 0;
    std::int64_t time = 0;
};

struct PersonDay
{
    std::uint32_t person = 0;
    std::vector<ExecutedActivity> activities;
    std::vector<ExecutedSegment> segments;
    std::vector<ReservationFailure> failures;
    bool stuck = false;
};

// Splits a day's log per person. Persons without a plan get an empty day.
std::vector<PersonDay> person_days(const EventLog& log, const Population& pop, const RoadNetwork& net);

struct PricingOptions
{
    bool charge_services = true;
    PrivateCosts private_costs = default_private_costs();
    EmissionFactors emissions = default_emission_factors();
};

// Fills cost and co2 of every executed segment.
void price_day(PersonDay& day, const Smi& smi, const PricingOptions& opts);

// Charypar-Nagel utility of one executed day. The first and last activity
// merge across midnight when they share a kind.
double score_plan(const PersonDay& day, const MobilityAgenda& agenda, const ScoringParams& p,
                  std::int64_t day_end);

} // namespace tangram
