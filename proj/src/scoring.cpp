#include <tangram/errors.h>
#include <tangram/scoring.h>

#include <algorithm>
#include <cmath>

namespace tangram {

double ScoringParams::travel_beta(const std::string& mode, bool shared) const
{
    if (shared)
        return beta_travel_shared;
    auto it = beta_travel.find(mode);
    return it == beta_travel.end() ? beta_travel_shared : it->second;
}

double ScoringParams::comfort_of(const std::string& mode) const
{
    auto it = comfort.find(mode);
    return it == comfort.end() ? 0.0 : it->second;
}

double ScoringParams::comfort_norm_of(const std::string& mode) const
{
    auto it = comfort_norm.find(mode);
    return it == comfort_norm.end() ? 1.0 : it->second;
}

ScoringParams scoring_params_from_json(const nlohmann::json& j)
{
    ScoringParams p;
    try
    {
        p.beta_perf = j.value("beta_perf", p.beta_perf);
        if (j.contains("beta_travel"))
            for (auto& [k, v] : j["beta_travel"].items())
            {
                if (k == "shared")
                    p.beta_travel_shared = v.get<double>();
                else
                    p.beta_travel[k] = v.get<double>();
            }
        p.beta_money = j.value("beta_money", p.beta_money);
        if (j.contains("comfort"))
            p.comfort = j["comfort"].get<std::map<std::string, double>>();
        if (j.contains("comfort_norm"))
            p.comfort_norm = j["comfort_norm"].get<std::map<std::string, double>>();
        p.stuck_penalty = j.value("stuck_penalty", p.stuck_penalty);
        if (j.contains("feedback"))
        {
            const auto& f = j["feedback"];
            p.feedback.time = f.value("time", p.feedback.time);
            p.feedback.cost = f.value("cost", p.feedback.cost);
            p.feedback.co2 = f.value("co2", p.feedback.co2);
            p.feedback.comfort = f.value("comfort", p.feedback.comfort);
            p.feedback.cost_ref = f.value("cost_ref", p.feedback.cost_ref);
            p.feedback.co2_ref = f.value("co2_ref", p.feedback.co2_ref);
        }
    }
    catch (const nlohmann::json::exception& e)
    {
        throw SchemaError(std::string("scoring params: ") + e.what());
    }
    if (!(p.beta_perf > 0))
        throw SchemaError("scoring params: beta_perf must be positive");
    for (const auto& [m, b] : p.beta_travel)
        if (b > 0)
            throw SchemaError("scoring params: beta_travel." + m + " must not be positive");
    if (p.beta_travel_shared > 0)
        throw SchemaError("scoring params: beta_travel.shared must not be positive");
    const auto& f = p.feedback;
    if (std::abs(f.time + f.cost + f.co2 + f.comfort - 1.0) > 1e-9 || f.cost_ref <= 0 || f.co2_ref <= 0)
        throw SchemaError("scoring params: feedback weights must sum to 1 with positive references");
    return p;
}

nlohmann::json scoring_params_to_json(const ScoringParams& p)
{
    auto travel = nlohmann::json(p.beta_travel);
    travel["shared"] = p.beta_travel_shared;
    return {{"beta_perf", p.beta_perf},
            {"beta_travel", travel},
            {"beta_money", p.beta_money},
            {"comfort", p.comfort},
            {"comfort_norm", p.comfort_norm},
            {"stuck_penalty", p.stuck_penalty},
            {"feedback",
             {{"time", p.feedback.time},
              {"cost", p.feedback.cost},
              {"co2", p.feedback.co2},
              {"comfort", p.feedback.comfort},
              {"cost_ref", p.feedback.cost_ref},
              {"co2_ref", p.feedback.co2_ref}}}};
}

EmissionFactors default_emission_factors()
{
    return {{mode::car, 160.0}, {mode::bike, 0.0}, {mode::walk, 0.0}};
}

double co2_of(const std::string& mode, double distance_m, const EmissionFactors& factors)
{
    auto it = factors.find(mode);
    if (it == factors.end())
        throw UnknownMode("no emission factor for mode '" + mode + "'");
    return it->second * distance_m / 1000.0;
}

double segment_feedback(const SegmentOutcome& o, double free_flow_time, const FeedbackWeights& w)
{
    double speed = o.realized_time > 0 ? std::min(1.0, free_flow_time / o.realized_time) : 1.0;
    double s = w.time * speed + w.cost * std::exp(-o.cost / w.cost_ref) + w.co2 * std::exp(-o.co2 / w.co2_ref)
               + w.comfort * o.comfort;
    if (!std::isfinite(s))
        return 0.0;
    return std::clamp(s, 0.0, 1.0);
}

double activity_utility(const ScoringParams& p, double typical_s, double duration_s)
{
    if (typical_s <= 0)
        return 0.0;
    double t0 = typical_s * std::exp(-1.0);
    double d = std::max(duration_s, t0);
    return p.beta_perf * (typical_s / 3600.0) * std::log(d / t0);
}

double leg_utility(const ScoringParams& p, const std::string& mode, bool shared, double travel_s, double cost)
{
    return p.travel_beta(mode, shared) * (travel_s / 3600.0) + p.beta_money * cost + p.comfort_of(mode);
}

std::vector<PersonDay> person_days(const EventLog& log, const Population& pop, const RoadNetwork& net)
{
    std::vector<PersonDay> days(pop.commuters.size());
    for (std::uint32_t i = 0; i != days.size(); ++i)
    {
        days[i].person = i;
        days[i].activities.resize(pop.agendas[i].activities.size());
        if (!days[i].activities.empty())
            days[i].activities[0].reached = true;
    }
    for (const auto& e : log.events)
    {
        if (e.person >= days.size())
            continue;
        auto& d = days[e.person];
        switch (e.kind)
        {
        case EventKind::act_end:
            d.activities.at(e.index).end = e.time;
            break;
        case EventKind::act_start:
            d.activities.at(e.index).start = e.time;
            d.activities.at(e.index).reached = true;
            break;
        case EventKind::depart:
        {
            ExecutedSegment s;
            s.leg = e.leg;
            s.index = e.index;
            s.fallback = e.fallback;
            s.mode = log.modes.at(e.mode);
            if (e.service != npos)
            {
                s.service = e.service;
                s.hub = e.hub;
            }
            s.depart = e.time;
            d.segments.push_back(std::move(s));
            break;
        }
        case EventKind::link_enter:
            if (!d.segments.empty())
                d.segments.back().distance += net.link(e.link).length;
            break;
        case EventKind::arrive:
            if (!d.segments.empty())
                d.segments.back().arrive = e.time;
            break;
        case EventKind::reservation_failed:
            d.failures.push_back({e.leg, e.hub, e.service, e.time});
            break;
        case EventKind::stuck:
            d.stuck = true;
            break;
        case EventKind::link_leave:
            break;
        }
    }
    return days;
}

void price_day(PersonDay& day, const Smi& smi, const PricingOptions& opts)
{
    for (auto& s : day.segments)
    {
        // stuck segments are priced up to where the traveller got
        double duration = s.completed() ? double(s.arrive - s.depart) : 0.0;
        if (s.service)
        {
            const auto& svc = smi.services.at(*s.service);
            s.cost = opts.charge_services ? cost_of(svc, duration, s.distance) : 0.0;
            s.co2 = svc.co2_per_km * s.distance / 1000.0;
        }
        else
        {
            s.cost = private_cost_of(opts.private_costs, s.mode, duration, s.distance);
            s.co2 = co2_of(s.mode, s.distance, opts.emissions);
        }
    }
}

double score_plan(const PersonDay& day, const MobilityAgenda& agenda, const ScoringParams& p, std::int64_t day_end)
{
    constexpr double day_s = 24 * 3600.0;
    const auto& acts = day.activities;
    const std::size_t n = acts.size();
    double score = 0;

    if (n != 0)
    {
        bool wrap = n >= 2 && agenda.activities.front().kind == agenda.activities.back().kind && acts.back().reached;
        double first_end = acts[0].end ? double(*acts[0].end) : day_s;
        if (wrap)
            score += activity_utility(p, agenda.activities[0].typical_duration,
                                      first_end + day_s - double(*acts.back().start));
        else
        {
            score += activity_utility(p, agenda.activities[0].typical_duration, first_end);
            if (n >= 2 && acts.back().reached)
                score += activity_utility(p, agenda.activities.back().typical_duration,
                                          day_s - double(*acts.back().start));
        }
        for (std::size_t i = 1; i + 1 < n; ++i)
        {
            if (!acts[i].reached)
                continue;
            double end = acts[i].end ? double(*acts[i].end) : double(day_end);
            score += activity_utility(p, agenda.activities[i].typical_duration, end - double(*acts[i].start));
        }
    }
    for (const auto& s : day.segments)
        score += leg_utility(p, s.mode, s.service.has_value(), s.duration(day_end), s.cost);
    if (day.stuck)
        score -= p.stuck_penalty;
    return score;
}

} // namespace tangram
