#include <tangram/errors.h>
#include <tangram/runner.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <queue>
#include <sstream>

namespace tangram {

int ExperimentConfig::total_iterations() const
{
    int n = 0;
    for (const auto& p : phases)
        n += p.iterations;
    return n;
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b)
{
    auto mix = [](std::uint64_t z) {
        z += 0x9e3779b97f4a7c15ULL;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    };
    return mix(mix(mix(seed) ^ a) ^ b);
}

namespace {

Phase phase_from_string(const std::string& s)
{
    if (s == "explorative")
        return Phase::explorative;
    if (s == "exploitative")
        return Phase::exploitative;
    if (s == "policy_based")
        return Phase::policy_based;
    throw ConfigError("unknown phase '" + s + "'");
}

EventLogPolicy event_policy_from_string(const std::string& s)
{
    if (s == "none")
        return EventLogPolicy::none;
    if (s == "final")
        return EventLogPolicy::final;
    if (s == "all")
        return EventLogPolicy::all;
    throw ConfigError("event_logs must be none, final or all");
}

const char* to_string(EventLogPolicy p)
{
    switch (p)
    {
    case EventLogPolicy::none: return "none";
    case EventLogPolicy::final: return "final";
    case EventLogPolicy::all: return "all";
    }
    return "?";
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::filesystem::path& p)
{
    return p.is_absolute() ? p : base / p;
}

nlohmann::json read_json_file(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in)
        throw ConfigError("cannot open " + path.string());
    try
    {
        return nlohmann::json::parse(in);
    }
    catch (const nlohmann::json::exception& e)
    {
        throw SchemaError(path.string() + ": " + e.what());
    }
}

// inline document, or the content of the file the string names
nlohmann::json input_document(const nlohmann::json& spec, const std::filesystem::path& base)
{
    if (spec.is_string())
        return read_json_file(resolve(base, spec.get<std::string>()));
    return spec;
}

void validate_phases(const std::vector<PhaseConfig>& phases)
{
    if (phases.empty())
        throw ConfigError("at least one phase is required");
    int last = -1;
    for (const auto& p : phases)
    {
        if (static_cast<int>(p.phase) <= last)
            throw ConfigError("phases must run explorative, exploitative, policy_based, each at most once");
        last = static_cast<int>(p.phase);
        if (p.iterations < 1)
            throw ConfigError(std::string(to_string(p.phase)) + " needs at least one iteration");
        if (!p.consistent())
            throw ConfigError(std::string(to_string(p.phase)) + " flags do not match the phase");
    }
}

} // namespace

ExperimentConfig config_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir)
{
    ExperimentConfig c;
    c.base_dir = base_dir;
    try
    {
        if (!j.is_object())
            throw ConfigError("experiment config must be a JSON object");
        c.name = j.value("name", c.name);
        if (!j.contains("network"))
            throw ConfigError("experiment config needs a network");
        c.network = j.at("network");
        if (!j.contains("population"))
            throw ConfigError("experiment config needs a population");
        c.population = j.at("population");
        c.smi = j.value("smi", nlohmann::json());
        c.seed = j.value("seed", c.seed);

        if (j.contains("phases"))
        {
            c.phases.clear();
            const auto& ph = j["phases"];
            if (ph.is_object())
            {
                for (auto p : {Phase::explorative, Phase::exploitative, Phase::policy_based})
                    if (ph.contains(to_string(p)) && ph[to_string(p)].get<int>() > 0)
                    {
                        auto cfg = PhaseConfig::make(p, 1);
                        cfg.iterations = ph[to_string(p)].get<int>();
                        c.phases.push_back(cfg);
                    }
            }
            else
                for (const auto& e : ph)
                {
                    auto cfg = PhaseConfig::make(phase_from_string(e.at("phase").get<std::string>()),
                                                 e.value("iterations", 1));
                    cfg.iterations = e.value("iterations", 1);
                    cfg.costs_enabled = e.value("costs_enabled", cfg.costs_enabled);
                    cfg.resources_limited = e.value("resources_limited", cfg.resources_limited);
                    cfg.hub_replanning = e.value("hub_replanning", cfg.hub_replanning);
                    c.phases.push_back(cfg);
                }
        }
        validate_phases(c.phases);

        if (j.contains("scoring"))
            c.scoring = scoring_params_from_json(j["scoring"]);
        if (j.contains("mind"))
        {
            const auto& m = j["mind"];
            c.mind.alpha = m.value("alpha", c.mind.alpha);
            c.mind.optimistic_init = m.value("optimistic_init", c.mind.optimistic_init);
            c.mind.beta_cost = m.value("beta_cost", c.mind.beta_cost);
            if (!(c.mind.alpha > 0 && c.mind.alpha <= 1) || c.mind.beta_cost < 0)
                throw ConfigError("mind: alpha must lie in (0, 1] and beta_cost must not be negative");
        }
        if (j.contains("enumeration"))
        {
            const auto& e = j["enumeration"];
            c.enumeration.hubs_per_endpoint = e.value("hubs_per_endpoint", c.enumeration.hubs_per_endpoint);
            c.enumeration.max_alternatives = e.value("max_alternatives", c.enumeration.max_alternatives);
            if (e.contains("max_access_distance") && !e["max_access_distance"].is_null())
                c.enumeration.max_access_distance = e["max_access_distance"].get<double>();
            if (e.contains("private_costs"))
            {
                c.enumeration.private_costs.clear();
                for (auto& [m, v] : e["private_costs"].items())
                    c.enumeration.private_costs[m] = ModeCost{v.value("cost_per_hour", 0.0),
                                                              v.value("cost_per_km", 0.0), v.value("fixed_cost", 0.0)};
            }
            if (c.enumeration.max_alternatives < 1)
                throw ConfigError("enumeration.max_alternatives must be at least 1");
        }
        if (j.contains("emissions"))
            for (auto& [m, v] : j["emissions"].items())
            {
                if (v.get<double>() < 0)
                    throw ConfigError("emission factor for '" + m + "' is negative");
                c.emissions[m] = v.get<double>();
            }
        if (j.contains("mobsim"))
        {
            const auto& m = j["mobsim"];
            if (m.contains("queued_modes"))
                c.mobsim.queued_modes = m["queued_modes"].get<std::set<std::string>>();
            c.mobsim.enforce_flow_capacity = m.value("enforce_flow_capacity", false);
            if (m.contains("storage_scale"))
                c.storage_scale = m["storage_scale"].get<double>();
            c.clock.start = m.value("start", c.clock.start);
            c.clock.end = m.value("end", c.clock.end);
            if (c.clock.end <= c.clock.start)
                throw ConfigError("mobsim: end must come after start");
        }
        c.replan_smoothing = j.value("replan_smoothing", c.replan_smoothing);
        if (j.contains("daily_budget") && !j["daily_budget"].is_null())
            c.daily_budget = j["daily_budget"].get<double>();
        if (j.contains("output"))
            c.output = resolve(base_dir, j["output"].get<std::string>());
        else
            c.output = resolve(base_dir, "out");
        if (j.contains("event_logs"))
            c.event_logs = event_policy_from_string(j["event_logs"].get<std::string>());
        c.kb_snapshots = j.value("kb_snapshots", c.kb_snapshots);
        c.checkpoint_every = j.value("checkpoint_every", c.checkpoint_every);
        c.time_bin = j.value("time_bin", c.time_bin);
        if (c.time_bin <= 0)
            throw ConfigError("time_bin must be positive");
    }
    catch (const nlohmann::json::exception& e)
    {
        throw ConfigError(std::string("experiment config: ") + e.what());
    }
    catch (const SchemaError& e)
    {
        throw ConfigError(e.what());
    }
    return c;
}

ExperimentConfig load_config(const std::filesystem::path& path)
{
    auto j = read_json_file(path);
    return config_from_json(j, path.parent_path().empty() ? std::filesystem::path(".") : path.parent_path());
}

nlohmann::json config_to_json(const ExperimentConfig& c)
{
    auto phases = nlohmann::json::array();
    for (const auto& p : c.phases)
        phases.push_back({{"phase", to_string(p.phase)}, {"iterations", p.iterations}});
    auto private_costs = nlohmann::json::object();
    for (const auto& [m, mc] : c.enumeration.private_costs)
        private_costs[m] = {{"cost_per_hour", mc.cost_per_hour},
                            {"cost_per_km", mc.cost_per_km},
                            {"fixed_cost", mc.fixed_cost}};
    nlohmann::json enumeration = {{"hubs_per_endpoint", c.enumeration.hubs_per_endpoint},
                                  {"max_alternatives", c.enumeration.max_alternatives},
                                  {"private_costs", private_costs}};
    enumeration["max_access_distance"] = std::isfinite(c.enumeration.max_access_distance)
                                             ? nlohmann::json(c.enumeration.max_access_distance)
                                             : nlohmann::json(nullptr);
    nlohmann::json mobsim = {{"queued_modes", c.mobsim.queued_modes},
                             {"enforce_flow_capacity", c.mobsim.enforce_flow_capacity},
                             {"start", c.clock.start},
                             {"end", c.clock.end}};
    if (c.storage_scale)
        mobsim["storage_scale"] = *c.storage_scale;
    nlohmann::json j = {{"name", c.name},
                        {"network", c.network},
                        {"population", c.population},
                        {"smi", c.smi},
                        {"phases", phases},
                        {"seed", c.seed},
                        {"scoring", scoring_params_to_json(c.scoring)},
                        {"mind",
                         {{"alpha", c.mind.alpha},
                          {"optimistic_init", c.mind.optimistic_init},
                          {"beta_cost", c.mind.beta_cost}}},
                        {"enumeration", enumeration},
                        {"emissions", c.emissions},
                        {"mobsim", mobsim},
                        {"replan_smoothing", c.replan_smoothing},
                        {"output", c.output.string()},
                        {"event_logs", to_string(c.event_logs)},
                        {"kb_snapshots", c.kb_snapshots},
                        {"checkpoint_every", c.checkpoint_every},
                        {"time_bin", c.time_bin}};
    j["daily_budget"] = c.daily_budget ? nlohmann::json(*c.daily_budget) : nlohmann::json(nullptr);
    return j;
}

Scenario load_scenario(const ExperimentConfig& c)
{
    Scenario s;
    s.net = network_from_json(input_document(c.network, c.base_dir));
    auto pop = input_document(c.population, c.base_dir);
    if (pop.is_object() && pop.contains("generator"))
    {
        auto spec = generator_spec_from_json(pop["generator"], s.net);
        std::uint64_t seed = pop["generator"].value("seed", derive_seed(c.seed, 0x706f70));
        s.pop = generate_population(spec, s.net, seed);
        s.sampling_fraction = spec.sampling_fraction;
    }
    else
        s.pop = population_from_json(pop, s.net);
    if (!c.smi.is_null())
        s.smi = smi_from_json(input_document(c.smi, c.base_dir), s.net);
    return s;
}

namespace {

struct LegPlan
{
    std::vector<SegmentKey> chosen_keys;
    std::vector<SegmentKey> fallback_keys;
};

// Per-leg options that do not depend on fleet state, computed once per run.
struct LegOptions
{
    double depart = 0;
    std::vector<TravelingAlternative> all;  // deduplicated, by expected time, uncapped
    std::vector<std::vector<SegmentKey>> keys;
    std::size_t walk = 0;  // index of walk-direct in all
};

class Experiment
{
public:
    Experiment(const ExperimentConfig& cfg, Scenario scenario, const ProgressObserver& observer)
        : cfg_(cfg), sc_(std::move(scenario)), observer_(observer), router_(sc_.net)
    {
        mobsim_ = cfg_.mobsim;
        mobsim_.storage_scale = cfg_.storage_scale.value_or(sc_.sampling_fraction);
        pricing_.private_costs = cfg_.enumeration.private_costs;
        pricing_.emissions = cfg_.emissions;
        for (const auto& svc : sc_.smi.services)
            if (svc.co2_per_km < 0)
                throw ConfigError("service '" + svc.id + "' has negative emissions");
        config_json_ = config_to_json(cfg_);
        config_json_.erase("output");
        config_json_.erase("checkpoint_every");
    }

    RunResult run()
    {
        namespace fs = std::filesystem;
        fs::create_directories(cfg_.output);
        write_json(cfg_.output / "config.json", config_to_json(cfg_));

        const int total = cfg_.total_iterations();
        const std::size_t n = sc_.pop.commuters.size();
        kbs_.resize(n);
        for (std::size_t i = 0; i != n; ++i)
            kbs_[i].owner = sc_.pop.commuters[i].id;
        allocation_ = initial_allocation(sc_.smi);

        RunResult result;
        result.output = cfg_.output;
        int start = restore();
        result.resumed_from = start;
        if (start >= total && fs::exists(cfg_.output / "stats.json"))
        {
            result.final_stats = stats_from_json(read_json_file(cfg_.output / "stats.json"));
            result.manifest = read_json_file(cfg_.output / "manifest.json");
            return result;
        }
        trim_series(start);
        prepare_legs();

        for (int it = start; it < total; ++it)
        {
            auto rec = iterate(it, result);
            result.iterations.push_back(std::move(rec));
            if (it + 1 == total || (cfg_.checkpoint_every > 0 && (it + 1) % cfg_.checkpoint_every == 0)
                || phase_ends(it))
                checkpoint(it + 1);
        }
        result.final_stats = final_stats_;
        result.manifest = write_manifest();
        checkpoint(total);
        return result;
    }

private:
    std::pair<PhaseConfig, int> phase_of(int it) const
    {
        int acc = 0;
        for (const auto& p : cfg_.phases)
        {
            if (it < acc + p.iterations)
            {
                auto cfg = p;
                // nothing to explore without hubs; the final policy iteration still prices personal modes
                if (sc_.smi.empty() && p.phase == Phase::explorative)
                    cfg = PhaseConfig::make(Phase::exploitative, p.iterations);
                return {cfg, it - acc};
            }
            acc += p.iterations;
        }
        throw std::logic_error("iteration beyond the configured phases");
    }

    bool phase_ends(int it) const
    {
        int acc = 0;
        for (const auto& p : cfg_.phases)
        {
            acc += p.iterations;
            if (it + 1 == acc)
                return true;
        }
        return false;
    }

    void prepare_legs()
    {
        if (!legs_.empty())
            return;
        auto opts = cfg_.enumeration;
        opts.max_alternatives = std::numeric_limits<std::size_t>::max();
        legs_.resize(sc_.pop.commuters.size());
        for (std::uint32_t c = 0; c != sc_.pop.commuters.size(); ++c)
        {
            const auto& ag = sc_.pop.agendas[c];
            for (std::size_t i = 0; i != ag.legs.size(); ++i)
            {
                LegOptions lo;
                lo.depart = ag.activities[i].end_time.value_or(double(cfg_.clock.start));
                lo.all = enumerate_alternatives(ag.legs[i].origin, ag.legs[i].destination, lo.depart, sc_.smi,
                                                nullptr, router_, sc_.pop.commuters[c], opts);
                auto walk = std::find_if(lo.all.begin(), lo.all.end(), [](const auto& a) { return a.is_walk_direct(); });
                if (walk == lo.all.end())
                    throw Unreachable("commuter '" + sc_.pop.commuters[c].id + "' cannot walk leg " + std::to_string(i));
                lo.walk = static_cast<std::size_t>(walk - lo.all.begin());
                for (const auto& a : lo.all)
                    lo.keys.push_back(segment_keys_of(a, lo.depart, sc_.net, sc_.smi));
                legs_[c].push_back(std::move(lo));
            }
        }
    }

    struct Planning
    {
        std::vector<DayPlan> plans;
        std::vector<std::vector<LegPlan>> legs;
        std::vector<std::vector<long>> denied;  // [hub][service]
        long denied_total = 0;
    };

    Planning plan_day(int it, const PhaseConfig& phase, const FleetLedger& ledger)
    {
        const std::size_t n = sc_.pop.commuters.size();
        Planning out;
        out.plans.resize(n);
        out.legs.resize(n);
        out.denied.assign(sc_.smi.hubs.size(), std::vector<long>(sc_.smi.services.size(), 0));

        std::vector<std::tuple<double, std::uint32_t, std::uint32_t>> order;
        for (std::uint32_t c = 0; c != n; ++c)
        {
            out.plans[c].commuter = c;
            out.plans[c].trips.resize(legs_[c].size());
            out.legs[c].resize(legs_[c].size());
            for (std::uint32_t i = 0; i != legs_[c].size(); ++i)
                order.emplace_back(legs_[c][i].depart, c, i);
        }
        std::sort(order.begin(), order.end());

        std::vector<std::mt19937_64> rngs;
        rngs.reserve(n);
        for (std::uint32_t c = 0; c != n; ++c)
            rngs.emplace_back(derive_seed(cfg_.seed, std::uint64_t(it) + 1, c));
        std::vector<double> spent(n, 0.0);

        FleetLedger scratch = ledger;
        const bool limited = phase.resources_limited && !scratch.unlimited();
        using Pending = std::pair<double, ReservationId>;
        std::priority_queue<Pending, std::vector<Pending>, std::greater<>> pending;

        std::vector<std::size_t> pick;
        std::vector<TravelingAlternative> candidates;
        std::vector<std::vector<SegmentKey>> keys;
        for (const auto& [depart, c, i] : order)
        {
            while (!pending.empty() && pending.top().first <= depart)
            {
                scratch.complete(pending.top().second);
                pending.pop();
            }
            const auto& lo = legs_[c][i];
            const auto& commuter = sc_.pop.commuters[c];
            double budget = cfg_.daily_budget.value_or(commuter.daily_budget) - spent[c];

            auto gather = [&](bool filter) {
                pick.clear();
                for (std::size_t k = 0; k != lo.all.size() && pick.size() < cfg_.enumeration.max_alternatives; ++k)
                    if (!filter || !lo.all[k].uses_services() || scratch.can_reserve(lo.all[k]))
                        pick.push_back(k);
                // walk-direct always stays on the list
                if (std::find(pick.begin(), pick.end(), lo.walk) == pick.end())
                    pick.back() = lo.walk;
                candidates.clear();
                keys.clear();
                for (auto k : pick)
                {
                    candidates.push_back(lo.all[k]);
                    keys.push_back(lo.keys[k]);
                }
            };

            std::size_t chosen_index;
            if (limited)
            {
                // the favourite ignoring availability shows latent demand
                gather(false);
                auto fav = pick[select_alternative(phase, candidates, keys, kbs_[c], budget, rngs[c], cfg_.mind)];
                if (auto failure = lo.all[fav].uses_services() ? scratch.check(lo.all[fav]) : std::nullopt)
                {
                    ++out.denied[failure->hub][failure->service];
                    ++out.denied_total;
                    gather(true);
                    chosen_index = pick[select_alternative(phase, candidates, keys, kbs_[c], budget, rngs[c], cfg_.mind)];
                }
                else
                    chosen_index = fav;
            }
            else
            {
                gather(false);
                chosen_index = pick[select_alternative(phase, candidates, keys, kbs_[c], budget, rngs[c], cfg_.mind)];
            }

            const auto& chosen = lo.all[chosen_index];
            if (limited && chosen.uses_services())
            {
                double t = depart;
                auto reservations = scratch.reserve(chosen, c);
                std::size_t r = 0;
                for (std::size_t s = 0; s != chosen.segments.size(); ++s)
                {
                    t += chosen.segments[s].expected_time;
                    if (r < reservations.size() && reservations[r].segment == s)
                        pending.emplace(t, reservations[r++].id);
                }
            }
            spent[c] += chosen.total_cost;
            out.plans[c].trips[i] = PlannedTrip{chosen, lo.all[lo.walk]};
            out.legs[c][i] = LegPlan{lo.keys[chosen_index], lo.keys[lo.walk]};
        }
        return out;
    }

    double reference_time(const Segment& planned)
    {
        if (planned.route->links.empty())
            return 0.0;
        auto car = router_.try_route(planned.from(), planned.to(), mode::car, personal_speed(Commuter{}, mode::car));
        return car ? car->expected_time : planned.route->expected_time;
    }

    IterationRecord iterate(int it, RunResult& result)
    {
        auto t0 = std::chrono::steady_clock::now();
        const int total = cfg_.total_iterations();
        auto [phase, phase_it] = phase_of(it);
        if (observer_)
            observer_(Progress{phase.phase, it + 1, total, phase_it + 1});

        if (phase.phase == Phase::exploitative && phase_it == 0)
            allocation_ = initial_allocation(sc_.smi);  // restored after exploration

        IterationRecord rec;
        rec.index = it;
        rec.phase = phase.phase;
        rec.allocation_before = allocation_;

        FleetLedger ledger(sc_.smi, allocation_, !phase.resources_limited);
        auto planning = plan_day(it, phase, ledger);
        rec.denied_requests = planning.denied_total;

        auto log = simulate_day(sc_.net, sc_.pop, sc_.smi, planning.plans, ledger, cfg_.clock, mobsim_);
        ledger.settle_all();
        for (const auto& e : log.events)
            rec.reservation_failed_events += e.kind == EventKind::reservation_failed;

        PricingOptions pricing = pricing_;
        pricing.charge_services = phase.costs_enabled;
        auto days = person_days(log, sc_.pop, sc_.net);
        std::vector<double> scores(days.size());
        for (std::size_t c = 0; c != days.size(); ++c)
        {
            price_day(days[c], sc_.smi, pricing);
            scores[c] = score_plan(days[c], sc_.pop.agendas[c], cfg_.scoring, cfg_.clock.end);
        }

        // feedback, learning and service usage
        const std::size_t S = sc_.smi.services.size(), H = sc_.smi.hubs.size();
        std::vector<ServiceUsageSummary> usage(S);
        std::vector<double> feedback_sum(S, 0.0);
        std::vector<long> feedback_n(S, 0);
        for (ServiceIdx s = 0; s != S; ++s)
        {
            usage[s].service = s;
            usage[s].departures.assign(H, 0);
            usage[s].failures.assign(H, 0);
            for (HubIdx h = 0; h != H; ++h)
                usage[s].failures[h] = planning.denied[h][s];
        }
        for (std::size_t c = 0; c != days.size(); ++c)
        {
            const auto& day = days[c];
            auto& kb = kbs_[c];
            for (const auto& f : day.failures)
            {
                ++usage[f.service].failures[f.hub];
                const auto& trip = planning.plans[c].trips[f.leg];
                for (std::size_t k = 0; k != trip.chosen.segments.size(); ++k)
                    if (trip.chosen.segments[k].service)
                        update_kb(kb, planning.legs[c][f.leg].chosen_keys[k], 0.0, cfg_.mind.alpha);
            }
            for (const auto& seg : day.segments)
            {
                const auto& trip = planning.plans[c].trips[seg.leg];
                const auto& alt = seg.fallback ? trip.fallback : trip.chosen;
                const auto& key = seg.fallback ? planning.legs[c][seg.leg].fallback_keys[seg.index]
                                               : planning.legs[c][seg.leg].chosen_keys[seg.index];
                double observed = 0.0;
                if (seg.completed())
                {
                    SegmentOutcome o;
                    o.key = key;
                    o.realized_time = double(seg.arrive - seg.depart);
                    o.realized_distance = seg.distance;
                    o.co2 = seg.co2;
                    o.cost = seg.cost;
                    o.comfort = cfg_.scoring.comfort_norm_of(seg.mode);
                    observed = segment_feedback(o, reference_time(alt.segments[seg.index]), cfg_.scoring.feedback);
                }
                update_kb(kb, key, observed, cfg_.mind.alpha);
                if (seg.service)
                {
                    ++usage[*seg.service].departures[*seg.hub];
                    feedback_sum[*seg.service] += observed;
                    ++feedback_n[*seg.service];
                }
            }
        }
        for (ServiceIdx s = 0; s != S; ++s)
        {
            usage[s].vehicles_used = ledger.unlimited() ? 0 : ledger.vehicles_used(s);
            usage[s].fleet_total = ledger.initial_total(s);
            usage[s].mean_feedback = feedback_n[s] ? feedback_sum[s] / double(feedback_n[s]) : 0.0;
        }

        auto end_of_day = ledger.unlimited() ? allocation_ : ledger.snapshot();
        rec.fleet_end_of_day.assign(S, 0);
        for (HubIdx h = 0; h != H; ++h)
            for (ServiceIdx s = 0; s != S; ++s)
                rec.fleet_end_of_day[s] += end_of_day[h][s];
        if (phase.hub_replanning && !sc_.smi.empty())
        {
            allocation_ = replan_hubs(usage, sc_.smi, end_of_day, phase, cfg_.replan_smoothing);
            rec.replanned = true;
        }
        rec.allocation_after = allocation_;

        const bool final = it + 1 == total;
        auto stats = collect_stats(log, days, scores, sc_.smi, sc_.net, usage, cfg_.time_bin, final);
        rec.mean_score = stats.scores.mean;
        rec.subscribers = stats.subscribers;
        write_outputs(it, phase, rec, stats, log, usage);
        if (final)
            final_stats_ = std::move(stats);

        rec.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
        log_timing(rec);
        (void)result;
        return rec;
    }

    static std::string iteration_tag(int it)
    {
        std::ostringstream o;
        o << "iter_" << std::setw(3) << std::setfill('0') << it;
        return o.str();
    }

    void write_outputs(int it, const PhaseConfig& phase, const IterationRecord& rec, const IterationStats& stats,
                       const EventLog& log, const std::vector<ServiceUsageSummary>& usage)
    {
        namespace fs = std::filesystem;
        const auto& out = cfg_.output;
        const bool final = it + 1 == cfg_.total_iterations();

        nlohmann::json line = {{"iteration", it},
                               {"phase", to_string(phase.phase)},
                               {"mean_score", stats.scores.mean},
                               {"subscribers", stats.subscribers},
                               {"mean_travel_distance", stats.mean_travel_distance},
                               {"mean_travel_time", stats.mean_travel_time},
                               {"mean_co2", stats.mean_co2},
                               {"mean_cost", stats.mean_cost},
                               {"resource_usage", stats.resource_usage_total},
                               {"reservation_failed", rec.reservation_failed_events},
                               {"denied_requests", rec.denied_requests},
                               {"stuck", stats.stuck}};
        {
            std::ofstream series(out / "iterations.jsonl", std::ios::app);
            series << line.dump() << "\n";
        }

        if (!sc_.smi.empty())
        {
            fs::create_directories(out / "adaptation");
            auto report = adaptation_report(usage, sc_.smi, rec.allocation_before, rec.allocation_after);
            write_json(out / "adaptation" / (iteration_tag(it) + ".json"),
                       {{"iteration", it}, {"phase", to_string(phase.phase)}, {"replanned", rec.replanned},
                        {"services", report}});
        }
        if (cfg_.kb_snapshots)
        {
            fs::create_directories(out / "kb");
            write_json(out / "kb" / (iteration_tag(it) + ".json"), kb_snapshot());
        }
        if (cfg_.event_logs == EventLogPolicy::all)
        {
            fs::create_directories(out / "events");
            write_event_log(out / "events" / (iteration_tag(it) + ".jsonl.gz"), log, sc_.net, sc_.pop, sc_.smi);
        }
        if (final)
        {
            if (cfg_.event_logs == EventLogPolicy::final)
                write_event_log(out / "events.jsonl.gz", log, sc_.net, sc_.pop, sc_.smi);
            write_json(out / "stats.json", stats_to_json(stats));
            write_traffic_csv(out / "traffic.csv", stats);
        }
    }

    nlohmann::json kb_snapshot() const
    {
        auto j = nlohmann::json::object();
        for (const auto& kb : kbs_)
            j[kb.owner] = kb_to_json(kb);
        return j;
    }

    void log_timing(const IterationRecord& rec) const
    {
        long rss_kb = 0;
        std::ifstream status("/proc/self/status");
        std::string line;
        while (std::getline(status, line))
            if (line.rfind("VmHWM:", 0) == 0)
                rss_kb = std::stol(line.substr(6));
        std::ofstream t(cfg_.output / "timings.jsonl", std::ios::app);
        t << nlohmann::json{{"iteration", rec.index}, {"wall_ms", rec.wall_ms}, {"peak_rss_kb", rss_kb}}.dump() << "\n";
    }

    nlohmann::json write_manifest() const
    {
        namespace fs = std::filesystem;
        std::vector<std::string> files;
        for (const auto& e : fs::recursive_directory_iterator(cfg_.output))
        {
            if (!e.is_regular_file())
                continue;
            auto rel = fs::relative(e.path(), cfg_.output).generic_string();
            if (rel == "manifest.json" || rel == "checkpoint.json" || rel == "timings.jsonl")
                continue;
            files.push_back(rel);
        }
        std::sort(files.begin(), files.end());
        nlohmann::json m = {{"name", cfg_.name},
                            {"seed", cfg_.seed},
                            {"iterations", cfg_.total_iterations()},
                            {"population", sc_.pop.commuters.size()},
                            {"hubs", sc_.smi.hubs.size()},
                            {"files", files}};
        write_json(cfg_.output / "manifest.json", m);
        return m;
    }

    void checkpoint(int completed) const
    {
        auto kbs = nlohmann::json::array();
        for (const auto& kb : kbs_)
            kbs.push_back(kb_to_json(kb));
        nlohmann::json j = {{"config", config_json_}, {"completed", completed}, {"allocation", allocation_},
                            {"kbs", kbs}};
        auto tmp = cfg_.output / "checkpoint.json.tmp";
        {
            std::ofstream out(tmp);
            out << j.dump();
        }
        std::filesystem::rename(tmp, cfg_.output / "checkpoint.json");
    }

    int restore()
    {
        auto path = cfg_.output / "checkpoint.json";
        if (!std::filesystem::exists(path))
        {
            std::filesystem::remove(cfg_.output / "iterations.jsonl");
            std::filesystem::remove(cfg_.output / "timings.jsonl");
            return 0;
        }
        auto j = read_json_file(path);
        if (j.value("config", nlohmann::json()) != config_json_)
        {
            std::cerr << "checkpoint in " << cfg_.output << " belongs to another config; starting over\n";
            std::filesystem::remove(cfg_.output / "iterations.jsonl");
            std::filesystem::remove(cfg_.output / "timings.jsonl");
            return 0;
        }
        allocation_ = j.at("allocation").get<FleetAllocation>();
        const auto& kbs = j.at("kbs");
        if (kbs.size() != kbs_.size())
            throw ConfigError("checkpoint population does not match the scenario");
        for (std::size_t i = 0; i != kbs_.size(); ++i)
            kbs_[i] = kb_from_json(kbs_[i].owner, kbs[i]);
        return j.at("completed").get<int>();
    }

    // drops series lines written after the checkpoint
    void trim_series(int keep) const
    {
        for (const char* name : {"iterations.jsonl", "timings.jsonl"})
        {
            auto path = cfg_.output / name;
            if (!std::filesystem::exists(path))
                continue;
            std::vector<std::string> lines;
            {
                std::ifstream in(path);
                std::string line;
                while (std::getline(in, line) && int(lines.size()) < keep)
                    lines.push_back(line);
            }
            std::ofstream out(path, std::ios::trunc);
            for (const auto& l : lines)
                out << l << "\n";
        }
    }

    const ExperimentConfig& cfg_;
    Scenario sc_;
    ProgressObserver observer_;
    Router router_;
    MobsimOptions mobsim_;
    PricingOptions pricing_;
    nlohmann::json config_json_;

    std::vector<KnowledgeBase> kbs_;
    FleetAllocation allocation_;
    std::vector<std::vector<LegOptions>> legs_;
    IterationStats final_stats_;
};

} // namespace

RunResult run_experiment(const ExperimentConfig& c, Scenario scenario, const ProgressObserver& observer)
{
    validate_phases(c.phases);
    return Experiment(c, std::move(scenario), observer).run();
}

RunResult run_experiment(const ExperimentConfig& c, const ProgressObserver& observer)
{
    return run_experiment(c, load_scenario(c), observer);
}

std::vector<ComparisonReport> run_comparison(const ExperimentConfig& baseline, const std::vector<ExperimentConfig>& smis,
                                             const std::filesystem::path& out_dir, const ProgressObserver& observer)
{
    std::vector<ComparisonReport> reports;
    if (smis.empty())
        return reports;
    std::filesystem::create_directories(out_dir);

    auto base_cfg = baseline;
    base_cfg.output = out_dir / baseline.name;
    auto base = run_experiment(base_cfg, observer);
    for (const auto& smi : smis)
    {
        auto cfg = smi;
        cfg.output = out_dir / smi.name;
        auto treated = run_experiment(cfg, observer);
        auto report = compare(base.final_stats, treated.final_stats);
        report.label = smi.name;
        reports.push_back(std::move(report));
    }
    auto all = nlohmann::json::array();
    for (const auto& r : reports)
        all.push_back(comparison_to_json(r));
    write_json(out_dir / "comparison.json", all);
    write_comparison_charts(out_dir / "charts", reports);
    return reports;
}

} // namespace tangram
