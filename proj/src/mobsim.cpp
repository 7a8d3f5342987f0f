#include <tangram/errors.h>
#include <tangram/mobsim.h>

#include <algorithm>
#include <cmath>
#include <deque>
#include <fstream>
#include <queue>
#include <set>
#include <tuple>

#include <zlib.h>

namespace tangram {

const char* to_string(EventKind k)
{
    switch (k)
    {
    case EventKind::act_end: return "act_end";
    case EventKind::depart: return "depart";
    case EventKind::link_enter: return "link_enter";
    case EventKind::link_leave: return "link_leave";
    case EventKind::arrive: return "arrive";
    case EventKind::act_start: return "act_start";
    case EventKind::reservation_failed: return "reservation_failed";
    case EventKind::stuck: return "stuck";
    }
    return "?";
}

std::uint8_t EventLog::mode_index(const std::string& m)
{
    for (std::size_t i = 0; i != modes.size(); ++i)
        if (modes[i] == m)
            return static_cast<std::uint8_t>(i);
    modes.push_back(m);
    return static_cast<std::uint8_t>(modes.size() - 1);
}

int effective_storage(const Link& l, const MobsimOptions& opts)
{
    if (opts.storage_scale >= 1.0)
        return l.storage_capacity;
    return std::max(1, static_cast<int>(std::ceil(l.storage_capacity * opts.storage_scale - 1e-9)));
}

std::int64_t traversal_seconds(const Link& l, double speed)
{
    double t = l.length / std::min(l.free_speed, speed);
    return std::max<std::int64_t>(1, static_cast<std::int64_t>(std::ceil(t - 1e-9)));
}

double segment_speed(const Segment& s, const Commuter& c, const Smi& smi)
{
    if (s.service)
        return smi.services[*s.service].vehicle_speed;
    return personal_speed(c, s.mode);
}

void validate_plans(const std::vector<DayPlan>& plans, const Population& pop, const Smi& smi,
                    const RoadNetwork& net)
{
    std::set<std::uint32_t> seen;
    for (const auto& plan : plans)
    {
        if (plan.commuter >= pop.commuters.size())
            throw BrokenChain("plan references unknown commuter index " + std::to_string(plan.commuter));
        const auto& who = pop.commuters[plan.commuter].id;
        if (!seen.insert(plan.commuter).second)
            throw BrokenChain("two plans for commuter '" + who + "'");
        const auto& ag = pop.agendas[plan.commuter];
        if (plan.trips.size() != ag.legs.size())
            throw BrokenChain("plan of '" + who + "' does not cover every leg");

        for (std::size_t i = 0; i != plan.trips.size(); ++i)
        {
            const auto& leg = ag.legs[i];
            for (const auto* alt : {&plan.trips[i].chosen, &plan.trips[i].fallback})
            {
                if (alt->segments.empty() || alt->segments.size() > 3)
                    throw BrokenChain("plan of '" + who + "': trip " + std::to_string(i) + " has "
                                      + std::to_string(alt->segments.size()) + " segments");
                NodeIdx at = leg.origin;
                for (const auto& s : alt->segments)
                {
                    if (!s.route || s.from() != at || !net.is_valid_route(*s.route))
                        throw BrokenChain("plan of '" + who + "': trip " + std::to_string(i)
                                          + " does not chain with its leg");
                    at = s.to();
                    if (s.service)
                    {
                        auto hub = s.provider_hub();
                        if (*s.service >= smi.services.size() || !hub || *hub >= smi.hubs.size()
                            || !smi.hubs[*hub].offers(*s.service)
                            || (s.dest_hub && *s.dest_hub >= smi.hubs.size()))
                            throw DanglingReservation("plan of '" + who + "': trip " + std::to_string(i)
                                                      + " references a hub/service that does not exist");
                    }
                }
                if (at != leg.destination)
                    throw BrokenChain("plan of '" + who + "': trip " + std::to_string(i)
                                      + " does not end at the next activity");
            }
            if (plan.trips[i].fallback.uses_services())
                throw BrokenChain("plan of '" + who + "': fallback trip must not need vehicles");
        }
    }
}

namespace {

enum class AgentState { in_activity, travelling, done };

struct Agent
{
    std::uint32_t person = 0;
    const MobilityAgenda* agenda = nullptr;
    const Commuter* commuter = nullptr;
    const DayPlan* plan = nullptr;
    AgentState state = AgentState::in_activity;
    std::size_t activity = 0;
    std::size_t trip = 0;
    const TravelingAlternative* alt = nullptr;
    bool fallback = false;
    std::size_t seg = 0;
    bool on_link = false;
    std::size_t link_pos = 0;
    VehicleId vehicle = no_vehicle;
    double speed = 0;
    std::vector<Reservation> reservations;
};

struct Queued
{
    std::uint32_t agent;
    std::int64_t exit_time;
};

// (request time, vehicle id, agent)
using Candidate = std::tuple<std::int64_t, VehicleId, std::uint32_t>;

class Kernel
{
public:
    Kernel(const RoadNetwork& net, const Population& pop, const Smi& smi, const std::vector<DayPlan>& plans,
           FleetLedger& ledger, const SimClock& clock, const MobsimOptions& opts)
        : net_(net), smi_(smi), ledger_(ledger), clock_(clock), opts_(opts), queues_(net.links().size()),
          capacity_(net.links().size()), listed_(net.links().size(), 0), parked_(net.links().size()),
          next_exit_(net.links().size(), clock.start)
    {
        for (LinkIdx l = 0; l != net.links().size(); ++l)
            capacity_[l] = effective_storage(net.link(l), opts);

        std::vector<const DayPlan*> ordered;
        for (const auto& p : plans)
            ordered.push_back(&p);
        std::sort(ordered.begin(), ordered.end(),
                  [](const DayPlan* a, const DayPlan* b) { return a->commuter < b->commuter; });
        for (const auto* p : ordered)
        {
            Agent a;
            a.person = p->commuter;
            a.agenda = &pop.agendas[p->commuter];
            a.commuter = &pop.commuters[p->commuter];
            a.plan = p;
            agents_.push_back(a);
        }
        for (std::uint32_t i = 0; i != agents_.size(); ++i)
        {
            const auto& first = agents_[i].agenda->activities.front();
            if (first.end_time)
                act_ends_.emplace(std::max<std::int64_t>(clock.start, static_cast<std::int64_t>(std::ceil(*first.end_time))), i);
            else
                agents_[i].state = AgentState::done;
        }
    }

    EventLog run()
    {
        std::int64_t t = clock_.start;
        while (true)
        {
            auto next = next_time();
            if (!next || *next > clock_.end)
                break;
            t = std::max(t, *next);
            step(t);
        }
        for (std::uint32_t i = 0; i != agents_.size(); ++i)
        {
            auto& a = agents_[i];
            if (a.state != AgentState::travelling)
                continue;
            Event e = base(clock_.end, EventKind::stuck, a);
            e.vehicle = a.vehicle;
            const auto& route = *a.alt->segments[a.seg].route;
            if ((a.on_link || !opts_.queued_modes.count(a.alt->segments[a.seg].mode)) && a.link_pos < route.links.size())
                e.link = route.links[a.link_pos];
            e.leg = static_cast<std::uint16_t>(a.trip);
            e.index = static_cast<std::uint16_t>(a.seg);
            e.fallback = a.fallback;
            emit(e);
        }
        return std::move(log_);
    }

private:
    std::optional<std::int64_t> next_time() const
    {
        std::optional<std::int64_t> t;
        auto consider = [&](std::int64_t v) {
            if (!t || v < *t)
                t = v;
        };
        if (!act_ends_.empty())
            consider(act_ends_.begin()->first);
        if (!transitions_.empty())
            consider(std::get<0>(*transitions_.begin()));
        if (!wakes_.empty())
            consider(wakes_.top().first);
        if (!active_.empty())
            consider(std::get<0>(*active_.begin()));
        return t;
    }

    void step(std::int64_t t)
    {
        // 1. activity ends, person order
        while (!act_ends_.empty() && act_ends_.begin()->first <= t)
        {
            auto agent = act_ends_.begin()->second;
            act_ends_.erase(act_ends_.begin());
            start_trip(agent, t);
        }
        // 2. non-queued link transitions, vehicle order
        while (!transitions_.empty() && std::get<0>(*transitions_.begin()) <= t)
        {
            auto agent = std::get<2>(*transitions_.begin());
            transitions_.erase(transitions_.begin());
            advance_unqueued(agent, t);
        }
        // 3. queue heads and waiting departures, smallest (request, vehicle) first
        while (!wakes_.empty() && wakes_.top().first <= t)
        {
            LinkIdx l = wakes_.top().second;
            wakes_.pop();
            list_head(l, t);
        }
        while (!active_.empty())
        {
            auto cand = *active_.begin();
            active_.erase(active_.begin());
            try_move(cand, t);
        }
    }

    Event base(std::int64_t t, EventKind k, const Agent& a)
    {
        Event e;
        e.time = t;
        e.kind = k;
        e.person = a.person;
        return e;
    }

    Event travel_event(std::int64_t t, EventKind k, const Agent& a)
    {
        Event e = base(t, k, a);
        const auto& s = a.alt->segments[a.seg];
        e.vehicle = a.vehicle;
        e.leg = static_cast<std::uint16_t>(a.trip);
        e.index = static_cast<std::uint16_t>(a.seg);
        e.fallback = a.fallback;
        e.mode = log_.mode_index(s.mode);
        if (s.service)
        {
            e.service = *s.service;
            e.hub = *s.provider_hub();
        }
        return e;
    }

    void emit(const Event& e) { log_.events.push_back(e); }

    void start_trip(std::uint32_t idx, std::int64_t t)
    {
        auto& a = agents_[idx];
        Event end = base(t, EventKind::act_end, a);
        end.index = static_cast<std::uint16_t>(a.activity);
        emit(end);

        a.state = AgentState::travelling;
        a.trip = a.activity;
        const auto& planned = a.plan->trips[a.trip];
        a.alt = &planned.chosen;
        a.fallback = false;
        a.reservations.clear();
        if (planned.chosen.uses_services())
        {
            auto res = ledger_.try_reserve(planned.chosen, a.person);
            if (auto* failure = std::get_if<ReserveFailure>(&res))
            {
                Event e = base(t, EventKind::reservation_failed, a);
                e.leg = static_cast<std::uint16_t>(a.trip);
                e.hub = failure->hub;
                e.service = failure->service;
                emit(e);
                a.alt = &planned.fallback;
                a.fallback = true;
            }
            else
                a.reservations = std::get<std::vector<Reservation>>(std::move(res));
        }
        a.seg = 0;
        start_segment(idx, t);
    }

    void start_segment(std::uint32_t idx, std::int64_t t)
    {
        auto& a = agents_[idx];
        const auto& s = a.alt->segments[a.seg];
        a.vehicle = vehicle_id(a.person, static_cast<std::uint32_t>(a.trip), static_cast<std::uint32_t>(a.seg), a.fallback);
        a.speed = segment_speed(s, *a.commuter, smi_);
        a.on_link = false;
        a.link_pos = 0;
        emit(travel_event(t, EventKind::depart, a));

        const auto& links = s.route->links;
        if (links.empty())
        {
            arrive(idx, t);
            return;
        }
        if (opts_.queued_modes.count(s.mode))
        {
            active_.emplace(t, a.vehicle, idx);
            return;
        }
        Event enter = travel_event(t, EventKind::link_enter, a);
        enter.link = links[0];
        emit(enter);
        transitions_.emplace(t + traversal_seconds(net_.link(links[0]), a.speed), a.vehicle, idx);
    }

    void advance_unqueued(std::uint32_t idx, std::int64_t t)
    {
        auto& a = agents_[idx];
        const auto& links = a.alt->segments[a.seg].route->links;
        Event leave = travel_event(t, EventKind::link_leave, a);
        leave.link = links[a.link_pos];
        emit(leave);
        if (a.link_pos + 1 < links.size())
        {
            ++a.link_pos;
            Event enter = travel_event(t, EventKind::link_enter, a);
            enter.link = links[a.link_pos];
            emit(enter);
            transitions_.emplace(t + traversal_seconds(net_.link(links[a.link_pos]), a.speed), a.vehicle, idx);
        }
        else
            arrive(idx, t);
    }

    void arrive(std::uint32_t idx, std::int64_t t)
    {
        auto& a = agents_[idx];
        emit(travel_event(t, EventKind::arrive, a));
        for (auto it = a.reservations.begin(); it != a.reservations.end(); ++it)
            if (it->segment == a.seg)
            {
                ledger_.complete(it->id);
                a.reservations.erase(it);
                break;
            }
        a.on_link = false;
        ++a.seg;
        if (a.seg < a.alt->segments.size())
        {
            start_segment(idx, t);
            return;
        }
        // trip done
        ++a.activity;
        a.vehicle = no_vehicle;
        Event start = base(t, EventKind::act_start, a);
        start.index = static_cast<std::uint16_t>(a.activity);
        emit(start);
        const auto& act = a.agenda->activities[a.activity];
        if (act.end_time && a.activity + 1 < a.agenda->activities.size())
        {
            a.state = AgentState::in_activity;
            act_ends_.emplace(std::max<std::int64_t>(static_cast<std::int64_t>(std::ceil(*act.end_time)), t + 1), idx);
        }
        else
            a.state = AgentState::done;
    }

    bool has_space(LinkIdx l) const { return static_cast<int>(queues_[l].size()) < capacity_[l]; }

    void enter_link(std::uint32_t idx, LinkIdx l, std::int64_t t)
    {
        auto& a = agents_[idx];
        a.on_link = true;
        queues_[l].push_back({idx, t + traversal_seconds(net_.link(l), a.speed)});
        Event enter = travel_event(t, EventKind::link_enter, a);
        enter.link = l;
        emit(enter);
        if (queues_[l].size() == 1)
            wakes_.emplace(queues_[l].front().exit_time, l);
    }

    void leave_link(std::uint32_t idx, LinkIdx l, std::int64_t t)
    {
        auto& a = agents_[idx];
        queues_[l].pop_front();
        listed_[l] = 0;
        if (opts_.enforce_flow_capacity)
        {
            const auto& lk = net_.link(l);
            double per_hour = lk.flow_capacity * std::min(1.0, opts_.storage_scale);
            next_exit_[l] = t + std::max<std::int64_t>(1, static_cast<std::int64_t>(std::ceil(3600.0 / per_hour - 1e-9)));
        }
        Event leave = travel_event(t, EventKind::link_leave, a);
        leave.link = l;
        emit(leave);

        // space freed: parked requests for this link may move now
        for (const auto& c : parked_[l])
            active_.insert(c);
        parked_[l].clear();
        if (!queues_[l].empty())
        {
            if (queues_[l].front().exit_time <= t)
                list_head(l, t);
            else
                wakes_.emplace(queues_[l].front().exit_time, l);
        }
    }

    void list_head(LinkIdx l, std::int64_t t)
    {
        if (queues_[l].empty() || listed_[l])
            return;
        const auto& head = queues_[l].front();
        if (head.exit_time > t)
            return;
        if (opts_.enforce_flow_capacity && next_exit_[l] > t)
        {
            wakes_.emplace(next_exit_[l], l);
            return;
        }
        listed_[l] = 1;
        active_.emplace(head.exit_time, agents_[head.agent].vehicle, head.agent);
    }

    void try_move(const Candidate& cand, std::int64_t t)
    {
        auto idx = std::get<2>(cand);
        auto& a = agents_[idx];
        const auto& links = a.alt->segments[a.seg].route->links;
        if (!a.on_link)
        {
            LinkIdx first = links[0];
            if (!has_space(first))
            {
                parked_[first].push_back(cand);
                return;
            }
            a.link_pos = 0;
            enter_link(idx, first, t);
            return;
        }
        LinkIdx current = links[a.link_pos];
        if (a.link_pos + 1 == links.size())
        {
            leave_link(idx, current, t);
            arrive(idx, t);
            return;
        }
        LinkIdx next = links[a.link_pos + 1];
        if (!has_space(next))
        {
            parked_[next].push_back(cand);
            return;
        }
        leave_link(idx, current, t);
        ++a.link_pos;
        enter_link(idx, next, t);
    }

    const RoadNetwork& net_;
    const Smi& smi_;
    FleetLedger& ledger_;
    SimClock clock_;
    MobsimOptions opts_;

    std::vector<Agent> agents_;
    std::vector<std::deque<Queued>> queues_;
    std::vector<int> capacity_;
    std::vector<char> listed_;
    std::vector<std::vector<Candidate>> parked_;
    std::vector<std::int64_t> next_exit_;

    std::set<std::pair<std::int64_t, std::uint32_t>> act_ends_;
    std::set<Candidate> transitions_;
    std::set<Candidate> active_;
    std::priority_queue<std::pair<std::int64_t, LinkIdx>, std::vector<std::pair<std::int64_t, LinkIdx>>,
                        std::greater<>>
        wakes_;

    EventLog log_;
};

DayObserver& day_observer()
{
    static DayObserver observer;
    return observer;
}

} // namespace

EventLog simulate_day(const RoadNetwork& net, const Population& pop, const Smi& smi,
                      const std::vector<DayPlan>& plans, FleetLedger& ledger, const SimClock& clock,
                      const MobsimOptions& opts)
{
    validate_plans(plans, pop, smi, net);
    auto log = Kernel(net, pop, smi, plans, ledger, clock, opts).run();
    if (day_observer())
        day_observer()(log, net, opts);
    return log;
}

void set_day_observer(DayObserver observer)
{
    day_observer() = std::move(observer);
}

nlohmann::json event_to_json(const Event& e, const EventLog& log, const RoadNetwork& net, const Population& pop,
                             const Smi& smi)
{
    nlohmann::json j = {{"t", e.time}, {"kind", to_string(e.kind)}};
    if (e.person != npos)
        j["person"] = pop.commuters[e.person].id;
    if (e.vehicle != no_vehicle)
        j["vehicle"] = e.vehicle;
    if (e.link != npos)
        j["link"] = net.link(e.link).id;
    if (e.hub != npos)
        j["hub"] = smi.hubs[e.hub].id;
    if (e.service != npos)
        j["service"] = smi.services[e.service].id;
    switch (e.kind)
    {
    case EventKind::act_end:
    case EventKind::act_start:
        j["activity"] = e.index;
        break;
    case EventKind::reservation_failed:
        j["leg"] = e.leg;
        break;
    default:
        j["leg"] = e.leg;
        j["segment"] = e.index;
        if (e.mode < log.modes.size() && e.kind != EventKind::stuck)
            j["mode"] = log.modes[e.mode];
        if (e.fallback)
            j["fallback"] = true;
        break;
    }
    return j;
}

void write_event_log(const std::filesystem::path& path, const EventLog& log, const RoadNetwork& net,
                     const Population& pop, const Smi& smi)
{
    bool gz = path.extension() == ".gz";
    if (gz)
    {
        gzFile f = gzopen(path.string().c_str(), "wb");
        if (!f)
            throw std::runtime_error("cannot write " + path.string());
        for (const auto& e : log.events)
        {
            auto line = event_to_json(e, log, net, pop, smi).dump() + "\n";
            gzwrite(f, line.data(), static_cast<unsigned>(line.size()));
        }
        gzclose(f);
        return;
    }
    std::ofstream out(path);
    if (!out)
        throw std::runtime_error("cannot write " + path.string());
    for (const auto& e : log.events)
        out << event_to_json(e, log, net, pop, smi).dump() << "\n";
}

} // namespace tangram
