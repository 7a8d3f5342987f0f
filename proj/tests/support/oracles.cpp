#include "oracles.h"

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>
#include <sstream>

using namespace tangram;

namespace oracle {

namespace {

bool same_time(double a, double b)
{
    return std::abs(a - b) <= 1e-9 * std::max(1.0, std::max(std::abs(a), std::abs(b)));
}

std::string link_ids(const RoadNetwork& net, const std::vector<LinkIdx>& p)
{
    std::string s;
    for (auto l : p)
        s += net.link(l).id + '\x01';
    return s;
}

} // namespace

std::optional<Route> brute_force_route(const RoadNetwork& net, NodeIdx from, NodeIdx to, const std::string& mode,
                                       double speed_cap)
{
    Route best;
    best.origin = from;
    best.destination = to;
    best.mode = mode;
    if (from == to)
        return best;

    bool found = false;
    double best_time = 0;
    std::vector<std::string> best_ids;
    std::vector<LinkIdx> path;
    std::vector<char> visited(net.nodes().size(), 0);

    auto better = [&](double t, const std::vector<LinkIdx>& p) {
        if (!found)
            return true;
        if (same_time(t, best_time))
        {
            std::vector<std::string> ids;
            for (auto l : p)
                ids.push_back(net.link(l).id);
            return std::lexicographical_compare(ids.begin(), ids.end(), best_ids.begin(), best_ids.end());
        }
        return t < best_time;
    };

    auto dfs = [&](auto&& self, NodeIdx at, double t) -> void {
        if (at == to)
        {
            if (better(t, path))
            {
                found = true;
                best_time = t;
                best.links = path;
                best_ids.clear();
                for (auto l : path)
                    best_ids.push_back(net.link(l).id);
            }
            return;
        }
        visited[at] = 1;
        for (LinkIdx l : net.out_links(at))
        {
            const auto& lk = net.link(l);
            if (!lk.allows(mode) || visited[lk.to_idx])
                continue;
            path.push_back(l);
            self(self, lk.to_idx, t + lk.length / std::min(lk.free_speed, speed_cap));
            path.pop_back();
        }
        visited[at] = 0;
    };
    dfs(dfs, from, 0.0);
    if (!found)
        return std::nullopt;
    best.expected_time = best_time;
    for (auto l : best.links)
        best.distance += net.link(l).length;
    return best;
}

namespace {

struct Person
{
    std::uint32_t id = 0;
    const DayPlan* plan = nullptr;
    const MobilityAgenda* agenda = nullptr;
    const Commuter* who = nullptr;

    enum { resting, moving, finished } state = resting;
    std::int64_t due = 0;  // next activity end
    std::size_t activity = 0;
    std::size_t trip = 0;
    bool fallback = false;
    std::size_t seg = 0;
    std::size_t pos = 0;      // index of the current link in the route
    bool on_link = false;     // queued: inside a link queue
    bool waiting = false;     // queued: waiting to enter the first link
    std::int64_t asked = 0;   // queued: departure time while waiting
    std::int64_t next = 0;    // unqueued: time the current link is done
    std::vector<Reservation> held;

    const TravelingAlternative& alt() const
    {
        return fallback ? plan->trips[trip].fallback : plan->trips[trip].chosen;
    }
    const Segment& segment() const { return alt().segments[seg]; }
    VehicleId vehicle() const
    {
        return vehicle_id(id, std::uint32_t(trip), std::uint32_t(seg), fallback);
    }
};

struct Slot
{
    std::size_t person;
    std::int64_t leave_at;
};

class Interpreter
{
public:
    Interpreter(const RoadNetwork& net, const Population& pop, const Smi& smi, const std::vector<DayPlan>& plans,
                FleetLedger& ledger, const SimClock& clock, const MobsimOptions& opts)
        : net_(net), smi_(smi), ledger_(ledger), clock_(clock), opts_(opts), queue_(net.links().size()),
          gate_(net.links().size(), clock.start)
    {
        std::map<std::uint32_t, const DayPlan*> by_commuter;
        for (const auto& p : plans)
            by_commuter[p.commuter] = &p;
        for (auto [c, p] : by_commuter)
        {
            Person x;
            x.id = c;
            x.plan = p;
            x.agenda = &pop.agendas[c];
            x.who = &pop.commuters[c];
            const auto& first = x.agenda->activities.front();
            if (first.end_time)
                x.due = std::max<std::int64_t>(clock.start, std::int64_t(std::ceil(*first.end_time)));
            else
                x.state = Person::finished;
            people_.push_back(x);
        }
    }

    EventLog run()
    {
        for (std::int64_t t = clock_.start; t <= clock_.end; ++t)
        {
            if (t > clock_.start && idle())
            {
                auto n = upcoming(t);
                if (!n || *n > clock_.end)
                    break;
                t = *n;
            }
            second(t);
        }
        for (auto& p : people_)
        {
            if (p.state != Person::moving)
                continue;
            Event e = make(clock_.end, EventKind::stuck, p);
            e.vehicle = p.vehicle();
            const auto& links = p.segment().route->links;
            bool unqueued = !queued(p.segment());
            if ((p.on_link || unqueued) && p.pos < links.size())
                e.link = links[p.pos];
            e.leg = std::uint16_t(p.trip);
            e.index = std::uint16_t(p.seg);
            e.fallback = p.fallback;
            log_.events.push_back(e);
        }
        return log_;
    }

private:
    bool queued(const Segment& s) const { return opts_.queued_modes.count(s.mode) != 0; }
    int storage(LinkIdx l) const { return effective_storage(net_.link(l), opts_); }
    bool room(LinkIdx l) const { return int(queue_[l].size()) < storage(l); }

    // true when nothing can happen this second except timed events; used only
    // to skip empty stretches of the day
    bool idle() const
    {
        for (const auto& p : people_)
            if (p.state == Person::moving && queued(p.segment()))
                return false;
        return true;
    }

    std::optional<std::int64_t> upcoming(std::int64_t t) const
    {
        std::optional<std::int64_t> best;
        for (const auto& p : people_)
        {
            std::optional<std::int64_t> v;
            if (p.state == Person::resting)
                v = p.due;
            else if (p.state == Person::moving)
                v = p.next;
            if (v && (!best || *v < *best))
                best = std::max(*v, t);
        }
        return best;
    }

    Event make(std::int64_t t, EventKind k, const Person& p)
    {
        Event e;
        e.time = t;
        e.kind = k;
        e.person = p.id;
        return e;
    }

    Event travel(std::int64_t t, EventKind k, const Person& p, LinkIdx link = npos)
    {
        Event e = make(t, k, p);
        const auto& s = p.segment();
        e.vehicle = p.vehicle();
        e.leg = std::uint16_t(p.trip);
        e.index = std::uint16_t(p.seg);
        e.fallback = p.fallback;
        e.mode = log_.mode_index(s.mode);
        e.link = link;
        if (s.service)
        {
            e.service = *s.service;
            e.hub = *s.provider_hub();
        }
        return e;
    }

    void second(std::int64_t t)
    {
        for (auto& p : people_)
            if (p.state == Person::resting && p.due <= t)
                begin_trip(p, t);

        std::vector<std::size_t> due;
        for (std::size_t i = 0; i != people_.size(); ++i)
        {
            const auto& p = people_[i];
            if (p.state == Person::moving && !queued(p.segment()) && p.next <= t)
                due.push_back(i);
        }
        std::sort(due.begin(), due.end(), [&](std::size_t a, std::size_t b) {
            const auto& pa = people_[a];
            const auto& pb = people_[b];
            return std::tuple(pa.next, pa.vehicle(), a) < std::tuple(pb.next, pb.vehicle(), b);
        });
        for (auto i : due)
            walk_on(people_[i], t);

        while (queued_move(t))
        {
        }
    }

    void begin_trip(Person& p, std::int64_t t)
    {
        Event end = make(t, EventKind::act_end, p);
        end.index = std::uint16_t(p.activity);
        log_.events.push_back(end);
        p.state = Person::moving;
        p.trip = p.activity;
        p.fallback = false;
        p.held.clear();
        const auto& chosen = p.plan->trips[p.trip].chosen;
        if (chosen.uses_services())
        {
            auto r = ledger_.try_reserve(chosen, p.id);
            if (auto* f = std::get_if<ReserveFailure>(&r))
            {
                Event e = make(t, EventKind::reservation_failed, p);
                e.leg = std::uint16_t(p.trip);
                e.hub = f->hub;
                e.service = f->service;
                log_.events.push_back(e);
                p.fallback = true;
            }
            else
                p.held = std::get<std::vector<Reservation>>(r);
        }
        p.seg = 0;
        depart(p, t);
    }

    void depart(Person& p, std::int64_t t)
    {
        p.pos = 0;
        p.on_link = false;
        p.waiting = false;
        log_.events.push_back(travel(t, EventKind::depart, p));
        const auto& s = p.segment();
        if (s.route->links.empty())
            return finish_segment(p, t);
        if (queued(s))
        {
            p.waiting = true;
            p.asked = t;
            p.next = std::numeric_limits<std::int64_t>::max();
            return;
        }
        log_.events.push_back(travel(t, EventKind::link_enter, p, s.route->links[0]));
        p.next = t + traversal_seconds(net_.link(s.route->links[0]), segment_speed(s, *p.who, smi_));
    }

    void walk_on(Person& p, std::int64_t t)
    {
        const auto& s = p.segment();
        const auto& links = s.route->links;
        log_.events.push_back(travel(t, EventKind::link_leave, p, links[p.pos]));
        if (p.pos + 1 == links.size())
            return finish_segment(p, t);
        ++p.pos;
        log_.events.push_back(travel(t, EventKind::link_enter, p, links[p.pos]));
        p.next = t + traversal_seconds(net_.link(links[p.pos]), segment_speed(s, *p.who, smi_));
    }

    void finish_segment(Person& p, std::int64_t t)
    {
        log_.events.push_back(travel(t, EventKind::arrive, p));
        for (auto it = p.held.begin(); it != p.held.end(); ++it)
            if (it->segment == p.seg)
            {
                ledger_.complete(it->id);
                p.held.erase(it);
                break;
            }
        p.on_link = false;
        p.waiting = false;
        if (p.seg + 1 < p.alt().segments.size())
        {
            ++p.seg;
            return depart(p, t);
        }
        ++p.activity;
        Event start = make(t, EventKind::act_start, p);
        start.index = std::uint16_t(p.activity);
        log_.events.push_back(start);
        const auto& act = p.agenda->activities[p.activity];
        if (act.end_time && p.activity + 1 < p.agenda->activities.size())
        {
            p.state = Person::resting;
            p.due = std::max<std::int64_t>(std::int64_t(std::ceil(*act.end_time)), t + 1);
        }
        else
            p.state = Person::finished;
    }

    // Moves the queued vehicle with the smallest (request time, vehicle id)
    // among those that can move now. Returns false when none can.
    bool queued_move(std::int64_t t)
    {
        using Key = std::tuple<std::int64_t, VehicleId>;
        std::optional<Key> best;
        std::size_t who = 0;
        auto offer = [&](Key k, std::size_t i) {
            if (!best || k < *best)
            {
                best = k;
                who = i;
            }
        };
        for (std::size_t i = 0; i != people_.size(); ++i)
        {
            auto& p = people_[i];
            if (p.state != Person::moving || !queued(p.segment()) || !p.waiting)
                continue;
            if (room(p.segment().route->links[0]))
                offer({p.asked, p.vehicle()}, i);
        }
        for (LinkIdx l = 0; l != queue_.size(); ++l)
        {
            if (queue_[l].empty())
                continue;
            const auto& head = queue_[l].front();
            if (head.leave_at > t)
                continue;
            if (opts_.enforce_flow_capacity && gate_[l] > t)
                continue;
            const auto& p = people_[head.person];
            const auto& links = p.segment().route->links;
            if (p.pos + 1 < links.size() && !room(links[p.pos + 1]))
                continue;
            offer({head.leave_at, p.vehicle()}, head.person);
        }
        if (!best)
            return false;

        auto& p = people_[who];
        const auto& s = p.segment();
        const auto& links = s.route->links;
        double speed = segment_speed(s, *p.who, smi_);
        if (p.waiting)
        {
            p.waiting = false;
            p.on_link = true;
            p.pos = 0;
            queue_[links[0]].push_back({who, t + traversal_seconds(net_.link(links[0]), speed)});
            log_.events.push_back(travel(t, EventKind::link_enter, p, links[0]));
            return true;
        }
        LinkIdx here = links[p.pos];
        queue_[here].erase(queue_[here].begin());
        if (opts_.enforce_flow_capacity)
        {
            double per_hour = net_.link(here).flow_capacity * std::min(1.0, opts_.storage_scale);
            gate_[here] = t + std::max<std::int64_t>(1, std::int64_t(std::ceil(3600.0 / per_hour - 1e-9)));
        }
        log_.events.push_back(travel(t, EventKind::link_leave, p, here));
        if (p.pos + 1 == links.size())
        {
            finish_segment(p, t);
            return true;
        }
        ++p.pos;
        queue_[links[p.pos]].push_back({who, t + traversal_seconds(net_.link(links[p.pos]), speed)});
        log_.events.push_back(travel(t, EventKind::link_enter, p, links[p.pos]));
        return true;
    }

    const RoadNetwork& net_;
    const Smi& smi_;
    FleetLedger& ledger_;
    SimClock clock_;
    MobsimOptions opts_;
    std::vector<Person> people_;
    std::vector<std::vector<Slot>> queue_;
    std::vector<std::int64_t> gate_;
    EventLog log_;
};

} // namespace

EventLog reference_day(const RoadNetwork& net, const Population& pop, const Smi& smi,
                       const std::vector<DayPlan>& plans, FleetLedger& ledger, const SimClock& clock,
                       const MobsimOptions& opts)
{
    return Interpreter(net, pop, smi, plans, ledger, clock, opts).run();
}

std::string describe(const Event& e, const EventLog& log)
{
    std::ostringstream o;
    o << "t=" << e.time << " " << to_string(e.kind) << " person=" << e.person;
    if (e.vehicle != no_vehicle)
        o << " vehicle=" << e.vehicle;
    if (e.link != npos)
        o << " link=" << e.link;
    if (e.hub != npos)
        o << " hub=" << e.hub;
    if (e.service != npos)
        o << " service=" << e.service;
    o << " leg=" << e.leg << " index=" << e.index << (e.fallback ? " fallback" : "");
    if (e.mode < log.modes.size())
        o << " mode=" << log.modes[e.mode];
    return o.str();
}

std::vector<std::string> replay_violations(const EventLog& log, const RoadNetwork& net, const MobsimOptions& opts)
{
    std::vector<std::string> out;
    auto bad = [&](const Event& e, const std::string& what) { out.push_back(what + ": " + describe(e, log)); };

    std::vector<std::vector<VehicleId>> fifo(net.links().size());
    std::map<VehicleId, LinkIdx> unqueued_on;  // walkers, cyclists
    std::map<VehicleId, LinkIdx> last_link;
    std::map<VehicleId, int> open_trips;
    std::int64_t last_time = std::numeric_limits<std::int64_t>::min();

    for (const auto& e : log.events)
    {
        if (e.time < last_time)
            bad(e, "time goes backwards");
        last_time = e.time;
        bool q = e.mode < log.modes.size() && opts.queued_modes.count(log.modes[e.mode]);
        switch (e.kind)
        {
        case EventKind::depart:
            ++open_trips[e.vehicle];
            last_link.erase(e.vehicle);
            break;
        case EventKind::arrive:
            if (--open_trips[e.vehicle] != 0)
                bad(e, "arrive without depart");
            if (unqueued_on.count(e.vehicle))
                bad(e, "arrive while still on a link");
            for (const auto& f : fifo)
                if (std::find(f.begin(), f.end(), e.vehicle) != f.end())
                    bad(e, "arrive while still queued");
            break;
        case EventKind::link_enter:
        {
            if (open_trips[e.vehicle] != 1)
                bad(e, "enter outside a trip");
            auto prev = last_link.find(e.vehicle);
            if (prev != last_link.end() && net.link(prev->second).to_idx != net.link(e.link).from_idx)
                bad(e, "route jumps between unconnected links");
            last_link[e.vehicle] = e.link;
            if (q)
            {
                auto& f = fifo[e.link];
                f.push_back(e.vehicle);
                if (int(f.size()) > effective_storage(net.link(e.link), opts))
                    bad(e, "storage exceeded");
            }
            else
            {
                if (unqueued_on.count(e.vehicle))
                    bad(e, "enter while on another link");
                unqueued_on[e.vehicle] = e.link;
            }
            break;
        }
        case EventKind::link_leave:
            if (q)
            {
                auto& f = fifo[e.link];
                if (f.empty() || f.front() != e.vehicle)
                    bad(e, "leave out of FIFO order");
                else
                    f.erase(f.begin());
            }
            else
            {
                auto it = unqueued_on.find(e.vehicle);
                if (it == unqueued_on.end() || it->second != e.link)
                    bad(e, "leave without enter");
                else
                    unqueued_on.erase(it);
            }
            break;
        case EventKind::stuck:
        {
            if (open_trips[e.vehicle] != 1)
                bad(e, "stuck outside a trip");
            open_trips[e.vehicle] = 0;
            bool found = false;
            for (auto& f : fifo)
            {
                auto it = std::find(f.begin(), f.end(), e.vehicle);
                if (it != f.end())
                {
                    found = e.link != npos && &f == &fifo[e.link];
                    f.erase(it);
                    if (!found)
                        bad(e, "stuck on the wrong link");
                }
            }
            auto it = unqueued_on.find(e.vehicle);
            if (it != unqueued_on.end())
            {
                if (it->second != e.link)
                    bad(e, "stuck on the wrong link");
                unqueued_on.erase(it);
            }
            break;
        }
        default:
            break;
        }
    }
    for (LinkIdx l = 0; l != fifo.size(); ++l)
        if (!fifo[l].empty())
            out.push_back("link " + net.link(l).id + " keeps vehicles that never left nor got stuck");
    if (!unqueued_on.empty())
        out.push_back("non-queued vehicles left on links at day end");
    for (const auto& [v, n] : open_trips)
        if (n != 0)
            out.push_back("vehicle " + std::to_string(v) + " departed without arriving or getting stuck");
    return out;
}

namespace {

std::mutex tally_mu;
ReplayTally tally;

} // namespace

void watch_all_days()
{
    set_day_observer([](const EventLog& log, const RoadNetwork& net, const MobsimOptions& opts) {
        auto v = replay_violations(log, net, opts);
        std::lock_guard lock(tally_mu);
        ++tally.logs;
        tally.events += long(log.events.size());
        for (auto& s : v)
            if (tally.violations.size() < 50)
                tally.violations.push_back(std::move(s));
    });
}

ReplayTally replay_tally()
{
    std::lock_guard lock(tally_mu);
    return tally;
}

} // namespace oracle
