#include <tangram/errors.h>
#include <tangram/fleet.h>

#include <map>
#include <stdexcept>

namespace tangram {

FleetAllocation initial_allocation(const Smi& smi)
{
    FleetAllocation a;
    for (const auto& hub : smi.hubs)
        a.push_back(hub.initial_fleet);
    return a;
}

FleetLedger::FleetLedger(const Smi& smi, const FleetAllocation& allocation, bool unlimited)
    : unlimited_(unlimited), service_count_(smi.services.size())
{
    if (allocation.size() != smi.hubs.size())
        throw std::invalid_argument("allocation does not match the hub count");
    for (const auto& s : smi.services)
        types_.push_back(s.type);
    stock_.resize(smi.hubs.size(), std::vector<std::deque<int>>(service_count_));
    capacity_.resize(smi.hubs.size(), std::vector<int>(service_count_, 0));
    incoming_.resize(smi.hubs.size(), std::vector<int>(service_count_, 0));
    initial_total_.assign(service_count_, 0);
    used_.resize(service_count_);

    std::vector<int> next_vehicle(service_count_, 0);
    for (HubIdx h = 0; h != smi.hubs.size(); ++h)
    {
        if (allocation[h].size() != service_count_)
            throw std::invalid_argument("allocation row does not match the service count");
        for (ServiceIdx s = 0; s != service_count_; ++s)
        {
            capacity_[h][s] = smi.hubs[h].capacity[s];
            for (int k = 0; k != allocation[h][s]; ++k)
                stock_[h][s].push_back(next_vehicle[s]++);
            initial_total_[s] += allocation[h][s];
        }
    }
    for (ServiceIdx s = 0; s != service_count_; ++s)
        used_[s].assign(next_vehicle[s], 0);
}

int FleetLedger::available(HubIdx h, ServiceIdx s) const
{
    return static_cast<int>(stock_.at(h).at(s).size());
}

int FleetLedger::capacity(HubIdx h, ServiceIdx s) const
{
    return capacity_.at(h).at(s);
}

int FleetLedger::incoming(HubIdx h, ServiceIdx s) const
{
    return incoming_.at(h).at(s);
}

std::optional<ReserveFailure> FleetLedger::check(const TravelingAlternative& alt) const
{
    if (unlimited_)
        return std::nullopt;
    std::map<std::pair<HubIdx, ServiceIdx>, int> need;
    std::map<std::pair<HubIdx, ServiceIdx>, int> slots;
    for (const auto& seg : alt.segments)
    {
        if (!seg.service)
            continue;
        auto hub = seg.provider_hub();
        if (!hub)
            return ReserveFailure{ReserveError::no_vehicle, 0, *seg.service};
        auto key = std::make_pair(*hub, *seg.service);
        if (++need[key] > available(*hub, *seg.service))
            return ReserveFailure{ReserveError::no_vehicle, *hub, *seg.service};
        if (types_[*seg.service] == ServiceType::inter_hub)
        {
            auto dkey = std::make_pair(*seg.dest_hub, *seg.service);
            int occupied = available(*seg.dest_hub, *seg.service) + incoming(*seg.dest_hub, *seg.service);
            if (occupied + ++slots[dkey] > capacity(*seg.dest_hub, *seg.service))
                return ReserveFailure{ReserveError::no_destination_slot, *seg.dest_hub, *seg.service};
        }
    }
    return std::nullopt;
}

std::variant<std::vector<Reservation>, ReserveFailure> FleetLedger::try_reserve(const TravelingAlternative& alt,
                                                                                std::uint32_t commuter)
{
    if (auto failure = check(alt))
        return *failure;

    std::vector<Reservation> out;
    for (std::uint32_t i = 0; i != alt.segments.size(); ++i)
    {
        const auto& seg = alt.segments[i];
        if (!seg.service)
            continue;
        Reservation r;
        r.id = next_id_++;
        r.commuter = commuter;
        r.segment = i;
        r.service = *seg.service;
        r.origin_hub = *seg.provider_hub();
        if (types_[r.service] == ServiceType::inter_hub)
            r.dest_hub = seg.dest_hub;
        if (!unlimited_)
        {
            auto hold = std::make_tuple(commuter, i, r.origin_hub, r.service);
            if (!holds_.insert(hold).second)
                throw std::logic_error("commuter already holds a reservation for this segment");
            auto& stock = stock_[r.origin_hub][r.service];
            r.vehicle = stock.front();
            stock.pop_front();
            used_[r.service][r.vehicle] = 1;
            if (r.dest_hub)
                ++incoming_[*r.dest_hub][r.service];
        }
        active_.emplace(r.id, r);
        out.push_back(r);
    }
    return out;
}

std::vector<Reservation> FleetLedger::reserve(const TravelingAlternative& alt, std::uint32_t commuter)
{
    auto res = try_reserve(alt, commuter);
    if (auto* failure = std::get_if<ReserveFailure>(&res))
    {
        std::string where = "hub " + std::to_string(failure->hub) + " service " + std::to_string(failure->service);
        if (failure->error == ReserveError::no_vehicle)
            throw NoVehicle(where);
        throw NoDestinationSlot(where);
    }
    return std::get<std::vector<Reservation>>(std::move(res));
}

void FleetLedger::complete(ReservationId id)
{
    auto it = active_.find(id);
    if (it == active_.end())
        throw UnknownReservation("reservation " + std::to_string(id) + " is not active");
    const auto r = it->second;
    active_.erase(it);
    if (unlimited_)
        return;
    holds_.erase(std::make_tuple(r.commuter, r.segment, r.origin_hub, r.service));
    if (r.dest_hub)
    {
        --incoming_[*r.dest_hub][r.service];
        stock_[*r.dest_hub][r.service].push_front(r.vehicle);
    }
    else
        stock_[r.origin_hub][r.service].push_front(r.vehicle);
}

void FleetLedger::settle_all()
{
    while (!active_.empty())
        complete(active_.begin()->first);
}

long FleetLedger::total_vehicles(ServiceIdx s) const
{
    long total = 0;
    for (const auto& hub : stock_)
        total += static_cast<long>(hub[s].size());
    if (!unlimited_)
        for (const auto& [id, r] : active_)
            if (r.service == s)
                ++total;
    return total;
}

long FleetLedger::initial_total(ServiceIdx s) const
{
    return initial_total_.at(s);
}

int FleetLedger::vehicles_used(ServiceIdx s) const
{
    int n = 0;
    for (char u : used_.at(s))
        n += u;
    return n;
}

FleetAllocation FleetLedger::snapshot() const
{
    FleetAllocation a(stock_.size(), std::vector<int>(service_count_, 0));
    for (std::size_t h = 0; h != stock_.size(); ++h)
        for (std::size_t s = 0; s != service_count_; ++s)
            a[h][s] = static_cast<int>(stock_[h][s].size());
    return a;
}

} // namespace tangram
