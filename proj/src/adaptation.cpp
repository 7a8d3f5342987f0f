#include <tangram/adaptation.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace tangram {

std::vector<int> apportion(long total, const std::vector<double>& weights, const std::vector<int>& caps)
{
    const std::size_t n = weights.size();
    if (caps.size() != n)
        throw std::invalid_argument("apportion: one cap per weight expected");
    std::vector<int> out(n, 0);
    if (n == 0 || total <= 0)
        return out;
    long room = std::accumulate(caps.begin(), caps.end(), 0L);
    if (total > room)
        throw std::invalid_argument("apportion: total exceeds the combined capacity");

    double sum = std::accumulate(weights.begin(), weights.end(), 0.0);
    std::vector<double> w = weights;
    if (!(sum > 0))
    {
        w.assign(n, 1.0);
        sum = double(n);
    }

    std::vector<double> remainder(n);
    long given = 0;
    for (std::size_t i = 0; i != n; ++i)
    {
        double quota = double(total) * w[i] / sum;
        out[i] = static_cast<int>(std::floor(quota));
        remainder[i] = quota - out[i];
        given += out[i];
    }
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return remainder[a] > remainder[b]; });
    for (std::size_t k = 0; given < total; k = (k + 1) % n, ++given)
        ++out[order[k]];

    // capacity spill toward the highest-demand hubs with room
    std::vector<std::size_t> by_demand(n);
    std::iota(by_demand.begin(), by_demand.end(), 0);
    std::stable_sort(by_demand.begin(), by_demand.end(), [&](std::size_t a, std::size_t b) { return w[a] > w[b]; });
    long spill = 0;
    for (std::size_t i = 0; i != n; ++i)
        if (out[i] > caps[i])
        {
            spill += out[i] - caps[i];
            out[i] = caps[i];
        }
    for (std::size_t i : by_demand)
    {
        if (spill == 0)
            break;
        long take = std::min<long>(spill, caps[i] - out[i]);
        out[i] += static_cast<int>(take);
        spill -= take;
    }
    return out;
}

FleetAllocation replan_hubs(const std::vector<ServiceUsageSummary>& usage, const Smi& smi,
                            const FleetAllocation& current, const PhaseConfig& phase, double lambda)
{
    FleetAllocation next = current;
    if (!phase.hub_replanning)
        return next;
    for (const auto& u : usage)
    {
        const auto s = u.service;
        if (smi.services.at(s).type != ServiceType::inter_hub)
            continue;
        std::vector<HubIdx> hubs;
        for (HubIdx h = 0; h != smi.hubs.size(); ++h)
            if (smi.hubs[h].offers(s))
                hubs.push_back(h);
        std::vector<double> weights;
        std::vector<int> caps;
        long total = 0;
        for (HubIdx h : hubs)
        {
            long dep = h < u.departures.size() ? u.departures[h] : 0;
            long fail = h < u.failures.size() ? u.failures[h] : 0;
            weights.push_back(double(dep + fail) + lambda);
            caps.push_back(smi.hubs[h].capacity[s]);
            total += current.at(h).at(s);
        }
        auto alloc = apportion(total, weights, caps);
        for (std::size_t i = 0; i != hubs.size(); ++i)
            next[hubs[i]][s] = alloc[i];
    }
    return next;
}

ServiceHealth service_health(const ServiceUsageSummary& u)
{
    ServiceHealth h;
    h.usage_fraction = u.fleet_total > 0 ? double(u.vehicles_used) / double(u.fleet_total) : 0.0;
    long dep = std::accumulate(u.departures.begin(), u.departures.end(), 0L);
    long fail = std::accumulate(u.failures.begin(), u.failures.end(), 0L);
    h.failure_rate = dep + fail > 0 ? double(fail) / double(dep + fail) : 0.0;
    h.mean_feedback = u.mean_feedback;
    return h;
}

nlohmann::json adaptation_report(const std::vector<ServiceUsageSummary>& usage, const Smi& smi,
                                 const FleetAllocation& before, const FleetAllocation& after)
{
    auto out = nlohmann::json::object();
    for (const auto& u : usage)
    {
        auto health = service_health(u);
        auto b = nlohmann::json::object();
        auto a = nlohmann::json::object();
        for (HubIdx h = 0; h != smi.hubs.size(); ++h)
            if (smi.hubs[h].offers(u.service))
            {
                b[smi.hubs[h].id] = before[h][u.service];
                a[smi.hubs[h].id] = after[h][u.service];
            }
        out[smi.services[u.service].id] = {{"before", b},
                                           {"after", a},
                                           {"usage_fraction", health.usage_fraction},
                                           {"failure_rate", health.failure_rate},
                                           {"mean_feedback", health.mean_feedback}};
    }
    return out;
}

} // namespace tangram
