#include <tangram/errors.h>
#include <tangram/mind.h>

#include <algorithm>
#include <cmath>
#include <limits>

namespace tangram {

const char* to_string(TimeBand b)
{
    switch (b)
    {
    case TimeBand::am_peak: return "am_peak";
    case TimeBand::midday: return "midday";
    case TimeBand::pm_peak: return "pm_peak";
    case TimeBand::off: return "off";
    }
    return "?";
}

TimeBand time_band(double seconds_of_day)
{
    double h = std::fmod(seconds_of_day, 24 * 3600.0) / 3600.0;
    if (h < 0)
        h += 24;
    if (h >= 6 && h < 10)
        return TimeBand::am_peak;
    if (h >= 10 && h < 15)
        return TimeBand::midday;
    if (h >= 15 && h < 20)
        return TimeBand::pm_peak;
    return TimeBand::off;
}

std::string SegmentKey::str() const
{
    return what + "|" + from + "|" + to + "|" + to_string(band);
}

std::vector<SegmentKey> segment_keys_of(const TravelingAlternative& alt, double depart, const RoadNetwork& net,
                                        const Smi& smi)
{
    auto band = time_band(depart);
    std::vector<SegmentKey> keys;
    keys.reserve(alt.segments.size());
    for (const auto& s : alt.segments)
    {
        SegmentKey k;
        k.what = s.service ? smi.services[*s.service].id : s.mode;
        k.from = s.origin_hub ? "hub:" + smi.hubs[*s.origin_hub].id : "node:" + net.node(s.from()).id;
        k.to = s.dest_hub ? "hub:" + smi.hubs[*s.dest_hub].id : "node:" + net.node(s.to()).id;
        k.band = band;
        keys.push_back(std::move(k));
    }
    return keys;
}

const KbEntry* KnowledgeBase::find(const SegmentKey& k) const
{
    auto it = entries.find(k);
    return it == entries.end() ? nullptr : &it->second;
}

long KnowledgeBase::tries(const std::vector<SegmentKey>& keys) const
{
    long n = 0;
    for (const auto& k : keys)
        if (const auto* e = find(k))
            n += e->n;
    return n;
}

const char* to_string(Phase p)
{
    switch (p)
    {
    case Phase::explorative: return "explorative";
    case Phase::exploitative: return "exploitative";
    case Phase::policy_based: return "policy_based";
    }
    return "?";
}

PhaseConfig PhaseConfig::make(Phase p, int iterations)
{
    PhaseConfig c;
    c.phase = p;
    c.iterations = iterations;
    switch (p)
    {
    case Phase::explorative:
        c.costs_enabled = false;
        c.resources_limited = false;
        c.hub_replanning = false;
        break;
    case Phase::exploitative:
        c.costs_enabled = false;
        c.resources_limited = true;
        c.hub_replanning = true;
        break;
    case Phase::policy_based:
        c.costs_enabled = true;
        c.resources_limited = true;
        c.hub_replanning = true;
        c.iterations = 1;
        break;
    }
    return c;
}

bool PhaseConfig::consistent() const
{
    auto ref = make(phase, iterations);
    return iterations >= 1 && costs_enabled == ref.costs_enabled && resources_limited == ref.resources_limited
           && hub_replanning == ref.hub_replanning && (phase != Phase::policy_based || iterations == 1);
}

double evaluate_alternative(const KnowledgeBase& kb, const std::vector<SegmentKey>& keys, double optimistic_init)
{
    double score = 0;
    for (const auto& k : keys)
    {
        const auto* e = kb.find(k);
        score += e ? e->q : optimistic_init;
    }
    return score;
}

void update_kb(KnowledgeBase& kb, const SegmentKey& key, double observed, double alpha)
{
    auto [it, fresh] = kb.entries.try_emplace(key);
    auto& e = it->second;
    if (fresh || e.n == 0)
        e.q = observed;
    else
        e.q += alpha * (observed - e.q);
    ++e.n;
}

namespace {

// argmax of value with ties broken by lowest expected time, then by keys
std::size_t best_of(const std::vector<std::size_t>& candidates, const std::vector<double>& value,
                    const std::vector<TravelingAlternative>& alts, const std::vector<std::vector<SegmentKey>>& keys)
{
    std::size_t best = candidates.front();
    for (std::size_t i : candidates)
    {
        if (i == best)
            continue;
        if (value[i] != value[best])
        {
            if (value[i] > value[best])
                best = i;
            continue;
        }
        if (alts[i].total_time != alts[best].total_time)
        {
            if (alts[i].total_time < alts[best].total_time)
                best = i;
            continue;
        }
        if (keys[i] < keys[best])
            best = i;
    }
    return best;
}

} // namespace

std::size_t select_alternative(const PhaseConfig& phase, const std::vector<TravelingAlternative>& alts,
                               const std::vector<std::vector<SegmentKey>>& keys, const KnowledgeBase& kb,
                               double budget_remaining, std::mt19937_64& rng, const MindParams& params)
{
    if (alts.empty())
        throw std::invalid_argument("select_alternative needs at least one alternative");
    if (keys.size() != alts.size())
        throw std::invalid_argument("one key list per alternative expected");

    std::vector<std::size_t> all(alts.size());
    for (std::size_t i = 0; i != alts.size(); ++i)
        all[i] = i;

    if (phase.phase == Phase::explorative)
    {
        long fewest = std::numeric_limits<long>::max();
        std::vector<std::size_t> tied;
        for (std::size_t i : all)
        {
            long n = kb.tries(keys[i]);
            if (n < fewest)
            {
                fewest = n;
                tied.clear();
            }
            if (n == fewest)
                tied.push_back(i);
        }
        std::uniform_int_distribution<std::size_t> pick(0, tied.size() - 1);
        return tied[pick(rng)];
    }

    std::vector<double> value(alts.size());
    for (std::size_t i : all)
        value[i] = evaluate_alternative(kb, keys[i], params.optimistic_init);

    if (phase.phase == Phase::exploitative || !phase.costs_enabled)
        return best_of(all, value, alts, keys);

    std::vector<std::size_t> affordable;
    for (std::size_t i : all)
        if (alts[i].total_cost <= budget_remaining)
            affordable.push_back(i);
    if (affordable.empty())
    {
        // budget exhausted: zero-cost walk fallback, else the cheapest option
        for (std::size_t i : all)
            if (alts[i].is_walk_direct())
                return i;
        return *std::min_element(all.begin(), all.end(),
                                 [&](std::size_t a, std::size_t b) { return alts[a].total_cost < alts[b].total_cost; });
    }
    for (std::size_t i : affordable)
        value[i] -= params.beta_cost * alts[i].total_cost;
    return best_of(affordable, value, alts, keys);
}

nlohmann::json kb_to_json(const KnowledgeBase& kb)
{
    auto out = nlohmann::json::array();
    for (const auto& [k, e] : kb.entries)
        out.push_back({{"key", {{"what", k.what}, {"from", k.from}, {"to", k.to}, {"band", to_string(k.band)}}},
                       {"q", e.q},
                       {"n", e.n}});
    return out;
}

KnowledgeBase kb_from_json(const std::string& owner, const nlohmann::json& j)
{
    KnowledgeBase kb;
    kb.owner = owner;
    for (const auto& rec : j)
    {
        SegmentKey k;
        const auto& key = rec.at("key");
        k.what = key.at("what").get<std::string>();
        k.from = key.at("from").get<std::string>();
        k.to = key.at("to").get<std::string>();
        auto band = key.at("band").get<std::string>();
        if (band == "am_peak")
            k.band = TimeBand::am_peak;
        else if (band == "midday")
            k.band = TimeBand::midday;
        else if (band == "pm_peak")
            k.band = TimeBand::pm_peak;
        else if (band == "off")
            k.band = TimeBand::off;
        else
            throw SchemaError("unknown time band '" + band + "'");
        double q = rec.at("q").get<double>();
        long n = rec.at("n").get<long>();
        if (!std::isfinite(q) || n < 0)
            throw SchemaError("invalid knowledge-base entry");
        kb.entries[k] = KbEntry{q, n};
    }
    return kb;
}

} // namespace tangram
