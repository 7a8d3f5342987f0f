#pragma once

#include <tangram/services.h>

#include <compare>
#include <map>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

namespace tangram {

enum class TimeBand { am_peak, midday, pm_peak, off };

const char* to_string(TimeBand b);
TimeBand time_band(double seconds_of_day);  // 06-10, 10-15, 15-20, else

// What a commuter remembers about one kind of segment. Endpoints are hub ids
// where the segment touches a hub and node ids otherwise.
struct SegmentKey
{
    std::string what;  // service id, or personal mode tag
    std::string from;
    std::string to;
    TimeBand band = TimeBand::off;

    auto operator<=>(const SegmentKey&) const = default;
    std::string str() const;
};

std::vector<SegmentKey> segment_keys_of(const TravelingAlternative& alt, double depart,
                                        const RoadNetwork& net, const Smi& smi);

struct KbEntry
{
    double q = 0;
    long n = 0;
};

struct KnowledgeBase
{
    std::string owner;
    std::map<SegmentKey, KbEntry> entries;

    const KbEntry* find(const SegmentKey& k) const;
    long tries(const std::vector<SegmentKey>& keys) const;
};

enum class Phase { explorative, exploitative, policy_based };

const char* to_string(Phase p);

struct PhaseConfig
{
    Phase phase = Phase::exploitative;
    int iterations = 1;
    bool costs_enabled = false;
    bool resources_limited = true;
    bool hub_replanning = true;

    // The flag matrix is fixed per phase; policy_based always runs once.
    static PhaseConfig make(Phase p, int iterations);
    bool consistent() const;
};

struct MindParams
{
    double alpha = 0.3;             // learning rate
    double optimistic_init = 1.0;   // score assumed for unseen segments
    double beta_cost = 0.1;         // utility per currency unit in the policy phase
};

double evaluate_alternative(const KnowledgeBase& kb, const std::vector<SegmentKey>& keys,
                            double optimistic_init);

// q <- q + alpha * (observed - q); the first observation initializes q.
void update_kb(KnowledgeBase& kb, const SegmentKey& key, double observed, double alpha);

// Picks an index into alts. keys[i] are the segment keys of alts[i].
std::size_t select_alternative(const PhaseConfig& phase, const std::vector<TravelingAlternative>& alts,
                               const std::vector<std::vector<SegmentKey>>& keys, const KnowledgeBase& kb,
                               double budget_remaining, std::mt19937_64& rng, const MindParams& params = {});

nlohmann::json kb_to_json(const KnowledgeBase& kb);
KnowledgeBase kb_from_json(const std::string& owner, const nlohmann::json& j);

} // namespace tangram
