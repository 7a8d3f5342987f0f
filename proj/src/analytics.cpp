#include <tangram/analytics.h>
#include <tangram/errors.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

namespace tangram {

namespace {

double percentile(const std::vector<double>& sorted, double q)
{
    if (sorted.empty())
        return 0;
    auto rank = static_cast<std::size_t>(std::ceil(q * double(sorted.size())));
    rank = std::clamp<std::size_t>(rank, 1, sorted.size());
    return sorted[rank - 1];
}

std::int64_t bin_of(std::int64_t t, int width)
{
    return (t / width) * width;
}

} // namespace

IterationStats collect_stats(const EventLog& log, const std::vector<PersonDay>& days, const std::vector<double>& scores,
                             const Smi& smi, const RoadNetwork& net, const std::vector<ServiceUsageSummary>& usage,
                             int time_bin, bool with_traffic)
{
    if (days.empty())
        throw EmptyLog("no commuters to aggregate");
    if (time_bin <= 0)
        throw std::invalid_argument("time bin must be positive");

    IterationStats s;
    s.population = static_cast<long>(days.size());
    s.time_bin = time_bin;

    std::int64_t day_end = log.events.empty() ? 0 : log.events.back().time;
    double distance = 0, time = 0, co2 = 0, cost = 0;
    for (const auto& d : days)
    {
        bool subscriber = false;
        for (const auto& seg : d.segments)
        {
            distance += seg.distance;
            time += seg.duration(day_end);
            co2 += seg.co2;
            cost += seg.cost;
            if (seg.service)
            {
                subscriber = true;
                ++s.mode_split[smi.services[*seg.service].id];
            }
            else
                ++s.mode_split[seg.mode];
        }
        s.subscribers += subscriber;
        s.stuck += d.stuck;
        s.reservation_failures += static_cast<long>(d.failures.size());
    }
    double n = double(days.size());
    s.mean_travel_distance = distance / n;
    s.mean_travel_time = time / n;
    s.mean_co2 = co2 / n;
    s.mean_cost = cost / n;

    long used = 0, fleet = 0;
    for (const auto& u : usage)
    {
        s.resource_usage[smi.services[u.service].id] = service_health(u).usage_fraction;
        used += u.vehicles_used;
        fleet += u.fleet_total;
    }
    s.resource_usage_total = fleet > 0 ? double(used) / double(fleet) : 0.0;

    if (!scores.empty())
    {
        std::vector<double> sorted = scores;
        std::sort(sorted.begin(), sorted.end());
        double sum = 0;
        for (double v : sorted)
            sum += v;
        s.scores = {sum / double(sorted.size()), sorted.front(), percentile(sorted, 0.1), percentile(sorted, 0.5),
                    percentile(sorted, 0.9), sorted.back()};
    }

    if (!with_traffic)
        return s;

    // traffic: vehicles (walkers excluded) on each link per bin
    std::uint8_t walk = 255;
    for (std::size_t i = 0; i != log.modes.size(); ++i)
        if (log.modes[i] == mode::walk)
            walk = static_cast<std::uint8_t>(i);
    struct LinkTrack
    {
        long occupied = 0;
        std::int64_t bin = -1;
    };
    std::vector<LinkTrack> track(net.links().size());
    auto cell = [&](LinkIdx l, std::int64_t bin) -> TrafficCell& {
        return s.traffic[{net.link(l).id, bin}];
    };
    // opens every bin from the last seen one up to bin, carrying occupancy
    auto advance = [&](LinkIdx l, std::int64_t bin) {
        auto& tr = track[l];
        if (tr.bin == bin)
            return;
        if (tr.bin >= 0 && tr.occupied > 0)
            for (std::int64_t b = tr.bin + time_bin; b < bin; b += time_bin)
                cell(l, b).present = tr.occupied;
        tr.bin = bin;
        cell(l, bin).present = tr.occupied;
    };
    for (const auto& e : log.events)
    {
        if ((e.kind != EventKind::link_enter && e.kind != EventKind::link_leave) || e.mode == walk)
            continue;
        auto bin = bin_of(e.time, time_bin);
        advance(e.link, bin);
        auto& c = cell(e.link, bin);
        if (e.kind == EventKind::link_enter)
        {
            ++c.entries;
            ++c.present;
            ++track[e.link].occupied;
        }
        else
        {
            ++c.exits;
            --track[e.link].occupied;
        }
    }
    auto last_bin = bin_of(day_end, time_bin);
    for (LinkIdx l = 0; l != track.size(); ++l)
        if (track[l].occupied > 0)
            advance(l, last_bin);
    return s;
}

std::map<std::string, double> scalar_metrics(const IterationStats& s)
{
    return {{"mean_travel_distance", s.mean_travel_distance},
            {"mean_travel_time", s.mean_travel_time},
            {"mean_co2", s.mean_co2},
            {"mean_cost", s.mean_cost},
            {"subscribers", double(s.subscribers)},
            {"resource_usage", s.resource_usage_total},
            {"mean_score", s.scores.mean},
            {"stuck", double(s.stuck)}};
}

ComparisonReport compare(const IterationStats& baseline, const IterationStats& treated)
{
    ComparisonReport r;
    r.baseline = baseline;
    r.treated = treated;
    auto b = scalar_metrics(baseline);
    auto t = scalar_metrics(treated);
    for (const auto& [name, bv] : b)
    {
        MetricDelta d;
        d.baseline = bv;
        d.treated = t.at(name);
        d.absolute = d.treated - d.baseline;
        if (bv != 0)
            d.percent = 100.0 * d.absolute / bv;
        r.deltas[name] = d;
    }
    return r;
}

nlohmann::json stats_to_json(const IterationStats& s, bool with_traffic)
{
    nlohmann::json j = {{"population", s.population},
                        {"mean_travel_distance", s.mean_travel_distance},
                        {"mean_travel_time", s.mean_travel_time},
                        {"mean_co2", s.mean_co2},
                        {"mean_cost", s.mean_cost},
                        {"subscribers", s.subscribers},
                        {"stuck", s.stuck},
                        {"reservation_failures", s.reservation_failures},
                        {"mode_split", s.mode_split},
                        {"resource_usage", s.resource_usage},
                        {"resource_usage_total", s.resource_usage_total},
                        {"score_distribution",
                         {{"mean", s.scores.mean},
                          {"min", s.scores.min},
                          {"p10", s.scores.p10},
                          {"median", s.scores.median},
                          {"p90", s.scores.p90},
                          {"max", s.scores.max}}},
                        {"time_bin", s.time_bin}};
    if (with_traffic)
        j["traffic"] = traffic_to_json(s, std::nullopt);
    return j;
}

IterationStats stats_from_json(const nlohmann::json& j)
{
    IterationStats s;
    try
    {
        s.population = j.at("population").get<long>();
        s.mean_travel_distance = j.at("mean_travel_distance").get<double>();
        s.mean_travel_time = j.at("mean_travel_time").get<double>();
        s.mean_co2 = j.at("mean_co2").get<double>();
        s.mean_cost = j.at("mean_cost").get<double>();
        s.subscribers = j.at("subscribers").get<long>();
        s.stuck = j.value("stuck", 0L);
        s.reservation_failures = j.value("reservation_failures", 0L);
        s.mode_split = j.value("mode_split", std::map<std::string, long>{});
        s.resource_usage = j.value("resource_usage", std::map<std::string, double>{});
        s.resource_usage_total = j.value("resource_usage_total", 0.0);
        s.time_bin = j.value("time_bin", 900);
        if (j.contains("score_distribution"))
        {
            const auto& d = j["score_distribution"];
            s.scores = {d.at("mean").get<double>(), d.at("min").get<double>(),    d.at("p10").get<double>(),
                        d.at("median").get<double>(), d.at("p90").get<double>(), d.at("max").get<double>()};
        }
        if (j.contains("traffic"))
            for (const auto& row : j["traffic"])
                s.traffic[{row.at("link").get<std::string>(), row.at("bin_start").get<std::int64_t>()}] =
                    TrafficCell{row.at("entries").get<long>(), row.at("exits").get<long>(), row.at("count").get<long>()};
    }
    catch (const nlohmann::json::exception& e)
    {
        throw SchemaError(std::string("stats: ") + e.what());
    }
    return s;
}

nlohmann::json comparison_to_json(const ComparisonReport& r)
{
    auto deltas = nlohmann::json::object();
    for (const auto& [name, d] : r.deltas)
    {
        nlohmann::json x = {{"baseline", d.baseline}, {"treated", d.treated}, {"absolute", d.absolute}};
        x["percent"] = d.percent ? nlohmann::json(*d.percent) : nlohmann::json(nullptr);
        deltas[name] = x;
    }
    return {{"label", r.label},
            {"baseline", stats_to_json(r.baseline)},
            {"treated", stats_to_json(r.treated)},
            {"deltas", deltas}};
}

nlohmann::json traffic_to_json(const IterationStats& s, std::optional<std::int64_t> bin)
{
    auto rows = nlohmann::json::array();
    for (const auto& [key, c] : s.traffic)
    {
        if (bin && key.second != *bin)
            continue;
        rows.push_back({{"link", key.first},
                        {"bin_start", key.second},
                        {"count", c.present},
                        {"entries", c.entries},
                        {"exits", c.exits}});
    }
    return rows;
}

void write_json(const std::filesystem::path& path, const nlohmann::json& j)
{
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp);
        if (!out)
            throw std::runtime_error("cannot write " + tmp.string());
        out << j.dump(2) << "\n";
    }
    std::filesystem::rename(tmp, path);
}

void write_traffic_csv(const std::filesystem::path& path, const IterationStats& s)
{
    std::ofstream out(path);
    if (!out)
        throw std::runtime_error("cannot write " + path.string());
    out << "link,bin_start,count,entries,exits\n";
    for (const auto& [key, c] : s.traffic)
        out << key.first << "," << key.second << "," << c.present << "," << c.entries << "," << c.exits << "\n";
}

namespace {

std::string escape_xml(const std::string& s)
{
    std::string out;
    for (char c : s)
    {
        switch (c)
        {
        case '&': out += "&amp;"; break;
        case '<': out += "&lt;"; break;
        case '>': out += "&gt;"; break;
        case '"': out += "&quot;"; break;
        default: out += c;
        }
    }
    return out;
}

std::string fmt(double v)
{
    char buf[64];
    if (std::abs(v) >= 100 || v == std::floor(v))
        std::snprintf(buf, sizeof buf, "%.0f", v);
    else
        std::snprintf(buf, sizeof buf, "%.3g", v);
    return buf;
}

} // namespace

std::string svg_bar_chart(const std::string& title, const std::string& unit, const std::vector<std::string>& labels,
                          const std::vector<double>& values)
{
    const int width = 640, height = 400, left = 70, right = 20, top = 50, bottom = 60;
    const int plot_w = width - left - right, plot_h = height - top - bottom;
    double top_value = 0;
    for (double v : values)
        top_value = std::max(top_value, v);
    if (top_value <= 0)
        top_value = 1;

    std::ostringstream o;
    o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
      << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
    o << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    o << "<text x=\"" << width / 2 << "\" y=\"24\" text-anchor=\"middle\" font-size=\"16\">" << escape_xml(title)
      << "</text>\n";
    o << "<text x=\"14\" y=\"" << top + plot_h / 2 << "\" transform=\"rotate(-90 14 " << top + plot_h / 2
      << ")\" text-anchor=\"middle\">" << escape_xml(unit) << "</text>\n";
    o << "<line x1=\"" << left << "\" y1=\"" << top + plot_h << "\" x2=\"" << left + plot_w << "\" y2=\""
      << top + plot_h << "\" stroke=\"black\"/>\n";
    o << "<line x1=\"" << left << "\" y1=\"" << top << "\" x2=\"" << left << "\" y2=\"" << top + plot_h
      << "\" stroke=\"black\"/>\n";
    for (int k = 0; k <= 4; ++k)
    {
        double v = top_value * k / 4;
        int y = top + plot_h - int(plot_h * k / 4);
        o << "<text x=\"" << left - 6 << "\" y=\"" << y + 4 << "\" text-anchor=\"end\">" << fmt(v) << "</text>\n";
    }
    const std::size_t n = std::max<std::size_t>(1, labels.size());
    const double slot = double(plot_w) / double(n);
    static const char* colors[] = {"#4e79a7", "#f28e2b", "#59a14f", "#e15759", "#76b7b2", "#edc948"};
    for (std::size_t i = 0; i != labels.size(); ++i)
    {
        double v = i < values.size() ? std::max(0.0, values[i]) : 0.0;
        double h = plot_h * v / top_value;
        double x = left + slot * double(i) + slot * 0.15;
        o << "<rect x=\"" << x << "\" y=\"" << top + plot_h - h << "\" width=\"" << slot * 0.7 << "\" height=\"" << h
          << "\" fill=\"" << colors[i % 6] << "\"/>\n";
        o << "<text x=\"" << x + slot * 0.35 << "\" y=\"" << top + plot_h - h - 4 << "\" text-anchor=\"middle\">"
          << fmt(i < values.size() ? values[i] : 0.0) << "</text>\n";
        o << "<text x=\"" << x + slot * 0.35 << "\" y=\"" << top + plot_h + 18 << "\" text-anchor=\"middle\">"
          << escape_xml(labels[i]) << "</text>\n";
    }
    o << "</svg>\n";
    return o.str();
}

std::vector<std::filesystem::path> write_comparison_charts(const std::filesystem::path& dir,
                                                           const std::vector<ComparisonReport>& reports)
{
    std::vector<std::filesystem::path> written;
    if (reports.empty())
        return written;
    std::filesystem::create_directories(dir);

    std::vector<std::string> labels{"pre-SMI"};
    std::vector<const IterationStats*> runs{&reports.front().baseline};
    for (const auto& r : reports)
    {
        labels.push_back(r.label);
        runs.push_back(&r.treated);
    }
    auto series = [&](auto get) {
        std::vector<double> v;
        for (const auto* s : runs)
            v.push_back(get(*s));
        return v;
    };
    auto emit = [&](const std::string& file, const std::string& title, const std::string& unit,
                    const std::vector<std::string>& l, const std::vector<double>& v) {
        auto path = dir / file;
        std::ofstream out(path);
        if (!out)
            throw std::runtime_error("cannot write " + path.string());
        out << svg_bar_chart(title, unit, l, v);
        written.push_back(path);
    };

    emit("subscriptions.svg", "Tangrhubs subscriptions", "subscribers", labels,
         series([](const IterationStats& s) { return double(s.subscribers); }));
    emit("distances.svg", "Traveled distances", "m per commuter", labels,
         series([](const IterationStats& s) { return s.mean_travel_distance; }));
    emit("times.svg", "Travel times", "s per commuter", labels,
         series([](const IterationStats& s) { return s.mean_travel_time; }));
    emit("emissions.svg", "CO2 emissions", "g per commuter", labels,
         series([](const IterationStats& s) { return s.mean_co2; }));
    emit("costs.svg", "Costs of mobility", "currency per commuter", labels,
         series([](const IterationStats& s) { return s.mean_cost; }));

    std::vector<std::string> usage_labels(labels.begin() + 1, labels.end());
    std::vector<double> usage;
    for (const auto& r : reports)
        usage.push_back(r.treated.resource_usage_total);
    emit("resource_usage.svg", "Mobility resources usage", "fraction of fleet used", usage_labels, usage);
    return written;
}

} // namespace tangram
