#include <tangram/errors.h>
#include <tangram/server.h>

#include <cstdlib>

#include <httplib.h>

namespace tangram {

const char* to_string(RunStatus s)
{
    switch (s)
    {
    case RunStatus::queued: return "queued";
    case RunStatus::running: return "running";
    case RunStatus::done: return "done";
    case RunStatus::failed: return "failed";
    }
    return "?";
}

std::size_t workers_from_env(std::size_t fallback)
{
    const char* v = std::getenv("TANGRAM_WORKERS");
    if (!v || !*v)
        return fallback;
    char* end = nullptr;
    long n = std::strtol(v, &end, 10);
    if (*end != '\0' || n < 1)
        throw ConfigError(std::string("TANGRAM_WORKERS must be a positive integer, got '") + v + "'");
    return static_cast<std::size_t>(n);
}

RunQueue::RunQueue(std::filesystem::path root, std::size_t workers) : root_(std::move(root))
{
    std::filesystem::create_directories(root_);
    for (std::size_t i = 0; i != std::max<std::size_t>(1, workers); ++i)
        threads_.emplace_back([this] { work(); });
}

RunQueue::~RunQueue()
{
    {
        std::lock_guard lock(mu_);
        stop_ = true;
    }
    cv_.notify_all();
    for (auto& t : threads_)
        t.join();
}

std::string RunQueue::submit(const nlohmann::json& config)
{
    auto cfg = config_from_json(config, root_);
    std::lock_guard lock(mu_);
    std::string id = "run-" + std::to_string(next_++);
    cfg.output = root_ / id;  // clients never choose where files go
    RunHandle h;
    h.id = id;
    h.output = cfg.output;
    h.progress.total = cfg.total_iterations();
    runs_[id] = h;
    pending_.push_back({id, std::move(cfg)});
    cv_.notify_one();
    return id;
}

std::optional<RunHandle> RunQueue::get(const std::string& id) const
{
    std::lock_guard lock(mu_);
    auto it = runs_.find(id);
    if (it == runs_.end())
        return std::nullopt;
    return it->second;
}

void RunQueue::drain()
{
    std::unique_lock lock(mu_);
    idle_.wait(lock, [&] { return pending_.empty() && busy_ == 0; });
}

void RunQueue::work()
{
    for (;;)
    {
        Job job;
        {
            std::unique_lock lock(mu_);
            cv_.wait(lock, [&] { return stop_ || !pending_.empty(); });
            if (stop_)
                return;
            job = std::move(pending_.front());
            pending_.pop_front();
            ++busy_;
            runs_[job.id].status = RunStatus::running;
        }
        auto observe = [&](const Progress& p) {
            std::lock_guard lock(mu_);
            runs_[job.id].progress = p;
        };
        try
        {
            auto result = run_experiment(job.config, observe);
            std::lock_guard lock(mu_);
            auto& h = runs_[job.id];
            h.stats = std::move(result.final_stats);
            h.status = RunStatus::done;
        }
        catch (const std::exception& e)
        {
            std::lock_guard lock(mu_);
            auto& h = runs_[job.id];
            h.status = RunStatus::failed;
            h.error = e.what();
        }
        {
            std::lock_guard lock(mu_);
            --busy_;
        }
        idle_.notify_all();
    }
}

namespace {

void reply(httplib::Response& res, int status, const nlohmann::json& body)
{
    res.status = status;
    res.set_content(body.dump(), "application/json");
}

void fail(httplib::Response& res, int status, const std::string& message)
{
    reply(res, status, {{"error", message}});
}

std::optional<nlohmann::json> parse_body(const httplib::Request& req, httplib::Response& res)
{
    try
    {
        auto j = nlohmann::json::parse(req.body);
        if (!j.is_object())
        {
            fail(res, 400, "body must be a JSON object");
            return std::nullopt;
        }
        return j;
    }
    catch (const nlohmann::json::exception& e)
    {
        fail(res, 400, std::string("malformed JSON: ") + e.what());
        return std::nullopt;
    }
}

nlohmann::json handle_json(const RunHandle& h)
{
    nlohmann::json j = {{"id", h.id}, {"status", to_string(h.status)}};
    if (h.status == RunStatus::running || h.status == RunStatus::done)
    {
        j["phase"] = to_string(h.progress.phase);
        j["iteration"] = h.progress.iteration;
        j["phase_iteration"] = h.progress.phase_iteration;
    }
    j["total"] = h.progress.total;
    double frac = h.progress.total ? double(h.progress.iteration) / h.progress.total : 0.0;
    j["progress"] = h.status == RunStatus::done ? 1.0 : (h.status == RunStatus::running ? frac : 0.0);
    if (h.status == RunStatus::failed)
        j["error"] = h.error;
    return j;
}

} // namespace

Service::Service(ServerOptions o) : opts_(std::move(o)), http_(std::make_unique<httplib::Server>())
{
    // SO_REUSEPORT would let a second server share the port silently
    http_->set_socket_options([](socket_t sock) {
        int yes = 1;
        setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, reinterpret_cast<const char*>(&yes), sizeof(yes));
    });
    queue_ = std::make_unique<RunQueue>(opts_.root, opts_.workers);
    routes();
}

Service::~Service()
{
    stop();
}

int Service::bind()
{
    if (opts_.port == 0)
    {
        int port = http_->bind_to_any_port(opts_.host);
        if (port <= 0)
            throw BindError("cannot bind " + opts_.host);
        opts_.port = port;
        return port;
    }
    if (!http_->bind_to_port(opts_.host, opts_.port))
        throw BindError("cannot bind " + opts_.host + ":" + std::to_string(opts_.port));
    return opts_.port;
}

void Service::listen()
{
    http_->listen_after_bind();
}

void Service::stop()
{
    if (http_)
        http_->stop();
}

void Service::routes()
{
    auto& s = *http_;

    s.Post("/scenarios", [this](const httplib::Request& req, httplib::Response& res) {
        auto body = parse_body(req, res);
        if (!body)
            return;
        if (!body->contains("network"))
            return fail(res, 400, "scenario needs a network");
        try
        {
            auto net = network_from_json((*body)["network"]);
            if (body->contains("population") && !(*body)["population"].contains("generator"))
                population_from_json((*body)["population"], net);
            if (body->contains("smi") && !(*body)["smi"].is_null())
                smi_from_json((*body)["smi"], net);
        }
        catch (const std::exception& e)
        {
            return fail(res, 400, e.what());
        }
        std::lock_guard lock(mu_);
        std::string id = "scenario-" + std::to_string(next_scenario_++);
        scenarios_[id] = *body;
        network_ = (*body)["network"];
        reply(res, 201, {{"id", id}});
    });

    s.Post("/runs", [this](const httplib::Request& req, httplib::Response& res) {
        auto body = parse_body(req, res);
        if (!body)
            return;
        if (body->contains("scenario"))
        {
            std::lock_guard lock(mu_);
            auto it = scenarios_.find(body->value("scenario", ""));
            if (it == scenarios_.end())
                return fail(res, 404, "unknown scenario");
            for (const char* key : {"network", "population", "smi"})
                if (!body->contains(key) && it->second.contains(key))
                    (*body)[key] = it->second[key];
            body->erase("scenario");
        }
        try
        {
            auto id = queue_->submit(*body);
            reply(res, 202, {{"run_id", id}});
        }
        catch (const std::exception& e)
        {
            fail(res, 400, e.what());
        }
    });

    s.Get(R"(/runs/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
        auto h = queue_->get(req.matches[1]);
        if (!h)
            return fail(res, 404, "unknown run");
        reply(res, 200, handle_json(*h));
    });

    s.Get(R"(/runs/([^/]+)/stats)", [this](const httplib::Request& req, httplib::Response& res) {
        auto h = queue_->get(req.matches[1]);
        if (!h)
            return fail(res, 404, "unknown run");
        if (h->status != RunStatus::done)
            return fail(res, 409, std::string("run is ") + to_string(h->status));
        reply(res, 200, stats_to_json(*h->stats));
    });

    s.Get(R"(/runs/([^/]+)/traffic)", [this](const httplib::Request& req, httplib::Response& res) {
        auto h = queue_->get(req.matches[1]);
        if (!h)
            return fail(res, 404, "unknown run");
        if (h->status != RunStatus::done)
            return fail(res, 409, std::string("run is ") + to_string(h->status));
        std::optional<std::int64_t> bin;
        if (req.has_param("bin"))
        {
            try
            {
                bin = std::stoll(req.get_param_value("bin"));
            }
            catch (const std::exception&)
            {
                return fail(res, 400, "bin must be an integer");
            }
        }
        reply(res, 200, traffic_to_json(*h->stats, bin));
    });

    s.Get("/network.geojson", [this](const httplib::Request& req, httplib::Response& res) {
        nlohmann::json net;
        {
            std::lock_guard lock(mu_);
            if (req.has_param("scenario"))
            {
                auto it = scenarios_.find(req.get_param_value("scenario"));
                if (it == scenarios_.end())
                    return fail(res, 404, "unknown scenario");
                net = it->second["network"];
            }
            else
                net = network_;
        }
        if (net.is_null())
            return fail(res, 404, "no scenario posted yet");
        res.status = 200;
        res.set_content(to_geojson(network_from_json(net)).dump(), "application/geo+json");
    });

    s.Post("/placement/suggest", [this](const httplib::Request& req, httplib::Response& res) {
        auto body = parse_body(req, res);
        if (!body)
            return;
        nlohmann::json scenario = *body;
        if (body->contains("scenario"))
        {
            std::lock_guard lock(mu_);
            auto it = scenarios_.find(body->value("scenario", ""));
            if (it == scenarios_.end())
                return fail(res, 404, "unknown scenario");
            scenario = it->second;
        }
        if (!scenario.contains("network") || !scenario.contains("population"))
            return fail(res, 400, "placement needs a network and a population");
        try
        {
            int k = body->value("k", 0);
            if (k < 1)
                return fail(res, 400, "k must be at least 1");
            auto seed = body->value("seed", std::uint64_t{1});
            auto net = network_from_json(scenario["network"]);
            const auto& pj = scenario["population"];
            auto pop = pj.is_object() && pj.contains("generator")
                           ? generate_population(generator_spec_from_json(pj["generator"], net), net,
                                                 pj["generator"].value("seed", seed))
                           : population_from_json(pj, net);
            auto nodes = suggest_hub_locations(pop.agendas, std::size_t(k), net, seed);
            auto out = nlohmann::json::array();
            for (auto n : nodes)
                out.push_back({{"node", net.node(n).id}, {"x", net.node(n).x}, {"y", net.node(n).y}});
            reply(res, 200, {{"suggestions", out}});
        }
        catch (const std::exception& e)
        {
            fail(res, 400, e.what());
        }
    });
}

} // namespace tangram
