#pragma once

#include <tangram/runner.h>

#include <condition_variable>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

namespace httplib {
class Server;
}

namespace tangram {

enum class RunStatus { queued, running, done, failed };

const char* to_string(RunStatus s);

struct RunHandle
{
    std::string id;
    RunStatus status = RunStatus::queued;
    Progress progress;
    std::string error;
    std::filesystem::path output;
    std::optional<IterationStats> stats;
};

// Queues experiment runs and executes them on a fixed number of worker slots.
class RunQueue
{
public:
    RunQueue(std::filesystem::path root, std::size_t workers);
    ~RunQueue();

    RunQueue(const RunQueue&) = delete;
    RunQueue& operator=(const RunQueue&) = delete;

    // Throws ConfigError before anything is queued.
    std::string submit(const nlohmann::json& config);
    std::optional<RunHandle> get(const std::string& id) const;
    std::size_t workers() const { return threads_.size(); }

    // Blocks until every submitted run has finished.
    void drain();

private:
    struct Job
    {
        std::string id;
        ExperimentConfig config;
    };

    void work();

    std::filesystem::path root_;
    mutable std::mutex mu_;
    std::condition_variable cv_;
    std::condition_variable idle_;
    std::deque<Job> pending_;
    std::map<std::string, RunHandle> runs_;
    std::size_t busy_ = 0;
    std::uint64_t next_ = 1;
    bool stop_ = false;
    std::vector<std::thread> threads_;
};

struct ServerOptions
{
    std::string host = "127.0.0.1";
    int port = 8080;
    std::filesystem::path root = "runs";  // run outputs and stored scenarios
    std::size_t workers = 1;              // TANGRAM_WORKERS when set
};

std::size_t workers_from_env(std::size_t fallback = 1);

// HTTP front end over a RunQueue.
class Service
{
public:
    explicit Service(ServerOptions o);
    ~Service();

    // Binds the address; throws BindError. Port 0 picks a free port.
    int bind();
    void listen();  // blocks until stop()
    void stop();

    RunQueue& queue() { return *queue_; }

private:
    void routes();

    ServerOptions opts_;
    std::unique_ptr<httplib::Server> http_;
    std::unique_ptr<RunQueue> queue_;
    std::mutex mu_;
    std::map<std::string, nlohmann::json> scenarios_;
    std::uint64_t next_scenario_ = 1;
    nlohmann::json network_;  // most recently posted scenario network
};

} // namespace tangram
