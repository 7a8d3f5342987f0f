#include <tangram/errors.h>
#include <tangram/runner.h>
#include <tangram/scenario.h>
#include <tangram/server.h>

#include <csignal>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>

using namespace tangram;

namespace {

Service* running_service = nullptr;

void print_progress(const Progress& p)
{
    std::cerr << "\r[" << to_string(p.phase) << "] iteration " << p.iteration << "/" << p.total << std::flush;
    if (p.iteration == p.total)
        std::cerr << "\n";
}

nlohmann::json read_json(const std::string& path)
{
    std::ifstream in(path);
    if (!in)
        throw ConfigError("cannot open " + path);
    return nlohmann::json::parse(in);
}

void print_metrics(const IterationStats& s)
{
    for (const auto& [name, v] : scalar_metrics(s))
        std::cout << "  " << name << " = " << v << "\n";
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Agent-based simulator for smart mobility initiatives"};
    app.require_subcommand(1);

    std::string config, out;
    std::optional<std::uint64_t> seed;
    bool quiet = false;
    auto* run = app.add_subcommand("run", "Run one experiment");
    run->add_option("--config", config, "Experiment config JSON")->required()->check(CLI::ExistingFile);
    run->add_option("--seed", seed, "Override the seed");
    run->add_option("--out", out, "Output directory");
    run->add_flag("--quiet", quiet, "No progress output");

    std::string baseline;
    std::vector<std::string> smis;
    std::string compare_out = "comparison";
    auto* cmp = app.add_subcommand("compare", "Run a baseline and SMI configs and compare them");
    cmp->add_option("--baseline", baseline, "Pre-SMI config")->required()->check(CLI::ExistingFile);
    cmp->add_option("--smi", smis, "SMI configs")->required()->check(CLI::ExistingFile);
    cmp->add_option("--out", compare_out, "Output directory");
    cmp->add_option("--seed", seed, "Override every seed");
    cmp->add_flag("--quiet", quiet, "No progress output");

    std::string spec, net_path, pop_out;
    std::uint64_t gen_seed = 1;
    auto* gen = app.add_subcommand("generate-population", "Generate commuters from a generator spec");
    gen->add_option("--spec", spec, "Generator spec JSON")->required()->check(CLI::ExistingFile);
    gen->add_option("--network", net_path, "Network JSON")->required()->check(CLI::ExistingFile);
    gen->add_option("--seed", gen_seed, "Generator seed");
    gen->add_option("--out", pop_out, "Population file (stdout when omitted)");

    std::size_t k = 11;
    std::string pop_path;
    auto* sug = app.add_subcommand("suggest-hubs", "k-means hub placement over activity locations");
    sug->add_option("--k", k, "Number of hubs")->required()->check(CLI::PositiveNumber);
    sug->add_option("--network", net_path, "Network JSON")->required()->check(CLI::ExistingFile);
    sug->add_option("--population", pop_path, "Population JSON or generator spec")->required()->check(
        CLI::ExistingFile);
    sug->add_option("--seed", gen_seed, "Clustering seed");

    std::string bind = "127.0.0.1:8080", root = "runs";
    auto* serve = app.add_subcommand("serve", "Serve the HTTP interface");
    serve->add_option("--bind", bind, "HOST:PORT");
    serve->add_option("--root", root, "Directory for run outputs");

    std::string demo_dir = "demo";
    DemoOptions demo;
    auto* dem = app.add_subcommand("demo", "Write the grid-city baseline and SMI-1..3 configs");
    dem->add_option("--dir", demo_dir, "Where to write the configs");
    dem->add_option("--fraction", demo.sampling_fraction, "Sampling fraction of the population");
    dem->add_option("--seed", demo.seed, "Seed");
    dem->add_option("--explorative", demo.explorative, "Explorative iterations");
    dem->add_option("--exploitative", demo.exploitative, "Exploitative iterations");
    dem->add_option("--fleet-divisor", demo.fleet_divisor, "Divide the per-hub fleets by this");

    CLI11_PARSE(app, argc, argv);

    try
    {
        ProgressObserver observer;
        if (!quiet)
            observer = print_progress;

        if (*run)
        {
            auto cfg = load_config(config);
            if (seed)
                cfg.seed = *seed;
            if (!out.empty())
                cfg.output = out;
            auto result = run_experiment(cfg, observer);
            std::cout << "wrote " << result.output.string() << "\n";
            print_metrics(result.final_stats);
        }
        else if (*cmp)
        {
            auto base = load_config(baseline);
            std::vector<ExperimentConfig> treated;
            for (const auto& p : smis)
                treated.push_back(load_config(p));
            if (seed)
            {
                base.seed = *seed;
                for (auto& t : treated)
                    t.seed = *seed;
            }
            auto reports = run_comparison(base, treated, compare_out, observer);
            for (const auto& r : reports)
            {
                std::cout << r.label << "\n";
                for (const auto& [name, d] : r.deltas)
                {
                    std::cout << "  " << name << ": " << d.baseline << " -> " << d.treated;
                    if (d.percent)
                        std::cout << " (" << *d.percent << "%)";
                    std::cout << "\n";
                }
            }
        }
        else if (*gen)
        {
            auto net = load_network(net_path);
            auto pop = generate_population(generator_spec_from_json(read_json(spec), net), net, gen_seed);
            auto j = population_to_json(pop, net);
            if (pop_out.empty())
                std::cout << j.dump(1) << "\n";
            else
                write_json(pop_out, j);
        }
        else if (*sug)
        {
            auto net = load_network(net_path);
            auto pj = read_json(pop_path);
            auto pop = pj.is_object() && (pj.contains("generator") || pj.contains("areas"))
                           ? generate_population(
                                 generator_spec_from_json(pj.contains("generator") ? pj["generator"] : pj, net), net,
                                 gen_seed)
                           : population_from_json(pj, net);
            for (auto n : suggest_hub_locations(pop.agendas, k, net, gen_seed))
                std::cout << net.node(n).id << " " << net.node(n).x << " " << net.node(n).y << "\n";
        }
        else if (*serve)
        {
            auto colon = bind.rfind(':');
            if (colon == std::string::npos)
                throw ConfigError("--bind expects HOST:PORT");
            ServerOptions o;
            o.host = bind.substr(0, colon);
            o.port = std::stoi(bind.substr(colon + 1));
            o.root = root;
            o.workers = workers_from_env(1);
            Service service(o);
            int port = service.bind();
            std::cerr << "listening on " << o.host << ":" << port << " with " << o.workers << " worker(s)\n";
            running_service = &service;
            std::signal(SIGINT, [](int) {
                if (running_service)
                    running_service->stop();
            });
            service.listen();
            running_service = nullptr;
        }
        else if (*dem)
        {
            std::filesystem::create_directories(demo_dir);
            for (int which = 0; which <= 3; ++which)
            {
                auto o = demo;
                o.output = which == 0 ? "out/pre-SMI" : "out/SMI-" + std::to_string(which);
                auto name = which == 0 ? std::string("baseline.json") : "smi" + std::to_string(which) + ".json";
                write_json(std::filesystem::path(demo_dir) / name, demo_experiment_json(which, o));
            }
            std::cout << "wrote " << demo_dir << "/{baseline,smi1,smi2,smi3}.json\n";
        }
    }
    catch (const std::exception& e)
    {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
