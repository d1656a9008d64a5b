// pursuit: train motion-profile GPs, run visual pursuit scenarios and compare
// the single-model and switched-model controllers.

#include <CLI11.hpp>
#include <fmt/format.h>
#include <spdlog/cfg/env.h>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <optional>
#include <thread>

#include "vpursuit/errors.hpp"
#include "vpursuit/io.hpp"
#include "vpursuit/simd/kernels.hpp"
#include "vpursuit/simulate.hpp"

namespace fs = std::filesystem;
using namespace vpursuit;

namespace {

enum ExitCode { kOk = 0, kOther = 1, kConfig = 2, kMissing = 3, kViolation = 4 };

struct Common {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> pursuit_case;
    std::optional<double> duration;
    std::string out = "out";
};

Config load(const Common& c) {
    Config cfg;
    if (c.config.empty()) {
        cfg.scenario = Scenario::nominal();
    } else {
        cfg = load_config(c.config);
    }
    Scenario& s = cfg.scenario;
    if (c.seed) {
        s.seed = *c.seed;
    }
    if (c.pursuit_case) {
        try {
            s.pursuit_case = parse_case(*c.pursuit_case);
        } catch (const InvalidArgument& e) {
            throw ConfigError(e.what());
        }
    }
    if (c.duration) {
        s.duration = *c.duration;
    }
    s.validate();
    return cfg;
}

void write_text(const fs::path& path, const std::string& text) {
    if (path.has_parent_path()) {
        fs::create_directories(path.parent_path());
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw Error("cannot write " + path.string());
    }
    out << text;
}

std::vector<Dataset> datasets_for(const Config& cfg) {
    if (cfg.dataset_files.empty()) {
        return generate_training(cfg.scenario, cfg.scenario.training.points_per_profile);
    }
    std::vector<Dataset> out;
    for (const auto& p : cfg.dataset_files) {
        spdlog::info("loading dataset {}", p.string());
        out.push_back(read_dataset_csv(p));
    }
    return out;
}

int cmd_gen_data(const Common& c) {
    const Config cfg = load(c);
    const auto datasets = generate_training(cfg.scenario, cfg.scenario.training.points_per_profile);
    for (std::size_t i = 0; i < datasets.size(); ++i) {
        const fs::path path = fs::path(c.out) / fmt::format("dataset_{}.csv", i + 1);
        write_dataset_csv(datasets[i], path);
        fmt::print("wrote {} ({} points)\n", path.string(), datasets[i].size());
    }
    return kOk;
}

int cmd_train(const Common& c, bool single_model) {
    const Config cfg = load(c);
    const auto datasets = datasets_for(cfg);
    if (datasets.size() != cfg.scenario.profiles.size()) {
        throw ConfigError(fmt::format("{} datasets given for {} profiles", datasets.size(),
                                      cfg.scenario.profiles.size()));
    }
    const PursuitCase which = single_model ? PursuitCase::Single : PursuitCase::Switched;
    const TrainedModels trained = train_models(cfg.scenario, datasets, which);
    for (std::size_t i = 0; i < trained.models.size(); ++i) {
        const GpModel& m = trained.models[i];
        const fs::path path =
            fs::path(c.out) / (single_model ? std::string("model_single.json") : fmt::format("model_{}.json", i + 1));
        write_model(m, path);
        fmt::print("wrote {} ({} points)\n", path.string(), m.size());
        for (int d = 0; d < kGpDims; ++d) {
            const Hyperparameters& hp = m.hyperparameters(d);
            fmt::print("  output {}: log-likelihood {:.6g}  sigma_f {:.4g}  sigma_n {:.4g}  beta {:.4g}\n", d + 1,
                       trained.fits[i].log_likelihood(d), hp.signal_std, hp.noise_std, m.beta()(d));
        }
        fmt::print("  Sigma_bar {:.6g}\n", m.sigma_bar());
    }
    return kOk;
}

int cmd_simulate(const Common& c, const std::vector<std::string>& model_args) {
    const Config cfg = load(c);
    std::vector<fs::path> paths(model_args.begin(), model_args.end());
    if (paths.empty()) {
        paths = cfg.model_files;
    }
    std::vector<GpModel> models;
    if (cfg.scenario.use_gp) {
        if (paths.empty()) {
            throw MissingArtifact("no model files given (use --models or the config's 'models')");
        }
        for (const auto& p : paths) {
            if (!fs::exists(p)) {
                throw MissingArtifact("model file not found: " + p.string());
            }
            models.push_back(read_model(p));
        }
        const bool single = cfg.scenario.pursuit_case == PursuitCase::Single;
        if (single && models.size() != 1) {
            throw ConfigError("the single case takes exactly one model file");
        }
        if (!single && models.size() != cfg.scenario.profiles.size()) {
            throw ConfigError("the switched case takes one model file per profile");
        }
    }
    const fs::path out(c.out);
    try {
        const Trace trace = run_scenario(cfg.scenario, models);
        write_trace_csv(trace, out / "trace.csv");
        const std::string summary = summary_json(trace, cfg.scenario);
        write_text(out / "summary.json", summary);
        fmt::print("{}", summary);
        return kOk;
    } catch (const ScenarioAborted& e) {
        write_trace_csv(e.trace, out / "trace.csv");
        write_text(out / "summary.json", summary_json(e.trace, cfg.scenario));
        throw;
    }
}

int cmd_compare(const Common& c, int n_seeds, int jobs) {
    const Config cfg = load(c);
    if (n_seeds < 1) {
        throw ConfigError("--seeds must be positive");
    }
    const std::uint64_t first = cfg.scenario.seed;
    std::vector<std::optional<CaseComparison>> results(static_cast<std::size_t>(n_seeds));
    std::atomic<int> next{0};
    std::mutex error_mutex;
    std::exception_ptr error;
    auto worker = [&] {
        for (int i = next++; i < n_seeds; i = next++) {
            try {
                results[static_cast<std::size_t>(i)] = compare_cases(cfg.scenario, first + static_cast<std::uint64_t>(i));
                spdlog::info("seed {} done", first + static_cast<std::uint64_t>(i));
            } catch (...) {
                std::lock_guard lock(error_mutex);
                error = error ? error : std::current_exception();
            }
        }
    };
    const int n_threads = std::clamp(jobs, 1, n_seeds);
    std::vector<std::thread> pool;
    for (int t = 0; t < n_threads; ++t) {
        pool.emplace_back(worker);
    }
    for (auto& t : pool) {
        t.join();
    }
    if (error) {
        std::rethrow_exception(error);
    }

    const fs::path out(c.out);
    std::string table = "seed,mse_single,mse_switched,improvement\n";
    double sum = 0.0;
    int wins = 0;
    fmt::print("{:>6} {:>12} {:>12} {:>12}\n", "seed", "mse_single", "mse_switched", "improvement");
    for (const auto& r : results) {
        table += fmt::format("{},{},{},{}\n", r->seed, r->mse_single, r->mse_switched, r->improvement);
        fmt::print("{:>6} {:>12.6f} {:>12.6f} {:>11.2f}%\n", r->seed, r->mse_single, r->mse_switched,
                   100.0 * r->improvement);
        sum += r->improvement;
        wins += r->mse_switched < r->mse_single ? 1 : 0;
    }
    fmt::print("mean improvement {:.2f}% ; switched better on {}/{} seeds\n", 100.0 * sum / n_seeds, wins, n_seeds);
    write_text(out / "compare.csv", table);

    const CaseComparison& first_run = *results.front();
    std::string plot = "t,e_norm_single,e_norm_switched,s,s_bar\n";
    for (std::size_t k = 0; k < first_run.switched.records.size(); ++k) {
        const auto& a = first_run.single.records[k];
        const auto& b = first_run.switched.records[k];
        plot += fmt::format("{},{},{},{},{}\n", b.t, a.e_norm, b.e_norm, b.psi_true, b.psi_est);
    }
    write_text(out / "plot.csv", plot);
    return kOk;
}

}  // namespace

int main(int argc, char** argv) {
    auto logger = spdlog::stderr_color_mt("pursuit");
    spdlog::set_default_logger(logger);
    spdlog::set_level(spdlog::level::warn);
    if (const char* lvl = std::getenv("PURSUIT_LOG")) {
        spdlog::set_level(spdlog::level::from_str(lvl));
    }

    CLI::App app{"Visual pursuit of a target switching among learned motion profiles"};
    app.require_subcommand(1);
    Common common;
    bool single_model = false;
    std::vector<std::string> model_files;
    int n_seeds = 10;
    int jobs = 1;

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", common.config, "Scenario config (JSON); defaults to the built-in scenario");
        sub->add_option("--seed", common.seed, "Override the scenario seed");
        sub->add_option("--case", common.pursuit_case, "single or switched");
        sub->add_option("--duration", common.duration, "Override the simulated duration [s]");
        sub->add_option("--out", common.out, "Output directory")->capture_default_str();
    };
    CLI::App* gen = app.add_subcommand("gen-data", "Sample training datasets on the profile limit cycles");
    add_common(gen);
    CLI::App* train = app.add_subcommand("train", "Fit GP models and write model files");
    add_common(train);
    train->add_flag("--single-model", single_model, "Fit one model on all datasets (single case)");
    CLI::App* sim = app.add_subcommand("simulate", "Run one closed-loop scenario");
    add_common(sim);
    sim->add_option("--models", model_files, "Model files, one per profile (switched) or one (single)");
    CLI::App* cmp = app.add_subcommand("compare", "Train and run both cases over a seed sweep");
    add_common(cmp);
    cmp->add_option("--seeds", n_seeds, "Number of consecutive seeds")->capture_default_str();
    cmp->add_option("--jobs", jobs, "Parallel runs")->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kConfig;
    }

    spdlog::debug("kernel backend: {}", simd::backend_name(simd::active_backend()));
    try {
        if (gen->parsed()) {
            return cmd_gen_data(common);
        }
        if (train->parsed()) {
            return cmd_train(common, single_model);
        }
        if (sim->parsed()) {
            return cmd_simulate(common, model_files);
        }
        return cmd_compare(common, n_seeds, jobs);
    } catch (const ConfigError& e) {
        spdlog::error("config error: {}", e.what());
        return kConfig;
    } catch (const MissingArtifact& e) {
        spdlog::error("missing artifact: {}", e.what());
        return kMissing;
    } catch (const AssumptionViolation& e) {
        spdlog::error("assumption violation: {}", e.what());
        return kViolation;
    } catch (const std::exception& e) {
        spdlog::error("{}", e.what());
        return kOther;
    }
}
