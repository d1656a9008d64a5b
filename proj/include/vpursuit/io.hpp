#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "vpursuit/gp.hpp"
#include "vpursuit/simulate.hpp"

namespace vpursuit {

/// Scenario plus the artifact paths named in a config file. Relative paths
/// are resolved against the config file's directory.
struct Config {
    Scenario scenario;
    std::vector<std::filesystem::path> model_files;
    std::vector<std::filesystem::path> dataset_files;
};

/// Parses a JSON scenario. Keys missing from the document keep the
/// nominal() values; unknown keys and ill-typed values throw ConfigError.
Config parse_config(const std::string& text, const std::filesystem::path& base_dir = ".");
/// Throws MissingArtifact if the file cannot be read.
Config load_config(const std::filesystem::path& path);

/// Header px,py,pz,rx,ry,rz,vx,vy,vz,wx,wy,wz.
void write_dataset_csv(const Dataset& data, const std::filesystem::path& path);
Dataset read_dataset_csv(const std::filesystem::path& path);

/// JSON model file: per-output hyperparameters and log-likelihoods, beta,
/// delta, alpha, Sigma_bar and the embedded dataset.
std::string model_to_json(const GpModel& model);
GpModel model_from_json(const std::string& text);
void write_model(const GpModel& model, const std::filesystem::path& path);
GpModel read_model(const std::filesystem::path& path);

/// Column names of the trace CSV for `n_models` uncertainty columns.
std::vector<std::string> trace_columns(std::size_t n_models);
void write_trace_csv(const Trace& trace, std::ostream& out);
void write_trace_csv(const Trace& trace, const std::filesystem::path& path);

/// JSON run summary: MSE, switch events, switching fidelity, bound report
/// and recorded events.
std::string summary_json(const Trace& trace, const Scenario& scenario);

}  // namespace vpursuit
