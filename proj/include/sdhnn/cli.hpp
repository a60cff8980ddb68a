#pragma once

#include "sdhnn/integrator.hpp"
#include "sdhnn/model.hpp"
#include "sdhnn/spectral.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace sdhnn::cli {

/// Process exit codes.
enum ExitCode : int {
    kOk = 0,
    kInternal = 1,
    kConfig = 2,
    kDivergence = 3,
    kAnalysis = 4,
};

/// Initial history: a constant head or explicit node values (oldest first).
struct InitialSpec {
    std::optional<Vector> constant;
    Matrix nodes;  // n x (tau/dt + 1) when not constant
};

struct RunConfig {
    NetworkParams params;
    double dt = 1e-3;
    double horizon = 5.0;
    std::optional<std::uint64_t> seed;
    Route route = Route::Direct;
    std::optional<std::int64_t> k;
    std::vector<double> pullback_times{2.0, 4.0, 6.0, 8.0};
    std::vector<InitialSpec> initial_segments;
    std::filesystem::path output_dir = ".";
    std::int64_t stride = 1;
    std::optional<SearchBox> search_box;
    double gamma_fraction = 0.9;
    bool use_paper_lgtilde = false;
    std::vector<std::pair<double, double>> cocycle_pairs{{0.5, 0.5}, {0.3, 0.7}, {1.0, 1.0}};
    std::vector<std::int64_t> wong_zakai_ks{10, 20, 40, 80};
    std::vector<double> stationary_times{4.0, 8.0, 12.0};
    std::optional<std::pair<double, double>> flow_horizon;
};

/// Parses the configuration document; throws ConfigError naming the field.
RunConfig parse_config(const nlohmann::json& doc);

/// Reads and parses a file; malformed JSON is reported with line:column.
RunConfig load_config(const std::filesystem::path& file);

/// The two-neuron benchmark as a configuration document (seed 1).
nlohmann::json benchmark_config_json();

/// Checks the cross-field invariants (dt divides the delays, k compatible
/// with dt, seed present).
void validate_config(const RunConfig& cfg);

std::vector<HistorySegment> initial_segments(const RunConfig& cfg);

int cmd_simulate(const RunConfig& cfg, std::ostream& log);
int cmd_spectrum(const RunConfig& cfg, std::ostream& log);
int cmd_check(const RunConfig& cfg, std::ostream& log);
int cmd_pullback(const RunConfig& cfg, std::ostream& log);
int cmd_cocycle(const RunConfig& cfg, std::ostream& log);
int cmd_wongzakai(const RunConfig& cfg, std::ostream& log);
int cmd_stationary(const RunConfig& cfg, std::ostream& log);
int cmd_rate(const RunConfig& cfg, std::ostream& log);

/// Full bundle for the benchmark network (seeds 1 and 2) plus a manifest;
/// returns 0 only if every embedded assertion passes.
int cmd_reproduce(const std::filesystem::path& output_dir, std::ostream& log);

/// Entry point shared by the executable and the tests. Maps library errors
/// onto ExitCode values.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

} // namespace sdhnn::cli
