#pragma once

#include <optional>
#include <string>
#include <vector>

#include "medpath/boundary_tests.hpp"
#include "medpath/simulation.hpp"

namespace medpath {

// JSON-backed configuration shared by the CLI subcommands. Unknown keys are
// rejected with a message naming the offending field.
struct RunConfig {
    std::optional<ModelSpec> model;
    std::string exposure_name = "X";
    std::uint64_t seed = 0;

    std::optional<ScenarioConfig> scenario;

    FitOptions estimator;
    std::optional<std::unordered_map<std::string, double>> init_named;

    struct Contrast {
        std::vector<EffectKind> effects;
        std::vector<double> times;
        double x = 1.0;
        double x_prime = 0.0;
        std::optional<CovariateProfile> profile;  // absent = marginal
        double t0 = 0.0;
    };
    std::optional<Contrast> contrast;

    struct Bootstrap {
        int replicates = 1000;
        double level = 0.95;
        std::optional<std::uint64_t> seed;
    };
    Bootstrap bootstrap;

    struct Replicate {
        int replicates = 250;
        int oracle_population = 100000;
        int bootstrap_replicates = 300;
        bool init_at_truth = false;
    };
    Replicate replicate;

    static RunConfig from_file(const std::string& path);
    static RunConfig from_json_text(const std::string& text);

    // Working model for fit/effects: explicit model block, else the
    // scenario's spec.
    const ModelSpec& working_model() const;
    Contrast effective_contrast() const;  // defaults filled from the model
};

// Dataset directory format: baseline.csv (header: id[,t0][,covariates...])
// and long.csv (header: id,marker,time,value; marker in {L,M,Y}; rows with
// an empty value are skipped).
Dataset read_dataset(const std::string& dir);
void write_dataset(const Dataset& data, const std::string& dir);

void write_fit_json(const FitResult& fit, const ThetaMap& map,
                    const std::string& path);
FitResult read_fit_json(const std::string& path, const ThetaMap& map);

void write_effects_csv(const std::vector<ContrastSeries>& series,
                       const std::string& path);
void write_report_csv(const ReplicationReport& report, const std::string& path);
void write_truth_json(const TruthHandle& truth, const std::string& path);

// Shortest round-trip decimal (17 significant digits).
std::string format_double(double v);

// Write-to-temp-then-rename, so readers never observe partial files.
void atomic_write(const std::string& path, const std::string& content);

// Exit codes: 0 success, 1 validation/config error, 2 numerical failure.
int cli_dispatch(int argc, const char* const* argv);

} // namespace medpath
