#pragma once

#include <map>
#include <string>
#include <vector>

#include "medpath/causal.hpp"

namespace medpath {

enum class DropoutKind : int { None = 0, MCAR, MAR, MNAR };

std::string dropout_name(DropoutKind k);
DropoutKind dropout_from_name(const std::string& name);

// MCAR: independent per-subject dropout with the given probability, at a
// uniform time within the subject's follow-up. MAR/MNAR: observation stops
// once Y exceeds the replicate-level empirical quantile; MNAR also removes
// the triggering visit.
struct DropoutSpec {
    DropoutKind kind = DropoutKind::None;
    double rate = 0.10;      // MCAR
    double quantile = 0.75;  // MAR / MNAR

    void validate() const;
};

// Knobs of the simulation studies. scenario1/scenario2 build the presets;
// every field stays overridable so variant readings of the sub-scenarios
// remain runnable.
struct ScenarioConfig {
    std::string id;
    int n_subjects = 500;
    double delta_gen = 0.1;  // generation step; spec.delta is the fit step
    ModelSpec spec;
    Eigen::VectorXd theta_true;
    std::string exposure_name = "X";
    double exposure_prob = 0.6;
    double t0 = 0.0;  // latent-grid origin (0 in study time, 65 in age)
    double entry_min = 0.0, entry_max = 0.0;  // entry ~ U; equal = degenerate
    std::vector<double> visit_offsets;        // planned, relative to entry
    double jitter_sd = 0.05;
    // planned offsets at which L and M are collected; empty = all visits
    std::vector<double> lm_visit_offsets;
    // additional Bernoulli baseline covariates, e.g. {"C", 0.4}
    std::map<std::string, double> baseline_probs;
    DropoutSpec dropout;

    void validate() const;

    // 1A: N=500, step 0.1, MCAR 10%; 1B: step 0.05; 1C: N=250; 1D: MCAR 20%;
    // 1E: no dropout.
    static ScenarioConfig scenario1(const std::string& id, bool with_confounder);
    // 2A: MCAR 10%; 2B: L/M only at offsets {0,4,10}, no dropout;
    // 2C: MAR(0.75); 2D: MNAR(0.75).
    static ScenarioConfig scenario2(const std::string& id);
};

// Table-driven generating models of the two simulation studies.
ModelSpec scenario1_spec(bool with_confounder);
Eigen::VectorXd scenario1_truth(bool with_confounder);
ModelSpec scenario2_spec();
Eigen::VectorXd scenario2_truth();

Dataset generate_scenario1(const ScenarioConfig& cfg, std::uint64_t seed);
Dataset generate_scenario2(const ScenarioConfig& cfg, std::uint64_t seed);
Dataset generate_dataset(const ScenarioConfig& cfg, std::uint64_t seed);

Dataset apply_dropout(const Dataset& data, const DropoutSpec& mechanism,
                      std::uint64_t seed);

// Empirical true contrasts from a counterfactual population sharing random
// effects across exposure regimes, so decompositions telescope exactly.
struct TruthHandle {
    std::vector<EffectKind> effects;
    std::vector<double> times;
    std::map<EffectKind, Eigen::VectorXd> truth;
    std::map<EffectKind, Eigen::VectorXd> mc_se;
    int population = 0;
};

TruthHandle true_effects_oracle(const ScenarioConfig& cfg,
                                const std::vector<double>& times, double x,
                                double x_prime, int population = 100000,
                                std::uint64_t seed = 0);

struct ReplicateOptions {
    int bootstrap_R = 300;
    double level = 0.95;
    FitOptions fit;
    int oracle_population = 100000;
    double x = 1.0, x_prime = 0.0;
};

struct ReplicationReport {
    std::vector<EffectKind> effects;
    std::vector<double> times;
    Eigen::MatrixXd mean_rel_bias_pct;  // effects x times
    Eigen::MatrixXd coverage_pct;       // effects x times
    std::map<EffectKind, Eigen::VectorXd> truth;
    int replicates = 0;  // successful
    int failures = 0;
};

// Generate -> fit -> contrasts with bootstrap bands -> compare to the
// oracle, aggregated over K replicates. Deterministic given seed;
// per-replicate failures are counted, not fatal.
ReplicationReport replicate_study(const ScenarioConfig& cfg, int K,
                                  const std::vector<double>& times,
                                  const ReplicateOptions& opts,
                                  std::uint64_t seed);

} // namespace medpath
