#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "esmlr/esmlr_core.hpp"
#include "esmlr/evaluation.hpp"

namespace esmlr {

/// Everything a run needs, loadable from a JSON config file with flag
/// overrides on top.
struct ExperimentConfig {
    std::string cube;          // path to <name>.bsq
    std::string ground_truth;  // path to <name>.labels or <name>.csv
    std::string outdir = "out";
    std::vector<std::string> class_names;  // optional, for the legend

    Variant variant = Variant::Esmlr;
    FeatureMode mode = FeatureMode::Spectral;
    int L = 0;  // 0 -> 300, or 500 under MFL
    std::string activation = "sigmoid";
    int a = 10;      // ridge C = 2^a
    double b = -10;  // sparsity lambda = 2^b
    double sigma = 0.85;
    bool kernel_on_mapped = false;

    std::vector<int> emap_thresholds{100, 200, 500, 1000};
    int connectivity = 4;
    double pca_share = 0.99;

    int train_per_class = 0;        // Q
    std::vector<int> train_counts;  // explicit per-class counts
    bool cap_rule = true;

    int trials = 10;
    std::uint64_t seed = 0;

    int max_iter = 200;
    double tol = 1e-6;
    double mu = 0.0;  // 0 -> derived from lambda

    int resolved_L() const {
        if (L > 0) return L;
        return mode == FeatureMode::Mfl ? 500 : 300;
    }
};

ExperimentConfig config_from_file(const std::string& path);
void validate(const ExperimentConfig& cfg);
std::string config_to_json(const ExperimentConfig& cfg);

/// One sweep axis (L, a, b or Q) with its explicit value grid.
struct SweepSpec {
    std::string axis;
    std::vector<double> values;
};

struct ExperimentResult {
    std::vector<MetricsReport> reports;
    MetricsSummary summary;
};

/// Runs the configured trials (seeds = base seed + trial index), writes
/// trials.csv, timings.csv, summary.json, per-trial classification maps,
/// legend.csv and manifest.json under outdir.
ExperimentResult run_experiment(const ExperimentConfig& cfg);

/// Extracts the spatial features and dumps the stack plus the labeled-pixel
/// feature block under outdir.
void run_emaps(const ExperimentConfig& cfg);

/// One experiment per axis value with a shared base seed; long-form
/// sweep.csv under outdir.
void run_sweep(const ExperimentConfig& cfg, const SweepSpec& sweep);

}  // namespace esmlr
