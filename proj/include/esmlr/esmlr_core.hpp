#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "esmlr/feature_maps.hpp"

namespace esmlr {

/// One-hot targets, (M-1) x n. Column j has a single 1 in row (label-1), or is
/// all zero when sample j belongs to class M.
using TargetMatrix = Eigen::MatrixXd;

/// Regressor coefficients, (M-1) x L'. The M-th class row is fixed to zero by
/// convention and never materialized.
using Regressor = Eigen::MatrixXd;

struct RidgeConfig {
    double c = 1024.0;  // regularization weight C = 2^a
};

/// Sparse MAP solver parameters. mu <= 0 selects the default penalty derived
/// from lambda.
struct LorsalConfig {
    double lambda = 0.0;      // sparsity weight, lambda = 2^b
    double mu = 0.0;          // augmented-Lagrangian penalty; <= 0 -> derived
    int max_iter = 200;       // outer iteration cap
    double tol = 1e-6;        // relative objective-change stop
    int inner_max_iter = 100; // splitting iterations per outer step
    double inner_tol = 1e-6;  // relative split-agreement stop

    double effective_mu() const {
        if (mu > 0.0) return mu;
        if (lambda == 0.0) return 1e-2;
        return std::max(0.1 * lambda, 1e-4);
    }
};

/// Per-outer-iteration diagnostics of a solver run.
struct TrainStats {
    std::vector<double> objective;  // starts with the objective at W0
    int outer_iterations = 0;
    bool converged = false;
};

enum class Variant { Smlr, KSmlr, Esmlr, KEsmlr };
enum class FeatureMode { Spectral, Emaps, Mfl };

Variant variant_from_string(const std::string& name);
std::string to_string(Variant v);
FeatureMode mode_from_string(const std::string& name);
std::string to_string(FeatureMode m);

/// Everything needed to reproduce the feature construction at predict time.
struct PipelineDesc {
    Variant variant = Variant::Esmlr;
    FeatureMode mode = FeatureMode::Spectral;
    int input_dim = 0;     // raw columns fed to predict must have this many rows
    int spectral_dim = 0;  // MFL layout: rows 0..spectral_dim-1 are spectral
    int spatial_dim = 0;

    bool has_map = false;
    int map_dim = 0;
    ActivationKind activation = ActivationKind::Sigmoid;
    std::uint64_t map_seed = 0;

    bool has_kernel = false;
    double sigma = 0.0;
    bool kernel_on_mapped = false;
    Eigen::MatrixXd anchors;  // kernel anchors (raw or mapped, per the flag)

    // Spatial-feature provenance, carried for reproducibility.
    std::vector<int> emap_thresholds;
    int connectivity = 4;
    double pca_share = 0.99;
};

struct TrainedModel {
    Regressor regressor;
    PipelineDesc pipeline;
    int class_count = 0;
};

struct TrainConfig {
    Variant variant = Variant::Esmlr;
    FeatureMode mode = FeatureMode::Spectral;
    int map_dim = 300;
    ActivationKind activation = ActivationKind::Sigmoid;
    double ridge_c = 1024.0;
    LorsalConfig lorsal;
    double sigma = 0.85;
    bool kernel_on_mapped = false;
    std::uint64_t seed = 0;

    // Spatial-feature provenance recorded into the model descriptor.
    std::vector<int> emap_thresholds{100, 200, 500, 1000};
    int connectivity = 4;
    double pca_share = 0.99;
};

TargetMatrix one_hot_targets(const std::vector<int>& labels, int class_count);

/// Closed-form regularized least-squares initializer,
/// W0 = Y H' (H H' + I/C)^-1. Uses the dual-size system when L' > n; the two
/// forms agree up to numerical precision.
Regressor ridge_init(const FeatureBlock& H, const TargetMatrix& Y,
                     const RidgeConfig& cfg);

/// Class posteriors, M x n. Row m < M-1 is exp(w_m.h) over the partition
/// 1 + sum_k exp(w_k.h); the last row is the remainder class. Computed with
/// max subtraction, columns sum to one.
Eigen::MatrixXd mlr_posteriors(const Regressor& w, const FeatureBlock& H);

/// Log-likelihood minus lambda * |W|_1. Class-M samples contribute only the
/// negative log-partition term.
double map_objective(const Regressor& w, const FeatureBlock& H,
                     const std::vector<int>& labels, double lambda);

/// Analytic log-likelihood gradient (Y - P) H'.
Eigen::MatrixXd mlr_gradient(const Regressor& w, const FeatureBlock& H,
                             const TargetMatrix& Y);

inline double soft_threshold(double v, double t) {
    if (v > t) return v - t;
    if (v < -t) return v + t;
    return 0.0;
}

/// Sparse MAP solver: majorizes the likelihood with the Bohning quadratic
/// bound and solves each surrogate by variable splitting with an
/// augmented-Lagrangian penalty. The returned iterate carries exact zeros from
/// the soft-threshold step and the objective sequence is non-decreasing.
Regressor lorsal_train(const FeatureBlock& H, const std::vector<int>& labels,
                       const Regressor& w0, const LorsalConfig& cfg,
                       TrainStats* stats = nullptr);

/// Argmax labels from the (M-1) x n score matrix with the implicit zero row
/// for class M appended; ties break to the smallest class index.
std::vector<int> score_argmax(const Eigen::MatrixXd& scores);

/// Full training entry point. `spectral` and `spatial` are the raw feature
/// blocks over the training columns; the mode selects which of them (or their
/// concatenation) feeds the variant's feature construction.
TrainedModel train(const Eigen::MatrixXd& spectral, const Eigen::MatrixXd& spatial,
                   const std::vector<int>& labels, int class_count,
                   const TrainConfig& cfg, TrainStats* stats = nullptr);

/// Rebuilds the feature pipeline from the descriptor and scores raw columns.
std::vector<int> predict(const TrainedModel& model, const Eigen::MatrixXd& X);

/// The pipeline features for raw input columns (exposed for diagnostics).
FeatureBlock pipeline_features(const PipelineDesc& pipeline, const Eigen::MatrixXd& X);

/// Writes `<base>.json` (pipeline descriptor) plus `<base>.w.f32` and, for
/// kernel variants, `<base>.anchors.f32`.
void save_model(const TrainedModel& model, const std::string& basepath);
TrainedModel load_model(const std::string& basepath);

}  // namespace esmlr
