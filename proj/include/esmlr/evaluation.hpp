#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace esmlr {

/// Row = true class, column = predicted class, both 1-based labels shifted
/// down by one.
struct ConfusionMatrix {
    Eigen::MatrixXi counts;

    int class_count() const { return static_cast<int>(counts.rows()); }
    long total() const { return counts.sum(); }
};

ConfusionMatrix confusion(const std::vector<int>& y_true,
                          const std::vector<int>& y_pred, int class_count);

double oa(const ConfusionMatrix& cm);
std::vector<double> per_class_accuracy(const ConfusionMatrix& cm);
double aa(const ConfusionMatrix& cm);

/// Cohen's kappa. When chance agreement is 1 (single-class degenerate case)
/// the value is 1 for perfect agreement and 0 otherwise.
double kappa(const ConfusionMatrix& cm);

struct MetricsReport {
    double oa = 0.0;
    double aa = 0.0;
    double kappa = 0.0;
    std::vector<double> per_class;
    double train_seconds = 0.0;
    double test_seconds = 0.0;
    std::uint64_t trial_seed = 0;
};

MetricsReport make_report(const ConfusionMatrix& cm, double train_seconds,
                          double test_seconds, std::uint64_t trial_seed);

/// Means and sample standard deviations over trials.
struct MetricsSummary {
    int trials = 0;
    double oa_mean = 0.0, oa_std = 0.0;
    double aa_mean = 0.0, aa_std = 0.0;
    double kappa_mean = 0.0, kappa_std = 0.0;
    std::vector<double> per_class_mean, per_class_std;
    double train_seconds_mean = 0.0;
    double test_seconds_mean = 0.0;
};

MetricsSummary aggregate(const std::vector<MetricsReport>& reports);

/// One CSV row per trial: variant, mode, trial, seed, oa, aa, kappa,
/// per-class accuracies and, when requested, wall-clock timings. Timings are
/// optional so reproducible outputs can omit them.
void write_trials_csv(std::ostream& out, const std::vector<MetricsReport>& reports,
                      const std::string& variant, const std::string& mode,
                      bool include_timings);

std::string summary_to_json(const MetricsSummary& summary,
                            const std::vector<MetricsReport>& reports,
                            const std::string& variant, const std::string& mode);

}  // namespace esmlr
