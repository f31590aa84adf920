#include "esmlr/evaluation.hpp"

#include <cmath>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace esmlr {

ConfusionMatrix confusion(const std::vector<int>& y_true,
                          const std::vector<int>& y_pred, int class_count) {
    if (y_true.size() != y_pred.size())
        throw std::invalid_argument("confusion: label vectors differ in length");
    if (class_count < 1) throw std::invalid_argument("confusion: class_count must be >= 1");
    ConfusionMatrix cm;
    cm.counts = Eigen::MatrixXi::Zero(class_count, class_count);
    for (std::size_t i = 0; i < y_true.size(); ++i) {
        const int t = y_true[i];
        const int p = y_pred[i];
        if (t < 1 || t > class_count || p < 1 || p > class_count)
            throw std::invalid_argument("confusion: label outside 1.." +
                                        std::to_string(class_count));
        cm.counts(t - 1, p - 1) += 1;
    }
    return cm;
}

double oa(const ConfusionMatrix& cm) {
    const long total = cm.total();
    if (total == 0) throw std::invalid_argument("oa: empty confusion matrix");
    return static_cast<double>(cm.counts.diagonal().sum()) / static_cast<double>(total);
}

std::vector<double> per_class_accuracy(const ConfusionMatrix& cm) {
    std::vector<double> acc(static_cast<std::size_t>(cm.class_count()));
    for (int i = 0; i < cm.class_count(); ++i) {
        const long row = cm.counts.row(i).sum();
        if (row == 0)
            throw std::invalid_argument("per_class_accuracy: class " + std::to_string(i + 1) +
                                        " has no samples");
        acc[static_cast<std::size_t>(i)] =
            static_cast<double>(cm.counts(i, i)) / static_cast<double>(row);
    }
    return acc;
}

double aa(const ConfusionMatrix& cm) {
    const auto acc = per_class_accuracy(cm);
    double sum = 0.0;
    for (double a : acc) sum += a;
    return sum / static_cast<double>(acc.size());
}

double kappa(const ConfusionMatrix& cm) {
    const long total = cm.total();
    if (total == 0) throw std::invalid_argument("kappa: empty confusion matrix");
    const double n = static_cast<double>(total);
    const double po = oa(cm);
    double pe = 0.0;
    for (int i = 0; i < cm.class_count(); ++i) {
        const double row = cm.counts.row(i).sum();
        const double col = cm.counts.col(i).sum();
        pe += row * col / (n * n);
    }
    if (pe >= 1.0) return po >= 1.0 ? 1.0 : 0.0;
    return (po - pe) / (1.0 - pe);
}

MetricsReport make_report(const ConfusionMatrix& cm, double train_seconds,
                          double test_seconds, std::uint64_t trial_seed) {
    MetricsReport r;
    r.oa = oa(cm);
    r.aa = aa(cm);
    r.kappa = kappa(cm);
    r.per_class = per_class_accuracy(cm);
    r.train_seconds = train_seconds;
    r.test_seconds = test_seconds;
    r.trial_seed = trial_seed;
    return r;
}

namespace {

struct MeanStd {
    double mean = 0.0;
    double std = 0.0;
};

MeanStd mean_std(const std::vector<double>& xs) {
    MeanStd m;
    for (double x : xs) m.mean += x;
    m.mean /= static_cast<double>(xs.size());
    if (xs.size() > 1) {
        double ss = 0.0;
        for (double x : xs) ss += (x - m.mean) * (x - m.mean);
        m.std = std::sqrt(ss / static_cast<double>(xs.size() - 1));
    }
    return m;
}

}  // namespace

MetricsSummary aggregate(const std::vector<MetricsReport>& reports) {
    if (reports.empty()) throw std::invalid_argument("aggregate: no trials");
    const std::size_t classes = reports.front().per_class.size();
    for (const auto& r : reports)
        if (r.per_class.size() != classes)
            throw std::invalid_argument("aggregate: trials disagree on class count");

    MetricsSummary s;
    s.trials = static_cast<int>(reports.size());
    const auto collect = [&](auto&& field) {
        std::vector<double> xs;
        xs.reserve(reports.size());
        for (const auto& r : reports) xs.push_back(field(r));
        return mean_std(xs);
    };
    const MeanStd o = collect([](const MetricsReport& r) { return r.oa; });
    const MeanStd a = collect([](const MetricsReport& r) { return r.aa; });
    const MeanStd k = collect([](const MetricsReport& r) { return r.kappa; });
    s.oa_mean = o.mean;
    s.oa_std = o.std;
    s.aa_mean = a.mean;
    s.aa_std = a.std;
    s.kappa_mean = k.mean;
    s.kappa_std = k.std;
    s.train_seconds_mean =
        collect([](const MetricsReport& r) { return r.train_seconds; }).mean;
    s.test_seconds_mean =
        collect([](const MetricsReport& r) { return r.test_seconds; }).mean;
    s.per_class_mean.resize(classes);
    s.per_class_std.resize(classes);
    for (std::size_t c = 0; c < classes; ++c) {
        const MeanStd m = collect([c](const MetricsReport& r) { return r.per_class[c]; });
        s.per_class_mean[c] = m.mean;
        s.per_class_std[c] = m.std;
    }
    return s;
}

namespace {

std::string format_double(double v) {
    std::ostringstream os;
    os.precision(10);
    os << v;
    return os.str();
}

}  // namespace

void write_trials_csv(std::ostream& out, const std::vector<MetricsReport>& reports,
                      const std::string& variant, const std::string& mode,
                      bool include_timings) {
    if (reports.empty()) throw std::invalid_argument("write_trials_csv: no trials");
    const std::size_t classes = reports.front().per_class.size();
    out << "variant,mode,trial,seed,oa,aa,kappa";
    for (std::size_t c = 0; c < classes; ++c) out << ",class" << (c + 1);
    if (include_timings) out << ",train_seconds,test_seconds";
    out << "\n";
    for (std::size_t t = 0; t < reports.size(); ++t) {
        const auto& r = reports[t];
        out << variant << "," << mode << "," << t << "," << r.trial_seed << ","
            << format_double(r.oa) << "," << format_double(r.aa) << ","
            << format_double(r.kappa);
        for (double a : r.per_class) out << "," << format_double(a);
        if (include_timings)
            out << "," << format_double(r.train_seconds) << ","
                << format_double(r.test_seconds);
        out << "\n";
    }
}

std::string summary_to_json(const MetricsSummary& summary,
                            const std::vector<MetricsReport>& reports,
                            const std::string& variant, const std::string& mode) {
    nlohmann::json trials = nlohmann::json::array();
    for (std::size_t t = 0; t < reports.size(); ++t) {
        const auto& r = reports[t];
        trials.push_back({
            {"trial", t},
            {"seed", r.trial_seed},
            {"oa", r.oa},
            {"aa", r.aa},
            {"kappa", r.kappa},
            {"per_class", r.per_class},
        });
    }
    nlohmann::json j{
        {"variant", variant},
        {"mode", mode},
        {"trials", summary.trials},
        {"oa", {{"mean", summary.oa_mean}, {"std", summary.oa_std}}},
        {"aa", {{"mean", summary.aa_mean}, {"std", summary.aa_std}}},
        {"kappa", {{"mean", summary.kappa_mean}, {"std", summary.kappa_std}}},
        {"per_class", {{"mean", summary.per_class_mean}, {"std", summary.per_class_std}}},
        {"train_seconds_mean", summary.train_seconds_mean},
        {"test_seconds_mean", summary.test_seconds_mean},
        {"per_trial", trials},
    };
    return j.dump(2);
}

}  // namespace esmlr
