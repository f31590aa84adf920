#include "esmlr/experiment.hpp"

#include <algorithm>
#include <array>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "esmlr/emaps.hpp"
#include "esmlr/errors.hpp"
#include "esmlr/rng.hpp"

namespace esmlr {

namespace {

void assign_if_present(const nlohmann::json& j, const char* key, auto& target) {
    if (auto it = j.find(key); it != j.end()) it->get_to(target);
}

const std::array<const char*, 23> kConfigKeys = {
    "cube",        "ground_truth", "outdir",          "class_names",
    "variant",     "mode",         "L",               "activation",
    "a",           "b",            "sigma",           "kernel_on_mapped",
    "emap_thresholds", "connectivity", "pca_share",   "train_per_class",
    "train_counts", "cap_rule",    "trials",          "seed",
    "max_iter",    "tol",          "mu"};

}  // namespace

ExperimentConfig config_from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("config " + path + " is not valid JSON: " + e.what());
    }
    if (!j.is_object()) throw ConfigError("config " + path + " must be a JSON object");
    for (const auto& [key, value] : j.items()) {
        (void)value;
        if (std::find_if(kConfigKeys.begin(), kConfigKeys.end(), [&](const char* k) {
                return key == k;
            }) == kConfigKeys.end())
            throw ConfigError("unknown config key: " + key);
    }

    ExperimentConfig cfg;
    try {
        std::string variant = to_string(cfg.variant);
        std::string mode = to_string(cfg.mode);
        assign_if_present(j, "cube", cfg.cube);
        assign_if_present(j, "ground_truth", cfg.ground_truth);
        assign_if_present(j, "outdir", cfg.outdir);
        assign_if_present(j, "class_names", cfg.class_names);
        assign_if_present(j, "variant", variant);
        assign_if_present(j, "mode", mode);
        assign_if_present(j, "L", cfg.L);
        assign_if_present(j, "activation", cfg.activation);
        assign_if_present(j, "a", cfg.a);
        assign_if_present(j, "b", cfg.b);
        assign_if_present(j, "sigma", cfg.sigma);
        assign_if_present(j, "kernel_on_mapped", cfg.kernel_on_mapped);
        assign_if_present(j, "emap_thresholds", cfg.emap_thresholds);
        assign_if_present(j, "connectivity", cfg.connectivity);
        assign_if_present(j, "pca_share", cfg.pca_share);
        assign_if_present(j, "train_per_class", cfg.train_per_class);
        assign_if_present(j, "train_counts", cfg.train_counts);
        assign_if_present(j, "cap_rule", cfg.cap_rule);
        assign_if_present(j, "trials", cfg.trials);
        assign_if_present(j, "seed", cfg.seed);
        assign_if_present(j, "max_iter", cfg.max_iter);
        assign_if_present(j, "tol", cfg.tol);
        assign_if_present(j, "mu", cfg.mu);
        cfg.variant = variant_from_string(variant);
        cfg.mode = mode_from_string(mode);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("config " + path + ": " + e.what());
    } catch (const std::invalid_argument& e) {
        throw ConfigError("config " + path + ": " + e.what());
    }
    return cfg;
}

void validate(const ExperimentConfig& cfg) {
    if (cfg.cube.empty()) throw ConfigError("config needs a cube path");
    if (cfg.ground_truth.empty()) throw ConfigError("config needs a ground_truth path");
    if (cfg.outdir.empty()) throw ConfigError("config needs an output directory");
    if (cfg.L < 0) throw ConfigError("L must be >= 0");
    try {
        activation_from_string(cfg.activation);
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    }
    const bool kernel_variant =
        cfg.variant == Variant::KSmlr || cfg.variant == Variant::KEsmlr;
    if (kernel_variant && cfg.mode == FeatureMode::Mfl)
        throw ConfigError("kernel variants cannot be combined with MFL fusion");
    if (kernel_variant && cfg.sigma <= 0.0) throw ConfigError("sigma must be positive");
    if (cfg.connectivity != 4 && cfg.connectivity != 8)
        throw ConfigError("connectivity must be 4 or 8");
    for (std::size_t i = 0; i < cfg.emap_thresholds.size(); ++i) {
        if (cfg.emap_thresholds[i] < 1)
            throw ConfigError("area thresholds must be positive");
        if (i > 0 && cfg.emap_thresholds[i] <= cfg.emap_thresholds[i - 1])
            throw ConfigError("area thresholds must be strictly ascending");
    }
    if (cfg.pca_share <= 0.0 || cfg.pca_share > 1.0)
        throw ConfigError("pca_share must lie in (0, 1]");
    if (cfg.train_per_class < 0) throw ConfigError("train_per_class must be >= 0");
    for (int c : cfg.train_counts)
        if (c < 1) throw ConfigError("train_counts entries must be >= 1");
    if (cfg.train_per_class == 0 && cfg.train_counts.empty())
        throw ConfigError("need train_per_class or train_counts");
    if (cfg.trials < 1) throw ConfigError("trials must be >= 1");
    if (cfg.max_iter < 1) throw ConfigError("max_iter must be >= 1");
    if (cfg.tol <= 0.0) throw ConfigError("tol must be positive");
    if (cfg.mu < 0.0) throw ConfigError("mu must be >= 0");
}

std::string config_to_json(const ExperimentConfig& cfg) {
    nlohmann::json j{
        {"cube", cfg.cube},
        {"ground_truth", cfg.ground_truth},
        {"outdir", cfg.outdir},
        {"class_names", cfg.class_names},
        {"variant", to_string(cfg.variant)},
        {"mode", to_string(cfg.mode)},
        {"L", cfg.L},
        {"activation", cfg.activation},
        {"a", cfg.a},
        {"b", cfg.b},
        {"sigma", cfg.sigma},
        {"kernel_on_mapped", cfg.kernel_on_mapped},
        {"emap_thresholds", cfg.emap_thresholds},
        {"connectivity", cfg.connectivity},
        {"pca_share", cfg.pca_share},
        {"train_per_class", cfg.train_per_class},
        {"train_counts", cfg.train_counts},
        {"cap_rule", cfg.cap_rule},
        {"trials", cfg.trials},
        {"seed", cfg.seed},
        {"max_iter", cfg.max_iter},
        {"tol", cfg.tol},
        {"mu", cfg.mu},
    };
    return j.dump(2);
}

namespace {

namespace fs = std::filesystem;

int worker_count(int trials) {
    int n = 0;
    if (const char* env = std::getenv("ESMLR_THREADS")) n = std::atoi(env);
    if (n < 1) n = static_cast<int>(std::thread::hardware_concurrency());
    if (n < 1) n = 1;
    return std::min(n, trials);
}

std::ofstream open_out(const fs::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write " + path.string());
    return out;
}

std::array<int, 3> class_color(int label, int class_count) {
    if (label == 0) return {0, 0, 0};
    const double h = 360.0 * (label - 1) / std::max(1, class_count);
    const double s = 0.65, v = 0.95;
    const double c = v * s;
    const double x = c * (1.0 - std::abs(std::fmod(h / 60.0, 2.0) - 1.0));
    const double m = v - c;
    double r = 0, g = 0, b = 0;
    if (h < 60) { r = c; g = x; }
    else if (h < 120) { r = x; g = c; }
    else if (h < 180) { g = c; b = x; }
    else if (h < 240) { g = x; b = c; }
    else if (h < 300) { r = x; b = c; }
    else { r = c; b = x; }
    const auto to255 = [&](double u) { return static_cast<int>(std::lround(255.0 * (u + m))); };
    return {to255(r), to255(g), to255(b)};
}

// Only test pixels are painted, so overall accuracy recomputed from the map
// against the ground truth matches the reported value exactly.
void write_map_pgm(const fs::path& path, const GroundTruth& gt,
                   const std::vector<std::pair<int, int>>& pixel_index,
                   const std::vector<int>& predictions,
                   const std::vector<int>& test_idx) {
    std::vector<std::uint8_t> img(static_cast<std::size_t>(gt.height) * gt.width, 0);
    for (int i : test_idx) {
        const auto [r, c] = pixel_index[static_cast<std::size_t>(i)];
        img[static_cast<std::size_t>(r) * gt.width + c] =
            static_cast<std::uint8_t>(predictions[static_cast<std::size_t>(i)]);
    }
    auto out = open_out(path);
    out << "P5\n" << gt.width << " " << gt.height << "\n255\n";
    out.write(reinterpret_cast<const char*>(img.data()),
              static_cast<std::streamsize>(img.size()));
}

void write_legend(const fs::path& path, int class_count,
                  const std::vector<std::string>& names) {
    auto out = open_out(path);
    out << "label,name,r,g,b\n";
    for (int label = 0; label <= class_count; ++label) {
        const std::string name =
            label == 0 ? "unlabeled"
            : (static_cast<std::size_t>(label) <= names.size() && !names.empty()
                   ? names[static_cast<std::size_t>(label - 1)]
                   : "class" + std::to_string(label));
        const auto [r, g, b] = class_color(label, class_count);
        out << label << "," << name << "," << r << "," << g << "," << b << "\n";
    }
}

struct TrialOutput {
    MetricsReport report;
    std::vector<int> predictions;  // over every labeled pixel
    std::vector<int> test_idx;
};

double seconds_since(std::chrono::steady_clock::time_point start) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

}  // namespace

ExperimentResult run_experiment(const ExperimentConfig& cfg) {
    validate(cfg);

    HsiCube cube = normalize_unit_max(load_cube(cfg.cube));
    const GroundTruth gt = load_ground_truth(cfg.ground_truth);
    const LabeledDataset ds = flatten_labeled(cube, gt);
    if (ds.class_count > 255)
        throw DataError("classification maps support at most 255 classes");
    if (!cfg.class_names.empty() &&
        cfg.class_names.size() != static_cast<std::size_t>(ds.class_count))
        throw ConfigError("class_names must list one name per class");

    Eigen::MatrixXd spatial;
    if (cfg.mode != FeatureMode::Spectral) {
        const EmapStack stack =
            build_emaps(cube, ApSpec{cfg.emap_thresholds, cfg.connectivity}, cfg.pca_share);
        spatial = emap_features(stack, ds.pixel_index).values;
    }

    TrainConfig base;
    base.variant = cfg.variant;
    base.mode = cfg.mode;
    base.map_dim = cfg.resolved_L();
    base.activation = activation_from_string(cfg.activation);
    base.ridge_c = std::ldexp(1.0, cfg.a);
    base.lorsal.lambda = std::pow(2.0, cfg.b);
    base.lorsal.mu = cfg.mu;
    base.lorsal.max_iter = cfg.max_iter;
    base.lorsal.tol = cfg.tol;
    base.sigma = cfg.sigma;
    base.kernel_on_mapped = cfg.kernel_on_mapped;
    base.emap_thresholds = cfg.emap_thresholds;
    base.connectivity = cfg.connectivity;
    base.pca_share = cfg.pca_share;

    SplitSpec split_spec;
    split_spec.per_class = cfg.train_per_class;
    split_spec.class_counts = cfg.train_counts;
    split_spec.cap_rule = cfg.cap_rule;

    std::vector<std::uint64_t> trial_seeds(static_cast<std::size_t>(cfg.trials));
    std::vector<std::uint64_t> map_seeds(static_cast<std::size_t>(cfg.trials));
    for (int t = 0; t < cfg.trials; ++t) {
        trial_seeds[static_cast<std::size_t>(t)] = cfg.seed + static_cast<std::uint64_t>(t);
        map_seeds[static_cast<std::size_t>(t)] =
            mix_seed(trial_seeds[static_cast<std::size_t>(t)]);
    }

    const auto run_trial = [&](int t) {
        const std::size_t ti = static_cast<std::size_t>(t);
        Rng rng(trial_seeds[ti]);
        const Split split = split_per_class(ds, split_spec, rng);

        const auto take = [&](const Eigen::MatrixXd& m, const std::vector<int>& idx) {
            Eigen::MatrixXd out(m.rows(), static_cast<Eigen::Index>(idx.size()));
            for (std::size_t i = 0; i < idx.size(); ++i) out.col(static_cast<Eigen::Index>(i)) = m.col(idx[i]);
            return out;
        };
        const Eigen::MatrixXd spe_train = take(ds.features, split.train_idx);
        const Eigen::MatrixXd spa_train =
            spatial.size() > 0 ? take(spatial, split.train_idx) : Eigen::MatrixXd();
        std::vector<int> labels_train;
        labels_train.reserve(split.train_idx.size());
        for (int i : split.train_idx) labels_train.push_back(ds.labels[static_cast<std::size_t>(i)]);

        TrainConfig tc = base;
        tc.seed = map_seeds[ti];

        const auto t0 = std::chrono::steady_clock::now();
        const TrainedModel model =
            train(spe_train, spa_train, labels_train, ds.class_count, tc);
        const double train_seconds = seconds_since(t0);

        Eigen::MatrixXd raw_all;
        switch (cfg.mode) {
            case FeatureMode::Spectral: raw_all = ds.features; break;
            case FeatureMode::Emaps: raw_all = spatial; break;
            case FeatureMode::Mfl: {
                FeatureBlock spe{ds.features, BlockTag::Spectral, false};
                FeatureBlock spa{spatial, BlockTag::Spatial, false};
                raw_all = concat_mfl(spe, spa).values;
                break;
            }
        }
        const auto t1 = std::chrono::steady_clock::now();
        TrialOutput out;
        out.predictions = predict(model, raw_all);
        const double test_seconds = seconds_since(t1);

        std::vector<int> y_true, y_pred;
        y_true.reserve(split.test_idx.size());
        y_pred.reserve(split.test_idx.size());
        for (int i : split.test_idx) {
            y_true.push_back(ds.labels[static_cast<std::size_t>(i)]);
            y_pred.push_back(out.predictions[static_cast<std::size_t>(i)]);
        }
        const ConfusionMatrix cm = confusion(y_true, y_pred, ds.class_count);
        out.report = make_report(cm, train_seconds, test_seconds, trial_seeds[ti]);
        out.test_idx = split.test_idx;
        return out;
    };

    std::vector<TrialOutput> outputs(static_cast<std::size_t>(cfg.trials));
    std::vector<std::exception_ptr> failures(static_cast<std::size_t>(cfg.trials));
    {
        std::atomic<int> next{0};
        const auto worker = [&] {
            for (int t; (t = next.fetch_add(1)) < cfg.trials;) {
                try {
                    outputs[static_cast<std::size_t>(t)] = run_trial(t);
                } catch (...) {
                    failures[static_cast<std::size_t>(t)] = std::current_exception();
                }
            }
        };
        std::vector<std::thread> pool;
        for (int w = 1; w < worker_count(cfg.trials); ++w) pool.emplace_back(worker);
        worker();
        for (auto& th : pool) th.join();
    }

    const fs::path outdir(cfg.outdir);
    fs::create_directories(outdir);

    const auto write_manifest = [&](bool aborted) {
        nlohmann::json j{
            {"config", nlohmann::json::parse(config_to_json(cfg))},
            {"resolved",
             {{"L", cfg.resolved_L()},
              {"ridge_c", base.ridge_c},
              {"lambda", base.lorsal.lambda},
              {"mu", base.lorsal.effective_mu()}}},
            {"class_count", ds.class_count},
            {"labeled_pixels", ds.sample_count()},
            {"trial_seeds", trial_seeds},
            {"map_seeds", map_seeds},
            {"aborted", aborted},
        };
        open_out(outdir / "manifest.json") << j.dump(2) << "\n";
    };

    for (int t = 0; t < cfg.trials; ++t)
        if (failures[static_cast<std::size_t>(t)]) {
            write_manifest(true);
            std::rethrow_exception(failures[static_cast<std::size_t>(t)]);
        }

    ExperimentResult result;
    result.reports.reserve(outputs.size());
    for (const auto& o : outputs) result.reports.push_back(o.report);
    result.summary = aggregate(result.reports);

    {
        auto out = open_out(outdir / "trials.csv");
        write_trials_csv(out, result.reports, to_string(cfg.variant), to_string(cfg.mode),
                         /*include_timings=*/false);
    }
    {
        auto out = open_out(outdir / "timings.csv");
        out << "trial,seed,train_seconds,test_seconds\n";
        out.precision(6);
        for (std::size_t t = 0; t < result.reports.size(); ++t) {
            const auto& r = result.reports[t];
            out << t << "," << r.trial_seed << "," << r.train_seconds << ","
                << r.test_seconds << "\n";
        }
    }
    open_out(outdir / "summary.json")
        << summary_to_json(result.summary, result.reports, to_string(cfg.variant),
                           to_string(cfg.mode))
        << "\n";
    for (int t = 0; t < cfg.trials; ++t)
        write_map_pgm(outdir / ("map_trial" + std::to_string(t) + ".pgm"), gt,
                      ds.pixel_index, outputs[static_cast<std::size_t>(t)].predictions,
                      outputs[static_cast<std::size_t>(t)].test_idx);
    write_legend(outdir / "legend.csv", ds.class_count, cfg.class_names);
    write_manifest(false);
    return result;
}

void run_emaps(const ExperimentConfig& cfg) {
    if (cfg.cube.empty()) throw ConfigError("config needs a cube path");
    if (cfg.outdir.empty()) throw ConfigError("config needs an output directory");
    HsiCube cube = normalize_unit_max(load_cube(cfg.cube));
    const EmapStack stack =
        build_emaps(cube, ApSpec{cfg.emap_thresholds, cfg.connectivity}, cfg.pca_share);

    const fs::path outdir(cfg.outdir);
    fs::create_directories(outdir);
    dump_emap_stack(stack, (outdir / "emaps").string());

    if (!cfg.ground_truth.empty()) {
        const GroundTruth gt = load_ground_truth(cfg.ground_truth);
        const LabeledDataset ds = flatten_labeled(cube, gt);
        dump_feature_block(emap_features(stack, ds.pixel_index),
                           (outdir / "emap_features").string());
    }
}

void run_sweep(const ExperimentConfig& cfg, const SweepSpec& sweep) {
    validate(cfg);
    if (sweep.values.empty()) throw ConfigError("sweep needs at least one value");
    const bool is_int_axis =
        sweep.axis == "L" || sweep.axis == "a" || sweep.axis == "Q";
    if (!is_int_axis && sweep.axis != "b")
        throw ConfigError("sweep axis must be one of L, a, b, Q");

    struct Row {
        double value;
        std::size_t trial;
        MetricsReport report;
    };
    std::vector<Row> rows;

    for (double value : sweep.values) {
        ExperimentConfig sub = cfg;
        std::ostringstream label;
        if (is_int_axis) {
            const int v = static_cast<int>(std::llround(value));
            if (sweep.axis == "L") {
                if (v < 1) throw ConfigError("sweep L values must be >= 1");
                sub.L = v;
            } else if (sweep.axis == "a") {
                sub.a = v;
            } else {
                if (v < 1) throw ConfigError("sweep Q values must be >= 1");
                sub.train_per_class = v;
                sub.train_counts.clear();
            }
            label << sweep.axis << "_" << v;
        } else {
            sub.b = value;
            label << "b_" << value;
        }
        sub.outdir = (fs::path(cfg.outdir) / label.str()).string();
        const ExperimentResult result = run_experiment(sub);
        for (std::size_t t = 0; t < result.reports.size(); ++t)
            rows.push_back(Row{value, t, result.reports[t]});
    }

    fs::create_directories(cfg.outdir);
    auto out = open_out(fs::path(cfg.outdir) / "sweep.csv");
    out << "axis,value,variant,mode,trial,seed,oa,aa,kappa\n";
    out.precision(10);
    for (const auto& row : rows) {
        out << sweep.axis << "," << row.value << "," << to_string(cfg.variant) << ","
            << to_string(cfg.mode) << "," << row.trial << "," << row.report.trial_seed
            << "," << row.report.oa << "," << row.report.aa << "," << row.report.kappa
            << "\n";
    }
}

}  // namespace esmlr
