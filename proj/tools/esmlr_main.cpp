#include <cstdint>
#include <fstream>
#include <iostream>
#include <stdexcept>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "esmlr/errors.hpp"
#include "esmlr/experiment.hpp"
#include "esmlr/hsi_data.hpp"
#include "esmlr/synthetic.hpp"

namespace {

struct CommonOpts {
    CLI::App* cmd = nullptr;
    std::string config;
    std::string cube, ground_truth, outdir, variant, mode, activation;
    std::vector<std::string> class_names;
    int L = 0, a = 0, connectivity = 0, train_per_class = 0, trials = 0, max_iter = 0;
    double b = 0, sigma = 0, pca_share = 0, tol = 0, mu = 0;
    std::uint64_t seed = 0;
    bool kernel_on_mapped = false, no_cap_rule = false;
    std::vector<int> emap_thresholds;
    std::vector<int> train_counts;
};

void add_common(CLI::App* cmd, CommonOpts& o) {
    o.cmd = cmd;
    cmd->add_option("--config", o.config, "JSON config file; flags below override its fields");
    cmd->add_option("--cube", o.cube, "input cube (<name>.bsq with JSON sidecar)");
    cmd->add_option("--gt", o.ground_truth, "ground truth (<name>.labels or <name>.csv)");
    cmd->add_option("--outdir", o.outdir, "output directory");
    cmd->add_option("--variant", o.variant, "smlr | k-smlr | esmlr | k-esmlr");
    cmd->add_option("--mode", o.mode, "spectral | emaps | mfl");
    cmd->add_option("--L", o.L, "random feature count (0 = default)");
    cmd->add_option("--activation", o.activation,
                    "linear | sigmoid | gaussian | hardlimit | multiquadric");
    cmd->add_option("--a", o.a, "ridge exponent, C = 2^a");
    cmd->add_option("--b", o.b, "sparsity exponent, lambda = 2^b");
    cmd->add_option("--sigma", o.sigma, "RBF width for kernel variants");
    cmd->add_flag("--kernel-on-mapped", o.kernel_on_mapped,
                  "kernel variants use the random features instead of the raw block");
    cmd->add_option("--emap-thresholds", o.emap_thresholds, "ascending area thresholds")
        ->delimiter(',');
    cmd->add_option("--connectivity", o.connectivity, "4 or 8");
    cmd->add_option("--pca-share", o.pca_share, "retained variance share");
    cmd->add_option("--q", o.train_per_class, "training samples per class");
    cmd->add_option("--train-counts", o.train_counts, "explicit per-class training counts")
        ->delimiter(',');
    cmd->add_flag("--no-cap-rule", o.no_cap_rule,
                  "error out instead of capping oversized requests at half the class");
    cmd->add_option("--class-names", o.class_names, "legend names, one per class")
        ->delimiter(',');
    cmd->add_option("--trials", o.trials, "Monte Carlo trials");
    cmd->add_option("--seed", o.seed, "base seed; trial t uses seed + t");
    cmd->add_option("--max-iter", o.max_iter, "solver iteration cap");
    cmd->add_option("--tol", o.tol, "solver relative objective tolerance");
    cmd->add_option("--mu", o.mu, "splitting penalty (0 = derived from lambda)");
}

esmlr::ExperimentConfig resolve(const CommonOpts& o) {
    esmlr::ExperimentConfig cfg =
        o.config.empty() ? esmlr::ExperimentConfig{} : esmlr::config_from_file(o.config);
    const CLI::App& cmd = *o.cmd;
    if (cmd.count("--cube")) cfg.cube = o.cube;
    if (cmd.count("--gt")) cfg.ground_truth = o.ground_truth;
    if (cmd.count("--outdir")) cfg.outdir = o.outdir;
    if (cmd.count("--variant")) cfg.variant = esmlr::variant_from_string(o.variant);
    if (cmd.count("--mode")) cfg.mode = esmlr::mode_from_string(o.mode);
    if (cmd.count("--L")) cfg.L = o.L;
    if (cmd.count("--activation")) cfg.activation = o.activation;
    if (cmd.count("--a")) cfg.a = o.a;
    if (cmd.count("--b")) cfg.b = o.b;
    if (cmd.count("--sigma")) cfg.sigma = o.sigma;
    if (cmd.count("--kernel-on-mapped")) cfg.kernel_on_mapped = true;
    if (cmd.count("--emap-thresholds")) cfg.emap_thresholds = o.emap_thresholds;
    if (cmd.count("--connectivity")) cfg.connectivity = o.connectivity;
    if (cmd.count("--pca-share")) cfg.pca_share = o.pca_share;
    if (cmd.count("--q")) cfg.train_per_class = o.train_per_class;
    if (cmd.count("--train-counts")) cfg.train_counts = o.train_counts;
    if (cmd.count("--no-cap-rule")) cfg.cap_rule = false;
    if (cmd.count("--class-names")) cfg.class_names = o.class_names;
    if (cmd.count("--trials")) cfg.trials = o.trials;
    if (cmd.count("--seed")) cfg.seed = o.seed;
    if (cmd.count("--max-iter")) cfg.max_iter = o.max_iter;
    if (cmd.count("--tol")) cfg.tol = o.tol;
    if (cmd.count("--mu")) cfg.mu = o.mu;
    return cfg;
}

struct SynthOpts {
    std::string out = "scene";
    esmlr::BlobSceneSpec spec;
    std::uint64_t seed = 7;
};

void run_synth(const SynthOpts& o) {
    const auto [cube, gt] = esmlr::make_blob_scene(o.spec, o.seed);
    esmlr::save_cube(cube, o.out + ".bsq");
    esmlr::save_ground_truth(gt, o.out + "_gt.labels");

    esmlr::ExperimentConfig cfg;
    cfg.cube = o.out + ".bsq";
    cfg.ground_truth = o.out + "_gt.labels";
    cfg.outdir = o.out + "_out";
    cfg.train_per_class = 20;
    cfg.trials = 5;
    cfg.seed = o.seed;
    std::ofstream out(o.out + "_config.json");
    if (!out) throw esmlr::DataError("cannot write " + o.out + "_config.json");
    out << esmlr::config_to_json(cfg) << "\n";
    std::cout << "wrote " << o.out << ".bsq, " << o.out << "_gt.labels and "
              << o.out << "_config.json\n";
}

void print_summary(const esmlr::ExperimentResult& result) {
    const auto& s = result.summary;
    std::cout.precision(4);
    std::cout << std::fixed;
    std::cout << "trials " << s.trials << "  OA " << 100.0 * s.oa_mean << " +- "
              << 100.0 * s.oa_std << "  AA " << 100.0 * s.aa_mean << " +- "
              << 100.0 * s.aa_std << "  kappa " << s.kappa_mean << " +- " << s.kappa_std
              << "\n";
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"extreme sparse multinomial logistic regression for hyperspectral images"};
    app.require_subcommand(1);

    CommonOpts emaps_opts, exp_opts, sweep_opts;
    add_common(app.add_subcommand("emaps", "build the attribute-profile feature stack"),
               emaps_opts);
    add_common(app.add_subcommand("experiment", "run the configured trials"), exp_opts);

    CLI::App* sweep_cmd =
        app.add_subcommand("sweep", "repeat the experiment along one parameter axis");
    add_common(sweep_cmd, sweep_opts);
    std::string sweep_axis;
    std::vector<double> sweep_values;
    sweep_cmd->add_option("--axis", sweep_axis, "L, a, b or Q")->required();
    sweep_cmd->add_option("--values", sweep_values, "grid for the axis")
        ->required()
        ->delimiter(',');

    CLI::App* synth_cmd = app.add_subcommand("synth", "generate a synthetic labeled scene");
    SynthOpts synth_opts;
    synth_cmd->add_option("--out", synth_opts.out, "output basename");
    synth_cmd->add_option("--height", synth_opts.spec.height, "scene height");
    synth_cmd->add_option("--width", synth_opts.spec.width, "scene width");
    synth_cmd->add_option("--bands", synth_opts.spec.bands, "spectral bands");
    synth_cmd->add_option("--classes", synth_opts.spec.classes, "class blobs (1..6)");
    synth_cmd->add_option("--noise", synth_opts.spec.noise_sigma, "noise level");
    synth_cmd->add_option("--seed", synth_opts.seed, "generator seed");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (emaps_opts.cmd->parsed()) {
            esmlr::run_emaps(resolve(emaps_opts));
        } else if (exp_opts.cmd->parsed()) {
            print_summary(esmlr::run_experiment(resolve(exp_opts)));
        } else if (sweep_cmd->parsed()) {
            esmlr::run_sweep(resolve(sweep_opts), esmlr::SweepSpec{sweep_axis, sweep_values});
        } else if (synth_cmd->parsed()) {
            run_synth(synth_opts);
        }
    } catch (const esmlr::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 1;
    } catch (const std::invalid_argument& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 1;
    } catch (const esmlr::DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 2;
    } catch (const esmlr::NumericalError& e) {
        std::cerr << "numerical error: " << e.what() << "\n";
        return 3;
    }
    return 0;
}
